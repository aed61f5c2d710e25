"""Convex bodies in R^d: hulls, support functions, Hausdorff distances and
homogeneous functionals.

Every metric used downstream factors through support functions, so the hull
only has to be exact where that is cheap (d <= 3). In higher dimension the
generating point set is kept as-is; support evaluations stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.distance import directed_hausdorff
from scipy.special import gammaln

UNIT_TOL = 1e-9
PSD_RTOL = 1e-10


@dataclass
class ConvexBody:
    """Compact convex set given as the hull of ``vertices``.

    For ``dim <= 3`` bodies produced by :func:`convex_hull` hold extreme points
    only; for larger ``dim`` they may hold interior generators too.
    """

    vertices: np.ndarray
    support_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] == 0:
            raise ValueError("empty point set")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        self.vertices = v

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def support(self, theta) -> float:
        key = tuple(np.asarray(theta, dtype=float).tolist())
        if key not in self.support_cache:
            self.support_cache[key] = float(np.max(self.vertices @ np.asarray(key)))
        return self.support_cache[key]

    def support_values(self, directions: np.ndarray) -> np.ndarray:
        return np.max(directions @ self.vertices.T, axis=1)


@dataclass
class Ellipsoid:
    """Image of the Euclidean unit ball under ``sqrt_sigma``."""

    sigma: np.ndarray
    sqrt_sigma: np.ndarray

    @classmethod
    def from_sigma(cls, sigma, rtol: float = PSD_RTOL) -> "Ellipsoid":
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        return cls(sigma=sigma, sqrt_sigma=psd_sqrt(sigma, rtol=rtol))

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    def support(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(math.sqrt(max(theta @ self.sigma @ theta, 0.0)))

    def support_values(self, directions: np.ndarray) -> np.ndarray:
        q = np.einsum("ij,jk,ik->i", directions, self.sigma, directions)
        return np.sqrt(np.clip(q, 0.0, None))


def psd_sqrt(sigma, rtol: float = PSD_RTOL) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues down to ``-rtol * trace`` are clamped to zero; anything more
    negative raises, naming the offending eigenvalue.
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError(f"covariance must be square, got shape {sigma.shape}")
    if not np.all(np.isfinite(sigma)):
        raise ValueError("covariance must be finite")
    asym = float(np.max(np.abs(sigma - sigma.T)))
    scale = max(float(np.max(np.abs(sigma))), 1.0)
    if asym > 1e-9 * scale:
        raise ValueError(f"covariance is not symmetric (max asymmetry {asym:g})")
    sym = 0.5 * (sigma + sigma.T)
    w, v = np.linalg.eigh(sym)
    tol = rtol * max(float(np.trace(sym)), 0.0)
    if w[0] < -tol:
        raise ValueError(
            f"covariance is not positive semidefinite (eigenvalue {w[0]:.6g})"
        )
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.T
    return 0.5 * (root + root.T)


# -- direction sets ----------------------------------------------------------


def default_direction_count(dim: int) -> int:
    if dim == 1:
        return 2
    return 720 if dim == 2 else 2048


def unit_directions(dim: int, n: int | None = None) -> np.ndarray:
    """Deterministic quasi-uniform unit directions, shape ``(n, dim)``.

    Equispaced angles in 2D, a Fibonacci lattice on the sphere in 3D and
    normalized Gaussian images of a scrambled Halton sequence (fixed seed)
    beyond that.
    """
    if n is None:
        n = default_direction_count(dim)
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if n < 1:
        raise ValueError("need at least one direction")
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if dim == 3:
        i = np.arange(n) + 0.5
        z = 1.0 - 2.0 * i / n
        rad = np.sqrt(1.0 - z * z)
        phi = np.pi * (3.0 - math.sqrt(5.0)) * i
        return np.column_stack([rad * np.cos(phi), rad * np.sin(phi), z])

    from scipy.stats import norm, qmc

    u = qmc.Halton(d=dim, scramble=True, seed=0).random(n)
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _check_unit(directions: np.ndarray) -> np.ndarray:
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if directions.shape[0] == 0:
        raise ValueError("empty direction set")
    norms = np.linalg.norm(directions, axis=1)
    bad = np.abs(norms - 1.0) > UNIT_TOL
    if np.any(bad):
        raise ValueError(f"direction is not a unit vector (norm {norms[bad][0]:.12g})")
    return directions


# -- hulls -------------------------------------------------------------------


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _monotone_chain(pts: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; CCW extreme points, collinear points dropped."""
    pts = np.unique(pts, axis=0)  # sorted lexicographically
    if len(pts) <= 2:
        return pts
    p = pts.tolist()
    lower: list = []
    for q in p:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    upper: list = []
    for q in reversed(p):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    hull = lower[:-1] + upper[:-1]
    return np.asarray(hull, dtype=float)


def _akl_toussaint(pts: np.ndarray) -> np.ndarray:
    """Discard points strictly inside the octagon of 8 directional extremes."""
    if len(pts) < 64:
        return pts
    ang = np.pi * np.arange(8) / 4.0
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    idx = np.argmax(pts @ dirs.T, axis=0)
    # consecutive duplicates collapse; extremes come out in CCW order
    keep = [idx[0]]
    for i in idx[1:]:
        if not np.array_equal(pts[i], pts[keep[-1]]):
            keep.append(i)
    if len(keep) > 1 and np.array_equal(pts[keep[0]], pts[keep[-1]]):
        keep.pop()
    if len(keep) < 3:
        return pts
    poly = pts[keep]
    inside = np.ones(len(pts), dtype=bool)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        e = b - a
        c = e[0] * (pts[:, 1] - a[1]) - e[1] * (pts[:, 0] - a[0])
        inside &= c > 0
    return pts[~inside]


def _extreme_points(pts: np.ndarray) -> np.ndarray:
    """Extreme points of a finite set in R^d, d <= 3, any affine rank."""
    n, d = pts.shape
    if n == 1:
        return pts.copy()
    center = pts.mean(axis=0)
    centered = pts - center
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    scale = max(float(s[0]) if len(s) else 0.0, 1.0)
    rank = int(np.sum(s > 1e-12 * scale * math.sqrt(n)))
    if rank == 0:
        return pts[:1].copy()
    if rank < d:
        # degenerate: hull in the affine span, map the chosen points back
        coords = centered @ vt[:rank].T
        sub = _extreme_indices(coords)
        return pts[sub]
    return pts[_extreme_indices(pts)]


def _extreme_indices(coords: np.ndarray) -> np.ndarray:
    r = coords.shape[1]
    if r == 1:
        x = coords[:, 0]
        lo, hi = int(np.argmin(x)), int(np.argmax(x))
        return np.array([lo] if x[lo] == x[hi] else [lo, hi])
    if r == 2:
        hull = _monotone_chain(_akl_toussaint(coords))
        # locate the original row of each hull point
        lookup = {tuple(row): i for i, row in enumerate(coords.tolist())}
        return np.array([lookup[tuple(row)] for row in hull.tolist()])
    return ConvexHull(coords).vertices


def convex_hull(points) -> ConvexBody:
    """Convex hull of a finite point set.

    Parameters
    ----------
    points : array-like, shape (n_points, d)

    Returns
    -------
    ConvexBody
        Extreme points only for d <= 3 (CCW order in 2D); the deduplicated
        generators for d >= 4.
    """
    try:
        pts = np.asarray(points, dtype=float)
    except ValueError as exc:
        raise ValueError("points have mixed dimensions") from exc
    if pts.size == 0:
        raise ValueError("empty point set")
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError("points have mixed dimensions")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    d = pts.shape[1]
    if d == 1:
        lo, hi = pts.min(), pts.max()
        return ConvexBody(np.array([[lo]] if lo == hi else [[lo], [hi]]))
    if d == 2:
        return ConvexBody(_monotone_chain(_akl_toussaint(pts)))
    if d == 3:
        return ConvexBody(_extreme_points(np.unique(pts, axis=0)))
    return ConvexBody(np.unique(pts, axis=0))


# -- support functions and distances -----------------------------------------


def support_function(body: ConvexBody, theta) -> float:
    """``max <v, theta>`` over the generators of ``body``; theta must be unit."""
    theta = _check_unit(theta)[0]
    if theta.shape[0] != body.dim:
        raise ValueError("direction dimension does not match body")
    return body.support(theta)


def support_function_ellipsoid(e: Ellipsoid, theta) -> float:
    theta = _check_unit(theta)[0]
    return e.support(theta)


def hausdorff_support(a, b, directions) -> float:
    """``max |M_a(theta) - M_b(theta)|`` over the given unit directions.

    A lower bound on the true Hausdorff distance of two convex sets which
    converges to it as the direction set gets denser. ``a`` and ``b`` are
    :class:`ConvexBody` or :class:`Ellipsoid`.
    """
    directions = _check_unit(directions)
    if a.dim != b.dim or directions.shape[1] != a.dim:
        raise ValueError("dimension mismatch")
    return float(np.max(np.abs(a.support_values(directions) - b.support_values(directions))))


def hausdorff_pointsets(a, b) -> float:
    """Euclidean Hausdorff distance between two finite point sets."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("empty point set")
    if a.shape[1] != b.shape[1]:
        raise ValueError("point sets have different dimensions")
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


# -- functionals -------------------------------------------------------------


def _max_pairwise_distance(v: np.ndarray, chunk: int = 2048) -> float:
    best = 0.0
    for start in range(0, len(v), chunk):
        block = v[start:start + chunk]
        d2 = np.sum((block[:, None, :] - v[None, :, :]) ** 2, axis=-1)
        best = max(best, float(d2.max()))
    return math.sqrt(best)


def diameter(body: ConvexBody) -> float:
    return _max_pairwise_distance(body.vertices)


def unit_ball_volume(d: int) -> float:
    return math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1.0))


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def volume_mc(body: ConvexBody, n_samples: int = 200_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo volume in the bounding box; returns ``(estimate, std_error)``."""
    v = body.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    box = float(np.prod(hi - lo))
    if box == 0.0 or len(v) <= body.dim:
        return 0.0, 0.0
    try:
        eq = ConvexHull(v).equations
    except Exception:  # qhull rejects flat generator sets
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_samples:
        m = min(50_000, n_samples - done)
        x = lo + (hi - lo) * rng.random((m, body.dim))
        hits += int(np.sum(np.all(x @ eq[:, :-1].T + eq[:, -1] <= 1e-12, axis=1)))
        done += m
    p = hits / n_samples
    return box * p, box * math.sqrt(p * (1 - p) / n_samples)


def volume(body: ConvexBody, *, n_samples: int = 200_000, seed: int = 0) -> float:
    """d-dimensional volume; exact for d <= 3, Monte Carlo beyond.

    Degenerate (flat) bodies have volume 0.
    """
    v = body.vertices
    d = body.dim
    if d == 1:
        return float(v.max() - v.min())
    if len(v) <= d:
        return 0.0
    if d == 2:
        hull = v if _is_ccw_hull(v) else _monotone_chain(v)
        return _shoelace(hull) if len(hull) >= 3 else 0.0
    if d == 3:
        s = np.linalg.svd(v - v.mean(axis=0), compute_uv=False)
        if s[-1] <= 1e-12 * max(s[0], 1.0) * math.sqrt(len(v)):
            return 0.0
        return float(ConvexHull(v).volume)
    return volume_mc(body, n_samples=n_samples, seed=seed)[0]


def _is_ccw_hull(v: np.ndarray) -> bool:
    if len(v) < 3:
        return False
    e = np.roll(v, -1, axis=0) - v
    f = np.roll(e, -1, axis=0)
    return bool(np.all(e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0] > 0))


def width(body: ConvexBody, theta) -> float:
    """Width in direction ``theta``: ``M(theta) + M(-theta)``."""
    theta = _check_unit(theta)[0]
    return body.support(theta) + body.support(-theta)


def scale(body: ConvexBody, c: float) -> ConvexBody:
    if c < 0:
        raise ValueError("scale factor must be nonnegative")
    if c == 0:
        return ConvexBody(np.zeros((1, body.dim)))
    return ConvexBody(body.vertices * c)


def ellipsoid_to_body(e: Ellipsoid, n_directions: int) -> tuple[ConvexBody, float]:
    """Inscribed polytope with vertices ``sqrt_sigma @ u`` on the boundary of ``e``.

    Returns the body and a Hausdorff error bound
    ``sqrt(lambda_max) * (1 - cos(delta))`` with ``delta`` the covering angle
    of the direction set (exact in 2D, estimated by dense probing otherwise).
    """
    d = e.dim
    if n_directions < d + 1:
        raise ValueError(f"need at least {d + 1} directions")
    u = unit_directions(d, n_directions)
    body = ConvexBody(u @ e.sqrt_sigma.T)
    if d == 2:
        delta = math.pi / n_directions
    elif d == 1:
        delta = 0.0
    else:
        probe = unit_directions(d, max(20 * n_directions, 20_000))
        cos_best = np.max(probe @ u.T, axis=1)
        delta = float(np.arccos(np.clip(cos_best.min(), -1.0, 1.0)))
    lam_max = float(np.linalg.eigvalsh(e.sigma)[-1])
    bound = math.sqrt(max(lam_max, 0.0)) * (1.0 - math.cos(delta))
    return body, bound


@dataclass(frozen=True)
class HomogeneousFunctional:
    """Nonnegative, monotone functional with ``f(cA) = c**degree * f(A)``.

    ``growth_constant`` is a ``C`` with ``f(A) <= C * diameter(A)**degree``:
    1 for diameter and width, the isodiametric constant ``omega_d / 2**d``
    for volume.
    """

    kind: str
    dim: int
    theta: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("diameter", "volume", "width"):
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind == "width":
            if self.theta is None or len(self.theta) != self.dim:
                raise ValueError("width needs a direction theta of matching dimension")
            _check_unit(self.theta)

    @property
    def degree(self) -> int:
        return self.dim if self.kind == "volume" else 1

    @property
    def growth_constant(self) -> float:
        if self.kind == "volume":
            return unit_ball_volume(self.dim) / 2.0**self.dim
        return 1.0

    def __call__(self, body: ConvexBody) -> float:
        if self.kind == "diameter":
            return diameter(body)
        if self.kind == "volume":
            return volume(body)
        return width(body, self.theta)

    def of_ellipsoid(self, e: Ellipsoid) -> float:
        if self.kind == "diameter":
            return 2.0 * math.sqrt(max(float(np.linalg.eigvalsh(e.sigma)[-1]), 0.0))
        if self.kind == "volume":
            det = max(float(np.linalg.det(e.sigma)), 0.0)
            return unit_ball_volume(self.dim) * math.sqrt(det)
        return 2.0 * e.support(np.asarray(self.theta))
