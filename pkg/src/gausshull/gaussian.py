"""Stationary Gaussian fields on lattice regions.

The field model is separable: ``X_t = sqrt(Sigma) @ G_t`` where ``G_t`` stacks
``d`` independent scalar stationary fields sharing the correlation ``r``.
Hence ``E <X_t, theta> <X_s, theta> = r(t - s) * theta' Sigma theta``.

Random streams
--------------
All randomness flows from a 64-bit integer seed into
``numpy.random.Generator(PCG64(SeedSequence(seed)))``. Experiment runners
derive one such seed per ``(experiment, n index, replicate)`` with
:func:`derive_seed`, so a replicate never depends on which worker ran it.
Inside a sampler the draw order is fixed: the iid and dense paths draw a
``(n_sites, d)`` standard normal block; the circulant path draws one
``(2, *torus_shape)`` block per pair of components, components in order.
"""

from __future__ import annotations

import functools
import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ellipsoid, psd_sqrt

logger = logging.getLogger(__name__)

EXACT_SITE_LIMIT = 4096
CLAMP_LIMIT = 1e-6

KERNEL_KINDS = ("iid", "exponential", "squared_exponential", "ar_tensor", "equicorrelated")
CONTINUOUS_KINDS = ("exponential", "squared_exponential")


def derive_seed(master: int, *keys: int) -> int:
    """Child 64-bit seed for the stream ``master -> keys``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


@dataclass(frozen=True)
class CorrelationKernel:
    """Stationary correlation ``r(t)`` on ``Z^m`` or ``R^m``.

    ``exponential``: ``exp(-lam * |t|_2)``; ``squared_exponential``:
    ``exp(-lam * |t|_2**2)``; ``ar_tensor``: ``rho ** sum(|t_i|)``;
    ``equicorrelated``: ``r`` off the origin (does not decay, only meant for
    comparison experiments); ``iid``: indicator of ``t == 0``.
    """

    kind: str
    m: int = 1
    lam: float = 1.0
    rho: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.m < 1:
            raise ValueError("domain dimension m must be >= 1")
        if self.kind in CONTINUOUS_KINDS and not self.lam > 0:
            raise ValueError("kernel rate lam must be positive")
        if self.kind == "ar_tensor" and not abs(self.rho) < 1:
            raise ValueError("ar_tensor needs |rho| < 1")
        if self.kind == "equicorrelated" and not 0 <= self.r < 1:
            raise ValueError("equicorrelated needs 0 <= r < 1")

    @property
    def decays(self) -> bool:
        return self.kind != "equicorrelated"

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.shape[-1] != self.m:
            raise ValueError(f"displacement has dimension {t.shape[-1]}, kernel expects {self.m}")
        if self.kind == "exponential":
            return np.exp(-self.lam * np.linalg.norm(t, axis=-1))
        if self.kind == "squared_exponential":
            return np.exp(-self.lam * np.sum(t * t, axis=-1))
        if self.kind == "ar_tensor":
            return self.rho ** np.sum(np.abs(t), axis=-1)
        zero = np.all(t == 0, axis=-1)
        off = 0.0 if self.kind == "iid" else self.r
        return np.where(zero, 1.0, off)


def kernel_eval(kernel: CorrelationKernel, t) -> float:
    return float(kernel(np.asarray(t, dtype=float).reshape(-1)))


@dataclass
class CrossCovariance:
    """Marginal covariance ``Sigma`` of every ``X_t``."""

    sigma: np.ndarray
    sqrt_sigma: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        self.sqrt_sigma = psd_sqrt(self.sigma)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]


@dataclass
class FieldSample:
    sites: np.ndarray
    values: np.ndarray
    seed: int
    kernel_id: str
    sigma_id: str
    method: str = ""
    clamped_mass: float = 0.0


def concentration_ellipsoid(cross: CrossCovariance) -> Ellipsoid:
    return Ellipsoid(sigma=cross.sigma.copy(), sqrt_sigma=cross.sqrt_sigma.copy())


def _sigma_id(sigma: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(sigma).tobytes()).hexdigest()[:12]


# -- grid detection ----------------------------------------------------------


@dataclass(frozen=True)
class _Grid:
    origin: tuple
    spacing: tuple
    shape: tuple
    flat_index: np.ndarray  # row of each site in the C-ordered grid


def _as_grid(sites: np.ndarray) -> _Grid | None:
    """Recognize ``sites`` as a full rectangular equispaced grid (any order)."""
    n, m = sites.shape
    origin, spacing, shape, idx = [], [], [], []
    for j in range(m):
        u = np.unique(sites[:, j])
        if len(u) == 1:
            step = 1.0
        else:
            steps = np.diff(u)
            step = float(steps[0])
            if not np.allclose(steps, step, rtol=1e-9, atol=1e-12):
                return None
        k = np.rint((sites[:, j] - u[0]) / step)
        if not np.allclose(k * step + u[0], sites[:, j], rtol=1e-9, atol=1e-9):
            return None
        origin.append(float(u[0]))
        spacing.append(step)
        shape.append(len(u))
        idx.append(k.astype(np.int64))
    if int(np.prod(shape)) != n:
        return None
    flat = np.ravel_multi_index(tuple(idx), tuple(shape))
    if len(np.unique(flat)) != n:
        return None
    return _Grid(tuple(origin), tuple(spacing), tuple(shape), flat)


def is_grid(sites) -> bool:
    return _as_grid(np.atleast_2d(np.asarray(sites, dtype=float))) is not None


# -- circulant embedding -----------------------------------------------------


@functools.lru_cache(maxsize=32)
def _circulant_spectrum(kernel: CorrelationKernel, shape: tuple, spacing: tuple):
    """Eigenvalues of the minimal torus embedding, doubling it if needed."""
    torus = tuple(max(2 * (s - 1), 1) for s in shape)
    for _ in range(4):
        axes = []
        for mj, hj in zip(torus, spacing):
            j = np.arange(mj)
            axes.append(np.minimum(j, mj - j) * hj)
        lag = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        c = kernel(lag)
        lam = np.real(np.fft.fftn(c))
        neg = float(np.clip(-lam, 0.0, None).sum())
        total = float(np.abs(lam).sum())
        clamped = neg / total if total > 0 else 0.0
        if clamped <= CLAMP_LIMIT:
            lam = np.clip(lam, 0.0, None)
            return torus, np.sqrt(lam / lam.size), clamped
        logger.info("circulant embedding %s clamps %.3g of spectral mass; enlarging", torus, clamped)
        torus = tuple(2 * t for t in torus)
    raise ValueError(
        f"circulant embedding clamps {clamped:.3g} of spectral mass (limit {CLAMP_LIMIT:g}); "
        "use a smaller grid or the exact sampler"
    )


def _circulant_fields(kernel, grid: _Grid, count: int, rng: np.random.Generator):
    torus, root, clamped = _circulant_spectrum(kernel, grid.shape, grid.spacing)
    crop = tuple(slice(0, s) for s in grid.shape)
    out = []
    while len(out) < count:
        z = rng.standard_normal((2, *torus))
        y = np.fft.fftn(root * (z[0] + 1j * z[1]))
        out.append(np.real(y)[crop].ravel())
        out.append(np.imag(y)[crop].ravel())
    g = np.column_stack(out[:count])
    return g[grid.flat_index], clamped


# -- dense factorization -----------------------------------------------------


@functools.lru_cache(maxsize=8)
def _dense_factor(kernel: CorrelationKernel, site_bytes: bytes, m: int) -> np.ndarray:
    sites = np.frombuffer(site_bytes, dtype=float).reshape(-1, m)
    corr = kernel(sites[:, None, :] - sites[None, :, :])
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(corr)
        tol = 1e-10 * float(np.trace(corr))
        if w[0] < -tol:
            raise ValueError(
                f"site covariance is not positive semidefinite (eigenvalue {w[0]:.6g})"
            ) from None
        return v * np.sqrt(np.clip(w, 0.0, None))


def sample_field(
    kernel: CorrelationKernel,
    cross: CrossCovariance,
    sites,
    seed,
    method: str = "auto",
) -> FieldSample:
    """Draw ``X_t`` for every site.

    Parameters
    ----------
    kernel, cross
        Spatial correlation and marginal covariance.
    sites : array-like, shape (n_sites, m)
    seed : int
    method : {"auto", "iid", "exact", "circulant"}
        ``auto`` uses the iid shortcut for the iid kernel, circulant embedding
        for full rectangular grids and a dense factorization (at most 4096
        sites) otherwise.
    """
    sites = np.asarray(sites, dtype=float)
    if sites.ndim == 1:
        sites = sites[:, None]
    if sites.shape[0] == 0:
        raise ValueError("empty site set")
    if sites.shape[1] != kernel.m:
        raise ValueError(f"sites have dimension {sites.shape[1]}, kernel expects {kernel.m}")
    n, d = sites.shape[0], cross.dim
    rng = make_rng(seed)
    grid = None

    if method == "auto":
        if kernel.kind in ("iid", "equicorrelated"):
            method = "iid" if kernel.kind == "iid" else "equicorrelated"
        else:
            grid = _as_grid(sites)
            if grid is not None and n > 1:
                method = "circulant"
            elif n <= EXACT_SITE_LIMIT:
                method = "exact"
            else:
                raise ValueError(
                    f"{n} scattered sites exceed the exact-sampler limit of "
                    f"{EXACT_SITE_LIMIT}; supply a full rectangular grid"
                )

    clamped = 0.0
    if method == "iid":
        if kernel.kind != "iid":
            raise ValueError("iid sampling requires the iid kernel")
        g = rng.standard_normal((n, d))
    elif method == "equicorrelated":
        zeta = rng.standard_normal((n, d))
        eta = rng.standard_normal((1, d))
        g = math.sqrt(1.0 - kernel.r) * zeta + math.sqrt(kernel.r) * eta
    elif method == "exact":
        if n > EXACT_SITE_LIMIT:
            raise ValueError(
                f"{n} sites exceed the exact-sampler limit of {EXACT_SITE_LIMIT}; "
                "supply a full rectangular grid"
            )
        site_bytes = np.ascontiguousarray(sites).tobytes()
        factor = _dense_factor(kernel, site_bytes, kernel.m)
        g = factor @ rng.standard_normal((factor.shape[1], d))
    elif method == "circulant":
        grid = grid or _as_grid(sites)
        if grid is None:
            raise ValueError("circulant sampling requires a full rectangular grid of sites")
        g, clamped = _circulant_fields(kernel, grid, d, rng)
    else:
        raise ValueError(f"unknown sampling method {method!r}")

    values = g @ cross.sqrt_sigma.T
    return FieldSample(
        sites=sites,
        values=values,
        seed=int(seed) if not isinstance(seed, np.random.Generator) else -1,
        kernel_id=repr(kernel),
        sigma_id=_sigma_id(cross.sigma),
        method=method,
        clamped_mass=clamped,
    )


def sample_equicorrelated(sigma_scalar: float, r: float, n: int, seed) -> np.ndarray:
    """``sigma * (sqrt(1 - r) * zeta_k + sqrt(r) * eta)``, k = 1..n.

    Unit-variance ``zeta_k`` and ``eta`` are independent, so every pair has
    covariance ``sigma**2 * r``.
    """
    if not 0 <= r < 1:
        raise ValueError("correlation r must lie in [0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not sigma_scalar > 0:
        raise ValueError("sigma must be positive")
    rng = make_rng(seed)
    zeta = rng.standard_normal(n)
    eta = rng.standard_normal()
    return sigma_scalar * (math.sqrt(1.0 - r) * zeta + math.sqrt(r) * eta)


def sigma_h(kernel: CorrelationKernel, cross: CrossCovariance, h: float) -> float:
    """L2 modulus ``sup_{|t-s|_inf <= h} sqrt(E|X_t - X_s|^2)``.

    Both continuous kernels are radially decreasing, so the sup sits at the
    corner of the sup-norm ball, Euclidean distance ``h * sqrt(m)``.
    """
    if not h > 0:
        raise ValueError("mesh h must be positive")
    if kernel.kind not in CONTINUOUS_KINDS:
        raise ValueError(
            f"kernel {kernel.kind!r} does not define a continuous field; "
            "sigma(h) needs exponential or squared_exponential"
        )
    corner = np.full(kernel.m, float(h))
    r_min = float(kernel(corner))
    return math.sqrt(max(2.0 * float(np.trace(cross.sigma)) * (1.0 - r_min), 0.0))
