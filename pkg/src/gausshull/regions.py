"""Growing parameter regions ``T_n``, their lattices and discretizations.

Distances between sites use the sup-norm ``|t - s| = max_k |t_k - s_k|``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import unit_ball_volume

SHAPES = ("cube", "ball", "box")
MODES = ("discrete", "continuous")
_FLOOR_EPS = 1e-9


def b_normalizer(t: float) -> float:
    """``sqrt(2 ln max(t, 2))``."""
    if not t > 0:
        raise ValueError("b(t) needs t > 0")
    return math.sqrt(2.0 * math.log(max(t, 2.0)))


@dataclass(frozen=True)
class RegionSequence:
    """Increasing regions indexed by ``n``.

    ``cube``: ``[0, n]^m``; ``ball``: Euclidean ball of radius ``n`` about the
    origin; ``box``: ``prod_i [0, rates[i] * n]``. In continuous mode the
    sites of ``T_n`` are the mesh points ``h * k`` inside it.
    """

    shape: str
    m: int
    mode: str = "discrete"
    index: tuple = ()
    rates: tuple | None = None
    h: float = 1.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown region shape {self.shape!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown region mode {self.mode!r}")
        if self.m < 1:
            raise ValueError("domain dimension m must be >= 1")
        object.__setattr__(self, "index", tuple(self.index))
        if any(b <= a for a, b in zip(self.index, self.index[1:])):
            raise ValueError("index list must be strictly increasing")
        if any(n <= 0 for n in self.index):
            raise ValueError("region indices must be positive")
        if self.shape == "box":
            if self.rates is None or len(self.rates) != self.m:
                raise ValueError("box regions need one growth rate per axis")
            if any(r <= 0 for r in self.rates):
                raise ValueError("box growth rates must be positive")
            object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if not self.h > 0:
            raise ValueError("mesh h must be positive")

    def extents(self, n: float) -> tuple:
        if self.shape == "box":
            return tuple(r * n for r in self.rates)
        return (float(n),) * self.m

    def measure(self, n: float) -> float:
        """Lebesgue measure of ``T_n``."""
        if self.shape == "ball":
            return unit_ball_volume(self.m) * float(n) ** self.m
        return float(np.prod(self.extents(n)))


def _axis_range(extent: float, step: float) -> np.ndarray:
    return np.arange(int(math.floor(extent / step + _FLOOR_EPS)) + 1) * step


def _product(axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def lattice_sites(seq: RegionSequence, n: float, h: float | None = None):
    """Sites of ``T_n`` and ``nu_n``.

    Discrete mode returns the integer points and their count; continuous
    mode returns the mesh points ``h * k`` in ``T_n`` and the exact measure.
    Sites come in lexicographic order.
    """
    if not n > 0:
        raise ValueError(f"region index {n} is not realizable")
    step = 1.0 if seq.mode == "discrete" else float(h if h is not None else seq.h)
    if seq.shape == "ball":
        k = int(math.floor(n / step + _FLOOR_EPS))
        axis = np.arange(-k, k + 1) * step
        cand = _product([axis] * seq.m)
        sites = cand[np.sum(cand * cand, axis=1) <= n * n * (1 + 1e-12)]
    else:
        sites = _product([_axis_range(e, step) for e in seq.extents(n)])
    if len(sites) == 0:
        raise ValueError(f"region index {n} has no sites")
    nu = float(len(sites)) if seq.mode == "discrete" else seq.measure(n)
    return sites, nu


def boundary_ratio(seq: RegionSequence, n: float, eps: float) -> float:
    """Volume fraction of the ``eps``-neighbourhood of the boundary of ``T_n``.

    Sup-norm neighbourhoods for cubes and boxes, Euclidean for balls.
    """
    if seq.mode != "continuous":
        raise ValueError("boundary ratio is only defined in continuous mode")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if seq.shape == "ball":
        outer = (n + eps) ** seq.m
        inner = max(n - eps, 0.0) ** seq.m
        return (outer - inner) / float(n) ** seq.m
    ext = seq.extents(n)
    outer = math.prod(e + 2 * eps for e in ext)
    inner = math.prod(max(e - 2 * eps, 0.0) for e in ext)
    return (outer - inner) / math.prod(ext)


@dataclass
class SeparatedSubset:
    parent_sites: np.ndarray
    selected_sites: np.ndarray
    a: float
    _buckets: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nu(self) -> int:
        return len(self.parent_sites)

    @property
    def nu_tilde(self) -> int:
        return len(self.selected_sites)


def _lex_sorted(sites: np.ndarray) -> np.ndarray:
    order = np.lexsort(sites.T[::-1])
    return sites[order]


def _greedy_extend(selected: list, buckets: dict, candidates: np.ndarray, a: float) -> None:
    m = candidates.shape[1]
    offsets = list(itertools.product((-1, 0, 1), repeat=m))
    for x in candidates:
        cell = tuple(np.floor(x / a).astype(np.int64).tolist())
        ok = True
        for off in offsets:
            for j in buckets.get(tuple(c + o for c, o in zip(cell, off)), ()):
                if np.max(np.abs(selected[j] - x)) < a:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            buckets.setdefault(cell, []).append(len(selected))
            selected.append(x)


def separated_subset(sites, a: float) -> SeparatedSubset:
    """Greedy ``a``-separated subset in lexicographic scan order.

    A site is kept iff its sup-norm distance to every site kept before it is
    at least ``a``. The result lies inside ``sites``, is pairwise
    ``a``-separated, and every rejected site is within ``a`` of a kept one.
    """
    if not a > 0:
        raise ValueError("separation a must be positive")
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    if sites.shape[0] == 0:
        raise ValueError("empty site set")
    selected: list = []
    buckets: dict = {}
    _greedy_extend(selected, buckets, _lex_sorted(sites), float(a))
    return SeparatedSubset(sites.copy(), np.array(selected), float(a), buckets)


def extend_separated_subset(prev: SeparatedSubset, sites) -> SeparatedSubset:
    """Grow ``prev`` to the larger parent set ``sites`` without dropping picks.

    Sites not already in ``prev.parent_sites`` are scanned lexicographically
    and accepted under the same rule.
    """
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    old = {tuple(s) for s in prev.parent_sites.tolist()}
    fresh = np.array([s for s in sites.tolist() if tuple(s) not in old]).reshape(-1, sites.shape[1])
    missing = old - {tuple(s) for s in sites.tolist()}
    if missing:
        raise ValueError("new parent set must contain the previous one")
    selected = list(prev.selected_sites)
    buckets = {k: list(v) for k, v in prev._buckets.items()}
    if len(fresh):
        _greedy_extend(selected, buckets, _lex_sorted(fresh), prev.a)
    return SeparatedSubset(sites.copy(), np.array(selected), prev.a, buckets)


@dataclass
class CubeCover:
    """Mesh cubes ``[k h, (k + 1) h]`` meeting ``T_n`` in positive volume."""

    h: float
    cubes: np.ndarray  # integer indices k, shape (nu_tilde, m)
    nu_n: float

    @property
    def nu_tilde(self) -> int:
        return len(self.cubes)

    @property
    def measure(self) -> float:
        return self.nu_tilde * self.h ** self.cubes.shape[1]

    @property
    def ratio(self) -> float:
        return self.measure / self.nu_n

    def corners(self) -> np.ndarray:
        return self.cubes * self.h


def cube_cover(seq: RegionSequence, n: float, h: float) -> CubeCover:
    """Cubes of mesh ``h`` whose intersection with ``T_n`` has positive volume.

    Cubes that only touch ``T_n`` along a face are left out.
    """
    if seq.mode != "continuous":
        raise ValueError("cube cover is only defined in continuous mode")
    if not h > 0:
        raise ValueError("mesh h must be positive")
    if seq.shape == "ball":
        k = int(math.ceil(n / h - _FLOOR_EPS))
        cand = _product([np.arange(-k, k)] * seq.m)
        lo, hi = cand * h, (cand + 1) * h
        nearest = np.clip(0.0, lo, hi)
        cubes = cand[np.sum(nearest * nearest, axis=1) < n * n]
    else:
        axes = [np.arange(int(math.ceil(e / h - _FLOOR_EPS))) for e in seq.extents(n)]
        cubes = _product(axes)
    return CubeCover(float(h), cubes.astype(np.int64), seq.measure(n))
