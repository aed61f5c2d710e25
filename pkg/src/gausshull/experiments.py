"""Replicated Monte Carlo runners.

Each runner is a pure function of ``(config, config.seed)``. Work is split
into ``(n index, replicate)`` tasks whose seeds come from
:func:`gausshull.gaussian.derive_seed`; results are reassembled in task
order, so the worker count changes wall time only.

Statistic vocabulary
--------------------
convergence  rho, excess, deficit, contained, n_vertices,
             [lipschitz_points, lipschitz_hulls]
continuous   rho_to_E, mesh_discrepancy, scaled_d_n, sigma_h
maxima       z_n
bounds       z_n, in_proven_bounds, in_conjectured_window
moments      f_value, f_moment, exp_moment, ui_proxy
hull_demo    rho
"""

from __future__ import annotations

import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import Band, RunConfig
from .gaussian import (
    CONTINUOUS_KINDS,
    CrossCovariance,
    concentration_ellipsoid,
    derive_seed,
    make_rng,
    sample_equicorrelated,
    sample_field,
    sigma_h,
)
from .geometry import (
    ConvexBody,
    HomogeneousFunctional,
    convex_hull,
    hausdorff_pointsets,
    hausdorff_support,
    scale,
    unit_directions,
)
from .regions import b_normalizer, boundary_ratio, cube_cover, lattice_sites

logger = logging.getLogger(__name__)

KIND_CODES = {
    "convergence": 1,
    "continuous": 2,
    "maxima": 3,
    "bounds": 4,
    "moments": 5,
    "hull_demo": 6,
}

BASE_COLUMNS = (
    "experiment_kind",
    "n",
    "nu_n",
    "replicate_id",
    "seed",
    "statistic_name",
    "statistic_value",
)

AUX_COLUMNS = {
    "convergence": ("n_directions",),
    "continuous": ("h", "nu_tilde", "n_directions"),
    "maxima": ("sigma", "r", "phi_r"),
    "bounds": ("r", "sigma", "lower_bound", "upper_bound"),
    "moments": ("functional", "moment_order", "a", "target", "note"),
    "hull_demo": ("n_directions",),
}


@dataclass
class ExperimentRecord:
    experiment_kind: str
    n: float
    nu_n: float
    replicate_id: int
    seed: int
    statistic_name: str
    statistic_value: float
    aux: dict = field(default_factory=dict)

    def row(self) -> list:
        base = [getattr(self, c) for c in BASE_COLUMNS]
        return base + [self.aux.get(c, "") for c in AUX_COLUMNS[self.experiment_kind]]


@dataclass
class MaximaEstimate:
    """Normalized maximum ``max_k xi_k / b(nu_n)`` of one replicate."""

    n: float
    nu_n: float
    replicate_id: int
    seed: int
    z_n: float
    sigma_target: float
    r: float

    @property
    def phi_r(self) -> float:
        return math.sqrt(1.0 - self.r) - math.sqrt(self.r)

    def to_record(self) -> ExperimentRecord:
        return ExperimentRecord(
            "maxima", self.n, self.nu_n, self.replicate_id, self.seed, "z_n", self.z_n,
            {"sigma": self.sigma_target, "r": self.r, "phi_r": self.phi_r},
        )


def columns(kind: str) -> tuple:
    return BASE_COLUMNS + AUX_COLUMNS[kind]


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _tasks(cfg: RunConfig, kind: str, index) -> list:
    code = KIND_CODES[kind]
    return [
        (cfg, i, n, rep, derive_seed(cfg.seed, code, i, rep))
        for i, n in enumerate(index)
        for rep in range(cfg.replicates)
    ]


def _flatten(chunks) -> list:
    return [rec for chunk in chunks for rec in chunk]


def _directions(cfg: RunConfig) -> np.ndarray:
    return unit_directions(cfg.dim, cfg.directions)


def _require_region(cfg: RunConfig, mode: str):
    if cfg.region is None:
        raise ValueError("config has no [region]")
    if cfg.region.mode != mode:
        raise ValueError(f"this experiment needs a {mode} region, got {cfg.region.mode}")
    return cfg.region


def _require_decay(cfg: RunConfig):
    if not cfg.kernel.decays:
        raise ValueError(
            "kernel does not decay: the weak-dependence hypothesis "
            "(directional covariances vanish at large separation) fails"
        )


def nearest_neighbour_correlation(kernel, step: float = 1.0) -> float:
    e = np.zeros(kernel.m)
    e[0] = step
    return abs(float(kernel(e)))


# -- convergence -------------------------------------------------------------


def _convergence_task(task):
    cfg, _, n, rep, seed = task
    sites, nu = lattice_sites(cfg.region, n)
    cross = CrossCovariance(cfg.sigma)
    ell = concentration_ellipsoid(cross)
    dirs = _directions(cfg)
    values = sample_field(cfg.kernel, cross, sites, seed).values
    b = b_normalizer(nu)
    hull = scale(convex_hull(values), 1.0 / b)
    diff = hull.support_values(dirs) - ell.support_values(dirs)
    slack = cfg.containment_slack
    contained = bool(np.all(hull.support_values(dirs) <= (1.0 + slack) * ell.support_values(dirs)))
    aux = {"n_directions": len(dirs)}
    stats = [
        ("rho", float(np.max(np.abs(diff)))),
        ("excess", float(max(diff.max(), 0.0))),
        ("deficit", float(max(-diff.min(), 0.0))),
        ("contained", float(contained)),
        ("n_vertices", float(len(hull.vertices))),
    ]
    if cfg.perturb > 0:
        rng = make_rng(derive_seed(seed, 1))
        moved = values + cfg.perturb * rng.standard_normal(values.shape)
        hull_moved = scale(convex_hull(moved), 1.0 / b)
        stats.append(("lipschitz_points", hausdorff_pointsets(values, moved) / b))
        stats.append(("lipschitz_hulls", hausdorff_support(hull, hull_moved, dirs)))
    return [
        ExperimentRecord("convergence", n, nu, rep, seed, name, value, dict(aux))
        for name, value in stats
    ]


def convergence_run(cfg: RunConfig, workers: int = 1) -> list:
    """Hausdorff distance between ``W_n / b(nu_n)`` and the concentration
    ellipsoid, per region index and replicate (lattice regions)."""
    seq = _require_region(cfg, "discrete")
    _require_decay(cfg)
    return _flatten(_map(_convergence_task, _tasks(cfg, "convergence", seq.index), workers))


# -- continuous parameter ----------------------------------------------------


def _reference_grid(seq, n, meshes):
    """Reference-mesh lattice (integer multiples of the finest mesh) spanning
    ``T_n`` and every coarse cube corner."""
    h_ref = meshes[-1]
    sites, nu = lattice_sites(seq, n, h_ref)
    covers = {h: cube_cover(seq, n, h) for h in meshes[:-1]}
    k_sites = np.rint(sites / h_ref).astype(np.int64)
    lo, hi = k_sites.min(axis=0), k_sites.max(axis=0)
    corner_k = {}
    for h, cov in covers.items():
        ratio = int(round(h / h_ref))
        ck = cov.cubes * ratio
        corner_k[h] = ck
        lo = np.minimum(lo, ck.min(axis=0))
        hi = np.maximum(hi, ck.max(axis=0))
    shape = tuple(int(x) for x in hi - lo + 1)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    full = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    to_row = lambda k: np.ravel_multi_index(tuple((k - lo).T), shape)  # noqa: E731
    return full * h_ref, nu, to_row(k_sites), k_sites, corner_k, covers, to_row


def _discretization_radius(values, k_sites, ratio, cubes, to_row, grid_values):
    """``max_k sup_{t in C_k, t in T_n} |X_t - X_{k h}|`` over cubes ``k``."""
    m = k_sites.shape[1]
    kset = {tuple(c) for c in cubes.tolist()}
    base = np.floor_divide(k_sites, ratio)
    on_face = (k_sites % ratio) == 0
    best = 0.0
    for off in np.ndindex(*(2,) * m):
        off = -np.asarray(off)
        valid = np.all((off == 0) | on_face, axis=1)
        k = base + off
        valid &= np.array([tuple(row) in kset for row in k.tolist()])
        if not np.any(valid):
            continue
        corners = grid_values[to_row(k[valid] * ratio)]
        dist = np.linalg.norm(values[valid] - corners, axis=1)
        best = max(best, float(dist.max()))
    return best


def _continuous_task(task):
    cfg, _, n, rep, seed = task
    seq = cfg.region
    meshes = tuple(sorted(cfg.meshes, reverse=True))
    h_ref = meshes[-1]
    cross = CrossCovariance(cfg.sigma)
    ell = concentration_ellipsoid(cross)
    dirs = _directions(cfg)
    grid, nu, rows_tn, k_sites, corner_k, covers, to_row = _reference_grid(seq, n, meshes)
    grid_values = sample_field(cfg.kernel, cross, grid, seed).values
    values = grid_values[rows_tn]
    b = b_normalizer(nu)
    ref_hull = scale(convex_hull(values), 1.0 / b)
    out = []

    def rec(name, value, h, nu_tilde):
        aux = {"h": h, "nu_tilde": nu_tilde, "n_directions": len(dirs)}
        out.append(ExperimentRecord("continuous", n, nu, rep, seed, name, float(value), aux))

    for h in meshes[:-1]:
        ratio = int(round(h / h_ref))
        coarse = grid_values[to_row(corner_k[h])]
        hull = scale(convex_hull(coarse), 1.0 / b)
        nt = covers[h].nu_tilde
        rec("rho_to_E", hausdorff_support(hull, ell, dirs), h, nt)
        rec("mesh_discrepancy", hausdorff_support(hull, ref_hull, dirs), h, nt)
        d_n = _discretization_radius(values, k_sites, ratio, covers[h].cubes, to_row, grid_values)
        rec("scaled_d_n", d_n / b, h, nt)
        rec("sigma_h", sigma_h(cfg.kernel, cross, h), h, nt)
    rec("rho_to_E", hausdorff_support(ref_hull, ell, dirs), h_ref, len(values))
    rec("sigma_h", sigma_h(cfg.kernel, cross, h_ref), h_ref, len(values))
    return out


def check_boundary_condition(cfg: RunConfig) -> float:
    """Boundary-neighbourhood ratio at the largest index; raises above the
    configured threshold."""
    seq = cfg.region
    ratio = boundary_ratio(seq, seq.index[-1], cfg.boundary_eps)
    if ratio > cfg.boundary_threshold:
        raise ValueError(
            f"boundary-thinness condition fails: neighbourhood ratio {ratio:.4g} at "
            f"n={seq.index[-1]} exceeds {cfg.boundary_threshold:g}"
        )
    return ratio


def continuous_run(cfg: RunConfig, workers: int = 1) -> list:
    """Mesh discretization of a continuous-parameter field.

    The finest configured mesh is the reference. For every coarser mesh
    ``h`` the hull of the values at the corners of the covering cubes is
    compared with the reference hull, both scaled by ``1 / b(nu_n)``, next to
    the analytic modulus ``sigma(h)``.
    """
    seq = _require_region(cfg, "continuous")
    _require_decay(cfg)
    if cfg.kernel.kind not in CONTINUOUS_KINDS:
        raise ValueError(f"kernel {cfg.kernel.kind!r} does not define a continuous field")
    if len(cfg.meshes) < 2:
        raise ValueError("continuous run needs at least two meshes")
    h_ref = min(cfg.meshes)
    for h in cfg.meshes:
        if abs(h / h_ref - round(h / h_ref)) > 1e-9:
            raise ValueError(f"mesh {h} is not an integer multiple of the finest mesh {h_ref}")
    check_boundary_condition(cfg)
    return _flatten(_map(_continuous_task, _tasks(cfg, "continuous", seq.index), workers))


# -- maxima ------------------------------------------------------------------


def _maxima_task(task):
    cfg, _, n, rep, seed = task
    sites, nu = lattice_sites(cfg.region, n)
    cross = CrossCovariance(cfg.sigma)
    values = sample_field(cfg.kernel, cross, sites, seed).values[:, 0]
    step = 1.0 if cfg.region.mode == "discrete" else cfg.region.h
    return MaximaEstimate(
        n=n,
        nu_n=nu,
        replicate_id=rep,
        seed=seed,
        z_n=float(values.max()) / b_normalizer(nu),
        sigma_target=math.sqrt(float(cfg.sigma[0, 0])),
        r=nearest_neighbour_correlation(cfg.kernel, step),
    )


def maxima_law_run(cfg: RunConfig, workers: int = 1) -> list:
    """Normalized maxima of a scalar field over the growing regions."""
    if cfg.dim != 1:
        raise ValueError("maxima experiment needs a scalar field (1x1 covariance)")
    if cfg.region is None:
        raise ValueError("config has no [region]")
    _require_decay(cfg)
    return _map(_maxima_task, _tasks(cfg, "maxima", cfg.region.index), workers)


# -- comparison bounds -------------------------------------------------------


def comparison_bounds(sigma: float, r: float) -> tuple[float, float]:
    """Proven liminf window ``[sigma (sqrt(1-r) - sqrt(r)), sigma]``."""
    return sigma * (math.sqrt(1.0 - r) - math.sqrt(r)), sigma


def _bounds_task(task):
    cfg, _, n, rep, seed = task
    sigma, r = cfg.slepian_sigma, cfg.slepian_r
    xs = sample_equicorrelated(sigma, r, int(n), seed)
    z = float(xs.max()) / b_normalizer(n)
    lo, hi = comparison_bounds(sigma, r)
    remark_hi = sigma * math.sqrt(1.0 - r)
    aux = {"r": r, "sigma": sigma, "lower_bound": lo, "upper_bound": hi}
    return [
        ExperimentRecord("bounds", n, float(n), rep, seed, name, value, dict(aux))
        for name, value in (
            ("z_n", z),
            ("in_proven_bounds", float(lo <= z <= hi)),
            ("in_conjectured_window", float(lo <= z <= remark_hi)),
        )
    ]


def slepian_bounds_run(cfg: RunConfig, workers: int = 1) -> list:
    """Normalized maxima of the equicorrelated sequence against the proven
    window. With ``explore`` set, ``r`` may go up to 1; the records then only
    describe where the maxima fall."""
    limit = 1.0 if cfg.explore else 0.5
    if not 0 <= cfg.slepian_r < limit:
        raise ValueError(
            f"r = {cfg.slepian_r} outside [0, {limit:g}): the comparison bound needs "
            "sup correlation below 1/2"
        )
    return _flatten(_map(_bounds_task, _tasks(cfg, "bounds", cfg.slepian_n), workers))


# -- homogeneous functionals -------------------------------------------------


def _functional(cfg: RunConfig) -> HomogeneousFunctional:
    return HomogeneousFunctional(cfg.functional, cfg.dim, cfg.theta)


def _moments_task(task):
    cfg, _, n, rep, seed = task
    sites, nu = lattice_sites(cfg.region, n)
    cross = CrossCovariance(cfg.sigma)
    f = _functional(cfg)
    values = sample_field(cfg.kernel, cross, sites, seed).values
    hull = scale(convex_hull(values), 1.0 / b_normalizer(nu))
    fv = f(hull)
    d_scaled = HomogeneousFunctional("diameter", cfg.dim)(hull)
    a, order = cfg.exp_coefficient, cfg.moment_order
    target = f.of_ellipsoid(concentration_ellipsoid(cross)) ** order
    note = "monte_carlo_volume" if f.kind == "volume" and cfg.dim >= 4 else ""
    aux = {"functional": f.kind, "moment_order": order, "a": a, "target": target, "note": note}
    return [
        ExperimentRecord("moments", n, nu, rep, seed, name, float(value), dict(aux))
        for name, value in (
            ("f_value", fv),
            ("f_moment", fv**order),
            ("exp_moment", math.exp(a * fv ** (2.0 / f.degree))),
            ("ui_proxy", math.exp(a * d_scaled**2)),
        )
    ]


def functional_moments_run(cfg: RunConfig, workers: int = 1) -> list:
    """Homogeneous functionals of the scaled hulls, their moments and the
    exponential-moment proxy ``exp(a (D_n / b)^2)``."""
    if cfg.region is None:
        raise ValueError("config has no [region]")
    _require_decay(cfg)
    f = _functional(cfg)
    if f.kind == "volume" and cfg.dim >= 4:
        logger.warning("volume in dimension %d is a Monte Carlo estimate", cfg.dim)
    return _flatten(_map(_moments_task, _tasks(cfg, "moments", cfg.region.index), workers))


def hull_demo(cfg: RunConfig):
    """One replicate at the largest index: scaled hull, ellipsoid and rho."""
    if cfg.region is None:
        raise ValueError("config has no [region]")
    _require_decay(cfg)
    seq = cfg.region
    i, n = len(seq.index) - 1, seq.index[-1]
    seed = derive_seed(cfg.seed, KIND_CODES["hull_demo"], i, 0)
    sites, nu = lattice_sites(seq, n)
    cross = CrossCovariance(cfg.sigma)
    ell = concentration_ellipsoid(cross)
    values = sample_field(cfg.kernel, cross, sites, seed).values
    hull = scale(convex_hull(values), 1.0 / b_normalizer(nu))
    dirs = _directions(cfg)
    rho = hausdorff_support(hull, ell, dirs)
    rec = ExperimentRecord("hull_demo", n, nu, 0, seed, "rho", rho, {"n_directions": len(dirs)})
    return [rec], hull, ell


# -- aggregation -------------------------------------------------------------


def as_records(items) -> list:
    return [x.to_record() if isinstance(x, MaximaEstimate) else x for x in items]


def _select(records, statistic, n=None, h=None):
    recs = [r for r in records if r.statistic_name == statistic]
    if h is not None:
        recs = [r for r in recs if r.aux.get("h") is not None and math.isclose(r.aux["h"], h)]
    if not recs:
        return [], None
    if n is None:
        n = max(r.n for r in recs)
    return [r.statistic_value for r in recs if math.isclose(r.n, n)], n


def aggregate(values, how: str) -> float:
    if not values:
        return math.nan
    if how == "median":
        return float(statistics.median(values))
    if how in ("mean", "fraction"):
        return float(statistics.fmean(values))
    if how == "min":
        return float(min(values))
    if how == "max":
        return float(max(values))
    raise ValueError(f"unknown aggregate {how!r}")


def summarize(records) -> list:
    """Per ``(statistic, n, h)``: count, mean, standard error, quartiles."""
    groups: dict = {}
    for r in as_records(records):
        key = (r.statistic_name, r.n, r.aux.get("h", ""))
        groups.setdefault(key, []).append(r.statistic_value)
    rows = []
    for (name, n, h), vals in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], str(kv[0][2]))):
        arr = np.asarray(vals, dtype=float)
        q25, q50, q75 = np.percentile(arr, [25, 50, 75])
        se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        row = {
            "statistic": name,
            "n": n,
            "count": len(arr),
            "mean": float(arr.mean()),
            "se": se,
            "median": float(q50),
            "q25": float(q25),
            "q75": float(q75),
            "min": float(arr.min()),
            "max": float(arr.max()),
        }
        if h != "":
            row["h"] = h
        rows.append(row)
    return rows


def evaluate_bands(records, bands) -> list:
    """Verdict per configured band; an empty selection fails."""
    records = as_records(records)
    verdicts = []
    for band in bands:
        band: Band
        vals, n = _select(records, band.statistic, band.n, band.h)
        value = aggregate(vals, band.aggregate)
        ok = bool(vals) and band.lower <= value <= band.upper
        verdicts.append(
            {
                "statistic": band.statistic,
                "aggregate": band.aggregate,
                "n": n,
                "h": band.h,
                "value": value,
                "lower": band.lower,
                "upper": band.upper,
                "pass": ok,
            }
        )
    return verdicts


RUNNERS = {
    "convergence": convergence_run,
    "continuous": continuous_run,
    "maxima": maxima_law_run,
    "bounds": slepian_bounds_run,
    "moments": functional_moments_run,
}
