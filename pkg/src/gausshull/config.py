"""Run configuration: a strict TOML schema.

Sections
--------
``[kernel]``      kind, lam, rho, r
``[cross]``       sigma (nested rows) or entries (row-major, square)
``[region]``      shape, m, mode, index, rates, h, meshes, boundary_eps,
                  boundary_threshold
``[run]``         seed (required), replicates, directions, experiment, out,
                  perturb, containment_slack
``[functional]``  kind, theta, order, exp_coefficient
``[slepian]``     r, n, sigma, explore
``[[band]]``      statistic, aggregate, n, h, lower, upper

Unknown keys are errors. All validation problems are collected and raised
together in a single :class:`ConfigError`.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .gaussian import KERNEL_KINDS, CorrelationKernel
from .geometry import default_direction_count
from .regions import MODES, SHAPES, RegionSequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_REPLICATES = 20
AGGREGATES = ("median", "mean", "min", "max", "fraction")

_ALLOWED = {
    "kernel": {"kind", "lam", "rho", "r"},
    "cross": {"sigma", "entries"},
    "region": {"shape", "m", "mode", "index", "rates", "h", "meshes", "boundary_eps", "boundary_threshold"},
    "run": {"seed", "replicates", "directions", "experiment", "out", "perturb", "containment_slack"},
    "functional": {"kind", "theta", "order", "exp_coefficient"},
    "slepian": {"r", "n", "sigma", "explore"},
    "band": {"statistic", "aggregate", "n", "h", "lower", "upper"},
}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class Band:
    """Acceptance band on an aggregate of one statistic."""

    statistic: str
    aggregate: str = "median"
    n: float | None = None
    h: float | None = None
    lower: float = -math.inf
    upper: float = math.inf


@dataclass
class RunConfig:
    seed: int
    kernel: CorrelationKernel = field(default_factory=lambda: CorrelationKernel("iid"))
    sigma: np.ndarray = field(default_factory=lambda: np.eye(2))
    region: RegionSequence | None = None
    meshes: tuple = ()
    boundary_eps: float = 1.0
    boundary_threshold: float = 0.5
    replicates: int = DEFAULT_REPLICATES
    directions: int | None = None
    experiment: str | None = None
    out: str = "out"
    perturb: float = 0.0
    containment_slack: float = 0.05
    functional: str = "diameter"
    theta: tuple | None = None
    moment_order: float = 1.0
    exp_coefficient: float = 0.1
    slepian_r: float = 0.25
    slepian_n: tuple = (10_000,)
    slepian_sigma: float = 1.0
    explore: bool = False
    bands: tuple = ()

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    def resolved(self) -> dict:
        """Plain-data view, suitable for echoing into summaries."""
        d = {
            "seed": self.seed,
            "kernel": asdict(self.kernel),
            "sigma": self.sigma.tolist(),
            "region": None if self.region is None else asdict(self.region),
            "meshes": list(self.meshes),
            "boundary_eps": self.boundary_eps,
            "boundary_threshold": self.boundary_threshold,
            "replicates": self.replicates,
            "directions": self.directions,
            "experiment": self.experiment,
            "perturb": self.perturb,
            "containment_slack": self.containment_slack,
            "functional": {
                "kind": self.functional,
                "theta": None if self.theta is None else list(self.theta),
                "order": self.moment_order,
                "exp_coefficient": self.exp_coefficient,
            },
            "slepian": {
                "r": self.slepian_r,
                "n": list(self.slepian_n),
                "sigma": self.slepian_sigma,
                "explore": self.explore,
            },
            "bands": [asdict(b) for b in self.bands],
        }
        if d["region"] is not None:
            d["region"]["index"] = list(self.region.index)
        return _jsonable(d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def _strictly_increasing(xs) -> bool:
    return all(b > a for a, b in zip(xs, xs[1:]))


def build_config(raw: dict) -> RunConfig:
    """Validate a parsed TOML document into a :class:`RunConfig`."""
    errors: list[str] = []

    for key, value in raw.items():
        if key not in _ALLOWED:
            errors.append(f"unknown section [{key}]")
            continue
        tables = value if key == "band" and isinstance(value, list) else [value]
        for t in tables:
            if not isinstance(t, dict):
                errors.append(f"[{key}] must be a table")
                continue
            for k in t:
                if k not in _ALLOWED[key]:
                    errors.append(f"unknown key {k!r} in [{key}]")

    run = raw.get("run", {}) if isinstance(raw.get("run"), dict) else {}
    kw: dict = {}

    seed = run.get("seed")
    if seed is None:
        errors.append("explicit seed required")
    elif not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        errors.append("seed must be an unsigned 64-bit integer")

    reps = run.get("replicates", DEFAULT_REPLICATES)
    if not isinstance(reps, int) or reps < 1:
        errors.append("replicates must be an integer >= 1")
    kw["replicates"] = reps
    if "directions" in run:
        if not isinstance(run["directions"], int) or run["directions"] < 2:
            errors.append("directions must be an integer >= 2")
        kw["directions"] = run["directions"]
    for k in ("experiment", "out"):
        if k in run:
            kw[k] = str(run[k])
    for k in ("perturb", "containment_slack"):
        if k in run:
            kw[k] = float(run[k])
            if kw[k] < 0:
                errors.append(f"{k} must be nonnegative")

    # cross-covariance
    cross = raw.get("cross", {})
    sigma = None
    if "sigma" in cross and "entries" in cross:
        errors.append("[cross] takes either sigma or entries, not both")
    elif "entries" in cross:
        e = np.asarray(cross["entries"], dtype=float).ravel()
        d = int(round(math.sqrt(len(e))))
        if d * d != len(e) or d == 0:
            errors.append(f"[cross] entries has {len(e)} values, not a square count")
        else:
            sigma = e.reshape(d, d)
    elif "sigma" in cross:
        try:
            sigma = np.atleast_2d(np.asarray(cross["sigma"], dtype=float))
        except ValueError:
            errors.append("[cross] sigma rows have unequal lengths")
    if sigma is not None:
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            errors.append(f"covariance must be square, got shape {sigma.shape}")
        else:
            asym = float(np.max(np.abs(sigma - sigma.T)))
            if asym > 1e-9:
                errors.append(f"covariance is not symmetric (max asymmetry {asym:.6g})")
            else:
                w = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
                if w[0] < -1e-10 * max(float(np.trace(sigma)), 0.0):
                    errors.append(f"covariance is not positive semidefinite (eigenvalue {w[0]:.6g})")
            kw["sigma"] = sigma

    # region
    reg = raw.get("region")
    m = 1
    if reg is not None:
        m = reg.get("m", 1)
        index = reg.get("index", [])
        if not isinstance(index, list) or not index:
            errors.append("[region] index must be a nonempty list")
        elif not _strictly_increasing(index):
            errors.append(f"[region] index {index} is not strictly increasing")
        shape = reg.get("shape", "cube")
        mode = reg.get("mode", "discrete")
        if shape not in SHAPES:
            errors.append(f"unknown region shape {shape!r}")
        if mode not in MODES:
            errors.append(f"unknown region mode {mode!r}")
        meshes = reg.get("meshes", [])
        if meshes and not all(b < a for a, b in zip(meshes, meshes[1:])):
            errors.append("[region] meshes must be strictly decreasing")
        if any(h <= 0 for h in meshes):
            errors.append("[region] meshes must be positive")
        kw["meshes"] = tuple(float(h) for h in meshes)
        for k in ("boundary_eps", "boundary_threshold"):
            if k in reg:
                kw[k] = float(reg[k])
        try:
            kw["region"] = RegionSequence(
                shape=shape,
                m=int(m),
                mode=mode,
                index=tuple(index) if isinstance(index, list) else (),
                rates=tuple(reg["rates"]) if "rates" in reg else None,
                h=float(reg.get("h", meshes[-1] if meshes else 1.0)),
            )
        except (ValueError, TypeError) as exc:
            errors.append(f"[region] {exc}")

    # kernel
    ker = raw.get("kernel", {})
    kind = ker.get("kind", "iid")
    if kind not in KERNEL_KINDS:
        errors.append(f"unknown kernel kind {kind!r}")
    else:
        try:
            kw["kernel"] = CorrelationKernel(
                kind=kind,
                m=int(m),
                lam=float(ker.get("lam", 1.0)),
                rho=float(ker.get("rho", 0.0)),
                r=float(ker.get("r", 0.0)),
            )
        except ValueError as exc:
            errors.append(f"[kernel] {exc}")

    fun = raw.get("functional", {})
    if fun:
        kw["functional"] = fun.get("kind", "diameter")
        if kw["functional"] not in ("diameter", "volume", "width"):
            errors.append(f"unknown functional kind {kw['functional']!r}")
        if "theta" in fun:
            kw["theta"] = tuple(float(x) for x in fun["theta"])
        kw["moment_order"] = float(fun.get("order", 1.0))
        if kw["moment_order"] <= 0:
            errors.append("[functional] order must be positive")
        kw["exp_coefficient"] = float(fun.get("exp_coefficient", 0.1))
        if kw["exp_coefficient"] <= 0:
            errors.append("[functional] exp_coefficient must be positive")

    sle = raw.get("slepian", {})
    if sle:
        kw["slepian_r"] = float(sle.get("r", 0.25))
        ns = sle.get("n", [10_000])
        ns = ns if isinstance(ns, list) else [ns]
        if not ns or not _strictly_increasing(ns) or ns[0] < 1:
            errors.append("[slepian] n must be positive and strictly increasing")
        kw["slepian_n"] = tuple(int(x) for x in ns)
        kw["slepian_sigma"] = float(sle.get("sigma", 1.0))
        kw["explore"] = bool(sle.get("explore", False))
        limit = 1.0 if kw["explore"] else 0.5
        if not 0 <= kw["slepian_r"] < limit:
            errors.append(f"[slepian] r must lie in [0, {limit:g})")

    bands = []
    for b in raw.get("band", []) if isinstance(raw.get("band", []), list) else []:
        agg = b.get("aggregate", "median")
        if agg not in AGGREGATES:
            errors.append(f"unknown band aggregate {agg!r}")
        if "statistic" not in b:
            errors.append("band without statistic")
            continue
        bands.append(
            Band(
                statistic=b["statistic"],
                aggregate=agg,
                n=b.get("n"),
                h=b.get("h"),
                lower=float(b.get("lower", -math.inf)),
                upper=float(b.get("upper", math.inf)),
            )
        )
    kw["bands"] = tuple(bands)

    if errors:
        raise ConfigError(errors)
    if "directions" not in kw:
        kw["directions"] = default_direction_count(kw.get("sigma", np.eye(2)).shape[0])
    return RunConfig(seed=int(seed), **kw)


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file {path} not found"]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    return build_config(raw)
