import dataclasses
import math

import numpy as np
import pytest

from gausshull.config import Band, build_config
from gausshull.experiments import (
    KIND_CODES,
    MaximaEstimate,
    _select,
    aggregate,
    as_records,
    columns,
    comparison_bounds,
    continuous_run,
    convergence_run,
    evaluate_bands,
    functional_moments_run,
    hull_demo,
    maxima_law_run,
    slepian_bounds_run,
    summarize,
)

from oracles import disk_containment_probability, equicorrelated_z_cdf, median_normalized_max

SEED = 20261015


def cfg(**sections):
    raw = dict(sections)
    raw["run"] = {"seed": SEED, "replicates": 5, **sections.get("run", {})}
    return build_config(raw)


def iid2(index, reps=5, **run):
    return cfg(
        kernel={"kind": "iid"},
        cross={"sigma": [[1.0, 0.0], [0.0, 1.0]]},
        region={"shape": "cube", "m": 1, "index": index},
        run={"replicates": reps, **run},
    )


def values(records, name, n=None):
    return [r.statistic_value for r in records if r.statistic_name == name and (n is None or r.n == n)]


# -- maxima ------------------------------------------------------------------


def maxima_cfg(var, reps=5, index=(999, 9999), kernel=None, m=1):
    return cfg(
        kernel=kernel or {"kind": "iid"},
        cross={"sigma": [[var]]},
        region={"shape": "cube", "m": m, "index": list(index)},
        run={"replicates": reps},
    )


def test_maxima_scale_exactly():
    one = maxima_law_run(maxima_cfg(1.0))
    two = maxima_law_run(maxima_cfg(4.0))
    for a, b in zip(one, two):
        assert b.seed == a.seed
        assert b.z_n == pytest.approx(2 * a.z_n, rel=1e-15)


def test_maxima_median_matches_exact_law():
    est = maxima_law_run(maxima_cfg(1.0, reps=300, index=(9999,)))
    target = median_normalized_max(10_000)
    below = np.mean([e.z_n <= target for e in est])
    assert abs(below - 0.5) <= 3 * math.sqrt(0.25 / 300)


def test_maxima_estimate_fields():
    est = maxima_law_run(maxima_cfg(1.0, reps=2, kernel={"kind": "ar_tensor", "rho": 0.5}, m=2, index=(15,)))
    for e in est:
        assert math.isfinite(e.z_n)
        assert e.r == 0.5 and e.nu_n == 256
        rec = e.to_record()
        assert rec.statistic_name == "z_n" and rec.aux["phi_r"] == pytest.approx(math.sqrt(0.5) - math.sqrt(0.5))
    for r in np.linspace(0, 0.49, 20):
        phi = MaximaEstimate(1, 1, 0, 0, 0.0, 1.0, float(r)).phi_r
        assert 0 < phi <= 1


def test_maxima_needs_scalar_field():
    with pytest.raises(ValueError, match="scalar"):
        maxima_law_run(iid2([10]))


# -- convergence -------------------------------------------------------------


def test_convergence_rejects_equicorrelated():
    c = cfg(kernel={"kind": "equicorrelated", "r": 0.3}, region={"shape": "cube", "m": 1, "index": [10]})
    with pytest.raises(ValueError, match="weak-dependence"):
        convergence_run(c)


def test_convergence_record_schema():
    recs = convergence_run(iid2([99, 999], reps=3))
    names = {r.statistic_name for r in recs}
    assert names == {"rho", "excess", "deficit", "contained", "n_vertices"}
    for r in recs:
        assert len(r.row()) == len(columns("convergence"))
        assert math.isfinite(r.statistic_value)
    rho = values(recs, "rho")
    ex, de = values(recs, "excess"), values(recs, "deficit")
    np.testing.assert_allclose(rho, np.maximum(ex, de))


def test_scaling_equivariance():
    base = dict(kernel={"kind": "iid"}, region={"shape": "cube", "m": 1, "index": [500]}, run={"replicates": 4})
    sigma = np.array([[2.0, 0.6], [0.6, 1.0]])
    a = convergence_run(cfg(cross={"sigma": sigma.tolist()}, **base))
    b = convergence_run(cfg(cross={"sigma": (9 * sigma).tolist()}, **base))
    np.testing.assert_allclose(values(b, "rho"), 3 * np.array(values(a, "rho")), rtol=1e-9)


def test_hull_map_lipschitz_in_runs():
    recs = convergence_run(iid2([999], reps=10, perturb=0.5))
    pts, hulls = values(recs, "lipschitz_points"), values(recs, "lipschitz_hulls")
    assert len(pts) == 10
    assert all(h <= p + 1e-12 for h, p in zip(hulls, pts))


def test_containment_matches_exact_probability():
    reps = 300
    recs = convergence_run(iid2([999], reps=reps))
    frac = np.mean(values(recs, "contained"))
    p = disk_containment_probability(1000, 0.05)
    assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / reps)


def test_runs_are_independent_of_worker_count():
    c = iid2([99, 999], reps=4)
    one = [r.row() for r in convergence_run(c, workers=1)]
    two = [r.row() for r in convergence_run(c, workers=2)]
    assert one == two


def test_seed_streams_distinct_across_kinds():
    assert len(set(KIND_CODES.values())) == len(KIND_CODES)
    recs = convergence_run(iid2([99], reps=6))
    assert len({r.seed for r in recs}) == 6


# -- continuous ----------------------------------------------------------------


def cont_cfg(**region):
    reg = {"shape": "cube", "m": 1, "mode": "continuous", "index": [100, 200], "meshes": [0.5, 0.25, 0.125]}
    reg.update(region)
    return cfg(
        kernel={"kind": "exponential", "lam": 1.0},
        cross={"sigma": [[1.0, 0.0], [0.0, 1.0]]},
        region=reg,
        run={"replicates": 4},
    )


def test_continuous_columns_and_sigma_h():
    recs = continuous_run(cont_cfg())
    by_h = {}
    for r in recs:
        if r.statistic_name == "sigma_h":
            by_h[r.aux["h"]] = r.statistic_value
    hs = sorted(by_h, reverse=True)
    assert hs == [0.5, 0.25, 0.125]
    assert by_h[0.5] > by_h[0.25] > by_h[0.125]
    for r in recs:
        assert len(r.row()) == len(columns("continuous"))
    d = values(recs, "mesh_discrepancy")
    dn = values(recs, "scaled_d_n")
    assert all(x <= y + 1e-12 for x, y in zip(d, dn))


def test_continuous_boundary_condition_error():
    with pytest.raises(ValueError, match="boundary-thinness"):
        continuous_run(cont_cfg(boundary_threshold=1e-4))


def test_continuous_errors():
    with pytest.raises(ValueError, match="integer multiple"):
        continuous_run(cont_cfg(meshes=[0.5, 0.3]))
    c = cfg(kernel={"kind": "iid"}, region={"shape": "cube", "m": 1, "mode": "continuous", "index": [10], "meshes": [0.5, 0.25]})
    with pytest.raises(ValueError, match="continuous field"):
        continuous_run(c)
    with pytest.raises(ValueError, match="discrete"):
        convergence_run(cont_cfg())


# -- comparison bounds ---------------------------------------------------------


def test_comparison_bounds_values():
    lo, hi = comparison_bounds(1.0, 0.25)
    assert lo == pytest.approx(0.3660, abs=5e-5) and hi == 1.0
    assert comparison_bounds(1.0, 0.0) == (1.0, 1.0)


def test_bounds_runner_and_r_limit():
    c = cfg(slepian={"r": 0.25, "n": [1000]}, run={"replicates": 10})
    recs = slepian_bounds_run(c)
    z = values(recs, "z_n")
    inside = values(recs, "in_proven_bounds")
    lo, hi = comparison_bounds(1.0, 0.25)
    assert inside == [float(lo <= x <= hi) for x in z]
    with pytest.raises(Exception, match="r must lie"):
        cfg(slepian={"r": 0.5})
    with pytest.raises(ValueError, match="below 1/2"):
        slepian_bounds_run(dataclasses.replace(c, slepian_r=0.5))
    explored = slepian_bounds_run(cfg(slepian={"r": 0.7, "explore": True, "n": [100]}))
    assert len(values(explored, "z_n")) == 5


def test_bounds_r_zero_matches_iid():
    recs = slepian_bounds_run(cfg(slepian={"r": 0.0, "n": [10_000]}, run={"replicates": 30}))
    med = aggregate(values(recs, "z_n"), "median")
    assert 0.85 <= med <= 1.0


# -- functional moments ----------------------------------------------------------


def test_moments_records():
    c = build_config({**_raw_moments(), "functional": {"kind": "volume", "order": 2}})
    recs = functional_moments_run(c)
    for r in recs:
        assert r.aux["target"] == pytest.approx(math.pi**2)
        assert r.aux["functional"] == "volume"
    f = values(recs, "f_value")
    np.testing.assert_allclose(values(recs, "f_moment"), np.square(f))
    np.testing.assert_allclose(values(recs, "exp_moment"), np.exp(0.1 * np.array(f)))


def _raw_moments():
    return {
        "kernel": {"kind": "iid"},
        "cross": {"sigma": [[1.0, 0.0], [0.0, 1.0]]},
        "region": {"shape": "cube", "m": 1, "index": [999]},
        "run": {"seed": SEED, "replicates": 3},
    }


def test_moments_diameter_target_and_proxy():
    recs = functional_moments_run(build_config({**_raw_moments(), "functional": {"kind": "diameter"}}))
    assert {r.aux["target"] for r in recs} == {2.0}
    np.testing.assert_allclose(values(recs, "ui_proxy"), np.exp(0.1 * np.square(values(recs, "f_value"))))


def test_moments_high_dimension_volume_is_tagged(caplog):
    raw = _raw_moments()
    raw["cross"] = {"sigma": np.eye(4).tolist()}
    raw["region"]["index"] = [200]
    raw["run"]["replicates"] = 1
    raw["functional"] = {"kind": "volume"}
    with caplog.at_level("WARNING"):
        recs = functional_moments_run(build_config(raw))
    assert all(r.aux["note"] == "monte_carlo_volume" for r in recs)
    assert "Monte Carlo" in caplog.text


# -- demo and aggregation --------------------------------------------------------


def test_hull_demo():
    recs, hull, ell = hull_demo(iid2([999]))
    assert len(recs) == 1 and recs[0].statistic_name == "rho"
    assert hull.dim == 2 and recs[0].statistic_value > 0


def test_bands_and_summary():
    recs = convergence_run(iid2([99, 999], reps=4))
    rho = values(recs, "rho", 999)
    verdict = evaluate_bands(recs, [Band("rho", "median", upper=10.0), Band("nonexistent", "median")])
    assert verdict[0]["pass"] and verdict[0]["n"] == 999
    assert verdict[0]["value"] == pytest.approx(float(np.median(rho)))
    assert not verdict[1]["pass"]
    sel, n = _select(recs, "rho", n=99)
    assert n == 99 and len(sel) == 4
    rows = summarize(recs)
    assert {(r["statistic"], r["n"]) for r in rows} >= {("rho", 99), ("rho", 999)}
    assert aggregate([1.0, 0.0, 1.0, 1.0], "fraction") == 0.75
    assert math.isnan(aggregate([], "median"))
    assert as_records(maxima_law_run(maxima_cfg(1.0, reps=1, index=(10,))))[0].statistic_name == "z_n"


# -- finite-sample laws behind two acceptance bands --------------------------


def test_bounds_exceedance_matches_quadrature():
    """Z_n above sigma is a genuine finite-n event: the run's exceedance rate
    matches the exact law of the construction."""
    reps = 2000
    recs = slepian_bounds_run(cfg(slepian={"r": 0.25, "n": [10_000]}, run={"replicates": reps}))
    z = np.array(values(recs, "z_n"))
    p = 1 - equicorrelated_z_cdf(1.0, 10_000, 0.25)
    assert 0.04 < p < 0.06
    assert abs(np.mean(z > 1.0) - p) <= 3 * math.sqrt(p * (1 - p) / reps)


def test_exponential_proxy_rises_towards_its_limit():
    """For iid samples the mean of exp(0.1 (D_n / b)^2) increases with n
    towards exp(0.4); it stays bounded but is not non-increasing."""
    raw = _raw_moments()
    raw["region"]["index"] = [99, 99999]
    raw["run"]["replicates"] = 400
    raw["functional"] = {"kind": "diameter"}
    recs = functional_moments_run(build_config(raw))
    small, big = (np.array(values(recs, "ui_proxy", n)) for n in (99, 99999))
    se = math.sqrt(small.var(ddof=1) / len(small) + big.var(ddof=1) / len(big))
    assert big.mean() - small.mean() > 3 * se
    assert big.mean() < math.exp(0.4)
