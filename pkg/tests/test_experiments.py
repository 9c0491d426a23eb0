"""Sweep harness, scaling fits, and the isolated-agent experiments."""

import math

import numpy as np
import pytest

from redwave.epidemic import SimParams, run
from redwave.errors import ConfigurationError, GeometryError
from redwave.experiments import (
    ExperimentPlan,
    isolated_bound,
    isolated_count,
    isolated_indices,
    isolated_indices_bruteforce,
    multi_source_run,
    replicate,
    scaling_fit,
    threshold_experiment,
)
from redwave.geometry import Region
from redwave.mobility import MobilityMode, RngStream


def base_params(**kw):
    defaults = dict(
        region=Region.square(16.0),
        n=256,
        R=4.0,
        k=1,
        mobility=MobilityMode.standard(1.0),
    )
    defaults.update(kw)
    return SimParams(**defaults)


# ---------------------------------------------------------------------------
# sweep plans
# ---------------------------------------------------------------------------


def test_plan_validation():
    with pytest.raises(ConfigurationError):
        ExperimentPlan(base=base_params(), replicas=0)
    with pytest.raises(ConfigurationError):
        ExperimentPlan(base=base_params(), sweep_axis="L")
    with pytest.raises(ConfigurationError):
        ExperimentPlan(base=base_params(), sweep_axis="speed", sweep_values=(1,)).points()


def test_plan_points_sweep_side_length():
    plan = ExperimentPlan(
        base=base_params(), sweep_axis="L", sweep_values=(8.0, 16.0, 32.0)
    )
    pts = plan.points()
    assert [p.region.size for p in pts] == [8.0, 16.0, 32.0]
    # density-one population: n tracks the area
    assert [p.n for p in pts] == [64, 256, 1024]


def test_plan_density_one_off():
    plan = ExperimentPlan(
        base=base_params(n=50),
        sweep_axis="L",
        sweep_values=(8.0, 16.0),
        density_one=False,
    )
    assert [p.n for p in plan.points()] == [50, 50]


def test_plan_sweep_axes():
    base = base_params()
    for axis, values, get in [
        ("R", (2.0, 3.0), lambda p: p.R),
        ("rho", (0.5, 1.5), lambda p: p.mobility.rho),
        ("k", (1, 4), lambda p: p.k),
        ("n", (10, 20), lambda p: p.n),
    ]:
        plan = ExperimentPlan(base=base, sweep_axis=axis, sweep_values=values)
        assert [get(p) for p in plan.points()] == list(values)


def test_replicate_is_reproducible():
    plan = ExperimentPlan(
        base=base_params(region=Region.square(12.0), R=5.0, seed=100), replicas=4
    )
    a = replicate(plan)
    b = replicate(plan)
    assert a.points[0].completion_times == b.points[0].completion_times
    # each replica matches a standalone run at seed base + r
    for r, t in enumerate(a.points[0].completion_times):
        solo = run(base_params(region=Region.square(12.0), n=144, R=5.0, seed=100 + r))
        assert solo.completion_time == t


def test_replicate_captures_per_run_errors():
    # parameters pass construction, but one sweep point breaks the cellular
    # grid at run time (a supercell of side 12 cannot fit a square of side 8)
    base = SimParams(
        region=Region.square(48.0),
        n=64,
        R=6.0,
        mobility=MobilityMode.cellular(12.0),
        transmission_scope="same_supercell",
    )
    plan = ExperimentPlan(
        base=base, sweep_axis="L", sweep_values=(48.0, 8.0),
        replicas=2, density_one=False,
    )
    result = replicate(plan)
    assert result.points[0].errors == [None, None]
    assert all(e is not None for e in result.points[1].errors)
    assert result.points[1].completion_times == [None, None]


def test_point_summary_aggregates():
    plan = ExperimentPlan(base=base_params(R=6.0, seed=7), replicas=5)
    point = replicate(plan).points[0]
    times = point.completed_times
    assert point.completion_fraction() == len(times) / 5
    if times:
        assert point.median_completion() == float(np.median(times))
        assert point.quantile_completion(0.5) == point.median_completion()


# ---------------------------------------------------------------------------
# scaling fits
# ---------------------------------------------------------------------------


def test_scaling_fit_exact_line():
    fit = scaling_fit([(1.0, 5.0), (2.0, 8.0), (3.0, 11.0)])
    assert fit.slope == pytest.approx(3.0)
    assert fit.intercept == pytest.approx(2.0)
    assert fit.r_squared == pytest.approx(1.0)


def test_scaling_fit_constant_series():
    fit = scaling_fit([(1.0, 4.0), (2.0, 4.0), (3.0, 4.0)])
    assert fit.slope == pytest.approx(0.0)
    assert fit.r_squared == 1.0


def test_scaling_fit_needs_three_distinct_x():
    with pytest.raises(ConfigurationError):
        scaling_fit([(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)])


def test_scaling_fit_recovers_noisy_slope():
    gen = RngStream(99).generator()
    xs = np.linspace(1, 10, 40)
    ys = 3.0 * xs + 1.0 + gen.normal(0, 0.5, size=40)
    fit = scaling_fit(list(zip(xs, ys)))
    assert 2.7 <= fit.slope <= 3.3
    assert fit.r_squared >= 0.95


# ---------------------------------------------------------------------------
# isolated agents
# ---------------------------------------------------------------------------


def test_isolated_zero_radius_everyone_isolated():
    pos = np.zeros((5, 2))
    assert list(isolated_indices(pos, 0.0)) == [0, 1, 2, 3, 4]


def test_isolated_close_pair_none_isolated():
    pos = np.array([[1.0, 1.0], [1.5, 1.0]])
    assert len(isolated_indices(pos, 1.0)) == 0
    # exactly at distance R: the closed ball makes both non-isolated
    pos = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert len(isolated_indices(pos, 1.0)) == 0
    assert len(isolated_indices(pos, 0.99)) == 2


def test_isolated_bound_formula_and_clamp():
    n, R = 4096, 1.2
    expected = n * (1 - math.pi * R**2 / n) ** (n - 1)
    assert isolated_bound(n, R) == pytest.approx(expected)
    assert isolated_bound(10, 10.0) == 0.0


def test_isolated_hash_matches_bruteforce():
    gen = RngStream(31).generator()
    for trial in range(50):
        n = int(gen.integers(2, 2000))
        side = float(gen.uniform(5.0, 60.0))
        R = float(gen.uniform(0.2, 4.0))
        pos = gen.random((n, 2)) * side
        got = isolated_indices(pos, R)
        exp = isolated_indices_bruteforce(pos, R)
        assert np.array_equal(got, exp)


def test_isolated_count_reports_bound():
    region = Region.square(64.0)
    res = isolated_count(4096, 0.8, region, RngStream(5))
    assert res.bound == pytest.approx(isolated_bound(4096, 0.8))
    assert res.positions.shape == (4096, 2)
    assert 0 <= res.count <= 4096


# ---------------------------------------------------------------------------
# multi-source runs
# ---------------------------------------------------------------------------


def test_multi_source_all_agents_complete_immediately():
    p = base_params(n=6, region=Region.square(10.0))
    probe = run(p)
    pts = [tuple(map(float, xy)) for xy in probe.final.chain_origin[:6]]
    rec = multi_source_run(SimParams(**{**p.__dict__, "sources": pts}))
    assert rec.completion_time == 1
    assert rec.ecc_sources > 0


def test_multi_source_single_point_matches_plain_run():
    p = base_params(seed=3, sources=[(8.0, 8.0)])
    a = multi_source_run(p)
    b = run(p)
    assert a.completion_time == b.completion_time
    assert np.array_equal(a.final.states, b.final.states)


def test_multi_source_validates_containment():
    with pytest.raises(GeometryError):
        multi_source_run(base_params(sources=[(99.0, 0.0)]))
    with pytest.raises(ConfigurationError):
        multi_source_run(base_params(sources="random"))


# ---------------------------------------------------------------------------
# sub-threshold experiment
# ---------------------------------------------------------------------------


def test_threshold_isolated_source_fails_at_once():
    # sparse placement, tiny radius: plenty of isolated agents, and
    # 1-flooding from one of them dies in the first step
    p = base_params(
        region=Region.square(64.0), n=100, R=0.5,
        mobility=MobilityMode.standard(0.0), seed=11,
    )
    res = threshold_experiment(p, trials=20)
    assert res.trials == 20
    assert res.isolated_sources_found + res.skipped == 20
    assert res.isolated_sources_found > 0
    assert res.failures == res.isolated_sources_found


def test_threshold_dense_network_skips_trials():
    # R larger than the region diameter: nobody is ever isolated
    p = base_params(region=Region.square(8.0), n=30, R=20.0)
    res = threshold_experiment(p, trials=5)
    assert res.skipped == 5
    assert res.failures == 0


def test_k_flooding_longevity_soft_audit():
    # larger k keeps informers active longer, which should at least not
    # hurt completion reliability; the medians are reported, not gated,
    # because the effect on completion time is noisy at this scale
    region = Region.square(24.0)
    medians = []
    for k in (1, 2, 4):
        plan = ExperimentPlan(
            base=SimParams(
                region=region, n=576, R=3.0, k=k,
                mobility=MobilityMode.standard(1.5), seed=40,
            ),
            replicas=10,
        )
        point = replicate(plan).points[0]
        assert point.completion_fraction() >= 0.8
        medians.append(point.median_completion())
    assert all(not math.isnan(m) and m >= 1 for m in medians)
    print(f"median completion by k in (1, 2, 4): {medians}")
