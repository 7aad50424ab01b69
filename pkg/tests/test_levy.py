import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from oracles import ball_bounds, cylinders
from regdim import ArgumentError, EmpiricalMeasure, Lebesgue, ResolutionError, cantor_measure
from regdim.levy import (EventSpec, SamplePath, StableProcessSpec, blowup_experiment,
                         detect_event, event_candidates, event_ratio_witness, graph_pushforward,
                         sample_path, scale_restricted_constants, scaling_check,
                         stable_variates, synthetic_event_path)

SYN = dict(x=0.5, r=1 / 8, R=0.5, beta=4.0, alpha=2.0)


def lower_event_path(n, x, r, R, beta, alpha):
    """Zero over ``I(x, r^beta)`` and far above ``R^(1/alpha)/2`` elsewhere on ``I(x, R)``."""
    t = np.arange(n + 1) / n
    core = np.abs(t - x) <= r ** beta / 2
    return SamplePath(t, np.where(core, 0.0, R ** (1 / alpha)))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
def test_path_starts_at_zero_and_is_deterministic(alpha):
    spec = StableProcessSpec(alpha, 2 ** 10, seed=123)
    p, q = sample_path(spec), sample_path(spec)
    assert p.values[0] == 0.0
    assert np.array_equal(p.values, q.values)
    assert np.all(np.isfinite(p.values))
    np.testing.assert_array_equal(p.times, np.arange(2 ** 10 + 1) / 2 ** 10)


def test_families():
    assert StableProcessSpec(2.0, 4).family == "gaussian"
    assert StableProcessSpec(1.0, 4).family == "cauchy"
    assert StableProcessSpec(1.3, 4).family == "symmetric-stable"


@pytest.mark.parametrize("alpha, n", [(0.0, 8), (2.5, 8), (-1.0, 8), (2.0, 12), (2.0, 1)])
def test_invalid_specs(alpha, n):
    with pytest.raises(ArgumentError):
        StableProcessSpec(alpha, n)


def test_brownian_variance():
    ends = [sample_path(StableProcessSpec(2.0, 2 ** 14, s)).values[-1] for s in range(200)]
    assert 0.8 <= np.var(ends, ddof=1) <= 1.2


def test_cms_matches_reference_stable_law():
    rng = np.random.default_rng(5)
    x = stable_variates(1.5, 4000, rng)
    assert stats.kstest(x, stats.levy_stable(1.5, 0.0).cdf).pvalue > 0.01
    y = stable_variates(1.0, 4000, np.random.default_rng(6))
    assert stats.kstest(y, stats.cauchy.cdf).pvalue > 0.01


@pytest.mark.parametrize("alpha, a", [(2.0, 0.25), (1.0, 0.5)])
def test_scaling(alpha, a):
    rep = scaling_check(StableProcessSpec(alpha, 2 ** 10, 0), a, 500)
    assert rep.passed, rep


def test_scaling_negative_control():
    rep = scaling_check(StableProcessSpec(2.0, 2 ** 10, 0), 1 / 16, 500, scaling_alpha=1.0)
    assert not rep.passed


def test_scaling_check_arguments():
    spec = StableProcessSpec(2.0, 2 ** 10, 0)
    with pytest.raises(ArgumentError):
        scaling_check(spec, 0.25, 100)
    with pytest.raises(ArgumentError):
        scaling_check(spec, 1.5, 500)


def test_increment_sign_test():
    paths = np.stack([sample_path(StableProcessSpec(2.0, 2 ** 8, s)).values for s in range(500)])
    for b in range(8):
        inc = paths[:, (b + 1) * 32] - paths[:, b * 32]
        assert stats.binomtest(int((inc > 0).sum()), 500).pvalue > 0.01


def test_lebesgue_graph_weights():
    path = sample_path(StableProcessSpec(2.0, 2 ** 8, 1))
    g = graph_pushforward(Lebesgue(), path)
    assert g.total_mass == pytest.approx(1.0)
    np.testing.assert_allclose(g.weights, 1 / 2 ** 8, rtol=1e-12)


def test_cantor_graph_weights_match_cylinders():
    mu = cantor_measure(0.25)
    n = 2 ** 6
    path = sample_path(StableProcessSpec(2.0, n, 2))
    g = graph_pushforward(mu, path)
    assert g.total_mass == pytest.approx(1.0, abs=1e-9)
    cyl = cylinders([(1 / 3, 0, 0.25), (1 / 3, 2 / 3, 0.75)], 12)
    t = path.times
    mids, halves = (t[1:] + t[:-1]) / 2, (t[1:] - t[:-1]) / 2
    inside, straddle = ball_bounds(cyl, mids, halves)
    full = np.zeros(n)
    full[g.cells] = g.weights
    assert np.all(full >= inside - 1e-9) and np.all(full <= inside + straddle + 1e-9)


def test_zero_path_graph_is_isometric():
    mu = cantor_measure(0.25)
    path = SamplePath(np.arange(2 ** 8 + 1) / 2 ** 8, np.zeros(2 ** 8 + 1))
    g = graph_pushforward(mu, path)
    rng = np.random.default_rng(0)
    for _ in range(50):
        k = rng.integers(0, 2 ** 8)
        R = rng.uniform(0.01, 0.5)
        a, b = path.times[k] - R, path.times[k] + R
        c0 = np.searchsorted(path.times, a, side="left")
        c1 = np.searchsorted(path.times, b, side="right")
        expected = mu.interval_mass(path.times[c0], path.times[min(c1, 2 ** 8)]) \
            if c1 <= 2 ** 8 else mu.interval_mass(path.times[c0], 1.0)
        got = g.ball_mass((path.times[k], 0.0), R)
        # Cells are half-open, so the mass is that of whole cells whose left end lies in the ball.
        assert got == pytest.approx(expected, abs=1e-8)


def test_synthetic_upper_event():
    path = synthetic_event_path(2 ** 16, **SYN)
    rep = detect_event(path, EventSpec(0.5, 1 / 8, 0.5, 4.0), 2.0)
    assert rep.big_ok and rep.small_ok and rep.event
    assert rep.ratio == pytest.approx(rep.interval_ratio, rel=1e-12)
    direct = Lebesgue().interval_mass(0.5 - 0.125, 0.5 + 0.125) / (0.125 ** 4)
    assert rep.ratio == pytest.approx(direct, rel=4 * 2 ** -16 / 0.125 ** 4)
    assert rep.exponent > 4


def test_grid_refinement_keeps_event():
    for n in (2 ** 14, 2 ** 15, 2 ** 16):
        path = synthetic_event_path(n, **SYN)
        assert detect_event(path, EventSpec(0.5, 1 / 8, 0.5, 4.0), 2.0).event


def test_exiting_path_breaks_big_box():
    path = synthetic_event_path(2 ** 12, **SYN)
    v = path.values.copy()
    v[path.index_of(0.5 + 0.0625)] = 10.0
    rep = detect_event(SamplePath(path.times, v), EventSpec(0.5, 1 / 8, 0.5, 4.0), 2.0)
    assert not rep.big_ok and not rep.event


def test_r_not_below_R():
    with pytest.raises(ArgumentError):
        EventSpec(0.5, 0.5, 0.5, 2.0)
    with pytest.raises(ArgumentError):
        EventSpec(0.5, 0.6, 0.5, 2.0)


def test_resolution_guard():
    path = synthetic_event_path(2 ** 6, **SYN)
    with pytest.raises(ResolutionError) as exc:
        detect_event(path, EventSpec(0.5, 1 / 64, 0.5, 4.0), 2.0)
    assert exc.value.min_n * (1 / 64) >= 4
    assert exc.value.min_n & (exc.value.min_n - 1) == 0


def test_lower_event():
    x, r, R, beta = 0.5, 1 / 16, 1 / 4, 0.5
    path = lower_event_path(2 ** 12, x, r, R, beta, 2.0)
    rep = detect_event(path, EventSpec(x, r, R, beta), 2.0)
    assert rep.spec.variant == "lower"
    assert rep.event
    assert rep.ratio == pytest.approx(rep.interval_ratio, rel=1e-12)


def test_transposed_rectangles():
    path = synthetic_event_path(2 ** 12, **SYN)
    rep = detect_event(path, EventSpec(0.5, 1 / 8, 0.5, 4.0), 0.5)
    assert rep.transposed
    assert rep.big.R1 == 0.5 and rep.big.R2 == 0.5 ** 0.5


@settings(max_examples=40)
@given(i=st.integers(2, 4), j=st.integers(1, 4), beta=st.floats(1.2, 3.0),
       frac=st.floats(0.05, 1.0), noise=st.integers(0, 2 ** 31), base=st.sampled_from(["leb", "cantor"]))
def test_event_soundness(i, j, beta, frac, noise, base):
    n = 2 ** 14
    x, R = 0.5, 2.0 ** -i
    r = 2.0 ** -(2 * i + j)
    lo, hi = r ** 0.5 / 2, R / 2
    path = synthetic_event_path(n, x, r, R, beta, 2.0, height=lo + frac * (hi - lo))
    # Jitter that keeps every point on its side of both boxes.
    rng = np.random.default_rng(noise)
    v = path.values + np.where(path.values > 0, 1, 0) * rng.uniform(0, 0.1 * (hi - lo) * (1 - frac), n + 1)
    path = SamplePath(path.times, v)
    mu = Lebesgue() if base == "leb" else cantor_measure(0.25)
    g = graph_pushforward(mu, path)
    rep = detect_event(path, EventSpec(x, r, R, beta), 2.0, g)
    assert rep.event
    assert rep.ratio == pytest.approx(rep.interval_ratio, rel=1e-12)
    # Cell sums approximate the base masses of the two time intervals.
    num = mu.interval_mass(x - R ** 2 / 2, x + R ** 2 / 2)
    den = mu.interval_mass(x - r ** beta / 2, x + r ** beta / 2)
    if base == "leb" and r ** beta * n >= 64:
        assert rep.ratio == pytest.approx(num / den, rel=0.05)


def test_events_on_brownian_paths_are_sound():
    for seed in range(5):
        path = sample_path(StableProcessSpec(2.0, 2 ** 12, seed))
        g = graph_pushforward(Lebesgue(), path)
        for x, r, R in event_candidates(path, 2.0):
            rep = detect_event(path, EventSpec(x, r, R, 2.5), 2.0, g)
            if rep.event:
                assert rep.ratio == pytest.approx(rep.interval_ratio, rel=1e-12)


def test_witness_on_synthetic_path():
    # s = 1 and t = 1/2 give beta = 4; the event sits on the candidate x = 1/2, R = 1/4.
    path = synthetic_event_path(2 ** 16, x=0.5, r=1 / 32, R=0.25, beta=4.0, alpha=2.0)
    assert detect_event(path, EventSpec(0.5, 1 / 32, 0.25, 4.0), 2.0).event
    rep = event_ratio_witness(Lebesgue(), path, 1.0, lower_dim=1.0, alpha=2.0)
    assert rep.exponent >= 1 - 0.05
    rep0 = event_ratio_witness(Lebesgue(), path, 0.0, lower_dim=1.0, alpha=2.0)
    assert rep0.spec.beta == 2.0
    assert rep0.exponent >= 0


def test_witness_needs_resolvable_candidates():
    path = sample_path(StableProcessSpec(2.0, 2, 0))
    with pytest.raises(ResolutionError):
        event_ratio_witness(Lebesgue(), path, 1.0, lower_dim=1.0)


def test_identity_path_constants_flat():
    # Flat up to atom counting: an inner ball over m cells holds about 2m + 1 atoms.
    n = 2 ** 14
    t = np.arange(n + 1) / n
    g = graph_pushforward(Lebesgue(), SamplePath(t, t.copy()))
    C, K = scale_restricted_constants(g, 2.0, [2.0 ** -4, 2.0 ** -6, 2.0 ** -8])
    np.testing.assert_allclose(C, 2.0, rtol=0.02)


def test_blowup_deterministic_across_workers():
    args = (Lebesgue(), 2.0, 2 ** 10, 2.0, [2.0 ** -4, 2.0 ** -6], range(20))
    a = blowup_experiment(*args, workers=1)
    b = blowup_experiment(*args, workers=4)
    assert np.array_equal(a.C, b.C) and np.array_equal(a.K, b.K, equal_nan=True)
    assert np.all(a.C[:, 1] >= a.C[:, 0])
    assert [r["delta"] for r in a.rows()] == [2.0 ** -4, 2.0 ** -6]


@pytest.mark.parametrize("deltas, seeds", [([2.0 ** -6, 2.0 ** -4], range(20)),
                                           ([2.0 ** -4, 2.0 ** -4], range(20)),
                                           ([2.0 ** -4], range(5))])
def test_blowup_rejects(deltas, seeds):
    with pytest.raises(ArgumentError):
        blowup_experiment(Lebesgue(), 2.0, 2 ** 8, 2.0, deltas, seeds)


def test_path_csv():
    path = sample_path(StableProcessSpec(2.0, 4, 9))
    buf = io.StringIO()
    path.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,x" and len(lines) == 6 and lines[1] == "0,0"
