import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import brute_constant, lebesgue_perfectness
from regdim import (ArgumentError, EmpiricalMeasure, Lebesgue, ScaleGrid, cantor_measure,
                    decaying_exponent, doubling_constant, doubling_profile, heinonen_check,
                    heinonen_lower_bound, lower_regdim_pair_scan, lower_regdim_theta_scan,
                    pushforward, scale_restricted_doubling, scale_restricted_perfectness,
                    space_perfectness_constant, uniform_perfectness_constant,
                    upper_regdim_pair_scan, upper_regdim_theta_scan)
from regdim.estimators import ls_slope
from regdim.qsmaps import PowerMap

LOG43 = np.log(4) / np.log(3)
LOG4_3 = np.log(4 / 3) / np.log(3)
LOG23 = np.log(2) / np.log(3)
TERNARY = ScaleGrid(r_min=3.0 ** -10, r_max=1.0, factor=3.0, net_mesh=3.0 ** -12)


@pytest.fixture(scope="module")
def measures():
    return {
        "lebesgue": Lebesgue(),
        "cantor14": cantor_measure(0.25),
        "cantor12": cantor_measure(0.5),
        "square": pushforward(Lebesgue(), PowerMap(2.0)),
    }


@pytest.fixture(scope="module")
def estimates(measures):
    out = {}
    for name, mu in measures.items():
        out[name] = {
            "upper_pair": upper_regdim_pair_scan(mu),
            "lower_pair": lower_regdim_pair_scan(mu),
            "upper_theta": upper_regdim_theta_scan(mu),
            "lower_theta": lower_regdim_theta_scan(mu),
            "decay": decaying_exponent(mu),
        }
    return out


def test_doubling_constant_lebesgue():
    c, w = doubling_constant(Lebesgue(), 2.0)
    assert c == pytest.approx(2.0, rel=1e-9)
    assert w.R / w.r == pytest.approx(2.0)


def test_single_atom_constants():
    atom = EmpiricalMeasure([0.4])
    assert doubling_constant(atom, 10.0)[0] == 1.0
    assert uniform_perfectness_constant(atom, 2.0)[0] == 1.0
    for f in (upper_regdim_pair_scan, lower_regdim_pair_scan, upper_regdim_theta_scan,
              lower_regdim_theta_scan, decaying_exponent):
        assert f(atom).value == 0.0


def test_cantor_doubling_pinned_by_brute_force():
    # Brute force over all depth-12 cylinder endpoints and radii 3^-n.
    pinned = brute_constant([(1 / 3, 0, 0.5), (1 / 3, 2 / 3, 0.5)], 3.0, 12, 3.0 ** -np.arange(11))
    assert pinned == pytest.approx(2.0)
    c, _ = doubling_constant(cantor_measure(0.5), 3.0, TERNARY)
    assert c == pytest.approx(pinned, abs=1e-9)
    c_default, _ = doubling_constant(cantor_measure(0.5), 3.0)
    assert 2.0 <= c_default <= 4.0


def test_cantor_doubling_witness():
    mu = cantor_measure(0.5)
    assert mu.ball_mass(1 / 3, 2 / 3) / mu.ball_mass(1 / 3, 2 / 9) == pytest.approx(4.0)


def test_lebesgue_perfectness_analytic():
    grid = ScaleGrid.default(Lebesgue())
    radii = grid.radii()
    radii = radii[radii < 1 - 1e-12]
    k, _ = uniform_perfectness_constant(Lebesgue(), 2.0, grid)
    assert k == pytest.approx(lebesgue_perfectness(2.0, radii), rel=1e-12)
    assert k == pytest.approx(2 ** 0.25, rel=1e-12)
    assert 1 < k <= 2


def test_cantor_perfectness_pinned_by_brute_force():
    pinned = brute_constant([(1 / 3, 0, 0.25), (1 / 3, 2 / 3, 0.75)], 3.0, 12,
                            3.0 ** -np.arange(1, 11), upper=False)
    assert pinned == pytest.approx(4 / 3)
    k, _ = uniform_perfectness_constant(cantor_measure(0.25), 3.0, TERNARY)
    assert k == pytest.approx(pinned, abs=1e-9)
    assert np.log(k) / np.log(3) <= LOG4_3 + 1e-9


@pytest.mark.parametrize("name, upper, lower", [
    ("lebesgue", 1.0, 1.0), ("cantor14", LOG43, LOG4_3), ("cantor12", LOG23, LOG23),
    ("square", 1.0, 0.5)])
def test_known_dimensions(estimates, name, upper, lower):
    e = estimates[name]
    for key in ("upper_pair", "upper_theta"):
        assert e[key].value == pytest.approx(upper, abs=0.05), key
    for key in ("lower_pair", "lower_theta", "decay"):
        assert e[key].value == pytest.approx(lower, abs=0.05), key


def test_routes_agree(estimates):
    for name, e in estimates.items():
        assert abs(e["upper_pair"].value - e["upper_theta"].value) <= 0.05, name
        assert abs(e["lower_pair"].value - e["lower_theta"].value) <= 0.05, name


def test_decay_matches_lower_pair_bitwise(estimates):
    for name, e in estimates.items():
        assert e["decay"].value == e["lower_pair"].value, name
        assert e["decay"].witness == e["lower_pair"].witness, name


def test_lower_not_above_upper(estimates):
    for e in estimates.values():
        assert e["lower_pair"].value <= e["upper_pair"].value


def test_witnesses_requery(measures, estimates):
    for name, e in estimates.items():
        for est in e.values():
            w = est.witness
            assert w.r < w.R
            assert w.ratio >= 1 and w.exponent >= 0
            assert w.requery(measures[name]) == pytest.approx(w.ratio, rel=1e-9), (name, est.method)


def test_profiles_are_nested(measures):
    for mu in measures.values():
        for kind in ("upper", "lower"):
            prof = doubling_profile(mu, kind=kind)
            thetas = [e.theta for e in prof.entries]
            assert np.all(np.diff(thetas) > 0)
            assert all(e.constant >= 1 for e in prof.entries)


def test_net_refinement_monotone():
    mu = cantor_measure(0.25)
    coarse = ScaleGrid(r_min=2.0 ** -10, r_max=1.0, net_mesh=2.0 ** -8)
    fine = ScaleGrid(r_min=2.0 ** -10, r_max=1.0, net_mesh=2.0 ** -11)
    for theta in (2.0, 5.0):
        assert doubling_constant(mu, theta, fine)[0] >= doubling_constant(mu, theta, coarse)[0] * (1 - 1e-9)
        k_f = uniform_perfectness_constant(mu, theta, fine)[0]
        assert k_f <= uniform_perfectness_constant(mu, theta, coarse)[0] * (1 + 1e-9)


def test_radius_refinement_monotone():
    mu = cantor_measure(0.5)
    coarse = ScaleGrid(r_min=2.0 ** -10, r_max=1.0, factor=2.0)
    fine = ScaleGrid(r_min=2.0 ** -10, r_max=1.0, factor=2.0 ** 0.5)
    assert doubling_constant(mu, 3.0, fine)[0] >= doubling_constant(mu, 3.0, coarse)[0] * (1 - 1e-9)
    assert uniform_perfectness_constant(mu, 3.0, fine)[0] <= uniform_perfectness_constant(mu, 3.0, coarse)[0] * (1 + 1e-9)


def test_scale_restricted():
    for d in (2.0 ** -4, 2.0 ** -9):
        assert scale_restricted_doubling(Lebesgue(), 2.0, d)[0] == pytest.approx(2.0)
    mu = cantor_measure(0.25)
    grid = ScaleGrid.default(mu)
    top = scale_restricted_doubling(mu, 2.0, grid.r_max / 2, grid)
    assert top[1].R == pytest.approx(grid.r_max, rel=1e-12)
    values = [scale_restricted_doubling(mu, 2.0, d, grid)[0] for d in 2.0 ** -np.arange(2, 12)]
    assert np.all(np.diff(values) >= 0)
    kvals = [scale_restricted_perfectness(mu, 2.0, d, grid)[0] for d in 2.0 ** -np.arange(2, 12)]
    assert np.all(np.diff(kvals) <= 0)
    with pytest.raises(ArgumentError):
        scale_restricted_doubling(mu, 2.0, 2.0, grid)


def test_cap_sentinel():
    e = upper_regdim_pair_scan(Lebesgue(), cap=0.5)
    assert e.capped and e.value == 0.5


def test_grid_validation():
    with pytest.raises(ArgumentError):
        ScaleGrid(r_min=1.0, r_max=0.5)
    with pytest.raises(ArgumentError):
        ScaleGrid(r_min=0.1, r_max=1.0, factor=1.0)
    with pytest.raises(ArgumentError):
        ScaleGrid(r_min=0.1, r_max=1.0, theta_min=1.0)
    with pytest.raises(ArgumentError):
        upper_regdim_pair_scan(Lebesgue(), ScaleGrid(r_min=0.1, r_max=2.0))
    with pytest.raises(ArgumentError):
        upper_regdim_pair_scan(Lebesgue(), ScaleGrid(r_min=0.5, r_max=1.0, theta_min=4.0))
    with pytest.raises(ArgumentError):
        doubling_constant(Lebesgue(), 1.0)


def test_workers_do_not_change_results():
    mu = cantor_measure(0.25)
    a = upper_regdim_theta_scan(mu, workers=1)
    b = upper_regdim_theta_scan(mu, workers=3)
    assert a == b


@pytest.mark.parametrize("K, C, expected", [(2, 16, np.log(16 / 15) / np.log(8)),
                                            (3, 2, np.log(2) / np.log(12))])
def test_heinonen_examples(K, C, expected):
    assert heinonen_lower_bound(K, C) == pytest.approx(expected, rel=1e-12)


def test_heinonen_examples_numeric():
    # Reference values truncated to five places.
    assert heinonen_lower_bound(2, 16) == pytest.approx(0.03103, abs=1e-5)
    assert heinonen_lower_bound(3, 2) == pytest.approx(0.27894, abs=1e-5)
    assert heinonen_lower_bound(2, np.inf) == 0.0
    assert heinonen_lower_bound(2, 1e12) < 1e-12


@pytest.mark.parametrize("K, C", [(1.0, 2.0), (2.0, 1.0), (0.5, 5.0)])
def test_heinonen_rejects(K, C):
    with pytest.raises(ArgumentError):
        heinonen_lower_bound(K, C)


@given(K=st.floats(1.01, 100), C=st.floats(1.01, 1e6), f=st.floats(1.0, 10.0))
def test_heinonen_monotone(K, C, f):
    b = heinonen_lower_bound(K, C)
    assert b >= 0
    assert heinonen_lower_bound(K, C * f) <= b
    assert heinonen_lower_bound(K * f, C) <= b


def test_heinonen_check(measures, estimates):
    for name, mu in measures.items():
        chk = heinonen_check(mu, lower=estimates[name]["lower_pair"])
        assert chk.K_space > 1 and chk.C_8K > 1
        assert chk.passed, name


def test_space_perfectness_lebesgue():
    k, w = space_perfectness_constant(Lebesgue())
    # Annuli with r = diameter around the midpoint need K > 2.
    assert 2 < k <= 2 ** (17 / 16) + 1e-12
    assert w["required"] == pytest.approx(2.0, rel=1e-9)


def test_ls_slope_odd():
    rng = np.random.default_rng(0)
    x, y = rng.random(17), rng.random(17)
    assert ls_slope(-x, -y) == ls_slope(x, y)
    assert ls_slope([0, 1, 2], [1, 3, 5]) == pytest.approx(2.0)
