import numpy as np
import pytest

from elapsed.errors import ConfigError, SolverError
from elapsed.model import builtin_model, psi_eval, psi_pieces
from elapsed.periodic import (anchor_pair, calibrate_mass, construct_linear_band,
                              construct_piecewise_constant, construct_two_sigma,
                              psi_level_pairs, square_wave)

T_CHECK = np.linspace(-3.0, 3.0, 1000)


def two_sigma_model(sigma=0.1):
    return builtin_model("sigmoid", (9, 3.5), sigma)


def anchors(m, level):
    return anchor_pair(m, level, psi_pieces(m)[1].hi)


def test_level_pairs_three_roots():
    m = builtin_model("sigmoid", (9, 3.5), 1.0)
    lp = psi_level_pairs(m, 0.9)
    assert len(lp.roots) == 3 and len(lp.pairs) == 3
    for r in lp.roots:
        assert psi_eval(m, r) == pytest.approx(0.9, abs=1e-12)


def test_level_pairs_band(ex31):
    lp = psi_level_pairs(ex31, 0.625)
    assert lp.band == (0.15625, 0.625) and lp.pairs == ()


def test_level_pairs_injective_psi():
    with pytest.raises(ConfigError):
        psi_level_pairs(builtin_model("constant", (1.0,)), 0.3)


def test_piecewise_constant_ex31(ex31):
    p = construct_piecewise_constant(ex31, 0.15625, 0.625)
    assert p.meta["alpha"] == pytest.approx(8 / 15, abs=1e-12)
    assert p.residual <= 1e-6
    assert p.mass_residual(ex31, T_CHECK).max() <= 1e-12
    assert p.integral(0.0, 1.0) == pytest.approx(1 - 0.625, abs=1e-14)
    with pytest.raises(ConfigError):
        construct_piecewise_constant(ex31, 0.3, 0.3)


def test_piecewise_constant_sigmoid_alpha():
    m = builtin_model("sigmoid", (9, 3.5), 1.0)
    lp = psi_level_pairs(m, 0.9)
    N1, N2 = lp.roots[0], lp.roots[-1]
    p = construct_piecewise_constant(m, N1, N2)
    assert p.meta["alpha"] == pytest.approx((N2 - 0.1) / (N2 - N1), abs=1e-12)
    assert p.mass_residual(m, T_CHECK).max() <= 1e-6


def test_linear_band(ex31):
    p = construct_linear_band(ex31, 0.15625, 0.625, 1.6, square_wave(1.0), 0.2,
                              shape_breaks=[0.0, 0.5])
    assert p.meta["mean"] == pytest.approx(0.375)
    assert p.samples.min() == pytest.approx(0.175) and p.samples.max() == pytest.approx(0.575)
    assert p.mass_residual(ex31, T_CHECK).max() <= 1e-6
    flat = construct_linear_band(ex31, 0.15625, 0.625, 1.6, lambda t: 0 * np.asarray(t))
    assert np.allclose(flat.samples, 0.375)
    with pytest.raises(ConfigError):
        construct_linear_band(ex31, 0.15625, 0.625, 1.0, square_wave(1.0))
    with pytest.raises(ConfigError):
        construct_linear_band(ex31, 0.15625, 0.625, 1.6, square_wave(1.0), 0.5)
    with pytest.raises(ConfigError):
        construct_linear_band(ex31, 0.15625, 0.625, 1.6, lambda t: 1 + 0 * np.asarray(t))


def test_two_sigma_fixed_point():
    m = two_sigma_model()
    nm, npl = anchors(m, 0.75)
    prof, q = construct_two_sigma(m, npl, nm)
    assert prof.meta["iterations"] <= 50
    assert prof.meta["distances"][-1] <= 1e-12
    assert prof.meta["image_distance"] <= 2e-12
    assert prof.meta["psi_gap_at_sigma"] <= 10 * prof.dt
    K = int(round(m.sigma / prof.dt))
    first, second = prof.samples[:K], prof.samples[K:]
    assert np.all(np.diff(first) < 0) and np.all(np.diff(second) < 0)
    assert prof.samples[0] == pytest.approx(npl)
    assert prof(2 * m.sigma - 1e-12) == pytest.approx(nm, abs=1e-9)
    # Q is psi(N+) plus the integral over the second half period
    assert q.Q_value == pytest.approx(q.level + prof.integral(m.sigma, 2 * m.sigma), abs=1e-12)
    assert prof.mass_residual(m, T_CHECK).max() <= 10 * prof.dt


def test_contraction_ratio_drops_with_sigma():
    ratios = []
    for sigma in (0.1, 0.05):
        m = two_sigma_model(sigma)
        nm, npl = anchors(m, 0.75)
        ratios.append(construct_two_sigma(m, npl, nm)[0].meta["contraction_ratio"])
    assert ratios[1] < ratios[0] < 0.5


def test_two_sigma_fails_for_large_sigma():
    m = two_sigma_model(1.0)
    nm, npl = anchors(m, 0.75)
    with pytest.raises(SolverError):
        construct_two_sigma(m, npl, nm, max_iter=50)


def test_two_sigma_precondition():
    m = two_sigma_model()
    nm, npl = anchors(m, 0.75)
    with pytest.raises(ConfigError):
        construct_two_sigma(m, npl, nm + 0.01)


def test_calibrate_mass():
    m = two_sigma_model()
    lo, hi = anchors(m, 0.75), anchors(m, 0.99)
    prof = calibrate_mass(m, (lo, hi))
    assert abs(prof.mass - 1) <= 1e-6
    assert prof.mass_residual(m, T_CHECK, target=1.0).max() <= 10 * prof.dt
    again = calibrate_mass(m, ((prof.meta["N_minus"], prof.meta["N_plus"]), hi))
    assert again.meta["calibration_iterations"] == 0
    with pytest.raises(ConfigError):
        calibrate_mass(m, (lo, anchors(m, 0.8)))
