import numpy as np
import pytest

from elapsed.activity import BranchPolicy, ramp_history
from elapsed.errors import ConfigError
from elapsed.experiment import periodic_return
from elapsed.grid import AgeGrid, DensityField
from elapsed.model import builtin_model
from elapsed.periodic import construct_linear_band, construct_piecewise_constant, square_wave
from elapsed.reconstruct import (density_from_periodic_activity, initial_from_activity,
                                 verify_solution)
from elapsed.steady import steady_profile, steady_states
from elapsed.transport import run_pde


def test_constant_history_gives_steady_profile(ex1):
    for N in steady_states(ex1).values:
        f = initial_from_activity(ex1, np.full(201, N))
        assert np.max(np.abs(f.values - steady_profile(ex1, N).values)) < 1e-12


def test_steady_pair_verifies(ex1):
    N = steady_states(ex1).values[0]
    tr, snaps = run_pde(ex1, steady_profile(ex1, N), T=5 * ex1.sigma,
                        policy=BranchPolicy(seed=N), snapshot_every=100)
    rep = verify_solution(snaps, tr, ex1, 1e-10)
    assert rep["pass"] and rep["max_psi_residual"] <= 1e-10


def test_round_trip_reproduces_history(ex1):
    dt = ex1.sigma / 200
    hist = ramp_history(ex1, 0.02, dt)
    f = initial_from_activity(ex1, hist, dt)
    assert f.mass == pytest.approx(1.0, abs=1e-12)
    tr, snaps = run_pde(ex1, f, T=10 * ex1.sigma, policy=BranchPolicy(seed=float(hist[0])),
                        snapshot_every=200)
    assert np.max(np.abs(tr.values[:201] - hist)) < 10 * dt
    assert tr.window_residual(ex1.sigma).max() <= 10 * dt
    assert verify_solution(snaps, tr, ex1, 10 * dt)["pass"]


def test_piecewise_constant_history(ex31):
    p = construct_piecewise_constant(ex31, 0.15625, 0.625)
    f = initial_from_activity(ex31, p)
    K = f.grid.K
    # no psi variation across the jump: the head is N(sigma - s) itself
    head = f.values[:K]
    on_level = np.isclose(head, 0.15625) | np.isclose(head, 0.625)
    # only the cell straddling the jump holds a mix of the two levels
    assert np.count_nonzero(~on_level) <= 1
    assert f.values[0] == pytest.approx(0.625)
    assert f.values[K - 1] == pytest.approx(0.15625)
    assert f.mass == pytest.approx(1.0, abs=1e-12)


def test_history_rejections(ex31, ex1):
    with pytest.raises(ConfigError):
        initial_from_activity(ex31, np.full(201, 0.375) + 0.1)
    with pytest.raises(ConfigError):
        # increasing N on a decreasing piece of psi makes the density negative
        initial_from_activity(ex1, ramp_history(ex1, 0.3))
    with pytest.raises(ConfigError):
        initial_from_activity(ex1, np.full(50, 0.04))


def test_density_from_constant_profile(ex31):
    p = construct_linear_band(ex31, 0.15625, 0.625, 1.6, lambda t: 0 * np.asarray(t))
    g = AgeGrid.for_model(ex31, dt=p.dt)
    f = density_from_periodic_activity(ex31, p, g)
    assert f.values[0] == pytest.approx(0.375)
    assert f.mass == pytest.approx(1.0, abs=10 * g.dt)


def test_periodic_density_boundary_and_return(ex31):
    p = construct_piecewise_constant(ex31, 0.15625, 0.625)
    g = AgeGrid.for_model(ex31, dt=p.dt)
    f = density_from_periodic_activity(ex31, p, g)
    assert f.values[0] == pytest.approx(p(0.0))
    assert abs(f.mass - 1) <= 10 * g.dt
    rep = periodic_return(ex31, p, g)
    assert rep["pass"] and rep["return_error"] <= 20 * g.dt


def test_band_profile_return(ex31):
    p = construct_linear_band(ex31, 0.15625, 0.625, 1.6, square_wave(1.0), 0.2,
                              shape_breaks=[0.0, 0.5])
    rep = periodic_return(ex31, p)
    assert rep["pass"]


def test_unnormalized_field_fails(ex1):
    N = steady_states(ex1).values[0]
    tr, snaps = run_pde(ex1, steady_profile(ex1, N), T=ex1.sigma,
                        policy=BranchPolicy(seed=N))
    bad = [DensityField(s.grid, 1.1 * s.values, s.time) for s in snaps]
    rep = verify_solution(bad, tr, ex1, 1e-6)
    assert not rep["pass"] and rep["max_mass_residual"] == pytest.approx(0.1, abs=1e-9)


def test_misaligned_snapshot(ex1):
    N = steady_states(ex1).values[0]
    tr, snaps = run_pde(ex1, steady_profile(ex1, N), T=ex1.sigma, policy=BranchPolicy(seed=N))
    snaps[0].time = 0.5 * tr.dt
    with pytest.raises(ConfigError):
        verify_solution(snaps, tr, ex1, 1e-6)
