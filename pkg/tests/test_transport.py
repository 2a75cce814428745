import numpy as np
import pytest

from elapsed.activity import BranchPolicy, evolve_activity
from elapsed.densities import builtin_density
from elapsed.errors import ConfigError
from elapsed.grid import AgeGrid, DensityField, init_density, steps_per_delay
from elapsed.model import builtin_model, psi_eval
from elapsed.steady import steady_profile, steady_states
from elapsed.transport import boundary_activity, run_pde, step_pde


def test_steps_per_delay():
    assert steps_per_delay(0.5, 0.0025) == 200
    with pytest.raises(ConfigError):
        steps_per_delay(0.5, 0.003)
    with pytest.raises(ConfigError):
        steps_per_delay(0.5, 0.0)


def test_init_density_exact_tail(ex1, n0_ex1):
    g = AgeGrid.for_model(ex1)
    f = init_density(n0_ex1, g)
    assert f.mass == pytest.approx(1.0, abs=1e-14)
    assert f.firing_mass == pytest.approx(0.75, abs=2 * g.dt)
    assert f.norm_factor == pytest.approx(1.0, abs=1e-4)


def test_cfl_rejected():
    m = builtin_model("double_gaussian", (8, 0.1, 8, 3), 1.0)
    with pytest.raises(ConfigError):
        run_pde(m, builtin_density("exponential", [1.0]), AgeGrid(1.0, 0.2, 5.0))


def test_mass_conserved_to_round_off(ex1, n0_ex1):
    tr, snaps = run_pde(ex1, n0_ex1, T=10 * ex1.sigma, snapshot_every=200)
    assert tr.meta["max_mass_drift"] < 1e-12
    assert len(snaps) == 11
    for s in snaps:
        k = int(round(s.time / tr.dt))
        assert s.firing_mass == pytest.approx(psi_eval(ex1, tr.values[k]), abs=1e-12)


def test_exp_decay_variant_first_order(ex1, n0_ex1):
    drift = []
    for dt in (ex1.sigma / 100, ex1.sigma / 200):
        g = AgeGrid.for_model(ex1, dt=dt)
        tr, _ = run_pde(ex1, n0_ex1, g, T=5 * ex1.sigma, exp_decay=True)
        drift.append(tr.meta["max_mass_drift"])
    assert drift[0] / drift[1] == pytest.approx(2.0, rel=0.05)


def test_step_pde_matches_run(ex1, n0_ex1):
    g = AgeGrid.for_model(ex1)
    f = init_density(n0_ex1, g)
    tr, snaps = run_pde(ex1, f, g, T=3 * g.dt)
    N = tr.values[0]
    for k in range(3):
        f, N = step_pde(f, ex1, N)
        assert N == pytest.approx(tr.values[k + 1], abs=1e-14)
    assert np.allclose(f.values, snaps[-1].values, atol=1e-14)


def test_boundary_activity(ex1):
    N = steady_states(ex1).values[2]
    f = steady_profile(ex1, N)
    got, jumped = boundary_activity(f, ex1, N)
    assert got == pytest.approx(N, abs=1e-13) and not jumped


def test_pde_and_delay_routes_agree(ex1, n0_ex1):
    pol = BranchPolicy(seed=2)
    a, _ = run_pde(ex1, n0_ex1, T=10 * ex1.sigma, policy=pol)
    b = evolve_activity(ex1, n0_ex1, 10 * ex1.sigma, policy=pol)
    assert np.max(np.abs(a.values - b.values)) < 1e-6


def test_grid_sigma_mismatch(ex1, n0_ex1):
    with pytest.raises(ConfigError):
        run_pde(ex1, n0_ex1, AgeGrid(1.0, 0.005, 10.0))


def test_density_csv(ex1):
    f = steady_profile(ex1, steady_states(ex1).values[0])
    lines = f.to_csv().splitlines()
    assert lines[0] == "s,n" and len(lines) == f.grid.n_cells + 1
