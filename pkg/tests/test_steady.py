import math
import time

import mpmath as mp
import numpy as np
import pytest

from elapsed.densities import builtin_density
from elapsed.errors import ConfigError
from elapsed.grid import AgeGrid, init_density
from elapsed.model import builtin_model, psi_eval
from elapsed.steady import initial_activities, steady_profile, steady_states, tail_mass
from conftest import ex1_model, ex31_model, ex32_model, ex4_model


def _mp_roots(f, guesses, half=0.02):
    mp.mp.dps = 30
    return [float(mp.findroot(f, (g - half, g + half), solver="illinois")) for g in guesses]


def test_ex1_steady_states_match_high_precision():
    phi = lambda u: 1 / (1 + mp.e ** (-9 * u + 3.5))
    exact = _mp_roots(lambda u: 0.5 * u + u / phi(u) - 1, (0.04, 0.36, 0.61))
    got = steady_states(ex1_model())
    assert got.values == pytest.approx(exact, abs=1e-12)
    assert got.signs == [1, -1, 1]
    assert max(got.residuals) < 1e-12


def test_ex4_steady_states_match_high_precision():
    phi = lambda u: 8 * mp.e ** (-(u - 0.1) ** 2) + 8 * mp.e ** (-(u - 3) ** 2)
    exact = _mp_roots(lambda u: 0.2 * u + u / phi(u) - 1, (1.44, 2.07, 3.07))
    assert steady_states(ex4_model()).values == pytest.approx(exact, abs=1e-12)


def test_ex31_band_steady_state_exact():
    s = steady_states(ex31_model())
    assert s.values == [0.375]
    assert s.signs == [0]


def test_ex32_unique_decreasing():
    s = steady_states(ex32_model())
    assert len(s.values) == 1
    assert s.signs == [-1]


def test_inhibitory_unique():
    s = steady_states(builtin_model("constant", (1.0,), 1.0))
    assert s.values == pytest.approx([0.5])


def test_steady_states_fast():
    m = ex1_model()
    t = time.perf_counter()
    steady_states(m)
    assert time.perf_counter() - t < 0.1


def test_steady_profile_is_discrete_fixed_point(ex1):
    from elapsed.transport import step_pde
    N = steady_states(ex1).values[0]
    f = steady_profile(ex1, N)
    assert f.mass == pytest.approx(1.0, abs=1e-12)
    assert f.firing_mass == pytest.approx(psi_eval(ex1, N), abs=1e-12)
    g, N2 = step_pde(f, ex1, N)
    assert np.max(np.abs(g.values - f.values)) < 1e-12
    assert N2 == pytest.approx(N, abs=1e-12)


def test_steady_profile_rejects_non_root(ex1):
    with pytest.raises(ConfigError):
        steady_profile(ex1, 0.2)


def test_tail_mass_and_normalization(ex1):
    n0 = builtin_density("plateau_exp", [1.0])
    assert tail_mass(ex1, n0) == pytest.approx(0.75, abs=1e-12)
    with pytest.raises(ConfigError):
        tail_mass(ex1, lambda s: 2 * np.exp(-s))


def test_initial_branches_match_high_precision():
    """N0 = phi(N0) * int_sigma^inf n0 solved to 30 digits."""
    mp.mp.dps = 30
    phi = lambda u: 1 / (1 + mp.e ** (-9 * u + 3.5))
    got = initial_activities(ex1_model(), builtin_density("plateau_exp", [1.0])).roots
    exact = _mp_roots(lambda u: u - phi(u) * mp.mpf("0.75"), (0.03, 0.41, 0.71))
    assert list(got) == pytest.approx(exact, abs=1e-11)

    tail = mp.quad(lambda s: mp.mpf(2) / 3 * (1 + mp.cos(s)) * mp.e ** (-s), [0.2, mp.inf])
    phi4 = lambda u: 8 * mp.e ** (-(u - 0.1) ** 2) + 8 * mp.e ** (-(u - 3) ** 2)
    got = initial_activities(ex4_model(), builtin_density("cosine_exp", [1.0])).roots
    exact = _mp_roots(lambda u: u - phi4(u) * tail, (1.497, 1.817, 3.703))
    assert list(got) == pytest.approx(exact, abs=1e-10)


def test_initial_branches_from_grid_field(ex1):
    n0 = builtin_density("plateau_exp", [1.0])
    field = init_density(n0, AgeGrid.for_model(ex1))
    a = initial_activities(ex1, field).roots
    b = initial_activities(ex1, n0).roots
    assert np.max(np.abs(np.array(a) - b)) < 1e-3
