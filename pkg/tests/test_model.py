import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elapsed.errors import ConfigError, DomainError
from elapsed.model import (INHIBITORY, STRONGLY_EXCITATORY, WEAKLY_EXCITATORY, FiringModel,
                           builtin_model, classify_regime, psi_eval, psi_pieces, psi_prime)
from conftest import ex1_model, ex31_model, ex32_model, ex4_model


def test_catalog_bounds():
    m = builtin_model("affine", (1.0, 0.1))
    assert m.p_hi == pytest.approx(1 / 0.9)
    u = np.linspace(0, m.p_hi, 101)
    assert np.all(m.phi(u) >= m.p_lo) and np.all(m.phi(u) <= m.p_hi + 1e-12)


def test_double_gaussian_extrema():
    m = ex4_model()
    u = np.linspace(0, m.p_hi, 200001)
    assert m.p_hi == pytest.approx(np.max(m.phi(u)), abs=1e-9)
    assert m.p_lo <= np.min(m.phi(u)) + 1e-15


def test_rejects_bad_parameters():
    with pytest.raises(ConfigError):
        builtin_model("constant", (-1.0,))
    with pytest.raises(ConfigError):
        builtin_model("nope", ())
    with pytest.raises(ConfigError):
        builtin_model("sigmoid", (9,))
    with pytest.raises(ConfigError):
        FiringModel(lambda u: 2.0 + 0 * np.asarray(u), 1.0, 0.5, 1.0)


def test_psi_prime_matches_mpmath():
    mp.mp.dps = 30
    m = ex1_model()
    phi = lambda u: 1 / (1 + mp.e ** (-9 * u + 3.5))
    for u in (0.05, 0.2, 0.5386, 0.9):
        exact = mp.diff(lambda x: x / phi(x), u)
        assert psi_prime(m, u) == pytest.approx(float(exact), rel=1e-12, abs=1e-14)


def test_psi_prime_domain_and_fd():
    m = FiringModel(lambda u: 1 + 0.1 * np.asarray(u, dtype=float), 1.0, 1.0, 1 / 0.9)
    val, info = psi_prime(m, 0.0, info=True)
    assert info["finite_difference"]
    assert val == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(DomainError):
        psi_prime(m, -0.1)
    with pytest.raises(DomainError):
        psi_eval(m, -1e-3)


def test_kink_flag():
    m = ex31_model()
    _, info = psi_prime(m, 0.25 / 1.6, info=True)
    assert info["kink"]


@pytest.mark.parametrize("model,tag,n_changes", [
    (builtin_model("constant", (1.0,)), INHIBITORY, 0),
    (builtin_model("affine", (1.0, 0.1)), WEAKLY_EXCITATORY, 0),
    (builtin_model("sigmoid", (-2, 0.0)), INHIBITORY, 0),
    (ex1_model(), STRONGLY_EXCITATORY, 2),
    (ex32_model(), STRONGLY_EXCITATORY, 2),
])
def test_classify_regime(model, tag, n_changes):
    r = classify_regime(model)
    assert r.tag == tag
    assert len(r.sign_changes) == n_changes


def test_sigmoid_sign_changes_are_extrema_of_psi():
    m = ex1_model()
    for c in classify_regime(m).sign_changes:
        assert abs(psi_prime(m, c)) < 1e-8


def test_flat_band_is_its_own_piece():
    pieces = psi_pieces(ex31_model())
    assert [p.direction for p in pieces] == [1, 0, 1]
    assert pieces[1].lo == 0.15625 and pieces[1].hi == 0.625


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.5, 12), b=st.floats(-2, 6), u=st.floats(0.01, 0.99))
def test_psi_prime_agrees_with_difference_quotient(a, b, u):
    m = builtin_model("sigmoid", (a, b))
    h = 1e-6
    fd = (psi_eval(m, u + h) - psi_eval(m, u - h)) / (2 * h)
    assert psi_prime(m, u) == pytest.approx(fd, rel=1e-5, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.5, 12), b=st.floats(-2, 6))
def test_pieces_tile_domain(a, b):
    m = builtin_model("sigmoid", (a, b))
    pieces = psi_pieces(m)
    assert pieces[0].lo == 0.0 and pieces[-1].hi == m.p_hi
    for p, q in zip(pieces, pieces[1:]):
        assert p.hi == q.lo
        assert p.direction != q.direction
