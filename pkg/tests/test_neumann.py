import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chcontrol import Geometry, NotZeroMean
from chcontrol.grid import dot_H, mean_value, neg_laplacian
from chcontrol.neumann import apply_M, apply_N, dual_norm_sq


def zero_mean(g, f):
    return f - mean_value(g, f)


def test_apply_N_zero():
    g = Geometry("Strip2D", 8, 5)
    assert np.all(apply_N(g, np.zeros(g.n)) == 0)


def test_apply_N_periodic_eigenmode():
    errs = []
    for nx in (16, 32):
        s = Geometry("Strip2D", nx, 5, 1.0, 0.5)
        f = np.cos(2 * np.pi * s.coords[:, 0])
        errs.append(np.abs(apply_N(s, f) - f / (2 * np.pi) ** 2).max())
    assert errs[1] < 0.3 * errs[0]
    assert errs[1] < 1e-3 / (2 * np.pi) ** 2 * 10


@pytest.mark.parametrize("g", [Geometry("Interval1D", 40), Geometry("Strip2D", 12, 7, 1.0, 0.7)])
def test_apply_N_round_trip(g):
    rng = np.random.default_rng(0)
    f = zero_mean(g, rng.standard_normal(g.n))
    u = apply_N(g, neg_laplacian(g, f))
    assert np.abs(u - f).max() < 1e-9
    assert abs(mean_value(g, u)) < 1e-12
    v = zero_mean(g, rng.standard_normal(g.n))
    assert np.allclose(apply_N(g, 2.5 * v), 2.5 * apply_N(g, v), atol=1e-9)


def test_apply_N_rejects_nonzero_mean():
    g = Geometry("Interval1D", 9)
    with pytest.raises(NotZeroMean):
        apply_N(g, np.ones(g.n))
    with pytest.raises(NotZeroMean):
        dual_norm_sq(g, np.ones(g.n))


def test_dual_norm_eigenmode():
    s = Geometry("Strip2D", 32, 5, 1.0, 0.5)
    a = 0.7
    f = a * np.cos(2 * np.pi * s.coords[:, 0])
    expected = a ** 2 * s.volume / 2 / (2 * np.pi) ** 2
    assert dual_norm_sq(s, f) == pytest.approx(expected, rel=2e-2)
    assert dual_norm_sq(s, np.zeros(s.n)) == 0.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_N_self_adjoint_and_positive(seed):
    g = Geometry("Strip2D", 10, 6, 1.0, 0.5)
    rng = np.random.default_rng(seed)
    u, v = (zero_mean(g, x) for x in rng.standard_normal((2, g.n)))
    a, b = dot_H(g, u, apply_N(g, v)), dot_H(g, v, apply_N(g, u))
    scale = np.sqrt(dot_H(g, u, u) * dot_H(g, v, v))
    assert abs(a - b) <= 1e-10 * scale
    assert dual_norm_sq(g, u) > 0


def test_apply_M_examples():
    g = Geometry("Interval1D", 9)
    nt, T = 10, 2.0
    dt = T / nt
    z = np.zeros((nt + 1, g.n))
    for k in range(nt + 1):
        assert apply_M(g, z, z, z, 0.0, k, dt) == 0.0
    ones = np.ones_like(z)
    times = np.linspace(0, T, nt + 1)
    for k in range(nt + 1):
        assert apply_M(g, z, ones * 5.0, ones, 0.0, k, dt) == pytest.approx(T - times[k], abs=1e-13)
    assert apply_M(g, ones, ones, ones, 2.0, nt, dt) == 2.0


def test_apply_M_grid_mismatch():
    g = Geometry("Interval1D", 9)
    with pytest.raises(ValueError):
        apply_M(g, np.zeros((3, g.n)), np.zeros((4, g.n)), np.zeros((3, g.n)), 0.0, 0, 0.1)
