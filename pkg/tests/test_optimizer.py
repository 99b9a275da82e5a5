import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chcontrol import (ControlBox, ControlProblem, CostSpec, Geometry, OptimizerOptions,
                       SolverConfig, check_vi, evaluate_cost, project_box,
                       projected_gradient_descent, reduced_gradient, solve_state)
from chcontrol.control import derivative_norm, dot_sigma, norm_sigma
from chcontrol.verify import quadrature_cost

from conftest import make_pair, smooth_y0, wave_control


def problem(geom, cost, nt=8, T=0.2, box=None, kind="RegularQuartic", y0=None):
    cfg = SolverConfig(T=T, nt=nt, newton_tol=1e-13)
    y0 = smooth_y0(geom) if y0 is None else y0
    return ControlProblem(geom, y0, make_pair(kind), cfg, cost, box or ControlBox())


def test_cost_pure_control_value(line):
    cfg = SolverConfig(T=1.0, nt=4)
    tr = solve_state(line, np.zeros(line.n), 1.0, make_pair("RegularQuartic"), cfg)
    assert evaluate_cost(tr, 1.0, CostSpec(b0=2.0)) == pytest.approx(2.0, rel=1e-14)
    assert evaluate_cost(tr, 1.0, CostSpec()) == 0.0


def test_cost_matches_quadrature_oracle(geom, rng):
    zQ = rng.standard_normal(geom.n)
    cost = CostSpec(1.5, 2.0, 0.5, 3.0, 0.25, zQ, 0.1, -0.2, 0.3)
    prob = problem(geom, cost)
    u = wave_control(geom, prob.config)
    J, tr = prob.reduced_cost(u)
    assert J == pytest.approx(quadrature_cost(prob, tr, u), rel=1e-12)


def test_cost_rejects_bad_weights_and_targets(line):
    with pytest.raises(ValueError):
        CostSpec(bQ=-1.0)
    from chcontrol import ConfigMismatch
    with pytest.raises(ConfigMismatch):
        CostSpec(bQ=1.0, zQ=np.zeros(line.n + 1)).targets(line, 3)


def test_gradient_of_pure_control_cost(strip, rng):
    prob = problem(strip, CostSpec(b0=1.7))
    u = rng.standard_normal(prob.shape)
    gr = reduced_gradient(prob, u)
    assert np.array_equal(gr.gradient, 1.7 * u)
    assert np.all(gr.adjoint.q == 0)


def test_gradient_matches_finite_differences(geom, rng):
    prob = problem(geom, CostSpec(bQ=2.0, bSigma=1.0, bOmega=1.0, b0=0.1, zQ=0.3, zSigma=-0.2))
    u = wave_control(geom, prob.config)
    h = rng.standard_normal(prob.shape)
    g = reduced_gradient(prob, u).gradient
    eps = 1e-5
    fd = (prob.reduced_cost(u + eps * h)[0] - prob.reduced_cost(u - eps * h)[0]) / (2 * eps)
    assert dot_sigma(geom, prob.dt, g, h) == pytest.approx(fd, rel=1e-6)


def test_gradient_scales_with_cost(strip):
    cost = CostSpec(bQ=1.0, bSigma=0.5, b0=0.2, zQ=0.1)
    prob = problem(strip, cost)
    u = wave_control(strip, prob.config)
    g1 = reduced_gradient(prob, u).gradient
    g2 = reduced_gradient(prob.with_cost(cost.scaled(2.0)), u).gradient
    assert np.abs(g2 - 2 * g1).max() <= 1e-12 * np.abs(g1).max()


def test_project_box_clamps_and_is_idempotent():
    box = ControlBox(-1.0, 1.0)
    p = project_box(np.array([[10.0, -3.0, 0.5]]), box)
    assert np.array_equal(p.values, [[1.0, -1.0, 0.5]])
    assert np.array_equal(project_box(p.values, box).values, p.values)


def test_project_box_nonexpansive(line, rng):
    box = ControlBox(-0.5, 0.7)
    for _ in range(50):
        a, b = rng.standard_normal((2, 5, line.nb)) * 2
        pa, pb = project_box(a, box).values, project_box(b, box).values
        assert norm_sigma(line, 0.1, pa - pb) <= norm_sigma(line, 0.1, a - b) + 1e-14


def test_project_box_budget_repair(strip, rng):
    box = ControlBox(-1.0, 1.0, M0=0.5)
    dt = 0.05
    raw = rng.uniform(-1, 1, (11, strip.nb))
    assert derivative_norm(strip, dt, raw) > box.M0
    p = project_box(raw, box, strip, dt)
    assert p.budget_active and p.feasible
    assert derivative_norm(strip, dt, p.values) <= box.M0 * (1 + 1e-9)
    assert np.all(np.abs(p.values) <= 1.0)
    q = project_box(p.values, box, strip, dt)
    assert not q.budget_active and np.array_equal(q.values, p.values)


def test_descent_stops_at_stationary_start(line):
    prob = problem(line, CostSpec(b0=1.0))
    rep = projected_gradient_descent(prob, 0.0)
    assert rep.converged and len(rep.iterates) == 1 and rep.stationarity == 0.0


def test_pure_control_converges_to_projection(strip):
    prob = problem(strip, CostSpec(b0=1.0), box=ControlBox(0.2, 1.0))
    rep = projected_gradient_descent(prob, 0.5)
    assert rep.converged
    assert np.allclose(rep.control.values, 0.2, atol=1e-12)


def test_tracking_descent_is_monotone(strip):
    cost = CostSpec(bQ=10.0, bSigma=20.0, b0=1.0, zQ=0.3, zSigma=-0.2)
    prob = problem(strip, cost, box=ControlBox(-0.3, 0.3))
    rep = projected_gradient_descent(prob, 0.0, OptimizerOptions(stat_tol=1e-9, max_iter=60))
    assert rep.converged
    # non-increasing up to the rounding level of J
    assert np.all(np.diff(rep.costs) <= 64 * np.finfo(float).eps * rep.costs[0])
    assert rep.costs[-1] < rep.costs[0]
    cert = check_vi(rep.control, rep.gradient, prob.box, strip, prob.dt, b0=1.0)
    assert cert.passed


def test_argmin_invariant_under_cost_scaling(line):
    cost = CostSpec(bQ=5.0, bSigma=5.0, b0=1.0, zQ=0.2)
    prob = problem(line, cost, box=ControlBox(-0.3, 0.3))
    a = projected_gradient_descent(prob, 0.0, OptimizerOptions(max_iter=15))
    b = projected_gradient_descent(prob.with_cost(cost.scaled(4.0)), 0.0,
                                   OptimizerOptions(step0=0.25, max_iter=15))
    assert np.abs(a.control.values - b.control.values).max() <= 1e-12
    assert np.allclose(b.costs, 4 * a.costs, rtol=1e-12)


def test_vi_zero_gradient_passes(line):
    cert = check_vi(np.zeros((5, line.nb)), np.zeros((5, line.nb)), ControlBox(), line, 0.1)
    assert cert.passed and cert.min_value == 0.0


def test_vi_sign_pattern(strip, rng):
    box = ControlBox(-1.0, 1.0)
    g = rng.standard_normal((6, strip.nb))
    u = np.where(g > 0, -1.0, 1.0)  # KKT: lower bound where g > 0
    assert check_vi(u, g, box, strip, 0.1, n_probes=20).passed
    assert not check_vi(-u, g, box, strip, 0.1, n_probes=20).passed


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_is_feasible(seed):
    g = Geometry("Interval1D", 9)
    rng = np.random.default_rng(seed)
    box = ControlBox(-0.4, 0.6, M0=rng.uniform(0.1, 5))
    p = project_box(rng.standard_normal((7, g.nb)) * 3, box, g, 0.1)
    assert p.feasible
    assert np.all((p.values >= -0.4) & (p.values <= 0.6))
    assert derivative_norm(g, 0.1, p.values) <= box.M0 * (1 + 1e-9)
