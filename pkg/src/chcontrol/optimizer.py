"""
Reduced cost, reduced gradient and projected-gradient minimization over the
admissible control set.

The gradient is the L2(Sigma) representative ``g = q_G + b0 u`` of the
derivative of the discrete reduced cost, with ``q_G`` the boundary trace of
the transposed adjoint.  Level 0 of a control never influences the state and
has zero quadrature weight, so it drops out of every pairing; its gradient
entry is filled with the value of the extended adjoint so that iterates stay
smooth in time.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .adjoint import build_adjoint_data, solve_adjoint_transpose
from .control import (ControlBox, ControlSignal, as_control_values, derivative_norm,
                      dot_sigma, norm_sigma)
from .cost import CostSpec, evaluate_cost
from .errors import LineSearchStalled
from .sensitivity import linearize
from .state import solve_state

__all__ = [
    "CostSpec", "ControlProblem", "evaluate_cost", "reduced_gradient", "project_box",
    "OptimizerOptions", "OptimizationReport", "projected_gradient_descent",
    "VICertificate", "check_vi",
]


@dataclass
class ControlProblem:
    """Everything needed to evaluate the reduced cost ``u -> J(S(u), u)``."""

    geom: object
    y0: np.ndarray
    pair: object
    config: object
    cost: CostSpec
    box: ControlBox = field(default_factory=ControlBox)

    @property
    def dt(self):
        return self.config.dt

    @property
    def shape(self):
        return (self.config.nt + 1, self.geom.nb)

    def values(self, u):
        return as_control_values(u, self.geom, self.config.nt)

    def solve(self, u):
        return solve_state(self.geom, self.y0, self.values(u), self.pair, self.config)

    def reduced_cost(self, u):
        traj = self.solve(u)
        return evaluate_cost(traj, self.values(u), self.cost), traj

    def with_cost(self, cost):
        return ControlProblem(self.geom, self.y0, self.pair, self.config, cost, self.box)


@dataclass
class GradientResult:
    cost: float
    gradient: np.ndarray
    trajectory: object
    adjoint: object


def reduced_gradient(problem, u, traj=None):
    """Cost and L2(Sigma) gradient at ``u`` (one state and one adjoint solve)."""
    uv = problem.values(u)
    if traj is None:
        traj = problem.solve(uv)
    J = evaluate_cost(traj, uv, problem.cost)
    data = build_adjoint_data(traj, problem.cost)
    adj = solve_adjoint_transpose(linearize(traj), data)
    g = adj.q_gamma + problem.cost.b0 * uv
    return GradientResult(J, g, traj, adj)


def project_box(u_raw, box, geom=None, dt=None):
    """Clamp to the box, then repair the derivative budget if it is exceeded.

    The repair rescales the time fluctuation ``u - mean_t(u)`` radially until
    the budget holds and clamps once more.  ``geom`` and ``dt`` are needed
    only for the budget; without them the result is the plain clamp.
    """
    u = box.clamp(u_raw)
    sig = ControlSignal(u, box)
    if geom is None or dt is None:
        return sig
    B = derivative_norm(geom, dt, u)
    if B <= box.M0:
        return sig
    mean = u.mean(axis=0, keepdims=True)
    u = box.clamp(mean + (box.M0 / B) * (u - mean))
    sig = ControlSignal(u, box, budget_active=True)
    sig.feasible = derivative_norm(geom, dt, u) <= box.M0 * (1 + 1e-9)
    return sig


@dataclass
class OptimizerOptions:
    step0: float = 1.0
    armijo_c: float = 1e-4
    shrink: float = 0.5
    max_iter: int = 200
    stat_tol: float = None
    max_backtracks: int = 40


@dataclass
class OptimizationReport:
    iterates: list
    control: ControlSignal
    trajectory: object
    gradient: np.ndarray
    adjoint: object
    stat_tol: float
    converged: bool
    stalled: bool = False
    certificate: object = None
    message: str = ""

    @property
    def costs(self):
        return np.array([it["cost"] for it in self.iterates])

    @property
    def stationarity(self):
        return self.iterates[-1]["stationarity"]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iter", "cost", "stationarity", "step", "budget_active"])
            for it in self.iterates:
                wr.writerow([it["iter"], repr(it["cost"]), repr(it["stationarity"]),
                             repr(it["step"]), int(it["budget_active"])])


_NOISE = 64 * np.finfo(float).eps


def _stationarity(problem, u, g, step):
    p = project_box(u - step * g, problem.box, problem.geom, problem.dt).values
    return norm_sigma(problem.geom, problem.dt, u - p)


def projected_gradient_descent(problem, u0, opt=None):
    """Minimize the reduced cost by projected gradient steps with Armijo backtracking.

    Iterates ``u <- P(u - s g(u))`` where ``s`` starts at ``step0`` and is
    shrunk until ``J(trial) <= J(u) + c <g, trial - u>``.  When both the
    predicted decrease and the change of ``J`` at the full step are below the
    rounding level of ``J``, the full step is taken unchecked.  Stops when
    ``||u - P(u - step0 g)|| <= stat_tol`` or after ``max_iter`` iterations.
    A failed line search ends the run with ``stalled`` set and the current
    (best) iterate returned.
    """
    opt = opt or OptimizerOptions()
    geom, dt, box = problem.geom, problem.dt, problem.box
    u = project_box(problem.values(u0), box, geom, dt)
    gr = reduced_gradient(problem, u.values)
    stat = _stationarity(problem, u.values, gr.gradient, opt.step0)
    stat_tol = opt.stat_tol if opt.stat_tol is not None else 1e-8 * (stat + 1.0)
    iterates = [dict(iter=0, cost=gr.cost, stationarity=stat, step=0.0,
                     budget_active=u.budget_active)]
    converged, stalled, msg = stat <= stat_tol, False, ""
    k = 0
    while not converged and k < opt.max_iter:
        k += 1
        s = opt.step0
        for _ in range(opt.max_backtracks + 1):
            trial = project_box(u.values - s * gr.gradient, box, geom, dt)
            decrease = dot_sigma(geom, dt, gr.gradient, trial.values - u.values)
            J_t, traj_t = problem.reduced_cost(trial.values)
            # a step that only ties the cost is rounding noise, not descent
            if J_t <= gr.cost + opt.armijo_c * decrease and J_t < gr.cost:
                break
            # below the resolution of J the test is meaningless; take the full step
            noise = _NOISE * abs(gr.cost)
            if s == opt.step0 and -decrease <= noise and J_t <= gr.cost + noise:
                break
            s *= opt.shrink
        else:
            stalled = True
            msg = str(LineSearchStalled(f"no sufficient decrease at iteration {k}"))
            break
        if not trial.feasible:
            stalled = True
            msg = f"budget repair failed at iteration {k}"
            break
        u = trial
        gr = reduced_gradient(problem, u.values, traj=traj_t)
        stat = _stationarity(problem, u.values, gr.gradient, opt.step0)
        iterates.append(dict(iter=k, cost=gr.cost, stationarity=stat, step=s,
                             budget_active=u.budget_active))
        converged = stat <= stat_tol
    if not converged and not stalled:
        msg = f"not converged after {opt.max_iter} iterations"
    return OptimizationReport(iterates, u, gr.trajectory, gr.gradient, gr.adjoint,
                              stat_tol, converged, stalled, message=msg)


@dataclass
class VICertificate:
    min_value: float
    tol: float
    n_probes: int
    projection_error: float = None
    passed: bool = False

    def lines(self):
        out = [f"VI probes: {self.n_probes}, min <g, v - u> = {self.min_value:.3e} "
               f"(tolerance {-self.tol:.3e})"]
        if self.projection_error is not None:
            out.append(f"projection residual ||u - P(-q_G/b0)|| / ||u|| = {self.projection_error:.3e}")
        out.append("PASS" if self.passed else "FAIL")
        return out


def _random_feasible(rng, geom, box, shape, dt, modes=4):
    """Smooth random control inside the box (random low time/space modes)."""
    nt1, nb = shape
    t = np.linspace(0.0, 1.0, nt1)[:, None]
    x = np.arange(nb)[None, :] / max(nb, 1)
    z = np.zeros(shape)
    for _ in range(modes):
        a, kt, kx, ph = rng.uniform(-1, 1), rng.integers(0, 4), rng.integers(0, 3), rng.uniform(0, 2 * np.pi)
        z += a * np.cos(np.pi * kt * t + 2 * np.pi * kx * x + ph)
    z = 0.5 * (1.0 + np.tanh(z))  # values in (0, 1)
    lo, hi = box.bounds(shape)
    return lo + z * (hi - lo)


def check_vi(u, g, box, geom, dt, n_probes=100, seed=0, b0=0.0, rtol=1e-8,
             proj_tol=1e-6, scale=None):
    """Certify the variational inequality ``<g, v - u> >= 0`` on admissible probes.

    Probes are the two constant corners of the box, the sign corner that
    minimizes the linear functional over the box, the projected gradient
    point, and ``n_probes`` smooth random admissible controls; probes that
    violate the derivative budget are skipped.  The tolerance is
    ``rtol * scale`` with the default scale
    ``(||g - b0 u|| + b0 ||u||) * ||u_max - u_min||`` in L2(Sigma), i.e. the
    size of the two gradient terms before they cancel at a stationary point.  With ``b0 > 0`` the
    projection characterization ``u = P(-q_G / b0) = P(u - g / b0)`` is also
    measured (reported only when the budget is inactive at ``u``).
    """
    uv = np.asarray(u.values if isinstance(u, ControlSignal) else u, dtype=float)
    g = np.asarray(g, dtype=float)
    shape = uv.shape
    lo, hi = box.bounds(shape)
    rng = np.random.default_rng(seed)
    probes = [np.array(lo), np.array(hi), np.where(g > 0, lo, np.where(g < 0, hi, uv)),
              box.clamp(uv - g)]
    probes += [_random_feasible(rng, geom, box, shape, dt) for _ in range(n_probes)]
    vals = []
    for v in probes:
        if derivative_norm(geom, dt, v) <= box.M0 * (1 + 1e-9):
            vals.append(dot_sigma(geom, dt, g, v - uv))
    if scale is None:
        terms = norm_sigma(geom, dt, g - b0 * uv) + b0 * norm_sigma(geom, dt, uv)
        scale = terms * norm_sigma(geom, dt, hi - lo)
    tol = rtol * scale
    min_value = float(min(vals)) if vals else 0.0
    passed = min_value >= -tol
    proj_err = None
    budget_inactive = derivative_norm(geom, dt, uv) < box.M0
    if b0 > 0 and budget_inactive:
        p = box.clamp(uv - g / b0)
        nu = norm_sigma(geom, dt, uv)
        proj_err = norm_sigma(geom, dt, uv - p) / (nu + 1e-30)
        passed = passed and proj_err <= proj_tol
    return VICertificate(min_value, tol, len(vals), proj_err, bool(passed))
