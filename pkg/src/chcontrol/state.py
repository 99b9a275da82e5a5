"""
Forward solver for the viscous Cahn-Hilliard system with a dynamic boundary
condition driven by a boundary control.

Unknowns per time level are the order parameter ``y`` (its trace is the
boundary value) and the chemical potential ``w``.  One implicit Euler step
from ``y_old`` solves, in weak form against every discrete test function,

    M (y - y_old)/dt + K w = 0
    M w = D (y - y_old)/dt + A y + M f'(*) + G f_G'(*) - G u_new

with ``D = tau M + G`` (bulk viscosity plus boundary time derivative),
``A = K + P^T K_G P`` and ``G`` the boundary mass scattered onto the nodes.
``*`` is ``y`` for the fully implicit scheme and ``beta(y) + pi(y_old)`` for
the convex-concave split.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import potentials as pot
from .control import as_control_values, time_weights
from .errors import ConfigMismatch, DomainViolation, NewtonDiverged, SingularJacobian
from .grid import norm_calH

FULLY_IMPLICIT = "FullyImplicit"
CONVEX_SPLIT = "ConvexSplit"


@dataclass(frozen=True)
class SolverConfig:
    T: float = 1.0
    nt: int = 32
    tau: float = 1.0
    scheme: str = FULLY_IMPLICIT
    newton_tol: float = 1e-10
    newton_max: int = 50
    guard_delta: float = 1e-6

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.nt < 1:
            raise ValueError("nt must be >= 1")
        if not self.tau > 0:
            raise ValueError("only the viscous case tau > 0 is supported")
        if self.scheme not in (FULLY_IMPLICIT, CONVEX_SPLIT):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.guard_delta > 0:
            raise ValueError("guard_delta must be positive")

    @property
    def dt(self):
        return self.T / self.nt

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.nt + 1)


@dataclass
class StateSnapshot:
    y: np.ndarray
    w: np.ndarray
    t: float
    bnd: np.ndarray = field(repr=False, default=None)

    @property
    def y_gamma(self):
        return self.y[self.bnd]


@dataclass
class Trajectory:
    """Time levels ``0..nt`` of ``(y, w)``; ``y[n][geom.bnd]`` is the trace."""

    geom: object
    pair: object
    config: SolverConfig
    y: np.ndarray
    w: np.ndarray
    control: np.ndarray
    newton_iters: np.ndarray = None
    newton_res: np.ndarray = None

    @property
    def t(self):
        return self.config.times

    @property
    def y_gamma(self):
        return self.y[:, self.geom.bnd]

    def snapshot(self, n):
        return StateSnapshot(self.y[n], self.w[n], float(self.t[n]), self.geom.bnd)

    @property
    def snapshots(self):
        return [self.snapshot(n) for n in range(self.config.nt + 1)]

    def masses(self):
        return self.y @ self.geom.mass / self.geom.volume

    def energies(self):
        return np.array([free_energy(self.geom, self.pair, y) for y in self.y])

    def scalar_table(self):
        """Rows of (t, mass, energy, min y, max y)."""
        return np.column_stack([self.t, self.masses(), self.energies(),
                                self.y.min(axis=1), self.y.max(axis=1)])


# ---------------------------------------------------------------------------
# Discrete energy and the nonlinear terms
# ---------------------------------------------------------------------------

def free_energy(geom, pair, y):
    """Discrete free energy: Dirichlet terms on Omega and Gamma plus potentials."""
    y = geom.check_bulk(y)
    yb = y[geom.bnd]
    quad = 0.5 * y @ (geom.coupled_stiffness @ y)
    return float(quad + geom.mass @ pot.evaluate(pair.bulk, 0, y)
                 + geom.bmass @ pot.evaluate(pair.boundary, 0, yb))


def reaction(geom, pair, y, y_old, scheme):
    """Nonlinear terms ``(f'(*), f_G'(*))`` of one step, bulk and boundary."""
    yb, yob = y[geom.bnd], y_old[geom.bnd]
    if scheme == FULLY_IMPLICIT:
        return pot.evaluate(pair.bulk, 1, y), pot.evaluate(pair.boundary, 1, yb)
    b, _ = pot.convex_concave_split(pair.bulk, y)
    _, p = pot.convex_concave_split(pair.bulk, y_old)
    bG, _ = pot.convex_concave_split(pair.boundary, yb)
    _, pG = pot.convex_concave_split(pair.boundary, yob)
    return b + p, bG + pG


def reaction_derivatives(geom, pair, y, scheme):
    """Pointwise derivatives of the reaction at one level.

    Returns ``(imp, imp_G, exp, exp_G)``: the derivative with respect to the
    new level (implicit) and to the old level (explicit) of the bulk and
    boundary reaction, each evaluated at ``y``.
    """
    yb = y[geom.bnd]
    if scheme == FULLY_IMPLICIT:
        return (pot.evaluate(pair.bulk, 2, y), pot.evaluate(pair.boundary, 2, yb),
                np.zeros(geom.n), np.zeros(geom.nb))
    b, p = pot.split_derivatives(pair.bulk, y)
    bG, pG = pot.split_derivatives(pair.boundary, yb)
    return b, bG, p, pG


def weighted_coefficient(geom, bulk, bnd):
    """Diagonal of ``M diag(bulk) + G diag(bnd)`` as a nodal vector."""
    d = geom.mass * bulk
    d[geom.bnd] += geom.bmass * bnd
    return d


def viscosity_diag(geom, tau):
    return tau * geom.mass + geom.bmass_full


def step_matrix(geom, cfg, lam_weighted):
    """Jacobian of one step with respect to ``(y_new, w_new)``."""
    dt = cfg.dt
    M = sp.diags(geom.mass)
    lower = -(sp.diags(viscosity_diag(geom, cfg.tau) / dt + lam_weighted)
              + geom.coupled_stiffness)
    return sp.bmat([[M / dt, geom.stiffness], [lower, M]], format="csc")


def factorize(J):
    try:
        return spla.splu(J)
    except RuntimeError as exc:  # "Factor is exactly singular"
        raise SingularJacobian(str(exc)) from exc


def step_residual(geom, pair, cfg, y, w, y_old, u_new):
    dt = cfg.dt
    dy = (y - y_old) / dt
    fb, fg = reaction(geom, pair, y, y_old, cfg.scheme)
    r1 = geom.mass * dy + geom.stiffness @ w
    r2 = (geom.mass * w - viscosity_diag(geom, cfg.tau) * dy
          - geom.coupled_stiffness @ y - geom.mass * fb)
    r2[geom.bnd] += geom.bmass * (u_new - fg)
    return r1, r2


def residual_norm(geom, r1, r2, dt):
    """H-norm of the step residual, sqrt(r . M^{-1} r) over both rows.

    The mass-balance row is measured on the increment (multiplied by ``dt``)
    so both rows have the units of the chemical-potential row.
    """
    r1 = dt * r1
    return float(np.sqrt(np.sum(r1 * r1 / geom.mass) + np.sum(r2 * r2 / geom.mass)))


def _in_guard(pair, cfg, y, geom):
    lo, hi = -1.0 + cfg.guard_delta, 1.0 - cfg.guard_delta
    ok = True
    if pair.bulk.singular:
        ok &= bool(np.all((y >= lo) & (y <= hi)))
    if pair.boundary.singular:
        yb = y[geom.bnd]
        ok &= bool(np.all((yb >= lo) & (yb <= hi)))
    return ok


def newton_step(geom, pair, cfg, y_old, w_guess, u_new, step_index=None):
    """Solve one implicit step by damped Newton.  Returns ``(y, w, iters, res)``."""
    y, w = y_old.copy(), w_guess.copy()
    n = geom.n
    r1, r2 = step_residual(geom, pair, cfg, y, w, y_old, u_new)
    res = residual_norm(geom, r1, r2, cfg.dt)
    for it in range(cfg.newton_max + 1):
        if res <= cfg.newton_tol:
            return y, w, it, res
        if it == cfg.newton_max:
            break
        imp, impG, _, _ = reaction_derivatives(geom, pair, y, cfg.scheme)
        J = step_matrix(geom, cfg, weighted_coefficient(geom, imp, impG))
        delta = factorize(J).solve(-np.concatenate([r1, r2]))
        dy, dw = delta[:n], delta[n:]
        s = 1.0
        for _ in range(31):
            y_t = y + s * dy
            if _in_guard(pair, cfg, y_t, geom):
                w_t = w + s * dw
                t1, t2 = step_residual(geom, pair, cfg, y_t, w_t, y_old, u_new)
                res_t = residual_norm(geom, t1, t2, cfg.dt)
                if res_t < res:
                    break
            s *= 0.5
        else:
            scale = 1.0 + np.abs(y).max() + np.abs(w).max()
            if np.abs(delta).max() <= 1e-13 * scale and res <= 100 * cfg.newton_tol:
                # correction at rounding level: the residual floor has been reached
                return y, w, it, res
            if not _in_guard(pair, cfg, y + dy, geom):
                raise DomainViolation(
                    f"Newton iterate left the guard band at step {step_index}")
            raise NewtonDiverged(
                f"no residual decrease after 30 halvings at step {step_index} "
                f"(residual {res:.3e})", step=step_index)
        y, w, r1, r2, res = y_t, w_t, t1, t2, res_t
    raise NewtonDiverged(
        f"Newton did not converge in {cfg.newton_max} iterations at step {step_index} "
        f"(residual {res:.3e})", step=step_index)


def initial_potential(geom, pair, y0):
    """Chemical potential consistent with ``y0`` at rest: -Lap y0 + f'(y0)."""
    w = geom.stiffness @ y0 / geom.mass + pot.evaluate(pair.bulk, 1, y0)
    return w


def solve_state(geom, y0, u, pair, cfg):
    """Integrate the state system from ``y0`` under the boundary control ``u``.

    ``u`` is a :class:`~chcontrol.control.ControlSignal`, an array of shape
    ``(nt + 1, nb)`` or a scalar.  Returns a :class:`Trajectory`.
    """
    y0 = np.array(geom.check_bulk(y0), dtype=float)
    uv = as_control_values(u, geom, cfg.nt)
    if pair.singular and not _in_guard(pair, cfg, y0, geom):
        raise DomainViolation("initial datum is outside the guard band of the potential")
    nt = cfg.nt
    Y = np.empty((nt + 1, geom.n))
    W = np.empty((nt + 1, geom.n))
    iters = np.zeros(nt + 1, dtype=int)
    ress = np.zeros(nt + 1)
    Y[0] = y0
    W[0] = initial_potential(geom, pair, y0)
    for n in range(nt):
        Y[n + 1], W[n + 1], iters[n + 1], ress[n + 1] = newton_step(
            geom, pair, cfg, Y[n], W[n], uv[n + 1], step_index=n + 1)
    return Trajectory(geom, pair, cfg, Y, W, uv.copy(), iters, ress)


def residual_check(traj, u=None):
    """Recompute every step residual of a trajectory.

    Returns ``(residuals, flagged)`` where ``residuals[n]`` is the H-norm of the
    residual of the step ending at level ``n`` (``residuals[0] = 0``) and
    ``flagged`` lists the levels whose residual exceeds ``10 * newton_tol``.
    """
    geom, cfg = traj.geom, traj.config
    uv = traj.control if u is None else as_control_values(u, geom, cfg.nt)
    if traj.y.shape[0] != cfg.nt + 1:
        raise ConfigMismatch("trajectory length does not match the config")
    res = np.zeros(cfg.nt + 1)
    for n in range(cfg.nt):
        r1, r2 = step_residual(geom, traj.pair, cfg, traj.y[n + 1], traj.w[n + 1],
                               traj.y[n], uv[n + 1])
        res[n + 1] = residual_norm(geom, r1, r2, cfg.dt)
    flagged = [int(n) for n in np.nonzero(res > 10 * cfg.newton_tol)[0]]
    return res, flagged


def mass_drift(traj):
    """Largest deviation of the spatial mean from its initial value."""
    m = traj.masses()
    return float(np.max(np.abs(m - m[0])))


def state_norms(geom, dt, dy):
    """``(sup_n ||dy_n||_calH, ||dy||_{L2(V)}``-type proxies) for a state difference."""
    sup = max(norm_calH(geom, d) for d in dy)
    w = time_weights(dy.shape[0] - 1, dt)
    grad = np.einsum("n,nk,nk->", w, dy, (geom.coupled_stiffness @ dy.T).T)
    return sup, float(np.sqrt(max(grad, 0.0)))

