"""
Backward adjoint system for the reduced gradient.

Two realizations are provided.

``solve_adjoint_transpose`` runs the exact transpose of the tangent scheme of
:mod:`chcontrol.sensitivity`.  Writing the step-``n`` multiplier as
``(dt p^n, -dt q^n)``, the transposed step reads

    K p^n = M q^n
    M p^n + (D + dt (A + L_imp^n)) q^n = S^n + M p^{n+1} + (D - dt L_exp^n) q^{n+1}

with ``S^n`` the cost load of level ``n`` and ``p^{nt+1} = q^{nt+1} = 0``; the
final-time tracking terms enter ``S^{nt}``.  The first row makes ``q`` zero
mean and ``p`` a Neumann potential of ``q``.

``solve_adjoint_decoupled`` eliminates ``p``: writing ``p = N q + c`` the
second row, tested against zero-mean functions, is a symmetric problem for
``q`` alone (solved by projected conjugate gradients with nested applications
of ``N``), and the scalar ``c`` is recovered afterwards by the mean
reconstruction :func:`chcontrol.neumann.apply_M`.

Level 0 is filled by one extra backward step with the level-0 coefficients and
no load.  It carries zero weight in every space-time pairing.
"""
import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .control import as_control_values, dot_sigma, time_weights
from .errors import ConfigMismatch
from .neumann import (_zero_mean_projector, apply_M, apply_N, default_maxiter,
                      projected_pcg)
from .state import factorize, viscosity_diag


@dataclass
class AdjointData:
    """Weighted tracking residuals driving the adjoint system."""

    phiQ: np.ndarray
    phiSigma: np.ndarray
    phiOmega: np.ndarray
    phiGamma: np.ndarray

    @property
    def nt(self):
        return self.phiQ.shape[0] - 1

    def scaled(self, alpha):
        return AdjointData(alpha * self.phiQ, alpha * self.phiSigma,
                           alpha * self.phiOmega, alpha * self.phiGamma)

    def check(self, geom, nt):
        shapes = ((nt + 1, geom.n), (nt + 1, geom.nb), (geom.n,), (geom.nb,))
        for a, s in zip((self.phiQ, self.phiSigma, self.phiOmega, self.phiGamma), shapes):
            if np.shape(a) != s:
                raise ConfigMismatch(f"adjoint data of shape {np.shape(a)}, expected {s}")
            if not np.all(np.isfinite(a)):
                raise ValueError("adjoint data must be finite")


@dataclass
class AdjointTrajectory:
    p: np.ndarray
    q: np.ndarray
    geom: object = None
    config: object = None

    @property
    def q_gamma(self):
        return self.q[:, self.geom.bnd]

    def mean_p(self):
        return self.p @ self.geom.mass / self.geom.volume

    def scalar_table(self):
        """Rows of (t, ||q||_H, ||q_G||_{H_G}, mean of p)."""
        g = self.geom
        qn = np.sqrt((self.q * self.q) @ g.mass)
        qg = self.q_gamma
        qgn = np.sqrt((qg * qg) @ g.bmass)
        return np.column_stack([self.config.times, qn, qgn, self.mean_p()])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "norm_q", "norm_q_gamma", "mean_p"])
            for row in self.scalar_table():
                wr.writerow([repr(float(v)) for v in row])


def build_adjoint_data(traj, cost):
    """``phi`` fields: weighted differences between the state and the targets."""
    geom, nt = traj.geom, traj.config.nt
    zQ, zS, zO, zG = cost.targets(geom, nt)
    return AdjointData(
        cost.bQ * (traj.y - zQ),
        cost.bSigma * (traj.y_gamma - zS),
        cost.bOmega * (traj.y[-1] - zO),
        cost.bGamma * (traj.y_gamma[-1] - zG),
    )


def adjoint_loads(geom, cfg, data):
    """Nodal loads ``S^n``: the derivative of the cost pairing with respect to ``y^n``."""
    w = time_weights(cfg.nt, cfg.dt)
    S = w[:, None] * (geom.mass * data.phiQ)
    S[:, geom.bnd] += w[:, None] * (geom.bmass * data.phiSigma)
    S[-1] += geom.mass * data.phiOmega
    S[-1, geom.bnd] += geom.bmass * data.phiGamma
    return S


def _check(coeffs, data, cfg):
    if cfg is not None and (cfg.nt != coeffs.nt or cfg.dt != coeffs.config.dt):
        raise ConfigMismatch("adjoint config does not match the linearization")
    data.check(coeffs.geom, coeffs.nt)


def solve_adjoint_transpose(coeffs, data, cfg=None):
    """Backward sweep with the transposed step Jacobians of the tangent scheme."""
    _check(coeffs, data, cfg)
    geom, cfg = coeffs.geom, coeffs.config
    n, nt, dt = geom.n, coeffs.nt, cfg.dt
    S = adjoint_loads(geom, cfg, data)
    visc = viscosity_diag(geom, cfg.tau)
    P = np.zeros((nt + 1, n))
    Q = np.zeros((nt + 1, n))
    ly, lw = np.zeros(n), np.zeros(n)  # multipliers of the later step
    for k in range(nt, -1, -1):
        rhs1 = S[k] + geom.mass * ly / dt
        if k < nt:
            rhs1 += (-visc / dt + coeffs.explicit_weighted(k)) * lw
        sol = coeffs.lu(max(k, 0)).solve(np.concatenate([rhs1, np.zeros(n)]), trans="T")
        ly, lw = sol[:n], sol[n:]
        P[k] = ly / dt
        Q[k] = -lw / dt
    return AdjointTrajectory(P, Q, geom, cfg)


def _decoupled_preconditioner(geom, cfg):
    D = sp.diags(viscosity_diag(geom, cfg.tau))
    return factorize(sp.csc_matrix(D + cfg.dt * geom.coupled_stiffness))


def solve_adjoint_decoupled(coeffs, data, cfg=None, tol=1e-12, inner_tol=1e-14):
    """Adjoint through the ``q``-only problem and the ``N``/``M`` reconstruction of ``p``.

    Each level solves, on zero-mean ``q``,

        (M N + D + dt (A + L_imp)) q^n = S^n + M N q^{n+1} + (D - dt L_exp) q^{n+1}

    up to a multiple of ``M 1``, then sets ``p^n = N q^n + c^n``.  ``tol`` is
    relative to the right-hand side; ``inner_tol`` to the argument of ``N``.
    """
    _check(coeffs, data, cfg)
    geom, cfg = coeffs.geom, coeffs.config
    n, nt, dt = geom.n, coeffs.nt, cfg.dt
    S = adjoint_loads(geom, cfg, data)
    visc = viscosity_diag(geom, cfg.tau)
    A = geom.coupled_stiffness
    mass = geom.mass
    project, project_dual = _zero_mean_projector(geom)
    lu = _decoupled_preconditioner(geom, cfg)
    maxiter = default_maxiter(geom)

    def N(v):
        scale = np.abs(v).max(initial=0.0)
        return apply_N(geom, project(v), tol=inner_tol * (scale + 1e-300)) if scale else 0 * v

    Q = np.zeros((nt + 1, n))
    NQ = np.zeros((nt + 1, n))
    q_next, nq_next = np.zeros(n), np.zeros(n)
    for k in range(nt, -1, -1):
        limp = coeffs.implicit_weighted(k)
        rhs = S[k] + mass * nq_next + (visc - dt * coeffs.explicit_weighted(k)) * q_next
        rhs = project_dual(rhs)
        rnorm = np.sqrt(rhs @ (rhs / mass))
        if rnorm > 0:
            def apply_H(x, limp=limp):
                return mass * N(x) + visc * x + dt * (A @ x + limp * x)

            q, _, _ = projected_pcg(apply_H, rhs, lu.solve, project, project_dual,
                                    1.0 / mass, tol * rnorm, maxiter, x0=q_next)
            q = project(q)
        else:
            q = np.zeros(n)
        Q[k], NQ[k] = q, N(q)
        q_next, nq_next = q, NQ[k]

    # mean of p by the backward reconstruction; slot m holds level m - 1
    w = time_weights(nt, dt)
    qb = Q[:, geom.bnd]
    bdry = qb @ geom.bmass
    bdry_next = np.append(bdry[1:], 0.0)
    Q_next = np.vstack([Q[1:], np.zeros(n)])
    explicit = np.array([coeffs.explicit_weighted(k) @ Q_next[k] for k in range(nt + 1)])
    imp_bnd = np.einsum("nj,nj,j->n", coeffs.imp_gamma, qb, geom.bmass)
    lap = ((bdry - bdry_next) / dt + imp_bnd + explicit
           - (w / dt) * (data.phiSigma @ geom.bmass))
    pad = np.zeros((1, n))
    q_slot = np.vstack([pad, Q])
    lam_slot = np.vstack([pad, coeffs.imp])
    phi_slot = np.vstack([pad, (w / dt)[:, None] * data.phiQ])
    lap_slot = np.append(0.0, lap)
    final = (mass @ data.phiOmega + geom.bmass @ data.phiGamma) / geom.volume
    P = np.empty_like(Q)
    for k in range(nt + 1):
        c = apply_M(geom, q_slot, lam_slot, phi_slot, final, k, dt, neg_lap_integrals=lap_slot)
        P[k] = NQ[k] + c
    return AdjointTrajectory(P, Q, geom, cfg)


def cost_pairing(geom, cfg, data, xi):
    """Derivative of the tracking part of the cost applied to a tangent ``xi``."""
    return float(np.sum(adjoint_loads(geom, cfg, data) * xi))


def check_duality(adj, tan, data, h):
    """Relative mismatch between the control pairing and the cost pairing."""
    geom, cfg = adj.geom, adj.config
    hv = as_control_values(h, geom, cfg.nt)
    lhs = dot_sigma(geom, cfg.dt, adj.q_gamma, hv)
    rhs = cost_pairing(geom, cfg, data, tan.xi)
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-30)


def poisson_residual(adj, n=None):
    """Largest relative residual of ``K p = M q`` over the levels (or at level ``n``)."""
    g = adj.geom
    levels = range(adj.q.shape[0]) if n is None else [n]
    out = 0.0
    for k in levels:
        r = g.stiffness @ adj.p[k] - g.mass * adj.q[k]
        scale = np.abs(g.mass * adj.q[k]).max() + 1e-300
        out = max(out, float(np.abs(r).max() / scale) if np.any(adj.q[k]) else float(np.abs(r).max()))
    return out
