"""
Tangent (linearized) solves around a state trajectory.

The tangent scheme is the exact derivative of the discrete update map of
:func:`chcontrol.state.solve_state`.  Step ``n`` (from level ``n-1`` to ``n``)
has the Jacobian ``J_n`` of :func:`chcontrol.state.step_matrix` evaluated at
the converged level ``n``; the explicit part of a convex-concave split enters
through the coefficient of the previous level.  The factorized ``J_n`` are
cached on the :class:`LinearizedCoefficients` so the adjoint solver can reuse
them transposed.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .control import as_control_values
from .errors import ConfigMismatch
from .state import (factorize, reaction_derivatives, step_matrix, viscosity_diag,
                    weighted_coefficient)
from . import potentials as pot


@dataclass
class LinearizedCoefficients:
    """Second derivatives of the potentials along a trajectory.

    ``lam`` and ``lam_gamma`` are ``f''(y)`` and ``f_G''(y_G)`` at every level.
    ``imp``/``imp_gamma`` and ``exp``/``exp_gamma`` are the coefficients that
    multiply the new and the old level in the linearized step; for the fully
    implicit scheme ``imp = lam`` and ``exp = 0``.
    """

    geom: object
    config: object
    lam: np.ndarray
    lam_gamma: np.ndarray
    imp: np.ndarray
    imp_gamma: np.ndarray
    exp: np.ndarray
    exp_gamma: np.ndarray
    _lu: dict = field(default_factory=dict, repr=False)

    @property
    def nt(self):
        return self.lam.shape[0] - 1

    def implicit_weighted(self, n):
        return weighted_coefficient(self.geom, self.imp[n], self.imp_gamma[n])

    def explicit_weighted(self, n):
        return weighted_coefficient(self.geom, self.exp[n], self.exp_gamma[n])

    def jacobian(self, n):
        return step_matrix(self.geom, self.config, self.implicit_weighted(n))

    def lu(self, n):
        if n not in self._lu:
            self._lu[n] = factorize(self.jacobian(n))
        return self._lu[n]


@dataclass
class TangentTrajectory:
    xi: np.ndarray
    eta: np.ndarray
    geom: object = None
    config: object = None

    @property
    def xi_gamma(self):
        return self.xi[:, self.geom.bnd]

    def norms(self):
        """Per-level ``calH`` norm of ``(xi, xi_Gamma)``."""
        g = self.geom
        return np.sqrt((self.xi * self.xi) @ g.mass + (self.xi_gamma ** 2) @ g.bmass)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "norm_xi"])
            for t, v in zip(self.config.times, self.norms()):
                wr.writerow([repr(float(t)), repr(float(v))])


def linearize(traj, pair=None):
    """Coefficients of the linearized system along ``traj``."""
    geom, cfg = traj.geom, traj.config
    pair = pair or traj.pair
    nl = traj.y.shape[0]
    lam = np.empty((nl, geom.n))
    lamG = np.empty((nl, geom.nb))
    imp, impG = np.empty_like(lam), np.empty_like(lamG)
    exp, expG = np.empty_like(lam), np.empty_like(lamG)
    for n, y in enumerate(traj.y):
        lam[n] = pot.evaluate(pair.bulk, 2, y)
        lamG[n] = pot.evaluate(pair.boundary, 2, y[geom.bnd])
        imp[n], impG[n], exp[n], expG[n] = reaction_derivatives(geom, pair, y, cfg.scheme)
    return LinearizedCoefficients(geom, cfg, lam, lamG, imp, impG, exp, expG)


def tangent_step(coeffs, n, xi_old, h_new):
    """Solve step ``n`` of the tangent scheme; returns ``(xi_n, eta_n)``."""
    geom, dt = coeffs.geom, coeffs.config.dt
    rhs1 = geom.mass * xi_old / dt
    rhs2 = (-viscosity_diag(geom, coeffs.config.tau) / dt + coeffs.explicit_weighted(n - 1)) * xi_old
    rhs2[geom.bnd] -= geom.bmass * h_new
    sol = coeffs.lu(n).solve(np.concatenate([rhs1, rhs2]))
    return sol[: geom.n], sol[geom.n:]


def solve_tangent(coeffs, h, cfg=None):
    """Directional derivative of the control-to-state map in direction ``h``."""
    geom = coeffs.geom
    if cfg is not None and (cfg.nt != coeffs.nt or cfg.dt != coeffs.config.dt):
        raise ConfigMismatch("tangent config does not match the linearization")
    hv = as_control_values(h, geom, coeffs.nt)
    xi = np.zeros((coeffs.nt + 1, geom.n))
    eta = np.zeros_like(xi)
    for n in range(1, coeffs.nt + 1):
        xi[n], eta[n] = tangent_step(coeffs, n, xi[n - 1], hv[n])
    return TangentTrajectory(xi, eta, geom, coeffs.config)
