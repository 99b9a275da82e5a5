"""
Tracking-type cost functional.

    J = bQ/2 ||y - zQ||^2_Q + bSigma/2 ||y_G - zSigma||^2_Sigma
        + bOmega/2 ||y(T) - zOmega||^2 + bGamma/2 ||y_G(T) - zGamma||^2
        + b0/2 ||u||^2_Sigma

Space-time norms use the right-endpoint rectangle rule in time (see
:func:`chcontrol.control.time_weights`) and the lumped quadratures in space.
"""
from dataclasses import dataclass, replace

import numpy as np

from .control import as_control_values, time_weights
from .errors import ConfigMismatch


@dataclass(frozen=True)
class CostSpec:
    """Weights and targets.  Targets may be scalars or arrays.

    ``zQ`` broadcasts to ``(nt + 1, n)``, ``zSigma`` to ``(nt + 1, nb)``,
    ``zOmega`` to ``(n,)`` and ``zGamma`` to ``(nb,)``.
    """

    bQ: float = 0.0
    bSigma: float = 0.0
    bOmega: float = 0.0
    bGamma: float = 0.0
    b0: float = 0.0
    zQ: object = 0.0
    zSigma: object = 0.0
    zOmega: object = 0.0
    zGamma: object = 0.0

    def __post_init__(self):
        for name in ("bQ", "bSigma", "bOmega", "bGamma", "b0"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"cost weight {name} must be nonnegative")

    def scaled(self, alpha):
        """Same targets, every weight multiplied by ``alpha``."""
        return replace(self, bQ=alpha * self.bQ, bSigma=alpha * self.bSigma,
                       bOmega=alpha * self.bOmega, bGamma=alpha * self.bGamma,
                       b0=alpha * self.b0)

    def targets(self, geom, nt):
        """Materialize ``(zQ, zSigma, zOmega, zGamma)`` on the grid."""
        shapes = ((nt + 1, geom.n), (nt + 1, geom.nb), (geom.n,), (geom.nb,))
        out = []
        for z, shape in zip((self.zQ, self.zSigma, self.zOmega, self.zGamma), shapes):
            try:
                out.append(np.broadcast_to(np.asarray(z, dtype=float), shape))
            except ValueError as exc:
                raise ConfigMismatch(f"target of shape {np.shape(z)} does not fit {shape}") from exc
        return tuple(out)

    @property
    def tracking_free(self):
        return self.bQ == self.bSigma == self.bOmega == self.bGamma == 0.0


def evaluate_cost(traj, u, cost):
    """Value of the cost functional for a state trajectory and its control."""
    geom, cfg = traj.geom, traj.config
    uv = as_control_values(u, geom, cfg.nt)
    zQ, zS, zO, zG = cost.targets(geom, cfg.nt)
    w = time_weights(cfg.nt, cfg.dt)
    m, b = geom.mass, geom.bmass
    eQ = traj.y - zQ
    eS = traj.y_gamma - zS
    eO = traj.y[-1] - zO
    eG = traj.y_gamma[-1] - zG
    J = (cost.bQ * np.einsum("n,k,nk,nk->", w, m, eQ, eQ)
         + cost.bSigma * np.einsum("n,j,nj,nj->", w, b, eS, eS)
         + cost.bOmega * (m @ (eO * eO))
         + cost.bGamma * (b @ (eG * eG))
         + cost.b0 * np.einsum("n,j,nj,nj->", w, b, uv, uv))
    return 0.5 * float(J)
