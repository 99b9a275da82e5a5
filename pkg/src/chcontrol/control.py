"""
Boundary controls on the space-time boundary Sigma and the admissible box.

A control is sampled at the ``nt + 1`` time levels of the state solver and at
every boundary node; ``values[n]`` is the control at ``t_n``.  The step from
``t_n`` to ``t_{n+1}`` uses ``values[n + 1]``, and space-time integrals use
the matching right-endpoint rectangle rule: level 0 carries zero weight.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigMismatch


def time_weights(nt, dt):
    """Right-endpoint rectangle weights for the levels 0..nt."""
    w = np.full(nt + 1, float(dt))
    w[0] = 0.0
    return w


def dot_sigma(geom, dt, a, b):
    """L2(Sigma) inner product of two boundary time series."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = time_weights(a.shape[0] - 1, dt)
    return float(np.einsum("n,j,nj,nj->", w, geom.bmass, a, b))


def norm_sigma(geom, dt, a):
    return float(np.sqrt(max(dot_sigma(geom, dt, a, a), 0.0)))


def derivative_norm(geom, dt, values):
    """Discrete L2 norm of the time derivative, (sum_n dt |(u^{n+1}-u^n)/dt|^2)^(1/2)."""
    d = np.diff(np.asarray(values, dtype=float), axis=0) / dt
    return float(np.sqrt(dt * np.sum(geom.bmass * d * d)))


@dataclass
class ControlBox:
    """Pointwise bounds ``u_min <= u <= u_max`` and derivative budget ``M0``.

    Bounds may be scalars or arrays broadcastable to ``(nt + 1, nb)``.
    """

    u_min: object = -1.0
    u_max: object = 1.0
    M0: float = 1e6

    def __post_init__(self):
        if not self.M0 > 0:
            raise ValueError("M0 must be positive")
        if np.any(np.asarray(self.u_min) > np.asarray(self.u_max)):
            raise ValueError("empty control box: u_min > u_max somewhere")

    def bounds(self, shape):
        lo = np.broadcast_to(np.asarray(self.u_min, dtype=float), shape)
        hi = np.broadcast_to(np.asarray(self.u_max, dtype=float), shape)
        return lo, hi

    def clamp(self, values):
        values = np.asarray(values, dtype=float)
        lo, hi = self.bounds(values.shape)
        return np.minimum(np.maximum(values, lo), hi)


@dataclass
class ControlSignal:
    """Boundary control time series of shape ``(nt + 1, nb)``."""

    values: np.ndarray
    box: ControlBox = None
    budget_active: bool = False
    feasible: bool = True

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float, ndmin=2)

    @property
    def nt(self):
        return self.values.shape[0] - 1

    def copy(self):
        return ControlSignal(self.values.copy(), self.box, self.budget_active, self.feasible)

    def check(self, geom, nt):
        if self.values.shape != (nt + 1, geom.nb):
            raise ConfigMismatch(
                f"control has shape {self.values.shape}, expected {(nt + 1, geom.nb)}"
            )
        return self.values

    def is_admissible(self, geom, dt, rtol=1e-9):
        if self.box is None:
            return True
        lo, hi = self.box.bounds(self.values.shape)
        inside = np.all(self.values >= lo) and np.all(self.values <= hi)
        return bool(inside and derivative_norm(geom, dt, self.values) <= self.box.M0 * (1 + rtol))


def as_control_values(u, geom, nt):
    """Accept a ControlSignal, an array, or a scalar and return ``(nt+1, nb)`` values."""
    if isinstance(u, ControlSignal):
        return u.check(geom, nt)
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        return np.full((nt + 1, geom.nb), float(arr))
    if arr.shape != (nt + 1, geom.nb):
        raise ConfigMismatch(f"control has shape {arr.shape}, expected {(nt + 1, geom.nb)}")
    return arr
