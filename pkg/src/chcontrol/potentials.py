"""
Double-well potentials for the bulk and the boundary.

Two families are provided: the regular quartic ``(r^2 - 1)^2 / 4`` on the
whole line and the logarithmic potential

    (1 + r) ln(1 + r) + (1 - r) ln(1 - r) - c r^2,     -1 < r < 1,

which is nonconvex once ``c > 1``.  Every function accepts scalars or arrays.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation

QUARTIC = "RegularQuartic"
LOGARITHMIC = "Logarithmic"

#: evaluations closer than this to a logarithmic endpoint are refused
ENDPOINT_GUARD = 1e-12


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = QUARTIC
    c: float = 3.0

    def __post_init__(self):
        if self.kind not in (QUARTIC, LOGARITHMIC):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == LOGARITHMIC and not self.c > 0:
            raise ValueError("logarithmic potential needs c > 0")

    @property
    def domain(self):
        if self.kind == QUARTIC:
            return (-np.inf, np.inf)
        return (-1.0, 1.0)

    @property
    def singular(self):
        return self.kind == LOGARITHMIC


@dataclass(frozen=True)
class PotentialPair:
    """Bulk and boundary potentials plus the constants of the growth bound
    ``|f'(r)| <= eta |f_Gamma'(r)| + compat_C``."""

    bulk: PotentialSpec
    boundary: PotentialSpec
    eta: float = 1.0
    compat_C: float = 0.0

    @property
    def singular(self):
        return self.bulk.singular or self.boundary.singular

    @property
    def domain(self):
        lo = max(self.bulk.domain[0], self.boundary.domain[0])
        hi = min(self.bulk.domain[1], self.boundary.domain[1])
        return lo, hi


def _check_domain(spec, r):
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise DomainViolation("non-finite argument")
    if spec.kind == LOGARITHMIC:
        if np.any(np.abs(r) >= 1.0 - ENDPOINT_GUARD):
            bad = float(r.flat[np.argmax(np.abs(r))])
            raise DomainViolation(f"logarithmic potential evaluated at r={bad!r}")
    return r


def evaluate(spec, order, r):
    """Derivative of the given order (0..3) of the potential at ``r``."""
    r = _check_domain(spec, r)
    if spec.kind == QUARTIC:
        if order == 0:
            return 0.25 * (r * r - 1.0) ** 2
        if order == 1:
            return r ** 3 - r
        if order == 2:
            return 3.0 * r * r - 1.0
        if order == 3:
            return 6.0 * r
    else:
        c = spec.c
        if order == 0:
            return (1 + r) * np.log1p(r) + (1 - r) * np.log1p(-r) - c * r * r
        if order == 1:
            return np.log1p(r) - np.log1p(-r) - 2.0 * c * r
        if order == 2:
            return 1.0 / (1 + r) + 1.0 / (1 - r) - 2.0 * c
        if order == 3:
            return 1.0 / (1 - r) ** 2 - 1.0 / (1 + r) ** 2
    raise ValueError(f"order must be 0..3, got {order}")


def convex_concave_split(spec, r):
    """Return ``(beta, pi)`` with ``beta + pi = f'`` and ``beta`` monotone."""
    r = _check_domain(spec, r)
    if spec.kind == QUARTIC:
        return r ** 3, -r
    return np.log1p(r) - np.log1p(-r), -2.0 * spec.c * r


def split_derivatives(spec, r):
    """Derivatives ``(beta', pi')`` of the two branches of the split."""
    r = _check_domain(spec, r)
    if spec.kind == QUARTIC:
        return 3.0 * r * r, -np.ones_like(r)
    return 2.0 / (1.0 - r * r), np.full_like(r, -2.0 * spec.c)


@dataclass
class AssumptionReport:
    compat_max_violation: float
    compat_worst_r: float
    domains_match: bool
    divergence: dict
    passed: bool

    def lines(self):
        out = [
            f"domains match: {self.domains_match}",
            f"max violation of |f'| <= eta|f_G'| + C: {self.compat_max_violation:.3e}"
            f" at r={self.compat_worst_r:.6f}",
        ]
        for side, vals in self.divergence.items():
            out.append(f"endpoint growth {side}: {', '.join(f'{v:.3g}' for v in vals)}")
        out.append("PASS" if self.passed else "FAIL")
        return out


def _endpoint_samples(spec, side):
    lo, hi = spec.domain
    if spec.kind == QUARTIC:
        mags = 10.0 ** np.arange(1, 5)
        return mags if side > 0 else -mags
    deltas = 10.0 ** -np.arange(2, 11)
    return hi - deltas if side > 0 else lo + deltas


def check_assumptions(pair, samples=1000):
    """Sample the structural hypotheses on a pair of potentials.

    The compatibility bound is checked on ``samples`` points of the common
    domain (clipped to [-3, 3] for unbounded domains and kept 1e-9 away from
    logarithmic endpoints).  Endpoint divergence is reported as the sequence of
    derivative values approaching each endpoint, which must grow without bound
    in the direction of the endpoint for both potentials.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    lo, hi = pair.domain
    lo = max(lo, -3.0) if np.isinf(lo) else lo + 1e-9
    hi = min(hi, 3.0) if np.isinf(hi) else hi - 1e-9
    r = np.linspace(lo, hi, samples)
    fb = np.abs(evaluate(pair.bulk, 1, r))
    fg = np.abs(evaluate(pair.boundary, 1, r))
    viol = fb - (pair.eta * fg + pair.compat_C)
    k = int(np.argmax(viol))
    max_viol = max(float(viol[k]), 0.0)

    divergence = {}
    diverges = True
    for name, spec in (("bulk", pair.bulk), ("boundary", pair.boundary)):
        for side in (-1, 1):
            vals = evaluate(spec, 1, _endpoint_samples(spec, side))
            divergence[f"{name} {'+' if side > 0 else '-'}"] = list(map(float, vals))
            signed = side * vals
            diverges &= bool(np.all(np.diff(signed) > 0) and signed[-1] > 10.0)

    domains_match = pair.bulk.domain == pair.boundary.domain
    passed = domains_match and max_viol == 0.0 and diverges
    return AssumptionReport(max_viol, float(r[k]), domains_match, divergence, passed)
