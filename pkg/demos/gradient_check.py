"""
Checking the adjoint gradient
=============================

The reduced gradient comes from one backward adjoint sweep.  Here it is
compared with central differences of the cost along a random direction,
and the tangent model is checked through its Taylor remainder.
"""

import numpy as np
import chcontrol as chc
from chcontrol import verify

geom = chc.Geometry("Interval1D", nx=65)
pair = chc.PotentialPair(chc.PotentialSpec("RegularQuartic"),
                         chc.PotentialSpec("RegularQuartic"))
cfg = chc.SolverConfig(T=0.5, nt=32, newton_tol=1e-13)

# track a sine profile in the bulk and a constant on the boundary
x = geom.coords[:, 0]
cost = chc.CostSpec(bQ=1.0, bSigma=0.5, bOmega=1.0, b0=0.01,
                    zQ=0.5 * np.sin(2 * np.pi * x), zSigma=0.2)
problem = chc.ControlProblem(geom, 0.1 + 0.3 * np.cos(2 * np.pi * x), pair, cfg, cost)

rng = np.random.default_rng(1)
u = verify.smooth_random_control(rng, geom, cfg)
h = verify.smooth_random_control(rng, geom, cfg, amplitude=1.0)

# adjoint pairing <g, h> against (J(u + eps h) - J(u - eps h)) / (2 eps)
res = verify.fd_gradient_oracle(problem, u, h)
for eps, fd, adj, err in res.rows:
    print(f"eps {eps:.0e}   fd {fd:+.12e}   adjoint {adj:+.12e}   rel. error {err:.1e}")

# the remainder S(u + eps h) - S(u) - eps xi must shrink like eps^2
taylor = verify.taylor_remainder_study(problem, u, h)
for eps, r in taylor.rows:
    print(f"eps {eps:.0e}   remainder {r:.3e}")
print(taylor.lines[0])
