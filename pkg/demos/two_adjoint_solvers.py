"""
Two routes to the adjoint state
===============================

Without final-time tracking terms the adjoint system splits: ``q`` solves
a zero-mean problem level by level, and ``p`` is rebuilt from ``q`` by the
inverse Neumann Laplacian plus a scalar mean.  The result must match the
transposed tangent sweep.
"""

import numpy as np
import chcontrol as chc
from chcontrol import verify
from chcontrol.adjoint import poisson_residual

geom = chc.Geometry("Strip2D", nx=16, ny=9, lx=1.0, ly=0.5)
pair = chc.PotentialPair(chc.PotentialSpec("Logarithmic"), chc.PotentialSpec("Logarithmic"))
cfg = chc.SolverConfig(T=0.5, nt=20, scheme="ConvexSplit", newton_tol=1e-13)

rng = np.random.default_rng(2)
y0 = 0.1 + 0.05 * rng.uniform(-1, 1, geom.n)
traj = chc.solve_state(geom, y0, verify.smooth_random_control(rng, geom, cfg), pair, cfg)
coeffs = chc.linearize(traj)

# random tracking residuals, none at the final time
data = verify.random_adjoint_data(rng, geom, cfg.nt, final=False)

a = chc.solve_adjoint_transpose(coeffs, data)
b = chc.solve_adjoint_decoupled(coeffs, data)

print("max |q_transpose - q_decoupled|:", np.abs(a.q - b.q).max())
print("max |p_transpose - p_decoupled|:", np.abs(a.p - b.p).max())
print("Poisson relation residual:     ", poisson_residual(b))
print("largest |mean q|:              ", np.abs(b.q @ geom.mass).max() / geom.volume)

# the adjoint turns tangent pairings into control pairings
h = rng.standard_normal((cfg.nt + 1, geom.nb))
print("duality residual:              ",
      chc.check_duality(a, chc.solve_tangent(coeffs, h), data, h))
