"""
Steering the boundary toward a target
=====================================

Projected gradient descent on a tracking cost with box constraints,
followed by an independent certificate of first-order optimality.  The
run is configured by the shipped ``configs/tracking_demo.ini``.
"""

from pathlib import Path

from chcontrol import projected_gradient_descent
from chcontrol.config import load_config
from chcontrol.verify import optimality_certificate

conf = load_config(Path(__file__).resolve().parent.parent / "configs" / "tracking_demo.ini")
problem = conf.problem()
u0 = conf.control(problem.geom, problem.config)

report = projected_gradient_descent(problem, u0, conf.optimizer())
for it in report.iterates:
    print(f"iter {it['iter']:2d}   cost {it['cost']:.12f}   "
          f"stationarity {it['stationarity']:.2e}   step {it['step']:.3g}")

u = report.control.values
print(f"control range [{u.min():+.3f}, {u.max():+.3f}] "
      f"inside the box [{conf['box']['u_min']}, {conf['box']['u_max']}]")

# fresh state and adjoint at the final control, then the variational inequality
cert = optimality_certificate(report, problem, n_probes=50, seed=conf.seed)
for line in cert.lines:
    print(line)
