"""
Command line front end.

    chcontrol {forward,optimize,gradcheck,taylor,verify} --config RUN.ini
              [--out DIR] [--seed N] [--quiet]

Exit codes: 0 success, 1 numerical failure (solver error or failed check),
2 configuration error.  ``CHC_THREADS`` caps the number of worker threads
used for independent verification probes.
"""
import argparse
import json
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__
from . import verify as V
from .config import load_config
from .errors import CHControlError, ConfigError
from .io import write_control, write_trajectory
from .optimizer import projected_gradient_descent, reduced_gradient
from .state import solve_state


class _Run:
    """Output directory, timings and console messages of one command."""

    def __init__(self, command, conf, out, quiet):
        self.command, self.conf, self.out, self.quiet = command, conf, out, quiet
        self.timings = {}
        os.makedirs(out, exist_ok=True)

    def say(self, msg):
        if not self.quiet:
            print(msg)

    def timed(self, name, fn, *args, **kw):
        t0 = time.perf_counter()
        res = fn(*args, **kw)
        self.timings[name] = time.perf_counter() - t0
        return res

    def path(self, name):
        return os.path.join(self.out, name)

    def finish(self, status, extra=None):
        with open(self.path("config.ini"), "w") as fh:
            fh.write(self.conf.text)
        manifest = {
            "command": self.command,
            "status": status,
            "config_sha256": self.conf.digest,
            "seed": self.conf.seed,
            "versions": {"chcontrol": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "timings_s": self.timings,
        }
        manifest.update(extra or {})
        with open(self.path("manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)


def _direction(conf, geom, cfg):
    v = conf["verify"]
    if v["direction"] == "zero":
        return np.zeros((cfg.nt + 1, geom.nb))
    if v["direction"] != "random":
        raise ConfigError(f"unknown verify.direction {v['direction']!r}", "verify.direction")
    rng = np.random.default_rng(conf.seed + 1)
    return V.smooth_random_control(rng, geom, cfg, v["direction_amplitude"])


def cmd_forward(run):
    conf = run.conf
    prob = conf.problem()
    u = conf.control(prob.geom, prob.config)
    traj = run.timed("solve", solve_state, prob.geom, prob.y0, u, prob.pair, prob.config)
    write_trajectory(run.out, traj)
    suite = V.conservation_and_energy_suite(traj, require_dissipation=False)
    V.write_report([suite], run.out, "Forward run")
    for ln in suite.lines:
        run.say(ln)
    return 0 if suite.passed else 1


def cmd_optimize(run):
    conf = run.conf
    prob = conf.problem()
    u0 = conf.control(prob.geom, prob.config)
    rep = run.timed("optimize", projected_gradient_descent, prob, u0, conf.optimizer())
    rep.to_csv(run.path("optimization_log.csv"))
    write_control(run.out, prob.geom, prob.config.times, rep.control.values)
    write_trajectory(run.out, rep.trajectory, snapshots=False)
    cert = run.timed("certificate", V.optimality_certificate, rep, prob,
                     conf["optimizer"]["n_probes"], conf.seed)
    rep.certificate = cert.value
    head = V.SuiteResult("optimization", rep.converged,
                         [f"iterations {len(rep.iterates) - 1}, cost {rep.costs[0]:.10e} -> "
                          f"{rep.costs[-1]:.10e}",
                          f"stationarity {rep.stationarity:.3e} (tolerance {rep.stat_tol:.3e})",
                          f"converged: {rep.converged}" + (f" ({rep.message})" if rep.message else "")])
    V.write_report([head, cert], run.out, "Optimization run")
    for ln in head.lines + cert.lines:
        run.say(ln)
    return 0 if cert.passed else 1


def _gradient(conf, prob, u):
    g = reduced_gradient(prob, u).gradient
    bias = conf["verify"]["corrupt_adjoint"]
    return g * (1.0 + bias) if bias else g


def cmd_gradcheck(run):
    conf = run.conf
    prob = conf.problem()
    u = conf.control(prob.geom, prob.config)
    h = _direction(conf, prob.geom, prob.config)
    g = run.timed("adjoint", _gradient, conf, prob, u)
    res = run.timed("finite_differences", V.fd_gradient_oracle, prob, u, h,
                    conf["verify"]["eps"], gradient=g, tol=conf["verify"]["gradient_tol"])
    V.write_report([res], run.out, "Gradient check")
    for r in res.rows:
        run.say("eps %.1e  fd %+.12e  adjoint %+.12e  rel.err %.3e" % r)
    run.say(res.lines[0])
    return 0 if res.passed else 1


def cmd_taylor(run):
    conf = run.conf
    prob = conf.problem()
    u = conf.control(prob.geom, prob.config)
    h = _direction(conf, prob.geom, prob.config)
    res = run.timed("taylor", V.taylor_remainder_study, prob, u, h, conf["verify"]["taylor_eps"])
    V.write_report([res], run.out, "Taylor remainder")
    for r in res.rows:
        run.say("eps %.1e  remainder %.6e" % r)
    run.say(res.lines[0])
    return 0 if res.passed else 1


def cmd_verify(run):
    conf = run.conf
    v = conf["verify"]
    prob = conf.problem()
    geom, cfg = prob.geom, prob.config
    u = conf.control(geom, cfg)
    h = _direction(conf, geom, cfg)
    seed = conf.seed
    suites = [V.conservation_and_energy_suite(prob.solve(u))]
    if cfg.scheme == "ConvexSplit":
        zero = V.conservation_and_energy_suite(prob.solve(0.0), require_dissipation=True)
        zero.name = "conservation and energy, zero control"
        suites.append(zero)
    suites += [
        run.timed("taylor", V.taylor_remainder_study, prob, u, h, v["taylor_eps"]),
        run.timed("duality", V.duality_suite, prob, u, v["n_duality"], seed),
        run.timed("agreement", V.adjoint_agreement_suite, prob, u, seed=seed),
        run.timed("zero_mean", V.zero_mean_suite, prob, u, seed),
        run.timed("gradient", V.fd_gradient_oracle, prob, u, h, v["eps"],
                  gradient=_gradient(conf, prob, u), tol=v["gradient_tol"]),
        run.timed("stability", V.stability_study, prob, v["n_pairs"], seed),
    ]
    V.write_report(suites, run.out, "Verification run")
    for s in suites:
        run.say(f"[{'PASS' if s.passed else 'FAIL'}] {s.name}: {s.lines[0]}")
    return 0 if all(s.passed for s in suites) else 1


COMMANDS = {"forward": cmd_forward, "optimize": cmd_optimize, "gradcheck": cmd_gradcheck,
            "taylor": cmd_taylor, "verify": cmd_verify}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="chcontrol",
        description="Boundary control of the viscous Cahn-Hilliard equation "
                    "with a dynamic boundary condition.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__name__.replace("cmd_", "") + " run")
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out", help="output directory (default: run.output_dir)")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--quiet", action="store_true", help="suppress console output")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        conf = load_config(args.config)
        if args.seed is not None:
            conf = conf.with_seed(args.seed)
        out = args.out or conf["run"]["output_dir"]
        run = _Run(args.command, conf, out, args.quiet)
        status = COMMANDS[args.command](run)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return 2
    except CHControlError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    run.finish(status)
    return status


if __name__ == "__main__":
    sys.exit(main())
