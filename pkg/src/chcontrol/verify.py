"""
Verification drivers.

Every check here recomputes its reference from first principles: costs and
energies are re-integrated with explicit difference quotients and
quadrature sums, perturbed problems are re-solved from scratch, and the
optimality certificate re-derives the adjoint independently.  The only shared
pieces are the grid weights, the potentials and the forward solver.

Norm proxies: "sup-calH" is the maximum over time levels of the discrete
``L2(Omega) x L2(Gamma)`` norm, and "L2(V)" is the right-endpoint time sum of
the coupled Dirichlet form plus the calH norm.
"""
import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import potentials as pot
from .adjoint import (AdjointData, build_adjoint_data, solve_adjoint_decoupled,
                      solve_adjoint_transpose)
from .grid import INTERVAL
from .optimizer import check_vi, reduced_gradient
from .sensitivity import linearize, solve_tangent
from .state import solve_state

NORM_HEADER = ("Norm proxies: sup-calH = max over time levels of the discrete "
               "L2(Omega) x L2(Gamma) norm; L2(V) = time sum of the coupled "
               "Dirichlet form plus calH norm.")


def probe_threads():
    """Worker count for independent probes, capped by ``CHC_THREADS``."""
    try:
        return max(1, int(os.environ.get("CHC_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    nthreads = min(probe_threads(), len(items))
    if nthreads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(nthreads) as ex:
        return list(ex.map(fn, items))


@dataclass
class SuiteResult:
    """Outcome of one verification suite: a verdict, summary lines and a table."""

    name: str
    passed: bool
    lines: list = field(default_factory=list)
    header: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    value: object = None

    def to_markdown(self):
        out = [f"## {self.name}: {'PASS' if self.passed else 'FAIL'}", ""]
        out += [f"- {ln}" for ln in self.lines]
        if self.rows:
            out += ["", "| " + " | ".join(self.header) + " |",
                    "|" + "---|" * len(self.header)]
            out += ["| " + " | ".join(_fmt(v) for v in r) + " |" for r in self.rows]
        return "\n".join(out) + "\n"

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self.header)
            for r in self.rows:
                wr.writerow([repr(v) if isinstance(v, float) else v for v in r])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.6e}"
    return str(v)


def write_report(results, out_dir, title="Verification report"):
    """Markdown summary plus one CSV per suite; returns the Markdown path."""
    os.makedirs(out_dir, exist_ok=True)
    md = [f"# {title}", "", NORM_HEADER, ""]
    for res in results:
        md.append(res.to_markdown())
        if res.rows:
            res.write_csv(os.path.join(out_dir, res.name.replace(" ", "_") + ".csv"))
    path = os.path.join(out_dir, "report.md")
    with open(path, "w") as fh:
        fh.write("\n".join(md))
    return path


# ---------------------------------------------------------------------------
# Independent recomputations
# ---------------------------------------------------------------------------

def _dirichlet_energy(geom, y):
    """Bulk and surface Dirichlet energies from explicit difference quotients."""
    hx = geom.hx
    if geom.mode == INTERVAL:
        return 0.5 * np.sum(np.diff(y) ** 2) / hx, 0.0
    Y = y.reshape(geom.ny, geom.nx)
    wy = np.full(geom.ny, geom.hy)
    wy[[0, -1]] *= 0.5
    dx = np.roll(Y, -1, axis=1) - Y
    dy = np.diff(Y, axis=0)
    bulk = 0.5 * (np.sum(wy[:, None] * dx ** 2) / hx + hx * np.sum(dy ** 2) / geom.hy)
    surf = 0.5 * np.sum(dx[[0, -1]] ** 2) / hx
    return bulk, surf


def quadrature_energy(geom, pair, y):
    bulk, surf = _dirichlet_energy(geom, y)
    yb = y[geom.bnd]
    return float(bulk + surf + np.sum(geom.mass * pot.evaluate(pair.bulk, 0, y))
                 + np.sum(geom.bmass * pot.evaluate(pair.boundary, 0, yb)))


def quadrature_cost(problem, traj, u):
    """Cost functional re-integrated level by level."""
    geom, cfg, cost = problem.geom, problem.config, problem.cost
    zQ, zS, zO, zG = cost.targets(geom, cfg.nt)
    m, b, dt = geom.mass, geom.bmass, cfg.dt
    total = 0.0
    for n in range(1, cfg.nt + 1):
        yb = traj.y[n][geom.bnd]
        total += dt * (cost.bQ * np.sum(m * (traj.y[n] - zQ[n]) ** 2)
                       + cost.bSigma * np.sum(b * (yb - zS[n]) ** 2)
                       + cost.b0 * np.sum(b * u[n] ** 2))
    yT = traj.y[-1]
    total += cost.bOmega * np.sum(m * (yT - zO) ** 2)
    total += cost.bGamma * np.sum(b * (yT[geom.bnd] - zG) ** 2)
    return 0.5 * float(total)


def _sigma_dot(geom, dt, a, b):
    return float(dt * np.sum(geom.bmass * a[1:] * b[1:]))


def _sup_calH(geom, d):
    return float(max(np.sqrt(np.sum(geom.mass * x * x) + np.sum(geom.bmass * x[geom.bnd] ** 2))
                     for x in d))


def _l2V(geom, dt, d):
    tot = 0.0
    for x in d[1:]:
        bulk, surf = _dirichlet_energy(geom, x)
        tot += dt * (2 * (bulk + surf) + np.sum(geom.mass * x * x)
                     + np.sum(geom.bmass * x[geom.bnd] ** 2))
    return float(np.sqrt(tot))


def reduced_cost(problem, u):
    traj = solve_state(problem.geom, problem.y0, u, problem.pair, problem.config)
    return quadrature_cost(problem, traj, u)


def smooth_random_control(rng, geom, cfg, amplitude=0.3, modes=3, max_kx=2):
    """Random control built from a few low space-time cosine modes.

    Spatial wavenumbers along the boundary are drawn from ``0..max_kx``.
    """
    t = cfg.times[:, None] / cfg.T
    xb = geom.bnd_coords[:, 0][None, :] / geom.lx
    side = np.zeros(geom.nb)
    side[geom.nb // 2:] = 1.0
    u = np.zeros((cfg.nt + 1, geom.nb))
    for _ in range(modes):
        a = rng.uniform(-1, 1)
        kt, kx = rng.integers(0, 3), rng.integers(0, max_kx + 1)
        ph, s = rng.uniform(0, 2 * np.pi), rng.uniform(-1, 1)
        u += a * np.cos(np.pi * kt * t + 2 * np.pi * kx * xb + ph) * (1 + 0.5 * s * side)
    return amplitude * u / modes


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def fd_gradient_oracle(problem, u, h, eps_list=(1e-2, 1e-3, 1e-4, 1e-5), gradient=None,
                       tol=1e-6):
    """Central differences of the re-integrated reduced cost against ``<g, h>``.

    ``gradient`` overrides the adjoint gradient (used for fault injection).
    Passes when the best relative error is at most ``tol``; a zero direction
    passes trivially.
    """
    geom, dt = problem.geom, problem.dt
    u = problem.values(u)
    h = problem.values(h)
    g = reduced_gradient(problem, u).gradient if gradient is None else gradient
    pairing = _sigma_dot(geom, dt, g, h)

    def central(eps):
        return (reduced_cost(problem, u + eps * h) - reduced_cost(problem, u - eps * h)) / (2 * eps)

    fds = _map(central, eps_list) if np.any(h[1:]) else [0.0] * len(eps_list)
    rows = []
    for eps, fd in zip(eps_list, fds):
        denom = max(abs(fd), abs(pairing))
        err = abs(fd - pairing) / denom if denom > 0 else 0.0
        rows.append((float(eps), float(fd), float(pairing), float(err)))
    best = min(r[3] for r in rows)
    return SuiteResult(
        "gradient check", best <= tol,
        [f"best relative error {best:.3e} (tolerance {tol:.1e})"],
        ["eps", "central_difference", "adjoint_pairing", "relative_error"], rows, best)


def taylor_remainder_study(problem, u, h, eps_list=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3),
                           slope_range=(1.8, 2.2)):
    """Remainders ``max_n ||S(u + eps h) - S(u) - eps xi||_calH`` and their log-log slope."""
    geom, cfg = problem.geom, problem.config
    u = problem.values(u)
    h = problem.values(h)
    base = problem.solve(u)
    xi = solve_tangent(linearize(base), h).xi

    def remainder(eps):
        pert = problem.solve(u + eps * h)
        return _sup_calH(geom, pert.y - base.y - eps * xi)

    rem = np.array(_map(remainder, eps_list))
    rows = [(float(e), float(r)) for e, r in zip(eps_list, rem)]
    if not np.any(rem > 0):
        return SuiteResult("taylor remainder", True, ["all remainders vanish (linear map)"],
                           ["eps", "remainder"], rows, np.nan)
    slope = float(np.polyfit(np.log(eps_list), np.log(rem), 1)[0])
    ok = slope_range[0] <= slope <= slope_range[1]
    return SuiteResult(
        "taylor remainder", ok,
        [f"log-log slope {slope:.4f} (accepted range {slope_range[0]}..{slope_range[1]})"],
        ["eps", "remainder"], rows, slope)


def stability_study(problem, n_pairs=20, seed=0, amplitude=0.3, max_spread=10.0, max_kx=1):
    """Lipschitz ratios of the control-to-state map on random control pairs.

    The ratio depends on the direction of ``u1 - u2``: lateral diffusion damps
    oscillating boundary data, so the sample uses controls with spatial
    wavenumber at most ``max_kx`` along the boundary.
    """
    geom, cfg = problem.geom, problem.config
    rng = np.random.default_rng(seed)
    pairs = [(smooth_random_control(rng, geom, cfg, amplitude, max_kx=max_kx),
              smooth_random_control(rng, geom, cfg, amplitude, max_kx=max_kx))
             for _ in range(n_pairs)]

    def ratio(pair):
        u1, u2 = pair
        du = u1 - u2
        nu = np.sqrt(_sigma_dot(geom, cfg.dt, du, du))
        if nu == 0:
            return 0.0, 0.0, 0.0
        d = problem.solve(u1).y - problem.solve(u2).y
        return nu, _sup_calH(geom, d) / nu, _l2V(geom, cfg.dt, d) / nu

    out = _map(ratio, pairs)
    rows = [(k, float(a), float(b), float(c)) for k, (a, b, c) in enumerate(out)]
    r = np.array([x[2] for x in rows if x[1] > 0])
    spread = float(r.max() / r.min()) if r.size and r.min() > 0 else np.inf
    ok = bool(r.size and np.all(np.isfinite(r)) and spread <= max_spread)
    return SuiteResult(
        "stability", ok,
        [f"sup-calH ratios in [{r.min():.4e}, {r.max():.4e}], max/min = {spread:.3f} "
         f"(limit {max_spread})"],
        ["pair", "control_distance", "ratio_sup_calH", "ratio_L2V"], rows, spread)


def conservation_and_energy_suite(traj, require_dissipation=None, mass_tol=1e-11,
                                  energy_tol=1e-10):
    """Mass and energy histories recomputed by quadrature.

    Energy decay is required when ``require_dissipation`` is true; by default
    it is required for a zero control.
    """
    geom, pair = traj.geom, traj.pair
    mass = np.array([np.sum(geom.mass * y) / np.sum(geom.mass) for y in traj.y])
    energy = np.array([quadrature_energy(geom, pair, y) for y in traj.y])
    drift = float(np.max(np.abs(mass - mass[0])))
    rise = float(np.max(np.diff(energy), initial=-np.inf))
    if require_dissipation is None:
        require_dissipation = not np.any(traj.control[1:])
    ok_mass = drift <= mass_tol * (1 + abs(mass[0]))
    ok_energy = (rise <= energy_tol) if require_dissipation else True
    lines = [f"mass drift {drift:.3e} (tolerance {mass_tol:.0e} (1 + |m0|))",
             f"largest energy increase {rise:.3e}"
             + (f" (tolerance {energy_tol:.0e})" if require_dissipation else " (not required)")]
    if pair.singular:
        lo, hi = float(traj.y.min()), float(traj.y.max())
        g = traj.config.guard_delta
        ok_sep = lo >= -1 + g and hi <= 1 - g
        lines.append(f"range [{lo:.6f}, {hi:.6f}] inside guard band: {ok_sep}")
    else:
        ok_sep = True
    rows = [(float(t), float(m), float(e)) for t, m, e in zip(traj.t, mass, energy)]
    return SuiteResult("conservation and energy", bool(ok_mass and ok_energy and ok_sep),
                       lines, ["t", "mass", "energy"], rows, (drift, rise))


def optimality_certificate(report, problem, n_probes=100, seed=0, proj_tol=1e-6):
    """Re-derive the gradient at the final control and certify the VI.

    The adjoint is recomputed with the decoupled solver when the final-time
    weights vanish, otherwise with a fresh transposed sweep.
    """
    geom, cfg, cost = problem.geom, problem.config, problem.cost
    u = report.control.values
    traj = problem.solve(u)
    data = build_adjoint_data(traj, cost)
    coeffs = linearize(traj)
    if cost.bOmega == 0 and cost.bGamma == 0:
        adj, how = solve_adjoint_decoupled(coeffs, data), "decoupled"
    else:
        adj, how = solve_adjoint_transpose(coeffs, data), "transpose"
    g = adj.q_gamma + cost.b0 * u
    cert = check_vi(u, g, problem.box, geom, cfg.dt, n_probes=n_probes, seed=seed,
                    b0=cost.b0, proj_tol=proj_tol)
    lines = [f"adjoint recomputed with the {how} solver"] + cert.lines()
    lines.insert(1, f"optimizer converged: {report.converged}, stationarity "
                    f"{report.stationarity:.3e} (tolerance {report.stat_tol:.3e})")
    ok = bool(cert.passed and report.converged)
    return SuiteResult("optimality certificate", ok, lines, value=cert)


def random_adjoint_data(rng, geom, nt, final=True):
    """Random tracking residuals; the final-time ones vanish unless ``final``."""
    return AdjointData(rng.standard_normal((nt + 1, geom.n)),
                       rng.standard_normal((nt + 1, geom.nb)),
                       rng.standard_normal(geom.n) if final else np.zeros(geom.n),
                       rng.standard_normal(geom.nb) if final else np.zeros(geom.nb))


def duality_suite(problem, u, n_pairs=20, seed=0, tol=1e-10):
    """Adjoint duality on random (data, direction) pairs around ``S(u)``.

    The control pairing ``<q_G, h>`` is compared with the tracking pairing of
    the tangent, re-integrated here level by level.
    """
    geom, cfg = problem.geom, problem.config
    traj = problem.solve(u)
    coeffs = linearize(traj)
    rng = np.random.default_rng(seed)
    w = np.full(cfg.nt + 1, cfg.dt)
    w[0] = 0.0
    rows = []
    for k in range(n_pairs):
        data = random_adjoint_data(rng, geom, cfg.nt)
        h = rng.standard_normal((cfg.nt + 1, geom.nb))
        xi = solve_tangent(coeffs, h).xi
        qg = solve_adjoint_transpose(coeffs, data).q_gamma
        lhs = _sigma_dot(geom, cfg.dt, qg, h)
        rhs = sum(w[n] * (np.sum(geom.mass * data.phiQ[n] * xi[n])
                          + np.sum(geom.bmass * data.phiSigma[n] * xi[n][geom.bnd]))
                  for n in range(cfg.nt + 1))
        rhs += np.sum(geom.mass * data.phiOmega * xi[-1])
        rhs += np.sum(geom.bmass * data.phiGamma * xi[-1][geom.bnd])
        rel = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-30)
        rows.append((k, float(lhs), float(rhs), float(rel)))
    worst = max(r[3] for r in rows)
    return SuiteResult("adjoint duality", worst <= tol,
                       [f"worst relative residual {worst:.3e} over {n_pairs} pairs "
                        f"(tolerance {tol:.0e})"],
                       ["pair", "control_pairing", "tracking_pairing", "relative_residual"],
                       rows, worst)


def adjoint_agreement_suite(problem, u, n_samples=3, seed=0, tol=1e-8):
    """Decoupled versus transposed adjoint, sup-calH difference of ``p`` and ``q``."""
    geom, cfg = problem.geom, problem.config
    coeffs = linearize(problem.solve(u))
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(n_samples):
        data = random_adjoint_data(rng, geom, cfg.nt, final=False)
        a = solve_adjoint_transpose(coeffs, data)
        b = solve_adjoint_decoupled(coeffs, data)
        dq, dp = _sup_calH(geom, a.q - b.q), _sup_calH(geom, a.p - b.p)
        rows.append((k, dq, dp, _sup_calH(geom, a.p) + _sup_calH(geom, a.q)))
    worst = max(max(r[1], r[2]) for r in rows)
    return SuiteResult("adjoint agreement", worst <= tol,
                       [f"largest sup-calH difference {worst:.3e} (tolerance {tol:.0e}), "
                        "final-time weights zero"],
                       ["sample", "diff_q", "diff_p", "size"], rows, worst)


def zero_mean_suite(problem, u, seed=0, tol=1e-11):
    """Spatial means of a tangent and of an adjoint trajectory at every level."""
    geom, cfg = problem.geom, problem.config
    coeffs = linearize(problem.solve(u))
    rng = np.random.default_rng(seed)
    xi = solve_tangent(coeffs, rng.standard_normal((cfg.nt + 1, geom.nb))).xi
    q = solve_adjoint_transpose(coeffs, random_adjoint_data(rng, geom, cfg.nt)).q
    mx = np.abs(xi @ geom.mass) / geom.volume
    mq = np.abs(q @ geom.mass) / geom.volume
    rows = [(n, float(a), float(b)) for n, (a, b) in enumerate(zip(mx, mq))]
    worst = float(max(mx.max(), mq.max()))
    return SuiteResult("zero mean", worst <= tol,
                       [f"largest |mean| of xi and q: {mx.max():.3e}, {mq.max():.3e} "
                        f"(tolerance {tol:.0e})"],
                       ["level", "mean_xi", "mean_q"], rows, worst)
