"""
Inverse of the Neumann Laplacian on zero-mean fields, and the scalar
mean-reconstruction operator used by the decoupled adjoint solver.

``apply_N(geom, v)`` returns the zero-mean ``u`` with ``K u = M v``, i.e.
``-Lap u = v`` with homogeneous Neumann data.  The solve is a preconditioned
conjugate-gradient iteration restricted to the zero-mean subspace: every
iterate and search direction is projected, so the constant kernel of ``K``
never enters.  The preconditioner is a sparse LU factorization of ``K + M``,
which is spectrally equivalent to ``K`` on that subspace.
"""
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotZeroMean, SolverDiverged, GeometryMismatch
from .grid import mean_value

_PRECOND_CACHE = {}


def _zero_mean_projector(geom):
    m, vol = geom.mass, geom.volume

    def project(u):
        return u - (m @ u) / vol

    def project_dual(r):
        # removes the component of a residual along M 1
        return r - m * (r.sum() / vol)

    return project, project_dual


def _neumann_preconditioner(geom):
    key = ("KM", geom)
    lu = _PRECOND_CACHE.get(key)
    if lu is None:
        A = sp.csc_matrix(geom.stiffness + sp.diags(geom.mass))
        lu = spla.splu(A)
        _PRECOND_CACHE[key] = lu
    return lu


def default_maxiter(geom):
    return int(20 * np.sqrt(geom.n) + 200)


def projected_pcg(apply_A, b, precond, project, project_dual, inv_mass, tol, maxiter, x0=None):
    """Conjugate gradients for ``A x = b`` on the subspace ``range(project)``.

    ``b`` is a dual (load) vector; convergence is declared when the residual,
    projected onto the dual of the subspace, satisfies
    ``sqrt(r . inv_mass . r) <= tol``.  Returns ``(x, residual_norm, iters)``.
    """
    x = np.zeros_like(b) if x0 is None else project(x0.copy())
    r = project_dual(b - apply_A(x))
    res = np.sqrt(r @ (inv_mass * r))
    if res <= tol:
        return x, res, 0
    z = project(precond(r))
    d = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ad = apply_A(d)
        dAd = d @ Ad
        if dAd <= 0:
            raise SolverDiverged(f"operator not positive on search direction (d.Ad={dAd:.3e})")
        alpha = rz / dAd
        x += alpha * d
        x = project(x)
        r = project_dual(r - alpha * Ad)
        res = np.sqrt(r @ (inv_mass * r))
        if res <= tol:
            return x, res, it
        z = project(precond(r))
        rz_new = r @ z
        d = project(z + (rz_new / rz) * d)
        rz = rz_new
    raise SolverDiverged(f"projected CG did not reach tol={tol:.1e} in {maxiter} iterations "
                         f"(residual {res:.3e})")


def check_zero_mean(geom, v):
    v = geom.check_bulk(v)
    if abs(mean_value(geom, v)) > 1e-11 * (np.abs(v).max(initial=0.0) + 1.0):
        raise NotZeroMean(f"field has mean {mean_value(geom, v):.3e}")
    return v


def apply_N(geom, v, tol=1e-11, maxiter=None):
    """Zero-mean solution ``u`` of ``-Lap u = v`` (Neumann), for zero-mean ``v``."""
    v = check_zero_mean(geom, v)
    if not np.any(v):
        return np.zeros(geom.n)
    project, project_dual = _zero_mean_projector(geom)
    lu = _neumann_preconditioner(geom)
    K = geom.stiffness
    u, _, _ = projected_pcg(
        lambda x: K @ x,
        geom.mass * v,
        lu.solve,
        project,
        project_dual,
        1.0 / geom.mass,
        tol,
        maxiter or default_maxiter(geom),
    )
    return project(u)


def dual_norm_sq(geom, v, tol=1e-11):
    """Squared dual seminorm: the integral of |grad N v|^2 = (v, N v)."""
    v = check_zero_mean(geom, v)
    return float(geom.mass @ (v * apply_N(geom, v, tol=tol)))


def apply_M(geom, q_traj, lambda_traj, phiQ_traj, phi_omega_mean, t_index, dt,
            neg_lap_integrals=None):
    """Mean-reconstruction history at time level ``t_index``.

    Evaluates

        phi_omega_mean - (1/|Omega|) * sum_{m > t_index} dt * I_m,
        I_m = int(-Lap q_m) + int(lambda_m q_m) - int(phiQ_m),

    the right-endpoint rectangle rule for the integral over (t, T).  The bulk
    integral of ``-Lap q_m`` equals minus the boundary integral of the outward
    flux; unless ``neg_lap_integrals`` supplies it per level it is computed from
    :func:`chcontrol.grid.normal_trace_flux`.
    """
    q = np.atleast_2d(q_traj)
    lam = np.atleast_2d(lambda_traj)
    phi = np.atleast_2d(phiQ_traj)
    if not (q.shape == lam.shape == phi.shape):
        raise GeometryMismatch("q, lambda and phiQ must share the time grid")
    geom.check_bulk(q)
    nlev = q.shape[0]
    if not 0 <= t_index < nlev:
        raise IndexError(f"t_index {t_index} outside 0..{nlev - 1}")
    m = slice(t_index + 1, nlev)
    if neg_lap_integrals is None:
        flux = (geom.flux_op @ q[m].T).T
        lap = -(flux @ geom.bmass)
    else:
        lap = np.asarray(neg_lap_integrals, dtype=float)[m]
    integrand = lap + (lam[m] * q[m]) @ geom.mass - phi[m] @ geom.mass
    return float(phi_omega_mean - dt * integrand.sum() / geom.volume)
