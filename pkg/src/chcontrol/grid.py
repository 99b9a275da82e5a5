"""
Discrete geometry of the bulk domain and its boundary.

Two layouts are supported:

``Interval1D``
    Omega = (0, lx) sampled at ``nx`` equispaced nodes.  The boundary consists
    of the two end nodes and carries the counting measure, so |Gamma| = 2 and
    the surface Laplacian vanishes identically.

``Strip2D``
    Omega = (0, lx) x (0, ly), periodic in x (``nx`` distinct columns) with
    ``ny`` rows in y including both walls.  Gamma is the pair of walls y = 0 and
    y = ly, each a periodic line; the surface Laplacian is the periodic second
    difference along x.

Fields are plain 1-D float arrays.  A bulk field has one entry per node
(``geom.n``); a boundary field has one entry per boundary node
(``geom.nb``).  Boundary nodes are a subset of the bulk nodes, so the trace of
a bulk field is ``f[geom.bnd]`` and a coupled pair ``(v, v_Gamma)`` is fully
described by the bulk array ``v``.

All discrete operators are built from the lumped (trapezoid) mass ``M``, the
stiffness ``K`` with ``f @ K @ g`` the discrete Dirichlet form, and the
boundary pair ``(G, K_Gamma)``.  These choices make the usual integration by
parts identities hold exactly, to rounding.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import GeometryMismatch

INTERVAL = "Interval1D"
STRIP = "Strip2D"


def _periodic_stiffness(n, h):
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    S = sp.diags([off, main, off], [-1, 0, 1], shape=(n, n), format="lil")
    S[0, n - 1] = -1.0
    S[n - 1, 0] = -1.0
    return (S.tocsr() / h)


def _neumann_stiffness(n, h):
    main = np.full(n, 2.0)
    main[0] = main[-1] = 1.0
    off = np.full(n - 1, -1.0)
    return sp.diags([off, main, off], [-1, 0, 1], shape=(n, n), format="csr") / h


def _trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class Geometry:
    """Uniform grid on Omega with boundary Gamma.

    Parameters
    ----------
    mode : {"Interval1D", "Strip2D"}
    nx : int
        Number of nodes along x (distinct periodic columns for ``Strip2D``).
    ny : int
        Number of rows along y, walls included (``Strip2D`` only).
    lx, ly : float
        Physical extents.
    """

    mode: str
    nx: int
    ny: int = 1
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.mode not in (INTERVAL, STRIP):
            raise ValueError(f"unknown geometry mode {self.mode!r}")
        if self.nx < 3:
            raise ValueError("nx must be >= 3")
        if self.mode == STRIP and self.ny < 3:
            raise ValueError("ny must be >= 3 for Strip2D")
        if self.lx <= 0 or (self.mode == STRIP and self.ly <= 0):
            raise ValueError("extents must be positive")
        if self.mode == INTERVAL:
            object.__setattr__(self, "ny", 1)

    # -- sizes and coordinates -------------------------------------------
    @property
    def hx(self):
        return self.lx / (self.nx - 1) if self.mode == INTERVAL else self.lx / self.nx

    @property
    def hy(self):
        return self.ly / (self.ny - 1) if self.mode == STRIP else 0.0

    @property
    def n(self):
        return self.nx * self.ny

    @property
    def nb(self):
        return 2 if self.mode == INTERVAL else 2 * self.nx

    @cached_property
    def coords(self):
        """Node coordinates, shape ``(n, dim)``."""
        x = np.arange(self.nx) * self.hx
        if self.mode == INTERVAL:
            return x[:, None]
        y = np.arange(self.ny) * self.hy
        X, Y = np.meshgrid(x, y)  # row j holds y_j
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def bnd(self):
        """Indices of boundary nodes (bottom wall first, then top wall)."""
        if self.mode == INTERVAL:
            return np.array([0, self.nx - 1])
        top = (self.ny - 1) * self.nx
        return np.concatenate([np.arange(self.nx), top + np.arange(self.nx)])

    @cached_property
    def bnd_coords(self):
        return self.coords[self.bnd]

    # -- quadrature ------------------------------------------------------
    @cached_property
    def mass(self):
        """Lumped bulk quadrature weights (one per node)."""
        if self.mode == INTERVAL:
            return _trapezoid_weights(self.nx, self.hx)
        wy = _trapezoid_weights(self.ny, self.hy)
        return np.kron(wy, np.full(self.nx, self.hx))

    @cached_property
    def bmass(self):
        """Boundary quadrature weights (one per boundary node)."""
        if self.mode == INTERVAL:
            return np.ones(2)
        return np.full(self.nb, self.hx)

    @cached_property
    def bmass_full(self):
        """Boundary weights scattered onto bulk nodes (zero in the interior)."""
        g = np.zeros(self.n)
        g[self.bnd] = self.bmass
        return g

    @property
    def volume(self):
        return float(self.mass.sum())

    @property
    def area(self):
        return float(self.bmass.sum())

    # -- sparse operators ------------------------------------------------
    @cached_property
    def stiffness(self):
        """Bulk stiffness: ``f @ K @ g`` is the discrete integral of grad f . grad g."""
        if self.mode == INTERVAL:
            return _neumann_stiffness(self.nx, self.hx)
        Wy = sp.diags(_trapezoid_weights(self.ny, self.hy))
        Kx = _periodic_stiffness(self.nx, self.hx)
        Ky = _neumann_stiffness(self.ny, self.hy)
        Wx = sp.identity(self.nx) * self.hx
        return sp.csr_matrix(sp.kron(Wy, Kx) + sp.kron(Ky, Wx))

    @cached_property
    def bstiffness(self):
        """Boundary stiffness for the surface gradient (zero on Interval1D)."""
        if self.mode == INTERVAL:
            return sp.csr_matrix((2, 2))
        Kx = _periodic_stiffness(self.nx, self.hx)
        return sp.csr_matrix(sp.block_diag([Kx, Kx]))

    @cached_property
    def trace_op(self):
        """Restriction P: bulk nodes -> boundary nodes, as a sparse matrix."""
        return sp.csr_matrix(
            (np.ones(self.nb), (np.arange(self.nb), self.bnd)), shape=(self.nb, self.n)
        )

    @cached_property
    def coupled_stiffness(self):
        """A = K + P^T K_Gamma P, the stiffness of the coupled Dirichlet form."""
        P = self.trace_op
        return sp.csr_matrix(self.stiffness + P.T @ self.bstiffness @ P)

    @cached_property
    def flux_op(self):
        """Second-order one-sided outward normal derivative, (nb, n) sparse."""
        rows, cols, vals = [], [], []
        if self.mode == INTERVAL:
            h, nx = self.hx, self.nx
            # outward normal is -x at node 0 and +x at node nx-1
            for r, (a, b, c) in enumerate([(0, 1, 2), (nx - 1, nx - 2, nx - 3)]):
                rows += [r] * 3
                cols += [a, b, c]
                vals += [1.5 / h, -2.0 / h, 0.5 / h]
        else:
            h, nx, ny = self.hy, self.nx, self.ny
            for i in range(nx):
                for r, (a, b, c) in (
                    (i, (i, nx + i, 2 * nx + i)),
                    (nx + i, ((ny - 1) * nx + i, (ny - 2) * nx + i, (ny - 3) * nx + i)),
                ):
                    rows += [r] * 3
                    cols += [a, b, c]
                    vals += [1.5 / h, -2.0 / h, 0.5 / h]
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.nb, self.n))

    # -- checks ----------------------------------------------------------
    def check_bulk(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape[-1] != self.n:
            raise GeometryMismatch(f"bulk field has {f.shape[-1]} entries, geometry has {self.n}")
        return f

    def check_boundary(self, g):
        g = np.asarray(g, dtype=float)
        if g.shape[-1] != self.nb:
            raise GeometryMismatch(
                f"boundary field has {g.shape[-1]} entries, geometry has {self.nb}"
            )
        return g

    def trace(self, f):
        return self.check_bulk(f)[..., self.bnd]

    def bulk_from_function(self, fun):
        """Sample ``fun(x)`` (1D) or ``fun(x, y)`` (2D) at the nodes."""
        c = self.coords
        return np.asarray(fun(*c.T), dtype=float) * np.ones(self.n)

    def boundary_from_function(self, fun):
        c = self.bnd_coords
        return np.asarray(fun(*c.T), dtype=float) * np.ones(self.nb)


# ---------------------------------------------------------------------------
# Quadrature and inner products
# ---------------------------------------------------------------------------

def integrate_interior(geom, f):
    return float(geom.mass @ geom.check_bulk(f))


def integrate_boundary(geom, g):
    return float(geom.bmass @ geom.check_boundary(g))


def mean_value(geom, f):
    """Spatial mean of a bulk field."""
    return integrate_interior(geom, f) / geom.volume


def dot_H(geom, f, g):
    return float(np.sum(geom.mass * (geom.check_bulk(f) * geom.check_bulk(g))))


def dot_HGamma(geom, f, g):
    return float(np.sum(geom.bmass * (geom.check_boundary(f) * geom.check_boundary(g))))


def dot_grad(geom, f, g):
    """Discrete integral of grad f . grad g over Omega."""
    return float(geom.check_bulk(f) @ (geom.stiffness @ geom.check_bulk(g)))


def dot_V(geom, f, g):
    """H^1(Omega) inner product."""
    return dot_H(geom, f, g) + dot_grad(geom, f, g)


def dot_calH(geom, u, uG, v, vG):
    """Product on L2(Omega) x L2(Gamma)."""
    return dot_H(geom, u, v) + dot_HGamma(geom, uG, vG)


def norm_calH(geom, f):
    """Norm of the coupled pair (f, f|Gamma)."""
    f = geom.check_bulk(f)
    return float(np.sqrt(dot_H(geom, f, f) + dot_HGamma(geom, f[geom.bnd], f[geom.bnd])))


# ---------------------------------------------------------------------------
# Differential operators
# ---------------------------------------------------------------------------

def neg_laplacian(geom, f, closure="neumann"):
    """Apply -Laplace to a bulk field.

    ``closure="neumann"`` is ``M^{-1} K``: the homogeneous Neumann (and, on the
    strip, periodic) operator.  It is symmetric with respect to the bulk
    quadrature, annihilates constants and has zero mean for every input.

    ``closure="free"`` keeps the interior stencil but replaces the normal
    second difference at boundary nodes by its one-sided extrapolation, so it
    is a consistent strong Laplacian up to the wall.  It is the operator paired
    with :func:`normal_trace_flux` in the Green identity.
    """
    f = geom.check_bulk(f)
    Kf = geom.stiffness @ f
    if closure == "neumann":
        return Kf / geom.mass
    if closure == "free":
        corr = np.zeros_like(Kf)
        corr[geom.bnd] = geom.bmass * (geom.flux_op @ f)
        return (Kf - corr) / geom.mass
    raise ValueError(f"unknown closure {closure!r}")


def normal_trace_flux(geom, f):
    """Outward normal derivative of a bulk field at the boundary nodes.

    Together with ``neg_laplacian(..., closure="free")`` this satisfies

        dot_H(-Lap f, v) + dot_HGamma(dn f, v|Gamma) = dot_grad(f, v)

    for every pair of bulk fields, exactly up to rounding.
    """
    return geom.flux_op @ geom.check_bulk(f)


def neg_laplace_beltrami(geom, g):
    """-Laplace-Beltrami on Gamma (identically zero on Interval1D)."""
    g = geom.check_boundary(g)
    return (geom.bstiffness @ g) / geom.bmass
