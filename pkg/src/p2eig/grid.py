"""Uniform grids on intervals and rectangles with P1 / Q1 finite elements.

Unknowns live on interior nodes only; boundary values are the homogeneous
Dirichlet data and never stored.  Every nonlinear term is evaluated on a
fixed set of quadrature points: element midpoints on intervals (P1
gradients are element-wise constant) and 2x2 Gauss points on rectangles
(exact for the Q1 stiffness and mass forms).
"""

from __future__ import annotations

import json
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_GAUSS_2 = 0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)


def _axis_parts(a, b, n, npts):
    """Full (boundary-inclusive) 1D operators for one axis.

    Returns mass, stiffness, derivative-at-quadrature, value-at-quadrature
    and quadrature weights.  ``npts`` is 1 (midpoint) or 2 (Gauss).
    """
    h = (b - a) / n
    nodes = n + 1
    loc_m = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    loc_k = 1.0 / h * np.array([[1.0, -1.0], [-1.0, 1.0]])
    rows, cols, mv, kv = [], [], [], []
    for e in range(n):
        idx = (e, e + 1)
        for i in range(2):
            for j in range(2):
                rows.append(idx[i])
                cols.append(idx[j])
                mv.append(loc_m[i, j])
                kv.append(loc_k[i, j])
    mass = sp.csr_matrix((mv, (rows, cols)), shape=(nodes, nodes))
    stiff = sp.csr_matrix((kv, (rows, cols)), shape=(nodes, nodes))

    xi = (0.5,) if npts == 1 else _GAUSS_2
    nq = n * len(xi)
    drow, dcol, dval, erow, eval_ = [], [], [], [], []
    for e in range(n):
        for k, s in enumerate(xi):
            q = e * len(xi) + k
            drow += [q, q]
            dcol += [e, e + 1]
            dval += [-1.0 / h, 1.0 / h]
            erow += [q, q]
            eval_ += [1.0 - s, s]
    deriv = sp.csr_matrix((dval, (drow, dcol)), shape=(nq, nodes))
    value = sp.csr_matrix((eval_, (erow, dcol)), shape=(nq, nodes))
    weights = np.full(nq, h / len(xi))
    return mass, stiff, deriv, value, weights


class Grid:
    """Uniform tensor grid with homogeneous Dirichlet boundary.

    Parameters
    ----------
    dim : 1 or 2
    bounds : ``(a, b)`` for an interval or ``((a, b), (c, d))`` for a rectangle
    cells : cells per axis, an int or one int per axis

    The object is immutable; assembled operators are computed lazily and
    cached.
    """

    def __init__(self, dim, bounds, cells):
        if dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {dim!r}")
        bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        if bounds.shape[0] == 1 and dim == 2:
            bounds = np.vstack([bounds, bounds])
        if bounds.shape[0] != dim:
            raise ValueError(f"expected {dim} (a, b) pairs, got {bounds.tolist()}")
        cells = np.atleast_1d(np.asarray(cells))
        if cells.size == 1 and dim == 2:
            cells = np.repeat(cells, 2)
        if cells.size != dim:
            raise ValueError(f"expected {dim} cell counts, got {cells.tolist()}")
        for c in cells:
            if int(c) != c or c < 2:
                raise ValueError(f"cells per axis must be integers >= 2, got {cells.tolist()}")
        for a, b in bounds:
            if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
                raise ValueError(f"degenerate bounds ({a}, {b})")
        self.dim = int(dim)
        self.bounds = tuple((float(a), float(b)) for a, b in bounds)
        self.cells = tuple(int(c) for c in cells)
        self.h = tuple((b - a) / n for (a, b), n in zip(self.bounds, self.cells))

    # -- identity -----------------------------------------------------------

    def __repr__(self):
        return f"Grid(dim={self.dim}, bounds={self.bounds}, cells={self.cells})"

    def __eq__(self, other):
        return isinstance(other, Grid) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.dim, self.bounds, self.cells))

    def to_dict(self):
        bounds = list(self.bounds[0]) if self.dim == 1 else [list(b) for b in self.bounds]
        cells = self.cells[0] if self.dim == 1 else list(self.cells)
        return {"dim": self.dim, "bounds": bounds, "cells": cells}

    @classmethod
    def from_dict(cls, data):
        return cls(data["dim"], data["bounds"], data["cells"])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    # -- geometry -------------------------------------------------------------

    @property
    def measure(self):
        return float(np.prod([b - a for a, b in self.bounds]))

    @property
    def diameter(self):
        return float(np.sqrt(sum((b - a) ** 2 for a, b in self.bounds)))

    @cached_property
    def _axis_coords(self):
        return [np.linspace(a, b, n + 1) for (a, b), n in zip(self.bounds, self.cells)]

    @cached_property
    def node_coords(self):
        """All nodes (boundary included), shape ``(n_nodes, dim)``."""
        if self.dim == 1:
            return self._axis_coords[0][:, None]
        x, y = self._axis_coords
        X, Y = np.meshgrid(x, y, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def interior_index(self):
        """Global node index of each unknown slot."""
        if self.dim == 1:
            return np.arange(1, self.cells[0])
        nx, ny = self.cells
        i, j = np.meshgrid(np.arange(1, nx), np.arange(1, ny), indexing="ij")
        return (i * (ny + 1) + j).ravel()

    @property
    def interior_shape(self):
        return tuple(n - 1 for n in self.cells)

    @property
    def n_interior(self):
        return int(np.prod(self.interior_shape))

    @cached_property
    def interior_points(self):
        return self.node_coords[self.interior_index]

    @cached_property
    def elements(self):
        """Element connectivity (global node indices), 2 or 4 per element."""
        if self.dim == 1:
            n = self.cells[0]
            return np.column_stack([np.arange(n), np.arange(1, n + 1)])
        nx, ny = self.cells
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        i, j = i.ravel(), j.ravel()
        node = lambda a, b: a * (ny + 1) + b  # noqa: E731
        return np.column_stack([node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)])

    @cached_property
    def element_measures(self):
        return np.full(len(self.elements), float(np.prod(self.h)))

    # -- assembly ---------------------------------------------------------------

    @cached_property
    def _parts(self):
        npts = 1 if self.dim == 1 else 2
        return [_axis_parts(a, b, n, npts) for (a, b), n in zip(self.bounds, self.cells)]

    def _restrict(self, full):
        idx = self.interior_index
        return sp.csr_matrix(full.tocsr()[idx][:, idx])

    @cached_property
    def full_mass(self):
        if self.dim == 1:
            return self._parts[0][0]
        (mx, *_), (my, *_) = self._parts
        return sp.kron(mx, my, format="csr")

    @cached_property
    def full_stiffness(self):
        if self.dim == 1:
            return self._parts[0][1]
        (mx, kx, *_), (my, ky, *_) = self._parts
        return (sp.kron(kx, my) + sp.kron(mx, ky)).tocsr()

    @cached_property
    def mass(self):
        return self._restrict(self.full_mass)

    @cached_property
    def lumped_mass(self):
        rows = np.asarray(self.full_mass.sum(axis=1)).ravel()
        return sp.diags(rows[self.interior_index]).tocsr()

    @cached_property
    def stiffness(self):
        return self._restrict(self.full_stiffness)

    @cached_property
    def stiffness_lu(self):
        return spla.splu(self.stiffness.tocsc())

    @cached_property
    def grad_ops(self):
        """Per-axis sparse maps from interior values to gradient components
        at the quadrature points."""
        idx = self.interior_index
        if self.dim == 1:
            return (sp.csr_matrix(self._parts[0][2].tocsc()[:, idx]),)
        (_, _, dx, ex, _), (_, _, dy, ey, _) = self._parts
        gx = sp.kron(dx, ey, format="csc")[:, idx]
        gy = sp.kron(ex, dy, format="csc")[:, idx]
        return sp.csr_matrix(gx), sp.csr_matrix(gy)

    @cached_property
    def value_op(self):
        """Interpolated field values at the quadrature points."""
        idx = self.interior_index
        if self.dim == 1:
            return sp.csr_matrix(self._parts[0][3].tocsc()[:, idx])
        (_, _, _, ex, _), (_, _, _, ey, _) = self._parts
        return sp.csr_matrix(sp.kron(ex, ey, format="csc")[:, idx])

    @cached_property
    def quad_weights(self):
        if self.dim == 1:
            return self._parts[0][4]
        return np.kron(self._parts[0][4], self._parts[1][4])

    # -- per-grid caches that are pure functions of the grid ---------------------

    @cached_property
    def _eig_cache(self):
        return {}

    def check_field(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_interior,):
            raise ValueError(
                f"field has shape {u.shape}, grid expects ({self.n_interior},)")
        return u

    def full_values(self, u):
        """Nodal values including the zero boundary, reshaped to the node lattice."""
        u = self.check_field(u)
        out = np.zeros(len(self.node_coords))
        out[self.interior_index] = u
        if self.dim == 2:
            out = out.reshape(self.cells[0] + 1, self.cells[1] + 1)
        return out


def build_grid(dim, bounds, cells_per_axis):
    return Grid(dim, bounds, cells_per_axis)


def assemble_mass(grid, lumped=False):
    """Consistent (default) or row-sum lumped mass matrix on interior nodes."""
    return grid.lumped_mass if lumped else grid.mass


def assemble_stiffness(grid):
    return grid.stiffness


def element_gradients(grid, u):
    """Gradient of the interpolant at every quadrature point, shape ``(nq, dim)``.

    On an interval there is one point per element, so this is the
    element-wise constant P1 gradient.
    """
    u = grid.check_field(u)
    return np.column_stack([g @ u for g in grid.grad_ops])


def norms(grid, u, p, epsilon=0.0):
    """Discrete squared L2 and H1_0 norms plus the (regularized) p-Dirichlet integral."""
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    u = grid.check_field(u)
    grads = element_gradients(grid, u)
    s = np.einsum("qd,qd->q", grads, grads) + epsilon**2
    return {
        "l2_sq": float(u @ (grid.mass @ u)),
        "h1_sq": float(u @ (grid.stiffness @ u)),
        "p_dirichlet": float(grid.quad_weights @ s ** (p / 2.0)),
    }
