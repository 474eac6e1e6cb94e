"""Energies, weak residuals and structural identities of the (p,2)-Laplacian.

All fields are interior-node vectors on a :class:`~p2eig.grid.Grid`.  With
``A`` the stiffness matrix, ``M`` the consistent mass matrix and
``A_p(u)`` the assembled p-Laplacian flux, the discrete problem is

    A u + A_p(u) = lam * M u.

The p-terms use the smoothed weight ``(|grad u|^2 + eps^2)^((p-2)/2)``.
Nehari-manifold quantities always use the unsmoothed p-Dirichlet integral
so that the fibering scale is exactly homogeneous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, NotInCone
from .grid import norms


@dataclass(frozen=True)
class EnergySetting:
    """Exponent ``p``, eigenvalue parameter ``lam`` and smoothing ``epsilon``."""

    p: float
    lam: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.p > 1) or self.p == 2 or not np.isfinite(self.p):
            raise ValueError(f"p must lie in (1, 2) or (2, inf), got {self.p}")
        if not np.isfinite(self.lam):
            raise ValueError("lam must be finite")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")


@dataclass(frozen=True)
class NehariReport:
    constraint_value: float
    scale: float | None
    on_manifold: bool
    sign: int


# -- p-Laplacian building blocks -------------------------------------------------

def _gradients(grid, u):
    return [g @ u for g in grid.grad_ops]


def _safe_power(s, expo):
    """``s**expo`` with the convention 0 -> 0 (the limit of the flux weight times
    a vanishing gradient)."""
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = s[pos] ** expo
    return out


def p_flux(grid, u, p, epsilon=0.0):
    """Assembled ``A_p(u)``: the weak form of ``-div((|grad u|^2+eps^2)^((p-2)/2) grad u)``."""
    comps = _gradients(grid, u)
    s = sum(c * c for c in comps) + epsilon**2
    wphi = grid.quad_weights * _safe_power(s, (p - 2.0) / 2.0)
    out = np.zeros(grid.n_interior)
    for G, c in zip(grid.grad_ops, comps):
        out += G.T @ (wphi * c)
    return out


def p_hessian(grid, u, p, epsilon=0.0, floor=1e-12):
    """Jacobian of :func:`p_flux`.

    Where the smoothed gradient magnitude falls below ``floor * max|grad u|``
    the weight is evaluated at that floor instead, keeping the matrix finite
    for ``p < 2``; the residual itself is never floored.
    """
    comps = _gradients(grid, u)
    s = sum(c * c for c in comps) + epsilon**2
    smax = float(s.max()) if s.size else 0.0
    s_h = np.maximum(s, max(floor**2 * smax, 1e-300))
    phi = s_h ** ((p - 2.0) / 2.0)
    psi = (p - 2.0) * s_h ** ((p - 4.0) / 2.0)
    w = grid.quad_weights
    ops = grid.grad_ops
    H = None
    for a, Ga in enumerate(ops):
        for b, Gb in enumerate(ops):
            coef = psi * comps[a] * comps[b]
            if a == b:
                coef = coef + phi
            term = Ga.T @ sp.diags(w * coef) @ Gb
            H = term if H is None else H + term
    return H.tocsr()


def apply_operator(grid, u, p, epsilon=0.0):
    """Forward action ``A u + A_p(u)`` of ``-Delta_p - Delta``.

    ``p == 2`` is accepted here (both terms coincide, giving ``2 A u``).
    """
    u = grid.check_field(u)
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    return grid.stiffness @ u + p_flux(grid, u, p, epsilon)


def energy_F(grid, u, setting, convention="F"):
    """``F(u) = |u|_{1,2}^2/2 + P(u)/p - lam |u|_2^2/2``.

    ``convention="J"`` returns ``2 F``, the scaling used for the Nehari
    functional; both share critical points.
    """
    n = norms(grid, u, setting.p, setting.epsilon)
    F = 0.5 * n["h1_sq"] + n["p_dirichlet"] / setting.p - 0.5 * setting.lam * n["l2_sq"]
    if convention == "F":
        return F
    if convention == "J":
        return 2.0 * F
    raise ValueError(f"unknown convention {convention!r}")


def gradient_F(grid, u, setting):
    """Discrete weak residual ``A u + A_p(u) - lam M u``."""
    u = grid.check_field(u)
    return apply_operator(grid, u, setting.p, setting.epsilon) - setting.lam * (grid.mass @ u)


def hessian_F(grid, u, setting, floor=1e-12):
    return (grid.stiffness + p_hessian(grid, u, setting.p, setting.epsilon, floor)
            - setting.lam * grid.mass).tocsr()


# -- Nehari manifold ------------------------------------------------------------------

def _nehari_parts(grid, u, p):
    n = norms(grid, u, p, 0.0)
    return n["h1_sq"], n["p_dirichlet"], n["l2_sq"]


def nehari_residual(grid, u, setting, tol=1e-10):
    """Constraint value ``N(u) = |u|_{1,2}^2 + P(u) - lam |u|_2^2`` and its sign."""
    u = grid.check_field(u)
    H, P, L = _nehari_parts(grid, u, setting.p)
    N = H + P - setting.lam * L
    if not np.any(u):
        return NehariReport(constraint_value=0.0, scale=None, on_manifold=False, sign=0)
    on = abs(N) <= tol * (H + setting.lam * L)
    return NehariReport(constraint_value=float(N), scale=None, on_manifold=bool(on),
                        sign=int(np.sign(N)))


def nehari_scale(grid, u, setting, cone_tol=1e-10):
    """Scale ``t > 0`` with ``t u`` on the Nehari manifold.

    ``t = (P(u) / (lam |u|_2^2 - |u|_{1,2}^2)) ** (1 / (2 - p))``.  For
    ``p > 2`` the same formula gives the critical point of ``F`` along the
    ray through ``u``.
    """
    u = grid.check_field(u)
    p = setting.p
    H, P, L = _nehari_parts(grid, u, p)
    gap = setting.lam * L - H
    if not np.any(u) or gap <= cone_tol * max(H, setting.lam * L) or P <= 0:
        raise NotInCone(f"lam*|u|^2 - |grad u|^2 = {gap:.3e} is not positive")
    return float((P / gap) ** (1.0 / (2.0 - p)))


def nehari_project(grid, u, setting):
    return nehari_scale(grid, u, setting) * u


def nehari_tangent_residual(grid, u, setting):
    """Free gradient with its component along the constraint gradient removed."""
    g = gradient_F(grid, u, setting)
    A, M, p = grid.stiffness, grid.mass, setting.p
    c = 2.0 * (A @ u) + p * p_flux(grid, u, p, setting.epsilon) - 2.0 * setting.lam * (M @ u)
    cc = c @ c
    if cc == 0:
        return g
    return g - (g @ c) / cc * c


# -- Picone-type identity ------------------------------------------------------------------

def _picone_data(grid, u, v):
    u = grid.check_field(u)
    v = grid.check_field(v)
    if np.any(u <= 0) or np.any(v <= 0):
        raise DomainError("Picone identity needs strictly positive interior values")
    ubar = grid.value_op @ u
    vbar = grid.value_op @ v
    gu = np.column_stack(_gradients(grid, u))
    gv = np.column_stack(_gradients(grid, v))
    return vbar / ubar, gu, gv


def picone_I(grid, u, v, p):
    """Discrete ``I(u, v)`` from its four duality pairings.

    Ratio weights ``v/u`` are taken at the quadrature points (element
    midpoints in 1D), the gradients of the four test functions follow from
    the chain rule, so proportional fields give exactly zero.
    """
    t, gu, gv = _picone_data(grid, u, v)
    r = np.linalg.norm(gu, axis=1)
    s = np.linalg.norm(gv, axis=1)
    tc = t[:, None]
    d_beta = (1 + (p - 1) * tc**p) * gu - p * tc ** (p - 1) * gv
    d_xi = (1 + tc**2) * gu - 2 * tc * gv
    d_eta = (1 + (p - 1) * tc ** (-p)) * gv - p * tc ** (1 - p) * gu
    d_zeta = (1 + tc ** (-2)) * gv - 2 / tc * gu
    dot = lambda a, b: np.einsum("qd,qd->q", a, b)  # noqa: E731
    integrand = (_safe_power(r, p - 2) * dot(gu, d_beta) + dot(gu, d_xi)
                 + _safe_power(s, p - 2) * dot(gv, d_eta) + dot(gv, d_zeta))
    return float(grid.quad_weights @ integrand)


def picone_FG(grid, u, v, p):
    """Same quantity assembled from the non-negative split ``F + G``."""
    t, gu, gv = _picone_data(grid, u, v)
    r = np.linalg.norm(gu, axis=1)
    s = np.linalg.norm(gv, axis=1)
    RS = np.einsum("qd,qd->q", gu, gv)
    gap = r * s - RS
    F = (p * (t ** (p - 1) * _safe_power(r, p - 2) * gap
              + t ** (1 - p) * _safe_power(s, p - 2) * gap)
         + 2 * t * gap + 2 / t * gap)
    G = ((1 + (p - 1) * t**p) * r**p + (1 + (p - 1) * t ** (-p)) * s**p
         + (1 + t**2) * r**2 + (1 + t ** (-2)) * s**2
         - p * t ** (p - 1) * r ** (p - 1) * s - p * t ** (1 - p) * s ** (p - 1) * r
         - 2 * t * r * s - 2 / t * r * s)
    return float(grid.quad_weights @ F), float(grid.quad_weights @ G)


# -- pointwise vector inequalities --------------------------------------------------------

def working_constants(p):
    """Constants used by :func:`inequality_oracles`.

    ``c1 = 2**(2-p)`` is sharp (attained at ``x1 = -x2``), hence the
    companion constant ``R = 1/c1``.
    """
    if p > 2:
        return {"c1": 2.0 ** (2 - p), "c2": p - 1.0, "R": 2.0 ** (p - 2)}
    if 1 < p < 2:
        return {"C_prime": (p - 1.0) * 2.0 ** (p - 2)}
    raise ValueError(f"no inequality is stated for p = {p}")


def _vec_flux(x, p):
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    return _safe_power(n, p - 2) * x


def inequality_oracles(x1, x2, p, constants=None):
    """Both sides of the monotonicity / continuity inequalities for ``|x|^(p-2) x``.

    ``x1`` and ``x2`` have shape ``(..., d)``.  For ``p > 2`` the result holds
    ``lhs_i >= rhs_i``, ``lhs_ii <= rhs_ii`` and ``lhs_R >= rhs_R``;
    for ``1 < p < 2`` it holds ``lhs_sub >= rhs_sub``.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
        raise ValueError("vectors must be finite")
    c = dict(working_constants(p))
    if constants:
        c.update(constants)
    diff = x2 - x1
    dn = np.linalg.norm(diff, axis=-1)
    fdiff = _vec_flux(x2, p) - _vec_flux(x1, p)
    mono = np.einsum("...d,...d->...", diff, fdiff)
    nsum = np.linalg.norm(x1, axis=-1) + np.linalg.norm(x2, axis=-1)
    if p > 2:
        return {
            "lhs_i": mono, "rhs_i": c["c1"] * dn**p,
            "lhs_ii": np.linalg.norm(fdiff, axis=-1), "rhs_ii": c["c2"] * nsum ** (p - 2) * dn,
            "lhs_R": c["R"] * mono, "rhs_R": dn**p,
        }
    return {"lhs_sub": mono, "rhs_sub": c["C_prime"] * _safe_power(nsum, p - 2) * dn**2}
