"""Linear Dirichlet eigenpairs and nonlinear eigenpair solvers.

The first nonlinear eigenpair is computed variationally:

* ``p > 2``: global minimisation of ``F`` (coercive), Newton directions with
  an Armijo line search, falling back to the ``H^1_0`` gradient.
* ``1 < p < 2``: minimisation of ``F`` over the Nehari manifold.  Each trial
  point is rescaled onto the manifold (of the smoothed energy during the
  epsilon continuation), so the merit is the reduced energy.

Sign-changing critical points (saddles of ``F``) are located by
:func:`critical_point_search`, a damped Newton iteration on the weak
residual with deflation of already known solutions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import MaxIterations, NotInCone, TrustBallExceeded
from .functionals import (EnergySetting, apply_operator, energy_F, gradient_F, hessian_F,
                          nehari_residual, nehari_scale, p_flux, p_hessian)
from .grid import norms

log = logging.getLogger(__name__)

_DENSE_LIMIT = 400
_EPS = np.finfo(float).eps
# relative residual below which Newton is trusted to converge locally
_POLISH = 1e-5
# relative residual accepted when no step makes progress; for p < 2 without
# smoothing the flux is only Hoelder continuous where grad u vanishes
_STALL = 1e-7
_HESS_FLOORS = (1e-12, 1e-6, 1e-3)


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls shared by all nonlinear solves.

    ``tol`` is relative: a field is converged when ``|grad F(u)|`` is at
    most ``tol`` times the largest of ``|A u|``, ``|A_p(u)|`` and
    ``lam |M u|``, plus ``atol``.  ``epsilon_schedule`` lists the
    relative smoothing levels (times ``max |grad u|``) visited before the
    final solve at the setting's own ``epsilon`` when ``p < 2``.
    """

    max_iterations: int = 200
    tol: float = 1e-11
    atol: float = 1e-14
    armijo: float = 1e-4
    backtrack: float = 0.5
    seed: int | None = None
    perturbation: float = 0.25
    floor: float = 1e-6
    epsilon_schedule: tuple = (1e-2, 1e-4, 1e-6)
    record_history: bool = False

    def __post_init__(self):
        if self.tol <= 0 or self.atol < 0 or self.floor <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.armijo <= 0.5:
            raise ValueError("Armijo constant must lie in (0, 0.5]")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class EigenPair:
    lam: float
    u: np.ndarray
    residual: float
    energy: float
    nehari_gap: float
    p: float
    trivial: bool = False
    converged: bool = True
    iterations: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def nontrivial(self):
        return not self.trivial

    def to_dict(self, grid):
        return {
            "schema": 1,
            "p": self.p,
            "lambda": self.lam,
            "grid": grid.to_dict(),
            "values": [float(x) for x in self.u],
            "residual": self.residual,
            "energy": self.energy,
            "nehari_gap": self.nehari_gap,
            "sign_normalized": True,
            "trivial": self.trivial,
        }


# -- linear problem -----------------------------------------------------------------------

def _subspace_iteration(grid, k, tol=1e-11, maxit=1000):
    A, M = grid.stiffness, grid.mass
    lu = grid.stiffness_lu
    n = grid.n_interior
    m = min(n, max(2 * k, k + 8))
    X = np.random.default_rng(0).standard_normal((n, m))
    for _ in range(maxit):
        Y = lu.solve(M @ X)
        Ar = Y.T @ (A @ Y)
        Mr = Y.T @ (M @ Y)
        theta, Q = sla.eigh(0.5 * (Ar + Ar.T), 0.5 * (Mr + Mr.T))
        X = Y @ Q
        R = A @ X[:, :k] - (M @ X[:, :k]) * theta[:k]
        scale = np.linalg.norm(M @ X[:, :k], axis=0) * theta[:k]
        if np.all(np.linalg.norm(R, axis=0) <= tol * scale):
            return theta[:k], X[:, :k]
    raise MaxIterations(f"subspace iteration did not converge for k={k}")


def linear_eigs(grid, k, method="auto"):
    """The ``k`` smallest pairs of ``A e = lam M e``, ascending, M-orthonormal.

    ``method`` is ``"dense"``, ``"subspace"`` or ``"auto"`` (dense up to 400
    unknowns).  Each vector is signed so that its first clearly nonzero
    interior value is positive.
    """
    n = grid.n_interior
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if method == "auto":
        method = "dense" if n <= _DENSE_LIMIT else "subspace"
    cache = grid._eig_cache
    hit = cache.get(method)
    if hit is None or len(hit[0]) < k:
        # compute a fixed superset so results do not depend on call history
        if method == "dense":
            lam, vec = sla.eigh(grid.stiffness.toarray(), grid.mass.toarray())
        elif method == "subspace":
            lam, vec = _subspace_iteration(grid, min(n, max(k, 8)))
        else:
            raise ValueError(f"unknown method {method!r}")
        M = grid.mass
        for j in range(vec.shape[1]):
            e = vec[:, j] / np.sqrt(vec[:, j] @ (M @ vec[:, j]))
            big = np.flatnonzero(np.abs(e) > 1e-10 * np.abs(e).max())[0]
            vec[:, j] = e if e[big] > 0 else -e
        cache[method] = (lam, vec)
    lam, vec = cache[method]
    return [(float(lam[j]), vec[:, j].copy()) for j in range(k)]


def lambda_1(grid):
    return linear_eigs(grid, 1)[0][0]


# -- shared Newton machinery ---------------------------------------------------------------

def _newton_direction(H, g):
    try:
        d = -spla.splu(H.tocsc()).solve(g)
    except RuntimeError:
        return None
    return d if np.all(np.isfinite(d)) else None


def _residual_scale(grid, u, setting):
    """Size of the largest term in the weak residual (its rounding floor)."""
    return max(np.linalg.norm(grid.stiffness @ u),
               np.linalg.norm(p_flux(grid, u, setting.p, setting.epsilon)),
               abs(setting.lam) * np.linalg.norm(grid.mass @ u))


def _is_converged(grid, u, g, cfg, setting):
    return np.linalg.norm(g) <= cfg.tol * _residual_scale(grid, u, setting) + cfg.atol


def _l2(grid, u):
    return float(np.sqrt(max(u @ (grid.mass @ u), 0.0)))


def _floor(grid, cfg):
    return cfg.floor * np.sqrt(grid.measure)


def one_mode_scale(grid, p, lam, k=1):
    """Amplitude ``r`` with ``r * e_k`` stationary for ``F`` along its ray,
    ``r**(p-2) = (lam - lam_k) / P(e_k)``; ``None`` when ``lam <= lam_k``."""
    lam_k, e_k = linear_eigs(grid, k)[k - 1]
    kappa = norms(grid, e_k, p)["p_dirichlet"]
    if lam <= lam_k:
        return None
    return float(((lam - lam_k) / kappa) ** (1.0 / (p - 2.0)))


def _radial_scale(grid, u, setting):
    """Scale ``t`` with ``<grad F(t u), u> = 0`` for the smoothed energy.

    Without smoothing this is :func:`nehari_scale`.  With ``epsilon > 0`` and
    ``p < 2`` the map ``t -> <grad F(t u), u> / t`` is strictly decreasing, so
    the root is unique and bracketed around the unsmoothed scale.
    """
    t0 = nehari_scale(grid, u, setting)
    if setting.epsilon == 0:
        return t0
    s = sum((G @ u) ** 2 for G in grid.grad_ops)
    w = grid.quad_weights
    H = u @ (grid.stiffness @ u)
    lamL = setting.lam * (u @ (grid.mass @ u))
    ex = (setting.p - 2.0) / 2.0

    def phi(logt):
        t2 = np.exp(2.0 * logt)
        return H - lamL + w @ ((t2 * s + setting.epsilon**2) ** ex * s)

    lo = hi = np.log(t0)
    if phi(lo) <= 0:
        # smoothing only lowers the p-weight, so the root lies below t0
        while phi(lo) <= 0:
            lo -= 1.0
            if lo < np.log(t0) - 60:
                raise NotInCone("no radial critical point for the smoothed energy")
    else:
        while phi(hi) > 0:
            hi += 1.0
    return float(np.exp(brentq(phi, lo, hi, xtol=1e-15, rtol=4 * _EPS)))


def _reduced_energy(grid, u, setting):
    """``F`` at a radially critical point, ``P_eps(u)/p - sum w phi_eps |grad u|^2 / 2``.

    Equal to ``energy_F`` there, but free of the cancellation between the
    quadratic terms, which dominates for large fields.
    """
    s = sum((G @ u) ** 2 for G in grid.grad_ops)
    se = s + setting.epsilon**2
    w = grid.quad_weights
    P = w @ se ** (setting.p / 2.0)
    return float(P / setting.p - 0.5 * (w @ (_pos_power(se, (setting.p - 2.0) / 2.0) * s)))


def _pos_power(x, e):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] ** e
    return out


def _descend(grid, u, setting, cfg, nehari, history, tol=None):
    """Energy descent with Newton acceleration; returns ``(u, iterations)``.

    With ``nehari`` every trial point is rescaled onto the Nehari manifold.
    """
    if tol is not None:
        cfg = replace(cfg, tol=tol)
    A_lu = grid.stiffness_lu
    floor = _floor(grid, cfg)
    if nehari:
        merit = lambda w: _reduced_energy(grid, w, setting)  # noqa: E731
    else:
        merit = lambda w: energy_F(grid, w, setting)  # noqa: E731
    f = merit(u)
    for it in range(cfg.max_iterations):
        g = gradient_F(grid, u, setting)
        gn = np.linalg.norm(g)
        if _is_converged(grid, u, g, cfg, setting):
            return u, it
        if not nehari and _l2(grid, u) < floor:
            return u, it
        if cfg.record_history:
            history.append(u.copy())
        polishing = gn <= _POLISH * _residual_scale(grid, u, setting)
        dirs = []
        # for p < 2 the Hessian weight blows up where grad u nearly vanishes;
        # larger floors give slower but more robust Newton-like directions
        for fl in (_HESS_FLOORS if setting.p < 2 else _HESS_FLOORS[:1]):
            d = _newton_direction(hessian_F(grid, u, setting, fl), g)
            if d is not None and g @ d < -1e-12 * gn * np.linalg.norm(d):
                dirs.append(d)
        dirs.append(-A_lu.solve(g))
        for d in dirs:
            slope = g @ d
            alpha = 1.0
            accepted = None
            while alpha > 1e-12:
                trial = u + alpha * d
                if nehari:
                    try:
                        trial = _radial_scale(grid, trial, setting) * trial
                    except NotInCone:
                        alpha *= cfg.backtrack
                        continue
                ft = merit(trial)
                if ft <= f + cfg.armijo * alpha * slope:
                    accepted = trial, ft
                    break
                # near convergence the energy is flat to rounding; a
                # residual decrease is then the meaningful progress measure
                if polishing or ft <= f + 1024 * _EPS * (abs(f) + 1.0):
                    if np.linalg.norm(gradient_F(grid, trial, setting)) < gn:
                        accepted = trial, ft
                        break
                alpha *= cfg.backtrack
            if accepted is not None:
                u, f = accepted
                break
        else:
            if gn <= _STALL * _residual_scale(grid, u, setting):
                # no step improves the residual: rounding floor reached
                return u, it
            raise MaxIterations(f"line search failed at iteration {it}, |g|={gn:.3e}", last=u,
                                iterations=it)
    g = gradient_F(grid, u, setting)
    if _is_converged(grid, u, g, cfg, setting):
        return u, cfg.max_iterations
    raise MaxIterations(f"no convergence in {cfg.max_iterations} iterations, "
                        f"|g|={np.linalg.norm(g):.3e}", last=u, iterations=cfg.max_iterations)


def _grad_scale(grid, u):
    return float(max(np.abs(G @ u).max() for G in grid.grad_ops))


def _pair(grid, u, setting, iterations, history, trivial=False):
    g = gradient_F(grid, u, setting)
    rep = nehari_residual(grid, u, setting)
    return EigenPair(lam=setting.lam, u=u, residual=float(np.linalg.norm(g)),
                     energy=energy_F(grid, u, setting), nehari_gap=rep.constraint_value,
                     p=setting.p, trivial=trivial, iterations=iterations, history=history)


def _trivial(grid, setting, iterations=0, history=None):
    u = np.zeros(grid.n_interior)
    return EigenPair(lam=setting.lam, u=u, residual=0.0, energy=energy_F(grid, u, setting),
                     nehari_gap=0.0, p=setting.p, trivial=True, iterations=iterations,
                     history=history or [])


def _perturbed_mode(grid, cfg, lam):
    """``e_1`` plus a seeded random combination of the next few modes."""
    k = min(6, grid.n_interior)
    pairs = linear_eigs(grid, k)
    e1 = pairs[0][1]
    if cfg.seed is None or k == 1:
        return e1
    rng = np.random.default_rng(cfg.seed)
    c = rng.standard_normal(k - 1)
    xi = sum(ci * e for ci, (_, e) in zip(c, pairs[1:]))
    xi /= np.linalg.norm(c)
    delta = cfg.perturbation
    # shrink the perturbation until the Rayleigh quotient leaves room below lam
    while delta > 1e-6:
        w = e1 + delta * xi
        if (w @ (grid.stiffness @ w)) < lam * (w @ (grid.mass @ w)) or lam <= pairs[0][0]:
            return w
        delta *= 0.5
    return e1


def _normalize_sign(grid, u):
    return u if np.sum(grid.mass @ u) >= 0 else -u


def solve_first(grid, setting, config=None, initial=None):
    """First (one-signed) eigenpair at ``setting.lam``, or the trivial verdict.

    Returns an :class:`EigenPair`; ``trivial`` is set when no nontrivial
    solution exists on this grid (``lam <= lam_1``): for ``p > 2`` the global
    minimiser falls below the nontriviality floor, for ``p < 2`` the Nehari
    manifold is empty.
    """
    cfg = config or SolverConfig()
    if not setting.lam > 0:
        raise ValueError("lam must be positive")
    p, lam = setting.p, setting.lam
    history = []
    lam1, e1 = linear_eigs(grid, 1)[0]
    kappa = norms(grid, e1, p)["p_dirichlet"]

    if initial is not None:
        u = grid.check_field(initial).copy()
    else:
        u = _perturbed_mode(grid, cfg, lam)
        if lam > lam1:
            r = ((lam - lam1) / kappa) ** (1.0 / (p - 2.0))
            u = min(r, 1e3) * u
    if p > 2:
        u, its = _descend(grid, u, setting, cfg, nehari=False, history=history)
        if _l2(grid, u) < _floor(grid, cfg):
            return _trivial(grid, setting, its, history)
        return _pair(grid, _normalize_sign(grid, u), setting, its, history)

    try:
        u = nehari_scale(grid, u, setting) * u
    except NotInCone:
        try:
            u = nehari_scale(grid, e1, setting) * e1
        except NotInCone:
            log.info("Nehari manifold empty at lam=%g (lam_1=%g)", lam, lam1)
            return _trivial(grid, setting, 0, history)
    total = 0
    for rel in cfg.epsilon_schedule:
        eps = rel * _grad_scale(grid, u)
        if eps <= setting.epsilon:
            continue
        stage = replace(setting, epsilon=eps)
        u = _radial_scale(grid, u, stage) * u
        try:
            u, its = _descend(grid, u, stage, cfg, nehari=True, history=history, tol=1e-6)
        except MaxIterations as exc:
            # smoothing stages only provide a warm start
            u, its = exc.last, exc.iterations
        total += its
    u = _radial_scale(grid, u, setting) * u
    u, its = _descend(grid, u, setting, cfg, nehari=True, history=history)
    return _pair(grid, _normalize_sign(grid, u), setting, total + its, history)


# -- saddle points -----------------------------------------------------------------------

class _Deflation:
    """Multiplicative deflation ``prod_i (1/d_i(u) + shift)`` with relative
    squared L2 distances ``d_i``."""

    def __init__(self, grid, known, scale, shift=1.0):
        self.M = grid.mass
        self.known = [(k, max(_l2(grid, k), scale) ** 2) for k in known]
        self.shift = shift

    def log_factor(self, u):
        out = 0.0
        for k, s2 in self.known:
            d = u - k
            out += np.log(s2 / max(d @ (self.M @ d), 1e-300) + self.shift)
        return out

    def grad_log(self, u):
        out = np.zeros_like(u)
        for k, s2 in self.known:
            diff = u - k
            Md = self.M @ diff
            di = max(diff @ Md, 1e-300) / s2
            out += (-2.0 * Md / s2 / di**2) / (1.0 / di + self.shift)
        return out


def critical_point_search(grid, u0, setting, config=None, deflate=(), nehari=None,
                          shift=1.0):
    """Damped Newton iteration for ``grad F(u) = 0`` started at ``u0``.

    Each field in ``deflate`` (and its negative) is deflated, as is zero when
    ``nehari`` is off.  Returns ``(u, iterations)`` or ``None`` if the
    iteration fails; convergence to a critical point is not guaranteed.
    """
    cfg = config or SolverConfig()
    nehari = setting.p < 2 if nehari is None else nehari
    u = grid.check_field(u0).copy()
    known = []
    for k in deflate:
        known += [k, -k]
    if not nehari:
        known.append(np.zeros_like(u))
    defl = _Deflation(grid, known, _l2(grid, u), shift) if known else None
    if nehari:
        try:
            u = nehari_scale(grid, u, setting) * u
        except NotInCone:
            return None

    def merit(w):
        g = gradient_F(grid, w, setting)
        m = np.linalg.norm(g)
        if defl is not None:
            m *= np.exp(defl.log_factor(w))
        return m, g

    m, g = merit(u)
    for it in range(cfg.max_iterations):
        if _is_converged(grid, u, g, cfg, setting):
            if _l2(grid, u) < _floor(grid, cfg):
                return None
            return u, it
        d = _newton_direction(hessian_F(grid, u, setting), g)
        if d is None:
            return None
        if defl is not None:
            denom = 1.0 - defl.grad_log(u) @ d
            if denom != 0 and np.isfinite(denom):
                d = d / denom
        alpha, step = 1.0, None
        while alpha > 1e-10:
            trial = u + alpha * d
            if nehari:
                try:
                    trial = nehari_scale(grid, trial, setting) * trial
                except NotInCone:
                    alpha *= cfg.backtrack
                    continue
            mt, gt = merit(trial)
            if mt < (1.0 - cfg.armijo * alpha) * m:
                step = trial, mt, gt
                break
            alpha *= cfg.backtrack
        if step is None:
            return None
        u, m, g = step
    return None


# -- inverse operator and fixed-point map ----------------------------------------------------

def trust_radius(grid, p):
    """Radius of the ball where the norm-weighted operator is strongly monotone
    with margin at least 1/2.

    The constant comes from discrete Hoelder: ``sum w|g|^p <= meas^(1-p/2) |u|_{1,2}^p``.
    """
    c_prime = (4.0 - p) * grid.measure ** (1.0 - p / 2.0)
    return float(np.sqrt(0.5 / c_prime))


def _h12(grid, u):
    return float(np.sqrt(max(u @ (grid.stiffness @ u), 0.0)))


def _inverse_plain(grid, f, p, cfg, epsilon):
    A = grid.stiffness
    u = grid.stiffness_lu.solve(f)
    fnorm = np.linalg.norm(f)

    def energy(w):
        return 0.5 * w @ (A @ w) + norms(grid, w, p, epsilon)["p_dirichlet"] / p - f @ w

    e = energy(u)
    for it in range(cfg.max_iterations):
        r = apply_operator(grid, u, p, epsilon) - f
        rn = np.linalg.norm(r)
        if rn <= cfg.tol * max(fnorm, 1.0) + cfg.atol:
            return u
        H = (A + p_hessian(grid, u, p, epsilon)).tocsr()
        d = _newton_direction(H, r)
        if d is None or r @ d >= 0:
            d = -grid.stiffness_lu.solve(r)
        alpha, moved = 1.0, False
        while alpha > 1e-12:
            trial = u + alpha * d
            et = energy(trial)
            if et <= e + cfg.armijo * alpha * (r @ d) or (
                    et <= e + 64 * _EPS * (abs(e) + 1.0)
                    and np.linalg.norm(apply_operator(grid, trial, p, epsilon) - f) < rn):
                u, e, moved = trial, et, True
                break
            alpha *= cfg.backtrack
        if not moved:
            break
    raise MaxIterations("inverse solve did not converge", last=u)


def _weighted_operator(grid, w, p, epsilon):
    n = _h12(grid, w)
    return n ** (4.0 - p) * p_flux(grid, w, p, epsilon) + grid.stiffness @ w


def _inverse_weighted(grid, f, p, cfg, epsilon):
    r_trust = trust_radius(grid, p)
    A = grid.stiffness
    w = grid.stiffness_lu.solve(f)
    # <T(w), w> >= |w|^2 bounds the solution norm by the dual norm of f
    if np.sqrt(max(f @ w, 0.0)) >= r_trust:
        raise TrustBallExceeded(f"|f|_* = {np.sqrt(max(f @ w, 0.0)):.3e} >= trust radius "
                                f"{r_trust:.3e}")
    fnorm = np.linalg.norm(f)
    for it in range(cfg.max_iterations):
        res = _weighted_operator(grid, w, p, epsilon) - f
        rn = np.linalg.norm(res)
        if rn <= cfg.tol * max(fnorm, 1.0) + cfg.atol:
            return w
        n = _h12(grid, w)
        B = (A + n ** (4.0 - p) * p_hessian(grid, w, p, epsilon)).tocsc()
        lu = spla.splu(B)
        a = (4.0 - p) * n ** (2.0 - p) * p_flux(grid, w, p, epsilon)
        b = A @ w
        Bi_r, Bi_a = lu.solve(res), lu.solve(a)
        d = -(Bi_r - Bi_a * (b @ Bi_r) / (1.0 + b @ Bi_a))
        alpha = 1.0
        while alpha > 1e-12:
            trial = w + alpha * d
            if np.linalg.norm(_weighted_operator(grid, trial, p, epsilon) - f) < (
                    1 - cfg.armijo * alpha) * rn:
                w = trial
                break
            alpha *= cfg.backtrack
        else:
            break
    raise MaxIterations("weighted inverse solve did not converge", last=w)


def inverse_solve(grid, f, p, config=None, epsilon=0.0, weighted=False):
    """Solve ``A u + A_p(u) = f`` (strongly monotone, any ``p > 1``).

    With ``weighted=True`` (``1 < p < 2`` only) the operator is instead
    ``|u|_{1,2}^(4-p) A_p(u) + A u``, invertible only on a small ball;
    right-hand sides that may leave it raise :class:`TrustBallExceeded`.
    """
    cfg = config or SolverConfig()
    f = grid.check_field(f)
    if not np.any(f):
        return np.zeros_like(f)
    if weighted:
        if not 1 < p < 2:
            raise ValueError("the norm-weighted operator is defined for 1 < p < 2")
        return _inverse_weighted(grid, f, p, cfg, epsilon)
    return _inverse_plain(grid, f, p, cfg, epsilon)


def s_map(grid, u, setting, config=None, weighted=False):
    """``u - lam * (-Delta_p - Delta)^{-1} (M u)``; zero exactly at eigenpairs."""
    u = grid.check_field(u)
    return u - inverse_solve(grid, setting.lam * (grid.mass @ u), setting.p, config,
                             setting.epsilon, weighted=weighted)


# -- rescaling for 1 < p < 2 -----------------------------------------------------------------

def _check_sub2(p):
    if not 1 < p < 2:
        raise ValueError("the norm rescaling is defined for 1 < p < 2")


def transform_to_v(grid, u, p):
    """``v = u / |u|_{1,2}^(2 - p/2)``, so ``|v|_{1,2} = |u|_{1,2}^(p/2 - 1)``."""
    _check_sub2(p)
    u = grid.check_field(u)
    n = _h12(grid, u)
    if n == 0:
        raise ValueError("cannot rescale the zero field")
    return u / n ** (2.0 - p / 2.0)


def transform_to_u(grid, v, p):
    """Inverse of :func:`transform_to_v`: ``u = v |v|_{1,2}^((4-p)/(p-2))``."""
    _check_sub2(p)
    v = grid.check_field(v)
    n = _h12(grid, v)
    if n == 0:
        raise ValueError("cannot rescale the zero field")
    return v * n ** ((4.0 - p) / (p - 2.0))


def transformed_residual(grid, v, setting):
    """Weak residual of ``-|v|^(4-p) Delta_p v - Delta v = lam v``."""
    _check_sub2(setting.p)
    v = grid.check_field(v)
    if not np.any(v):
        raise ValueError("transformed residual needs a nonzero field")
    return _weighted_operator(grid, v, setting.p, setting.epsilon) - setting.lam * (grid.mass @ v)


def default_epsilon(grid):
    return 1e-8 / grid.diameter


__all__ = [
    "EigenPair", "EnergySetting", "SolverConfig", "critical_point_search", "default_epsilon",
    "inverse_solve", "lambda_1", "linear_eigs", "one_mode_scale", "s_map", "solve_first",
    "transform_to_u", "transform_to_v", "transformed_residual", "trust_radius",
]
