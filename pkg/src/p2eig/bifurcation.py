"""Natural-parameter continuation of the first branch and its asymptotics at lam_1.

For ``p > 2`` the branch leaves zero at ``lam_1`` (norms shrink as ``lam``
decreases to ``lam_1``); for ``1 < p < 2`` it comes in from infinity.  The
one-mode reduction ``F(r e_1) = r^2 (lam_1 - lam) / 2 + r^p P(e_1) / p``
predicts ``|u|_2 ~ ((lam - lam_1) / P(e_1)) ** (1 / (p - 2))``, which is
what :func:`fit_scaling` measures.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousTrend, ContinuationStall, InsufficientPoints, MaxIterations, NotInCone
from .functionals import EnergySetting, energy_F, gradient_F
from .grid import norms
from .solver import (SolverConfig, critical_point_search, lambda_1, linear_eigs, solve_first,
                     transform_to_v)

log = logging.getLogger(__name__)

CSV_HEADER = ("lambda", "l2_norm", "h12_norm", "energy", "residual", "iterations")


@dataclass
class BranchPoint:
    lam: float
    l2_norm: float
    h12_norm: float
    energy: float
    residual: float
    iterations: int
    u: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_field(cls, grid, u, setting, iterations=0):
        n = norms(grid, u, setting.p)
        return cls(lam=setting.lam, l2_norm=float(np.sqrt(n["l2_sq"])),
                   h12_norm=float(np.sqrt(n["h1_sq"])), energy=energy_F(grid, u, setting),
                   residual=float(np.linalg.norm(gradient_F(grid, u, setting))),
                   iterations=int(iterations), u=u)

    def row(self):
        return (self.lam, self.l2_norm, self.h12_norm, self.energy, self.residual, self.iterations)


@dataclass
class Branch:
    """Ordered samples of one branch; ``capped`` lists parameters skipped by the norm guard."""

    p: float
    lambda_1: float
    points: list = field(default_factory=list)
    capped: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def lambdas(self):
        return np.array([pt.lam for pt in self.points])

    @property
    def l2_norms(self):
        return np.array([pt.l2_norm for pt in self.points])

    @property
    def h12_norms(self):
        return np.array([pt.h12_norm for pt in self.points])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for pt in self.points:
            w.writerow(["%.17g" % x for x in pt.row()[:-1]] + [str(pt.iterations)])
        return buf.getvalue()


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple

    def kappa(self, p):
        """``P(e_1)`` implied by the intercept under the one-mode law."""
        return float(np.exp(-self.intercept * (p - 2.0)))


class Bifurcation(enum.Enum):
    FROM_ZERO = "FromZero"
    FROM_INFINITY = "FromInfinity"


@dataclass(frozen=True)
class NoBranchFound:
    p: float
    k: int
    lam: float
    reason: str

    def __bool__(self):
        return False


def _predict(prev, lam, lam1, p):
    ratio = ((lam - lam1) / (prev.lam - lam1)) ** (1.0 / (p - 2.0))
    return ratio * prev.u


def _solve_point(grid, p, lam, epsilon, cfg, initial):
    setting = EnergySetting(p, lam, epsilon)
    pair = solve_first(grid, setting, cfg, initial=initial)
    if pair.trivial:
        raise MaxIterations(f"trivial solution at lam={lam}")
    return BranchPoint.from_field(grid, pair.u, setting, pair.iterations)


def trace_branch(grid, p, lambda_values, config=None, epsilon=0.0, norm_cap=1e6):
    """Solve the first eigenproblem along increasing ``lambda_values``.

    Each solve is warm-started from the previous field scaled by the
    one-mode ratio.  A failed step is retried once through the midpoint;
    a second failure raises :class:`ContinuationStall` carrying the branch
    so far.  For ``p < 2``, parameters whose predicted ``|u|_{1,2}`` exceeds
    ``norm_cap`` are skipped and listed in ``Branch.capped``.
    """
    cfg = config or SolverConfig()
    lams = np.asarray(lambda_values, dtype=float)
    lam1 = lambda_1(grid)
    if lams.ndim != 1 or len(lams) == 0:
        raise ValueError("lambda_values must be a non-empty sequence")
    if np.any(np.diff(lams) <= 0):
        raise ValueError("lambda_values must be strictly increasing")
    if lams[0] <= lam1:
        raise ValueError(f"all lambda values must exceed lam_1 = {lam1:.12g}")
    branch = Branch(p=p, lambda_1=lam1)
    e1 = linear_eigs(grid, 1)[0][1]
    kappa = norms(grid, e1, p)["p_dirichlet"]
    h1_e1 = float(np.sqrt(e1 @ (grid.stiffness @ e1)))
    prev = None
    for lam in lams:
        if p < 2:
            predicted = ((lam - lam1) / kappa) ** (1.0 / (p - 2.0)) * h1_e1
            if predicted > norm_cap:
                log.info("skipping lam=%.6g: predicted |u|_{1,2}=%.3e above cap", lam, predicted)
                branch.capped.append(float(lam))
                continue
        guess = None if prev is None else _predict(prev, lam, lam1, p)
        try:
            pt = _solve_point(grid, p, lam, epsilon, cfg, guess)
        except (MaxIterations, NotInCone) as exc:
            if prev is None:
                raise ContinuationStall(f"first point failed at lam={lam}: {exc}",
                                        branch=branch, lam=float(lam)) from exc
            mid = 0.5 * (prev.lam + lam)
            try:
                half = _solve_point(grid, p, mid, epsilon, cfg, _predict(prev, mid, lam1, p))
                pt = _solve_point(grid, p, lam, epsilon, cfg, _predict(half, lam, lam1, p))
            except (MaxIterations, NotInCone) as exc2:
                raise ContinuationStall(f"continuation stalled at lam={lam}: {exc2}",
                                        branch=branch, lam=float(lam)) from exc2
        branch.points.append(pt)
        prev = pt
    return branch


def fit_scaling(branch, lambda_1, norm="l2"):
    """Least-squares line through ``(log(lam - lam_1), log |u|)``."""
    pts = list(branch)
    if len(pts) < 5:
        raise InsufficientPoints(f"need at least 5 branch points, got {len(pts)}")
    lam = np.array([pt.lam for pt in pts])
    if np.any(lam <= lambda_1):
        raise ValueError("all branch parameters must exceed lambda_1")
    y = np.array([pt.l2_norm if norm == "l2" else pt.h12_norm for pt in pts])
    x = np.log(lam - lambda_1)
    ly = np.log(y)
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    window = (float((lam - lambda_1).min()), float((lam - lambda_1).max()))
    return ScalingFit(float(slope), float(intercept), float(np.clip(r2, 0.0, 1.0)), window)


def classify_bifurcation(branch, p=None, norm="h12", rtol=1e-9):
    """FromZero if norms grow with ``lam`` (vanish towards lam_1), FromInfinity
    if they shrink with ``lam`` (blow up towards lam_1).

    The verdict is read from the data; ``p`` is only used to log a mismatch
    with the regime expected for untransformed branches.
    """
    pts = sorted(branch, key=lambda pt: pt.lam)
    if len(pts) < 2:
        raise AmbiguousTrend("need at least two branch points")
    y = np.array([pt.h12_norm if norm == "h12" else pt.l2_norm for pt in pts])
    d = np.diff(y)
    slack = rtol * np.abs(y).max()
    if np.all(d > slack):
        verdict = Bifurcation.FROM_ZERO
    elif np.all(d < -slack):
        verdict = Bifurcation.FROM_INFINITY
    else:
        raise AmbiguousTrend("norms are not monotone in lambda")
    if p is not None and (verdict is Bifurcation.FROM_ZERO) != (p > 2):
        log.info("verdict %s differs from the untransformed expectation for p=%g",
                 verdict.value, p)
    return verdict


def transform_branch(grid, branch):
    """Map every point of a ``p < 2`` branch through ``v = u / |u|^(2 - p/2)``."""
    out = Branch(p=branch.p, lambda_1=branch.lambda_1, capped=list(branch.capped))
    for pt in branch:
        if pt.u is None:
            raise ValueError("branch points carry no fields")
        v = transform_to_v(grid, pt.u, branch.p)
        n = norms(grid, v, branch.p)
        out.points.append(BranchPoint(lam=pt.lam, l2_norm=float(np.sqrt(n["l2_sq"])),
                                      h12_norm=float(np.sqrt(n["h1_sq"])), energy=np.nan,
                                      residual=pt.residual, iterations=pt.iterations, u=v))
    return out


def higher_branch_probe(grid, p, k, lambda_offset, config=None, epsilon=0.0):
    """Look for a solution near ``lam_k + lambda_offset`` seeded by ``r e_k``.

    Deflation removes the first-branch solution (and zero for ``p > 2``).
    Returns a :class:`BranchPoint` or a falsy :class:`NoBranchFound`.
    """
    if k < 2:
        raise ValueError("higher branches need k >= 2")
    if not lambda_offset > 0:
        raise ValueError("lambda_offset must be positive: the seed scale needs lam > lam_k")
    cfg = config or SolverConfig()
    lam_k, e_k = linear_eigs(grid, k)[k - 1]
    lam = lam_k + lambda_offset
    setting = EnergySetting(p, lam, epsilon)
    kappa_k = norms(grid, e_k, p)["p_dirichlet"]
    r = min((lambda_offset / kappa_k) ** (1.0 / (p - 2.0)), 1e3)
    first = solve_first(grid, setting, cfg)
    found = critical_point_search(grid, r * e_k, setting, cfg,
                                  deflate=[] if first.trivial else [first.u])
    if found is None:
        return NoBranchFound(p=p, k=k, lam=lam, reason="deflated Newton search did not converge")
    u, its = found
    return BranchPoint.from_field(grid, u, setting, its)


__all__ = [
    "Bifurcation", "Branch", "BranchPoint", "CSV_HEADER", "NoBranchFound", "ScalingFit",
    "classify_bifurcation", "fit_scaling", "higher_branch_probe", "trace_branch",
    "transform_branch",
]
