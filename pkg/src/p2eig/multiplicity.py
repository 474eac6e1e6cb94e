"""Several distinct solutions at fixed ``(p, lam)`` from subspace seeding.

For ``lam`` between the linear eigenvalues ``lam_k`` and ``lam_{k+1}`` the
even energy has at least ``k`` pairs of critical points.  We search for them
constructively: starts are drawn from the unit spheres ``S_j`` of the spans
``E_j = span(e_1, ..., e_j)``, lifted either onto the Nehari manifold
(``p < 2``) or to a negative-energy level (``p > 2``), and driven to critical
points with deflation of what has already been found.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .errors import MaxIterations, NoNegativeScale, NotInCone
from .functionals import energy_F, gradient_F, nehari_scale
from .grid import norms
from .solver import SolverConfig, critical_point_search, linear_eigs, solve_first

log = logging.getLogger(__name__)


@dataclass
class SubspaceSeed:
    j: int
    coefficients: np.ndarray
    scale: float
    u: np.ndarray = field(repr=False)


@dataclass
class CatalogEntry:
    u: np.ndarray = field(repr=False)
    energy: float
    residual: float
    nodal_count: int
    seed_subspace_dim: int

    def to_dict(self):
        return {"energy": self.energy, "residual": self.residual, "nodal_count": self.nodal_count,
                "seed_subspace_dim": self.seed_subspace_dim,
                "values": [float(x) for x in self.u]}


@dataclass
class LevelReport:
    """What the starts on ``S_j`` produced."""

    j: int
    starts: int
    converged: int
    new_entries: int
    rejected_seeds: int
    sigma_hat: float | None
    seed_sup: float | None


@dataclass
class SolutionCatalog:
    p: float
    lam: float
    k: int
    entries: list = field(default_factory=list)
    levels: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def shortfall(self):
        return max(0, self.k - len(self.entries))

    @property
    def nodal_counts(self):
        return [e.nodal_count for e in self.entries]

    def to_dict(self, grid):
        return {
            "schema": 1, "p": self.p, "lambda": self.lam, "k": self.k, "grid": grid.to_dict(),
            "shortfall": self.shortfall,
            "entries": [e.to_dict() for e in self.entries],
            "levels": [vars(lv).copy() for lv in self.levels],
        }

    def summary(self):
        lines = [f"p={self.p:g} lambda={self.lam:.10g} k={self.k} found={len(self.entries)}",
                 "  #  nodal  j        energy        residual"]
        for i, e in enumerate(self.entries):
            lines.append(f"{i:3d}  {e.nodal_count:5d}  {e.seed_subspace_dim:d}  "
                         f"{e.energy:14.6e}  {e.residual:14.6e}")
        if self.shortfall:
            lines.append(f"  shortfall: {self.shortfall} solution(s) missing")
        return "\n".join(lines)


def subspace_seed(grid, j, setting, coefficients):
    """Lift ``v = sum c_i e_i`` (normalised in L2) to an admissible start.

    ``p < 2``: ``rho(v) v`` on the Nehari manifold.  ``p > 2``: ``s v`` with
    ``s`` halved from 1 until ``F(s v) < 0``.
    """
    c = np.asarray(coefficients, dtype=float).ravel()
    if c.size != j or j < 1:
        raise ValueError(f"expected {j} coefficients, got {c.size}")
    nc = np.linalg.norm(c)
    if nc == 0 or not np.isfinite(nc):
        raise ValueError("coefficients must be finite and not all zero")
    c = c / nc
    pairs = linear_eigs(grid, j)
    lam_j = pairs[-1][0]
    if setting.lam <= lam_j:
        raise NotInCone(f"lam={setting.lam:g} does not exceed lam_{j}={lam_j:g}")
    v = sum(ci * e for ci, (_, e) in zip(c, pairs))
    if setting.p < 2:
        t = nehari_scale(grid, v, setting)
        return SubspaceSeed(j, c, t, t * v)
    s = 1.0
    while s > 1e-300:
        if energy_F(grid, s * v, setting) < 0:
            return SubspaceSeed(j, c, s, s * v)
        s *= 0.5
    raise NoNegativeScale(f"no negative-energy scale found on S_{j}")


def sphere_sample(j, pairs, seed=0):
    """One representative from each of ``pairs`` antipodal pairs on ``S^{j-1}``.

    A scrambled Halton sequence is mapped to the sphere through the normal
    quantile function; the representative has a positive leading nonzero
    coordinate.
    """
    if j == 1:
        return np.ones((1, 1))
    sampler = qmc.Halton(d=j, scramble=True, seed=seed)
    pts = sampler.random(pairs)
    z = _normal.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    lead = z[np.arange(len(z)), np.argmax(np.abs(z) > 1e-12, axis=1)]
    return z * np.sign(lead)[:, None]


def _threads():
    env = os.environ.get("P2EIG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer P2EIG_THREADS=%r", env)
    return min(4, os.cpu_count() or 1)


def _aligned_distance(grid, a, b):
    M = grid.mass
    d1, d2 = a - b, a + b
    return float(np.sqrt(min(d1 @ (M @ d1), d2 @ (M @ d2))))


def _l2(grid, u):
    return float(np.sqrt(u @ (grid.mass @ u)))


def find_k_solutions(grid, setting, k, config=None, threads=None):
    """Catalog of distinct nontrivial solutions seeded from ``S_1, ..., S_k``.

    A shortfall (fewer than ``k`` distinct entries) is reported in the
    catalog, never raised: discretisation may merge continuum solutions.
    """
    cfg = config or SolverConfig()
    if k < 1:
        raise ValueError("k must be positive")
    pairs = linear_eigs(grid, min(k + 1, grid.n_interior))
    lam_k = pairs[k - 1][0]
    lam_next = pairs[k][0] if len(pairs) > k else np.inf
    if not lam_k < setting.lam < lam_next:
        raise ValueError(f"lam={setting.lam:g} must lie in (lam_{k}, lam_{k + 1}) = "
                         f"({lam_k:g}, {lam_next:g})")
    catalog = SolutionCatalog(p=setting.p, lam=setting.lam, k=k)
    workers = threads or _threads()
    seed = 0 if cfg.seed is None else cfg.seed
    for j in range(1, k + 1):
        coeffs = [np.eye(j)[-1]]
        if j > 1:
            coeffs += list(sphere_sample(j, 2 * j * j, seed + j))
        seeds, rejected = [], 0
        for c in coeffs:
            try:
                seeds.append(subspace_seed(grid, j, setting, c))
            except (NotInCone, NoNegativeScale) as exc:
                log.info("seed rejected on S_%d: %s", j, exc)
                rejected += 1
        known = [e.u for e in catalog.entries]

        def run(sd, known=known, j=j):
            try:
                if j == 1:
                    pair = solve_first(grid, setting, cfg, initial=sd.u)
                    return None if pair.trivial else pair.u
                out = critical_point_search(grid, sd.u, setting, cfg, deflate=known)
                return None if out is None else out[0]
            except (MaxIterations, NotInCone) as exc:
                log.info("start on S_%d failed: %s", j, exc)
                return None

        if workers > 1 and len(seeds) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, seeds))
        else:
            results = [run(sd) for sd in seeds]

        before = len(catalog.entries)
        path_max = []
        for sd, u in zip(seeds, results):
            if u is None:
                continue
            path_max.append(max(energy_F(grid, sd.u, setting), energy_F(grid, u, setting)))
            _admit(grid, catalog, u, setting, j)
        seed_energies = [energy_F(grid, sd.u, setting) for sd in seeds]
        catalog.levels.append(LevelReport(
            j=j, starts=len(seeds), converged=len(path_max),
            new_entries=len(catalog.entries) - before, rejected_seeds=rejected,
            sigma_hat=min(path_max) if path_max else None,
            seed_sup=max(seed_energies) if seed_energies else None))
    catalog.entries.sort(key=lambda e: e.energy)
    _align_signs(grid, catalog)
    if catalog.shortfall:
        log.warning("found %d of %d solutions at p=%g, lam=%g", len(catalog), k, setting.p,
                    setting.lam)
    return catalog


def _admit(grid, catalog, u, setting, j):
    size = max([_l2(grid, u)] + [_l2(grid, e.u) for e in catalog.entries])
    for e in catalog.entries:
        if _aligned_distance(grid, u, e.u) <= 1e-3 * size:
            return False
    catalog.entries.append(CatalogEntry(
        u=u, energy=energy_F(grid, u, setting),
        residual=float(np.linalg.norm(gradient_F(grid, u, setting))),
        nodal_count=nodal_count(grid, u), seed_subspace_dim=j))
    return True


def _align_signs(grid, catalog):
    if not catalog.entries:
        return
    ref = catalog.entries[0].u
    M = grid.mass
    for e in catalog.entries:
        ip = e.u @ (M @ ref)
        if abs(ip) > 1e-8 * _l2(grid, e.u) * _l2(grid, ref):
            sgn = np.sign(ip)
        else:
            sgn = np.sign(e.u[np.flatnonzero(np.abs(e.u) > 1e-9 * np.abs(e.u).max())[0]])
        e.u = sgn * e.u


def nodal_count(grid, u, rel=1e-9):
    """Sign changes along the node line (1D) or nodal components minus one (2D).

    Values below ``rel * max|u|`` are treated as zero and ignored.
    """
    u = grid.check_field(u)
    big = np.abs(u).max()
    if big == 0:
        return 0
    mask = np.abs(u) > rel * big
    if grid.dim == 1:
        s = np.sign(u[mask])
        return int(np.count_nonzero(s[1:] != s[:-1]))
    shape = grid.interior_shape
    U = u.reshape(shape)
    M = mask.reshape(shape)
    _, npos = ndimage.label(M & (U > 0))
    _, nneg = ndimage.label(M & (U < 0))
    return int(max(npos + nneg - 1, 0))


@dataclass(frozen=True)
class PalaisSmaleReport:
    bounded: bool
    cauchy: bool
    max_norm: float
    tail_ratio: float


def palais_smale_probe(grid, sequence, setting, growth=1e3):
    """Boundedness and Cauchy-tail diagnostics for a sequence of iterates.

    The norm is ``|grad u|_2`` for ``p < 2`` and ``|grad u|_p`` for ``p > 2``.
    ``tail_ratio`` compares the largest step in the last quartile with the
    largest step overall.
    """
    seq = [grid.check_field(u) for u in sequence]
    if len(seq) < 3:
        raise ValueError("need at least three iterates")
    p = setting.p
    if p < 2:
        nrm = [float(np.sqrt(u @ (grid.stiffness @ u))) for u in seq]
        dist = lambda a, b: float(np.sqrt((a - b) @ (grid.stiffness @ (a - b))))  # noqa: E731
    else:
        nrm = [norms(grid, u, p)["p_dirichlet"] ** (1.0 / p) for u in seq]
        dist = lambda a, b: norms(grid, a - b, p)["p_dirichlet"] ** (1.0 / p)  # noqa: E731
    ref = max(nrm[0], np.finfo(float).tiny)
    bounded = bool(np.all(np.isfinite(nrm)) and max(nrm) <= growth * ref)
    steps = np.array([dist(a, b) for a, b in zip(seq[:-1], seq[1:])])
    top = steps.max()
    q = max(1, len(steps) // 4)
    tail_ratio = 0.0 if top == 0 else float(steps[-q:].max() / top)
    return PalaisSmaleReport(bounded=bounded, cauchy=bool(tail_ratio < 0.5),
                             max_norm=float(max(nrm)), tail_ratio=tail_ratio)


__all__ = [
    "CatalogEntry", "LevelReport", "PalaisSmaleReport", "SolutionCatalog", "SubspaceSeed",
    "find_k_solutions", "nodal_count", "palais_smale_probe", "sphere_sample", "subspace_seed",
]
