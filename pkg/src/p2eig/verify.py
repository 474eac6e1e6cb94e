"""Executable invariant suite behind ``p2eig verify``.

Every check returns a pass flag and a short measured-versus-bound string.
The report contains no timings or addresses, so equal seeds give
byte-identical reports.  Library calls go through module attributes so that
patched implementations are exercised (mutation testing).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from . import bifurcation as bif
from . import functionals as fn
from . import grid as gridmod
from . import multiplicity as mult
from . import solver as sol
from .functionals import EnergySetting


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class VerifyReport:
    seed: int
    cells: int
    results: list

    @property
    def ok(self):
        return all(r.passed for r in self.results)

    def text(self):
        width = max(len(r.name) for r in self.results)
        lines = ["p2eig verify report", f"seed: {self.seed}",
                 f"grid: dim=1 bounds=(0, 1) cells={self.cells}", ""]
        for r in self.results:
            lines.append(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
        n_ok = sum(r.passed for r in self.results)
        lines += ["", f"summary: {n_ok}/{len(self.results)} passed"]
        return "\n".join(lines) + "\n"


def _e(x):
    return f"{x:.6e}"


def _l2(g, u):
    return float(np.sqrt(u @ (g.mass @ u)))


# -- grid ------------------------------------------------------------------------------

def check_measure_sum(ctx):
    worst = 0.0
    for g in (ctx.g, ctx.g2):
        worst = max(worst, abs(g.element_measures.sum() - g.measure) / g.measure)
    return worst <= 1e-12, f"rel_err={_e(worst)} <= 1e-12"


def check_poincare(ctx):
    g = ctx.g
    lam1 = sol.lambda_1(g)
    worst = -np.inf
    for _ in range(100):
        u = ctx.rng.standard_normal(g.n_interior)
        worst = max(worst, lam1 * (u @ (g.mass @ u)) / (u @ (g.stiffness @ u)))
    return lam1 > 0 and worst <= 1 + 1e-12, f"lam1={_e(lam1)} max lam1*|u|^2/|grad u|^2={_e(worst)}"


def check_refinement(ctx):
    ns, lams = [], []
    n = 16
    while n <= ctx.cells:
        ns.append(n)
        lams.append(sol.lambda_1(gridmod.build_grid(1, (0.0, 1.0), n)))
        n *= 2
    lams = np.array(lams)
    mono = bool(np.all(np.diff(lams) < 0) and np.all(lams > np.pi**2))
    rel = abs(lams[-1] / np.pi**2 - 1)
    return mono and rel < 1e-3, f"monotone_from_above={mono} final_rel_err={_e(rel)} < 1e-3"


def check_quadratic_form(ctx):
    worst = 0.0
    for g in (ctx.g, ctx.g2):
        for _ in range(20):
            u = ctx.rng.standard_normal(g.n_interior)
            grads = gridmod.element_gradients(g, u)
            q = g.quad_weights @ np.einsum("qd,qd->q", grads, grads)
            a = u @ (g.stiffness @ u)
            worst = max(worst, abs(q - a) / a)
    return worst <= 1e-12, f"rel_err={_e(worst)} <= 1e-12"


# -- functionals --------------------------------------------------------------------------

def check_gradient_fd(ctx):
    g = gridmod.build_grid(1, (0.0, 1.0), 32)
    worst = 0.0
    for p in (1.5, 3.0):
        st = EnergySetting(p, 15.0)
        for _ in range(20):
            u = ctx.rng.standard_normal(g.n_interior)
            h = 1e-6 * np.linalg.norm(u)
            fd = np.array([(fn.energy_F(g, u + h * e, st) - fn.energy_F(g, u - h * e, st)) / (2 * h)
                           for e in np.eye(g.n_interior)])
            an = fn.gradient_F(g, u, st)
            worst = max(worst, np.linalg.norm(fd - an) / np.linalg.norm(an))
    return worst < 1e-6, f"max_rel_err={_e(worst)} < 1e-6"


def _cone_field(ctx, g, amp=0.3):
    e = sol.linear_eigs(g, 3)
    return e[0][1] + amp * ctx.rng.standard_normal() * e[1][1] + amp * ctx.rng.standard_normal() * e[2][1]


def check_nehari(ctx):
    g = ctx.g
    worst_t, worst_id, min_j = 0.0, 0.0, np.inf
    for p in (1.5, 3.0):
        st = EnergySetting(p, 60.0)
        for _ in range(10):
            u = fn.nehari_project(g, _cone_field(ctx, g), st)
            worst_t = max(worst_t, abs(fn.nehari_scale(g, u, st) - 1.0))
            J = fn.energy_F(g, u, st, convention="J")
            P = gridmod.norms(g, u, p)["p_dirichlet"]
            ref = (2.0 / p - 1.0) * P
            worst_id = max(worst_id, abs(J - ref) / abs(ref))
            if p < 2:
                min_j = min(min_j, J)
    ok = worst_t <= 1e-8 and worst_id <= 1e-10 and min_j > 0
    return ok, (f"idempotence={_e(worst_t)} <= 1e-8 J_identity={_e(worst_id)} <= 1e-10 "
                f"min_J(p<2)={_e(min_j)} > 0")


def check_monotonicity(ctx):
    g = ctx.g
    worst = np.inf
    for p in (1.5, 3.0, 4.0):
        for _ in range(1000):
            u = ctx.rng.standard_normal(g.n_interior) * 0.05
            v = ctx.rng.standard_normal(g.n_interior) * 0.05
            d = u - v
            lhs = (fn.apply_operator(g, u, p) - fn.apply_operator(g, v, p)) @ d
            rhs = d @ (g.stiffness @ d)
            worst = min(worst, (lhs - rhs) / rhs)
    return worst >= -1e-12, f"min (lhs-rhs)/rhs={_e(worst)} >= -1e-12"


def check_picone(ctx):
    g = ctx.g
    x = g.interior_points[:, 0]
    base = np.sin(np.pi * x)
    zero, sym, neg, split = 0.0, 0.0, np.inf, 0.0
    for p in (1.5, 3.0):
        for _ in range(10):
            u = base * (1 + 0.3 * ctx.rng.random()) + 0.05 * x * (1 - x) * ctx.rng.random()
            w = base * np.exp(0.3 * np.sin(2 * np.pi * x * ctx.rng.integers(1, 4)))
            I_uw = fn.picone_I(g, u, w, p)
            F, G = fn.picone_FG(g, u, w, p)
            zero = max(zero, abs(fn.picone_I(g, u, 2.0 * u, p)))
            sym = max(sym, abs(I_uw - fn.picone_I(g, w, u, p)) / max(abs(I_uw), 1.0))
            neg = min(neg, I_uw)
            split = max(split, abs(I_uw - (F + G)) / max(abs(I_uw), 1.0))
    ok = zero <= 1e-10 and sym <= 1e-10 and neg > 0 and split <= 1e-10
    return ok, (f"proportional={_e(zero)} symmetry={_e(sym)} min_I={_e(neg)} > 0 "
                f"F+G_mismatch={_e(split)}")


def check_inequalities(ctx):
    viol = 0
    total = 0
    for p in (1.5, 3.0, 4.0):
        for d in (1, 2, 3):
            n = 100_000 // 3 + (1 if d == 1 else 0)
            x1 = ctx.rng.standard_normal((n, d)) * np.exp(ctx.rng.uniform(-3, 3, (n, 1)))
            x2 = ctx.rng.standard_normal((n, d)) * np.exp(ctx.rng.uniform(-3, 3, (n, 1)))
            o = fn.inequality_oracles(x1, x2, p)
            # (larger, smaller) keys; inequality (ii) is an upper bound
            pairs = [("lhs_i", "rhs_i"), ("rhs_ii", "lhs_ii"), ("lhs_R", "rhs_R")] \
                if p > 2 else [("lhs_sub", "rhs_sub")]
            for big, small in pairs:
                slack = 1e-12 * np.maximum(np.abs(o[big]), np.abs(o[small]))
                viol += int(np.count_nonzero(o[big] < o[small] - slack))
                total += n
    return viol == 0, f"violations={viol} of {total} comparisons"


# -- solver ----------------------------------------------------------------------------------

def check_linear_baseline(ctx):
    r1 = abs(sol.lambda_1(ctx.g) / np.pi**2 - 1)
    r2 = abs(sol.lambda_1(ctx.g2) / (2 * np.pi**2) - 1)
    return r1 < 1e-3 and r2 < 1e-2, f"1D_rel={_e(r1)} < 1e-3 2D_rel={_e(r2)} < 1e-2"


def check_dichotomy(ctx):
    g = ctx.g
    lam1 = sol.lambda_1(g)
    bad = []
    worst = 0.0
    for p in (1.5, 3.0):
        for f in (0.5, 0.9, 1.0, 1.1, 2.0, 5.0):
            pair = sol.solve_first(g, EnergySetting(p, f * lam1), ctx.config)
            want_trivial = f <= 1.0
            if pair.trivial != want_trivial:
                bad.append(f"p={p:g},f={f:g}")
            if not pair.trivial:
                worst = max(worst, pair.residual)
    ok = not bad and worst < 1e-8
    return ok, f"misclassified={bad or 'none'} max_residual={_e(worst)} < 1e-8"


def check_positivity_simplicity(ctx):
    g = ctx.g
    dist, min_val, pic = 0.0, np.inf, 0.0
    for p in (1.5, 3.0):
        st = EnergySetting(p, 15.0)
        us = [sol.solve_first(g, st, sol.SolverConfig(seed=ctx.seed * 100 + s)).u for s in range(10)]
        for u in us:
            min_val = min(min_val, u.min() / np.abs(u).max())
            dist = max(dist, mult._aligned_distance(g, u, us[0]))
            pic = max(pic, abs(fn.picone_I(g, us[0], u, p)))
    ok = dist < 1e-6 and min_val > 0 and pic < 1e-8
    return ok, f"max_dist={_e(dist)} < 1e-6 min_rel_value={_e(min_val)} > 0 max_I={_e(pic)} < 1e-8"


def check_lambda1_collapse(ctx):
    """Rayleigh-type quotient ``(|grad u|^2 + |grad u|_p^p) / |u|^2`` along ``e_1 / m``.

    The excess over ``lam_1`` is exactly ``P(e_1) m^(2-p)``; the law and the
    monotone decrease are checked where that excess is far above the
    rounding level of the computed ``lam_1`` (about 1e-12 here).
    """
    g = ctx.g
    lam1, e1 = sol.linear_eigs(g, 1)[0]
    ok, msg = True, []
    for p in (3.0, 4.0):
        kappa = gridmod.norms(g, e1, p)["p_dirichlet"]
        gaps, pred = [], []
        for m in [2.0**i for i in range(0, 31)]:
            n = gridmod.norms(g, e1 / m, p)
            gaps.append((n["h1_sq"] + n["p_dirichlet"]) / n["l2_sq"] - lam1)
            pred.append(kappa * m ** (2 - p))
        gaps, pred = np.array(gaps), np.array(pred)
        resolved = pred > 1e-6
        law = float(np.max(np.abs(gaps[resolved] / pred[resolved] - 1)))
        mono = bool(np.all(np.diff(gaps[resolved]) < 0))
        ok &= mono and abs(gaps[-1]) < 1e-6 and law < 1e-3
        msg.append(f"p={p:g}: gap(2^10)={_e(gaps[10])} gap(2^30)={_e(gaps[-1])} "
                   f"law_err={_e(law)}")
    return ok, "; ".join(msg)


def check_sup_refinement(ctx):
    ratios = []
    coarse = gridmod.build_grid(1, (0.0, 1.0), ctx.cells // 2)
    for p in (1.5, 3.0):
        st = EnergySetting(p, 15.0)
        a = sol.solve_first(coarse, st, ctx.config).u
        b = sol.solve_first(ctx.g, st, ctx.config).u
        ratios.append(np.abs(b).max() / np.abs(a).max())
    ok = all(0.9 <= r <= 1.1 for r in ratios) and all(np.isfinite(ratios))
    return ok, "sup ratios " + " ".join(_e(r) for r in ratios) + " in [0.9, 1.1]"


def check_fixed_point(ctx):
    g = ctx.g
    worst = 0.0
    for p in (1.5, 3.0):
        st = EnergySetting(p, 15.0)
        u = sol.solve_first(g, st, ctx.config).u
        worst = max(worst, _l2(g, sol.s_map(g, u, st, ctx.config)))
    rt = 0.0
    for _ in range(5):
        u = 0.1 * ctx.rng.standard_normal(g.n_interior)
        w = sol.inverse_solve(g, fn.apply_operator(g, u, 3.0), 3.0, ctx.config)
        rt = max(rt, np.abs(w - u).max() / np.abs(u).max())
    return worst < 1e-5 and rt < 1e-7, f"max|S(u)|_2={_e(worst)} < 1e-5 round_trip={_e(rt)} < 1e-7"


def check_transforms(ctx):
    g = ctx.g
    st = EnergySetting(1.5, 15.0)
    rt = 0.0
    for _ in range(10):
        u = ctx.rng.standard_normal(g.n_interior) * 10 ** ctx.rng.uniform(-2, 2)
        back = sol.transform_to_u(g, sol.transform_to_v(g, u, 1.5), 1.5)
        rt = max(rt, np.linalg.norm(back - u) / np.linalg.norm(u))
    u = sol.solve_first(g, st, ctx.config).u
    res = np.linalg.norm(sol.transformed_residual(g, sol.transform_to_v(g, u, 1.5), st))
    return rt < 1e-10 and res < 1e-6, f"round_trip={_e(rt)} < 1e-10 transformed_residual={_e(res)} < 1e-6"


# -- bifurcation -------------------------------------------------------------------------------

def _branch(ctx, p):
    g = ctx.g
    lam1 = sol.lambda_1(g)
    return bif.trace_branch(g, p, lam1 + np.linspace(0.1, 1.0, 10), ctx.config), lam1


def check_branch_zero(ctx):
    br, lam1 = _branch(ctx, 3.0)
    fit = bif.fit_scaling(br, lam1)
    kappa = gridmod.norms(ctx.g, sol.linear_eigs(ctx.g, 1)[0][1], 3.0)["p_dirichlet"]
    krel = abs(fit.kappa(3.0) / kappa - 1)
    verdict = bif.classify_bifurcation(br, 3.0)
    res = max(pt.residual for pt in br)
    ok = abs(fit.slope - 1.0) <= 0.1 and krel <= 0.15 and verdict is bif.Bifurcation.FROM_ZERO \
        and res < 1e-8
    return ok, (f"slope={_e(fit.slope)} (1 +- 0.1) kappa_rel={_e(krel)} <= 0.15 "
                f"verdict={verdict.value} max_residual={_e(res)}")


def check_branch_infinity(ctx):
    br, lam1 = _branch(ctx, 1.5)
    fit = bif.fit_scaling(br, lam1)
    verdict = bif.classify_bifurcation(br, 1.5)
    tb = bif.transform_branch(ctx.g, br)
    tverdict = bif.classify_bifurcation(tb, 1.5)
    tres = max(np.linalg.norm(sol.transformed_residual(ctx.g, pt.u, EnergySetting(1.5, pt.lam)))
               for pt in tb)
    ok = abs(fit.slope + 2.0) <= 0.3 and verdict is bif.Bifurcation.FROM_INFINITY \
        and tverdict is bif.Bifurcation.FROM_ZERO and tres < 1e-5
    return ok, (f"slope={_e(fit.slope)} (-2 +- 0.3) verdict={verdict.value} "
                f"transformed_verdict={tverdict.value} max_transformed_residual={_e(tres)} < 1e-5")


# -- multiplicity ---------------------------------------------------------------------------------

def check_multiplicity(ctx):
    g = ctx.g
    msgs, ok = [], True
    for p, lam, k in ((3.0, 60.0, 2), (1.5, 60.0, 2), (3.0, 120.0, 3)):
        st = EnergySetting(p, lam)
        cat = mult.find_k_solutions(g, st, k, ctx.config)
        counts = sorted(cat.nodal_counts)
        good = len(cat) >= k and counts[:k] == list(range(k))
        for e in cat:
            r_plus = np.linalg.norm(fn.gradient_F(g, e.u, st))
            r_minus = np.linalg.norm(fn.gradient_F(g, -e.u, st))
            good &= abs(r_plus - r_minus) <= 1e-12 * max(r_plus, 1e-300) + 1e-300
            if p < 2:
                good &= fn.nehari_residual(g, e.u, st, tol=1e-8).on_manifold
            else:
                good &= e.energy < 0
        ok &= good
        msgs.append(f"p={p:g},lam={lam:g}: n={len(cat)} nodal={counts}")
    return ok, "; ".join(msgs)


def check_palais_smale(ctx):
    g = ctx.g
    st = EnergySetting(3.0, 15.0)
    cfg = sol.SolverConfig(seed=ctx.seed, record_history=True, perturbation=0.5)
    pair = sol.solve_first(g, st, cfg)
    seq = pair.history + [pair.u]
    rep = mult.palais_smale_probe(g, seq, st)
    return rep.bounded and rep.cauchy, (f"iterates={len(seq)} bounded={rep.bounded} "
                                        f"tail_ratio={_e(rep.tail_ratio)} < 0.5")


CHECKS = [
    ("grid.measure_sum", check_measure_sum),
    ("grid.poincare", check_poincare),
    ("grid.refinement", check_refinement),
    ("grid.quadratic_form", check_quadratic_form),
    ("functionals.gradient_fd", check_gradient_fd),
    ("functionals.nehari", check_nehari),
    ("functionals.monotonicity", check_monotonicity),
    ("functionals.picone", check_picone),
    ("functionals.inequalities", check_inequalities),
    ("solver.linear_baseline", check_linear_baseline),
    ("solver.dichotomy", check_dichotomy),
    ("solver.positivity_simplicity", check_positivity_simplicity),
    ("solver.lambda1_collapse", check_lambda1_collapse),
    ("solver.sup_refinement", check_sup_refinement),
    ("solver.fixed_point", check_fixed_point),
    ("solver.transforms", check_transforms),
    ("bifurcation.from_zero", check_branch_zero),
    ("bifurcation.from_infinity", check_branch_infinity),
    ("multiplicity.catalog", check_multiplicity),
    ("multiplicity.palais_smale", check_palais_smale),
]


@dataclass
class _Context:
    seed: int
    cells: int
    g: object
    g2: object
    rng: np.random.Generator
    config: object


def run_verify(seed=0, cells=256, only=None):
    """Run the invariant suite; ``only`` restricts to names containing any given substring."""
    results = []
    for name, fnc in CHECKS:
        if only and not any(s in name for s in only):
            continue
        # fresh grids and generator per check keep results independent of selection
        ctx = _Context(seed=seed, cells=cells,
                       g=gridmod.build_grid(1, (0.0, 1.0), cells),
                       g2=gridmod.build_grid(2, ((0.0, 1.0), (0.0, 1.0)), 64),
                       rng=np.random.default_rng([seed, zlib.crc32(name.encode())]),
                       config=sol.SolverConfig(seed=seed))
        try:
            ok, detail = fnc(ctx)
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}"
        results.append(CheckResult(name, bool(ok), detail))
    return VerifyReport(seed=seed, cells=cells, results=results)
