import numpy as np
import pytest

from p2eig.bifurcation import (CSV_HEADER, Bifurcation, Branch, BranchPoint, NoBranchFound,
                               classify_bifurcation, fit_scaling, higher_branch_probe,
                               trace_branch, transform_branch)
from p2eig.errors import AmbiguousTrend, ContinuationStall, InsufficientPoints
from p2eig.functionals import EnergySetting
from p2eig.multiplicity import nodal_count
from p2eig.solver import SolverConfig, lambda_1, transformed_residual


def _synthetic(lam1, slope, c, offsets):
    pts = [BranchPoint(lam=lam1 + d, l2_norm=c * d**slope, h12_norm=2 * c * d**slope,
                       energy=0.0, residual=0.0, iterations=0) for d in offsets]
    return Branch(p=3.0, lambda_1=lam1, points=pts)


class TestFit:
    @pytest.mark.parametrize("slope", [1.0, -2.0, 0.5])
    def test_recovers_exact_power_law(self, slope):
        b = _synthetic(10.0, slope, 0.3, np.geomspace(0.1, 1.0, 7))
        fit = fit_scaling(b, 10.0)
        assert fit.slope == pytest.approx(slope, abs=1e-10)
        assert fit.intercept == pytest.approx(np.log(0.3), abs=1e-10)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.window == pytest.approx((0.1, 1.0))

    def test_kappa_from_intercept(self):
        # one-mode law |u| = (d / kappa)^(1/(p-2)) at p = 3
        b = _synthetic(10.0, 1.0, 1 / 37.0, np.linspace(0.1, 1.0, 6))
        assert fit_scaling(b, 10.0).kappa(3.0) == pytest.approx(37.0, rel=1e-10)

    def test_too_few_points(self):
        with pytest.raises(InsufficientPoints):
            fit_scaling(_synthetic(1.0, 1.0, 1.0, [0.1, 0.2, 0.3, 0.4]), 1.0)

    def test_points_below_lambda1(self):
        with pytest.raises(ValueError):
            fit_scaling(_synthetic(1.0, 1.0, 1.0, np.linspace(0.1, 1, 5)), 1.5)


class TestClassify:
    def test_directions(self):
        up = _synthetic(1.0, 1.0, 1.0, np.linspace(0.1, 1, 5))
        down = _synthetic(1.0, -2.0, 1.0, np.linspace(0.1, 1, 5))
        assert classify_bifurcation(up) is Bifurcation.FROM_ZERO
        assert classify_bifurcation(down, norm="l2") is Bifurcation.FROM_INFINITY
        assert Bifurcation.FROM_ZERO.value == "FromZero"

    def test_ambiguous(self):
        flat = _synthetic(1.0, 0.0, 1.0, np.linspace(0.1, 1, 5))
        with pytest.raises(AmbiguousTrend):
            classify_bifurcation(flat)
        with pytest.raises(AmbiguousTrend):
            classify_bifurcation(_synthetic(1.0, 1.0, 1.0, [0.5]))


@pytest.fixture(scope="module")
def branch3(unit_grid):
    lam1 = lambda_1(unit_grid)
    return trace_branch(unit_grid, 3.0, lam1 + np.linspace(0.1, 1.0, 6))


@pytest.fixture(scope="module")
def branch15(unit_grid):
    lam1 = lambda_1(unit_grid)
    return trace_branch(unit_grid, 1.5, lam1 + np.linspace(0.1, 1.0, 6))


class TestTrace:
    def test_p3_grows_from_zero(self, unit_grid, branch3):
        assert len(branch3) == 6 and not branch3.capped
        assert np.all(np.diff(branch3.l2_norms) > 0)
        assert classify_bifurcation(branch3, p=3.0) is Bifurcation.FROM_ZERO
        fit = fit_scaling(branch3, branch3.lambda_1)
        assert fit.slope == pytest.approx(1.0, abs=0.1)

    def test_p15_from_infinity(self, unit_grid, branch15):
        assert np.all(np.diff(branch15.l2_norms) < 0)
        assert classify_bifurcation(branch15, p=1.5) is Bifurcation.FROM_INFINITY
        assert fit_scaling(branch15, branch15.lambda_1).slope == pytest.approx(-2.0, abs=0.3)
        tb = transform_branch(unit_grid, branch15)
        assert classify_bifurcation(tb) is Bifurcation.FROM_ZERO
        for pt in tb:
            r = transformed_residual(unit_grid, pt.u, EnergySetting(1.5, pt.lam))
            assert np.linalg.norm(r) < 1e-5

    def test_points_are_positive_solutions(self, branch3):
        for pt in branch3:
            assert pt.u.min() > 0
            assert pt.residual < 1e-8

    def test_close_to_lambda1(self, unit_grid):
        lam1 = lambda_1(unit_grid)
        b = trace_branch(unit_grid, 3.0, [lam1 + 0.01])
        # one-mode oracle: |u|_2 ~ 0.01 / P(e1)
        assert b.l2_norms[0] == pytest.approx(0.01 / 37.22, rel=0.05)

    def test_cap_skips_for_sub2(self, unit_grid):
        lam1 = lambda_1(unit_grid)
        b = trace_branch(unit_grid, 1.5, lam1 + np.array([1e-6, 0.5]), norm_cap=1e3)
        assert b.capped == [pytest.approx(lam1 + 1e-6)]
        assert len(b) == 1

    def test_validation(self, unit_grid):
        lam1 = lambda_1(unit_grid)
        with pytest.raises(ValueError):
            trace_branch(unit_grid, 3.0, [lam1 - 1.0, lam1 + 1.0])
        with pytest.raises(ValueError):
            trace_branch(unit_grid, 3.0, [lam1 + 2.0, lam1 + 1.0])
        with pytest.raises(ValueError):
            trace_branch(unit_grid, 3.0, [])

    def test_stall_carries_partial_branch(self, unit_grid):
        lam1 = lambda_1(unit_grid)
        with pytest.raises(ContinuationStall) as info:
            trace_branch(unit_grid, 3.0, [lam1 + 0.5], SolverConfig(max_iterations=1))
        assert len(info.value.branch) == 0
        assert info.value.lam == pytest.approx(lam1 + 0.5)

    def test_csv(self, branch3):
        lines = branch3.to_csv().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 7
        first = lines[1].split(",")
        assert float(first[0]) == branch3.points[0].lam
        assert float(first[1]) == branch3.points[0].l2_norm


class TestHigherBranch:
    def test_second_mode(self, grid128):
        pt = higher_branch_probe(grid128, 3.0, 2, 1.0)
        assert pt
        assert nodal_count(grid128, pt.u) == 1
        assert pt.residual < 1e-8

    @pytest.mark.parametrize("k, off", [(1, 1.0), (2, 0.0), (2, -1.0)])
    def test_validation(self, grid128, k, off):
        with pytest.raises(ValueError):
            higher_branch_probe(grid128, 3.0, k, off)

    def test_no_branch_is_falsy(self):
        nb = NoBranchFound(p=3.0, k=2, lam=50.0, reason="x")
        assert not nb
