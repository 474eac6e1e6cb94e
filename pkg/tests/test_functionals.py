import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from p2eig.errors import DomainError, NotInCone
from p2eig.functionals import (EnergySetting, apply_operator, energy_F, gradient_F, hessian_F,
                               inequality_oracles, nehari_project, nehari_residual, nehari_scale,
                               nehari_tangent_residual, p_flux, picone_FG, picone_I,
                               working_constants)
from p2eig.grid import Grid, norms
from p2eig.solver import linear_eigs

ONE = np.array([1.0])


@pytest.fixture(scope="module")
def two_cells():
    return Grid(1, (0.0, 1.0), 2)


class TestEnergySetting:
    @pytest.mark.parametrize("p", [1.0, 2.0, 0.5, np.inf, np.nan])
    def test_rejects_p(self, p):
        with pytest.raises(ValueError):
            EnergySetting(p, 1.0)

    def test_rejects_lambda_and_epsilon(self):
        with pytest.raises(ValueError):
            EnergySetting(3.0, np.inf)
        with pytest.raises(ValueError):
            EnergySetting(3.0, 1.0, -1e-3)


class TestEnergy:
    def test_zero(self, small_grid):
        assert energy_F(small_grid, np.zeros(31), EnergySetting(3.0, 10.0)) == 0.0

    def test_hand_value(self, two_cells):
        # 4/2 + 8/3 - 12/2 * 1/3
        assert energy_F(two_cells, ONE, EnergySetting(3.0, 12.0)) == pytest.approx(8 / 3, rel=1e-14)

    def test_j_convention(self, two_cells):
        st_ = EnergySetting(3.0, 12.0)
        assert energy_F(two_cells, ONE, st_, "J") == 2 * energy_F(two_cells, ONE, st_)
        with pytest.raises(ValueError):
            energy_F(two_cells, ONE, st_, "K")

    def test_negative_near_zero_above_lambda1(self, unit_grid):
        lam1, e1 = linear_eigs(unit_grid, 1)[0]
        assert energy_F(unit_grid, 1e-3 * e1, EnergySetting(3.0, lam1 + 1.0)) < 0


class TestGradient:
    def test_zero_field_with_smoothing(self, small_grid):
        assert not gradient_F(small_grid, np.zeros(31), EnergySetting(1.5, 5.0, 1e-3)).any()

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_finite_differences(self, small_grid, rng, p):
        st_ = EnergySetting(p, 15.0)
        for _ in range(5):
            u = rng.standard_normal(31)
            h = 1e-6 * np.linalg.norm(u)
            fd = [(energy_F(small_grid, u + h * e, st_) - energy_F(small_grid, u - h * e, st_)) / (2 * h)
                  for e in np.eye(31)]
            an = gradient_F(small_grid, u, st_)
            assert np.linalg.norm(fd - an) < 1e-6 * np.linalg.norm(an)

    def test_operator_identity(self, small_grid, rng):
        u = rng.standard_normal(31)
        st_ = EnergySetting(3.0, 7.0, 1e-4)
        np.testing.assert_allclose(gradient_F(small_grid, u, st_),
                                   apply_operator(small_grid, u, 3.0, 1e-4) - 7.0 * (small_grid.mass @ u))

    def test_p_two_doubles_laplacian(self, small_grid, rng):
        u = rng.standard_normal(31)
        np.testing.assert_allclose(apply_operator(small_grid, u, 2.0), 2 * small_grid.stiffness @ u)
        assert not apply_operator(small_grid, np.zeros(31), 3.0).any()

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_hessian_matches_gradient(self, small_grid, rng, p):
        st_ = EnergySetting(p, 10.0, 1e-2)
        u, d = rng.standard_normal(31), rng.standard_normal(31)
        h = 1e-6
        fd = (gradient_F(small_grid, u + h * d, st_) - gradient_F(small_grid, u - h * d, st_)) / (2 * h)
        np.testing.assert_allclose(hessian_F(small_grid, u, st_) @ d, fd, rtol=1e-5, atol=1e-6)


class TestNehari:
    def test_hand_residual_and_scale(self, two_cells):
        st_ = EnergySetting(1.5, 20.0)
        rep = nehari_residual(two_cells, ONE, st_)
        assert rep.constraint_value == pytest.approx(4 + 2 * np.sqrt(2) - 20 / 3, abs=1e-12)
        assert rep.sign == 1 and not rep.on_manifold
        t = nehari_scale(two_cells, ONE, st_)
        assert t == pytest.approx((2 * np.sqrt(2) / (20 / 3 - 4)) ** 2, rel=1e-14)
        assert t == pytest.approx(1.125, abs=1e-4)
        assert t**2 * 4 + t**1.5 * 2 * np.sqrt(2) == pytest.approx(t**2 * 20 / 3, rel=1e-12)

    def test_zero_flagged(self, small_grid):
        rep = nehari_residual(small_grid, np.zeros(31), EnergySetting(1.5, 20.0))
        assert not rep.on_manifold and rep.sign == 0
        with pytest.raises(NotInCone):
            nehari_scale(small_grid, np.zeros(31), EnergySetting(1.5, 20.0))

    def test_below_lambda1_not_in_cone(self, small_grid):
        lam1, e1 = linear_eigs(small_grid, 1)[0]
        for lam in (0.5 * lam1, lam1):
            with pytest.raises(NotInCone):
                nehari_scale(small_grid, e1, EnergySetting(1.5, lam))

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_projection_idempotent_and_energy_identity(self, unit_grid, rng, p):
        st_ = EnergySetting(p, 50.0)
        e = linear_eigs(unit_grid, 2)
        for _ in range(5):
            u = nehari_project(unit_grid, e[0][1] + 0.3 * rng.standard_normal() * e[1][1], st_)
            assert nehari_residual(unit_grid, u, st_).on_manifold
            assert nehari_scale(unit_grid, u, st_) == pytest.approx(1.0, abs=1e-8)
            P = norms(unit_grid, u, p)["p_dirichlet"]
            J = energy_F(unit_grid, u, st_, "J")
            assert J == pytest.approx((2 / p - 1) * P, rel=1e-10)
            if p < 2:
                assert J > 0

    def test_tangent_residual_orthogonal(self, small_grid, rng):
        st_ = EnergySetting(1.5, 30.0)
        u = rng.standard_normal(31)
        r = nehari_tangent_residual(small_grid, u, st_)
        c = 2 * small_grid.stiffness @ u + 1.5 * p_flux(small_grid, u, 1.5) - 60 * small_grid.mass @ u
        assert abs(r @ c) < 1e-10 * np.linalg.norm(r) * np.linalg.norm(c)


def _positive_pair(grid, rng):
    x = grid.interior_points[:, 0]
    s = np.sin(np.pi * x)
    return s * (1 + rng.random()), s * np.exp(0.4 * np.cos(3 * np.pi * x * rng.random()))


class TestPicone:
    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_proportional_is_zero(self, unit_grid, rng, p):
        u, _ = _positive_pair(unit_grid, rng)
        assert abs(picone_I(unit_grid, u, u, p)) < 1e-10
        assert abs(picone_I(unit_grid, u, 2 * u, p)) < 1e-10

    @pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
    def test_positive_symmetric_and_split(self, unit_grid, rng, p):
        u, v = _positive_pair(unit_grid, rng)
        val = picone_I(unit_grid, u, v, p)
        F, G = picone_FG(unit_grid, u, v, p)
        assert val > 0
        assert val == pytest.approx(picone_I(unit_grid, v, u, p), rel=1e-10)
        assert val == pytest.approx(F + G, rel=1e-10)
        assert F >= -1e-12 and G >= -1e-12

    def test_domain(self, small_grid):
        u = np.ones(31)
        v = u.copy()
        v[3] = 0.0
        with pytest.raises(DomainError):
            picone_I(small_grid, u, v, 3.0)
        with pytest.raises(ValueError):
            picone_I(small_grid, u, -u, 3.0)


class TestInequalities:
    def test_hand_value(self):
        o = inequality_oracles([0.0, 0.0], [1.0, 0.0], 3.0)
        assert o["lhs_i"] == pytest.approx(1.0)
        assert o["rhs_i"] == pytest.approx(0.5)

    @pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
    def test_equal_vectors(self, p):
        o = inequality_oracles([0.3, -1.2], [0.3, -1.2], p)
        assert all(float(v) == 0.0 for v in o.values())

    def test_constants_sharp(self):
        # c1 = 2^(2-p) is attained at x1 = -x2
        for p in (3.0, 4.0, 7.5):
            o = inequality_oracles([-1.0, 0.0], [1.0, 0.0], p)
            assert o["lhs_i"] == pytest.approx(o["rhs_i"], rel=1e-14)
        assert working_constants(1.5) == {"C_prime": 0.5 * 2**-0.5}

    @pytest.mark.parametrize("p", [1.0, 2.0, 0.5])
    def test_range(self, p):
        with pytest.raises(ValueError):
            inequality_oracles([1.0], [2.0], p)

    def test_nonfinite(self):
        with pytest.raises(ValueError):
            inequality_oracles([np.nan], [1.0], 3.0)

    @settings(max_examples=200, deadline=None)
    @given(arrays(float, 3, elements=st.floats(-1e3, 1e3)), arrays(float, 3, elements=st.floats(-1e3, 1e3)),
           st.sampled_from([1.5, 1.1, 1.9, 2.5, 3.0, 4.0, 6.0]))
    def test_hold_for_arbitrary_vectors(self, x1, x2, p):
        o = inequality_oracles(x1, x2, p)
        tol = lambda a, b: 1e-12 * max(abs(float(a)), abs(float(b))) + 1e-300  # noqa: E731
        if p > 2:
            assert o["lhs_i"] >= o["rhs_i"] - tol(o["lhs_i"], o["rhs_i"])
            assert o["lhs_ii"] <= o["rhs_ii"] + tol(o["lhs_ii"], o["rhs_ii"])
            assert o["lhs_R"] >= o["rhs_R"] - tol(o["lhs_R"], o["rhs_R"])
        else:
            assert o["lhs_sub"] >= o["rhs_sub"] - tol(o["lhs_sub"], o["rhs_sub"])


class TestMonotonicity:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([1.5, 3.0, 4.0]), st.floats(1e-3, 10.0))
    def test_strong_monotonicity(self, seed, p, scale):
        g = Grid(1, (0.0, 1.0), 24)
        r = np.random.default_rng(seed)
        u, v = scale * r.standard_normal(23), scale * r.standard_normal(23)
        d = u - v
        lhs = (apply_operator(g, u, p) - apply_operator(g, v, p)) @ d
        rhs = d @ (g.stiffness @ d)
        assert lhs >= rhs * (1 - 1e-12)
