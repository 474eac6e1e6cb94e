import numpy as np
import pytest

from p2eig.errors import NoNegativeScale, NotInCone
from p2eig.functionals import EnergySetting, energy_F, nehari_residual
from p2eig.grid import Grid
from p2eig.multiplicity import (find_k_solutions, nodal_count, palais_smale_probe,
                                sphere_sample, subspace_seed)
from p2eig.solver import linear_eigs


class TestSubspaceSeed:
    def test_nehari_lift(self, unit_grid):
        (l1, _), (l2, _), (l3, _) = linear_eigs(unit_grid, 3)
        st = EnergySetting(1.5, 0.5 * (l2 + l3))
        sd = subspace_seed(unit_grid, 2, st, [1.0, 1.0])
        np.testing.assert_allclose(sd.coefficients, [2**-0.5, 2**-0.5])
        assert sd.scale > 0
        assert nehari_residual(unit_grid, sd.u, st).on_manifold

    def test_negative_energy_lift(self, unit_grid):
        st = EnergySetting(3.0, 60.0)
        sd = subspace_seed(unit_grid, 2, st, [0.6, 0.8])
        assert energy_F(unit_grid, sd.u, st) < 0
        assert energy_F(unit_grid, 2 * sd.u, st) >= 0 or sd.scale == 1.0

    def test_lambda_not_above_lambda_j(self, unit_grid):
        with pytest.raises(NotInCone):
            subspace_seed(unit_grid, 2, EnergySetting(3.0, 30.0), [1.0, 0.0])

    def test_no_negative_scale(self, unit_grid, monkeypatch):
        # an energy that never dips below zero exhausts the halving schedule
        import p2eig.multiplicity as mult
        monkeypatch.setattr(mult, "energy_F", lambda *a, **k: 1.0)
        with pytest.raises(NoNegativeScale):
            subspace_seed(unit_grid, 2, EnergySetting(3.0, 60.0), [1.0, 0.0])

    @pytest.mark.parametrize("c", [[1.0], [0.0, 0.0], [np.nan, 1.0]])
    def test_bad_coefficients(self, unit_grid, c):
        with pytest.raises(ValueError):
            subspace_seed(unit_grid, 2, EnergySetting(3.0, 60.0), c)


class TestSphereSample:
    def test_unit_and_canonical_sign(self):
        z = sphere_sample(3, 18, seed=4)
        assert z.shape == (18, 3)
        np.testing.assert_allclose(np.linalg.norm(z, axis=1), 1.0)
        assert np.all(z[:, 0] > 0)
        np.testing.assert_array_equal(z, sphere_sample(3, 18, seed=4))

    def test_trivial_sphere(self):
        np.testing.assert_array_equal(sphere_sample(1, 5), [[1.0]])


class TestNodalCount:
    def test_modes(self, unit_grid):
        for k, (_, e) in enumerate(linear_eigs(unit_grid, 4)):
            assert nodal_count(unit_grid, e) == k

    def test_noise_ignored(self, unit_grid, rng):
        e = linear_eigs(unit_grid, 1)[0][1]
        noisy = e.copy()
        noisy[:3] = 1e-14 * rng.standard_normal(3)
        assert nodal_count(unit_grid, noisy) == 0
        assert nodal_count(unit_grid, np.zeros(255)) == 0

    def test_square(self):
        g = Grid(2, [(0.0, 1.0), (0.0, 1.0)], 24)
        x, y = g.interior_points.T
        assert nodal_count(g, np.sin(np.pi * x) * np.sin(np.pi * y)) == 0
        assert nodal_count(g, np.sin(2 * np.pi * x) * np.sin(np.pi * y)) == 1
        assert nodal_count(g, np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)) == 3


class TestPalaisSmale:
    def test_converging_sequence(self, unit_grid):
        e = linear_eigs(unit_grid, 1)[0][1]
        seq = [(1 + 2.0**-k) * e for k in range(12)]
        rep = palais_smale_probe(unit_grid, seq, EnergySetting(3.0, 15.0))
        assert rep.bounded and rep.cauchy

    def test_diverging_sequence(self, unit_grid):
        e = linear_eigs(unit_grid, 1)[0][1]
        seq = [10.0**k * e for k in range(6)]
        rep = palais_smale_probe(unit_grid, seq, EnergySetting(1.5, 15.0))
        assert not rep.bounded and not rep.cauchy

    def test_constant_sequence(self, unit_grid):
        e = linear_eigs(unit_grid, 1)[0][1]
        rep = palais_smale_probe(unit_grid, [e] * 4, EnergySetting(3.0, 15.0))
        assert rep.bounded and rep.cauchy and rep.tail_ratio == 0.0

    def test_needs_three(self, unit_grid):
        with pytest.raises(ValueError):
            palais_smale_probe(unit_grid, [np.zeros(255)] * 2, EnergySetting(3.0, 15.0))


@pytest.fixture(scope="module")
def catalogs(grid128):
    return {p: find_k_solutions(grid128, EnergySetting(p, 60.0), 2) for p in (1.5, 3.0)}


class TestCatalog:
    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_two_solutions(self, grid128, catalogs, p):
        cat = catalogs[p]
        assert cat.shortfall == 0
        assert sorted(cat.nodal_counts) == [0, 1]
        energies = [e.energy for e in cat]
        assert energies == sorted(energies)
        for e in cat:
            assert e.residual < 1e-8
        assert [lv.j for lv in cat.levels] == [1, 2]

    def test_sign_alignment(self, grid128, catalogs):
        cat = catalogs[3.0]
        assert cat.entries[0].u.sum() > 0

    def test_to_dict_and_summary(self, grid128, catalogs):
        d = catalogs[3.0].to_dict(grid128)
        assert d["schema"] == 1 and d["k"] == 2 and len(d["entries"]) == 2
        assert "found=2" in catalogs[3.0].summary()

    def test_three_solutions(self, grid128):
        cat = find_k_solutions(grid128, EnergySetting(3.0, 120.0), 3)
        assert sorted(cat.nodal_counts) == [0, 1, 2]

    def test_single_level_matches_first(self, grid128):
        from p2eig.solver import solve_first
        st = EnergySetting(3.0, 20.0)
        cat = find_k_solutions(grid128, st, 1)
        assert cat.entries[0].energy == pytest.approx(solve_first(grid128, st).energy, rel=1e-10)

    def test_threads_do_not_change_result(self, grid128):
        st = EnergySetting(3.0, 60.0)
        a = find_k_solutions(grid128, st, 2, threads=1)
        b = find_k_solutions(grid128, st, 2, threads=3)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.u, y.u)

    @pytest.mark.parametrize("lam", [30.0, 100.0])
    def test_lambda_outside_interval(self, grid128, lam):
        with pytest.raises(ValueError):
            find_k_solutions(grid128, EnergySetting(3.0, lam), 2)
