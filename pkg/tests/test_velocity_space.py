import math
import os
import sys
import unittest

import numpy as np

_REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
_SRC_PATH = os.path.join(_REPO_ROOT, "src")
if _SRC_PATH not in sys.path:
    sys.path.insert(0, _SRC_PATH)

from kinetic_fluid_modes.errors import GridMismatch, ParameterDomain  # noqa: E402
from kinetic_fluid_modes.services.velocity_space import (  # noqa: E402
    bracket,
    build_equilibrium,
    build_grid,
    extract_moments,
    inner_product,
    quadrature_moments,
    velocity_profile,
    weighted_norm,
)


class EquilibriumTests(unittest.TestCase):
    def test_gaussian_has_unit_dilation_and_fourth_moment_five(self):
        spec = build_equilibrium("gaussian", None, 0.0)
        self.assertEqual(spec.dilation, 1.0)
        self.assertAlmostEqual(spec.m4, 5.0, places=8)
        self.assertTrue(math.isinf(spec.alpha))

    def test_polynomial_is_normalized(self):
        for alpha, beta in ((8.0, 0.0), (5.5, 0.0), (5.5, 2.0)):
            spec = build_equilibrium("polynomial", alpha, beta)
            self.assertAlmostEqual(spec.m0, 1.0, places=9)
            self.assertAlmostEqual(spec.m2, 1.0, places=9)
            self.assertTrue(math.isfinite(spec.m4))
            if beta == 0.0:
                self.assertGreater(spec.m4, 5.0)

    def test_rejects_parameters_outside_the_domain(self):
        with self.assertRaises(ParameterDomain):
            build_equilibrium("polynomial", 4.5, 0.0)
        with self.assertRaises(ParameterDomain):
            build_equilibrium("polynomial", 8.0, -1.0)
        with self.assertRaises(ParameterDomain):
            build_equilibrium("maxwellian", None, 0.0)
        with self.assertRaises(ParameterDomain):
            build_equilibrium("gaussian", 8.0, 0.0)

    def test_density_decays_like_the_tail(self):
        spec = build_equilibrium("polynomial", 8.0, 0.0)
        r = np.array([1e3, 1e4])
        slope = math.log(spec.density(r)[1] / spec.density(r)[0]) / math.log(10.0)
        self.assertAlmostEqual(slope, -11.0, places=3)


class GridTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.gaussian = build_equilibrium("gaussian", None, 0.0)
        cls.poly = build_equilibrium("polynomial", 8.0, 0.0)

    def test_bracket(self):
        self.assertAlmostEqual(float(bracket(np.array(3.0), 2.0)), 10.0)
        self.assertAlmostEqual(float(bracket(np.array(0.0), -7.0)), 1.0)

    def test_gaussian_quadrature_reproduces_moments(self):
        grid = build_grid(self.gaussian, 32, 16)
        m0, m2, m4 = quadrature_moments(grid)
        self.assertAlmostEqual(m0, 1.0, delta=1e-6)
        self.assertAlmostEqual(m2, 1.0, delta=1e-6)
        self.assertAlmostEqual(m4, 5.0, delta=1e-5)

    def test_polynomial_quadrature_on_both_maps(self):
        for radial_map, n_radial in (("algebraic", 48), ("logarithmic", 96)):
            grid = build_grid(self.poly, n_radial, 16, radial_map=radial_map)
            m0, m2, m4 = quadrature_moments(grid)
            self.assertAlmostEqual(m0, 1.0, delta=1e-4, msg=radial_map)
            self.assertAlmostEqual(m2, 1.0, delta=1e-4, msg=radial_map)
            self.assertAlmostEqual(m4, self.poly.m4, delta=1e-3 * self.poly.m4, msg=radial_map)

    def test_gaussian_grid_drops_underflowing_nodes(self):
        grid = build_grid(self.gaussian, 32, 16)
        self.assertLess(grid.n_radial, 32)
        self.assertTrue(np.all(grid.weights > 0.0))
        self.assertEqual(grid.size, grid.n_radial * 16)

    def test_angular_nodes_are_symmetric(self):
        grid = build_grid(self.gaussian, 16, 8)
        np.testing.assert_array_equal(grid.angular_nodes, -grid.angular_nodes[::-1])

    def test_rejects_bad_grid_requests(self):
        with self.assertRaises(ParameterDomain):
            build_grid(self.gaussian, 4, 16)
        with self.assertRaises(ParameterDomain):
            build_grid(self.gaussian, 16, 16, sector=2)
        with self.assertRaises(ParameterDomain):
            build_grid(self.gaussian, 16, 16, radial_map="spline")

    def test_with_sector_keeps_resolution(self):
        grid = build_grid(self.poly, 24, 8)
        other = grid.with_sector(1)
        self.assertEqual(other.sector, 1)
        np.testing.assert_array_equal(other.radial_nodes, grid.radial_nodes)


class GridFunctionTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.spec = build_equilibrium("gaussian", None, 0.0)
        cls.grid0 = build_grid(cls.spec, 32, 16, 0)
        cls.grid1 = build_grid(cls.spec, 32, 16, 1)

    def test_mixing_sectors_raises(self):
        f = velocity_profile(self.grid0, "one")
        g = velocity_profile(self.grid1, "v_perp")
        with self.assertRaises(GridMismatch):
            f + g
        with self.assertRaises(GridMismatch):
            inner_product(f, g)

    def test_mixing_gauges_raises(self):
        f = velocity_profile(self.grid0, "one")
        with self.assertRaises(GridMismatch):
            f - f.with_gauge(-2.0)

    def test_gauge_change_scales_values(self):
        f = velocity_profile(self.grid0, "v1")
        shifted = f.with_gauge(2.0)
        np.testing.assert_allclose(shifted.values, f.values * self.grid0.bracket(1.0))
        np.testing.assert_allclose(shifted.with_gauge(0.0).values, f.values)

    def test_wrong_shape_raises(self):
        with self.assertRaises(GridMismatch):
            self.grid0.function(np.zeros(3))

    def test_profiles_belong_to_their_sector(self):
        with self.assertRaises(GridMismatch):
            velocity_profile(self.grid0, "v_perp")
        with self.assertRaises(ValueError):
            velocity_profile(self.grid0, "v7")

    def test_norms_of_basic_profiles(self):
        self.assertAlmostEqual(weighted_norm(velocity_profile(self.grid0, "one")), 1.0, places=6)
        self.assertAlmostEqual(weighted_norm(velocity_profile(self.grid0, "v1")), 1.0, places=6)
        energy = velocity_profile(self.grid0, "energy")
        self.assertAlmostEqual(weighted_norm(energy) ** 2, 1.5, places=5)
        v_perp = velocity_profile(self.grid1, "v_perp")
        self.assertAlmostEqual(weighted_norm(v_perp), 1.0, places=6)

    def test_extract_moments(self):
        one = velocity_profile(self.grid0, "one")
        moments = extract_moments(one)
        self.assertAlmostEqual(moments.rho.real, 1.0, places=6)
        self.assertAlmostEqual(abs(moments.m_parallel), 0.0, places=10)
        self.assertAlmostEqual(abs(moments.theta), 0.0, places=6)

        theta = extract_moments(velocity_profile(self.grid0, "theta")).theta
        self.assertAlmostEqual(theta.real, 2.0 / 3.0, places=5)

        v_perp = velocity_profile(self.grid1, "v_perp")
        moments = extract_moments(one, (v_perp, v_perp * 2.0))
        self.assertAlmostEqual(moments.m_transverse[0].real, 1.0, places=6)
        self.assertAlmostEqual(moments.m_transverse[1].real, 2.0, places=6)

    def test_extract_moments_checks_sectors(self):
        v_perp = velocity_profile(self.grid1, "v_perp")
        with self.assertRaises(GridMismatch):
            extract_moments(v_perp)
        one = velocity_profile(self.grid0, "one")
        with self.assertRaises(GridMismatch):
            extract_moments(one, (one,))


if __name__ == "__main__":
    unittest.main()
