import math
import os
import sys
import unittest

import numpy as np

_REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
_SRC_PATH = os.path.join(_REPO_ROOT, "src")
if _SRC_PATH not in sys.path:
    sys.path.insert(0, _SRC_PATH)

from kinetic_fluid_modes.errors import GridMismatch, InsufficientRange  # noqa: E402
from kinetic_fluid_modes.services.collision import (  # noqa: E402
    annulus_cutoff,
    build_collision_operator,
    inner_cutoff,
    smoothstep,
    verify_amplitude_estimates,
)
from kinetic_fluid_modes.services.velocity_space import (  # noqa: E402
    build_equilibrium,
    inner_product,
    velocity_profile,
    weighted_norm,
)

TAIL_RADII = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0]


class CollisionOperatorTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.operator = build_collision_operator(build_equilibrium("polynomial", 8.0, 2.0), 32, 16)
        cls.grid0 = cls.operator.grid(0)

    def test_basis_is_orthonormal(self):
        for sector in (0, 1):
            Q = self.operator.basis(sector).scaled_matrix
            np.testing.assert_allclose(Q.T @ Q, np.eye(Q.shape[1]), atol=1e-12)

    def test_collision_invariants_are_annihilated(self):
        for name in ("one", "v1", "energy"):
            f = velocity_profile(self.grid0, name)
            residual = weighted_norm(self.operator.apply_L(f), self.operator.beta)
            self.assertLess(residual, 1e-10, msg=name)
        v_perp = velocity_profile(self.operator.grid(1), "v_perp")
        self.assertLess(weighted_norm(self.operator.apply_L(v_perp)), 1e-10)

    def test_projection_is_idempotent(self):
        f = velocity_profile(self.grid0, "v1_cubed")
        once = self.operator.apply_projection(f)
        twice = self.operator.apply_projection(once)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-12)

    def test_L_is_symmetric_and_dissipative(self):
        beta = self.operator.beta
        f = velocity_profile(self.grid0, "v1_sq")
        g = velocity_profile(self.grid0, "v1_cubed") + velocity_profile(self.grid0, "speed_sq")
        Lf, Lg = self.operator.apply_L(f), self.operator.apply_L(g)
        self.assertAlmostEqual(inner_product(Lf, g), inner_product(f, Lg), places=10)
        quadratic = inner_product(Lf, f)
        non_fluid = f - self.operator.apply_projection(f)
        self.assertLess(quadratic.real, 0.0)
        self.assertAlmostEqual(quadratic.real, -weighted_norm(non_fluid, -beta) ** 2, places=10)

    def test_moment_coordinates_invert_each_other(self):
        basis = self.operator.basis(0)
        C = np.array([0.3, -1.2, 0.7])
        np.testing.assert_allclose(
            basis.to_moment_coordinates(basis.from_moment_coordinates(C)), C, atol=1e-12
        )

    def test_psi_gauge_operator(self):
        beta = self.operator.beta
        g = velocity_profile(self.grid0, "one").with_gauge(-beta)
        self.assertLess(np.max(np.abs(self.operator.apply_L_tilde(g).values)), 1e-10)
        with self.assertRaises(GridMismatch):
            self.operator.compact_part(velocity_profile(self.grid0, "one"))

    def test_bgk_constants(self):
        self.assertEqual(self.operator.gap, 1.0)
        self.assertIsNone(self.operator.scattering)

    def test_missing_sector_raises(self):
        operator = build_collision_operator(
            build_equilibrium("gaussian", None, 0.0), 16, 8, sectors=(0,)
        )
        with self.assertRaises(GridMismatch):
            operator.basis(1)


class CutoffTests(unittest.TestCase):
    def test_smoothstep_limits(self):
        np.testing.assert_allclose(smoothstep(np.array([-1.0, 0.0, 0.5, 1.0, 2.0])),
                                   [0.0, 0.0, 0.5, 1.0, 1.0])

    def test_inner_cutoff(self):
        r = np.array([0.5, 10.0, 20.0, 50.0])
        np.testing.assert_allclose(inner_cutoff(r, 10.0), [1.0, 1.0, 0.0, 0.0])

    def test_annulus_cutoff(self):
        r = np.array([5.0, 10.0, 25.0, 40.0, 60.0])
        np.testing.assert_allclose(annulus_cutoff(r, 10.0), [0.0, 0.0, 1.0, 0.0, 0.0])


class AmplitudeTests(unittest.TestCase):
    def test_radii_must_span_a_decade(self):
        spec = build_equilibrium("polynomial", 8.0, 0.0)
        with self.assertRaises(InsufficientRange):
            verify_amplitude_estimates(spec, [2.0, 4.0, 8.0])
        with self.assertRaises(InsufficientRange):
            verify_amplitude_estimates(spec, [2.0, 3.0, 4.0, 5.0])
        with self.assertRaises(InsufficientRange):
            verify_amplitude_estimates(spec, [0.5, 2.0, 8.0, 32.0])

    def test_gaussian_families_are_super_polynomial(self):
        spec = build_equilibrium("gaussian", None, 0.0)
        report = verify_amplitude_estimates(spec, [2.0, 4.0, 8.0, 16.0, 32.0], n_radial=64)
        self.assertEqual(len(report.families), 6)
        self.assertTrue(all(f.status == "super_polynomial" for f in report.families))
        self.assertTrue(report.passed)

    def test_polynomial_report_lists_the_resonant_member(self):
        spec = build_equilibrium("polynomial", 8.0, 0.0)
        report = verify_amplitude_estimates(spec, TAIL_RADII, n_radial=128)
        names = [f.name for f in report.families]
        self.assertEqual(names[:3], ["chi1", "v1_chi1", "energy_chi1"])
        resonant = [f for f in report.families if f.resonant]
        self.assertEqual([f.name for f in resonant], ["chi2_k4"])
        chi1 = report.families[0]
        self.assertAlmostEqual(chi1.target_slope, -4.0)
        self.assertLess(chi1.fitted_slope, 0.0)
        np.testing.assert_allclose(report.radii, [spec.dilation * R for R in TAIL_RADII])

    def test_tail_slopes_match_the_targets(self):
        for alpha, beta in ((8.0, 0.0), (5.5, 0.0), (5.5, 2.0)):
            spec = build_equilibrium("polynomial", alpha, beta)
            report = verify_amplitude_estimates(spec, TAIL_RADII)
            head = 0.5 * (alpha + beta)
            targets = {"chi1": -head, "v1_chi1": 1.0 - head, "energy_chi1": 2.0 - head}
            for family in report.families[:3]:
                self.assertAlmostEqual(family.target_slope, targets[family.name])
                deviation = abs(family.fitted_slope - family.target_slope)
                self.assertLessEqual(deviation, 0.1, msg=(alpha, beta, family.name))
                self.assertTrue(family.passed)

    def test_gaussian_radii_beyond_the_grid_are_skipped(self):
        spec = build_equilibrium("gaussian", None, 0.0)
        report = verify_amplitude_estimates(spec, TAIL_RADII, n_radial=64)
        chi1 = report.families[0]
        self.assertFalse(math.isnan(chi1.values[0]))
        self.assertTrue(math.isnan(chi1.values[-1]))


if __name__ == "__main__":
    unittest.main()
