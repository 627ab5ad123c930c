import os
import sys
import unittest

import numpy as np

_REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
_SRC_PATH = os.path.join(_REPO_ROOT, "src")
if _SRC_PATH not in sys.path:
    sys.path.insert(0, _SRC_PATH)

from kinetic_fluid_modes.errors import InsufficientRange, NonPositiveValue  # noqa: E402
from kinetic_fluid_modes.services.fitting import (  # noqa: E402
    fit_fixed_exponent,
    fit_power_law,
    loglog_slope,
)


def _samples(exponent, amplitude=3.0, lo=1e-3, hi=1.0, n=10):
    xs = np.geomspace(lo, hi, n)
    return [(x, amplitude * x ** exponent) for x in xs]


class PowerLawFitTests(unittest.TestCase):
    def test_exact_power_law(self):
        fit = fit_power_law(_samples(1.5))
        self.assertAlmostEqual(fit.exponent, 1.5, places=10)
        self.assertAlmostEqual(fit.amplitude, 3.0, places=8)
        self.assertAlmostEqual(fit.r_squared, 1.0, places=10)
        self.assertTrue(fit.accepted)
        self.assertEqual(fit.n_samples, 10)

    def test_window_selects_samples(self):
        samples = _samples(2.0) + [(10.0, 1.0), (20.0, 1.0)]
        fit = fit_power_law(samples, window=(1e-3, 1.0))
        self.assertAlmostEqual(fit.exponent, 2.0, places=10)
        self.assertEqual(fit.window, (1e-3, 1.0))

    def test_too_few_samples(self):
        with self.assertRaises(InsufficientRange):
            fit_power_law(_samples(2.0, n=5))

    def test_too_narrow_range(self):
        with self.assertRaises(InsufficientRange):
            fit_power_law(_samples(2.0, lo=0.5, hi=1.0))

    def test_non_positive_values(self):
        samples = _samples(2.0)
        samples[3] = (samples[3][0], -1.0)
        with self.assertRaises(NonPositiveValue):
            fit_power_law(samples)

    def test_noisy_fit_is_not_accepted(self):
        rng = np.random.default_rng(3)
        samples = [(x, y * np.exp(rng.normal(scale=1.0))) for x, y in _samples(0.2)]
        self.assertFalse(fit_power_law(samples).accepted)

    def test_loglog_slope(self):
        slope, intercept, r2 = loglog_slope([1.0, 10.0], [2.0, 200.0])
        self.assertAlmostEqual(slope, 2.0)
        self.assertAlmostEqual(intercept, np.log(2.0))
        self.assertAlmostEqual(r2, 1.0)


class FixedExponentTests(unittest.TestCase):
    def test_amplitude_of_exact_law(self):
        amplitude, spread = fit_fixed_exponent(_samples(1.0, amplitude=0.7), 1.0)
        self.assertAlmostEqual(amplitude, 0.7, places=10)
        self.assertAlmostEqual(spread, 0.0, places=10)

    def test_wrong_exponent_shows_spread(self):
        _, spread = fit_fixed_exponent(_samples(2.0), 1.0)
        self.assertGreater(spread, 100.0)


if __name__ == "__main__":
    unittest.main()
