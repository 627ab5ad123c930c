import json
import math
import os
import sys
import tempfile
import unittest
from pathlib import Path

_REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
_SRC_PATH = os.path.join(_REPO_ROOT, "src")
if _SRC_PATH not in sys.path:
    sys.path.insert(0, _SRC_PATH)

from kinetic_fluid_modes.config import (  # noqa: E402
    DEFAULT_TOLERANCES,
    PARAMETER_SET_NAMES,
    RunConfig,
    apply_fast,
    dump_config,
    load_config,
    parameter_set,
)
from kinetic_fluid_modes.errors import ConfigError  # noqa: E402

_CONFIG_DIR = os.path.join(_REPO_ROOT, "configs")


class ParameterSetTests(unittest.TestCase):
    def test_shipped_files_match_the_builtin_sets(self):
        for name in PARAMETER_SET_NAMES:
            with open(os.path.join(_CONFIG_DIR, f"{name}.json"), "r", encoding="utf-8") as f:
                data = json.load(f)
            self.assertEqual(data, parameter_set(name).to_dict(), msg=name)
            self.assertEqual(load_config(os.path.join(_CONFIG_DIR, f"{name}.json")).name, name)

    def test_dict_round_trip(self):
        for name in PARAMETER_SET_NAMES:
            config = parameter_set(name)
            self.assertEqual(RunConfig.from_dict(config.to_dict()), config)

    def test_fractional_sets_use_the_logarithmic_map(self):
        config = parameter_set("poly-5.5-2")
        self.assertEqual(config.grid.radial_map, "logarithmic")
        self.assertEqual(config.equilibrium.beta, 2.0)
        self.assertTrue(math.isinf(parameter_set("gaussian").alpha))

    def test_beta_two_set_stays_inside_the_acoustic_disk(self):
        self.assertEqual(parameter_set("poly-5.5-2").spectral.eta_max, 0.02)
        self.assertEqual(parameter_set("poly-5.5-0").spectral.eta_max, 0.1)
        self.assertEqual(parameter_set("poly-5.5-2").amplitude.r_values[-1], 256.0)

    def test_unknown_set(self):
        with self.assertRaises(ConfigError):
            parameter_set("poly-3-0")


class ValidationTests(unittest.TestCase):
    def _load(self, data):
        return RunConfig.from_dict(data)

    def test_partial_config_uses_defaults(self):
        config = self._load({"name": "tiny", "grid": {"n_radial": 24}})
        self.assertEqual(config.grid.n_radial, 24)
        self.assertEqual(config.grid.n_angular, 32)
        self.assertEqual(config.merged_tolerances, DEFAULT_TOLERANCES)

    def test_rejects_unknown_keys(self):
        with self.assertRaises(ConfigError):
            self._load({"grid": {"nodes": 12}})
        with self.assertRaises(ConfigError):
            self._load({"solver": {}})

    def test_rejects_wrong_types(self):
        with self.assertRaises(ConfigError):
            self._load({"grid": {"n_radial": 24.5}})
        with self.assertRaises(ConfigError):
            self._load({"spectral": {"eta_max": True}})
        with self.assertRaises(ConfigError):
            self._load({"macro": {"xi": [0.1, "a"]}})

    def test_rejects_inconsistent_spectral_section(self):
        with self.assertRaises(ConfigError):
            self._load({"spectral": {"eta_max": 0.3}})
        with self.assertRaises(ConfigError):
            self._load({"spectral": {"eta_min": 0.2, "eta_max": 0.1}})
        with self.assertRaises(ConfigError):
            self._load({"spectral": {"r_bar": 1.0}})
        with self.assertRaises(ConfigError):
            self._load({"spectral": {"trust_factor": 1.0}})

    def test_rejects_bad_tolerances(self):
        with self.assertRaises(ConfigError):
            self._load({"tolerances": {"exponent": -0.1}})
        with self.assertRaises(ConfigError):
            self._load({"tolerances": {"speed": 0.1}})

    def test_polynomial_needs_alpha(self):
        with self.assertRaises(ConfigError):
            self._load({"equilibrium": {"kind": "polynomial"}})


class FileTests(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_dump_and_load(self):
        config = parameter_set("poly-8-0")
        path = dump_config(config, self.root / "out" / "poly.json")
        self.assertEqual(load_config(path), config)

    def test_missing_and_malformed_files(self):
        with self.assertRaises(ConfigError):
            load_config(self.root / "missing.json")
        broken = self.root / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_config(broken)


class FastModeTests(unittest.TestCase):
    def test_fast_mode_shrinks_and_relaxes(self):
        fast = apply_fast(parameter_set("gaussian"))
        self.assertEqual(fast.grid.n_radial, 32)
        self.assertEqual(fast.grid.n_angular, 16)
        self.assertEqual(fast.spectral.n_eta, 20)
        self.assertEqual(fast.macro.xi, [0.1, 0.2, 0.5, 1.0])
        self.assertEqual(fast.macro.n_radial, 24)
        tolerances = fast.merged_tolerances
        self.assertAlmostEqual(tolerances["exponent"], 0.2)
        self.assertAlmostEqual(tolerances["transversal_drop"], 1.5)
        self.assertAlmostEqual(tolerances["r_squared"], 0.99)

    def test_fast_mode_leaves_the_original_alone(self):
        config = parameter_set("gaussian")
        apply_fast(config)
        self.assertEqual(config.grid.n_radial, 64)
        self.assertEqual(config.tolerances, {})


if __name__ == "__main__":
    unittest.main()
