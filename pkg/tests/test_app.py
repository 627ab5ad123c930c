import json
import os
import sys
import tempfile
import unittest
from pathlib import Path

_REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
_SRC_PATH = os.path.join(_REPO_ROOT, "src")
if _SRC_PATH not in sys.path:
    sys.path.insert(0, _SRC_PATH)

from kinetic_fluid_modes.app import (  # noqa: E402
    EXIT_CONFIG,
    EXIT_DOMAIN,
    EXIT_FAILURE,
    EXIT_PASS,
    build_parser,
    main,
)


def _tiny_config(**overrides):
    data = {
        "name": "tiny",
        "grid": {"n_radial": 32, "n_angular": 8},
        "spectral": {"eta_min": 0.005, "eta_max": 0.05, "n_eta": 4},
        "macro": {"n_radial": 24, "n_angular": 8, "n_times": 16},
    }
    for section, values in overrides.items():
        data.setdefault(section, {}).update(values)
    return data


class ExitCodeTests(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def _write(self, data):
        path = self.root / "config.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    def _main(self, *argv):
        return main(list(argv) + ["--out", str(self.root / "results")])

    def test_no_command_prints_help(self):
        self.assertEqual(main([]), EXIT_PASS)

    def test_parser_shares_common_options(self):
        argv = ["verify", "--set", "poly-8-0", "--fast", "--workers", "2"]
        args = build_parser().parse_args(argv)
        self.assertEqual(args.set_name, "poly-8-0")
        self.assertTrue(args.fast)
        self.assertEqual(args.workers, 2)

    def test_configuration_errors(self):
        self.assertEqual(self._main("spectrum", "--config", str(self.root / "nope.json")),
                         EXIT_CONFIG)
        self.assertEqual(self._main("spectrum", "--set", "nope"), EXIT_CONFIG)
        self.assertEqual(self._main("verify", "--set", "nope"), EXIT_CONFIG)
        self.assertEqual(self._main("verify", "--workers", "0"), EXIT_CONFIG)

    def test_parameter_domain_errors(self):
        bad_alpha = self._write(_tiny_config(equilibrium={"kind": "polynomial", "alpha": 4.5}))
        self.assertEqual(self._main("spectrum", "--config", bad_alpha), EXIT_DOMAIN)
        zero_xi = self._write(_tiny_config(macro={"xi": [0.0, 0.2, 0.5, 1.0]}))
        self.assertEqual(self._main("evolve", "--config", zero_xi), EXIT_DOMAIN)
        large_eps = self._write(_tiny_config(macro={"epsilon": [0.5, 0.05]}))
        self.assertEqual(self._main("evolve", "--config", large_eps), EXIT_DOMAIN)

    def test_empty_eta_grid_fails(self):
        path = self._write(_tiny_config(spectral={"n_eta": 0}))
        self.assertEqual(self._main("spectrum", "--config", path), EXIT_FAILURE)


class SpectrumCommandTests(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)
        self.config = self.root / "tiny.json"
        self.config.write_text(json.dumps(_tiny_config()), encoding="utf-8")

    def tearDown(self):
        self._tmp.cleanup()

    def test_spectrum_writes_deterministic_outputs(self):
        outputs = []
        for run in ("first", "second"):
            out = self.root / run
            code = main(["spectrum", "--config", str(self.config), "--out", str(out)])
            self.assertEqual(code, EXIT_PASS)
            directory = out / "tiny"
            names = sorted(p.name for p in directory.iterdir())
            self.assertEqual(names, [
                "branch_acoustic_minus.csv",
                "branch_acoustic_plus.csv",
                "branch_boussinesq.csv",
                "branch_transversal.csv",
                "spectrum_summary.json",
            ])
            outputs.append((directory / "spectrum_summary.json").read_bytes())

        self.assertEqual(outputs[0], outputs[1])
        summary = json.loads(outputs[0])
        self.assertTrue(summary["passed"])
        self.assertEqual(summary["n_eta"], 4)
        self.assertEqual(summary["name"], "tiny")


class VerifyCommandTests(unittest.TestCase):
    """축소 격자 (--fast) 로 다항식 세트 전체 검증을 돌린다."""

    SETS = ("poly-8-0", "poly-5.5-0")

    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls._tmp.name)
        cls.codes, cls.reports, cls.scaling = {}, {}, {}
        for name in cls.SETS:
            cls.codes[name] = main(["verify", "--set", name, "--fast", "--out", str(cls.root)])
            directory = cls.root / name
            cls.reports[name] = json.loads((directory / "verify_report.json").read_text("utf-8"))
            cls.scaling[name] = json.loads((directory / "scaling_report.json").read_text("utf-8"))

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()

    def test_every_stage_runs(self):
        for name in self.SETS:
            report = self.reports[name]
            self.assertIsNone(report["error"], msg=name)
            self.assertEqual(set(report["stages"]), {"amplitude", "spectrum", "scaling", "evolve"})
            expected = EXIT_PASS if report["passed"] else EXIT_FAILURE
            self.assertEqual(self.codes[name], expected, msg=name)
            self.assertTrue((self.root / name / "verify_table.csv").exists())

    def test_fit_windows_cover_a_decade(self):
        for name in self.SETS:
            for fit_name, fit in self.scaling[name]["fits"].items():
                lo, hi = fit["window"]
                self.assertGreaterEqual(hi / lo, 10.0 * (1.0 - 1e-9), msg=f"{name} {fit_name}")

    def test_amplitude_tails_pass(self):
        for name in self.SETS:
            checks = self.reports[name]["stages"]["amplitude"]
            self.assertTrue(checks, msg=name)
            self.assertTrue(all(checks.values()), msg=f"{name}: {checks}")

    def test_exponents_and_limit_modes_pass(self):
        for name in self.SETS:
            checks = self.reports[name]["stages"]["scaling"]
            keys = [k for k in checks if k.startswith(("exponent_", "limit_mode_"))]
            self.assertEqual(len(keys), 9, msg=name)
            failed = [k for k in keys if not checks[k]]
            self.assertEqual(failed, [], msg=name)

    def test_spectral_rates_match_the_evolution(self):
        for name in self.SETS:
            checks = self.reports[name]["stages"]["evolve"]
            self.assertTrue(checks["spectral_consistency"], msg=name)


if __name__ == "__main__":
    unittest.main()
