import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase, override_settings

from core.exceptions import ConfigError
from experiments.models import ExperimentLogEvent, ExperimentRun
from experiments.services import (
    EXIT_CONFIG,
    EXIT_PASSED,
    EXIT_VIOLATED,
    SUBCOMMANDS,
    ExperimentConfig,
    ExperimentService,
    SubcommandResult,
    lemma_threshold,
    read_config_file,
    run_subcommand,
    trial_seeds,
)


def run_command(*args, **options):
    out, err = StringIO(), StringIO()
    call_command("largesieve", *args, stdout=out, stderr=err, **options)
    return out.getvalue(), err.getvalue()


class ExperimentConfigTests(TestCase):
    def test_aliases_and_defaults(self):
        config = ExperimentConfig.from_mapping({"d": "5", "x": "100", "b": "0.5", "chars": "1, 2", "c": "0.25"})
        self.assertEqual(config.b_exponent, 0.5)
        self.assertEqual(config.characters, [1, 2])
        self.assertEqual(config.c_override, 0.25)
        self.assertEqual((config.coefficients, config.trials, config.seed, config.format), ("ones", 1, 0, "json"))

    def test_rejections(self):
        for values in (
            {"d": 10, "x": 5},
            {"d": 5, "x": 100, "b": 0},
            {"d": 5, "x": 100, "trials": 0},
            {"d": 5, "x": 100, "chars": "odd"},
            {"d": 5, "x": 100, "format": "xml"},
            {"x": 100},
        ):
            with self.assertRaises(ConfigError, msg=values):
                ExperimentConfig.from_mapping(values)

    def test_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.conf"
            path.write_text("# verify run\nd = 5\nx=1000  # upper bound\n\nsigma-max=3\n")
            self.assertEqual(read_config_file(path), {"d": "5", "x": "1000", "sigma_max": "3"})
            path.write_text("d 5\n")
            with self.assertRaises(ConfigError):
                read_config_file(path)
        with self.assertRaises(ConfigError):
            read_config_file(Path(tmp) / "missing.conf")

    def test_trial_seeds(self):
        self.assertEqual(trial_seeds(7, 3), trial_seeds(7, 3))
        self.assertEqual(len(set(trial_seeds(7, 20))), 20)
        self.assertEqual(trial_seeds(7, 3), trial_seeds(7, 5)[:3])


class LargeSieveCommandTests(TestCase):
    def test_verify_passes(self):
        out, _ = run_command("verify", d=5, x=10**4, chars="non-principal", coeffs="ones", trials=1)
        payload = json.loads(out)
        self.assertTrue(payload["passed"])
        self.assertEqual(payload["subcommand"], "verify")
        self.assertEqual(payload["config"]["x"], 10**4)
        report = payload["reports"][0]
        self.assertEqual(report["k"], 3)
        self.assertLessEqual(report["lhs"], report["rhs"])
        self.assertAlmostEqual(payload["constants"]["c_used"], 4 * payload["constants"]["c1_hat"])

    def test_characters_trivial_modulus(self):
        out, _ = run_command("characters", d=1, x=10)
        payload = json.loads(out)
        self.assertEqual(len(payload["reports"]), 1)
        self.assertEqual(payload["reports"][0]["values"], [[1.0, 0.0]])
        out, _ = run_command("characters", d=1, x=10, format="csv")
        self.assertEqual(out.splitlines(), ["n,1:", "1,\"1.0,0.0\""])

    def test_d_above_x(self):
        with self.assertRaises(CommandError) as ctx:
            run_command("verify", d=10, x=5)
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)
        self.assertFalse(ExperimentRun.objects.exists())

    def test_domain_error_exits_with_config_code(self):
        with self.assertRaises(CommandError) as ctx:
            run_command("verify", d=5, x=100, chars="7")
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, ExperimentRun.STATUS_FAILED)
        self.assertIn("7", run.last_error)
        self.assertTrue(run.logs.filter(step=ExperimentLogEvent.STEP_ERROR, level=ExperimentLogEvent.LEVEL_ERROR).exists())

    def test_bad_coefficient_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "coeffs.txt"
            path.write_text("11 1.0 0.0\n13 one 0.0\n")
            with self.assertRaises(CommandError) as ctx:
                run_command("verify", d=5, x=100, coeffs=str(path))
            self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)
            path.write_text("12 1.0 0.0\n")
            with self.assertRaises(CommandError) as ctx:
                run_command("verify", d=5, x=100, coeffs=str(path))
            self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)
        with self.assertRaises(CommandError) as ctx:
            run_command("verify", d=5, x=100, coeffs="gaussian")
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_coefficient_file_is_used(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "coeffs.txt"
            path.write_text("# single prime\n101 1.0 0.0\n")
            out, _ = run_command("verify", d=5, x=200, coeffs=str(path), c=0.5)
        report = json.loads(out)["reports"][0]
        self.assertAlmostEqual(report["lhs"], 4 / 101**2, places=15)
        self.assertAlmostEqual(report["weighted_norm"], 1 / 101, places=15)

    def test_output_is_deterministic(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "report.json"
            outputs = []
            for _ in range(2):
                _, err = run_command(
                    "verify", d=7, x=2000, chars="non-principal", coeffs="random-complex", trials=2, seed=11, out=str(path)
                )
                self.assertIn("passed", err)
                outputs.append(path.read_bytes())
        self.assertEqual(outputs[0], outputs[1])
        payload = json.loads(outputs[0])
        self.assertEqual(len(payload["reports"]), 2)
        self.assertEqual([r["seed"] for r in payload["reports"]], trial_seeds(11, 2))

    def test_flags_override_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.conf"
            path.write_text("d=5\nx=1000\nchars=non-principal\ntrials=2\ncoeffs=random-real\n")
            out, _ = run_command("variant-verify", config=str(path), x=2000)
        payload = json.loads(out)
        self.assertEqual(payload["config"]["x"], 2000)
        self.assertEqual(payload["config"]["trials"], 2)
        self.assertEqual(payload["config"]["characters"], "non-principal")
        self.assertTrue(all(r["variant"] == "re-variant" for r in payload["reports"]))
        self.assertTrue(payload["passed"])

    def test_run_records(self):
        run_command("verify", d=5, x=1000, chars="non-principal")
        run = ExperimentRun.objects.get()
        self.assertEqual(run.subcommand, "verify")
        self.assertEqual(run.status, ExperimentRun.STATUS_DONE)
        self.assertEqual(run.exit_code, EXIT_PASSED)
        self.assertTrue(run.passed)
        self.assertEqual(run.config["d"], 5)
        self.assertTrue(run.report["passed"])
        self.assertIsNotNone(run.ended_at)
        steps = set(run.logs.values_list("step", flat=True))
        self.assertTrue({ExperimentLogEvent.STEP_CONFIG, ExperimentLogEvent.STEP_CONSTANTS, ExperimentLogEvent.STEP_REPORT} <= steps)

    def test_no_record(self):
        run_command("characters", d=5, x=10, no_record=True)
        self.assertFalse(ExperimentRun.objects.exists())
        self.assertFalse(ExperimentLogEvent.objects.exists())

    def test_csv_verification_rows(self):
        out, _ = run_command("verify", d=5, x=500, chars="1,2", coeffs="random-complex", trials=3, format="csv")
        lines = out.splitlines()
        self.assertEqual(lines[0], "seed,k,lhs,rhs,ratio,c_used,passed")
        self.assertEqual(len(lines), 4)

    def test_lemma_scan(self):
        out, _ = run_command("lemma-scan", d=5, x=2000, chars="non-principal")
        payload = json.loads(out)
        self.assertTrue(payload["passed"])
        self.assertEqual(len(payload["reports"]), 3)
        self.assertLessEqual(payload["constants"]["empirical_max"], payload["constants"]["threshold"])
        out, _ = run_command("lemma-scan", d=5, x=2000, chars="2", format="csv")
        lines = out.splitlines()
        self.assertEqual(lines[0], "w,y,t,sigma,re_value,abs_value,character")
        self.assertTrue(all(line.endswith("5:2") for line in lines[1:]))

    def test_lemma_scan_needs_a_non_principal_character(self):
        with self.assertRaises(CommandError) as ctx:
            run_command("lemma-scan", d=5, x=2000, chars="0")
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_record_threshold(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "thresholds.json"
            with override_settings(LSL_LEMMA_THRESHOLD_FILE=path, LSL_LEMMA_THRESHOLD=6.0):
                self.assertEqual(lemma_threshold(7), 6.0)
                out, _ = run_command("lemma-scan", d=7, x=1000, record_threshold=True)
                observed = json.loads(out)["constants"]["empirical_max"]
                stored = json.loads(path.read_text())["by_modulus"]["7"]
                self.assertAlmostEqual(stored, 1.25 * observed, places=12)
                self.assertAlmostEqual(lemma_threshold(7), stored, places=12)
                self.assertEqual(lemma_threshold(5), 6.0)

    def test_lemma_scan_above_pinned_threshold_fails(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "thresholds.json"
            path.write_text(json.dumps({"by_modulus": {"5": 1e-6}, "default": 1.0}))
            with override_settings(LSL_LEMMA_THRESHOLD_FILE=path):
                with self.assertRaises(CommandError) as ctx:
                    run_command("lemma-scan", d=5, x=2000, chars="non-principal", no_record=True)
                self.assertEqual(ctx.exception.returncode, EXIT_VIOLATED)
                run_command("lemma-scan", d=7, x=2000, chars="non-principal", no_record=True)

    def test_estimate_constants(self):
        out, _ = run_command("estimate-constants", d=7, x=1000, chars="1,2,3")
        constants = json.loads(out)["constants"]
        self.assertGreaterEqual(constants["c1_hat"], 0.0)
        self.assertAlmostEqual(constants["c_default"], 4 * constants["c1_hat"])

    def test_estimate_constants_needs_two_characters(self):
        with self.assertRaises(CommandError) as ctx:
            run_command("estimate-constants", d=7, x=1000, chars="1")
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_extremal(self):
        out, _ = run_command("extremal", d=5, x=1000, chars="non-principal")
        payload = json.loads(out)
        self.assertTrue(payload["passed"])
        self.assertEqual({r["pattern"] for r in payload["reports"]}, {0, 1, 2, 3})
        for report in payload["reports"]:
            self.assertGreaterEqual(report["ratio_to_L"], report["max_diagonal_ratio"] * (1 - 1e-9))

    def test_duality_selftest(self):
        out, _ = run_command("duality-selftest", d=5, x=1000, chars="non-principal", trials=20, seed=4)
        payload = json.loads(out)
        self.assertTrue(payload["passed"])
        kinds = [r["kind"] for r in payload["reports"]]
        self.assertEqual(kinds, ["characters", "synthetic"])
        self.assertAlmostEqual(payload["reports"][1]["fixture_lambda"], 4.0, places=9)

    def test_abel_check(self):
        out, _ = run_command("abel-check", d=5, x=1000, coeffs="random-complex", trials=2)
        payload = json.loads(out)
        self.assertTrue(payload["passed"])
        self.assertEqual(len(payload["reports"]), 8)
        self.assertEqual(payload["constants"]["bound_factor"], 2.0)


class ExperimentServiceTests(TestCase):
    def test_violation_exit_code(self):
        config = ExperimentConfig.from_mapping({"d": 5, "x": 100})
        with mock.patch.dict(SUBCOMMANDS, {"verify": lambda config, service: SubcommandResult(passed=False)}):
            outcome = ExperimentService().run("verify", config, StringIO())
        self.assertEqual(outcome.exit_code, EXIT_VIOLATED)
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, ExperimentRun.STATUS_VIOLATED)
        self.assertFalse(run.passed)

    def test_unexpected_errors_close_the_run(self):
        config = ExperimentConfig.from_mapping({"d": 5, "x": 100})

        def explode(config, service):
            raise RuntimeError("boom")

        with mock.patch.dict(SUBCOMMANDS, {"verify": explode}):
            with self.assertRaises(RuntimeError):
                ExperimentService().run("verify", config, StringIO())
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, ExperimentRun.STATUS_FAILED)
        self.assertIn("boom", run.last_error)

    def test_run_subcommand(self):
        self.assertEqual(run_subcommand("verify", {"d": 10, "x": 5}), EXIT_CONFIG)
        self.assertEqual(run_subcommand("nonsense", {"d": 5, "x": 10}, record=False), EXIT_CONFIG)
        stream = StringIO()
        self.assertEqual(run_subcommand("characters", {"d": 8, "x": 10}, stream, record=False), EXIT_PASSED)
        self.assertEqual(len(json.loads(stream.getvalue())["reports"]), 4)

    def test_clip_log(self):
        service = ExperimentService(record=False)
        service.log_max_chars = 10
        clipped, meta = service._clip_log("a" * 7 + "b" * 13)
        self.assertEqual(clipped, "aaaaaaa\n...\nbbb")
        self.assertEqual(meta, {"clipped": True, "original_chars": 20, "stored_chars": 15})
        self.assertEqual(service._clip_log("short"), ("short", {}))

    def test_long_reports_are_clipped_in_log_events(self):
        with override_settings(LSL_LOG_MAX_CHARS=100):
            run_subcommand("characters", {"d": 7, "x": 10}, StringIO())
        event = ExperimentLogEvent.objects.get(step=ExperimentLogEvent.STEP_REPORT)
        self.assertTrue(event.metadata["clipped"])
        self.assertEqual(len(event.content), 105)
