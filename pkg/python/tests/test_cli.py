import json
import os
import tempfile
from pathlib import Path
from unittest import mock

from base import GOLDEN
from base import QUARTIC
from base import HnfTestCase

from hnf.checks import CheckResult
from hnf.cli import COMMAND_HANDLERS
from hnf.cli import config_from_args
from hnf.cli import main
from hnf.config import RunConfig
from hnf.config import thread_count
from hnf.convergence import majorant_threshold
from hnf.errors import RangeError
from hnf.errors import UnknownConfigKey
from hnf.reports import SCHEMA_VERSION
from hnf.reports import jsonable
from hnf.reports import write_json


class CliTestCase(HnfTestCase):
    def set_up(self):
        super().set_up()
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = Path(tmp.name)
        self.out = self.dir / "report.json"

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    def run_main(self, *argv):
        return main([*argv, "--out", str(self.out)])

    def report(self):
        return json.loads(self.out.read_text(encoding="utf-8"))


class TestNormalFormCommands(CliTestCase):
    def test_hnf(self):
        path = self.write("quartic.txt", QUARTIC)
        ledger = self.dir / "ledger.csv"
        code = self.run_main("hnf", path, "--ledger", str(ledger))
        self.assert_equal(code, 0)
        report = self.report()
        self.assert_equal(report["schema_version"], SCHEMA_VERSION)
        self.assert_equal(report["command"], "hnf")
        self.assert_equal(report["result"]["steps"], 3)
        self.assert_equal(report["result"]["omega"], ["2*t1"])
        self.assert_equal(report["result"]["h"], "t1 + t1^2")
        self.assert_true(all(v == "pass" for v in report["checks"].values()))
        header = ledger.read_text(encoding="utf-8").splitlines()[0]
        self.assert_equal(header, "J,exact,magnitude,step,monomial")

    def test_bnf(self):
        path = self.write("quartic.txt", QUARTIC)
        self.assert_equal(self.run_main("bnf", path), 0)
        result = self.report()["result"]
        self.assert_equal(result["B"], "t1 + t1^2")
        self.assert_equal(result["generators"], 0)
        self.assert_equal(self.report()["checks"], {"strategies_agree": "pass"})

    def test_ledger_rows(self):
        path = self.write("golden.txt", GOLDEN)
        ledger = self.dir / "ledger.csv"
        code = self.run_main("bnf", path, "--ledger", str(ledger))
        self.assert_equal(code, 0)
        rows = ledger.read_text(encoding="utf-8").splitlines()
        self.assert_true(len(rows) > 1)

    def test_freq(self):
        path = self.write("quartic.txt", QUARTIC)
        self.assert_equal(self.run_main("freq", path), 0)
        self.assert_equal(self.report()["result"]["dimension"], 1)

    def test_parameters_in_report(self):
        path = self.write("quartic.txt", QUARTIC)
        self.run_main("freq", path, "--cutoff", "4")
        parameters = self.report()["parameters"]
        self.assert_equal(parameters["input"], "quartic.txt")
        self.assert_equal(parameters["cutoff"], 4)
        self.assert_true("out" not in parameters)


class TestAnalysisCommands(CliTestCase):
    def test_sigma(self):
        code = self.run_main(
            "arith", "sigma", "--beta", "1", "1.4142135623730951", "--kmax", "2"
        )
        self.assert_equal(code, 0)
        self.assert_equal(self.report()["command"], "arith sigma")
        self.assert_equal(len(self.report()["result"]["sigma"]), 3)
        table = self.out.with_suffix(".csv").read_text(encoding="utf-8")
        self.assert_equal(len(table.splitlines()), 4)

    def test_sigma_needs_beta(self):
        self.assert_equal(self.run_main("arith", "sigma"), 1)

    def test_bruno(self):
        code = self.run_main(
            "arith", "bruno", "--sequence", "doubleexp(1.75)", "--N", "10"
        )
        self.assert_equal(code, 0)
        self.assert_equal(self.report()["result"]["verdict"], "bruno")

    def test_absorb(self):
        code = self.run_main("arith", "absorb", "--N", "6")
        self.assert_equal(code, 0)
        self.assert_equal(self.report()["checks"], {"absorption": "pass"})

    def test_majorant(self):
        self.assert_equal(self.run_main("majorant", "--N", "20"), 0)
        result = self.report()["result"]
        self.assert_true(result["condition_c"])
        self.assert_equal(len(result["sequences"]["z"]), 21)

    def test_majorant_above_threshold(self):
        z0 = 2 * float(majorant_threshold(1, 1.75))
        self.assert_equal(self.run_main("majorant", "--z0", repr(z0)), 0)
        self.assert_true(self.report()["result"]["diverges"])

    def test_bad_kappa(self):
        self.assert_equal(self.run_main("majorant", "--kappa", "1.2"), 1)

    def test_lemmas(self):
        self.assert_equal(self.run_main("lemmas", "--samples", "200"), 0)
        checks = self.report()["checks"]
        self.assert_equal(checks["arnold_moser_equality"], "pass")
        self.assert_equal(len(checks), 7)

    def test_failed_check_exit_code(self):
        def failing(config, ledger):
            return [CheckResult("always", ["failed on purpose"])], {}

        with mock.patch.dict(COMMAND_HANDLERS, {"majorant": failing}):
            code = self.run_main("majorant")
        self.assert_equal(code, 2)
        report = self.report()
        self.assert_equal(report["checks"], {"always": "fail"})
        self.assert_equal(report["failures"], ["always: failed on purpose"])


class TestConfig(CliTestCase):
    def test_unknown_key(self):
        with self.assertRaises(UnknownConfigKey) as caught:
            RunConfig.from_mapping({"command": "majorant", "bogus": 1})
        self.assert_equal(caught.exception.key, "bogus")

    def test_unknown_key_in_file(self):
        path = self.write("config.json", json.dumps({"bogus": 1}))
        self.assert_equal(self.run_main("majorant", "--config", path), 1)

    def test_flags_override_file(self):
        path = self.write("config.json", json.dumps({"N": 5, "R": 2.0}))
        config, verbose = config_from_args(
            ["majorant", "--config", path, "--N", "3", "-vv"]
        )
        self.assert_equal(config.N, 3)
        self.assert_equal(config.R, 2.0)
        self.assert_equal(verbose, 2)

    def test_missing_input(self):
        self.assert_equal(self.run_main("hnf"), 1)

    def test_bad_usage(self):
        with self.assertRaises(SystemExit) as caught:
            main(["frobnicate"])
        self.assert_equal(caught.exception.code, 1)

    def test_thread_count(self):
        with mock.patch.dict(os.environ, {"HNF_THREADS": "4"}):
            self.assert_equal(thread_count(), 4)
        with mock.patch.dict(os.environ, {"HNF_THREADS": "0"}):
            with self.assertRaises(RangeError):
                thread_count()


class TestReports(CliTestCase):
    def test_jsonable(self):
        value = jsonable({"x": (1, 2), "ok": CheckResult("c")})
        self.assert_equal(value["x"], [1, 2])
        self.assert_equal(value["ok"]["passed"], True)

    def test_reports_are_reproducible(self):
        data = {"b": 1.5, "a": [3, 2]}
        write_json(self.out, data)
        first = self.out.read_bytes()
        write_json(self.out, data)
        self.assert_equal(self.out.read_bytes(), first)
        self.assert_true(first.startswith(b'{\n  "a"'))
