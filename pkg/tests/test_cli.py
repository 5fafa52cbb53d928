"""End-to-end tests for the command-line harness."""

import json

import pytest

from diophlab.cli import main


def run_json(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip().startswith("{") else out


class TestDispatch:
    def test_count_example(self, capsys):
        code, payload = run_json(
            capsys, "count", "--x", "1/2", "--delta", "3/10", "--N", "10"
        )
        assert code == 0
        assert payload["table"][0][4:] == ["5", "2/1", "pass"]
        assert payload["verdicts"] == {"bound": "pass"}

    def test_transference(self, capsys):
        code, payload = run_json(
            capsys, "transference", "--x", "golden,golden", "--H", "1000",
            "--Qmax", "100000", "--slack", "0.05",
        )
        assert code == 0
        assert payload["verdicts"]["transference"] == "pass"

    def test_exponent_resonance(self, capsys):
        code, payload = run_json(
            capsys, "exponent", "--x", "1/2", "--H", "100",
        )
        assert code == 0
        assert payload["verdicts"]["estimate"] == "inf"
        assert payload["verdicts"]["exact_resonance"] == "true"

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"x": "1/2", "delta": "3/10", "N": 5}))
        code, payload = run_json(
            capsys, "count", "--config", str(cfg), "--N", "10",
        )
        assert code == 0
        assert payload["config"]["N"] == 10  # flag wins
        assert payload["config"]["delta"] == "3/10"  # from file

    def test_config_echo_is_complete(self, capsys):
        _, payload = run_json(
            capsys, "count", "--x", "1/2", "--delta", "1/4", "--N", "10",
        )
        for key in ("precision", "scan_budget", "M", "format", "subcommand"):
            assert key in payload["config"]

    def test_json_sorted_keys(self, capsys):
        code = main(["count", "--x", "1/2", "--delta", "1/4", "--N", "10"])
        out = capsys.readouterr().out
        assert code == 0
        keys = list(json.loads(out).keys())
        assert keys == sorted(keys)


class TestExitCodes:
    def test_parse_error_is_2(self, capsys):
        assert main(["count", "--x", "1/2", "--delta", "bogus", "--N", "10"]) == 2

    def test_bad_psi_names_grammar(self, capsys):
        code = main(["cover", "--x", "sqrt2m1", "--psi", "garbage", "--N", "100"])
        err = capsys.readouterr().err
        assert code == 2
        assert "q^-A" in err

    def test_budget_error_is_3(self, capsys):
        code = main([
            "count", "--x", "sqrt2m1", "--delta", "1/10", "--N", "1000",
            "--scan-budget", "10",
        ])
        assert code == 3

    def test_missing_required_is_2(self, capsys):
        assert main(["count", "--x", "1/2", "--N", "10"]) == 2


class TestOutputFiles:
    def test_csv_with_sidecar(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        code = main([
            "count", "--x", "1/2", "--delta", "3/10", "--N", "10",
            "--out", str(out), "--format", "csv",
        ])
        assert code == 0
        text = out.read_text()
        assert text.splitlines()[0] == "x,delta,M,N,count,bound,pass"
        assert "\r" not in text
        sidecar = json.loads((tmp_path / "run.csv.run.json").read_text())
        assert sidecar["table"] == [["1/2", "3/10", "0", "10", "5", "2/1", "pass"]]

    def test_json_output_file(self, tmp_path, capsys):
        out = tmp_path / "run.json"
        code = main([
            "count", "--x", "1/2", "--delta", "3/10", "--N", "10",
            "--out", str(out),
        ])
        assert code == 0
        assert json.loads(out.read_text())["verdicts"] == {"bound": "pass"}


class TestReplay:
    def _record(self, tmp_path, *argv):
        out = tmp_path / "run.json"
        assert main([*argv, "--out", str(out)]) == 0
        return out

    def test_identical(self, tmp_path, capsys):
        out = self._record(
            tmp_path, "count", "--x", "sqrt2m1", "--delta", "1/10", "--N", "500",
        )
        assert main(["replay", str(out)]) == 0
        assert "identical" in capsys.readouterr().out

    def test_monte_carlo_identical(self, tmp_path, capsys):
        out = self._record(
            tmp_path, "measure", "--x", "sqrt2m1", "--psi", "q^-0.5",
            "--d", "2", "--k", "1", "--Qmax", "2000", "--n", "200",
            "--sampling", "monte-carlo", "--seed", "99",
        )
        assert main(["replay", str(out)]) == 0

    def test_drift_is_5(self, tmp_path, capsys):
        out = self._record(
            tmp_path, "count", "--x", "1/2", "--delta", "3/10", "--N", "10",
        )
        payload = json.loads(out.read_text())
        payload["table"][0][4] = "999"
        out.write_text(json.dumps(payload))
        code = main(["replay", str(out)])
        err = capsys.readouterr().err
        assert code == 5
        assert "table" in err

    def test_version_drift_is_5(self, tmp_path, capsys):
        out = self._record(
            tmp_path, "count", "--x", "1/2", "--delta", "3/10", "--N", "10",
        )
        payload = json.loads(out.read_text())
        payload["version"] = "0.0.0"
        out.write_text(json.dumps(payload))
        assert main(["replay", str(out)]) == 5

    def test_no_config_echo_is_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"table": []}))
        assert main(["replay", str(bad)]) == 2
