import json

from src.api.fixtures import MODELS_DIR
from src.api.report_file import read_report
from src.cli import CSV_COLUMNS, main
from src.core.config import ExitCode

ZERO = [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
RAISING = [[[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]
LOWERING = [[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
HALF = 0.7071067811865476


def _write_model(tmp_path, name="model.json", **fields):
    document = {
        "format_version": "1.0",
        "dim": 2,
        "hamiltonian": ZERO,
        "target": {"kind": "pure_state", "payload": [[1.0, 0.0], [0.0, 0.0]]},
    }
    document.update(fields)
    path = tmp_path / name
    path.write_text(json.dumps(document))
    return str(path)


def _model(name):
    return str(MODELS_DIR / name)


class TestAnalyze:
    def test_qubit_feedback_example_is_attractive(self, capsys):
        assert main(["analyze", "--model", _model("example1.json")]) == ExitCode.SUCCESS
        report = json.loads(capsys.readouterr().out)
        assert report["command"] == "analyze"
        assert report["analysis"]["attractive"] is True
        assert report["synthesis"]["feasible"] is True
        assert report["convergence_rate"] > 0

    def test_bell_target_without_control_is_invariant_only(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["analyze", "--model", _model("example3_no_control.json"), "--out-report", str(out)])
        assert code == ExitCode.INVARIANT_ONLY
        analysis = read_report(out)["analysis"]
        assert analysis["invariant"] is True
        assert analysis["attractive"] is False
        assert len(analysis["obstruction_witness"]) == 2

    def test_leaky_noise_is_not_invariant(self, tmp_path, capsys):
        path = _write_model(tmp_path, noise=[{"matrix": RAISING, "rate": 1.0}])
        assert main(["analyze", "--model", path]) == ExitCode.NOT_INVARIANT
        report = json.loads(capsys.readouterr().out)
        assert report["analysis"]["invariant"] is False
        assert "convergence_rate" not in report

    def test_target_override(self, tmp_path):
        path = _write_model(tmp_path, noise=[{"matrix": LOWERING, "rate": 1.0}])
        target = tmp_path / "target.json"
        target.write_text(json.dumps({"kind": "pure_state", "payload": [[0.0, 0.0], [1.0, 0.0]]}))
        assert main(["analyze", "--model", path]) == ExitCode.SUCCESS
        assert main(["analyze", "--model", path, "--target", str(target)]) == ExitCode.NOT_INVARIANT

    def test_reports_are_reproducible(self, tmp_path):
        first, second = tmp_path / "first.json", tmp_path / "second.json"
        for out in (first, second):
            assert main(["analyze", "--model", _model("example1.json"), "--out-report", str(out)]) == 0
        assert first.read_bytes() == second.read_bytes()


class TestInputErrors:
    def test_negative_rate(self, tmp_path):
        path = _write_model(tmp_path, noise=[{"matrix": LOWERING, "rate": -1.0}])
        assert main(["analyze", "--model", path]) == ExitCode.INPUT_ERROR

    def test_missing_model_file(self, tmp_path):
        assert main(["analyze", "--model", str(tmp_path / "absent.json")]) == ExitCode.INPUT_ERROR

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\n")
        assert main(["synthesize", "--model", str(path)]) == ExitCode.INPUT_ERROR

    def test_invalid_tolerance_flag(self):
        assert main(["analyze", "--model", _model("example1.json"), "--tol", "2.0"]) == ExitCode.INPUT_ERROR

    def test_usage_errors(self):
        assert main([]) == ExitCode.INPUT_ERROR
        assert main(["demo", "example9"]) == ExitCode.INPUT_ERROR

    def test_help_exits_cleanly(self, capsys):
        assert main(["--help"]) == ExitCode.SUCCESS
        assert "synthesize" in capsys.readouterr().out


class TestSynthesize:
    def test_equatorial_state_is_infeasible(self, tmp_path, capsys):
        path = _write_model(
            tmp_path,
            measurement=LOWERING,
            target={"kind": "pure_state", "payload": [[HALF, 0.0], [HALF, 0.0]]},
        )
        assert main(["synthesize", "--model", path]) == ExitCode.INFEASIBLE
        report = json.loads(capsys.readouterr().out)
        assert report["synthesis"]["feasible"] is False
        reason = report["synthesis"]["infeasibility_reason"]
        assert "[rho_d, M + M†] != 0 violated" in reason
        assert "commutes" in reason

    def test_written_closed_loop_is_attractive(self, tmp_path):
        closed = tmp_path / "closed.json"
        code = main(["synthesize", "--model", _model("example1.json"), "--out-model", str(closed)])
        assert code == ExitCode.SUCCESS
        written = json.loads(closed.read_text())
        assert "noise" in written and "measurement" not in written
        assert main(["analyze", "--model", str(closed)]) == ExitCode.SUCCESS

    def test_triplet_example(self, tmp_path):
        out = tmp_path / "report.json"
        assert main(["synthesize", "--model", _model("example4.json"), "--out-report", str(out)]) == ExitCode.SUCCESS
        report = read_report(out)
        assert report["synthesis"]["verified_attractive"] is True
        assert report["analysis"]["attractive"] is True


class TestSimulate:
    def test_zero_horizon_writes_the_initial_row(self, tmp_path):
        path = _write_model(tmp_path, noise=[{"matrix": LOWERING, "rate": 1.0}])
        csv = tmp_path / "series.csv"
        code = main(["simulate", "--model", path, "--T", "0", "--ensemble", "1", "--out-csv", str(csv)])
        assert code == ExitCode.SUCCESS
        lines = csv.read_text().strip().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 2

    def test_feedback_example_converges(self, tmp_path):
        out, csv = tmp_path / "report.json", tmp_path / "series.csv"
        args = ["simulate", "--model", _model("example1.json"), "--T", "40", "--steps", "40", "--ensemble", "3"]
        assert main(args + ["--out-report", str(out), "--out-csv", str(csv)]) == ExitCode.SUCCESS
        report = read_report(out)
        assert report["verification"]["passed"] is True
        assert report["metrics"]["final_V_max"] < 1e-6
        assert len(csv.read_text().strip().splitlines()) == 1 + 3 * 41

    def test_obstructed_target_fails_verification(self, tmp_path):
        dephasing = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]]
        path = _write_model(tmp_path, noise=[{"matrix": dephasing, "rate": 1.0}])
        code = main(["simulate", "--model", path, "--T", "10", "--steps", "10", "--ensemble", "2"])
        assert code == ExitCode.INVARIANT_ONLY


class TestDemo:
    def test_qubit_demo(self, capsys):
        assert main(["demo", "example1", "--ensemble", "3"]) == ExitCode.SUCCESS
        out = capsys.readouterr().out
        assert "feedback max elementwise residual" in out
        assert "passed" in out

    def test_demo_report(self, tmp_path):
        out = tmp_path / "demo.json"
        assert main(["demo", "example1", "--ensemble", "2", "--out-report", str(out)]) == ExitCode.SUCCESS
        report = read_report(out)
        assert report["command"] == "demo"
        assert report["free_blocks_from_published"] is False
        assert max(report["published_residuals"].values()) < 1e-9

    def test_seeded_free_blocks_are_announced(self, tmp_path, capsys):
        out = tmp_path / "demo.json"
        main(["demo", "example3", "--ensemble", "1", "--out-report", str(out)])
        assert "seeded from the published feedback" in capsys.readouterr().out
        report = read_report(out)
        assert report["free_blocks_from_published"] is True
        assert report["published_residuals"]["feedback"] < 1e-9
