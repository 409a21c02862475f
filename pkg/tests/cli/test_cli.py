"""
Command-line tests for coarsetk
"""

import json

import pytest

from coarsetk.cli import main, normalize_argv
from coarsetk.coarse_maps import map_from_function
from coarsetk.errors import BudgetExceeded
from coarsetk.metric_core import FiniteMetricSpace
from coarsetk.reports import RunReport
from coarsetk.storage import map_document, read_json, write_json


def run(capsys, *argv):
    """Run the CLI and return (exit code, parsed stdout report)"""
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out else None


@pytest.fixture(autouse=True)
def defaults(clean_env):
    return clean_env


class TestArgv:
    def test_negative_box_is_attached(self):
        """Test that a negative box is not mistaken for an option"""
        assert normalize_argv(["space", "gen", "--box", "-40:40"]) == ["space", "gen", "--box=-40:40"]
        assert normalize_argv(["--box", "0:3"]) == ["--box", "0:3"]

    def test_unknown_suite_is_a_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--suite", "nonsense"])
        assert exc.value.code == 2

    def test_missing_suite_is_a_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify"])
        assert exc.value.code == 2

    def test_bad_environment_is_a_usage_error(self, clean_env, capsys):
        """Test that a malformed budget variable stops before any work"""
        clean_env.setenv("COARSETK_BUDGET", "many")
        with pytest.raises(SystemExit) as exc:
            main(["space", "gen"])
        assert exc.value.code == 2


class TestSpaceCommands:
    """Test space gen, import, validate and info"""

    def test_gen_default_line(self, capsys):
        code, report = run(capsys, "space", "gen")
        assert code == 0
        assert report["command"] == "space gen"
        assert report["results"]["points"] == 10
        assert report["results"]["diameter"] == 9
        assert report["seed"] == 7

    def test_gen_negative_box(self, capsys, temp_dir):
        """Test a two-dimensional box given with a negative bound"""
        out = temp_dir / "plane.json"
        code, report = run(capsys, "space", "gen", "--lattice", "2", "--box", "-40:40", "--norm", "linf",
                           "--out", str(out))
        assert code == 0
        assert report["results"]["points"] == 6561
        assert report["results"]["diameter"] == 80
        assert report["results"]["document"] is None
        assert out.exists()

    def test_gen_box_count_mismatch(self, capsys):
        """Test that three boxes for a plane are refused with exit code 2"""
        code, report = run(capsys, "space", "gen", "--lattice", "2",
                           "--box", "0:3", "--box", "0:3", "--box", "0:3")
        assert code == 2
        assert report["checks"][0]["verdict"] == "fail"

    def test_validate_bad_matrix(self, capsys, temp_dir, sample_data):
        """Test that a triangle violation is reported with its points"""
        path = temp_dir / "bad.json"
        write_json({"matrix": sample_data["matrices"]["bad_matrix"]["matrix"]}, path)
        code, report = run(capsys, "space", "validate", str(path))
        assert code == 2
        check = report["checks"][0]
        assert check["verdict"] == "fail"
        assert check["counterexample"] == sample_data["matrices"]["bad_matrix"]["violation"]

    def test_validate_good_matrix(self, capsys, temp_dir, sample_data):
        path = temp_dir / "path5.json"
        write_json(sample_data["matrices"]["path5"], path)
        code, report = run(capsys, "space", "validate", str(path))
        assert code == 0
        assert report["summary"] == {"pass": 1, "fail": 0, "budget": 0}

    def test_import_then_info(self, capsys, temp_dir, sample_data):
        source, target = temp_dir / "square.json", temp_dir / "square_space.json"
        write_json(sample_data["matrices"]["square"], source)
        code, report = run(capsys, "space", "import", str(source), "--out", str(target))
        assert code == 0
        assert report["results"] == {"space": "square", "points": 4, "diameter": 2}

        code, report = run(capsys, "space", "info", str(target))
        assert code == 0
        assert report["results"]["kind"] == "matrix"
        assert report["results"]["realized_distances"] == 3

    def test_missing_file(self, capsys, temp_dir):
        code, report = run(capsys, "space", "info", str(temp_dir / "absent.json"))
        assert code == 2
        assert report["checks"][0]["verdict"] == "fail"


class TestMapCommands:
    @pytest.fixture
    def quarter_file(self, temp_dir, line16):
        f = map_from_function(line16, FiniteMetricSpace.lattice("line4", [(0, 3)], "l1"), lambda x: x // 4,
                              name="quarter")
        path = temp_dir / "quarter.json"
        write_json(map_document(f), path)
        return path

    def test_check_bn(self, capsys, quarter_file):
        """Test (B)_2 of the quarter map at two scales"""
        code, report = run(capsys, "map", "check-bn", "--map", str(quarter_file), "--n", "2", "--r", "1", "--r", "3")
        assert code == 0
        assert report["results"]["1"]["d"] == 3
        assert report["results"]["3"]["d"] == 7
        assert [check["values"]["d"] for check in report["checks"]] == [3, 7]

    def test_fit(self, capsys, quarter_file):
        code, report = run(capsys, "map", "fit", "--map", str(quarter_file))
        assert code == 0
        assert report["results"]["coarse_density"] == 0
        assert "fitted" in report["results"]["map"]


class TestPrecodeCommands:
    """Test building, validating and exporting precode structures"""

    def test_build_and_export_newick(self, capsys, temp_dir, sample_data):
        path = temp_dir / "dyadic4.json"
        code, report = run(capsys, "precode", "build-example", "dyadic", "--size", "4", "--n", "2", "--out", str(path))
        assert code == 0
        assert report["results"]["levels"] == [4, 2, 1]

        newick = temp_dir / "dyadic4.nwk"
        code, report = run(capsys, "export", str(path), "--format", "newick", "--out", str(newick))
        assert code == 0
        assert report["results"]["newick"] == sample_data["dyadic4_newick"]
        assert newick.read_text() == sample_data["dyadic4_newick"] + "\n"

    def test_validate_as_one_precode_fails(self, capsys, temp_dir):
        """Test that the dyadic structure is rejected as a 1-precode"""
        path = temp_dir / "dyadic8.json"
        run(capsys, "precode", "build-example", "dyadic", "--size", "8", "--n", "2", "--out", str(path))
        code, report = run(capsys, "precode", "validate", str(path), "--n", "1")
        assert code == 2
        assert report["checks"][0]["verdict"] == "fail"
        assert report["checks"][0]["counterexample"]["failures"][0]["check"] == "schedule"

    def test_report_flag_writes_file(self, capsys, temp_dir):
        report_path = temp_dir / "reports" / "gen.json"
        code = main(["--report", str(report_path), "space", "gen"])
        assert code == 0
        assert capsys.readouterr().out == ""
        assert read_json(report_path)["results"]["points"] == 10


class TestVerifyCommand:
    """Test the verify wiring with the suite runner patched out"""

    @pytest.fixture
    def passing_report(self):
        report = RunReport(command="verify", seed=11)
        report.add("demo", "always", True, {"x": 1})
        return report

    def test_arguments_and_csv(self, capsys, mocker, temp_dir, passing_report):
        run_suite = mocker.patch("coarsetk.cli.run_suite", return_value=passing_report)
        csv_path = temp_dir / "verdicts.csv"
        code, report = run(capsys, "--seed", "11", "verify", "--suite", "closure", "--csv", str(csv_path))
        assert code == 0
        args, kwargs = run_suite.call_args
        assert args[:3] == ("closure", "quick", 11)
        assert kwargs == {"timings": False}
        assert csv_path.exists()
        assert report["summary"]["pass"] == 1

    def test_budget_exit_code(self, capsys, mocker):
        """Test that an exhausted budget exits with 3 and reports the bracket"""
        mocker.patch("coarsetk.cli.run_suite", side_effect=BudgetExceeded("coloring search", lower=1, upper=4))
        code, report = run(capsys, "verify", "--suite", "lemmas")
        assert code == 3
        assert report["checks"][0]["verdict"] == "budget"
        assert report["checks"][0]["values"] == {"lower": 1, "upper": 4}
