import json
import math

import pytest

from demtrack.cli import main
from demtrack.processes import balls_in_bins_spec, greedy_matching_spec
from demtrack.specio import save_spec, spec_to_dict


@pytest.fixture
def balls_spec_file(tmp_path):
    spec, _ = balls_in_bins_spec(2000, lam=1e-3)
    path = tmp_path / "balls.json"
    save_spec(spec, path)
    return path


@pytest.fixture
def matching_spec_file(tmp_path):
    spec, _ = greedy_matching_spec(400, lam=0.02)
    path = tmp_path / "matching.json"
    save_spec(spec, path)
    return path


class TestSolve:
    def test_prints_constants_and_writes_csv(self, balls_spec_file, tmp_path, capsys):
        out = tmp_path / "grid.csv"
        assert main(["solve", str(balls_spec_file), "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "T = 2" in text
        assert "lambda_admissible = true" in text
        sigma = float(next(l for l in text.splitlines() if l.startswith("sigma")).split("=")[1])
        assert abs(sigma - (2 - 3 * math.e**2 * 1e-3)) < 2e-3
        rows = out.read_text().splitlines()
        assert rows[0] == "t,y_1"
        assert len(rows) > 2000

    def test_constant_drift_solution_csv(self, tmp_path):
        # constant drift -2 gives a linear grid; exercises the CSV path
        spec, _ = greedy_matching_spec(100, lam=0.02)
        path = tmp_path / "m.json"
        save_spec(spec, path)
        out = tmp_path / "m.csv"
        assert main(["solve", str(path), "--out", str(out)]) == 0
        rows = out.read_text().splitlines()
        assert rows[0] == "t,y_1"
        t1, y1 = (float(v) for v in rows[1].split(","))
        assert y1 == pytest.approx(1.0 - 2.0 * t1, rel=1e-9)

    def test_malformed_json_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        assert main(["solve", str(bad)]) == 2
        assert "error:" in capsys.readouterr().err


class TestSimulate:
    def test_deterministic_outputs(self, balls_spec_file, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            rc = main(
                ["simulate", str(balls_spec_file), "--count", "1", "--seed", "7",
                 "--out", str(out)]
            )
            assert rc == 0
        f1 = (out1 / "traj_0000.csv").read_text()
        f2 = (out2 / "traj_0000.csv").read_text()
        assert f1 == f2
        assert f1.splitlines()[0] == "i,Y_1,drift_1,flags"

    def test_monte_carlo_tracks_limit(self, tmp_path):
        spec, _ = balls_in_bins_spec(100, lam=5e-3)
        path = tmp_path / "small.json"
        save_spec(spec, path)
        out = tmp_path / "runs"
        assert main(
            ["simulate", str(path), "--count", "1", "--seed", "3", "--out", str(out),
             "--full"]
        ) == 0
        rows = (out / "traj_0000.csv").read_text().splitlines()[1:]
        i_last, y_last = rows[-1].split(",")[:2]
        t_end = int(i_last) / 100
        assert abs(int(y_last) / 100 - math.exp(-t_end)) < 0.2

    def test_deviation_tracking_flag(self, balls_spec_file, tmp_path, capsys):
        rc = main(
            ["simulate", str(balls_spec_file), "--count", "1", "--seed", "2",
             "--out", str(tmp_path / "d"), "--deviations"]
        )
        assert rc == 0
        assert "sup_deviation = " in capsys.readouterr().out

    def test_unknown_plugin_exits_2(self, tmp_path, capsys):
        doc = spec_to_dict(balls_in_bins_spec(100)[0])
        doc["plugin"] = "mystery-process"
        path = tmp_path / "u.json"
        path.write_text(json.dumps(doc))
        assert main(["simulate", str(path), "--out", str(tmp_path / "x")]) == 2
        assert "unknown plugin" in capsys.readouterr().err


class TestVerify:
    def test_pass_run_exits_0(self, matching_spec_file, tmp_path, capsys):
        report = tmp_path / "report.json"
        rc = main(
            ["verify", str(matching_spec_file), "--count", "5", "--seed", "1",
             "--report", str(report)]
        )
        assert rc == 0
        doc = json.loads(report.read_text())
        assert doc["schema"] == 1
        assert doc["failure_count"] == 0
        out = capsys.readouterr().out
        assert "verdict: PASS" in out

    def test_truncated_without_extensions_exits_2(self, balls_spec_file, capsys):
        rc = main(["verify", str(balls_spec_file), "--mode", "truncated", "--count", "2"])
        assert rc == 2
        assert "extensions" in capsys.readouterr().err

    def test_truncated_with_extensions_runs(self, tmp_path):
        spec, _ = greedy_matching_spec(400, lam=0.02)
        doc = spec_to_dict(spec)
        doc["extensions"] = {"gamma": 0.0, "B": 2.0, "x": 0.0}
        path = tmp_path / "t.json"
        path.write_text(json.dumps(doc))
        assert main(["verify", str(path), "--mode", "truncated", "--count", "3"]) == 0

    def test_inadmissible_lambda_exits_2(self, tmp_path, capsys):
        spec, _ = balls_in_bins_spec(2000, lam=1e-3)
        doc = spec_to_dict(spec)
        doc["lambda"] = 1e-6
        path = tmp_path / "bad_lam.json"
        path.write_text(json.dumps(doc))
        assert main(["verify", str(path), "--count", "2"]) == 2
        assert "lambda" in capsys.readouterr().err


class TestBounds:
    @pytest.mark.parametrize(
        "argv,expected",
        [
            (["bounds", "azuma", "--m", "100", "--c", "1", "--t", "20"],
             "0.270670566473"),
            (["bounds", "theorem", "--a", "2", "--n", "1000000", "--lam", "0.01",
              "--T", "1", "--beta", "1"],
             "1.49066126883e-05"),
            (["bounds", "azuma", "--m", "100", "--c", "1", "--t", "0"], "2"),
            (["bounds", "gronwall-discrete", "--c", "2", "--b", "1", "--a", "0.5",
              "--m", "4"],
             "29.5562243957"),
            (["bounds", "binomial-tail", "--m", "2", "--gamma", "0.5", "--k", "1"],
             "0.75"),
            (["bounds", "stability", "--lam", "0.01", "--delta", "0.001", "--L", "1",
              "--T", "2"],
             "0.0886686731872"),
        ],
    )
    def test_values(self, argv, expected, capsys):
        assert main(argv) == 0
        assert capsys.readouterr().out.strip() == expected

    def test_lambda_alias(self, capsys):
        assert main(
            ["bounds", "theorem", "--a", "1", "--n", "8", "--lambda", "1",
             "--T", "1", "--beta", "1"]
        ) == 0
        assert capsys.readouterr().out.strip() == "0.735758882343"

    def test_invalid_parameters_exit_2(self, capsys):
        assert main(["bounds", "azuma", "--m", "0", "--c", "1", "--t", "1"]) == 2
