import json

import pytest

from numsense.cli import main
from numsense.diagnostics import GRADIENT_CHECK_NAMES


@pytest.fixture
def data_csv(tmp_path):
    path = tmp_path / "d.csv"
    assert main(["synth", "--n", "120", "--range", "16:77", "--bins", "5", "--seed", "7", "--out", str(path)]) == 0
    return path


class TestSynth:
    def test_row_count_and_determinism(self, tmp_path, data_csv):
        assert len(data_csv.read_bytes().splitlines()) == 121
        again = tmp_path / "again.csv"
        main(["synth", "--n", "120", "--range", "16:77", "--bins", "5", "--seed", "7", "--out", str(again)])
        assert again.read_bytes() == data_csv.read_bytes()

    def test_reversed_range_is_a_flag_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--n", "10", "--range", "77:16", "--out", str(tmp_path / "x.csv")])
        assert exc.value.code == 2


class TestTrain:
    def test_report_and_artifacts(self, tmp_path, data_csv):
        out = tmp_path / "run"
        code = main(["train", "--data", str(data_csv), "--loss", "fcrc", "--dist", "absolute", "--epochs", "2",
                     "--seed", "1", "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["final-mae"] == report["metrics"]["mae"] > 0
        assert report["config"]["loss"] == "fcrc" and report["seed"] == 1
        assert (out / "history.csv").read_text().count("\n") == 3
        assert "wall-time-seconds" in json.loads((out / "timing.json").read_text())

        assert main(["eval", "--data", str(data_csv), "--model", str(out / "model.ckpt"), "--out", str(tmp_path / "m.json")]) == 0
        metrics = json.loads((tmp_path / "m.json").read_text())
        assert set(metrics) == {"mae", "coarse-accuracy", "ordinality-spearman"}

    def test_reports_are_byte_identical(self, tmp_path, data_csv):
        for name in ("a", "b"):
            main(["train", "--data", str(data_csv), "--epochs", "2", "--loss", "infonce", "--out", str(tmp_path / name)])
        for f in ("report.json", "history.csv", "model.ckpt"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_missing_data_source(self, tmp_path, capsys):
        assert main(["train", "--out", str(tmp_path / "r")]) == 2
        err = capsys.readouterr().err
        assert "--data" in err and "--n" in err

    def test_config_file_supplies_defaults_only(self, tmp_path, data_csv):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("# defaults\nepochs = 3\nlr=0.01\nloss=infonce\n", encoding="utf-8")
        main(["train", "--data", str(data_csv), "--config", str(cfg), "--epochs", "1", "--out", str(tmp_path / "r")])
        echo = json.loads((tmp_path / "r" / "report.json").read_text())["config"]
        assert (echo["epochs"], echo["lr"], echo["loss"]) == (1, 0.01, "infonce")

    @pytest.mark.parametrize("line", ["bogus=1", "epochs=many", "loss=mse", "no equals sign"])
    def test_bad_config(self, tmp_path, data_csv, line):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(line + "\n")
        assert main(["train", "--data", str(data_csv), "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2


def test_ablate_distance(tmp_path, data_csv):
    out = tmp_path / "ablate.csv"
    code = main(["ablate-distance", "--data", str(data_csv), "--epochs", "1", "--seeds", "0,3", "--out", str(out)])
    assert code == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "kind,seed,mae,accuracy"
    assert [r.split(",")[:2] for r in rows[1:]] == [[k, s] for k in ("absolute", "sqrt", "squared") for s in ("0", "3")]


class TestChecks:
    def test_gradcheck_passes(self, tmp_path):
        assert main(["gradcheck", "--instances", "2", "--out", str(tmp_path / "g.json")]) == 0
        report = json.loads((tmp_path / "g.json").read_text())
        assert [c["name"] for c in report["checks"]] == list(GRADIENT_CHECK_NAMES)

    def test_gradcheck_below_noise_floor(self, tmp_path, capsys):
        assert main(["gradcheck", "--instances", "1", "--tolerance", "1e-12", "--out", str(tmp_path / "g.json")]) == 1
        report = json.loads((tmp_path / "g.json").read_text())
        assert not report["passed"]
        assert all(len(c["worst-coordinate"]) == 3 for c in report["checks"])
        assert "FAIL" in capsys.readouterr().out

    def test_micheck(self, tmp_path):
        assert main(["micheck", "--trials", "20000", "--out", str(tmp_path / "mi.json")]) == 0
        report = json.loads((tmp_path / "mi.json").read_text())
        presets = {p["name"]: p for p in report["presets"]}
        assert set(presets) == {"independent", "correlated-2x2", "noisy-2x2", "ordinal-neighbor"}
        assert all(p["condition2"] for p in presets.values())
        for p in presets.values():
            for entry in p["bounds"].values():
                assert all(v["holds-eq2"] and v["holds-eq3"] for v in entry.values())
        assert abs(presets["independent"]["bounds"]["2"]["exhaustive"]["exact-mi"]) < 1e-12
