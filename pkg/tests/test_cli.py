import json

import pytest

from artifact import cli


def _run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


def _latest(tmp_path, sub):
    return sorted((tmp_path / sub).iterdir())[-1]


def test_classify_artifacts(tmp_path, capsys):
    assert _run(tmp_path, "classify", "--perm", "1 2 7 6 5 3 4 8") == 0
    d = _latest(tmp_path, "classify")
    meta = json.loads((d / "meta.json").read_text())
    res = meta["result"]
    assert res["degree"] == 4
    assert meta["masterSeed"] == 0 and meta["config"]["perm"] == "1 2 7 6 5 3 4 8"
    summary = json.loads((d / "summary.json").read_text())
    assert summary["passed"]
    assert (d / "result.csv").read_text().startswith("index,class,pivot")
    assert "PASS" in capsys.readouterr().out


def test_ursell_example(tmp_path):
    assert _run(tmp_path, "ursell", "--n", "4", "--mode", "lattice") == 0
    res = json.loads((_latest(tmp_path, "ursell") / "meta.json").read_text())["result"]
    assert res["value"] == -6 and res["bound"] == 16


def test_failing_check_exit_code(tmp_path, capsys):
    # thresholds come from the config file
    cfg = tmp_path / "strict.cfg"
    cfg.write_text("tol_kidentity = 0\n")
    assert cli.main(["--config", str(cfg), "kidentity", "--nsets", "2", "--out", str(tmp_path)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_config_invalid(tmp_path, capsys):
    assert _run(tmp_path, "exponent", "--kappa", "0.2") == 2
    assert "2/(6+9d)" in capsys.readouterr().err
    assert _run(tmp_path, "lemma33", "--eta", "0.5") == 2
    assert _run(tmp_path, "ladder", "--d", "2") == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 1\n")
    assert cli.main(["--config", str(bad), "classify"]) == 2


def test_artifact_error_exit_code(tmp_path, capsys):
    assert _run(tmp_path, "wigner", "--grid-n", "32") == 3
    assert "GridTooCoarse" in capsys.readouterr().err


def test_config_file_and_show(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nseed = 5\nkappa = 0.02\n")
    assert cli.main(["--config", str(cfg), "--show-config"]) == 0
    out = capsys.readouterr().out
    assert "seed = 5" in out and "kappa = 0.02" in out


def test_diffusion_csv_reproducible(tmp_path):
    args = ["diffusion", "--e", "1", "--ntraj", "4000", "--chunk", "1000", "--seed", "7"]
    csvs = []
    for workers in ("1", "1", "2"):
        cli.main([*args, "--workers", workers, "--out", str(tmp_path / workers)])
    for workers in ("1", "2"):
        for d in sorted((tmp_path / workers / "diffusion").iterdir()):
            csvs.append((d / "result.csv").read_bytes())
    assert len(csvs) == 3
    assert csvs[0] == csvs[1] == csvs[2]


@pytest.mark.parametrize("sub,extra", [
    ("matrix", ["--perm", "2 1"]),
    ("schedule", ["--perm", "1 2 7 6 5 3 4 8"]),
    ("exponent", ["--k", "5"]),
    ("partitions", ["--k", "3"]),
    ("flip", ["--k", "4"]),
    ("counts", ["--k", "5"]),
    ("appendix", []),
])
def test_fast_subcommands_pass(tmp_path, sub, extra):
    assert _run(tmp_path, sub, *extra) == 0
