"""Batch CLI: config parsing, artifacts, exit codes, and reproducibility."""

import csv
import json
import subprocess
import sys

import pytest

from hiergames.cli import _parse_grid, main
from hiergames.errors import ConfigError


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


SINGULAR_GAME = json.dumps(
    {
        "game_kind": "polynomial",
        "params": {"levels": [1, 1], "terms": [[], [[1.0, {"0": 1, "1": 1}]]]},
    }
)


# ----------------------------------------------------------------------
# Grid specs
# ----------------------------------------------------------------------


def test_parse_grid_forms():
    assert _parse_grid("11") == {"n_points": 11, "box": None}
    assert _parse_grid("0.05") == {"spacing": 0.05, "box": None}
    assert _parse_grid("11@0:1") == {"n_points": 11, "box": (0.0, 1.0)}
    assert _parse_grid("1e-1@-2:2") == {"spacing": 0.1, "box": (-2.0, 2.0)}
    assert _parse_grid({"n_points": 7, "box": [0, 1]}) == {
        "n_points": 7,
        "box": (0.0, 1.0),
    }
    assert _parse_grid({"spacing": 0.5}) == {"spacing": 0.5}


@pytest.mark.parametrize(
    "spec", ["abc", "11@5", "11@a:b", {"points": 3}, {"box": [1]}]
)
def test_parse_grid_rejects_bad_specs(spec):
    with pytest.raises(ConfigError):
        _parse_grid(spec)


# ----------------------------------------------------------------------
# run: artifacts and contents
# ----------------------------------------------------------------------


def test_run_writes_the_artifact_set(tmp_path):
    out = tmp_path / "res"
    rc = main([
        "run", "p111", "--solver", "dbi", "--alpha", "1e-5", "--iters", "200",
        "--seed", "1", "--grid", "7@-3:3", "--out", str(out),
    ])
    assert rc == 0
    for name in ("summary.json", "stability.json", "regret.json", "meta.json"):
        assert (out / name).exists()
    header, rows = _read_csv(out / "dbi" / "trace.csv")
    assert header == [
        "iter", "field_norm",
        "grad_norm_p0", "grad_norm_p1", "grad_norm_p2",
        "x0", "x1", "x2",
    ]
    assert rows and rows[0][0] == "0"

    summary = _read_json(out / "summary.json")
    assert summary["game"] == "p111"
    assert summary["seed"] == 1
    entry = summary["solvers"]["dbi"]
    assert entry["solver"] == "dbi"
    assert entry["iterations"] == 200
    assert len(entry["final_profile"]) == 3

    # A truncated run ends off-stationarity; the report records that rather
    # than failing the command.
    stability = _read_json(out / "stability.json")
    assert "NotStationary" in stability["dbi"]["error"]

    regret = _read_json(out / "regret.json")
    rep = regret["dbi"]["global"]
    assert len(rep["per_player"]) == 3
    assert rep["global_regret"] == max(rep["per_player"])
    assert regret["dbi"]["local"] is None

    meta = _read_json(out / "meta.json")
    assert set(meta["wall_seconds"]) == {"dbi"}


def test_run_without_regret_flags_skips_evaluation(tmp_path):
    out = tmp_path / "res"
    rc = main([
        "run", "p111", "--solver", "sim", "--alpha", "1e-5", "--iters", "20",
        "--out", str(out),
    ])
    assert rc == 0
    assert _read_json(out / "regret.json")["sim"] == {"global": None, "local": None}


def test_run_multiple_solvers_disambiguates_labels(tmp_path):
    out = tmp_path / "res"
    rc = main([
        "run", "p111", "--solver", "dbi,dbi", "--alpha", "1e-5",
        "--iters", "20", "--out", str(out),
    ])
    assert rc == 0
    summary = _read_json(out / "summary.json")
    assert set(summary["solvers"]) == {"dbi", "dbi+"}
    assert (out / "dbi" / "trace.csv").exists()
    assert (out / "dbi_" / "trace.csv").exists()  # '+' sanitized in paths


def test_run_merges_config_file_and_flags(tmp_path):
    cfg = {
        "game": "p111",
        "seed": 3,
        "solvers": [
            {"name": "dbi", "alpha": 1e-5, "max_iters": 50, "label": "tuned"}
        ],
        "regret": {"global": True, "grid": "5@-2:2", "rounds": 2},
        "out": str(tmp_path / "from_config"),
    }
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps(cfg))
    rc = main(["run", "--config", str(cfg_path), "--seed", "7"])
    assert rc == 0
    summary = _read_json(tmp_path / "from_config" / "summary.json")
    assert summary["seed"] == 7  # flag beats config
    assert set(summary["solvers"]) == {"tuned"}  # config entry kept its label
    assert summary["solvers"]["tuned"]["iterations"] == 50


def test_run_local_regret_evaluation(tmp_path):
    cfg = {
        "game": "p111",
        "solvers": [{"name": "dbi", "alpha": 1e-5, "max_iters": 100}],
        "regret": {"local": True, "local_alpha": 1e-5, "local_iters": 200},
        "out": str(tmp_path / "res"),
    }
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(cfg_path)]) == 0
    regret = _read_json(tmp_path / "res" / "regret.json")
    local = regret["dbi"]["local"]
    assert regret["dbi"]["global"] is None
    assert local["global_regret"] >= 0.0


# ----------------------------------------------------------------------
# Exit codes
# ----------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "tictactoe", "--solver", "dbi"],
        ["run", "p111", "--solver", "newton"],
        ["run", "p111"],  # no solvers anywhere
        ["run", "--solver", "dbi"],  # no game anywhere
        ["compare", "p111", "--solver", "dbi", "--alpha", "1e-5"],  # no grid
        ["run", "p111", "--game", "p112", "--solver", "dbi"],  # contradiction
        ["run", "p111", "--solver", "brd"],  # brd without any grid
    ],
)
def test_configuration_problems_exit_1(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path / "x")]) == 1
    assert "error" in capsys.readouterr().err


def test_bad_config_file_exits_1(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["run", "--config", str(path)]) == 1
    path.write_text(json.dumps({"game": "p111", "solvers": ["dbi"],
                                "checkpoints": [0.5, 2.0]}))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "x")]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    capsys.readouterr()


def test_unknown_solver_keys_exit_1(tmp_path, capsys):
    cfg = {
        "game": "p111",
        "solvers": [{"name": "dbi", "alpha": 1e-5, "bogus_knob": 3}],
        "out": str(tmp_path / "res"),
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path)]) == 1
    capsys.readouterr()


def test_singular_curvature_is_a_recorded_outcome(tmp_path):
    # The solver stops and reports rather than raising, so the command
    # itself succeeds with the reason in the summary.
    out = tmp_path / "res"
    rc = main([
        "run", SINGULAR_GAME, "--solver", "dbi", "--alpha", "0.1",
        "--iters", "10", "--out", str(out),
    ])
    assert rc == 0
    entry = _read_json(out / "summary.json")["solvers"]["dbi"]
    assert entry["reason"] == "singular_hessian"
    assert entry["converged"] is False


def test_evaluation_failure_exits_2_and_is_recorded(tmp_path):
    # An unbounded game cannot host a box-less evaluation grid; the failure
    # is game-dependent, so it lands in the reports with exit status 2.
    out = tmp_path / "res"
    rc = main([
        "run", "p111", "--solver", "dbi", "--alpha", "1e-5", "--iters", "10",
        "--grid", "5", "--out", str(out),
    ])
    assert rc == 2
    assert "InvalidParams" in _read_json(out / "regret.json")["dbi"]["error"]


def test_solver_failure_exits_2_and_is_recorded(tmp_path):
    out = tmp_path / "res"
    rc = main([
        "run", "p111", "--solver", "brd", "--grid", "5", "--iters", "2",
        "--out", str(out),
    ])
    assert rc == 2
    summary = _read_json(out / "summary.json")
    assert "InvalidParams" in summary["solvers"]["brd"]["error"]
    assert _read_json(out / "stability.json") == {}


def test_run_reports_stability_at_converged_finals(tmp_path):
    game = json.dumps({
        "game_kind": "polynomial",
        "params": {
            "levels": [1, 1],
            "terms": [
                [[-1.0, {"0": 2}], [2.0, {"0": 1}], [-1.0, {"1": 2}]],
                [[-1.0, {"1": 2}], [2.0, {"0": 1, "1": 1}], [-1.0, {"0": 2}]],
            ],
        },
    })
    out = tmp_path / "res"
    rc = main([
        "run", game, "--solver", "dbi", "--alpha", "0.2", "--iters", "5000",
        "--out", str(out),
    ])
    assert rc == 0
    report = _read_json(out / "stability.json")["dbi"]
    assert report["classification"] == "LASP"
    assert report["is_lspe"] is True
    assert report["lr_bound"] == pytest.approx(0.5, abs=1e-3)


# ----------------------------------------------------------------------
# Byte-for-byte reproducibility
# ----------------------------------------------------------------------


def test_reruns_are_byte_identical_outside_meta(tmp_path):
    argv = [
        "run", "p112", "--solver", "dbi,co", "--alpha", "4e-6",
        "--iters", "300", "--seed", "5", "--grid", "5@-15:15", "--out",
    ]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(argv + [str(a)]) == 0
    assert main(argv + [str(b)]) == 0
    same = [
        "summary.json", "stability.json", "regret.json",
        "dbi/trace.csv", "co/trace.csv",
    ]
    for rel in same:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
    meta_a = _read_json(a / "meta.json")
    meta_b = _read_json(b / "meta.json")
    assert meta_a["created_utc"] != meta_b["created_utc"]
    assert set(meta_a["wall_seconds"]) == set(meta_b["wall_seconds"])


# ----------------------------------------------------------------------
# compare
# ----------------------------------------------------------------------


def test_compare_emits_checkpoint_rows(tmp_path):
    cfg = {
        "game": "p111",
        "solvers": [
            {"name": "dbi", "alpha": 1e-5, "max_iters": 80},
            {"name": "sym", "alpha": 1e-5, "max_iters": 80},
        ],
        "regret": {"grid": "7@-3:3", "rounds": 2},
        "out": str(tmp_path / "cmp"),
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    rc = main(["compare", "--config", str(path)])
    assert rc == 0
    header, rows = _read_csv(tmp_path / "cmp" / "regret_vs_time.csv")
    assert header == ["solver", "wall_seconds", "epsilon"]
    assert [r[0] for r in rows] == ["dbi"] * 4 + ["sym"] * 4
    assert all(float(r[2]) >= 0.0 for r in rows)
    summary = _read_json(tmp_path / "cmp" / "summary.json")
    assert summary["solvers"]["dbi"]["budgets"] == [10, 20, 40, 80]
    assert summary["solvers"]["dbi"]["final_epsilon"] == float(rows[3][2])


def test_compare_custom_checkpoints_and_brd(tmp_path):
    cfg = {
        "game": {
            "game_kind": "epidemic",
            "params": {
                "level_sizes": [1, 3],
                "populations": [1e4, 2e4, 3e4],
                "initial_infected": [100.0, 100.0, 100.0],
            },
        },
        "solvers": [{"name": "brd", "rounds": 4}],
        "checkpoints": [0.5, 1.0],
        "regret": {"grid": "5", "rounds": 2},
        "out": str(tmp_path / "cmp"),
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    assert main(["compare", "--config", str(path)]) == 0
    _, rows = _read_csv(tmp_path / "cmp" / "regret_vs_time.csv")
    assert [r[0] for r in rows] == ["brd", "brd"]
    summary = _read_json(tmp_path / "cmp" / "summary.json")
    assert summary["solvers"]["brd"]["budgets"] == [2, 4]


# ----------------------------------------------------------------------
# Console entry point
# ----------------------------------------------------------------------


def test_module_entry_point_smoke(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "hiergames.cli", "run", "nonsense",
         "--solver", "dbi", "--out", str(tmp_path / "x")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert "unknown game" in proc.stderr
