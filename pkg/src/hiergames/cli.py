"""Batch front end: run solvers on a game and emit plot-ready artifacts.

Two subcommands:

* ``run`` — solve one game with any mix of the hierarchical solver, the
  one-shot baseline fields, and grid best response; writes one directory
  per solver with its iterate trace, plus stability, regret and summary
  reports for the final profiles.
* ``compare`` — the regret-versus-time protocol: each solver is re-run at
  truncated budgets (same seed, so each truncated run is a prefix of the
  full one) and the final profile of every budget is scored on a shared
  evaluation grid.

Everything configurable lives in a JSON experiment config and/or flags
(flags win).  All numeric output is either CSV with 17-significant-digit
floats or JSON with sorted keys, so re-running with the same config and
seed reproduces every artifact byte for byte — except wall-clock fields,
which are inherently noisy and are quarantined in ``meta.json`` and the
``wall_seconds`` column of ``regret_vs_time.csv``.

Exit status: 0 on success, 1 for configuration problems (unknown game,
bad flags, unparseable config), 2 when a solver or evaluation fails (the
reason lands in ``summary.json``).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .analysis import classify_lasp
from .brd import BRDConfig, Grid, brd_solve, compute_eps, local_regret
from .core import check_game, load_game
from .dbi import SolverConfig, dbi_solve
from .errors import ConfigError, HierGameError, InvalidParams
from .fields import DEFAULT_GAMMA, FIELD_KINDS, iterate_field
from .games import GAME_KINDS, from_definition

__all__ = ["main"]

GRADIENT_SOLVERS = ("dbi",) + tuple(FIELD_KINDS)
SOLVER_NAMES = GRADIENT_SOLVERS + ("brd",)

DEFAULT_ALPHA = 0.01
DEFAULT_CHECKPOINTS = (0.125, 0.25, 0.5, 1.0)


# ======================================================================
# Config assembly
# ======================================================================

def _parse_grid(spec) -> dict:
    """Normalize a grid spec to ``Grid`` keyword arguments.

    Accepts a dict (``{"n_points": 11, "box": [0, 1]}`` or
    ``{"spacing": 0.1, ...}``) or a string: an integer means points per
    axis, a decimal means spacing, and an optional ``@lo:hi`` suffix sets
    the box for unbounded games (``"11@0:1"``, ``"0.05@-2:2"``).
    """
    if isinstance(spec, dict):
        unknown = set(spec) - {"n_points", "spacing", "box"}
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        out = dict(spec)
        if out.get("box") is not None:
            box = out["box"]
            if not (isinstance(box, (list, tuple)) and len(box) == 2):
                raise ConfigError(f"grid box must be [lo, hi], got {box!r}")
            out["box"] = (float(box[0]), float(box[1]))
        return out
    text = str(spec).strip()
    box = None
    if "@" in text:
        text, _, boxpart = text.partition("@")
        try:
            lo, _, hi = boxpart.partition(":")
            box = (float(lo), float(hi))
        except ValueError as exc:
            raise ConfigError(f"bad grid box {boxpart!r}; use lo:hi") from exc
    try:
        if "." in text or "e" in text.lower():
            out: dict = {"spacing": float(text)}
        else:
            out = {"n_points": int(text)}
    except ValueError as exc:
        raise ConfigError(f"bad grid spec {spec!r}") from exc
    out["box"] = box
    return out


def _resolve_game(value):
    """Game from a built-in kind name, a JSON object/string, or a file path."""
    if isinstance(value, dict):
        return from_definition(value)
    text = str(value).strip()
    if text.startswith("{"):
        return load_game(text)
    if text in GAME_KINDS:
        return from_definition({"game_kind": text})
    if Path(text).exists():
        return load_game(text)
    raise ConfigError(
        f"unknown game {value!r}: not a built-in kind "
        f"({', '.join(GAME_KINDS)}), not a file, not a JSON definition"
    )


def _normalize_solvers(entries, args_ns, top_seed) -> list[dict]:
    """Fill defaults into solver entries and give each a unique label."""
    out = []
    labels = set()
    for raw in entries:
        if isinstance(raw, str):
            raw = {"name": raw}
        entry = dict(raw)
        name = entry.get("name")
        if name not in SOLVER_NAMES:
            raise ConfigError(
                f"unknown solver {name!r}; pick from {', '.join(SOLVER_NAMES)}"
            )
        if name in GRADIENT_SOLVERS:
            entry.setdefault("alpha", args_ns.alpha if args_ns.alpha is not None
                             else DEFAULT_ALPHA)
            if args_ns.iters is not None:
                entry.setdefault("max_iters", args_ns.iters)
        else:
            if args_ns.iters is not None:
                entry.setdefault("rounds", args_ns.iters)
        entry.setdefault("seed", top_seed)
        label = str(entry.get("label", name))
        while label in labels:
            label += "+"
        labels.add(label)
        entry["label"] = label
        out.append(entry)
    return out


def _assemble(args) -> dict:
    """Merge config file and flags into one validated experiment dict."""
    cfg: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {args.config}")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")

    game_spec = args.game or cfg.get("game")
    if game_spec is None:
        raise ConfigError("no game given (positional, --game, or config 'game')")
    try:
        game = _resolve_game(game_spec)
    except InvalidParams as exc:
        raise ConfigError(str(exc)) from exc

    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))

    solver_spec = cfg.get("solvers", [])
    if args.solver:
        solver_spec = [s.strip() for s in args.solver.split(",") if s.strip()]
    if not solver_spec:
        raise ConfigError("no solvers given (--solver or config 'solvers')")
    solvers = _normalize_solvers(solver_spec, args, seed)

    regret = dict(cfg.get("regret", {}))
    if args.grid:
        regret["grid"] = args.grid
        regret.setdefault("global", True)
    if regret.get("grid") is not None:
        regret["grid"] = _parse_grid(regret["grid"])

    out = Path(args.out or cfg.get("out", "results"))
    checkpoints = cfg.get("checkpoints", list(DEFAULT_CHECKPOINTS))
    if not (isinstance(checkpoints, (list, tuple)) and checkpoints
            and all(0 < float(c) <= 1 for c in checkpoints)):
        raise ConfigError("checkpoints must be fractions in (0, 1]")

    return {
        "game": game,
        "game_spec": game_spec,
        "solvers": solvers,
        "regret": regret,
        "out": out,
        "seed": seed,
        "checkpoints": sorted(float(c) for c in checkpoints),
    }


# ======================================================================
# Serialization helpers
# ======================================================================

def _fmt(v) -> str:
    return "%.17g" % float(v)


def _sanitize(obj):
    """JSON-ready copy: numpy → builtins, non-finite floats → None."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, complex):
        return [_sanitize(obj.real), _sanitize(obj.imag)]
    return obj


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_sanitize(payload), fh, indent=2, sort_keys=True,
                  allow_nan=False)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ======================================================================
# Solver execution
# ======================================================================

def _grid_from(entry: dict, regret: dict, tree) -> Grid:
    """Grid for a best-response solver: its own keys, else the eval grid."""
    own = {k: entry.get(k) for k in ("n_points", "spacing", "box")
           if entry.get(k) is not None}
    if not own:
        own = dict(regret.get("grid") or {})
    if not own.get("n_points") and not own.get("spacing"):
        raise ConfigError(
            "best-response solver needs a grid (entry n_points/spacing or "
            "--grid)"
        )
    box = own.get("box")
    if box is not None:
        box = (float(box[0]), float(box[1]))
    return Grid(tree, n_points=own.get("n_points"), spacing=own.get("spacing"),
                box=box)


def _solver_config(entry: dict) -> SolverConfig:
    keys = ("alpha", "max_iters", "grad_tol", "seed", "init", "record_every")
    kwargs = {k: entry[k] for k in keys if k in entry}
    unknown = set(entry) - set(keys) - {"name", "label", "gamma", "budget"}
    if unknown:
        raise ConfigError(f"unknown solver keys for {entry['name']!r}: "
                          f"{sorted(unknown)}")
    return SolverConfig(**kwargs)


def _run_one(game, entry: dict, regret: dict, budget: int | None = None):
    """Execute one solver entry; returns a result dict (no files written).

    ``budget`` overrides the iteration/round budget for checkpointed
    comparisons; the seed stays fixed, so a truncated run is a prefix of
    the full one.
    """
    tree, _oracle = check_game(game)
    name = entry["name"]
    if name == "brd":
        grid = _grid_from(entry, regret, tree)
        config = BRDConfig(
            rounds=budget if budget is not None else int(entry.get("rounds", 20)),
            seed=entry.get("seed", 0),
            stop_on_zero_eps=bool(entry.get("stop_on_zero_eps", False)),
        )
        t0 = time.perf_counter()
        result = brd_solve(game, grid, config)
        wall = time.perf_counter() - t0
        return {
            "label": entry["label"],
            "kind": "brd",
            "final": result.profile,
            "wall": wall,
            "alpha": None,
            "summary": {
                "solver": name,
                "rounds": result.rounds,
                "eps": result.eps,
                "final_profile": result.profile,
            },
            "trace_header": ["round", "eps"],
            "trace_rows": [(r, _fmt(e)) for r, e, _w in result.history],
        }

    overrides = dict(entry)
    if budget is not None:
        overrides["max_iters"] = budget
    config = _solver_config(overrides)
    t0 = time.perf_counter()
    if name == "dbi":
        trace = dbi_solve(game, config)
    else:
        trace = iterate_field(game, name, config,
                              gamma=float(entry.get("gamma", DEFAULT_GAMMA)))
    wall = time.perf_counter() - t0
    n_players = tree.n_players
    header = (["iter", "field_norm"]
              + [f"grad_norm_p{i}" for i in range(n_players)]
              + [f"x{k}" for k in range(tree.n_dims)])
    rows = [
        [e.iteration, _fmt(e.field_norm)]
        + [_fmt(v) for v in e.player_grad_norms]
        + [_fmt(v) for v in e.profile]
        for e in trace.entries
    ]
    return {
        "label": entry["label"],
        "kind": "gradient",
        "final": trace.final,
        "wall": wall,
        "alpha": config.alpha,
        "summary": {
            "solver": name,
            "converged": trace.converged,
            "diverged": trace.reason == "diverged",
            "reason": trace.reason,
            "iterations": trace.n_iters,
            "final_field_norm": (trace.entries[-1].field_norm
                                 if trace.entries else None),
            "final_profile": trace.final,
        },
        "trace_header": header,
        "trace_rows": rows,
    }


def _eval_regret(game, final, regret: dict, seed: int) -> dict:
    """Global (grid) and local (gradient-restart) regret of a profile."""
    tree, _oracle = check_game(game)
    out: dict = {"global": None, "local": None}
    if regret.get("global") and final is not None:
        gspec = regret.get("grid")
        if not gspec:
            raise ConfigError("global regret evaluation needs a grid (--grid)")
        grid = Grid(tree, n_points=gspec.get("n_points"),
                    spacing=gspec.get("spacing"), box=gspec.get("box"))
        config = BRDConfig(rounds=int(regret.get("rounds", 20)),
                           seed=int(regret.get("seed", seed)))
        report = compute_eps(game, final, grid, config)
        out["global"] = {
            "per_player": report.per_player,
            "global_regret": report.global_regret,
        }
    if regret.get("local") and final is not None:
        config = SolverConfig(
            alpha=float(regret.get("local_alpha", DEFAULT_ALPHA)),
            max_iters=int(regret.get("local_iters", 10_000)),
            seed=int(regret.get("seed", seed)),
        )
        report = local_regret(game, final, config)
        out["local"] = {
            "per_player": report.per_player,
            "global_regret": report.global_regret,
        }
    return out


def _stability(game, final, alpha) -> dict:
    try:
        rep = classify_lasp(game, final, alpha=alpha)
    except HierGameError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}
    return {
        "classification": rep.classification,
        "eigenvalues": [[z.real, z.imag] for z in rep.eigenvalues],
        "lr_bound": rep.lr_bound,
        "contraction": rep.contraction,
        "is_lspe": rep.is_lspe,
        "hessian_flags": rep.hessian_flags,
    }


# ======================================================================
# Subcommands
# ======================================================================

def _safe_label(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label)


def _cmd_run(cfg: dict) -> int:
    game = cfg["game"]
    outdir: Path = cfg["out"]
    walls: dict[str, float] = {}
    summary: dict = {"game": _describe_game(cfg["game_spec"]),
                     "seed": cfg["seed"], "solvers": {}}
    stability: dict = {}
    regrets: dict = {}
    failed = False

    for entry in cfg["solvers"]:
        label = entry["label"]
        try:
            run = _run_one(game, entry, cfg["regret"])
        except ConfigError:
            raise
        except (HierGameError, np.linalg.LinAlgError) as exc:
            summary["solvers"][label] = {
                "solver": entry["name"],
                "error": f"{type(exc).__name__}: {exc}",
            }
            failed = True
            continue
        walls[label] = run["wall"]
        summary["solvers"][label] = run["summary"]
        _write_csv(outdir / _safe_label(label) / "trace.csv",
                   run["trace_header"], run["trace_rows"])
        stability[label] = _stability(game, run["final"], run["alpha"])
        try:
            regrets[label] = _eval_regret(game, run["final"], cfg["regret"],
                                          cfg["seed"])
        except ConfigError:
            raise
        except (HierGameError, np.linalg.LinAlgError) as exc:
            regrets[label] = {"error": f"{type(exc).__name__}: {exc}"}
            failed = True

    _write_json(outdir / "summary.json", summary)
    _write_json(outdir / "stability.json", stability)
    _write_json(outdir / "regret.json", regrets)
    _write_meta(outdir, walls)
    return 2 if failed else 0


def _cmd_compare(cfg: dict) -> int:
    game = cfg["game"]
    outdir: Path = cfg["out"]
    regret = dict(cfg["regret"])
    regret["global"] = True
    if not regret.get("grid"):
        raise ConfigError("compare needs an evaluation grid (--grid)")

    rows = []
    walls: dict[str, float] = {}
    summary: dict = {"game": _describe_game(cfg["game_spec"]),
                     "seed": cfg["seed"], "solvers": {}}
    failed = False
    for entry in cfg["solvers"]:
        label = entry["label"]
        if entry["name"] == "brd":
            full = int(entry.get("rounds", 20))
        else:
            full = int(entry.get("max_iters", 10_000))
        budgets = sorted({max(1, round(frac * full)) for frac in cfg["checkpoints"]})
        try:
            for budget in budgets:
                run = _run_one(game, entry, regret, budget=budget)
                eps = _eval_regret(game, run["final"], regret,
                                   cfg["seed"])["global"]["global_regret"]
                rows.append((label, "%.6f" % run["wall"], _fmt(eps)))
                walls[label] = walls.get(label, 0.0) + run["wall"]
            summary["solvers"][label] = {
                "solver": entry["name"],
                "budgets": budgets,
                "final_epsilon": float(rows[-1][2]),
            }
        except ConfigError:
            raise
        except (HierGameError, np.linalg.LinAlgError) as exc:
            summary["solvers"][label] = {
                "solver": entry["name"],
                "error": f"{type(exc).__name__}: {exc}",
            }
            failed = True

    _write_csv(outdir / "regret_vs_time.csv",
               ["solver", "wall_seconds", "epsilon"], rows)
    _write_json(outdir / "summary.json", summary)
    _write_meta(outdir, walls)
    return 2 if failed else 0


def _describe_game(spec) -> object:
    return spec if isinstance(spec, (str, dict)) else str(spec)


def _write_meta(outdir: Path, walls: dict[str, float]) -> None:
    """Timing and provenance: everything here may differ between re-runs."""
    first = next(iter(walls.values()), None)
    meta = {
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "wall_seconds": walls,
        "wall_ratio_vs_first": (
            {k: v / first for k, v in walls.items()} if first else {}
        ),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
    }
    _write_json(outdir / "meta.json", meta)


# ======================================================================
# Entry point
# ======================================================================

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiergames",
        description="Solve hierarchical games and emit trace/report artifacts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, blurb in (
        ("run", "solve one game and write traces and reports"),
        ("compare", "regret-versus-time checkpoints across solvers"),
    ):
        p = sub.add_parser(cmd, help=blurb)
        p.add_argument("game_pos", nargs="?", metavar="GAME",
                       help="built-in kind, JSON definition, or file path")
        p.add_argument("--game", help="same as the positional GAME")
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--solver",
                       help=f"comma list from: {', '.join(SOLVER_NAMES)}")
        p.add_argument("--alpha", type=float, help="step size for gradient solvers")
        p.add_argument("--iters", type=int,
                       help="iteration budget (gradient) / rounds (brd)")
        p.add_argument("--seed", type=int, help="top-level seed")
        p.add_argument("--grid",
                       help="evaluation grid: points ('11'), spacing ('0.05'), "
                            "optional box ('11@0:1')")
        p.add_argument("--out", help="output directory (default: results)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.game_pos and args.game and args.game_pos != args.game:
        print("error: GAME given both positionally and via --game",
              file=sys.stderr)
        return 1
    args.game = args.game or args.game_pos
    try:
        cfg = _assemble(args)
        if args.command == "run":
            return _cmd_run(cfg)
        return _cmd_compare(cfg)
    except (ConfigError, InvalidParams) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except HierGameError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
