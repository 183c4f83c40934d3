"""Command-line entry points: scenario generation, batch runs, reporting.

Exit codes: 0 success, 1 usage, 2 I/O, 3 schema, 4 internal consistency.
Worker count is capped by the CONSISTNAV_THREADS environment variable
(0 = auto).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .batch import RunManifest, resolve_scenario_paths, run_batch
from .config import ConfigError, RunConfig
from .evaluation import shortest_path_oracle
from .executive import ExecutiveError
from .report import (render_csv_aggregate, render_csv_breakdown,
                     render_episode_csv, render_figures, render_json,
                     render_markdown)
from .scenario import ScenarioError, save_scenario
from .sim.mapgen import generate_scenarios

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_SCHEMA = 3
EXIT_INTERNAL = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="consistnav",
                     description="Object-goal navigation executive harness")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate scenario files")
    gen.add_argument("--preset", required=True,
                     choices=["office", "maze", "apartment"])
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="run a batch of episodes")
    run.add_argument("--scenarios", required=True,
                     help="scenario directory or index.json")
    run.add_argument("--variants", default="Full",
                     help="comma-separated: Baseline,PCM,PCM_FSEC,Full")
    run.add_argument("--episodes", type=int, default=1,
                     help="episodes per (scenario, variant)")
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--out", required=True)
    run.add_argument("--config", default=None, help="run-config JSON file")
    run.add_argument("--traj", action="store_true",
                     help="dump per-step trajectory JSONL files")
    run.add_argument("--workers", type=int, default=None)
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="render tables and figures from results")
    rep.add_argument("--results", required=True, help="results.json path")
    rep.add_argument("--format", default="md", choices=["md", "csv", "json"])
    rep.add_argument("--out", default=None,
                     help="directory for report files (stdout if omitted)")
    rep.add_argument("--figures", action="store_true",
                     help="also render PNG figures (requires --out)")
    rep.set_defaults(func=cmd_report)
    return parser


def cmd_gen(args: argparse.Namespace) -> int:
    if args.count <= 0:
        raise _UsageError("--count must be a positive integer")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenarios = generate_scenarios(args.preset, args.count, args.seed)
    index = []
    cfg = RunConfig.defaults()
    for sc in scenarios:
        path = out_dir / f"{sc.scenario_id}.json"
        save_scenario(sc, path)
        start_cell = sc.grid.world_to_cell(sc.start.position)
        l_star = shortest_path_oracle(sc.grid, start_cell, sc.targets(),
                                      cfg.episode.success_radius)
        index.append({
            "id": sc.scenario_id,
            "file": path.name,
            "feasible": l_star is not None,
            "shortest_path_m": None if l_star is None else round(l_star, 6),
        })
    (out_dir / "index.json").write_text(
        json.dumps({"scenarios": index}, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(scenarios)} scenarios to {out_dir}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    if args.episodes <= 0:
        raise _UsageError("--episodes must be a positive integer")
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    from .batch import VARIANT_BY_NAME
    bad = [v for v in variants if v not in VARIANT_BY_NAME]
    if not variants or bad:
        raise _UsageError(
            f"--variants must name one or more of {sorted(VARIANT_BY_NAME)}, "
            f"got {bad or variants}")
    scenario_paths = resolve_scenario_paths(args.scenarios)
    cfg = RunConfig.load(args.config) if args.config else RunConfig.defaults()
    manifest = RunManifest(
        scenario_paths=scenario_paths,
        variants=variants,
        episodes_per_scenario=args.episodes,
        global_seed=args.seed,
        out_dir=str(args.out),
        dump_trajectories=args.traj,
        config_path=args.config,
    )
    results = run_batch(manifest, cfg, workers=args.workers)
    n = len(results["records"])
    for variant, row in results["aggregates"].items():
        print(f"{variant}: SR={100.0 * row['sr']:.1f}% SPL={100.0 * row['spl']:.1f}% "
              f"({row['episodes']} episodes)")
    print(f"wrote {n} episode records to {Path(args.out) / 'results.json'}")
    if results["incomplete"]:
        print("warning: run interrupted; results are partial", file=sys.stderr)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.results)
    try:
        results = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        print(f"error: {path}: parse error at byte {e.pos}: {e.msg}",
              file=sys.stderr)
        return EXIT_SCHEMA
    records = results.get("records", [])
    aggregates = results.get("aggregates", {})
    if not records:
        print("no episodes in results file")
        return EXIT_OK

    if args.format == "md":
        body = render_markdown(aggregates)
        outputs = {"report.md": body}
    elif args.format == "csv":
        outputs = {
            "aggregate.csv": render_csv_aggregate(aggregates),
            "breakdown.csv": render_csv_breakdown(aggregates),
            "episodes.csv": render_episode_csv(records),
        }
    else:
        outputs = {"report.json": render_json(aggregates)}

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, body in outputs.items():
            (out_dir / name).write_text(body, encoding="utf-8")
            print(f"wrote {out_dir / name}")
        if args.figures:
            for fig_path in render_figures(aggregates, out_dir):
                print(f"wrote {fig_path}")
    else:
        if args.figures:
            raise _UsageError("--figures requires --out")
        for name, body in outputs.items():
            if len(outputs) > 1:
                print(f"# {name}")
            print(body, end="" if body.endswith("\n") else "\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, ConfigError) as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except ExecutiveError as e:
        print(f"internal consistency error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except FileNotFoundError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
