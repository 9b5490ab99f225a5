"""Command line entry points: run experiments, aggregate results, serve."""

from __future__ import annotations

import argparse
import sys
import urllib.error
import urllib.request
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, build_jobs, check_files, load_config
from .data import DataError, load_csv_with_schema, load_schema
from .engine import AggregateResult, EngineError, RunResult, aggregate, run_matrix

RUNS_HEADER = "iteration,strategy,seed,metric,cumulative_samples"
AGGREGATE_HEADER = RUNS_HEADER + ",mean_metric,diff_vs_baseline"


class ResultFileError(Exception):
    """A result CSV does not follow the run-record layout."""


def run_filename(result: RunResult) -> str:
    return f"run_{result.strategy}_{result.seed}.csv"


def serialize_runs(results: list[RunResult]) -> str:
    # repr() keeps full float precision so parse -> serialize round-trips
    # byte for byte.
    lines = [RUNS_HEADER]
    for result in results:
        for i, metric in enumerate(result.metric):
            lines.append(
                f"{i},{result.strategy},{result.seed},"
                f"{metric!r},{result.cumulative_samples[i]}"
            )
    return "\n".join(lines) + "\n"


def parse_runs(text: str) -> list[RunResult]:
    from .engine import StrategyKind

    valid = {s.value for s in StrategyKind}
    lines = text.splitlines()
    if not lines or lines[0] != RUNS_HEADER:
        raise ResultFileError(f"expected header {RUNS_HEADER!r}")
    rows: dict[tuple[str, int], list[tuple[int, float, int]]] = {}
    order: list[tuple[str, int]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 5:
            raise ResultFileError(f"line {lineno}: expected 5 fields, got {len(fields)}")
        if fields[1] not in valid:
            raise ResultFileError(f"line {lineno}: unknown strategy {fields[1]!r}")
        try:
            iteration = int(fields[0])
            seed = int(fields[2])
            metric = float(fields[3])
            cumulative = int(fields[4])
        except ValueError as exc:
            raise ResultFileError(f"line {lineno}: {exc}") from exc
        key = (fields[1], seed)
        if key not in rows:
            rows[key] = []
            order.append(key)
        if iteration != len(rows[key]):
            raise ResultFileError(
                f"line {lineno}: iteration {iteration} out of order for {key}"
            )
        rows[key].append((iteration, metric, cumulative))
    return [
        RunResult(
            strategy=strategy,
            seed=seed,
            metric=tuple(metric for _, metric, _ in rows[(strategy, seed)]),
            cumulative_samples=tuple(cum for _, _, cum in rows[(strategy, seed)]),
        )
        for strategy, seed in order
    ]


def serialize_aggregate(agg: AggregateResult) -> str:
    lines = [AGGREGATE_HEADER]
    for result in agg.results:
        means = agg.mean_metric[result.strategy]
        diffs = agg.diff_vs_baseline[(result.strategy, result.seed)]
        for i, metric in enumerate(result.metric):
            lines.append(
                f"{i},{result.strategy},{result.seed},{metric!r},"
                f"{result.cumulative_samples[i]},{means[i]!r},{diffs[i]!r}"
            )
    return "\n".join(lines) + "\n"


def write_results(results: list[RunResult], out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for result in results:
        path = out_dir / run_filename(result)
        path.write_text(serialize_runs([result]))
        written.append(path)
    agg_path = out_dir / "aggregate.csv"
    agg_path.write_text(serialize_aggregate(aggregate(results)))
    written.append(agg_path)
    return written


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(Path(args.config))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    check_files(config)
    jobs = build_jobs(config)
    results = run_matrix(jobs, n_jobs=args.jobs)
    out_dir = Path(args.output or config.output_dir)
    written = write_results(results, out_dir)
    for path in written:
        print(path)
    return 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    in_dir = Path(args.results_dir)
    files = sorted(in_dir.glob("run_*.csv"))
    if not files:
        raise ResultFileError(f"no run_*.csv files in {in_dir}")
    results = []
    for path in files:
        results.extend(parse_runs(path.read_text()))
    agg_path = in_dir / "aggregate.csv"
    agg_path.write_text(serialize_aggregate(aggregate(results)))
    print(agg_path)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceSettings, create_app

    config_path = Path(args.config)
    config = load_config(config_path)
    check_files(config)
    log_dir = Path(args.log_dir) if args.log_dir else Path(config.output_dir) / "sessions"
    settings = ServiceSettings(default_config=config_path, log_dir=log_dir)
    uvicorn.run(create_app(settings), host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_fetch_data(args: argparse.Namespace) -> int:
    schema = load_schema(args.name)
    url = schema.get("url")
    if not url:
        raise DataError(f"no download source for dataset {args.name!r}")
    dest = Path(args.dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    try:
        with urllib.request.urlopen(url, timeout=120) as response:
            dest.write_bytes(response.read())
    except urllib.error.URLError as exc:
        print(f"error:network: could not fetch {url}: {exc}", file=sys.stderr)
        return 1
    dataset = load_csv_with_schema(dest, schema)
    print(f"{dest}: {dataset.n} rows, {dataset.m} features")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attrloop",
        description="Run feedback-loop experiments from a config file.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run all strategy/seed combinations in a config")
    run.add_argument("config", help="path to an INI experiment config")
    run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    run.add_argument("--seed", type=int, default=None, help="override the config's base seed")
    run.add_argument("--output", default=None, help="override the configured output directory")
    run.set_defaults(handler=cmd_run)

    agg = sub.add_parser("aggregate", help="recompute aggregate.csv from run_*.csv files")
    agg.add_argument("results_dir", help="directory holding run_*.csv files")
    agg.set_defaults(handler=cmd_aggregate)

    serve = sub.add_parser("serve", help="start the correction service over HTTP")
    serve.add_argument("config", help="path to an INI experiment config")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--log-dir", default=None, help="directory for session event logs")
    serve.set_defaults(handler=cmd_serve)

    fetch = sub.add_parser("fetch-data", help="download a known dataset and verify it")
    fetch.add_argument("name", help="dataset schema name, e.g. boston or titanic")
    fetch.add_argument("dest", help="where to write the CSV")
    fetch.set_defaults(handler=cmd_fetch_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error:config: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error:data: {exc}", file=sys.stderr)
        return 1
    except EngineError as exc:
        print(f"error:run: {exc}", file=sys.stderr)
        return 1
    except (OSError, ResultFileError) as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
