"""Command-line harness: execute experiment specs, summarize traces, and
run the subspace verifiers.

Outputs are deterministic functions of the spec file: seeds are fixed,
rows are sorted, and floats are formatted with at most 12 significant
digits.

Exit codes: 0 success, 1 verifier assertion failure, 2 config/usage error,
3 at least one run failed (remaining runs still complete).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import os
import sys
from collections import Counter, defaultdict
from pathlib import Path

import numpy as np

from . import benchmarks
from .embeddings import sample_embedding
from .errors import CremboError, SchemaError
from .optimizer import RunResult, config_from_dict, config_to_dict, run

TRACE_COLUMNS = ["method", "benchmark", "seed", "eval_index", "z", "value", "best_so_far"]


def fmt_float(v: float) -> str:
    """Shortest representation capped at 12 significant digits."""
    return "%.12g" % float(v)


def _worker_count(n_tasks: int) -> int:
    env = os.environ.get("CREMBO_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_tasks))


def _run_config_from_spec(entry: dict, seed: int) -> dict:
    doc = {
        "method": entry["method"],
        "benchmark": entry["benchmark"],
        "big_d": entry["D"],
        "d": entry["d"],
        "k_embeddings": entry.get("K", 1),
        "budget": entry["budget"],
        "n_init": entry["n_init"],
        "seed": seed,
        "low_dim_half_width": entry.get("half_width"),
        "high_dim_bound": entry.get("high_dim_bound", 1.0),
        "crembo_mode": entry.get("crembo_mode", "paired"),
        "cross_pairs": entry.get("cross_pairs", False),
        "surrogate": entry.get("kernel", {}),
        "acquisition": entry.get("acquisition", {}),
    }
    config_from_dict(doc)  # validate eagerly, before any worker starts
    return doc


def load_experiment_spec(path: Path, seed_offset: int = 0) -> tuple[Path, list[dict]]:
    """Parse a spec file into (output_dir, list of run-config dicts)."""
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    if not isinstance(spec, dict) or "runs" not in spec:
        raise SchemaError(f"{path}: spec must be an object with a 'runs' list")

    out_dir = Path(spec.get("output_dir", "crembo_out"))
    configs = []
    seen: set[tuple[str, str, int]] = set()
    for i, entry in enumerate(spec["runs"]):
        try:
            seeds = entry.get("seeds")
            if seeds is None:
                seeds = list(range(int(entry.get("n_seeds", 1))))
            for seed in seeds:
                seed = int(seed) + seed_offset
                doc = _run_config_from_spec(entry, seed)
                key = (doc["method"], doc["benchmark"], seed)
                if key in seen:
                    raise SchemaError(
                        f"duplicate seed {seed} for ({doc['method']}, {doc['benchmark']})"
                    )
                seen.add(key)
                configs.append(doc)
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError, CremboError) as exc:
            raise SchemaError(f"{path}: runs[{i}]: {exc}") from None
    if not configs:
        raise SchemaError(f"{path}: spec contains no runs")
    return out_dir, configs


def execute_run(config_doc: dict) -> RunResult:
    """Build the benchmark objective and drive one full run."""
    cfg = config_from_dict(config_doc)
    objective = benchmarks.make_benchmark(cfg.benchmark)
    if objective.big_d != cfg.big_d:
        raise SchemaError(
            f"benchmark {cfg.benchmark} has D={objective.big_d}, config says {cfg.big_d}"
        )
    return run(cfg, objective)


def _run_tag(doc: dict) -> str:
    return f"{doc['method']}_{doc['benchmark']}_seed{doc['seed']:04d}"


def _trace_rows(result: RunResult) -> list[tuple]:
    cfg = result.config
    rows = []
    for obs, best in zip(result.history, result.best_value_trace):
        rows.append(
            (
                cfg.method.value,
                cfg.benchmark,
                cfg.seed,
                obs.iteration,
                obs.z,
                obs.value,
                float(best),
            )
        )
    return rows


def _write_jsonl(path: Path, result: RunResult) -> None:
    with open(path, "w") as fh:
        for obs, best in zip(result.history, result.best_value_trace):
            fh.write(
                json.dumps(
                    {
                        "eval_index": obs.iteration,
                        "z": obs.z,
                        "y_low": [float(v) for v in obs.y_low],
                        "x_high": [float(v) for v in obs.x_high],
                        "value": obs.value,
                        "best_so_far": float(best),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def cmd_run(spec_file: str, out_override: str | None = None, seed_offset: int = 0) -> int:
    try:
        out_dir, configs = load_experiment_spec(Path(spec_file), seed_offset)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if out_override:
        out_dir = Path(out_override)

    results: dict[str, RunResult] = {}
    failures: list[tuple[str, str]] = []
    workers = _worker_count(len(configs))
    if workers == 1:
        for doc in configs:
            try:
                results[_run_tag(doc)] = execute_run(doc)
            except Exception as exc:  # run failures must not kill the batch
                failures.append((_run_tag(doc), str(exc)))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(execute_run, doc): doc for doc in configs}
            for fut in concurrent.futures.as_completed(futures):
                tag = _run_tag(futures[fut])
                try:
                    results[tag] = fut.result()
                except Exception as exc:
                    failures.append((tag, str(exc)))

    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    all_rows: list[tuple] = []
    for tag in sorted(results):
        result = results[tag]
        _write_jsonl(runs_dir / f"{tag}.jsonl", result)
        all_rows.extend(_trace_rows(result))
    all_rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))

    with open(out_dir / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for method, bench, seed, idx, z, value, best in all_rows:
            writer.writerow(
                [method, bench, seed, idx, z, fmt_float(value), fmt_float(best)]
            )

    for tag, message in failures:
        print(f"run failed: {tag}: {message}", file=sys.stderr)
    print(f"wrote {len(all_rows)} trace rows for {len(results)} runs to {out_dir}")
    return 3 if failures else 0


def _read_trace(trace_csv: Path) -> list[dict]:
    try:
        with open(trace_csv, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(TRACE_COLUMNS) - set(reader.fieldnames):
                raise SchemaError(f"{trace_csv}: missing columns {TRACE_COLUMNS}")
            rows = list(reader)
    except OSError as exc:
        raise SchemaError(f"cannot read {trace_csv}: {exc}") from None
    if not rows:
        raise SchemaError(f"{trace_csv}: no data rows")
    return rows


def cmd_summarize(trace_csv: str, out_override: str | None = None) -> int:
    path = Path(trace_csv)
    try:
        rows = _read_trace(path)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(out_override) if out_override else path.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    by_cell: dict[tuple[str, str, int], list[float]] = defaultdict(list)
    z_hist: dict[tuple[str, str, int], Counter] = defaultdict(Counter)
    for row in rows:
        key = (row["method"], row["benchmark"], int(row["eval_index"]))
        by_cell[key].append(float(row["best_so_far"]))
        z_hist[(row["method"], row["benchmark"], int(row["seed"]))][int(row["z"])] += 1

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "benchmark", "eval_index", "median", "q25", "q75"])
        for key in sorted(by_cell):
            vals = np.array(by_cell[key])
            q25, med, q75 = np.percentile(vals, [25.0, 50.0, 75.0])
            writer.writerow(
                list(key) + [fmt_float(med), fmt_float(q25), fmt_float(q75)]
            )

    with open(out_dir / "z_hist.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "benchmark", "seed", "z", "count"])
        for key in sorted(z_hist):
            for z in sorted(z_hist[key]):
                writer.writerow(list(key) + [z, z_hist[key][z]])

    print(f"wrote summary.csv and z_hist.csv to {out_dir}")
    return 0


def _write_report(report: dict, report_path: str | None) -> None:
    if report_path:
        Path(report_path).parent.mkdir(parents=True, exist_ok=True)
        with open(report_path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)


def cmd_verify_rank(
    big_d: int, d: int, d_e: int, trials: int, seed: int = 0,
    report_path: str | None = None,
) -> int:
    try:
        fraction = benchmarks.verify_rank_preservation(big_d, d, d_e, trials, seed)
    except CremboError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ok = fraction == 1.0
    report = {
        "check": "rank_preservation",
        "D": big_d,
        "d": d,
        "d_e": d_e,
        "trials": trials,
        "seed": seed,
        "full_rank_fraction": fraction,
        "passed": ok,
    }
    _write_report(report, report_path)
    print(
        f"rank preservation: D={big_d} d={d} d_e={d_e}: "
        f"{fraction:.4f} of {trials} trials at full rank -> "
        + ("PASS" if ok else "FAIL")
    )
    return 0 if ok else 1


def cmd_verify_recovery(
    benchmark_id: str, n_seeds: int, d: int | None = None, tol: float = 1e-6,
    report_path: str | None = None,
) -> int:
    try:
        objective = benchmarks.make_benchmark(benchmark_id)
        emb_d = d if d is not None else objective.d_e
        if emb_d < objective.d_e:
            raise SchemaError(
                f"embedding dimension {emb_d} below effective dimension {objective.d_e}"
            )
        reports = []
        for seed in range(n_seeds):
            e = sample_embedding(seed, objective.big_d, emb_d)
            reports.append(benchmarks.verify_optimum_recovery(objective, e, tol=tol))
    except (CremboError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    errors = np.array([r.recovery_error for r in reports])
    y_norms = np.array([r.y_star_norm for r in reports])
    eps_grid = sorted(reports[0].norm_bounds)
    ok = bool(errors.max() < tol)
    report = {
        "check": "optimum_recovery",
        "benchmark": benchmark_id,
        "embedding_d": emb_d,
        "seeds": n_seeds,
        "tolerance": tol,
        "max_recovery_error": float(errors.max()),
        "median_recovery_error": float(np.median(errors)),
        "y_norm_quantiles": {
            "q50": float(np.percentile(y_norms, 50)),
            "q90": float(np.percentile(y_norms, 90)),
            "q100": float(y_norms.max()),
        },
        "norm_bound_fraction": {
            str(eps): float(
                np.mean([r.norm_bound_holds[eps] for r in reports])
            )
            for eps in eps_grid
        },
        "passed": ok,
    }
    _write_report(report, report_path)
    print(
        f"optimum recovery on {benchmark_id}: max error {errors.max():.3g} over "
        f"{n_seeds} seeds (tol {tol:g}) -> " + ("PASS" if ok else "FAIL")
    )
    for eps in eps_grid:
        frac = report["norm_bound_fraction"][str(eps)]
        print(
            f"  ||y*|| <= sqrt(d_e)/{eps} * ||x*_top|| held in {frac:.2%} of seeds"
            f" (median ||y*|| {np.median(y_norms):.3g})"
        )
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crembo", description="Random-embedding Bayesian optimization harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute all runs in a JSON experiment spec")
    p_run.add_argument("spec", help="path to the JSON spec file")
    p_run.add_argument("--out", help="override the spec's output directory")
    p_run.add_argument(
        "--seed-offset", type=int, default=0, help="shift all seeds by this amount"
    )

    p_sum = sub.add_parser("summarize", help="aggregate a trace.csv")
    p_sum.add_argument("trace", help="path to trace.csv")
    p_sum.add_argument("--out", help="output directory (default: next to trace)")

    p_ver = sub.add_parser("verify", help="subspace diagnostics")
    ver_sub = p_ver.add_subparsers(dest="check", required=True)

    p_rank = ver_sub.add_parser("rank", help="rank preservation of projected embeddings")
    p_rank.add_argument("--D", type=int, required=True)
    p_rank.add_argument("--d", type=int, required=True)
    p_rank.add_argument("--de", type=int, required=True)
    p_rank.add_argument("--trials", type=int, default=1000)
    p_rank.add_argument("--seed", type=int, default=0)
    p_rank.add_argument("--report", help="write a JSON report here")

    p_rec = ver_sub.add_parser("recovery", help="in-subspace optimum recovery")
    p_rec.add_argument("--benchmark", required=True)
    p_rec.add_argument("--seeds", type=int, default=100)
    p_rec.add_argument("--d", type=int, help="embedding dimension (default: d_e)")
    p_rec.add_argument("--tol", type=float, default=1e-6)
    p_rec.add_argument("--report", help="write a JSON report here")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.spec, args.out, args.seed_offset)
    if args.command == "summarize":
        return cmd_summarize(args.trace, args.out)
    if args.command == "verify":
        if args.check == "rank":
            if not 1 <= args.de <= args.d <= args.D:
                print("error: need 1 <= de <= d <= D", file=sys.stderr)
                return 2
            return cmd_verify_rank(
                args.D, args.d, args.de, args.trials, args.seed, args.report
            )
        return cmd_verify_recovery(
            args.benchmark, args.seeds, args.d, args.tol, args.report
        )
    return 2


if __name__ == "__main__":
    sys.exit(main())
