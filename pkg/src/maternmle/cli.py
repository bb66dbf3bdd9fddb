"""Command-line front end: dataset simulation, estimation runs, likelihood
probes, and a Monte-Carlo benchmark harness.

Subcommands
-----------
estimate   Fit Matern parameters to a CSV dataset (fisher-bt, nelder-mead,
           or both) and write a JSON result document.
simulate   Draw one synthetic dataset to CSV plus a JSON metadata sidecar.
benchmark  Run a factorial (theta_true x n x replicate x method) study and
           write per-run records plus a summary CSV.
loglik     Evaluate log-likelihood, gradient, and Fisher information at a
           fixed parameter vector (debugging aid).

Datasets are CSV files with header ``x,y,z`` and 17-significant-digit
floats, LF line endings.  Exit codes: 0 success, 2 parse/plan errors,
3 optimization failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .likelihood import NotPositiveDefinite, grad_and_fisher
from .matern import MaternParams, SpatialDataset
from .optimizer import (
    FisherBTConfig,
    InitializationFailed,
    LikelihoodObjective,
    SingularInformation,
    fisher_bt,
    nelder_mead,
)
from .simulate import (
    GENERATOR_ID,
    LocationScheme,
    PlanError,
    SimulationPlan,
    gen_locations,
    microergodic,
    replicate_seed,
    simulate_grf,
)

DEFAULT_LOWER = "0.01,0.01,0.01"
DEFAULT_UPPER = "5,5,2"

SUMMARY_COLUMNS = [
    "theta_set",
    "n",
    "method",
    "param",
    "mean",
    "sd",
    "mean_loglik_deficit",
    "mean_loglik_calls",
    "mean_grad_calls",
    "mean_wall_time",
]


class DatasetFormatError(Exception):
    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}: line {line}: {message}")


def parse_theta(text: str) -> MaternParams:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"expected 3 comma-separated values, got {text!r}")
    return MaternParams(float(parts[0]), float(parts[1]), float(parts[2]))


def read_dataset(path) -> SpatialDataset:
    """Parse an ``x,y,z`` CSV into a SpatialDataset.

    Raises DatasetFormatError with a 1-based line number on any problem.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        first = handle.readline()
        if first.strip() != "x,y,z":
            raise DatasetFormatError(path, 1, "expected header 'x,y,z'")
        for lineno, line in enumerate(handle, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 3:
                raise DatasetFormatError(path, lineno, f"expected 3 fields, got {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise DatasetFormatError(path, lineno, "non-numeric field")
    if not rows:
        raise DatasetFormatError(path, 2, "no data rows")
    arr = np.asarray(rows)
    try:
        return SpatialDataset(arr[:, :2], arr[:, 2])
    except ValueError as exc:
        raise DatasetFormatError(path, 2, str(exc))


def write_dataset(path, locations, values):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("x,y,z\n")
        for (x, y), z in zip(locations, values):
            handle.write(f"{x:.17g},{y:.17g},{z:.17g}\n")


def _std_errors(fisher: np.ndarray):
    """(std_errors, reason): square roots of diag(I^-1), or None + reason."""
    try:
        np.linalg.cholesky(fisher)
        covariance = np.linalg.inv(fisher)
    except np.linalg.LinAlgError:
        return None, "information_not_positive_definite"
    diag = np.diag(covariance)
    if np.any(diag <= 0.0) or not np.all(np.isfinite(diag)):
        return None, "information_not_positive_definite"
    return [float(v) for v in np.sqrt(diag)], None


def _record(method, theta_hat, fisher, loglik, loglik_calls, grad_calls,
            wall_time, termination, seed, trace=None):
    std_errors, reason = _std_errors(fisher)
    record = {
        "method": method,
        "theta_hat": {"sigma2": theta_hat.sigma2, "alpha": theta_hat.alpha, "nu": theta_hat.nu},
        "std_errors": std_errors,
        "loglik": loglik,
        "loglik_calls": loglik_calls,
        "grad_calls": grad_calls,
        "wall_time": wall_time,
        "termination": termination,
        "seed": seed,
    }
    if reason is not None:
        record["std_errors_reason"] = reason
    if trace is not None:
        record["trace"] = trace
    return record


def run_method(data: SpatialDataset, method: str, cfg: FisherBTConfig, seed: int,
               with_trace: bool = False) -> dict:
    """Run one estimation method on one dataset and build its RunRecord."""
    start = time.perf_counter()
    if method == "fisher-bt":
        result = fisher_bt(data, cfg)
        wall = time.perf_counter() - start
        trace = None
        if with_trace:
            trace = [
                [p.sigma2, p.alpha, p.nu, ll] for p, ll in result.iterate_trace
            ]
        return _record(
            method,
            result.theta_hat,
            result.fisher_at_hat,
            result.loglik_at_hat,
            result.loglik_calls,
            result.grad_calls,
            wall,
            result.termination.value,
            seed,
            trace,
        )
    if method == "nelder-mead":
        midpoint = MaternParams.from_array(
            0.5 * (cfg.theta_lower.as_array() + cfg.theta_upper.as_array())
        )
        objective = LikelihoodObjective(data)
        theta_hat, calls = nelder_mead(data, midpoint, cfg.nm_tol, objective=objective)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            ev = grad_and_fisher(data, theta_hat)
        wall = time.perf_counter() - start
        return _record(
            method,
            theta_hat,
            ev.fisher,
            ev.loglik,
            calls + 1,
            1,
            wall,
            "nm_converged",
            seed,
        )
    raise ValueError(f"unknown method {method!r}")


def _methods_for(flag: str):
    return ["fisher-bt", "nelder-mead"] if flag == "both" else [flag]


def cmd_estimate(args) -> int:
    try:
        data = read_dataset(args.input)
    except (OSError, DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = FisherBTConfig(theta_lower=parse_theta(args.lower), theta_upper=parse_theta(args.upper))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    records = []
    for method in _methods_for(args.method):
        try:
            records.append(run_method(data, method, cfg, args.seed, with_trace=args.trace))
        except (InitializationFailed, SingularInformation) as exc:
            print(f"error: optimization failed: {exc}", file=sys.stderr)
            return 3
    document = {"input": str(args.input), "records": records}
    _emit_json(document, args.out)
    return 0


def cmd_simulate(args) -> int:
    try:
        theta = parse_theta(args.theta)
        plan = SimulationPlan(
            n=args.n,
            theta_true=theta,
            location_scheme=LocationScheme(args.scheme),
            rng_seed=args.seed,
        )
        locations = gen_locations(plan)
        values = simulate_grf(locations, theta, args.seed)
    except (PlanError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_dataset(args.out, locations, values)
    metadata = {
        "theta_true": {"sigma2": theta.sigma2, "alpha": theta.alpha, "nu": theta.nu},
        "seed": args.seed,
        "scheme": args.scheme,
        "n": args.n,
        "generator": GENERATOR_ID,
    }
    with open(str(args.out) + ".meta.json", "w", encoding="utf-8") as handle:
        json.dump(metadata, handle, indent=2)
        handle.write("\n")
    return 0


def _benchmark_task(task: dict) -> dict:
    """One (theta_true, n, replicate) cell entry; run in a worker process."""
    theta = MaternParams(*task["theta"])
    plan = SimulationPlan(
        n=task["n"],
        theta_true=theta,
        location_scheme=LocationScheme(task["scheme"]),
        rng_seed=task["seed"],
    )
    locations = gen_locations(plan)
    values = simulate_grf(locations, theta, task["seed"])
    data = SpatialDataset(locations, values)
    cfg = FisherBTConfig(
        theta_lower=MaternParams(*task["lower"]), theta_upper=MaternParams(*task["upper"])
    )
    records = []
    for method in task["methods"]:
        try:
            records.append(run_method(data, method, cfg, task["seed"]))
        except (InitializationFailed, SingularInformation) as exc:
            records.append({"method": method, "seed": task["seed"], "error": str(exc)})
    return {
        "theta_index": task["theta_index"],
        "n_index": task["n_index"],
        "replicate": task["replicate"],
        "records": records,
    }


def run_benchmark(theta_sets, sizes, replicates, methods, lower, upper,
                  master_seed, jobs=1, scheme="grid", out_dir=None):
    """Full-factorial Monte-Carlo study; returns (results, summary_rows).

    Each replicate seed derives from (master_seed, theta index, n index,
    replicate index) so the study is reproducible under any job count.
    """
    tasks = []
    for ti, theta in enumerate(theta_sets):
        for ni, n in enumerate(sizes):
            for rep in range(replicates):
                tasks.append(
                    {
                        "theta_index": ti,
                        "n_index": ni,
                        "theta": (theta.sigma2, theta.alpha, theta.nu),
                        "n": n,
                        "replicate": rep,
                        "seed": replicate_seed(master_seed, ti, ni, rep),
                        "methods": methods,
                        "lower": lower,
                        "upper": upper,
                        "scheme": scheme,
                    }
                )
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_benchmark_task, tasks))
    else:
        results = [_benchmark_task(task) for task in tasks]
    results.sort(key=lambda r: (r["theta_index"], r["n_index"], r["replicate"]))

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for result in results:
            ti, ni, rep = result["theta_index"], result["n_index"], result["replicate"]
            name = f"run_t{ti}_n{sizes[ni]}_r{rep}.json"
            with open(out_dir / name, "w", encoding="utf-8") as handle:
                json.dump(result, handle, indent=2)
                handle.write("\n")

    summary = _summarize(results, theta_sets, sizes, methods)
    if out_dir is not None:
        with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="\n") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(SUMMARY_COLUMNS)
            writer.writerows(summary)
    return results, summary


def _summarize(results, theta_sets, sizes, methods):
    """Per-cell mean/SD rows over successful replicates.

    The log-likelihood deficit of a method on one dataset is measured from
    the best value any method achieved on that same dataset.
    """
    rows = []
    for ti, theta in enumerate(theta_sets):
        theta_label = f"{theta.sigma2:g},{theta.alpha:g},{theta.nu:g}"
        for ni, n in enumerate(sizes):
            cell = [r for r in results if r["theta_index"] == ti and r["n_index"] == ni]
            for method in methods:
                estimates = {"sigma2": [], "alpha": [], "nu": [], "micro": []}
                deficits, ll_calls, g_calls, walls = [], [], [], []
                for result in cell:
                    record = next(
                        (rec for rec in result["records"] if rec["method"] == method), None
                    )
                    if record is None or "error" in record:
                        continue
                    best = max(
                        rec["loglik"] for rec in result["records"] if "error" not in rec
                    )
                    hat = record["theta_hat"]
                    params = MaternParams(hat["sigma2"], hat["alpha"], hat["nu"])
                    estimates["sigma2"].append(params.sigma2)
                    estimates["alpha"].append(params.alpha)
                    estimates["nu"].append(params.nu)
                    estimates["micro"].append(microergodic(params))
                    deficits.append(best - record["loglik"])
                    ll_calls.append(record["loglik_calls"])
                    g_calls.append(record["grad_calls"])
                    walls.append(record["wall_time"])
                if not deficits:
                    continue
                for param, values in estimates.items():
                    arr = np.asarray(values)
                    # divergent (infinite) estimates legitimately yield nan SD
                    with np.errstate(invalid="ignore"):
                        sd = float(np.std(arr, ddof=1)) if arr.size > 1 else float("nan")
                    rows.append(
                        [
                            theta_label,
                            n,
                            method,
                            param,
                            f"{float(np.mean(arr)):.17g}",
                            f"{sd:.17g}",
                            f"{float(np.mean(deficits)):.17g}",
                            f"{float(np.mean(ll_calls)):.17g}",
                            f"{float(np.mean(g_calls)):.17g}",
                            f"{float(np.mean(walls)):.17g}",
                        ]
                    )
    return rows


def cmd_benchmark(args) -> int:
    try:
        theta_sets = [parse_theta(t) for t in args.theta]
        lower = parse_theta(args.lower)
        upper = parse_theta(args.upper)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    methods = _methods_for(args.methods)
    try:
        run_benchmark(
            theta_sets,
            args.n,
            args.m,
            methods,
            (lower.sigma2, lower.alpha, lower.nu),
            (upper.sigma2, upper.alpha, upper.nu),
            args.seed,
            jobs=args.jobs,
            scheme=args.scheme,
            out_dir=args.out_dir,
        )
    except PlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_loglik(args) -> int:
    try:
        data = read_dataset(args.input)
        theta = parse_theta(args.theta)
    except (OSError, DatasetFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        ev = grad_and_fisher(data, theta)
    except NotPositiveDefinite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    document = {
        "theta": {"sigma2": theta.sigma2, "alpha": theta.alpha, "nu": theta.nu},
        "loglik": ev.loglik,
        "grad": [float(g) for g in ev.grad],
        "fisher": [[float(v) for v in row] for row in ev.fisher],
    }
    _emit_json(document, args.out)
    return 0


def _emit_json(document, out_path):
    text = json.dumps(document, indent=2) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maternmle",
        description="Exact Matern maximum-likelihood estimation, simulation, and benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="fit Matern parameters to a CSV dataset")
    est.add_argument("input", help="input CSV with header x,y,z")
    est.add_argument("--method", choices=["fisher-bt", "nelder-mead", "both"],
                     default="fisher-bt")
    est.add_argument("--lower", default=DEFAULT_LOWER, help="initialization cube lower corner a,b,c")
    est.add_argument("--upper", default=DEFAULT_UPPER, help="initialization cube upper corner a,b,c")
    est.add_argument("--seed", type=int, default=0, help="seed recorded in the result")
    est.add_argument("--out", default=None, help="result JSON path (default: stdout)")
    est.add_argument("--trace", action="store_true", help="include accepted iterates")
    est.set_defaults(func=cmd_estimate)

    sim = sub.add_parser("simulate", help="draw one synthetic dataset to CSV")
    sim.add_argument("out", help="output CSV path")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--theta", required=True, help="true parameters sigma2,alpha,nu")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--scheme", choices=["grid", "uniform"], default="grid")
    sim.set_defaults(func=cmd_simulate)

    bench = sub.add_parser("benchmark", help="factorial Monte-Carlo estimation study")
    bench.add_argument("--theta", action="append", required=True,
                       help="true parameter set sigma2,alpha,nu (repeatable)")
    bench.add_argument("--n", action="append", type=int, required=True,
                       help="sample size (repeatable)")
    bench.add_argument("--m", type=int, default=50, help="replicates per cell")
    bench.add_argument("--methods", choices=["fisher-bt", "nelder-mead", "both"],
                       default="both")
    bench.add_argument("--lower", default=DEFAULT_LOWER)
    bench.add_argument("--upper", default=DEFAULT_UPPER)
    bench.add_argument("--seed", type=int, default=0, help="master seed")
    bench.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    bench.add_argument("--scheme", choices=["grid", "uniform"], default="grid")
    bench.add_argument("--out-dir", required=True, help="directory for records and summary.csv")
    bench.set_defaults(func=cmd_benchmark)

    lik = sub.add_parser("loglik", help="evaluate loglik/grad/Fisher at fixed parameters")
    lik.add_argument("input", help="input CSV with header x,y,z")
    lik.add_argument("--theta", required=True, help="parameters sigma2,alpha,nu")
    lik.add_argument("--out", default=None, help="result JSON path (default: stdout)")
    lik.set_defaults(func=cmd_loglik)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
