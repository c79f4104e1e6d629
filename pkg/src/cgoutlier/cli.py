"""Command-line interface.

Subcommands: check-graph, fit, test, batch-score, simulate-null, diagnose.
Exit status is 0 on success, 1 on an analysis error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from typing import Sequence

from . import __version__
from .cgr import DEFAULT_DF_CONVENTION, DF_CONVENTIONS, MODES, CgrModel, cell_r_squared, fit_model
from .deviance import DevianceBreakdown
from .errors import CgOutlierError
from .graph import continuous_parents, is_decomposable, perfect_numbering
from .io import (
    ReportDocument,
    empty_like,
    finite_or_none,
    load_dataset,
    load_graph,
    load_model,
    load_observations,
    load_schema,
    save_model,
    schema_from_graph,
    write_json,
)
from .montecarlo import DEFAULT_NSIM, NullSample, default_threads, simulate_null_deviances, test_with_model
from .tabular import Dataset, Observation, cell_indices

log = logging.getLogger("cgoutlier")


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", help="comma-separated data file with a header row")
    common.add_argument("--schema", help="JSON column schema (kinds default to the graph's)")
    common.add_argument("--graph", help="JSON graph document")
    common.add_argument("--model", help="JSON model written by 'fit' (replaces --data/--graph for 'test')")
    common.add_argument("--obs", help="row index into --data (0-based) or a CSV file of observations")
    common.add_argument("--nsim", type=int, default=DEFAULT_NSIM, help="null simulations (default %(default)s)")
    common.add_argument("--alpha", type=float, default=0.05, help="significance level (default %(default)s)")
    common.add_argument("--mode", choices=MODES, default="inhomogeneous")
    common.add_argument("--df-convention", choices=DF_CONVENTIONS, default=DEFAULT_DF_CONVENTION)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None, help="worker threads (env CGOUTLIER_THREADS)")
    common.add_argument("--out", default="-", help="output file (default stdout)")
    common.add_argument("--timing", action="store_true", help="add wall-clock timings to the report")
    common.add_argument("--approx-shared-null", action="store_true",
                        help="batch-score with --obs FILE: reuse one null sample simulated without the tested points")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cgoutlier", description="Likelihood-ratio outlier tests in decomposable mixed graphical models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in [
        ("check-graph", "report whether a graph is decomposable"),
        ("fit", "fit and save a model"),
        ("test", "test one observation"),
        ("batch-score", "test every row of the data (or of --obs FILE)"),
        ("simulate-null", "emit a simulated null sample of deviances"),
        ("diagnose", "per-cell R^2 of every continuous regression"),
    ]:
        sub.add_parser(name, parents=[common], help=text, description=text)
    return p


def _need(args, *names) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command} requires {', '.join(missing)}")


def _config(args) -> dict:
    keys = ["data", "schema", "graph", "model", "obs", "nsim", "alpha", "mode", "df_convention", "seed", "approx_shared_null"]
    return {k: getattr(args, k) for k in keys}


def _load_inputs(args):
    _need(args, "graph", "data")
    g = load_graph(args.graph)
    columns = load_schema(args.schema) if args.schema else schema_from_graph(g)
    data = load_dataset(args.data, columns)
    return g, data


def _parse_obs(args, data: Dataset) -> tuple[list[Observation], list, Dataset | None]:
    """Observations to test, their ids, and the data without them."""
    try:
        row = int(args.obs)
    except ValueError:
        row = None
    if row is not None:
        if not 0 <= row < data.n_rows:
            raise UsageError(f"--obs {row} is outside the {data.n_rows} data rows")
        return [data.row(row)], [row], data.drop(row)
    return load_observations(args.obs, data), None, data


def _breakdown_doc(b: DevianceBreakdown) -> dict:
    terms = []
    for t in b.continuous_terms:
        entry = {"target": t.target, "term": finite_or_none(t.value), "skipped": t.skipped, "residual_df": t.residual_df, "weight": t.weight}
        if t.q is not None:
            entry.update(
                q=t.q.value, df=t.q.df, cell=list(t.q.cell), residual=t.q.residual,
                leverage=t.q.leverage, studentized=finite_or_none(t.q.studentized),
            )
        terms.append(entry)
    return {"discrete": b.discrete_term, "continuous": terms, "total": finite_or_none(b.total)}


def _result_doc(ident, data: Dataset, z: Observation, result) -> dict:
    return {
        "id": ident,
        "observation": data.decode(z),
        "deviance": finite_or_none(result.deviance),
        "cdf": result.cdf,
        "p_value": result.p_value,
        "alpha": result.alpha,
        "outlier": result.outlier,
        "breakdown": _breakdown_doc(result.observed),
        "null": result.null.summary(),
    }


def _threads(args) -> int:
    return args.threads if args.threads is not None else default_threads()


# ---------------------------------------------------------------------------
# subcommands


def cmd_check_graph(args) -> ReportDocument:
    _need(args, "graph")
    g = load_graph(args.graph)
    check = is_decomposable(g)
    result: dict = {"decomposable": check.decomposable}
    if check:
        nb = perfect_numbering(g)
        result["numbering"] = list(nb.order)
        result["parents"] = {j: {"discrete": list(pa.discrete), "continuous": list(pa.continuous)} for j, pa in continuous_parents(g, nb).items()}
        print(f"{args.graph}: decomposable; perfect numbering {' '.join(nb.order)}", file=sys.stderr)
    else:
        result["witness"] = {"kind": check.witness.kind, "vertices": list(check.witness.vertices)}
        print(f"{args.graph}: not decomposable; {check.witness.describe()}", file=sys.stderr)
    return ReportDocument("check-graph", {"graph": args.graph}, [result])


def cmd_fit(args) -> None:
    g, data = _load_inputs(args)
    model = fit_model(g, data, args.mode, args.df_convention)
    save_model(model, data.columns, args.out)
    return None


def cmd_test(args) -> ReportDocument:
    _need(args, "obs")
    if args.model:
        model, columns = load_model(args.model)
        like = empty_like(columns)
        if args.obs.lstrip("-").isdigit():
            raise UsageError("with --model, --obs must be a CSV file")
        obs = load_observations(args.obs, like)
        base, ids = like, None
    else:
        g, data = _load_inputs(args)
        obs, ids, base = _parse_obs(args, data)
        model = fit_model(g, base, args.mode, args.df_convention)
    if len(obs) != 1:
        raise UsageError(f"test takes exactly one observation, {args.obs} holds {len(obs)}; use batch-score")
    z = obs[0]
    result = test_with_model(model, base, z, args.nsim, args.alpha, args.seed, _threads(args))
    ident = ids[0] if ids else 0
    config = _config(args)
    config.update(mode=model.mode, df_convention=model.df_convention)
    return ReportDocument("test", config, [_result_doc(ident, base, z, result)])


def _null_key(model: CgrModel, z: Observation | None) -> tuple:
    tables = model.tables if z is None else model.tables.add(z.discrete)
    parts = [tuple(sorted(t.counts.items())) for t in tables.cliques]
    for f in model.factors.values():
        counts = f.counts()
        if z is not None:
            key = tuple(z.discrete[tables.variables.index(v)] for v in f.parents.discrete)
            counts[key] = counts.get(key, 0) + 1
        parts.append(tuple(sorted(counts.items())))
    return tuple(parts)


def cmd_batch_score(args) -> ReportDocument:
    g, data = _load_inputs(args)
    threads = _threads(args)
    cache: dict[tuple, NullSample] = {}
    shared = None
    results = []
    if args.obs is None:
        # leave-one-in: row l is tested against the other rows with itself appended
        for row in range(data.n_rows):
            base = data.drop(row)
            z = data.row(row)
            model = fit_model(g, base, args.mode, args.df_convention)
            key = _null_key(model, z)
            if key not in cache:
                cache[key] = simulate_null_deviances(model, args.nsim, args.seed, threads, z_cell=z.discrete)
            res = test_with_model(model, base, z, args.nsim, args.alpha, args.seed, threads, null=cache[key])
            results.append(_result_doc(row, base, z, res))
    else:
        obs, _, _ = _parse_obs(args, data)
        model = fit_model(g, data, args.mode, args.df_convention)
        shared = simulate_null_deviances(model, args.nsim, args.seed, threads) if args.approx_shared_null else None
        for k, z in enumerate(obs):
            null = shared
            if null is None:
                key = _null_key(model, z)
                if key not in cache:
                    cache[key] = simulate_null_deviances(model, args.nsim, args.seed, threads, z_cell=z.discrete)
                null = cache[key]
            res = test_with_model(model, data, z, args.nsim, args.alpha, args.seed, threads, null=null)
            results.append(_result_doc(k, data, z, res))
    n_null = len(cache) + (shared is not None if args.obs is not None else 0)
    n_out = sum(r["outlier"] for r in results)
    print(f"{n_out} of {len(results)} observations declared outliers at alpha={args.alpha}", file=sys.stderr)
    extra = {"summary": {"n": len(results), "n_outliers": n_out, "rejection_fraction": n_out / len(results) if results else None, "distinct_null_samples": n_null}}
    return ReportDocument("batch-score", _config(args), results, extra)


def cmd_simulate_null(args) -> ReportDocument:
    z_cell = None
    if args.model:
        model, columns = load_model(args.model)
        if args.obs is not None:
            if args.obs.lstrip("-").isdigit():
                raise UsageError("with --model, --obs must be a CSV file")
            obs = load_observations(args.obs, empty_like(columns))
            if len(obs) != 1:
                raise UsageError("simulate-null takes at most one observation")
            z_cell = obs[0].discrete
    else:
        g, data = _load_inputs(args)
        base = data
        if args.obs is not None:
            obs, _, base = _parse_obs(args, data)
            if len(obs) != 1:
                raise UsageError("simulate-null takes at most one observation")
            z_cell = obs[0].discrete
        model = fit_model(g, base, args.mode, args.df_convention)
    null = simulate_null_deviances(model, args.nsim, args.seed, _threads(args), z_cell=z_cell)
    return ReportDocument("simulate-null", _config(args), [{"deviances": null.deviances.tolist()}], {"null": null.summary()})


def cmd_diagnose(args) -> ReportDocument:
    g, data = _load_inputs(args)
    nb = perfect_numbering(g)
    results = []
    for j, pa in continuous_parents(g, nb).items():
        r2 = cell_r_squared(data, j, pa)
        cells = []
        for cell, value in sorted(r2.items()):
            labels = {v: data.levels(v)[c] for v, c in zip(pa.discrete, cell)}
            cells.append({"cell": labels, "n": int(_cell_size(data, pa.discrete, cell)), "r_squared": value})
        results.append({"target": j, "discrete_parents": list(pa.discrete), "continuous_parents": list(pa.continuous), "cells": cells})
        model_txt = f"{j} ~ " + (" + ".join(pa.continuous) or "1")
        for c in cells:
            where = ", ".join(f"{k}={v}" for k, v in c["cell"].items()) or "all rows"
            print(f"{model_txt:40s} [{where}] n={c['n']} R2={c['r_squared']:.3f}", file=sys.stderr)
    return ReportDocument("diagnose", _config(args), results)


def _cell_size(data: Dataset, names, cell) -> int:
    return len(cell_indices(data, list(names), cell))


COMMANDS = {
    "check-graph": cmd_check_graph,
    "fit": cmd_fit,
    "test": cmd_test,
    "batch-score": cmd_batch_score,
    "simulate-null": cmd_simulate_null,
    "diagnose": cmd_diagnose,
}


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.nsim < 1:
            raise UsageError("--nsim must be positive")
        if not 0 < args.alpha < 1:
            raise UsageError("--alpha must lie in (0, 1)")
        started = time.perf_counter()
        report = COMMANDS[args.command](args)
        if report is not None:
            if args.timing:
                report.timing = {"seconds": time.perf_counter() - started}
            write_json(report.to_dict(), args.out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cgoutlier: error: {exc}", file=sys.stderr)
        return 2
    except CgOutlierError as exc:
        print(f"cgoutlier: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())
