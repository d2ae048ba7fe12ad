"""Command line interface: generate, fit, forecast and reproduce.

Exit codes: 0 on success, 1 on runtime or I/O failures, 2 on usage errors.
"""
import argparse
import contextlib
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from typing import TextIO

import numpy as np

from arslack.ar import ArModel, fit_ar, forecast_ar
from arslack.ars import SlackInit, fit_ars, fit_ars_interactions, forecast_ars
from arslack.dynamics import NoiseConfig, add_noise, gen_circular, gen_lorenz
from arslack.errors import ArsError, InvalidArgument, UsageError
from arslack.evaluation import (
    ExperimentConfig,
    check_envelopes,
    figure1_demo,
    relative_error_table,
    run_experiment,
    write_figure_csv,
    write_report_csv,
)
from arslack.lorenz_identity import lorenz_ode_residual, residual_rows
from arslack.optimizer import OptimSettings
from arslack.persistence import Model, dump_model, load_model
from arslack.series import ObservedSeries, read_series, write_series
from arslack.svg import line_chart

logger = logging.getLogger(__name__)

SEED_ENV = "ARS_SEED"
MAX_SEED = 2 ** 64


def cmd_generate(system: str, n: int, sigma: float, seed: int, out: TextIO) -> None:
    """Write `n` states of `system` with N(0, sigma^2) noise as CSV."""
    try:
        trajectory = gen_circular(n) if system == "circular" else gen_lorenz(n)
        trajectory = add_noise(trajectory, NoiseConfig(sigma=sigma, seed=seed))
    except InvalidArgument as e:
        raise UsageError(str(e))

    write_series(trajectory, out)


def cmd_fit(source: TextIO,
            out: TextIO,
            model: str = "ars",
            r: int = 1,
            s_tilde: int = 1,
            p: int = 1,
            init: str = "standard_normal",
            seed: int = 0,
            ridge: float = 0.0,
            settings: OptimSettings | None = None,
            method: str = "bfgs",
            init_scale: float = 1.0,
            intercept: bool = False) -> Model:
    """Fit a model on the first `r` columns of the series in `source` and write it as JSON.

    For ``truth_perturbed`` initialization the next `s_tilde` columns are the
    true missing coordinates.
    """
    series = read_series(source)

    if not 1 <= r <= series.dim:
        raise UsageError(f"r={r} must lie in [1, {series.dim}] for a series with {series.dim} columns.")

    observed = ObservedSeries(series.states[:, :r], step=series.step, start_index=series.start_index)

    if model == "ar":
        fitted = fit_ar(observed, p=p, ridge=ridge, intercept=intercept)
    else:
        truth = None

        if init == "truth_perturbed":
            if r + s_tilde > series.dim:
                raise UsageError(f"truth_perturbed needs {r + s_tilde} columns, the input has {series.dim}.")

            truth = series.states[:, r:r + s_tilde]

        settings = replace(settings or OptimSettings(), seed=seed)
        slack_init = SlackInit(mode=init, truth=truth, seed=seed, scale=init_scale)

        if model == "ars-int":
            fitted = fit_ars_interactions(observed, s_tilde, slack_init, settings, ridge)
        else:
            fitted = fit_ars(observed, s_tilde, slack_init, settings, ridge, method=method)

    dump_model(fitted, out)
    return fitted


def cmd_forecast(model_source: TextIO, history_source: TextIO, k: int, out: TextIO) -> ObservedSeries:
    """Forecast `k` steps past the last row of the history and write them as CSV.

    The first ``r`` columns of the history are used; extra columns are dropped
    with a warning.
    """
    if k < 0:
        raise UsageError(f"Horizon must be nonnegative, got {k}.")

    model = load_model(model_source)
    history = read_series(history_source)

    if history.dim < model.r:
        raise UsageError(f"Model has r={model.r} but the history has {history.dim} columns.")

    if len(history) < 1:
        raise UsageError("The history is empty.")

    if history.dim > model.r:
        logger.warning("Using the first %d of %d history columns.", model.r, history.dim)

    history = ObservedSeries(history.states[:, :model.r], step=history.step, start_index=history.start_index)

    if isinstance(model, ArModel):
        forecast = forecast_ar(model, history, k)
    else:
        forecast = forecast_ars(model, k, history)

    write_series(forecast, out)
    return forecast


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fp:
        fp.write(text)


def _figure_svg(title: str, curves: dict[str, ObservedSeries]) -> str:
    return line_chart({name: (s.times, s.states[:, 0]) for name, s in curves.items()}, title)


def _print_summary(rows: list[dict], fmt: str, stream: TextIO) -> None:
    if fmt == "json":
        json.dump(rows, stream, indent=1)
        stream.write("\n")
        return

    if not rows:
        return

    writer = csv.DictWriter(stream, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)


def cmd_reproduce(out_dir: str,
                  seed: int = 0,
                  instances: int = 10,
                  workers: int = 4,
                  fmt: str = "csv",
                  stream: TextIO | None = None,
                  ridge: float = 0.0) -> bool:
    """Run both experiments, the sampled-cosine demo and the Lorenz identity check into `out_dir`.

    Returns True when every accuracy check passed. Files written before a
    failing stage are kept.
    """
    stream = stream or sys.stdout
    os.makedirs(out_dir, exist_ok=True)
    checks: list[tuple[str, bool]] = []

    truth, ar, ars = figure1_demo(seed=seed)
    _write_text(os.path.join(out_dir, "figure1.svg"),
                _figure_svg("Circular motion, step 0.3", {"truth": truth, "AR": ar, "ARS": ars}))
    checks.append(("sampled cosine ARS max abs error < 0.05",
                   float(np.max(np.abs(ars.states - truth.states[len(truth) - len(ars):]))) < 0.05))

    figure_number = 3

    for table_number, system in ((1, "circular"), (2, "lorenz")):
        config = ExperimentConfig(system=system, instances=instances, base_seed=seed, workers=workers, ridge=ridge)
        report = run_experiment(config)

        write_report_csv(report, os.path.join(out_dir, f"{system}.csv"))
        _write_text(os.path.join(out_dir, f"table{table_number}.md"), "\n".join(relative_error_table(report)) + "\n")

        for sigma in config.sigmas:
            figure = report.figures.get(sigma)

            if figure is not None:
                stem = os.path.join(out_dir, f"figure{figure_number}")
                curves = {"train": figure.train, "truth": figure.truth, "AR": figure.ar, "ARS": figure.ars}
                _write_text(stem + ".svg", _figure_svg(f"{system}, sigma={sigma:g}", curves))

                with open(stem + ".csv", "w", encoding="utf-8", newline="") as fp:
                    write_figure_csv(figure, fp)

            figure_number += 1

        checks.extend(check_envelopes(report))

    fine = lorenz_ode_residual(dt=1e-4)
    with open(os.path.join(out_dir, "appendix_c_residuals.csv"), "w", encoding="utf-8", newline="") as fp:
        rows = residual_rows(fine)
        writer = csv.DictWriter(fp, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

    coarse, finer = lorenz_ode_residual(dt=4e-3), lorenz_ode_residual(dt=2e-3)
    checks.append(("lorenz identity relative residual < 1e-3 at dt=1e-4",
                   float(np.max(fine.relative_residual)) < 1e-3))
    checks.append(("lorenz identity residual shrinks by 2x when dt halves",
                   float(np.max(coarse.relative_residual)) >= 2 * float(np.max(finer.relative_residual))))

    _print_summary([{"check": name, "result": "PASS" if passed else "FAIL"} for name, passed in checks], fmt, stream)
    return all(passed for _, passed in checks)


@contextlib.contextmanager
def _open(path: str | None, mode: str):
    if path is None or path == "-":
        yield sys.stdout if "w" in mode else sys.stdin
        return

    with open(path, mode, encoding="utf-8", newline="") as fp:
        yield fp


def _seed(args) -> int:
    seed = args.seed

    if seed is None:
        try:
            seed = int(os.environ.get(SEED_ENV, "0"))
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {os.environ[SEED_ENV]!r}.")

    if not 0 <= seed < MAX_SEED:
        raise UsageError(f"Seed must lie in [0, 2^64), got {seed}.")

    return seed


def _check_positive(**values) -> None:
    for name, value in values.items():
        if value < 0:
            raise UsageError(f"--{name.replace('_', '-')} must be nonnegative, got {value}.")


def _reject_ridge(args) -> None:
    if args.ridge != 0:
        raise UsageError(f"--ridge does not apply to `{args.command}`.")


def _run_generate(args) -> int:
    _check_positive(n=args.n, sigma=args.sigma)
    _reject_ridge(args)

    with _open(args.output, "w") as out:
        cmd_generate(args.system, args.n, args.sigma, _seed(args), out)

    if args.output not in (None, "-"):
        _print_summary([{"system": args.system, "rows": args.n, "output": args.output}], args.format, sys.stdout)

    return 0


def _run_fit(args) -> int:
    _check_positive(ridge=args.ridge, s_tilde=args.s_tilde, max_iters=args.max_iters, restarts=args.restarts)
    seed = _seed(args)

    try:
        settings = OptimSettings(max_iters=args.max_iters, restarts=args.restarts, seed=seed)
    except InvalidArgument as e:
        raise UsageError(str(e))

    with _open(args.input, "r") as source, _open(args.output, "w") as out:
        fitted = cmd_fit(source, out, args.model, args.r, args.s_tilde, args.p, args.init, seed, args.ridge,
                         settings, args.method, args.init_scale, args.intercept)

    if args.output not in (None, "-"):
        if isinstance(fitted, ArModel):
            summary = {"type": args.model, "final_loss": fitted.residual_sum, "converged": True}
        else:
            summary = {"type": args.model, "final_loss": fitted.final_loss, "converged": fitted.converged}

        _print_summary([summary], args.format, sys.stdout)

    return 0


def _run_forecast(args) -> int:
    _reject_ridge(args)

    with _open(args.model, "r") as model_source, _open(args.history, "r") as history_source, \
            _open(args.output, "w") as out:
        forecast = cmd_forecast(model_source, history_source, args.k, out)

    if args.output not in (None, "-"):
        summary = {"rows": len(forecast), "start_index": forecast.start_index, "output": args.output}
        _print_summary([summary], args.format, sys.stdout)

    return 0


def _run_reproduce(args) -> int:
    if args.instances < 1 or args.workers < 1:
        raise UsageError(f"--instances and --workers must be positive, got {args.instances}, {args.workers}.")

    _check_positive(ridge=args.ridge)
    passed = cmd_reproduce(args.output or "reproduction", _seed(args), args.instances, args.workers, args.format,
                           ridge=args.ridge)
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"Random seed (default ${SEED_ENV} or 0)")
    common.add_argument("--ridge", type=float, default=0.0,
                        help="Ridge penalty of the least-squares fits (fit and reproduce)")
    common.add_argument("--output", type=str, default=None, help="Output path; stdout when omitted")
    common.add_argument("--format", type=str, default="csv", choices=["csv", "json"],
                        help="Encoding of the summary printed to stdout")
    common.add_argument("-v", "--verbose", action="store_true", help="Log debug messages")

    parser = argparse.ArgumentParser(prog="arslack", description="Autoregression with slack time series")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", parents=[common], help="Generate a synthetic trajectory")
    p_gen.add_argument("--system", type=str, required=True, choices=["circular", "lorenz"])
    p_gen.add_argument("--n", type=int, default=100)
    p_gen.add_argument("--sigma", type=float, default=0.0)
    p_gen.set_defaults(func=_run_generate)

    p_fit = sub.add_parser("fit", parents=[common], help="Fit an AR or ARS model on a CSV series")
    p_fit.add_argument("--input", type=str, required=True, help="Series CSV; `-` reads stdin")
    p_fit.add_argument("--model", type=str, default="ars", choices=["ar", "ars", "ars-int"])
    p_fit.add_argument("--r", type=int, default=1, help="Number of observed leading columns")
    p_fit.add_argument("--s-tilde", type=int, default=1, help="Slack dimension")
    p_fit.add_argument("--p", type=int, default=1, help="AR order")
    p_fit.add_argument("--intercept", action="store_true", help="Fit an AR intercept")
    p_fit.add_argument("--init", type=str, default="standard_normal",
                       choices=["standard_normal", "truth_perturbed", "zeros"])
    p_fit.add_argument("--init-scale", type=float, default=1.0)
    p_fit.add_argument("--method", type=str, default="bfgs", choices=["bfgs", "als"])
    p_fit.add_argument("--max-iters", type=int, default=2000)
    p_fit.add_argument("--restarts", type=int, default=3)
    p_fit.set_defaults(func=_run_fit)

    p_fc = sub.add_parser("forecast", parents=[common], help="Forecast from a fitted model")
    p_fc.add_argument("--model", type=str, required=True, help="Model JSON")
    p_fc.add_argument("--history", type=str, required=True, help="History CSV; the forecast starts after its last row")
    p_fc.add_argument("--k", type=int, required=True, help="Number of steps")
    p_fc.set_defaults(func=_run_forecast)

    p_rep = sub.add_parser("reproduce", parents=[common], help="Run the full experiment suite into --output")
    p_rep.add_argument("--instances", type=int, default=10)
    p_rep.add_argument("--workers", type=int, default=4)
    p_rep.set_defaults(func=_run_reproduce)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        return int(args.func(args))
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"arslack {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (ArsError, OSError) as e:
        print(f"arslack {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
