"""Command-line interface.

Three subcommands:

  medcal med       calibrate from calls + digitals (closed form)
  medcal bk        calibrate from calls alone (entropy maximization)
  medcal langevin  tabulate the Langevin function or its inverses

Exit codes are stable and documented: 0 success, 2 usage (click's default),
3 quote-file parse error, 4 arbitrage validation failure, 5 infeasible
inputs (no consistent density), 6 numerical failure (domain, convergence,
or verification).  Failures also emit a one-line JSON diagnostic on stderr
so wrappers never have to scrape prose.

The MEDCAL_OUT environment variable sets the base directory for default
output locations.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .bk import maximize_entropy
from .errors import (ArbitrageError, ConvergenceError, DomainError,
                     FeasibilityError, QuoteFormatError, VerificationError)
from .langevin import InverseMethod
from .med import MarketQuotes, build_density
from .quotefile import load_quotes
from . import report

EXIT_PARSE = 3
EXIT_ARBITRAGE = 4
EXIT_INFEASIBLE = 5
EXIT_NUMERICAL = 6

_METHOD_TOKENS = ("taylor", "pade", "rounded-pade", "bergstrom", "exact",
                  "polished")


def _fail(code: int, kind: str, message: str, **fields) -> None:
    record = {"error": kind, "message": message}
    record.update(fields)
    click.echo(json.dumps(record), err=True)
    sys.exit(code)


def _diagnose(exc: Exception) -> None:
    if isinstance(exc, QuoteFormatError):
        _fail(EXIT_PARSE, "parse", str(exc))
    if isinstance(exc, ArbitrageError):
        violations = [{"code": v.code, "strikes": list(v.strikes),
                       "message": v.message} for v in exc.report.violations]
        _fail(EXIT_ARBITRAGE, "arbitrage", str(exc), violations=violations)
    if isinstance(exc, FeasibilityError):
        _fail(EXIT_INFEASIBLE, "infeasible", str(exc), bucket=exc.bucket)
    if isinstance(exc, (ConvergenceError, DomainError, VerificationError)):
        _fail(EXIT_NUMERICAL, "numerical", str(exc))
    raise exc


def _out_dir(out: str | None, input_path: Path, suffix: str) -> Path:
    if out is None:
        base = Path(os.environ.get("MEDCAL_OUT", "."))
        out_path = base / f"{input_path.stem}_{suffix}"
    else:
        out_path = Path(out)
    out_path.mkdir(parents=True, exist_ok=True)
    return out_path


@click.group()
@click.version_option(package_name="medcal")
def main():
    """Maximum-entropy density calibration from option quotes."""


@main.command("med")
@click.argument("quotefile", type=click.Path(exists=True, dir_okay=False))
@click.option("--inverse-method", "method_name",
              type=click.Choice(_METHOD_TOKENS), default="polished",
              show_default=True,
              help="Inverse-Langevin algorithm for the bucket tilts.")
@click.option("--samples", type=click.IntRange(min=2), default=1001,
              show_default=True,
              help="Density sample points over [0, 1.5 K_n].")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Output directory [default: $MEDCAL_OUT/<stem>_med].")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render PNG figures alongside the tables.")
@click.option("--verify", is_flag=True,
              help="Run quadrature cross-checks on the calibrated density.")
def cmd_med(quotefile, method_name, samples, out, figures, verify):
    """Calibrate the closed-form density from calls and digitals."""
    try:
        quotes, meta = load_quotes(quotefile)
    except QuoteFormatError as exc:
        _diagnose(exc)
    if quotes.digitals is None:
        raise click.UsageError(
            "quote file has no digitals; calibrate from calls alone with "
            "`medcal bk`")
    method = InverseMethod.from_name(method_name)
    try:
        density = build_density(quotes, method=method, verify=verify)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        _diagnose(exc)
    out_path = _out_dir(out, Path(quotefile), "med")
    written = [report.write_density_csv(out_path, density, samples),
               report.write_params_json(out_path, quotes, density, meta,
                                        method_name)]
    if figures:
        written += report.write_figures(out_path, quotes, density, samples)
    for path in written:
        click.echo(str(path))


@main.command("bk")
@click.argument("quotefile", type=click.Path(exists=True, dir_okay=False))
@click.option("--tol", type=float, default=1e-10, show_default=True,
              help="Stop when the certified entropy gap falls below this.")
@click.option("--max-iter", type=click.IntRange(min=1), default=200,
              show_default=True, help="Iteration budget.")
@click.option("--inverse-method", "method_name",
              type=click.Choice(_METHOD_TOKENS), default="polished",
              show_default=True,
              help="Inverse-Langevin algorithm for the bucket tilts.")
@click.option("--samples", type=click.IntRange(min=2), default=1001,
              show_default=True,
              help="Density sample points over [0, 1.5 K_n].")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Output directory [default: $MEDCAL_OUT/<stem>_bk].")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render PNG figures alongside the tables.")
def cmd_bk(quotefile, tol, max_iter, method_name, samples, out, figures):
    """Calibrate from calls alone by maximizing entropy over digitals."""
    try:
        quotes, meta = load_quotes(quotefile)
    except QuoteFormatError as exc:
        _diagnose(exc)
    if quotes.digitals is not None:
        click.echo("warning: input digitals are ignored; they are an output "
                   "of this calibration", err=True)
    method = InverseMethod.from_name(method_name)
    out_path = _out_dir(out, Path(quotefile), "bk")
    try:
        result = maximize_entropy(quotes, tol=tol, max_iter=max_iter,
                                  method=method)
    except ConvergenceError as exc:
        if exc.trace:
            report.write_trace_csv(out_path, exc.trace)
        _diagnose(exc)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        _diagnose(exc)

    cert = result.trace[-1].certificate
    extra = {
        "digitals": result.digitals,
        "iterations": len(result.trace) - 1,
        "certificate": {
            "grad_norm": cert.grad_norm,
            "m1": cert.m1,
            "m2": cert.m2,
            "m_used": cert.m_used,
            "entropy_gap_bound": cert.entropy_gap_bound,
            "digital_dist_bound": cert.digital_dist_bound,
            "l1_bound": cert.l1_bound,
        },
    }
    calls_only = MarketQuotes(grid=quotes.grid, forward=quotes.forward,
                              calls=quotes.calls)
    written = [report.write_density_csv(out_path, result.density, samples),
               report.write_params_json(out_path, calls_only, result.density,
                                        meta, method_name, extra=extra),
               report.write_trace_csv(out_path, result.trace)]
    if figures:
        written += report.write_figures(out_path, calls_only, result.density,
                                        samples, trace=result.trace)
    for path in written:
        click.echo(str(path))


@main.command("langevin")
@click.option("--from", "lo", type=float, required=True,
              help="Left end of the tabulation range.")
@click.option("--to", "hi", type=float, required=True,
              help="Right end of the tabulation range.")
@click.option("--points", type=click.IntRange(min=1), default=201,
              show_default=True, help="Number of rows.")
@click.option("--inverse", is_flag=True,
              help="Tabulate the inverse approximations and their errors "
                   "instead of L and L'.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the table to a file instead of stdout.")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render a PNG next to the table (file output only).")
def cmd_langevin(lo, hi, points, inverse, out, figures):
    """Tabulate the Langevin function, derivative, or inverse errors."""
    if hi < lo:
        raise click.UsageError("--to must be >= --from")
    if points == 1 and hi != lo:
        raise click.UsageError("--points 1 requires --from == --to")
    try:
        if inverse:
            header, rows = report.inverse_rows(lo, hi, points)
        else:
            header, rows = ("x", "langevin", "langevin_prime"), \
                report.langevin_rows(lo, hi, points)
    except DomainError as exc:
        raise click.UsageError(str(exc)) from exc
    text = report.format_table(header, rows, digits=9)
    if out is None:
        click.echo(text, nl=False)
        return
    out_file = Path(out)
    if out_file.parent:
        out_file.parent.mkdir(parents=True, exist_ok=True)
    out_file.write_text(text)
    click.echo(str(out_file))
    if figures:
        fig_path = out_file.with_suffix(".png")
        report.write_langevin_figure(fig_path, rows, inverse=inverse)
        click.echo(str(fig_path))


__all__ = ["main", "EXIT_PARSE", "EXIT_ARBITRAGE", "EXIT_INFEASIBLE",
           "EXIT_NUMERICAL"]
