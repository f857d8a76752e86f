"""Export writing: delimited tables, a parameter block, and figures.

A calibration run exports into a directory:

  density.csv   sampled density rows (x, f), 9 significant digits
  params.json   per-bucket parameters, entropy, repriced quotes, digitals
                and certificate summary for entropy-maximizing runs, input
                meta echoed back; 17 significant digits (round-trip safe)
  trace.csv     per-iterate certificate trace (entropy-maximizing runs)
  density.png   density plot with strike markers
  convergence.png   certified-gap / gradient-norm decay (entropy runs)

Exports are deterministic: identical inputs produce byte-identical tables.
Figures are rendered through the Agg backend; they are a convenience on top
of the tables, and ``--no-figures`` turns them off.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

__all__ = [
    "density_table",
    "write_density_csv",
    "write_params_json",
    "write_trace_csv",
    "write_figures",
    "langevin_rows",
    "inverse_rows",
    "format_table",
    "write_langevin_figure",
]

def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _g9(x: float) -> str:
    return format(float(x), ".9g")


def _rawize(obj):
    if isinstance(obj, float):
        return f"@@RAW:{_g17(obj)}@@"
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _rawize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rawize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_rawize(float(v)) for v in obj]
    return obj


def _dump_json(doc) -> str:
    """JSON text with floats at 17 significant digits.

    Floats are swapped for marker strings before encoding and unquoted
    afterward; the marker pattern only admits float syntax, so ordinary
    string content never matches.
    """
    encoded = json.dumps(_rawize(doc), indent=2)
    text = re.sub(r'"@@RAW:([-+0-9.eE]+)@@"', lambda m: m.group(1), encoded)
    return text + "\n"


def density_table(density, samples: int) -> np.ndarray:
    """Sample (x, f(x)) on a uniform grid over [0, 1.5 K_n]."""
    top = 1.5 * float(density.grid.strikes[-1])
    x = np.linspace(0.0, top, samples)
    return np.column_stack([x, density.pdf(x)])


def format_table(header: tuple[str, ...], rows, digits: int = 9) -> str:
    fmt = _g9 if digits == 9 else _g17
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_density_csv(out_dir: Path, density, samples: int) -> Path:
    path = out_dir / "density.csv"
    path.write_text(format_table(("x", "f"), density_table(density, samples)))
    return path


def _reprice_block(quotes, density) -> dict:
    calls = density.implied_calls()
    rel = np.abs(calls - quotes.calls) / np.abs(quotes.calls)
    fwd = density.forward()
    block = {
        "forward_in": quotes.forward,
        "forward_repriced": fwd,
        "strikes": quotes.grid.strikes,
        "calls_in": quotes.calls,
        "calls_repriced": calls,
        "max_call_rel_error": float(rel.max()),
    }
    if quotes.digitals is not None:
        digs = density.implied_digitals()
        block["digitals_in"] = quotes.digitals
        block["digitals_repriced"] = digs
        block["max_digital_abs_error"] = float(np.abs(digs - quotes.digitals).max())
    else:
        block["digitals_implied"] = density.implied_digitals()
    return block


def write_params_json(out_dir: Path, quotes, density, meta: dict,
                      inverse_method: str, extra: dict | None = None) -> Path:
    """Parameter block: one record per bucket plus run-level summary."""
    p, beta, kbar = density.params.p, density.params.beta, density.params.kbar
    edges = density.grid.edges
    buckets = [{
        "bucket": i,
        "left_edge": float(edges[i]),
        "mass": float(p[i]),
        "tilt": float(beta[i]),
        "mean": float(kbar[i]),
        "log_partition": float(density.logc[i]),
    } for i in range(density.grid.n + 1)]
    doc = {
        "inverse_method": inverse_method,
        "entropy": density.entropy(),
        "buckets": buckets,
        "repriced": _reprice_block(quotes, density),
        "meta": meta,
    }
    if extra:
        doc.update(extra)
    path = out_dir / "params.json"
    path.write_text(_dump_json(doc))
    return path


_TRACE_HEADER = ("iteration", "entropy", "grad_norm", "m1", "m2", "m_used",
                 "entropy_gap_bound", "digital_dist_bound", "l1_bound",
                 "step_type", "step_size")


def write_trace_csv(out_dir: Path, trace) -> Path:
    lines = [",".join(_TRACE_HEADER)]
    for k, rec in enumerate(trace):
        cert = rec.certificate
        vals = [str(k)] + [_g17(v) for v in (
            rec.entropy, rec.grad_norm, cert.m1, cert.m2, cert.m_used,
            cert.entropy_gap_bound, cert.digital_dist_bound, cert.l1_bound)]
        vals += [rec.step_type, _g17(rec.step_size)]
        lines.append(",".join(vals))
    path = out_dir / "trace.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


def _pyplot():
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt
    return plt


def write_figures(out_dir: Path, quotes, density, samples: int,
                  trace=None) -> list[Path]:
    """Render the density plot and, for iterative runs, the convergence plot."""
    plt = _pyplot()
    written = []

    table = density_table(density, samples)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(table[:, 0], table[:, 1], lw=1.5)
    for k in density.grid.strikes:
        ax.axvline(k, color="0.75", lw=0.8, zorder=0)
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.set_title("Calibrated maximum-entropy density")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out_dir / "density.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    if trace:
        its = np.arange(len(trace))
        gaps = [rec.certificate.entropy_gap_bound for rec in trace]
        gnorms = [rec.grad_norm for rec in trace]
        fig, ax = plt.subplots(figsize=(8, 4.5))
        ax.semilogy(its, np.maximum(gaps, 1e-300), marker="o", ms=3,
                    label="certified entropy gap")
        ax.semilogy(its, np.maximum(gnorms, 1e-300), marker="s", ms=3,
                    label="gradient norm")
        ax.set_xlabel("iteration")
        ax.set_title("Entropy maximization convergence")
        ax.grid(alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = out_dir / "convergence.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def langevin_rows(lo: float, hi: float, points: int) -> np.ndarray:
    """Table rows (x, L(x), L'(x)) on a uniform grid."""
    from .langevin import langevin, langevin_prime

    x = np.linspace(lo, hi, points)
    return np.column_stack([x, langevin(x), langevin_prime(x)])


_INVERSE_HEADER = ("y", "taylor", "pade", "rounded_pade", "bergstrom",
                   "exact", "taylor_rel_err", "pade_rel_err",
                   "rounded_pade_rel_err", "bergstrom_rel_err")


def inverse_rows(lo: float, hi: float, points: int) -> tuple[tuple[str, ...], np.ndarray]:
    """Inverse-approximation comparison rows with per-method relative errors."""
    from .langevin import (inv_bergstrom, inv_exact, inv_pade,
                           inv_rounded_pade, inv_taylor)

    y = np.linspace(lo, hi, points)
    exact = np.asarray(inv_exact(y), dtype=float)
    approx = [np.asarray(f(y), dtype=float)
              for f in (inv_taylor, inv_pade, inv_rounded_pade, inv_bergstrom)]
    denom = np.where(np.abs(exact) > 0.0, np.abs(exact), 1.0)
    errs = [np.abs(a - exact) / denom for a in approx]
    rows = np.column_stack([y, *approx, exact, *errs])
    return _INVERSE_HEADER, rows


def write_langevin_figure(path: Path, rows: np.ndarray,
                          inverse: bool = False) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if inverse:
        labels = ("taylor", "pade", "rounded_pade", "bergstrom")
        for col, label in enumerate(labels, start=6):
            ax.semilogy(rows[:, 0], np.maximum(rows[:, col], 1e-300),
                        lw=1.2, label=label)
        ax.set_xlabel("y")
        ax.set_ylabel("relative error vs exact")
        ax.set_title("Inverse Langevin approximations")
    else:
        ax.plot(rows[:, 0], rows[:, 1], lw=1.5, label="L(x)")
        ax.plot(rows[:, 0], rows[:, 2], lw=1.5, label="L'(x)")
        ax.axhline(1.0, color="0.8", lw=0.8, ls="--")
        ax.axhline(-1.0, color="0.8", lw=0.8, ls="--")
        ax.set_xlabel("x")
        ax.set_title("Langevin function and derivative")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
