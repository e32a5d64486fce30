#!/usr/bin/env python3
"""Render figures from fusion-spectra CSV outputs.

Standalone: consumes only the documented CSV schemas (spectra.csv columns
trial,index,empirical,predicted,abs_err,rel_err; rates.csv columns
matrix,metric,n,value,slope), so the simulation package is not imported.

Kinds:
  spectrum-overlay  scatter of empirical vs predicted with the y=x guide
                    line and a +-10% band
  error-index       per-index relative error of the compared bulk
  rate-fit          value vs n on log-log axes with the fitted slope

The sha256 of every input file is embedded in the figure metadata so a
figure can be matched against the run manifest that produced its inputs.

Usage:
  render_spectra.py --in spectra.csv --kind spectrum-overlay --out fig.png
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

BAND = 0.10  # relative half-width of the overlay band

KINDS = ("spectrum-overlay", "error-index", "rate-fit")

SPECTRA_COLUMNS = ("trial", "index", "empirical", "predicted", "abs_err", "rel_err")
RATES_COLUMNS = ("matrix", "metric", "n", "value", "slope")


class SchemaError(ValueError):
    """Input CSV does not match the documented schema."""


class NoDataError(ValueError):
    """Input CSV has no usable rows for the requested figure."""


@dataclass
class PlotSpec:
    inputs: list
    kind: str
    out: Path
    title: str | None = None
    xlabel: str | None = None
    ylabel: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind: {self.kind}")
        if not self.inputs:
            raise NoDataError("no input CSV given")
        self.inputs = [Path(p) for p in self.inputs]
        self.out = Path(self.out)


def _read_rows(path: Path, required) -> list:
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        missing = [c for c in required if c not in cols]
        if missing:
            raise SchemaError(f"{path.name}: missing column(s) {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise NoDataError(f"{path.name}: no data rows")
    return rows


def _compared(rows):
    out = []
    for r in rows:
        if r["predicted"] != "":
            out.append((int(r["trial"]), int(r["index"]),
                        float(r["empirical"]), float(r["predicted"]),
                        float(r["rel_err"]) if r["rel_err"] != "" else np.nan))
    if not out:
        raise NoDataError("no compared rows (predicted column empty everywhere)")
    return out


def _metadata(spec: PlotSpec) -> dict:
    meta = {"Software": "fusion-spectra render_spectra"}
    for p in spec.inputs:
        meta[f"input-sha256:{p.name}"] = hashlib.sha256(p.read_bytes()).hexdigest()
    return meta


def _finish(fig, ax, spec: PlotSpec, default_title: str):
    ax.set_title(spec.title or default_title)
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out, dpi=150, metadata=_metadata(spec))
    plt.close(fig)


def render_spectrum_overlay(spec: PlotSpec):
    rows = _compared(_read_rows(spec.inputs[0], SPECTRA_COLUMNS))
    pred = np.array([r[3] for r in rows])
    emp = np.array([r[2] for r in rows])
    fig, ax = plt.subplots(figsize=(6, 6))
    lo, hi = min(pred.min(), emp.min()), max(pred.max(), emp.max())
    guide = np.linspace(lo, hi, 64)
    ax.fill_between(guide, (1 - BAND) * guide, (1 + BAND) * guide,
                    color="0.85", label=f"+-{int(BAND*100)}% band")
    ax.plot(guide, guide, "k-", lw=1, label="y = x")
    ax.scatter(pred, emp, s=6, alpha=0.5, label="bulk eigenvalues")
    ax.set_xlabel(spec.xlabel or "predicted quantile")
    ax.set_ylabel(spec.ylabel or "empirical eigenvalue")
    ax.legend(loc="upper left", fontsize=8)
    inside = np.abs(emp - pred) <= BAND * np.abs(pred)
    ax.text(0.97, 0.03, f"{inside.mean()*100:.1f}% of points in band",
            transform=ax.transAxes, ha="right", va="bottom", fontsize=8)
    _finish(fig, ax, spec, "empirical vs predicted spectrum")


def render_error_index(spec: PlotSpec):
    rows = _compared(_read_rows(spec.inputs[0], SPECTRA_COLUMNS))
    trials = sorted({r[0] for r in rows})
    fig, ax = plt.subplots(figsize=(7, 4))
    for t in trials:
        pts = [(r[1], r[4]) for r in rows if r[0] == t and np.isfinite(r[4])]
        if pts:
            idx, rel = zip(*sorted(pts))
            ax.plot(idx, rel, lw=0.8, alpha=0.8, label=f"trial {t}")
    ax.set_yscale("log")
    ax.set_xlabel(spec.xlabel or "eigenvalue index")
    ax.set_ylabel(spec.ylabel or "relative error")
    if len(trials) <= 8:
        ax.legend(fontsize=7)
    _finish(fig, ax, spec, "per-index relative error")


def render_rate_fit(spec: PlotSpec):
    rows = _read_rows(spec.inputs[0], RATES_COLUMNS)
    by_metric: dict = {}
    for r in rows:
        key = (r["matrix"], r["metric"])
        by_metric.setdefault(key, []).append(
            (int(r["n"]), float(r["value"]), r["slope"])
        )
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for (matrix, metric), pts in sorted(by_metric.items()):
        pts.sort()
        ns = np.array([p[0] for p in pts], dtype=float)
        vals = np.array([p[1] for p in pts])
        slope = pts[0][2]
        label = f"{matrix} {metric}"
        if slope != "":
            label += f" (slope {float(slope):.3f})"
        ax.loglog(ns, vals, "o-", label=label)
        if slope != "":
            anchor = vals[0] * (ns / ns[0]) ** float(slope)
            ax.loglog(ns, anchor, "k--", lw=0.7, alpha=0.6)
    ax.set_xlabel(spec.xlabel or "n")
    ax.set_ylabel(spec.ylabel or "error")
    ax.legend(fontsize=8)
    _finish(fig, ax, spec, "error vs n with fitted slope")


RENDERERS = {
    "spectrum-overlay": render_spectrum_overlay,
    "error-index": render_error_index,
    "rate-fit": render_rate_fit,
}


def render(spec: PlotSpec) -> Path:
    RENDERERS[spec.kind](spec)
    return spec.out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        help="input CSV (repeatable)")
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default=None)
    parser.add_argument("--xlabel", default=None)
    parser.add_argument("--ylabel", default=None)
    args = parser.parse_args(argv)
    try:
        spec = PlotSpec(inputs=args.inputs, kind=args.kind, out=args.out,
                        title=args.title, xlabel=args.xlabel, ylabel=args.ylabel)
        render(spec)
    except (SchemaError, NoDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
