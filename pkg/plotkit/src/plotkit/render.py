"""Render publication figures from heterosolve experiment CSVs.

Consumes only the documented CSV schemas:

    exp1.csv: mu,m,rho_apc_mean,rho_apc_se,rho_hbm_mean,rho_hbm_se,rejections
    exp2.csv: m,n,rho_apc_mean,rho_apc_se,rho_hbm_mean,rho_hbm_se,rejections
    exp3.csv: n,c_mean,c_se

fig1 emits one panel per mu value (rate vs machine count), fig2 one panel
per machine count (rate vs dimension), fig3 a single panel (mean maximum
pairwise |cosine| vs dimension).  Error bars come from the *_se columns.
The output extension picks the format: .png (default raster) or a vector
format such as .svg / .pdf.

Invoked as a script with positional arguments: figure id, input CSV path,
output image path.
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

FIGURE_IDS = ("fig1", "fig2", "fig3")

_REQUIRED = {
    "fig1": ("mu", "m", "rho_apc_mean", "rho_apc_se", "rho_hbm_mean", "rho_hbm_se"),
    "fig2": ("m", "n", "rho_apc_mean", "rho_apc_se", "rho_hbm_mean", "rho_hbm_se"),
    "fig3": ("n", "c_mean", "c_se"),
}


class SchemaMismatch(Exception):
    """CSV header/rows do not match the requested figure's schema."""


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    input_csv: str
    output_path: str
    x_label: str | None = None
    y_label: str | None = None


def load_rows(path: str, figure_id: str) -> list[dict]:
    """Parse the CSV and check it carries the columns the figure needs."""
    if figure_id not in _REQUIRED:
        raise SchemaMismatch(f"unknown figure id {figure_id!r}; expected one of {FIGURE_IDS}")
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames
            raw = list(reader)
    except OSError as exc:
        raise SchemaMismatch(f"{path}: {exc}") from exc
    if header is None:
        raise SchemaMismatch(f"{path}: empty file, no header row")
    missing = [c for c in _REQUIRED[figure_id] if c not in header]
    if missing:
        raise SchemaMismatch(f"{path}: missing column(s) {', '.join(missing)}")
    if not raw:
        raise SchemaMismatch(f"{path}: no data rows")
    rows = []
    for i, rec in enumerate(raw):
        parsed = {}
        for col in _REQUIRED[figure_id]:
            try:
                parsed[col] = float(rec[col])
            except (TypeError, ValueError) as exc:
                raise SchemaMismatch(
                    f"{path}: row {i + 1}, column {col!r}: not a number ({rec[col]!r})"
                ) from exc
        rows.append(parsed)
    return rows


def _fmt_key(value: float) -> str:
    return f"{value:g}".replace("-", "m").replace(".", "p")


def _series(rows: list[dict], x_col: str):
    rows = sorted(rows, key=lambda r: r[x_col])
    xs = [r[x_col] for r in rows]
    return rows, xs


def build_panels(figure_id: str, rows: list[dict]):
    """One (panel_key, matplotlib Figure) pair per panel."""
    panels = []
    if figure_id == "fig1":
        for mu in sorted({r["mu"] for r in rows}):
            grp, xs = _series([r for r in rows if r["mu"] == mu], "m")
            fig, ax = plt.subplots(figsize=(6.0, 4.0))
            ax.errorbar(xs, [r["rho_apc_mean"] for r in grp],
                        yerr=[r["rho_apc_se"] for r in grp],
                        marker="o", capsize=3, label="APC")
            ax.errorbar(xs, [r["rho_hbm_mean"] for r in grp],
                        yerr=[r["rho_hbm_se"] for r in grp],
                        marker="s", capsize=3, label="D-HBM")
            ax.set_xlabel("number of machines m")
            ax.set_ylabel("optimal convergence rate")
            ax.set_title(f"rate vs machines (mu = {mu:g})")
            ax.legend()
            ax.grid(True, alpha=0.3)
            panels.append((f"mu{_fmt_key(mu)}", fig))
    elif figure_id == "fig2":
        for m in sorted({r["m"] for r in rows}):
            grp, xs = _series([r for r in rows if r["m"] == m], "n")
            fig, ax = plt.subplots(figsize=(6.0, 4.0))
            ax.errorbar(xs, [r["rho_apc_mean"] for r in grp],
                        yerr=[r["rho_apc_se"] for r in grp],
                        marker="o", capsize=3, label="APC")
            ax.errorbar(xs, [r["rho_hbm_mean"] for r in grp],
                        yerr=[r["rho_hbm_se"] for r in grp],
                        marker="s", capsize=3, label="D-HBM")
            ax.set_xlabel("number of equations n")
            ax.set_ylabel("optimal convergence rate")
            ax.set_title(f"rate vs dimension (m = {m:g})")
            ax.legend()
            ax.grid(True, alpha=0.3)
            panels.append((f"m{_fmt_key(m)}", fig))
    else:  # fig3
        grp, xs = _series(rows, "n")
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.errorbar(xs, [r["c_mean"] for r in grp], yerr=[r["c_se"] for r in grp],
                    marker=".", capsize=2, label="max pairwise |cosine|")
        ax.set_xlabel("dimension n")
        ax.set_ylabel("mean C")
        ax.set_title("asymptotic cross-machine alignment")
        ax.legend()
        ax.grid(True, alpha=0.3)
        panels.append(("", fig))
    return panels


def render(spec: FigureSpec) -> list[str]:
    """Write one image per panel; returns the written paths.

    A multi-panel figure gets a per-panel suffix before the extension
    (fig1.png -> fig1_mu0.png, fig1_mu1.png); single panels use the given
    path as is.
    """
    rows = load_rows(spec.input_csv, spec.figure_id)
    panels = build_panels(spec.figure_id, rows)
    out = Path(spec.output_path)
    written = []
    try:
        for key, fig in panels:
            if spec.x_label or spec.y_label:
                for ax in fig.axes:
                    if spec.x_label:
                        ax.set_xlabel(spec.x_label)
                    if spec.y_label:
                        ax.set_ylabel(spec.y_label)
            if len(panels) == 1 or not key:
                path = out
            else:
                path = out.with_name(f"{out.stem}_{key}{out.suffix}")
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, dpi=150)
            written.append(str(path))
    finally:
        for _, fig in panels:
            plt.close(fig)
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="render experiment figures from CSV files"
    )
    parser.add_argument("figure_id", choices=FIGURE_IDS)
    parser.add_argument("input_csv")
    parser.add_argument("output_path")
    parser.add_argument("--x-label")
    parser.add_argument("--y-label")
    args = parser.parse_args(argv)
    spec = FigureSpec(
        figure_id=args.figure_id,
        input_csv=args.input_csv,
        output_path=args.output_path,
        x_label=args.x_label,
        y_label=args.y_label,
    )
    try:
        written = render(spec)
    except SchemaMismatch as exc:
        print(f"error: {exc}")
        return 2
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
