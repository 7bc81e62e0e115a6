"""Render benchmark figures from the solver's CSV outputs.

Reads results.csv / profile.csv / trace CSVs produced by the mcm command
line and renders three figure kinds:

  triptych  one panel each for wall time, objective spread, and KKT
            residual, per solver across instances (results.csv)
  decay     substationarity and symmetry residuals per iteration on a
            shared log axis (one or more trace CSVs)
  profile   performance profile curves, one per solver (profile.csv)

The script never recomputes solver quantities; it plots the columns as
written.  Output format follows the file extension (SVG for docs).

Usage: plots.py --kind {triptych,decay,profile} --in PATHS --out PATH
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

KINDS = ("triptych", "decay", "profile")


class SchemaMismatch(Exception):
    """An input CSV does not carry the columns the figure needs."""


@dataclass
class FigureSpec:
    kind: str
    inputs: list[Path]
    out_path: Path
    log_time: bool = False          # wall-time panel; residual panels are always log

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def _read_rows(path: Path, required: tuple[str, ...]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaMismatch(f"{path.name}: missing column '{col}'")
        return list(reader)


def _styles(n: int):
    cmap = plt.get_cmap("tab10")
    return [cmap(i % 10) for i in range(n)]


def _triptych(spec: FigureSpec):
    rows = _read_rows(spec.inputs[0],
                      ("instance", "solver", "wall_s", "fval_variance", "kkt_violation"))
    solvers = sorted({r["solver"] for r in rows})
    instances = sorted({r["instance"] for r in rows})
    idx = {m: i for i, m in enumerate(instances)}
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6))
    panels = (("wall_s", "wall time (s)", spec.log_time),
              ("fval_variance", "objective spread", True),
              ("kkt_violation", "KKT residual", True))
    colors = _styles(len(solvers))
    for ax, (col, label, log_y) in zip(axes, panels):
        for color, s in zip(colors, solvers):
            pts = [(idx[r["instance"]], float(r[col])) for r in rows if r["solver"] == s]
            pts.sort()
            ax.plot([x for x, _ in pts], [y for _, y in pts],
                    marker="o", ms=3.5, lw=1.0, color=color, label=s)
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel("instance")
        ax.set_ylabel(label)
        ax.set_xticks(range(len(instances)))
        ax.set_xticklabels(instances, rotation=60, fontsize=6, ha="right")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    return fig


def _decay(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    colors = _styles(len(spec.inputs))
    for color, path in zip(colors, spec.inputs):
        rows = _read_rows(path, ("k", "substat", "sym"))
        ks = [int(r["k"]) for r in rows]
        stem = path.name.removesuffix(".trace.csv").removesuffix(".csv")
        ax.plot(ks, [float(r["substat"]) for r in rows],
                lw=1.2, color=color, label=f"{stem} substat")
        ax.plot(ks, [float(r["sym"]) for r in rows],
                lw=1.2, ls="--", color=color, label=f"{stem} sym")
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual norm")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _profile(spec: FigureSpec):
    path = spec.inputs[0]
    rows = _read_rows(path, ("omega",))
    if not rows:
        raise SchemaMismatch(f"{path.name}: column 'omega' has no rows")
    with open(path, newline="", encoding="utf-8") as fh:
        solvers = [c for c in (csv.DictReader(fh).fieldnames or []) if c != "omega"]
    if not solvers:
        raise SchemaMismatch(f"{path.name}: missing column 'pi per solver'")
    omega = [float(r["omega"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    for color, s in zip(_styles(len(solvers)), solvers):
        ax.step(omega, [float(r[s]) for r in rows], where="post",
                lw=1.4, color=color, label=s)
    ax.set_xscale("log")
    ax.set_xlabel("performance ratio bound")
    ax.set_ylabel("fraction of problems solved")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return fig


_BUILDERS = {"triptych": _triptych, "decay": _decay, "profile": _profile}


def build_figure(spec: FigureSpec):
    """Figure object for `spec`; separated from render for inspection."""
    return _BUILDERS[spec.kind](spec)


def render(spec: FigureSpec) -> Path:
    for path in spec.inputs:
        if not path.exists():
            raise FileNotFoundError(path)
    fig = build_figure(spec)
    try:
        fig.savefig(spec.out_path)
    finally:
        plt.close(fig)
    return spec.out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots.py", description="Render figures from solver CSV outputs")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", required=True, nargs="+",
                        help="input CSV paths (results, traces, or profile)")
    parser.add_argument("--out", required=True, help="output image path (.svg or .png)")
    parser.add_argument("--log-time", action="store_true",
                        help="log scale for the triptych wall-time panel")
    args = parser.parse_args(argv)
    spec = FigureSpec(kind=args.kind, inputs=[Path(p) for p in args.inputs],
                      out_path=Path(args.out), log_time=args.log_time)
    try:
        out = render(spec)
    except (SchemaMismatch, FileNotFoundError) as e:
        print(f"plots: {e}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
