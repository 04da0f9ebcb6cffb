#!/usr/bin/env python3
"""Render figure analogues from simulator CSV outputs.

Usage:
    python plots/render.py --spec <figure-spec.json> --out <file.svg|pdf>

A figure spec is a JSON object:

    {
      "kind": "pf_vs_snr" | "bw_vs_snr" | "bw_vs_C" | "layout_scatter",
      "title": "...",                      # optional
      "x_range": [lo, hi],                 # optional
      "y_range": [lo, hi],                 # optional
      "preference_regions": true,          # optional, pf_vs_snr only
      "series": [
        {"label": "...", "csv": "relative/path.csv",
         "where": {"protocol": "ic_ic", "C": 16}},
        ...
      ]
    }

CSV paths are resolved relative to the spec file. Values are plotted exactly
as read (no resampling or smoothing); probability and bandwidth axes are
log-scaled and refuse non-positive values. Output is deterministic: the same
spec and CSVs produce byte-identical vector files.
"""

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "urllcsim-plots"
import matplotlib.pyplot as plt  # noqa: E402


class SpecError(ValueError):
    pass


AXES = {
    # kind: (x column, y column, x log, y log, x label, y label)
    "pf_vs_snr": ("snr_db", "pf", False, True,
                  "Average SNR of a link (dB)", "Probability of failure"),
    "bw_vs_snr": ("snr_db", "required_bw_hz", False, False,
                  "Required SNR (dB)", "Required bandwidth (MHz)"),
    "bw_vs_C": ("C", "required_bw_hz", False, False,
                "Number of cells", "Required bandwidth (MHz)"),
    "layout_scatter": ("x_m", "y_m", False, False, "meters", "meters"),
}


@dataclass
class Series:
    label: str
    x: list
    y: list


@dataclass
class FigureSpec:
    kind: str
    series: list
    title: str = ""
    x_range: tuple | None = None
    y_range: tuple | None = None
    preference_regions: bool = False
    base_dir: Path = field(default_factory=Path)

    @classmethod
    def load(cls, path) -> "FigureSpec":
        path = Path(path)
        data = json.loads(path.read_text())
        kind = data.get("kind")
        if kind not in AXES:
            raise SpecError(f"unknown figure kind {kind!r}; expected one of {sorted(AXES)}")
        series = data.get("series", [])
        if not series:
            raise SpecError("figure spec needs a non-empty series list")
        return cls(
            kind=kind,
            series=series,
            title=data.get("title", ""),
            x_range=tuple(data["x_range"]) if "x_range" in data else None,
            y_range=tuple(data["y_range"]) if "y_range" in data else None,
            preference_regions=bool(data.get("preference_regions", False)),
            base_dir=path.parent,
        )


def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        raise SpecError(f"input CSV not found: {path}")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SpecError(f"input CSV is empty: {path}")
    return rows


def _matches(row: dict, where: dict, path: Path) -> bool:
    for column, wanted in where.items():
        if column not in row:
            raise SpecError(
                f"{path}: no column {column!r}; columns are {sorted(row)}"
            )
        have = row[column]
        try:
            if not math.isclose(float(have), float(wanted), rel_tol=1e-9):
                return False
        except (TypeError, ValueError):
            if str(have) != str(wanted):
                return False
    return True


def load_series(spec: FigureSpec) -> list[Series]:
    """Resolve every series to its (x, y) value lists, exactly as stored."""
    x_col, y_col, x_log, y_log, _, _ = AXES[spec.kind]
    out = []
    for entry in spec.series:
        path = (spec.base_dir / entry["csv"]).resolve()
        rows = [r for r in _read_csv(path) if _matches(r, entry.get("where", {}), path)]
        if not rows:
            raise SpecError(
                f"series {entry.get('label', '?')!r} matched no rows in {path}"
            )
        for col in (x_col, y_col):
            if col not in rows[0]:
                raise SpecError(
                    f"{path}: column {col!r} required by kind {spec.kind!r} is "
                    f"missing; columns are {sorted(rows[0])}"
                )
        xs = [float(r[x_col]) for r in rows]
        ys = [float(r[y_col]) for r in rows]
        if y_log and any(v <= 0 for v in ys):
            raise SpecError(
                f"series {entry.get('label', '?')!r}: log-scale axis cannot "
                "show non-positive values; filter them out of the spec"
            )
        order = sorted(range(len(xs)), key=lambda i: (xs[i], ys[i]))
        out.append(Series(
            label=entry.get("label", f"{path.name}"),
            x=[xs[i] for i in order],
            y=[ys[i] for i in order],
        ))
    return out


def curve_intersections(a: Series, b: Series) -> list[tuple]:
    """Piecewise-linear intersection points of two curves in (x, log y)."""
    points = []
    for i in range(len(a.x) - 1):
        for j in range(len(b.x) - 1):
            x0 = max(a.x[i], b.x[j])
            x1 = min(a.x[i + 1], b.x[j + 1])
            if x1 <= x0:
                continue

            def at(s, k, x):
                t = (x - s.x[k]) / (s.x[k + 1] - s.x[k])
                return (1 - t) * math.log(s.y[k]) + t * math.log(s.y[k + 1])

            d0 = at(a, i, x0) - at(b, j, x0)
            d1 = at(a, i, x1) - at(b, j, x1)
            if d0 == d1:
                continue
            if d0 * d1 <= 0:
                t = d0 / (d0 - d1)
                x = x0 + t * (x1 - x0)
                points.append((x, math.exp(at(a, i, x))))
    return sorted(set(points))


def _layout_series(spec: FigureSpec) -> list[Series]:
    out = []
    for entry in spec.series:
        path = (spec.base_dir / entry["csv"]).resolve()
        rows = [r for r in _read_csv(path) if _matches(r, entry.get("where", {}), path)]
        if not rows:
            raise SpecError(f"series {entry.get('label', '?')!r} matched no rows")
        out.append(Series(
            label=entry.get("label", path.name),
            x=[float(r["x_m"]) for r in rows],
            y=[float(r["y_m"]) for r in rows],
        ))
    return out


def render(spec: FigureSpec, out_path) -> Path:
    """Draw the figure and write a deterministic vector file."""
    out_path = Path(out_path)
    if out_path.suffix not in (".svg", ".pdf"):
        raise SpecError("output must be .svg or .pdf")
    x_col, y_col, x_log, y_log, x_label, y_label = AXES[spec.kind]

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    if spec.kind == "layout_scatter":
        for s, marker in zip(_layout_series(spec), ("^", ".", "s", "x")):
            ax.scatter(s.x, s.y, label=s.label, marker=marker, s=28)
        ax.set_aspect("equal")
        series = []
    else:
        series = load_series(spec)
        scale = 1e-6 if y_col == "required_bw_hz" else 1.0
        for s in series:
            ax.plot(s.x, [v * scale for v in s.y], marker="o", markersize=3,
                    linewidth=1.2, label=s.label)
        if y_log:
            ax.set_yscale("log")
    if spec.preference_regions and spec.kind == "pf_vs_snr" and len(series) >= 2:
        boundary = []
        for a, b in zip(series, series[1:]):
            boundary.extend(curve_intersections(a, b))
        if boundary:
            bx, by = zip(*sorted(boundary, key=lambda p: -p[1]))
            ax.plot(bx, by, linestyle="--", color="black", linewidth=1.0,
                    label="preference boundary")

    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    if spec.title:
        ax.set_title(spec.title)
    if spec.x_range:
        ax.set_xlim(*spec.x_range)
    if spec.y_range:
        ax.set_ylim(*spec.y_range)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()

    metadata = {"Date": None} if out_path.suffix == ".svg" else {"CreationDate": None}
    fig.savefig(out_path, metadata=metadata)
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--spec", required=True, help="figure spec JSON")
    parser.add_argument("--out", required=True, help="output .svg or .pdf path")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec.load(args.spec)
        path = render(spec, args.out)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
