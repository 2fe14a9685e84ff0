"""Render benchmark CSV output as log-log mean-volume charts.

Consumes exactly the experiment CSV format of the smelab harness
(header ``method,sigma,N,trial,volume,radius_sq,empty,contains_true,
ols_error_sq``) and draws one mean-volume curve per (method, sigma)
series.  Empty-set records are excluded from the volume means; grid
points where a series has empty sets get a secondary marker annotated
with the empty fraction, since zero-volume points would be invisible on
log axes.

Invocation: ``sme-lab-render --csv <path> --out <path> --system lti|pendulum``
(also ``python -m smelab_plots.render ...``).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

REQUIRED_COLUMNS = ("method", "sigma", "N", "trial", "volume", "radius_sq",
                    "empty", "contains_true", "ols_error_sq")

_SERIES_STYLE = {"stochastic-sme": "o-", "noise-filtered": "s--", "chi2": "d:"}


class ColumnMismatchError(ValueError):
    """CSV header differs from the experiment format."""

    def __init__(self, missing, extra):
        self.missing = tuple(missing)
        self.extra = tuple(extra)
        parts = []
        if missing:
            parts.append(f"missing columns: {', '.join(missing)}")
        if extra:
            parts.append(f"unexpected columns: {', '.join(extra)}")
        super().__init__("; ".join(parts))


@dataclass(frozen=True)
class FigureSpec:
    """What to render: input CSV, output image, system label, series filter."""

    csv_path: str
    out_path: str
    system: str = "lti"
    series: tuple | None = None  # optional ((method, sigma), ...) restriction


def load_rows(csv_path):
    """Read the experiment CSV; the header must match the format exactly."""
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = tuple(reader.fieldnames or ())
        if header != REQUIRED_COLUMNS:
            missing = [c for c in REQUIRED_COLUMNS if c not in header]
            extra = [c for c in header if c not in REQUIRED_COLUMNS]
            raise ColumnMismatchError(missing, extra)
        rows = []
        for raw in reader:
            rows.append({
                "method": raw["method"],
                "sigma": float(raw["sigma"]),
                "N": int(raw["N"]),
                "volume": float(raw["volume"]),
                "empty": raw["empty"] == "1",
            })
    return rows


def series_stats(rows):
    """Per (method, sigma) series: sorted Ns, volume means, empty fractions.

    The mean at a grid point is over non-empty records only and is None
    when every record there is empty.
    """
    stats = {}
    for key in sorted({(r["method"], r["sigma"]) for r in rows}):
        method, sigma = key
        sel = [r for r in rows if r["method"] == method and r["sigma"] == sigma]
        ns = sorted({r["N"] for r in sel})
        means, empty_fracs = [], []
        for n in ns:
            bucket = [r for r in sel if r["N"] == n]
            vols = [r["volume"] for r in bucket if not r["empty"]]
            means.append(sum(vols) / len(vols) if vols else None)
            empty_fracs.append(sum(r["empty"] for r in bucket) / len(bucket))
        stats[key] = {"N": ns, "mean_volume": means, "empty_fraction": empty_fracs}
    return stats


def build_figure(spec: FigureSpec):
    """Assemble the matplotlib figure; returns (figure, stats)."""
    rows = load_rows(spec.csv_path)
    stats = series_stats(rows)
    if spec.series is not None:
        wanted = {(m, float(s)) for m, s in spec.series}
        stats = {k: v for k, v in stats.items() if k in wanted}

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.set_xscale("log")
    ax.set_yscale("log")
    positive = [v for s in stats.values() for v in s["mean_volume"]
                if v is not None and v > 0.0]
    floor = min(positive) / 5.0 if positive else None

    for (method, sigma), data in stats.items():
        label = f"{method}, sigma={sigma:g}"
        style = _SERIES_STYLE.get(method, "^-")
        pts = [(n, v) for n, v in zip(data["N"], data["mean_volume"])
               if v is not None and v > 0.0]
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], style,
                    label=label, markersize=4)
        marked = [(n, f) for n, f in zip(data["N"], data["empty_fraction"]) if f > 0.0]
        if marked and floor is not None:
            xs = [m[0] for m in marked]
            ax.plot(xs, [floor] * len(xs), "x", color="gray", markersize=6,
                    label=f"{label} (empty sets)")
            for n, f in marked:
                ax.annotate(f"{100.0 * f:.0f}%", (n, floor), textcoords="offset points",
                            xytext=(0, -11), ha="center", fontsize=7, color="gray")

    ax.set_xlabel("N (samples)")
    ax.set_ylabel("mean set volume")
    ax.set_title(f"{spec.system}: uncertainty-set volume vs sample count")
    ax.grid(True, which="both", alpha=0.3)
    if stats:
        ax.legend(fontsize=7)
    fig.tight_layout()
    return fig, stats


def render(spec: FigureSpec) -> str:
    """Write the figure to spec.out_path; returns the path written."""
    fig, _ = build_figure(spec)
    try:
        fig.savefig(spec.out_path, dpi=150)
    finally:
        plt.close(fig)
    return spec.out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sme-lab-render")
    parser.add_argument("--csv", required=True, help="experiment CSV input")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--system", choices=("lti", "pendulum"), default="lti")
    args = parser.parse_args(argv)
    try:
        render(FigureSpec(csv_path=args.csv, out_path=args.out, system=args.system))
    except ColumnMismatchError as exc:
        print(f"sme-lab-render: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"sme-lab-render: {exc}", file=sys.stderr)
        return 1
    return 0


def run():  # console-script shim
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
