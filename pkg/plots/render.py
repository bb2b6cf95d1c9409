"""Render semilog convergence figures from experiment history CSVs.

Usage:
    python plots/render.py --spec figure.json

The figure spec is a JSON object:

    {
      "title":  "optional figure title",
      "output": "figure.png",
      "series": [{"csv": "path/to/history.csv", "label": "curve label"}, ...]
    }

Each series becomes one line: x = iteration, y = error_inf on a log scale.
A header-only CSV renders as an empty series with a warning (exit code 0);
a malformed CSV aborts with a parse error naming the offending line.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from nldd.errors import InvalidInput  # noqa: E402
from nldd.harness import read_history_csv  # noqa: E402

# fixed styling so regenerated artifacts stay diffable
_WIDTH_PX, _HEIGHT_PX, _DPI = 1200, 900, 100
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
_MARKERS = ("o", "s", "^", "v", "D", "x", "+", "*", "<", ">")


@dataclass(frozen=True)
class FigureSpec:
    csv_paths: tuple
    labels: tuple
    output: str
    title: str = ""

    def __post_init__(self):
        if not self.csv_paths:
            raise InvalidInput("figure spec lists no series")
        if len(self.labels) != len(self.csv_paths):
            raise InvalidInput("need exactly one label per CSV")
        for path in self.csv_paths:
            if not os.path.exists(path):
                raise InvalidInput(f"series CSV not found: {path}")


def load_figure_spec(path):
    """Parse a figure.json file into a FigureSpec (paths relative to it)."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    series = raw.get("series")
    if not isinstance(series, list) or not series:
        raise InvalidInput(f"{path}: 'series' must be a non-empty list")
    csv_paths, labels = [], []
    for entry in series:
        if "csv" not in entry:
            raise InvalidInput(f"{path}: every series needs a 'csv' path")
        csv_paths.append(resolve(entry["csv"]))
        labels.append(entry.get(
            "label", os.path.splitext(os.path.basename(entry["csv"]))[0]))
    if "output" not in raw:
        raise InvalidInput(f"{path}: missing 'output' image path")
    return FigureSpec(tuple(csv_paths), tuple(labels),
                      resolve(raw["output"]), raw.get("title", ""))


def render_convergence_figure(spec):
    """Write the semilog error-vs-iteration figure; returns the output path."""
    fig, ax = plt.subplots(
        figsize=(_WIDTH_PX / _DPI, _HEIGHT_PX / _DPI), dpi=_DPI)
    for k, (path, label) in enumerate(zip(spec.csv_paths, spec.labels)):
        records = read_history_csv(path)
        if not records:
            print(f"warning: {path} has no data rows; plotting empty series",
                  file=sys.stderr)
        xs = [r.iteration for r in records]
        ys = [r.error_inf for r in records]
        ax.semilogy(xs, ys, label=label, color=_COLORS[k % len(_COLORS)],
                    marker=_MARKERS[k % len(_MARKERS)], markersize=4,
                    linewidth=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative interface error (inf-norm)")
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, which="both", linewidth=0.3, alpha=0.5)
    ax.legend(loc="best")
    fig.savefig(spec.output, dpi=_DPI)
    plt.close(fig)
    return spec.output


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Render a semilog convergence figure from history CSVs")
    parser.add_argument("--spec", required=True,
                        help="path to the figure.json specification")
    args = parser.parse_args(argv)
    try:
        spec = load_figure_spec(args.spec)
        out = render_convergence_figure(spec)
    except (InvalidInput, OSError, json.JSONDecodeError) as exc:
        print(f'error: {json.dumps({"reason": str(exc)})}', file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
