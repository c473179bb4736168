"""PSNR curve plots for comparisons."""
from __future__ import annotations

import pathlib
from typing import Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from harness.compare import MeanCurve  # noqa: E402

PLOT_STYLE = {
    "axes.labelsize": 10,
    "font.size": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (6.0, 3.7),
}


def _plot(curves: Mapping[str, MeanCurve], axis: str, metric: str, path: pathlib.Path) -> pathlib.Path:
    with plt.rc_context(PLOT_STYLE):
        fig, ax = plt.subplots()
        for label, curve in curves.items():
            xs = curve.iters if axis == "iter" else curve.wall_ms
            # log axes cannot show the initialization point at x = 0
            keep = xs > 0
            ax.plot(xs[keep], curve.metrics[metric][keep], marker="o", markersize=3, label=label)
        ax.set_xscale("log")
        ax.set_xlabel("iteration" if axis == "iter" else "wall time [ms]")
        ax.set_ylabel(metric.replace("_", " "))
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
    return path


def plot_comparison(
    curves: Mapping[str, MeanCurve], directory: pathlib.Path | str, metric: str = "psnr_target"
) -> list[pathlib.Path]:
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [
        _plot(curves, "iter", metric, directory / "psnr_iter.png"),
        _plot(curves, "wall_ms", metric, directory / "psnr_time.png"),
    ]


__all__ = ["plot_comparison"]
