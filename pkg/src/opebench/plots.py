"""Figure rendering for benchmark reports.

The report path draws one step curve per estimator (the empirical CDF of its
squared errors on ``[0, z_max]``) into an SVG, and writes the underlying
(estimator, z, F) triples to ``cdf_points.csv`` so the curves can be re-drawn
elsewhere. Output is deterministic: SVG ids are salted with a fixed string
and the date stamp is suppressed.
"""

import csv
import os
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

from .metrics import cdf_step_points  # noqa: E402

CDF_POINTS_FILE = "cdf_points.csv"


def render_cdf_plot(
    z_by_estimator: Mapping[str, np.ndarray],
    z_max: float,
    path: str,
) -> None:
    """Render the per-estimator squared-error CDFs and dump their knots.

    `path` names the figure file (SVG); ``cdf_points.csv`` lands next to it.
    """
    if not z_by_estimator:
        raise ValueError("no estimator results to plot")
    out_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(out_dir, exist_ok=True)

    points = {
        name: cdf_step_points(z, z_max) for name, z in z_by_estimator.items()
    }

    with open(os.path.join(out_dir, CDF_POINTS_FILE), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["estimator", "z", "F"])
        for name, (zs, fs) in points.items():
            for z, f in zip(zs, fs):
                writer.writerow([name, repr(float(z)), repr(float(f))])

    plt.rcParams["svg.hashsalt"] = "opebench"
    fig, ax = plt.subplots(figsize=(8, 6))
    for name, (zs, fs) in points.items():
        ax.step(zs, fs, where="post", linewidth=2.0, label=name)
    ax.set_xlim(0, z_max)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("squared error")
    ax.set_ylabel("cumulative probability")
    ax.set_title("Squared-error CDF by estimator")
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
