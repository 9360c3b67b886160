"""Trace reporting: delimited plot data plus rendered matplotlib figures.

For every parameter column the report emits a trace series file and a
histogram file (both delimited text usable by any plotting tool) and
renders a trace/density figure to PNG. Degrees-of-freedom columns are
binned at unit width over the prior support [2, 30].
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError
from .seriesio import FLOAT_FMT, read_trace


def histogram_edges(name: str, values: np.ndarray) -> np.ndarray:
    if name.startswith("nu"):
        return np.arange(2.0, 31.0, 1.0)
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        return np.array([lo - 0.5, hi + 0.5])
    return np.linspace(lo, hi, 51)


def write_report(trace_path, out_dir, figures: bool = True) -> dict:
    """Emit per-parameter trace/histogram data files (and PNG figures).

    Returns a mapping of parameter name to the list of files written.
    """
    names, matrix = read_trace(trace_path)
    if matrix.shape[0] == 0:
        raise DataError("empty trace")
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    for j, name in enumerate(names):
        values = matrix[:, j]
        files = []
        trace_file = os.path.join(out_dir, f"{name}_trace.csv")
        with open(trace_file, "w") as fh:
            fh.write("iter,value\n")
            for i, v in enumerate(values, start=1):
                fh.write(f"{i},{FLOAT_FMT % v}\n")
        files.append(trace_file)

        edges = histogram_edges(name, values)
        counts, edges = np.histogram(values, bins=edges)
        widths = np.diff(edges)
        dens = counts / counts.sum() / widths if counts.sum() else counts
        hist_file = os.path.join(out_dir, f"{name}_hist.csv")
        with open(hist_file, "w") as fh:
            fh.write("bin_left,bin_right,count,density\n")
            for left, right, c, d in zip(edges[:-1], edges[1:], counts, dens):
                fh.write(
                    f"{FLOAT_FMT % left},{FLOAT_FMT % right},{c},{FLOAT_FMT % d}\n"
                )
        files.append(hist_file)

        if figures:
            fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3))
            ax1.plot(values, lw=0.4)
            ax1.set_title(f"{name} trace")
            ax1.set_xlabel("iteration")
            ax2.stairs(dens, edges, fill=True, alpha=0.6)
            ax2.set_title(f"{name} density")
            fig.tight_layout()
            fig_file = os.path.join(out_dir, f"{name}.png")
            fig.savefig(fig_file, dpi=110)
            plt.close(fig)
            files.append(fig_file)
        written[name] = files
    return written
