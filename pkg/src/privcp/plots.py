"""SVG figures for coverage bars, delta sweeps and region heatmaps."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

# fixed metadata and hash salt keep SVG output byte-identical across runs
SVG_META = {"Date": None, "Creator": None}
plt.rcParams["svg.hashsalt"] = "privcp"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)


def coverage_bars(aggregate, alpha, path):
    """Mean coverage per method with standard-error whiskers and the 1 - alpha line."""
    names = [a["method"] for a in aggregate]
    cov = np.array([a["coverage"] for a in aggregate])
    se = np.array([a["coverage_se"] for a in aggregate])
    fig, ax = plt.subplots(figsize=(1.2 * len(names) + 2, 3.5))
    ax.bar(range(len(names)), cov, yerr=se, color="#4c72b0", capsize=3)
    ax.axhline(1 - alpha, color="k", ls="--", lw=1)
    ax.set_xticks(range(len(names)), names, rotation=30, ha="right")
    ax.set_ylabel("coverage")
    ax.set_ylim(min(0.5, cov.min() - 0.05), 1.0)
    fig.tight_layout()
    _save(fig, path)


def delta_sweep(summary, crit, alpha, path):
    """Coverage against delta; the interval (crit, 0) is shaded."""
    d = np.array([s["delta"] for s in summary])
    cov = np.array([s["coverage"] for s in summary])
    se = np.array([s["coverage_se"] for s in summary])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.axvspan(crit, 0.0, color="#55a868", alpha=0.2, lw=0)
    ax.errorbar(d, cov, yerr=se, marker="o", color="#4c72b0")
    ax.axhline(1 - alpha, color="k", ls="--", lw=1)
    ax.axvline(crit, color="#55a868", ls=":", lw=1)
    ax.set_xlabel(r"$\delta$")
    ax.set_ylabel("coverage")
    fig.tight_layout()
    _save(fig, path)


def region_heatmap(labels, delta_min, delta_max, boundary, path):
    """Valid / invalid / undefined cells with the boundary lines dashed."""
    code = {"valid": 0, "invalid": 1, "boundary": 2, "undefined": 3}
    grid = np.vectorize(code.get)(labels).astype(float)
    cmap = ListedColormap(["#55a868", "#dd8452", "#8172b3", "#eeeeee"])
    fig, ax = plt.subplots(figsize=(4.5, 4))
    extent = (delta_max[0], delta_max[-1], delta_min[0], delta_min[-1])
    ax.imshow(grid, origin="lower", extent=extent, cmap=cmap, vmin=0, vmax=3, aspect="auto",
              interpolation="nearest")
    if boundary is not None:
        req2, req1 = boundary.polyline((delta_max[0], delta_max[-1]))
        for line in (req2, req1):
            if len(line):
                ax.plot(line[:, 0], line[:, 1], "k--", lw=1)
    ax.set_xlim(extent[0], extent[1])
    ax.set_ylim(extent[2], extent[3])
    ax.set_xlabel(r"$\delta_{max}$")
    ax.set_ylabel(r"$\delta_{min}$")
    fig.tight_layout()
    _save(fig, path)
