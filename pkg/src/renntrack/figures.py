"""Optional matplotlib renderings of evaluation and simulation outputs.

Figures are written straight to files (Agg backend) next to the delimited
data they illustrate; nothing here is required by the data pipeline.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import EvalReport
from .stability import StabilityResult


def render_eval_figure(report: EvalReport, path) -> None:
    """Cumulative accuracy over the stream plus per-cluster purity bars."""
    fig, (ax_mota, ax_purity) = plt.subplots(1, 2, figsize=(10, 4))

    ax_mota.plot(report.mota_curve, lw=1.2)
    ax_mota.set_xlabel("frame")
    ax_mota.set_ylabel("cumulative MOTA")
    ax_mota.set_title(f"MOTA {report.mota:.4f}")
    ax_mota.grid(alpha=0.3)

    clusters = report.purity.clusters
    if clusters:
        xs = np.arange(len(clusters))
        ax_purity.bar(xs, [c.purity for c in clusters], color="#4878cf")
        ax_purity.set_xticks(xs)
        ax_purity.set_xticklabels([str(c.identity) for c in clusters],
                                  fontsize=8)
    ax_purity.set_ylim(0, 1.05)
    ax_purity.set_xlabel("identity cluster")
    ax_purity.set_ylabel("purity")
    ax_purity.set_title(
        f"weighted purity {report.purity.weighted_purity:.4f}")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_stability_figure(result: StabilityResult, cfg_mean: float,
                            cfg_std: float, other_mean: float,
                            other_std: float, path) -> None:
    """Learned histogram vs the two source densities, with decay traces."""
    fig, (ax_hist, ax_elig) = plt.subplots(
        2, 1, figsize=(7, 6), gridspec_kw={"height_ratios": [2, 1]})

    edges = result.bin_edges
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    total = result.hist_counts.sum()
    density = (result.hist_counts / (total * width)) if total else \
        np.zeros_like(centers)
    ax_hist.bar(centers, density, width=width * 0.95, color="#f2c14e",
                label="learned memory")

    xs = np.linspace(edges[0], edges[-1], 400)
    pdf1 = np.exp(-0.5 * ((xs - cfg_mean) / cfg_std) ** 2) / (
        cfg_std * math.sqrt(2 * math.pi))
    pdf2 = np.exp(-0.5 * ((xs - other_mean) / other_std) ** 2) / (
        other_std * math.sqrt(2 * math.pi))
    ax_hist.plot(xs, pdf1, "r-", lw=1.5, label="distinctive source")
    ax_hist.plot(xs, pdf2, "k-", lw=1.5, label="non-distinctive source")
    ax_hist.legend(fontsize=8)
    ax_hist.set_ylabel("density")
    ax_hist.set_title(
        f"offset {result.offset:g}: L1 to distinctive "
        f"{result.l1_distinctive:.3f}, to other {result.l1_non_distinctive:.3f}")

    for trace in result.eligibility_traces.values():
        steps = [s for s, _ in trace]
        values = [e for _, e in trace]
        ax_elig.plot(steps, values, ".", ms=1.5, color="#2a4d9b", alpha=0.4)
    ax_elig.set_xlabel("iteration")
    ax_elig.set_ylabel("eligibility")
    ax_elig.set_ylim(0, 1.05)
    ax_hist.set_xlim(edges[0], edges[-1])

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
