"""Matplotlib figure renderers for the CLI report path.

Every function writes a PNG next to the delimited output and returns the
path.  The Agg backend keeps rendering headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update(
    {
        "figure.figsize": (6.0, 3.8),
        "figure.dpi": 110,
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "axes.spines.top": False,
        "axes.spines.right": False,
    }
)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return str(path)


def plot_modulus_argument(path, thetas, values):
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.0, 4.6))
    ax1.plot(thetas, np.abs(values), lw=1.0)
    ax1.set_ylabel("|c1|")
    ax2.plot(thetas, np.angle(values) / (2 * np.pi), lw=1.0)
    ax2.set_ylabel("arg c1 / 2pi")
    ax2.set_xlabel("theta")
    return _save(fig, path)


def plot_divisor_spectrum(path, records):
    fig, ax = plt.subplots()
    if records:
        heights = [max(abs(v) for v in n) for n, _, _ in records]
        divisors = [d for _, d, _ in records]
        ax.semilogy(heights, divisors, ".", ms=4)
    ax.set_xlabel("|n|")
    ax.set_ylabel("divisor magnitude")
    return _save(fig, path)


def plot_trace(path, values):
    fig, ax = plt.subplots()
    ax.plot(np.arange(len(values)), values, lw=0.8)
    ax.set_xlabel("n")
    ax.set_ylabel("partial sum")
    return _save(fig, path)


def plot_excursions(path, excursions, radius):
    fig, ax = plt.subplots()
    ax.plot(excursions, lw=0.9)
    ax.axhline(radius, color="crimson", lw=0.8, ls="--", label="tube radius")
    ax.set_xlabel("theta node")
    ax.set_ylabel("max |z| excursion")
    ax.legend(loc="best")
    return _save(fig, path)


def plot_divergence(path, sup_norms):
    fig, ax = plt.subplots()
    ks = np.arange(1, len(sup_norms) + 1)
    ax.semilogy(ks, sup_norms, "o-", ms=4)
    ax.set_xlabel("truncation level")
    ax.set_ylabel("sup norm of the formal solution")
    return _save(fig, path)


def plot_margins(path, report):
    fig, ax = plt.subplots()
    n, j = report.witness
    ax.axhline(report.c, color="crimson", lw=0.8, ls="--", label="requested c")
    ax.semilogy([report.range_r], [report.min_margin], "o", ms=6)
    ax.annotate(
        f"min at n={list(n)}, j={j}",
        xy=(report.range_r, report.min_margin),
        xytext=(5, 5),
        textcoords="offset points",
    )
    ax.set_xlabel("range")
    ax.set_ylabel("margin")
    ax.legend(loc="best")
    return _save(fig, path)


def plot_residual_heatmap(path, field, extent_label="z node"):
    fig, ax = plt.subplots()
    im = ax.imshow(
        np.log10(np.maximum(np.abs(field), 1e-18)).T,
        origin="lower",
        aspect="auto",
        cmap="viridis",
    )
    fig.colorbar(im, ax=ax, label="log10 residual")
    ax.set_xlabel("theta node")
    ax.set_ylabel(extent_label)
    return _save(fig, path)


def plot_order_masses(path, orders, masses, residuals):
    fig, ax = plt.subplots()
    ax.semilogy(orders, masses, "o-", ms=4, label="coefficient mass")
    ax.semilogy(orders, residuals, "s--", ms=4, label="identity residual")
    ax.set_xlabel("order")
    ax.set_ylabel("mass")
    ax.legend(loc="best")
    return _save(fig, path)


def plot_approximant_errors(path, rows):
    fig, ax = plt.subplots()
    qs = [q for _, _, q, _ in rows]
    errs = [e for _, _, _, e in rows]
    ax.loglog(qs, errs, "o-", ms=4)
    ax.set_xlabel("prime denominator")
    ax.set_ylabel("componentwise error")
    return _save(fig, path)


def plot_mask_composite(path, K):
    M = K.resolution
    centers = K.centers()
    radii = np.abs(centers)
    n_bins = M // 2
    edges = np.linspace(0.0, K.half_width, n_bins + 1)
    bins = np.clip(np.digitize(radii, edges) - 1, 0, n_bins - 1)
    profile = np.zeros((n_bins, K.fibers))
    for i in range(K.fibers):
        marked = K.masks[i]
        if marked.any():
            profile[:, i] = np.bincount(bins[marked].ravel(), minlength=n_bins) > 0
    fig, ax = plt.subplots()
    ax.imshow(
        profile,
        origin="lower",
        aspect="auto",
        cmap="cividis",
        extent=(0.0, 1.0, 0.0, K.half_width),
    )
    ax.set_xlabel("theta")
    ax.set_ylabel("|z|")
    ax.grid(False)
    return _save(fig, path)


def plot_fiber_mask(path, K, fiber=0):
    fig, ax = plt.subplots(figsize=(4.4, 4.4))
    h = K.half_width
    ax.imshow(
        K.masks[fiber].T,
        origin="lower",
        extent=(-h, h, -h, h),
        cmap="cividis",
    )
    circle = plt.Circle((0, 0), h, fill=False, color="crimson", lw=0.8)
    ax.add_patch(circle)
    ax.set_xlabel("Re z")
    ax.set_ylabel("Im z")
    ax.grid(False)
    return _save(fig, path)
