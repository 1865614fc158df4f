"""Render the result CSVs to PNG files.

The CSVs stay the interchange format; these helpers exist so a figure run
leaves something viewable next to the numbers.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["load_rows", "render_all"]

_NUMERIC = ("d", "m", "n", "n0", "param", "mse_mean", "mse_stderr", "reps", "seed")


def load_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = []
        for rec in csv.DictReader(fh):
            for key in _NUMERIC:
                rec[key] = float(rec[key])
            rows.append(rec)
    return rows


def _estimator_order(rows):
    seen = []
    for rec in rows:
        if rec["estimator"] not in seen:
            seen.append(rec["estimator"])
    return seen


def _save(fig, path):
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
    return path


def _plot_mse_panel(ax, rows, title):
    for name in _estimator_order(rows):
        sub = [r for r in rows if r["estimator"] == name]
        sub.sort(key=lambda r: r["param"])
        ax.plot([r["param"] for r in sub], [r["mse_mean"] for r in sub],
                marker="o", markersize=3.5, label=name)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel(r"separation $\Delta$")
    ax.set_ylabel("MSE")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.25)


def _render_cluster_mse(rows, path):
    ms = sorted({int(r["m"]) for r in rows})
    fig, axes = plt.subplots(1, len(ms), figsize=(4.2 * len(ms), 3.4),
                             sharey=True, squeeze=False)
    for ax, m in zip(axes[0], ms):
        sub = [r for r in rows if int(r["m"]) == m]
        d = int(sub[0]["d"])
        _plot_mse_panel(ax, sub, rf"$\rho = {m / d:g}$  (m = {m})")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def _render_cost(rows, path):
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    for name in _estimator_order(rows):
        sub = [r for r in rows if r["estimator"] == name]
        sub.sort(key=lambda r: r["param"])
        ax.plot([r["param"] for r in sub], [r["mse_mean"] for r in sub],
                marker="s", markersize=4, label=name)
    ax.set_yscale("log")
    ax.set_xlabel(r"$\rho = m/d$")
    ax.set_ylabel("max MSE / oracle MSE")
    ax.set_title("adaptation cost over the separation grid")
    ax.grid(True, alpha=0.25)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def _render_single(rows, path, title):
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    _plot_mse_panel(ax, rows, title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_all(csv_paths, out_dir):
    """Render each known CSV to ``<stem>.png`` in ``out_dir``."""
    out = {}
    for key, renderer, title in (
        ("cluster_mse", _render_cluster_mse, None),
        ("cluster_cost", _render_cost, None),
        ("sep1_mse", _render_single, "ordered-bias separation sweep"),
        ("sep2_mse", _render_single, "random-direction separation sweep"),
    ):
        path = csv_paths.get(key)
        if path is None:
            continue
        rows = load_rows(path)
        png = os.path.join(out_dir, key + ".png")
        if title is None:
            out[key + "_png"] = renderer(rows, png)
        else:
            out[key + "_png"] = renderer(rows, png, title)
    return out