"""Matplotlib renderings written next to the CSV outputs.

Figures are built with the object API on an Agg canvas (no pyplot state), and
saved without timestamp/software metadata so identical inputs give identical
bytes.
"""

import io

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .config import atomic_write_bytes

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "adauc",
}

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _new_figure(width=6.0, height=None):
    height = width * GOLDEN if height is None else height
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasAgg(fig)
    return fig


def _save(fig, path, description=""):
    buf = io.BytesIO()
    metadata = {"Software": None}
    if description:
        metadata["Description"] = description
    fig.savefig(buf, format="png", metadata=metadata)
    atomic_write_bytes(path, buf.getvalue())


def auc_grid_figure(report, path, description=""):
    """Grouped bars: one group per attack, one bar per (method, mode) row."""
    with matplotlib.rc_context(STYLE):
        fig = _new_figure(7.0)
        ax = fig.add_subplot(111)
        rows = list(report.rows)
        width = 0.8 / max(1, len(rows))
        xs = np.arange(len(report.attacks))
        for i, key in enumerate(rows):
            vals = [report.rows[key][a] for a in report.attacks]
            ax.bar(xs + (i - (len(rows) - 1) / 2) * width, vals, width, label=f"{key[0]} ({key[1]})")
        ax.set_xticks(xs)
        ax.set_xticklabels(report.attacks)
        ax.set_ylim(0.0, 1.0)
        ax.axhline(0.5, color="grey", lw=0.8, ls="--")
        ax.set_ylabel("test AUC")
        ax.set_title("AUC under attack")
        ax.legend(loc="lower left")
        fig.tight_layout()
        _save(fig, path, description)


def histogram_figure(hist, path, title="", description=""):
    with matplotlib.rc_context(STYLE):
        fig = _new_figure()
        ax = fig.add_subplot(111)
        centers = 0.5 * (hist.edges[:-1] + hist.edges[1:])
        width = hist.edges[1] - hist.edges[0]
        n_pos = max(1, int(hist.pos_counts.sum()))
        n_neg = max(1, int(hist.neg_counts.sum()))
        ax.bar(centers, hist.neg_counts / n_neg, width, alpha=0.6, label="negative")
        ax.bar(centers, hist.pos_counts / n_pos, width, alpha=0.6, label="positive")
        ax.set_xlim(0.0, 1.0)
        ax.set_xlabel("score")
        ax.set_ylabel("fraction of class")
        ax.set_title(title or f"score distribution ({hist.attack})")
        ax.legend()
        fig.tight_layout()
        _save(fig, path, description)


def history_figure(history, path, description=""):
    """Test AUC (clean and attacked) and the gradient norm per epoch."""
    with matplotlib.rc_context(STYLE):
        fig = _new_figure(8.0, 3.2)
        ax1 = fig.add_subplot(121)
        ax2 = fig.add_subplot(122)
        ep = history.column("epoch")
        if ep.size:
            ax1.plot(ep, history.column("auc_clean"), label="clean")
            att = history.column("auc_attacked")
            if np.isfinite(att).any():
                ax1.plot(ep, att, label="attacked")
            ax2.plot(ep, history.column("grad_norm_w"), color="k")
            ax1.legend()
        ax1.set_xlabel("epoch")
        ax1.set_ylabel("test AUC")
        ax2.set_xlabel("epoch")
        ax2.set_ylabel("mean ||g_w||")
        fig.tight_layout()
        _save(fig, path, description)
