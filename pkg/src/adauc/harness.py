"""Evaluation grid (models x attacks -> AUC), score histograms, CSV and SVG output."""

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import model
from .attack import DEFAULT_BETA, DEFAULT_EPS, parse_attack_spec, run_attack
from .config import atomic_write_text, header_lines
from .objective import AuxParams, ObjectiveContext, auc_exact
from .trainer import HISTORY_COLUMNS

REPORT_COLUMNS = ("method", "mode", "attack", "auc")
HISTOGRAM_COLUMNS = ("bin_lo", "bin_hi", "pos_count", "neg_count")
VERIFY_COLUMNS = ("suite", "check", "value", "threshold", "passed", "detail")


@dataclass
class ModelEntry:
    method: str
    mode: str
    params: model.ScorerParams
    aux: AuxParams


@dataclass
class EvalReport:
    attacks: list
    rows: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def cell(self, method, mode, attack):
        return self.rows[(method, mode)][attack]

    def records(self):
        for (method, mode), cells in self.rows.items():
            for attack in self.attacks:
                yield method, mode, attack, cells[attack]


@dataclass
class ScoreHistogram:
    edges: np.ndarray
    pos_counts: np.ndarray
    neg_counts: np.ndarray
    attack: str


def eval_context(dataset):
    # Evaluation adversaries ascend the plain AUC surrogate; the concavity
    # regularizer is a training device only.
    return ObjectiveContext(dataset.p, 0.0)


def attacked_scores(entry, dataset, spec, eps=DEFAULT_EPS, beta=DEFAULT_BETA,
                    random_start=False, seed=0):
    ctx = eval_context(dataset)
    X = run_attack(entry.params, entry.aux, entry.aux.alpha, ctx, dataset.features,
                   dataset.labels, spec, eps=eps, beta=beta, random_start=random_start, seed=seed)
    return model.score_batch(entry.params, X)


def evaluate_grid(models, dataset, attack_specs, eps=DEFAULT_EPS, beta=DEFAULT_BETA,
                  threads=1, random_start=False, seed=0):
    """AUC of every model under every attack; cells are independent jobs."""
    specs = [s.strip().lower() for s in attack_specs]
    for s in specs:
        parse_attack_spec(s)
    jobs = [(entry, spec) for entry in models for spec in specs]

    def run(job):
        entry, spec = job
        return auc_exact(attacked_scores(entry, dataset, spec, eps, beta, random_start, seed),
                         dataset.labels)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            aucs = list(pool.map(run, jobs))
    else:
        aucs = [run(j) for j in jobs]
    report = EvalReport(specs)
    for (entry, spec), auc in zip(jobs, aucs):
        report.rows.setdefault((entry.method, entry.mode), {})[spec] = auc
    report.metadata.update(dataset=dataset.name, eps=eps, beta=beta, seed=seed)
    return report


def score_histogram(entry, dataset, attack_spec="clean", n_bins=10, eps=DEFAULT_EPS,
                    beta=DEFAULT_BETA):
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    scores = attacked_scores(entry, dataset, attack_spec, eps, beta)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    pos, _ = np.histogram(scores[dataset.labels == 1], bins=edges)
    neg, _ = np.histogram(scores[dataset.labels == 0], bins=edges)
    return ScoreHistogram(edges, pos, neg, attack_spec)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6f}"
    return str(v)


def csv_text(columns, rows, config=None):
    buf = io.StringIO()
    for line in header_lines(config or {}):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def report_rows(report):
    return list(report.records())


def history_rows(history):
    return [r.as_row() for r in history.records]


def histogram_rows(hist):
    return [(hist.edges[i], hist.edges[i + 1], int(hist.pos_counts[i]), int(hist.neg_counts[i]))
            for i in range(len(hist.pos_counts))]


def verify_rows(vreport):
    return [(r.suite, r.check, float(r.value), float(r.threshold), bool(r.passed), r.detail)
            for r in vreport.results]


def write_csv(obj, path, config=None):
    """Write an EvalReport, TrainHistory, ScoreHistogram or VerifyReport as CSV."""
    from .oracle import VerifyReport
    from .trainer import TrainHistory

    if isinstance(obj, EvalReport):
        text = csv_text(REPORT_COLUMNS, report_rows(obj), config)
    elif isinstance(obj, TrainHistory):
        text = csv_text(HISTORY_COLUMNS, history_rows(obj), config)
    elif isinstance(obj, ScoreHistogram):
        text = csv_text(HISTOGRAM_COLUMNS, histogram_rows(obj), config)
    elif isinstance(obj, VerifyReport):
        text = csv_text(VERIFY_COLUMNS, verify_rows(obj), config)
    else:
        raise TypeError(f"cannot write {type(obj).__name__} as CSV")
    try:
        atomic_write_text(path, text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text


def read_csv(path):
    """Parse a CSV written by write_csv; returns (header, rows of strings)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


# --- SVG line charts -------------------------------------------------------------------

SVG_W, SVG_H = 800, 600
_PAD_L, _PAD_R, _PAD_T, _PAD_B = 80, 180, 50, 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _range(values, fallback=(0.0, 1.0)):
    values = [v for v in values if np.isfinite(v)]
    if not values:
        return fallback
    lo, hi = min(values), max(values)
    if lo == hi:
        return lo - 0.5, hi + 0.5
    return lo, hi


def svg_lines(series, title="", xlabel="", ylabel="", comment_lines=()):
    """SVG 1.1 document with one polyline per named series of (xs, ys)."""
    names = list(series)
    xs_all = [x for n in names for x in series[n][0]]
    ys_all = [y for n in names for y in series[n][1]]
    x0, x1 = _range(xs_all)
    y0, y1 = _range(ys_all)
    pw = SVG_W - _PAD_L - _PAD_R
    ph = SVG_H - _PAD_T - _PAD_B

    def px(x):
        return _PAD_L + (x - x0) / (x1 - x0) * pw

    def py(y):
        return _PAD_T + ph - (y - y0) / (y1 - y0) * ph

    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    for line in comment_lines:
        out.append(f"<!-- {line.replace('--', '-')} -->")
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_W}" '
               f'height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">')
    out.append(f'<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="white"/>')
    out.append(f'<g stroke="black" stroke-width="1">'
               f'<line x1="{_PAD_L}" y1="{_PAD_T + ph}" x2="{_PAD_L + pw}" y2="{_PAD_T + ph}"/>'
               f'<line x1="{_PAD_L}" y1="{_PAD_T}" x2="{_PAD_L}" y2="{_PAD_T + ph}"/></g>')
    out.append('<g font-family="sans-serif" font-size="12">')
    for i in range(6):
        xv = x0 + (x1 - x0) * i / 5
        yv = y0 + (y1 - y0) * i / 5
        out.append(f'<text x="{px(xv):.2f}" y="{_PAD_T + ph + 18}" text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{_PAD_L - 8}" y="{py(yv) + 4:.2f}" text-anchor="end">{yv:.4g}</text>')
    out.append(f'<text x="{_PAD_L + pw / 2:.2f}" y="{SVG_H - 15}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="20" y="{_PAD_T + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 20 {_PAD_T + ph / 2:.2f})">{ylabel}</text>')
    out.append(f'<text x="{SVG_W / 2:.2f}" y="28" text-anchor="middle" font-size="16">{title}</text>')
    out.append("</g>")
    for k, name in enumerate(names):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(*series[name])
                       if np.isfinite(x) and np.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        ly = _PAD_T + 20 * k + 10
        lx = SVG_W - _PAD_R + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 32}" y="{ly + 4}" font-family="sans-serif" font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg_lines(series, path, title="", xlabel="", ylabel="", config=None):
    text = svg_lines(series, title, xlabel, ylabel, header_lines(config or {}, prefix=""))
    try:
        atomic_write_text(path, text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text
