"""AUC, its pairwise square-loss risk, and the instance-wise min-max surrogate.

The instance-wise function (for score s, label y, positive rate p) is

    g = (1-p)(s-a)^2 [y=1] + p(s-b)^2 [y=0]
        + 2(1+alpha)(p s [y=0] - (1-p) s [y=1]) - p(1-p) alpha^2

and the attack-side surrogate adds a concavity regularizer,
f = g - gamma * ||x||^2, where x is the (possibly perturbed) input.
"""

from dataclasses import dataclass

import numpy as np

from . import model
from .core_math import l2_norm_sq


@dataclass(frozen=True)
class AuxParams:
    a: float
    b: float
    alpha: float

    def clamped(self):
        return AuxParams(min(max(self.a, 0.0), 1.0), min(max(self.b, 0.0), 1.0),
                         min(max(self.alpha, -1.0), 1.0))

    def in_domain(self):
        return 0.0 <= self.a <= 1.0 and 0.0 <= self.b <= 1.0 and -1.0 <= self.alpha <= 1.0


@dataclass(frozen=True)
class ObjectiveContext:
    p: float
    gamma: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"positive proportion p must lie in (0, 1), got {self.p}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")


def _split(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = labels == 1
    neg = labels == 0
    if not np.all(pos | neg):
        raise ValueError("labels must be 0 or 1")
    if not pos.any() or not neg.any():
        raise ValueError("need at least one positive and one negative instance")
    return scores[pos], scores[neg]


def auc_exact(scores, labels):
    """Mann-Whitney AUC; a tied positive/negative pair earns half credit."""
    s_pos, s_neg = _split(scores, labels)
    allv = np.concatenate([s_pos, s_neg])
    order = np.argsort(allv, kind="mergesort")
    sorted_v = allv[order]
    ranks = np.empty(allv.size)
    i = 0
    n = allv.size
    while i < n:
        j = i
        while j + 1 < n and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    n_pos, n_neg = s_pos.size, s_neg.size
    rank_sum = float(np.sum(ranks[:n_pos]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pairwise_sq_loss(scores, labels):
    """Mean of (1 - (s_pos - s_neg))^2 over all positive/negative pairs."""
    s_pos, s_neg = _split(scores, labels)
    margins = s_pos[:, None] - s_neg[None, :]
    return float(np.mean((1.0 - margins) ** 2))


def _check_labels(y):
    y = np.asarray(y)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return y


def g_instance(ctx, aux, s, y, alpha=None):
    """Instance-wise reformulated risk; vectorizes over s and y.

    ``alpha`` overrides ``aux.alpha`` when given.
    """
    y = _check_labels(y)
    s = np.asarray(s, dtype=np.float64)
    al = aux.alpha if alpha is None else alpha
    p = ctx.p
    is_pos = (y == 1).astype(np.float64)
    is_neg = 1.0 - is_pos
    val = ((1.0 - p) * (s - aux.a) ** 2 * is_pos
           + p * (s - aux.b) ** 2 * is_neg
           + 2.0 * (1.0 + al) * (p * s * is_neg - (1.0 - p) * s * is_pos)
           - p * (1.0 - p) * al ** 2)
    return float(val) if np.ndim(val) == 0 else val


def g_partials(ctx, aux, s, y, alpha=None):
    """Partial derivatives of g w.r.t. (s, a, b, alpha), elementwise."""
    y = _check_labels(y)
    s = np.asarray(s, dtype=np.float64)
    al = aux.alpha if alpha is None else alpha
    p = ctx.p
    is_pos = (y == 1).astype(np.float64)
    is_neg = 1.0 - is_pos
    d_s = (2.0 * (1.0 - p) * (s - aux.a) * is_pos + 2.0 * p * (s - aux.b) * is_neg
           + 2.0 * (1.0 + al) * (p * is_neg - (1.0 - p) * is_pos))
    d_a = -2.0 * (1.0 - p) * (s - aux.a) * is_pos
    d_b = -2.0 * p * (s - aux.b) * is_neg
    d_alpha = 2.0 * (p * s * is_neg - (1.0 - p) * s * is_pos) - 2.0 * p * (1.0 - p) * al
    return d_s, d_a, d_b, d_alpha


def closed_form_aux(scores, labels, clamp=True):
    """a = mean positive score, b = mean negative score, alpha = b - a."""
    s_pos, s_neg = _split(scores, labels)
    a = float(np.mean(s_pos))
    b = float(np.mean(s_neg))
    aux = AuxParams(a, b, b - a)
    return aux.clamped() if clamp else aux


def reformulated_risk(ctx, scores, labels, aux):
    """Mean of g over the data at the given (a, b, alpha)."""
    y = _check_labels(labels)
    return float(np.mean(g_instance(ctx, aux, scores, y)))


def pairwise_from_minmax(p, minmax_value):
    """Map the min-max value of mean g back onto the pairwise square loss.

    With p the empirical positive rate, min_{a,b} max_alpha mean g equals
    p(1-p) * (pairwise_sq_loss - 1), so the pairwise loss is recovered as
    1 + value / (p(1-p)).
    """
    return 1.0 + minmax_value / (p * (1.0 - p))


def f_instance(ctx, params, aux, alpha, x, y):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    s = model.score(params, x)
    return g_instance(ctx, aux, s, y, alpha=alpha) - ctx.gamma * l2_norm_sq(x)


def f_batch(ctx, params, aux, alpha, X, y):
    """Per-instance f values for a batch (rows of X)."""
    X = np.asarray(X, dtype=np.float64)
    s = model.score_batch(params, X)
    return g_instance(ctx, aux, s, y, alpha=alpha) - ctx.gamma * np.sum(X * X, axis=1)


def grad_f(ctx, params, aux, alpha, x, y):
    """Exact gradients of f at one instance.

    Returns (d_w, d_alpha, d_x) with d_w laid out as [theta..., a, b].
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    s = model.score(params, x)
    d_s, d_a, d_b, d_alpha = g_partials(ctx, aux, s, y, alpha=alpha)
    bundle = model.backprop(params, x, float(d_s))
    d_w = np.concatenate([bundle.d_params, [float(d_a), float(d_b)]])
    d_x = bundle.d_input - 2.0 * ctx.gamma * x
    return d_w, float(d_alpha), d_x


def input_grad_batch(ctx, params, aux, alpha, X, y):
    """Rows of d f / d x for a batch, plus the scores used."""
    X = np.asarray(X, dtype=np.float64)
    s = model.score_batch(params, X)
    d_s = g_partials(ctx, aux, s, y, alpha=alpha)[0]
    _, d_input = model.backprop_batch(params, X, d_s)
    return d_input - 2.0 * ctx.gamma * X, s


@dataclass
class BatchObjective:
    value: float
    d_w: np.ndarray
    d_alpha: float
    d_x: np.ndarray


def batch_objective(ctx, params, aux, alpha, X, y):
    """Batch means of f and of its gradients (d_x stays per instance, scaled 1/n)."""
    X = np.asarray(X, dtype=np.float64)
    y = _check_labels(y).reshape(-1)
    n = X.shape[0] if X.ndim == 2 else 0
    if n == 0:
        raise ValueError("empty batch")
    s = model.score_batch(params, X)
    vals = g_instance(ctx, aux, s, y, alpha=alpha) - ctx.gamma * np.sum(X * X, axis=1)
    d_s, d_a, d_b, d_alpha = g_partials(ctx, aux, s, y, alpha=alpha)
    d_theta, d_input = model.backprop_batch(params, X, d_s)
    d_w = np.concatenate([d_theta, [np.sum(d_a), np.sum(d_b)]]) / n
    d_x = (d_input - 2.0 * ctx.gamma * X) / n
    return BatchObjective(float(np.sum(vals) / n), d_w, float(np.sum(d_alpha) / n), d_x)
