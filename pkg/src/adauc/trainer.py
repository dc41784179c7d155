"""Adversarial AUC training: FOSC schedule, masked PGD inner loop, and SGDA updates."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import model
from .attack import AttackConfig, fosc_batch, pgd_fosc_batch, run_attack
from .core_math import Prng, l2_norm_sq
from .objective import (AuxParams, ObjectiveContext, auc_exact, batch_objective,
                        closed_form_aux, input_grad_batch)

log = logging.getLogger(__name__)

MODES = ("natural", "at_plain", "at_fosc")
MODE_ALIASES = {"nt": "natural", "at1": "at_plain", "at2": "at_fosc"}

HISTORY_COLUMNS = ("epoch", "objective", "auc_clean", "auc_attacked", "grad_norm_w",
                   "mean_fosc", "c_t")


def normalize_mode(mode):
    mode = MODE_ALIASES.get(mode.lower(), mode.lower())
    if mode not in MODES:
        raise ValueError(f"unknown training mode {mode!r}")
    return mode


@dataclass
class TrainConfig:
    epochs: int = 60
    eta_w: float = 0.01
    eta_alpha: float = 0.1
    batch_size: int = 128
    control_epoch: int | None = None
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 30
    lr_min: float = 0.0
    weight_decay: float = 5e-4
    momentum: float = 0.0
    seed: int = 0
    mode: str = "at_fosc"
    eval_attack: str | None = None

    def __post_init__(self):
        self.mode = normalize_mode(self.mode)
        if self.eta_w <= 0 or self.eta_alpha <= 0 or self.batch_size < 1:
            raise ValueError("learning rates and batch size must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.control_epoch is not None and self.control_epoch < 1:
            raise ValueError("control_epoch must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")

    def t_prime(self, attack_cfg=None):
        """Control epoch: explicit setting, else the attack config's, else T/2."""
        if self.control_epoch is not None:
            return self.control_epoch
        if attack_cfg is not None and attack_cfg.t_prime is not None:
            return attack_cfg.t_prime
        return max(1, self.epochs // 2)


@dataclass
class EpochRecord:
    epoch: int
    objective: float
    auc_clean: float
    auc_attacked: float
    grad_norm_w: float
    mean_fosc: float
    c_t: float

    def as_row(self):
        return [getattr(self, c) for c in HISTORY_COLUMNS]


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    c_max: float = 0.0

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)


@dataclass
class TrainResult:
    params: model.ScorerParams
    aux: AuxParams
    history: TrainHistory

    @property
    def alpha(self):
        return self.aux.alpha


def ct_schedule(t, c_max, t_prime):
    """c_t = max(0, c_max - t * c_max / T')."""
    if t < 0:
        raise ValueError("epoch index must be >= 0")
    return max(0.0, c_max - t * c_max / t_prime)


def sgda_step(params, aux, d_w, d_alpha, eta_w, eta_alpha, weight_decay=0.0):
    """Descent on (theta, a, b), ascent on alpha, then projection onto the aux domains.

    ``d_w`` is laid out as [theta..., a, b]. Weight decay touches theta only.
    """
    theta = params.flat()
    d_w = np.asarray(d_w, dtype=np.float64)
    if d_w.size != theta.size + 2:
        raise ValueError(f"gradient has {d_w.size} entries, expected {theta.size + 2}")
    new_theta = theta - eta_w * (d_w[:-2] + weight_decay * theta)
    a = aux.a - eta_w * d_w[-2]
    b = aux.b - eta_w * d_w[-1]
    alpha = aux.alpha + eta_alpha * d_alpha
    new_aux = AuxParams(float(a), float(b), float(alpha)).clamped()
    return model.ScorerParams.from_flat(params.arch, new_theta), new_aux


def initial_c_max(params, aux, ctx, X0, y, eps):
    """Median FOSC at the clean points of a batch."""
    G, _ = input_grad_batch(ctx, params, aux, aux.alpha, X0, y)
    return float(np.median(fosc_batch(X0, X0, G, eps)))


def _batches(order, size):
    for start in range(0, order.size, size):
        yield order[start:start + size]


def _safe_auc(scores, labels):
    if labels.min() == labels.max():
        return float("nan")
    return auc_exact(scores, labels)


def train(dataset, arch, attack_cfg, train_cfg, ctx, test=None, params=None, aux=None):
    """Run SGDA for ``train_cfg.epochs`` epochs; returns a TrainResult."""
    if dataset.labels.min() == dataset.labels.max():
        raise ValueError("training data must contain both classes")
    rng = Prng(train_cfg.seed)
    if params is None:
        params = model.init(arch, train_cfg.seed)
    if aux is None:
        aux = closed_form_aux(model.score_batch(params, dataset.features), dataset.labels)
    history = TrainHistory()
    X_all, y_all = dataset.features, dataset.labels
    eval_set = test if test is not None else dataset
    mode = train_cfg.mode

    c_max = attack_cfg.c_max
    if c_max is None:
        first = rng.permutation(dataset.n)[:train_cfg.batch_size]
        c_max = initial_c_max(params, aux, ctx, X_all[first], y_all[first], attack_cfg.eps)
        rng = Prng(train_cfg.seed)
    history.c_max = c_max
    t_prime = train_cfg.t_prime(attack_cfg)

    eta_w, eta_alpha = train_cfg.eta_w, train_cfg.eta_alpha
    vel_w = None
    vel_alpha = 0.0
    for t in range(train_cfg.epochs):
        if t > 0 and train_cfg.lr_decay_every > 0 and t % train_cfg.lr_decay_every == 0:
            eta_w = max(eta_w * train_cfg.lr_decay_factor, train_cfg.lr_min)
            eta_alpha = max(eta_alpha * train_cfg.lr_decay_factor, train_cfg.lr_min)
        c_t = ct_schedule(t, c_max, t_prime)
        order = rng.permutation(dataset.n)
        obj_sum, gnorm_sum, fosc_sum, n_batches, n_fosc = 0.0, 0.0, 0.0, 0, 0
        for idx in _batches(order, train_cfg.batch_size):
            X0, y = X_all[idx], y_all[idx]
            if mode == "natural":
                X_adv = X0
                G, _ = input_grad_batch(ctx, params, aux, aux.alpha, X0, y)
                fos = fosc_batch(X0, X0, G, attack_cfg.eps)
            else:
                adv = pgd_fosc_batch(params, aux, aux.alpha, ctx, X0, y, attack_cfg,
                                     c_t if mode == "at_fosc" else 0.0,
                                     masked=(mode == "at_fosc"))
                X_adv, fos = adv.x_adv, adv.fosc
            # Both gradients come from one frozen snapshot, then both updates apply.
            bo = batch_objective(ctx, params, aux, aux.alpha, X_adv, y)
            d_w, d_alpha = bo.d_w, bo.d_alpha
            if train_cfg.momentum > 0.0:
                vel_w = d_w if vel_w is None else train_cfg.momentum * vel_w + d_w
                vel_alpha = train_cfg.momentum * vel_alpha + d_alpha
                d_w, d_alpha = vel_w, vel_alpha
            params, aux = sgda_step(params, aux, d_w, d_alpha, eta_w, eta_alpha,
                                    train_cfg.weight_decay)
            obj_sum += bo.value
            gnorm_sum += math.sqrt(l2_norm_sq(bo.d_w))
            fosc_sum += float(np.sum(fos))
            n_fosc += fos.size
            n_batches += 1
        s_clean = model.score_batch(params, eval_set.features)
        eval_ctx = ObjectiveContext(eval_set.p, 0.0)
        auc_clean = _safe_auc(s_clean, eval_set.labels)
        auc_att = float("nan")
        if train_cfg.eval_attack:
            X_att = run_attack(params, aux, aux.alpha, eval_ctx, eval_set.features, eval_set.labels,
                               train_cfg.eval_attack, eps=attack_cfg.eps, beta=attack_cfg.beta)
            auc_att = _safe_auc(model.score_batch(params, X_att), eval_set.labels)
        rec = EpochRecord(t, obj_sum / n_batches, auc_clean, auc_att, gnorm_sum / n_batches,
                          fosc_sum / n_fosc, c_t)
        history.records.append(rec)
        log.info("epoch %d mode=%s obj=%.6f auc=%.4f adv_auc=%.4f |g_w|=%.4g fosc=%.4g c_t=%.4g",
                 t, mode, rec.objective, rec.auc_clean, rec.auc_attacked, rec.grad_norm_w,
                 rec.mean_fosc, c_t)
    return TrainResult(params, aux, history)


def stationarity_probe(history):
    """Mean ||g_w|| over the first and last 10% of epochs."""
    g = history.column("grad_norm_w") if isinstance(history, TrainHistory) else np.asarray(history)
    if g.size < 20:
        raise ValueError(f"stationarity probe needs >= 20 epochs, got {g.size}")
    k = max(1, int(round(0.1 * g.size)))
    return float(np.mean(g[:k])), float(np.mean(g[-k:]))


def default_context(dataset, gamma=0.0):
    return ObjectiveContext(dataset.p, gamma)

