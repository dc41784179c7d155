"""l_inf attacks on the surrogate f: FGSM, FOSC-masked PGD, and the eval suite.

The attacker ascends f per instance. Iterates are kept inside the eps-ball
around the clean point and inside the [0, 1] feature box.
"""

import re
from dataclasses import dataclass

import numpy as np

from .core_math import Prng, clamp, dot, l1_norm, linf_dist, sign
from .objective import input_grad_batch

DEFAULT_EPS = 8.0 / 255.0
DEFAULT_BETA = 2.0 / 255.0
DEFAULT_K = 10

# Slack for membership checks on iterates produced by floating-point clamps.
BALL_TOL = 1e-12


@dataclass(frozen=True)
class AttackConfig:
    eps: float = DEFAULT_EPS
    beta: float = DEFAULT_BETA
    k_steps: int = DEFAULT_K
    c_max: float | None = None
    t_prime: int | None = None

    def __post_init__(self):
        if not 0.0 < self.beta <= self.eps <= 1.0:
            raise ValueError(f"need 0 < beta <= eps <= 1, got beta={self.beta}, eps={self.eps}")
        if self.k_steps < 1:
            raise ValueError("k_steps must be >= 1")
        if self.c_max is not None and self.c_max < 0.0:
            raise ValueError("c_max must be >= 0")
        if self.t_prime is not None and self.t_prime < 1:
            raise ValueError("t_prime must be >= 1")


@dataclass
class AdvBatch:
    x0: np.ndarray
    x_adv: np.ndarray
    fosc: np.ndarray
    steps_used: np.ndarray


def fosc(x, x0, grad_x, eps):
    """First-order stationarity of the inner max over the eps-ball.

    max over ||x' - x0||_inf <= eps of <x' - x, grad> has the closed form
    eps * ||grad||_1 - <x - x0, grad>.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    if linf_dist(x, x0) > eps + BALL_TOL:
        raise ValueError("x lies outside the eps-ball around x0")
    return eps * l1_norm(grad_x) - dot(x - x0, grad_x)


def fosc_batch(X, X0, G, eps):
    """Row-wise fosc; sequential accumulation so rows match ``fosc`` bitwise."""
    X = np.asarray(X, dtype=np.float64)
    X0 = np.asarray(X0, dtype=np.float64)
    if np.any(np.abs(X - X0) > eps + BALL_TOL):
        raise ValueError("iterate outside the eps-ball")
    if X.shape[1] == 0:
        return np.zeros(X.shape[0])
    l1 = np.cumsum(np.abs(G), axis=1)[:, -1]
    inner = np.cumsum((X - X0) * G, axis=1)[:, -1]
    return eps * l1 - inner


def project_ball(x, x0, eps):
    """Clamp onto the eps-ball around x0, then onto the [0, 1] box."""
    x0 = np.asarray(x0, dtype=np.float64)
    return clamp(clamp(x, x0 - eps, x0 + eps), 0.0, 1.0)


def fgsm(params, aux, alpha, ctx, x0, y, eps):
    X0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    y = np.atleast_1d(y)
    G, _ = input_grad_batch(ctx, params, aux, alpha, X0, y)
    out = clamp(X0 + eps * sign(G), 0.0, 1.0)
    return out[0] if np.ndim(x0) == 1 else out


def pgd_fosc_batch(params, aux, alpha, ctx, X0, y, cfg, c_t, masked=True, x_init=None):
    """K-step signed-gradient ascent with FOSC early stopping per instance.

    After every step the FOSC of each active instance is recomputed and the
    instance is frozen once it is <= c_t. With ``masked=False`` every instance
    takes all K steps (plain PGD). The gradient is always evaluated on the full
    batch so masked and unmasked runs perform identical arithmetic.
    """
    X0 = np.asarray(X0, dtype=np.float64)
    y = np.asarray(y).reshape(-1)
    X = X0.copy() if x_init is None else np.array(x_init, dtype=np.float64)
    n = X0.shape[0]
    active = np.ones(n, dtype=bool)
    steps = np.zeros(n, dtype=np.int64)
    lo = np.maximum(X0 - cfg.eps, 0.0)
    hi = np.minimum(X0 + cfg.eps, 1.0)
    G, _ = input_grad_batch(ctx, params, aux, alpha, X, y)
    current_fosc = fosc_batch(X, X0, G, cfg.eps)
    k = 0
    while active.any() and k < cfg.k_steps:
        stepped = clamp(X + cfg.beta * sign(G), lo, hi)
        X = np.where(active[:, None], stepped, X)
        steps += active
        G, _ = input_grad_batch(ctx, params, aux, alpha, X, y)
        current_fosc = fosc_batch(X, X0, G, cfg.eps)
        if masked:
            active = active & (current_fosc > c_t)
        k += 1
    return AdvBatch(X0, X, current_fosc, steps)


def pgd(params, aux, alpha, ctx, X0, y, eps, beta, k_steps, random_start=False, seed=0):
    """Fixed-budget PGD (no FOSC stopping), optionally from a random start."""
    cfg = AttackConfig(eps=eps, beta=beta, k_steps=k_steps)
    X0 = np.asarray(X0, dtype=np.float64)
    x_init = None
    if random_start:
        rng = Prng(seed)
        noise = rng.uniform(-eps, eps, size=X0.shape)
        x_init = project_ball(X0 + noise, X0, eps)
    return pgd_fosc_batch(params, aux, alpha, ctx, X0, y, cfg, 0.0, masked=False,
                          x_init=x_init).x_adv


_PGD_RE = re.compile(r"^pgd-(\d+)$")


def parse_attack_spec(name):
    name = name.strip().lower()
    if name in ("clean", "fgsm"):
        return name, None
    m = _PGD_RE.match(name)
    if m and int(m.group(1)) >= 1:
        return "pgd", int(m.group(1))
    raise ValueError(f"unknown attack spec {name!r}")


def run_attack(params, aux, alpha, ctx, X, y, spec, eps=DEFAULT_EPS, beta=DEFAULT_BETA,
               random_start=False, seed=0):
    kind, k = parse_attack_spec(spec)
    X = np.asarray(X, dtype=np.float64)
    if kind == "clean":
        return X.copy()
    if kind == "fgsm":
        return fgsm(params, aux, alpha, ctx, X, y, eps)
    return pgd(params, aux, alpha, ctx, X, y, eps, min(beta, eps), k,
               random_start=random_start, seed=seed)


def attack_suite(params, aux, alpha, ctx, dataset, specs, eps=DEFAULT_EPS, beta=DEFAULT_BETA,
                 random_start=False, seed=0):
    """Perturbed copies of ``dataset`` for each attack spec, at full strength."""
    for spec in specs:
        parse_attack_spec(spec)
    out = {}
    for spec in specs:
        X_adv = run_attack(params, aux, alpha, ctx, dataset.features, dataset.labels, spec,
                           eps=eps, beta=beta, random_start=random_start, seed=seed)
        out[spec] = dataset.with_features(X_adv, name=f"{dataset.name}[{spec}]")
    return out
