"""Brute-force verifiers for the analytic claims behind the training objective.

Each check re-derives its quantity on a separate code path: its own instance
function, double loops instead of vectorized means, box-corner enumeration
instead of the closed-form FOSC, finite differences instead of backprop.
Only the scorer forward/backward pass and the core numeric kernel are shared.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import model
from .core_math import Prng, l2_norm_sq, sign

PROP1_TOL = 1e-8
LEMMA1_STATIONARY_TOL = 1e-10
LEMMA1_BOUNDARY_TOL = 1e-8
CORNER_TOL = 1e-10
ALPHA_CONCAVITY_TOL = 1e-12
GRADCHECK_TOL = 1e-6
FD_STEP = 1e-5
CURVATURE_STEP = 1e-3


@dataclass
class CheckResult:
    suite: str
    check: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass
class VerifyReport:
    results: list = field(default_factory=list)

    def add(self, *args, **kw):
        self.results.append(CheckResult(*args, **kw))

    @property
    def passed(self):
        return all(r.passed for r in self.results)


def _g(p, a, b, alpha, s, y):
    if y == 1:
        return (1 - p) * (s - a) ** 2 - 2 * (1 + alpha) * (1 - p) * s - p * (1 - p) * alpha ** 2
    return p * (s - b) ** 2 + 2 * (1 + alpha) * p * s - p * (1 - p) * alpha ** 2


def _mean_g(p, a, b, alpha, scores, labels):
    total = 0.0
    for s, y in zip(scores, labels):
        total += _g(p, a, b, alpha, float(s), int(y))
    return total / len(scores)


def pairwise_loss_loop(scores, labels):
    total, count = 0.0, 0
    for si, yi in zip(scores, labels):
        if yi != 1:
            continue
        for sj, yj in zip(scores, labels):
            if yj != 0:
                continue
            total += (1.0 - (si - sj)) ** 2
            count += 1
    return total / count


def auc_pair_count(scores, labels):
    wins, count = 0.0, 0
    for si, yi in zip(scores, labels):
        if yi != 1:
            continue
        for sj, yj in zip(scores, labels):
            if yj != 0:
                continue
            wins += 1.0 if si > sj else (0.5 if si == sj else 0.0)
            count += 1
    return wins / count


def _parabola_vertex(fun, x, h):
    """Vertex of the parabola through (x-h, x, x+h); exact for quadratics."""
    fm, f0, fp = fun(x - h), fun(x), fun(x + h)
    curv = fm - 2 * f0 + fp
    if curv == 0.0:
        return x
    return x - 0.5 * h * (fp - fm) / curv


def _grid_argopt(fun, lo, hi, n, maximize):
    grid = np.linspace(lo, hi, n)
    vals = [fun(v) for v in grid]
    k = int(np.argmax(vals) if maximize else np.argmin(vals))
    return float(grid[k]), (hi - lo) / (n - 1)


def _refine(fun, lo, hi, maximize, final_step=1e-4):
    x, step = _grid_argopt(fun, lo, hi, 21, maximize)
    while step > final_step:
        x, step = _grid_argopt(fun, max(lo, x - step), min(hi, x + step), 21, maximize)
    v = _parabola_vertex(fun, x, step)
    return min(max(v, lo), hi)


def minmax_by_search(p, scores, labels):
    """min over (a, b) in [0,1]^2 of max over alpha in [-1,1] of mean g, by search.

    A coarse nested grid locates the saddle; coordinate zooming to step 1e-4
    follows, and a final three-point parabola solve lands exactly on each
    quadratic's optimum.
    """
    coarse = np.linspace(0.0, 1.0, 11)
    coarse_alpha = np.linspace(-1.0, 1.0, 21)
    best = None
    for a in coarse:
        for b in coarse:
            inner = max(_mean_g(p, a, b, al, scores, labels) for al in coarse_alpha)
            if best is None or inner < best[0]:
                best = (inner, a, b)
    _, a, b = best
    alpha = 0.0
    for _ in range(3):
        alpha = _refine(lambda al: _mean_g(p, a, b, al, scores, labels), -1.0, 1.0, True)
        a = _refine(lambda v: _mean_g(p, v, b, alpha, scores, labels), 0.0, 1.0, False)
        b = _refine(lambda v: _mean_g(p, a, v, alpha, scores, labels), 0.0, 1.0, False)
    alpha = _refine(lambda al: _mean_g(p, a, b, al, scores, labels), -1.0, 1.0, True)
    return _mean_g(p, a, b, alpha, scores, labels), (a, b, alpha)


def prop1_gaps(scores, labels):
    """Discrepancies between the pairwise loss and the reformulated min-max value."""
    scores = [float(s) for s in scores]
    labels = [int(y) for y in labels]
    n = len(scores)
    n_pos = sum(labels)
    p = n_pos / n
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    a, b = sum(pos) / len(pos), sum(neg) / len(neg)
    closed = _mean_g(p, a, b, b - a, scores, labels)
    searched, _ = minmax_by_search(p, scores, labels)
    target = pairwise_loss_loop(scores, labels)
    scale = p * (1 - p)
    return abs(target - (1 + closed / scale)), abs(target - (1 + searched / scale))


def verify_prop1(features, labels, params):
    """Largest gap between pairwise loss and the min-max value (closed form and search)."""
    labels = np.asarray(labels)
    if len(labels) > 20:
        raise ValueError("prop1 oracle is for n <= 20")
    scores = model.score_batch(params, features)
    return max(prop1_gaps(scores, labels))


def random_prop1_instance(rng, max_n=20, d=3, arch_hidden=4):
    n = 2 + rng.randbelow(max_n - 1)
    labels = np.array([rng.randbelow(2) for _ in range(n)])
    labels[0], labels[1] = 1, 0
    X = rng.uniform(0.0, 1.0, size=(n, d))
    params = model.init((d, arch_hidden, 1), rng.next_u64())
    for w in params.weights:
        w *= 3.0
    return X, labels, params


def corner_fosc(x, x0, grad, eps):
    """max over the 2^d corners of the eps-box of <corner - x, grad>."""
    x = np.asarray(x, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    best = -math.inf
    for signs in itertools.product((-1.0, 1.0), repeat=x.size):
        corner = x0 + eps * np.array(signs)
        best = max(best, float(np.sum((corner - x) * grad)))
    return best


def _f_value(ctx, params, aux, alpha, x, y):
    s = model.score(params, x)
    return _g(ctx.p, aux.a, aux.b, alpha, s, int(y)) - ctx.gamma * l2_norm_sq(x)


def verify_lemma1(params, aux, alpha, ctx, x0, y, eps, rng=None, max_iter=50):
    """Both zero conditions of FOSC plus a positivity check at a generic point.

    Returns a dict of measured values; sign instability in the boundary
    construction is reported as ``boundary_stable=False``, not as a failure.
    """
    from .attack import fosc
    from .objective import AuxParams, ObjectiveContext, grad_f

    rng = rng or Prng(0)
    x0 = np.asarray(x0, dtype=np.float64)
    out = {}

    # (a) stationary point: pick a, alpha so dg/ds = 0 at x0, regularizer off.
    ctx0 = ObjectiveContext(ctx.p, 0.0)
    s0 = model.score(params, x0)
    if y == 1:
        st_aux = AuxParams(0.0, aux.b, s0 - 1.0)
    else:
        st_aux = AuxParams(aux.a, 1.0, -s0)
    _, _, gx = grad_f(ctx0, params, st_aux, st_aux.alpha, x0, y)
    out["stationary_fosc"] = fosc(x0, x0, gx, eps)
    zero = model.zeros(params.arch)
    _, _, gz = grad_f(ctx0, zero, aux, alpha, x0, y)
    out["zero_scorer_fosc"] = fosc(x0, x0, gz, eps)

    # (b) boundary fixed point of x = x0 + eps * sign(grad f(x)).
    x = x0.copy()
    stable = False
    for _ in range(max_iter):
        _, _, gx = grad_f(ctx, params, aux, alpha, x, y)
        nxt = x0 + eps * sign(gx)
        if np.array_equal(nxt, x):
            stable = True
            break
        x = nxt
    _, _, gx = grad_f(ctx, params, aux, alpha, x, y)
    out["boundary_stable"] = stable
    out["boundary_fosc"] = fosc(x, x0, gx, eps) if stable else float("nan")

    # (c) generic interior point: closed form vs corner enumeration, and > 0.
    delta = rng.uniform(-0.5 * eps, 0.5 * eps, size=x0.size)
    xg = x0 + delta
    _, _, gx = grad_f(ctx, params, aux, alpha, xg, y)
    out["generic_fosc"] = fosc(xg, x0, gx, eps)
    if x0.size <= 12:
        out["generic_corner_fosc"] = corner_fosc(xg, x0, gx, eps)
    return out


def directional_curvature(ctx, params, aux, alpha, x, y, u, h=CURVATURE_STEP):
    """Second difference of f along unit u, divided by h^2."""
    fp = _f_value(ctx, params, aux, alpha, x + h * u, y)
    f0 = _f_value(ctx, params, aux, alpha, x, y)
    fm = _f_value(ctx, params, aux, alpha, x - h * u, y)
    return (fp + fm - 2.0 * f0) / (h * h)


def input_hessian(params, aux, alpha, p, x, y, h=CURVATURE_STEP):
    """Hessian of g (regularizer off) in x, by central differences of the input gradient."""
    from .objective import ObjectiveContext, grad_f

    ctx0 = ObjectiveContext(p, 0.0)
    d = x.size
    H = np.zeros((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        gp = grad_f(ctx0, params, aux, alpha, x + e, y)[2]
        gm = grad_f(ctx0, params, aux, alpha, x - e, y)[2]
        H[:, j] = (gp - gm) / (2.0 * h)
    return 0.5 * (H + H.T)


def _max_curvature(params, aux, alpha, p, x, y):
    return float(np.linalg.eigvalsh(input_hessian(params, aux, alpha, p, x, y))[-1])


def estimate_gamma_star(params, aux, ctx, dataset_sample=None, probes=200, seed=0,
                        refine_top=5, refine_iters=60):
    """Empirical weak-concavity constant of g in the input, over the [0,1] box.

    For each probe point (random box points plus any supplied sample rows)
    and both labels, the largest Hessian eigenvalue of g in x is measured.
    The best few probes are then pushed uphill by a shrinking random search.
    Returns max(0, lambda_max / 2): the smallest gamma for which
    g - gamma ||x||^2 has non-positive curvature at every probed point.
    This is a lower estimate of the true constant, not a certificate.
    """
    if probes < 100:
        raise ValueError("need at least 100 probes")
    rng = Prng(seed)
    d = params.input_dim
    alpha = aux.alpha
    points = [rng.uniform(0.0, 1.0, size=d) for _ in range(probes)]
    if dataset_sample is not None:
        points.extend(np.asarray(dataset_sample, dtype=np.float64))
    scored = []
    for x in points:
        for y in (0, 1):
            scored.append((_max_curvature(params, aux, alpha, ctx.p, x, y), y, x))
    scored.sort(key=lambda t: -t[0])
    best = scored[0][0]
    for lam, y, x in scored[:refine_top]:
        step = 0.1
        for _ in range(refine_iters):
            cand = np.clip(x + rng.uniform(-step, step, size=d), 0.0, 1.0)
            lam_c = _max_curvature(params, aux, alpha, ctx.p, cand, y)
            if lam_c > lam:
                lam, x = lam_c, cand
            else:
                step *= 0.9
        best = max(best, lam)
    return max(0.0, 0.5 * best)


def strong_concavity_probes(params, aux, alpha, ctx, margin, probes=1000, seed=1,
                            h_max=1e-2):
    """Worst value of (second difference) + 2 margin h^2 (1 - 1e-3) over random probes.

    A non-positive result means every probe met the strong-concavity bound.
    """
    rng = Prng(seed)
    d = params.input_dim
    worst = -math.inf
    for i in range(probes):
        x = rng.uniform(h_max, 1.0 - h_max, size=d)
        u = rng.unit_vector(d)
        h = rng.uniform(0.1 * h_max, h_max)
        y = i % 2
        second = (_f_value(ctx, params, aux, alpha, x + h * u, y)
                  + _f_value(ctx, params, aux, alpha, x - h * u, y)
                  - 2.0 * _f_value(ctx, params, aux, alpha, x, y))
        worst = max(worst, second + 2.0 * margin * h * h * (1.0 - 1e-3))
    return worst


def verify_strong_concavity(params, aux, alpha, ctx, gamma, margin=1.0, probes=1000, seed=1):
    from .objective import ObjectiveContext

    ctx_g = ObjectiveContext(ctx.p, gamma)
    return strong_concavity_probes(params, aux, alpha, ctx_g, margin, probes, seed) <= 0.0


def alpha_second_difference_error(rng, n_states=200):
    """Max |g(al+h) + g(al-h) - 2 g(al) + 2p(1-p)h^2| over random states."""
    worst = 0.0
    for _ in range(n_states):
        p = rng.uniform(0.01, 0.99)
        a, b = rng.uniform(0, 1), rng.uniform(0, 1)
        al = rng.uniform(-1, 1)
        h = rng.uniform(0, 1)
        s = rng.uniform(0, 1)
        y = rng.randbelow(2)
        second = (_g(p, a, b, al + h, s, y) + _g(p, a, b, al - h, s, y)
                  - 2.0 * _g(p, a, b, al, s, y))
        worst = max(worst, abs(second + 2.0 * p * (1.0 - p) * h * h))
    return worst


def verify_alpha_concavity(ctx, seed=0, n_states=200, tol=ALPHA_CONCAVITY_TOL):
    """Second difference in alpha equals -2p(1-p)h^2 for the context's p."""
    rng = Prng(seed)
    p = ctx.p
    for _ in range(n_states):
        a, b, al, h, s = (rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(-1, 1),
                          rng.uniform(0, 1), rng.uniform(0, 1))
        y = rng.randbelow(2)
        second = (_g(p, a, b, al + h, s, y) + _g(p, a, b, al - h, s, y)
                  - 2.0 * _g(p, a, b, al, s, y))
        if abs(second + 2.0 * p * (1.0 - p) * h * h) > tol:
            return False
    return True


def gradcheck_state(rng, arch):
    """Random (ctx, params, aux, alpha, x, y) for gradient checking."""
    from .objective import AuxParams, ObjectiveContext

    params = model.init(arch, rng.next_u64())
    for w, b in zip(params.weights, params.biases):
        w *= 2.0
        b += rng.uniform(-0.5, 0.5, size=b.shape)
    ctx = ObjectiveContext(rng.uniform(0.05, 0.95), rng.uniform(0.0, 1.0))
    aux = AuxParams(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(-1, 1))
    x = rng.uniform(0.0, 1.0, size=arch[0])
    return ctx, params, aux, aux.alpha, x, rng.randbelow(2)


def gradcheck_error(ctx, params, aux, alpha, x, y, h=FD_STEP):
    """Relative error of grad_f against central differences of an independent f."""
    from .objective import grad_f

    d_w, d_alpha, d_x = grad_f(ctx, params, aux, alpha, x, y)
    theta = params.flat()
    nt = theta.size
    z0 = np.concatenate([theta, [aux.a, aux.b, alpha], x])

    def fun(z):
        p = model.ScorerParams.from_flat(params.arch, z[:nt])
        a, b, al = z[nt], z[nt + 1], z[nt + 2]
        xx = z[nt + 3:]
        s = model.score(p, xx)
        return _g(ctx.p, a, b, al, s, y) - ctx.gamma * float(np.sum(xx * xx))

    numeric = model.central_diff(fun, z0, h)
    errs = [model.max_rel_error(d_w, numeric[:nt + 2]),
            model.max_rel_error([d_alpha], numeric[nt + 2:nt + 3]),
            model.max_rel_error(d_x, numeric[nt + 3:])]
    return max(errs)


def curvy_mlp(d=3, hidden=8, seed=5, scale=3.0):
    params = model.init((d, hidden, 1), seed)
    for w in params.weights:
        w *= scale
    return params


# --- suites used by the CLI and the acceptance tests ---------------------------------


def suite_prop1(report, seed, n_instances=100):
    rng = Prng(seed)
    worst = 0.0
    for _ in range(n_instances):
        X, labels, params = random_prop1_instance(rng)
        worst = max(worst, verify_prop1(X, labels, params))
    report.add("prop1", "max_gap", worst, PROP1_TOL, worst <= PROP1_TOL)


def suite_lemma1(report, seed, n_instances=20):
    from .objective import AuxParams, ObjectiveContext

    rng = Prng(seed)
    worst = {"stationary": 0.0, "boundary": 0.0, "corner": 0.0}
    min_generic = math.inf
    unstable = 0
    eps = 8.0 / 255.0
    for i in range(n_instances):
        d = 2 + rng.randbelow(11)
        params = model.init((d, 6, 1), rng.next_u64())
        ctx = ObjectiveContext(rng.uniform(0.1, 0.9), rng.uniform(0.0, 0.2))
        aux = AuxParams(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(-1, 1))
        x0 = rng.uniform(eps, 1.0 - eps, size=d)
        res = verify_lemma1(params, aux, aux.alpha, ctx, x0, i % 2, eps, rng=rng)
        worst["stationary"] = max(worst["stationary"], abs(res["stationary_fosc"]),
                                  abs(res["zero_scorer_fosc"]))
        if res["boundary_stable"]:
            worst["boundary"] = max(worst["boundary"], abs(res["boundary_fosc"]))
        else:
            unstable += 1
        worst["corner"] = max(worst["corner"],
                              abs(res["generic_fosc"] - res["generic_corner_fosc"]))
        min_generic = min(min_generic, res["generic_fosc"])
    report.add("lemma1", "stationary_fosc", worst["stationary"], LEMMA1_STATIONARY_TOL,
               worst["stationary"] <= LEMMA1_STATIONARY_TOL)
    report.add("lemma1", "boundary_fosc", worst["boundary"], LEMMA1_BOUNDARY_TOL,
               worst["boundary"] <= LEMMA1_BOUNDARY_TOL and unstable < n_instances,
               f"{unstable} sign-unstable instances skipped")
    report.add("lemma1", "corner_enumeration_gap", worst["corner"], CORNER_TOL,
               worst["corner"] <= CORNER_TOL)
    report.add("lemma1", "generic_fosc_min", min_generic, 0.0, min_generic > 0.0)


def suite_concavity(report, seed, probes=1000):
    from .objective import AuxParams, ObjectiveContext

    rng = Prng(seed)
    err = alpha_second_difference_error(rng)
    report.add("concavity", "alpha_second_difference", err, ALPHA_CONCAVITY_TOL,
               err <= ALPHA_CONCAVITY_TOL)
    params = curvy_mlp(seed=seed + 5)
    aux = AuxParams(0.6, 0.3, -0.3)
    ctx = ObjectiveContext(0.3, 0.0)
    gamma_hat = estimate_gamma_star(params, aux, ctx, probes=200, seed=seed)
    margin = 1.0
    worst = strong_concavity_probes(params, aux, aux.alpha, ObjectiveContext(ctx.p, gamma_hat + margin),
                                    margin, probes, seed + 1)
    report.add("concavity", "regularized_worst_probe", worst, 0.0, worst <= 0.0,
               f"gamma_hat={gamma_hat:.6f}")
    worst0 = strong_concavity_probes(params, aux, aux.alpha, ctx, margin, probes, seed + 1)
    report.add("concavity", "unregularized_violates", worst0, 0.0, worst0 > 0.0,
               "negative control: must violate")


def suite_gradcheck(report, seed, n_states=100):
    rng = Prng(seed)
    for arch in ((4, 1), (4, 6, 1), (3, 5, 4, 1)):
        worst = max(gradcheck_error(*gradcheck_state(rng, arch)) for _ in range(n_states))
        report.add("gradcheck", "arch_" + "x".join(map(str, arch)), worst, GRADCHECK_TOL,
                   worst <= GRADCHECK_TOL)


SUITES = {
    "prop1": suite_prop1,
    "lemma1": suite_lemma1,
    "concavity": suite_concavity,
    "gradcheck": suite_gradcheck,
}


def run_suites(names, seed):
    if "all" in names:
        names = list(SUITES)
    report = VerifyReport()
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown verify suite {name!r}")
        SUITES[name](report, seed)
    return report
