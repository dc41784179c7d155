"""Small tanh/sigmoid scorers with exact reverse-mode gradients.

A scorer maps x in R^d to a score in (0, 1). Parameters are stored per layer
(weight ``W`` of shape (out, in), bias ``b`` of shape (out,)) and have one
canonical flat view: layer-major, each layer's W row-major followed by its b.
"""

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .core_math import Prng

# sigmoid(36) rounds to 1 - 2^-52 < 1, so clipping the logit here keeps the
# score strictly inside (0, 1) for every finite input.
LOGIT_CLIP = 36.0

CHECKPOINT_MAGIC = b"ADAUC1"


@dataclass
class ScorerParams:
    arch: tuple
    weights: list
    biases: list

    @property
    def input_dim(self):
        return self.arch[0]

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat(self):
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.reshape(-1))
            parts.append(b)
        return np.concatenate(parts) if parts else np.zeros(0)

    def copy(self):
        return ScorerParams(tuple(self.arch), [w.copy() for w in self.weights],
                            [b.copy() for b in self.biases])

    @classmethod
    def from_flat(cls, arch, flat):
        arch = tuple(int(a) for a in arch)
        flat = np.asarray(flat, dtype=np.float64)
        weights, biases, pos = [], [], 0
        for fan_in, fan_out in zip(arch[:-1], arch[1:]):
            n_w = fan_in * fan_out
            weights.append(flat[pos:pos + n_w].reshape(fan_out, fan_in).copy())
            pos += n_w
            biases.append(flat[pos:pos + fan_out].copy())
            pos += fan_out
        if pos != flat.size:
            raise ValueError(f"flat vector has {flat.size} entries, arch {arch} needs {pos}")
        return cls(arch, weights, biases)


@dataclass
class GradBundle:
    d_params: np.ndarray
    d_input: np.ndarray = field(default=None)


def _check_arch(arch):
    arch = tuple(int(a) for a in arch)
    if len(arch) < 2:
        raise ValueError("architecture needs an input width and at least one layer")
    if arch[-1] != 1:
        raise ValueError(f"architecture must end with width 1, got {arch}")
    if any(a < 1 for a in arch):
        raise ValueError(f"all widths must be positive, got {arch}")
    return arch


def init(arch, seed):
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    arch = _check_arch(arch)
    rng = Prng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(arch[:-1], arch[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ScorerParams(arch, weights, biases)


def zeros(arch):
    arch = _check_arch(arch)
    return ScorerParams(arch, [np.zeros((o, i)) for i, o in zip(arch[:-1], arch[1:])],
                        [np.zeros(o) for o in arch[1:]])


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _as_batch(params, X):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = X.reshape(1, -1) if single else X
    if X2.ndim != 2 or X2.shape[1] != params.input_dim:
        raise ValueError(f"input has shape {X.shape}, scorer expects dim {params.input_dim}")
    return X2, single


def _forward(params, X):
    acts = [X]
    h = X
    n_layers = len(params.weights)
    for li, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        if li < n_layers - 1:
            h = np.tanh(z)
            acts.append(h)
        else:
            logit = z[:, 0]
    clipped = np.clip(logit, -LOGIT_CLIP, LOGIT_CLIP)
    return acts, logit, _sigmoid(clipped)


def score_batch(params, X):
    X2, _ = _as_batch(params, X)
    return _forward(params, X2)[2]


def score(params, x):
    X2, single = _as_batch(params, x)
    s = _forward(params, X2)[2]
    return float(s[0]) if single else s


def backprop_batch(params, X, upstream):
    """Gradients of sum_i upstream_i * score(x_i).

    Returns (d_params, d_input): d_params is the flat parameter gradient summed
    over the batch, d_input has one row per instance.
    """
    X2, _ = _as_batch(params, X)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    if upstream.shape[0] != X2.shape[0]:
        raise ValueError("one upstream value per instance required")
    acts, logit, s = _forward(params, X2)
    inside = np.abs(logit) <= LOGIT_CLIP
    delta = (upstream * s * (1.0 - s) * inside)[:, None]
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.weights)
    for li in range(len(params.weights) - 1, -1, -1):
        grads_w[li] = delta.T @ acts[li]
        grads_b[li] = delta.sum(axis=0)
        delta = delta @ params.weights[li]
        if li > 0:
            delta = delta * (1.0 - acts[li] ** 2)
    parts = []
    for gw, gb in zip(grads_w, grads_b):
        parts.append(gw.reshape(-1))
        parts.append(gb)
    return np.concatenate(parts), delta


def backprop(params, x, upstream):
    """Exact gradient of ``upstream * score(params, x)`` w.r.t. params and x."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    d_params, d_input = backprop_batch(params, x[None, :], [float(upstream)])
    return GradBundle(d_params, d_input[0])


def central_diff(fun, z, h=1e-5):
    z = np.array(z, dtype=np.float64)
    grad = np.zeros_like(z)
    for j in range(z.size):
        zp = z.copy()
        zp[j] += h
        zm = z.copy()
        zm[j] -= h
        grad[j] = (fun(zp) - fun(zm)) / (2.0 * h)
    return grad


def max_rel_error(analytic, numeric):
    """Worst component error, scaled by the gradient's largest magnitude.

    Scaling by the infinity norm keeps near-zero components from turning
    O(h^2) truncation noise into huge ratios.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0))
    err = np.max(np.abs(analytic - numeric), initial=0.0)
    if scale == 0.0:
        return float(err)
    return float(err / scale)


def finite_diff_check(params, x, objective, h=1e-5):
    """Compare an objective's analytic gradient with central differences.

    ``objective(params, x)`` returns ``(value, d_params, d_x)``. Every flat
    parameter and every input coordinate is perturbed.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    theta0 = params.flat()
    n_theta = theta0.size
    _, d_params, d_x = objective(params, x)
    analytic = np.concatenate([np.asarray(d_params).reshape(-1), np.asarray(d_x).reshape(-1)])

    def fun(z):
        p = ScorerParams.from_flat(params.arch, z[:n_theta])
        return objective(p, z[n_theta:])[0]

    numeric = central_diff(fun, np.concatenate([theta0, x]), h)
    return max_rel_error(analytic, numeric)


def save_checkpoint(path_or_file, params, extras=None, mode=""):
    """Write "ADAUC1", the architecture and the little-endian f64 parameters.

    ``extras`` (the a, b, alpha scalars) and a mode tag trail the parameter
    stream so a checkpoint carries everything evaluation needs.
    """
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", len(params.arch)))
    buf.write(struct.pack(f"<{len(params.arch)}I", *params.arch))
    buf.write(params.flat().astype("<f8").tobytes())
    extras = [] if extras is None else [float(e) for e in extras]
    buf.write(struct.pack("<I", len(extras)))
    buf.write(struct.pack(f"<{len(extras)}d", *extras))
    tag = mode.encode("utf-8")
    buf.write(struct.pack("<I", len(tag)))
    buf.write(tag)
    data = buf.getvalue()
    if hasattr(path_or_file, "write"):
        path_or_file.write(data)
    else:
        with open(path_or_file, "wb") as fh:
            fh.write(data)
    return data


class CheckpointError(ValueError):
    pass


def load_checkpoint(path_or_bytes):
    """Inverse of save_checkpoint; returns (params, extras, mode)."""
    if isinstance(path_or_bytes, (bytes, bytearray)):
        data = bytes(path_or_bytes)
    else:
        with open(path_or_bytes, "rb") as fh:
            data = fh.read()
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError("truncated checkpoint")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(len(CHECKPOINT_MAGIC))) != CHECKPOINT_MAGIC:
        raise CheckpointError("bad checkpoint magic")
    (n_widths,) = struct.unpack("<I", take(4))
    arch = struct.unpack(f"<{n_widths}I", take(4 * n_widths))
    try:
        arch = _check_arch(arch)
    except ValueError as exc:
        raise CheckpointError(str(exc)) from None
    n_params = sum(i * o + o for i, o in zip(arch[:-1], arch[1:]))
    flat = np.frombuffer(take(8 * n_params), dtype="<f8").astype(np.float64)
    (n_extra,) = struct.unpack("<I", take(4))
    extras = list(struct.unpack(f"<{n_extra}d", take(8 * n_extra)))
    (n_tag,) = struct.unpack("<I", take(4))
    mode = bytes(take(n_tag)).decode("utf-8")
    if pos != len(data):
        raise CheckpointError("trailing bytes after checkpoint")
    return ScorerParams.from_flat(arch, flat), extras, mode
