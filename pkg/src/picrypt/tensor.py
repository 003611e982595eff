"""Minimal dense float64 tensor with reverse-mode automatic differentiation.

Every operation records its inputs and a pullback closure on the tensor it
returns; backward() replays the pullbacks in reverse recording order, so
gradient accumulation order is fixed and runs are reproducible. Matrices
are plain 2-D numpy arrays; there is no broadcasting beyond the bias-row
case add() documents.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

_ids = itertools.count()

# tanh-form gelu constants, pinned for cross-run determinism
_GELU_C0 = 0.7978845608028654
_GELU_C1 = 0.044715

LAYER_NORM_EPS = 1e-5


class Tensor:
    """Node in the autodiff graph: float64 values plus an optional gradient."""

    __slots__ = ("data", "grad", "_parents", "_pullback", "_id")

    def __init__(self, data, parents=(), pullback=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._pullback = pullback
        self._id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g


def _as2d(name, t):
    if t.data.ndim != 2:
        raise ShapeError(f"{name} expects a 2-D tensor, got shape {t.data.shape}")
    return t.data


def matmul(a: Tensor, b: Tensor) -> Tensor:
    da, db = _as2d("matmul", a), _as2d("matmul", b)
    if da.shape[1] != db.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {da.shape} @ {db.shape}")
    out = Tensor(da @ db, parents=(a, b))

    def pull(g):
        a.accumulate(g @ db.T)
        b.accumulate(da.T @ g)

    out._pullback = pull
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; b may also be a single row (1, D) broadcast over a's rows."""
    if a.data.shape == b.data.shape:
        out = Tensor(a.data + b.data, parents=(a, b))

        def pull(g):
            a.accumulate(g)
            b.accumulate(g)

    elif (
        a.data.ndim == 2
        and b.data.ndim == 2
        and b.data.shape == (1, a.data.shape[1])
    ):
        out = Tensor(a.data + b.data, parents=(a, b))

        def pull(g):
            a.accumulate(g)
            b.accumulate(g.sum(axis=0, keepdims=True))

    else:
        raise ShapeError(f"add shape mismatch: {a.data.shape} + {b.data.shape}")
    out._pullback = pull
    return out


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out = Tensor(a.data * s, parents=(a,))
    out._pullback = lambda g: a.accumulate(g * s)
    return out


def concat_last_axis(tensors) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat_last_axis of an empty sequence")
    lead = tensors[0].data.shape[:-1]
    for t in tensors:
        if t.data.shape[:-1] != lead:
            raise ShapeError(
                f"concat_last_axis mismatch: {t.data.shape} vs leading {lead}"
            )
    widths = [t.data.shape[-1] for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=-1),
                 parents=tuple(tensors))

    def pull(g):
        offset = 0
        for t, w in zip(tensors, widths):
            t.accumulate(g[..., offset : offset + w])
            offset += w

    out._pullback = pull
    return out


def transpose_last_two(a: Tensor) -> Tensor:
    _as2d("transpose_last_two", a)
    out = Tensor(a.data.T.copy(), parents=(a,))
    out._pullback = lambda g: a.accumulate(g.T)
    return out


def concat_rows(tensors) -> Tensor:
    """Stack 2-D tensors vertically; built from transpose + last-axis concat."""
    return transpose_last_two(
        concat_last_axis([transpose_last_two(t) for t in tensors])
    )


def mean_last_axis(a: Tensor) -> Tensor:
    da = _as2d("mean_last_axis", a)
    m = da.shape[1]
    out = Tensor(da.mean(axis=1, keepdims=True), parents=(a,))
    out._pullback = lambda g: a.accumulate(np.repeat(g, m, axis=1) / m)
    return out


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax with per-row max subtraction for stability."""
    da = _as2d("softmax_rows", a)
    shifted = da - da.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y, parents=(a,))

    def pull(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        a.accumulate(y * (g - dot))

    out._pullback = pull
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize each row to zero mean / unit variance, then affine scale."""
    dx = _as2d("layer_norm", x)
    d = dx.shape[1]
    grow = gamma.data.reshape(1, -1)
    brow = beta.data.reshape(1, -1)
    if grow.shape[1] != d or brow.shape[1] != d:
        raise ShapeError(
            f"layer_norm affine shapes {gamma.data.shape}/{beta.data.shape} "
            f"do not match row width {d}"
        )
    mu = dx.mean(axis=1, keepdims=True)
    var = ((dx - mu) ** 2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (dx - mu) * inv_std
    out = Tensor(grow * xhat + brow, parents=(x, gamma, beta))

    def pull(g):
        gamma.accumulate((g * xhat).sum(axis=0, keepdims=True).reshape(gamma.data.shape))
        beta.accumulate(g.sum(axis=0, keepdims=True).reshape(beta.data.shape))
        dxhat = g * grow
        term = dxhat - dxhat.mean(axis=1, keepdims=True) \
            - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
        x.accumulate(inv_std * term)

    out._pullback = pull
    return out


def gelu(x: Tensor) -> Tensor:
    """tanh-form gelu; the approximation constants are fixed."""
    dx = x.data
    inner = _GELU_C0 * (dx + _GELU_C1 * dx**3)
    t = np.tanh(inner)
    out = Tensor(0.5 * dx * (1.0 + t), parents=(x,))

    def pull(g):
        dinner = _GELU_C0 * (1.0 + 3.0 * _GELU_C1 * dx**2)
        deriv = 0.5 * (1.0 + t) + 0.5 * dx * (1.0 - t**2) * dinner
        x.accumulate(g * deriv)

    out._pullback = pull
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))
    out = Tensor(s, parents=(x,))
    out._pullback = lambda g: x.accumulate(g * s * (1.0 - s))
    return out


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    """Negative log-likelihood of ``label`` under softmax(logits); scalar."""
    flat = logits.data.reshape(-1)
    k = flat.shape[0]
    if not 0 <= label < k:
        raise ShapeError(f"label {label} out of range for {k} classes")
    m = flat.max()
    z = flat - m
    logsumexp = m + np.log(np.exp(z).sum())
    out = Tensor(logsumexp - flat[label], parents=(logits,))

    def pull(g):
        p = np.exp(z) / np.exp(z).sum()
        p[label] -= 1.0
        logits.accumulate(float(g) * p.reshape(logits.data.shape))

    out._pullback = pull
    return out


def backward(loss: Tensor) -> None:
    """Populate grads of everything ``loss`` depends on.

    Pullbacks run in reverse recording order (a valid topological order by
    construction), so accumulation order never varies between runs.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    nodes = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if t._id in nodes:
            continue
        nodes[t._id] = t
        stack.extend(t._parents)
    loss.accumulate(np.ones_like(loss.data))
    for tid in sorted(nodes, reverse=True):
        t = nodes[tid]
        if t._pullback is not None and t.grad is not None:
            t._pullback(t.grad)


def zero_grads(params) -> None:
    for t in params.values():
        t.grad = None


@dataclass
class GradCheckReport:
    max_rel_error: float
    param: str
    index: int
    n_checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def grad_check(f, params, step: float = 1e-5, tolerance: float = 1e-4,
               max_entries: int | None = None, seed: int = 0,
               denom_floor: float = 1e-6) -> GradCheckReport:
    """Compare analytic gradients of ``f(params)`` to central differences.

    f must return a scalar Tensor. Checks every parameter entry, or a
    seeded sample of ``max_entries`` of them. Relative error uses
    max(|analytic|, |numeric|, denom_floor) as denominator so near-zero
    gradients are compared absolutely.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    zero_grads(params)
    loss = f(params)
    backward(loss)
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in params.items()
    }

    entries = [
        (name, idx)
        for name in sorted(params)
        for idx in range(params[name].data.size)
    ]
    if max_entries is not None and len(entries) > max_entries:
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(entries), size=max_entries, replace=False)
        entries = [entries[i] for i in sorted(picks)]

    worst = (0.0, "", -1)
    for name, idx in entries:
        flat = params[name].data.reshape(-1)
        orig = flat[idx]
        flat[idx] = orig + step
        fp = f(params).data.item()
        flat[idx] = orig - step
        fm = f(params).data.item()
        flat[idx] = orig
        numeric = (fp - fm) / (2.0 * step)
        a = analytic[name].reshape(-1)[idx]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), denom_floor)
        if rel > worst[0]:
            worst = (rel, name, idx)

    return GradCheckReport(
        max_rel_error=worst[0],
        param=worst[1],
        index=worst[2],
        n_checked=len(entries),
        tolerance=tolerance,
    )


CHECKPOINT_MAGIC = b"PETN"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, params) -> None:
    """Write named tensors to ``path`` in the binary checkpoint format.

    Layout: magic "PETN", version u32, entry count u32; per entry a u16
    name length, the UTF-8 name, a u32 rank, the dims as u64, then the
    float64 payload. All integers and floats little-endian. Entries are
    written in sorted name order so files are byte-reproducible.
    """
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(params)))
        for name in sorted(params):
            data = params[name].data if isinstance(params[name], Tensor) else np.asarray(params[name], dtype=np.float64)
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}Q", *data.shape))
            fh.write(data.astype("<f8").tobytes())


def load_checkpoint(path) -> dict:
    """Read a checkpoint back as a name -> Tensor dict."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ShapeError(f"bad checkpoint magic: {blob[:4]!r}")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ShapeError(f"unsupported checkpoint version {version}")
    pos = 12
    params = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos : pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}Q", blob, pos)
        pos += 8 * rank
        size = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(dims)
        pos += 8 * size
        params[name] = Tensor(data.copy())
    return params
