"""Transformer classifier over patch vectors with no positional encoding.

Without absolute position information every encoder block is equivariant
to the order of the patch tokens, and the class-token readout is therefore
invariant: shuffling the input rows cannot change the logits. An optional
reference-based positional module (rpe) can be switched on to break that
invariance deliberately; it computes features from (patch - reference) in
pixel space and adds them to the embeddings.

Parameter dicts map dotted names to Tensors; see init_params for the
naming scheme. All shapes are 2-D rows-of-features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import (
    Tensor,
    add,
    concat_last_axis,
    concat_rows,
    cross_entropy,
    gelu,
    layer_norm,
    matmul,
    scale,
    sigmoid,
    softmax_rows,
    transpose_last_two as transpose,
)


@dataclass(frozen=True)
class ModelConfig:
    patch_dim: int          # flattened patch width (P*P*C, or the mixed quadrant)
    dim: int = 64
    depth: int = 4
    heads: int = 4
    ffn_dim: int = 256
    n_classes: int = 10
    rpe: bool = False
    rpe_hidden: int = 64

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ConfigError(f"dim {self.dim} not divisible by heads {self.heads}")
        for field in ("patch_dim", "dim", "depth", "heads", "ffn_dim", "n_classes"):
            if getattr(self, field) < 1:
                raise ConfigError(f"{field} must be >= 1")

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads


def init_params(cfg: ModelConfig, seed: int = 0) -> dict:
    """Gaussian(0, 0.02) weights, zero biases, unit layer-norm scales.

    Names: embed.w/b, cls, layer{i}.ln1.gamma|beta, layer{i}.attn.h{j}.wq|wk|wv,
    layer{i}.attn.wo, layer{i}.ln2.gamma|beta, layer{i}.ffn.w1|b1|w2|b2,
    head.w/b, and rpe.w1|b1|w2|b2|ref when cfg.rpe is set.
    """
    rng = np.random.default_rng(seed)
    sd = 0.02

    def w(*shape):
        return Tensor(rng.normal(0.0, sd, size=shape))

    def zeros(*shape):
        return Tensor(np.zeros(shape))

    p = {
        "embed.w": w(cfg.patch_dim, cfg.dim),
        "embed.b": zeros(1, cfg.dim),
        "cls": w(1, cfg.dim),
        "head.w": w(cfg.dim, cfg.n_classes),
        "head.b": zeros(1, cfg.n_classes),
    }
    if cfg.rpe:
        p["rpe.ref"] = w(1, cfg.patch_dim)
        p["rpe.w1"] = w(cfg.patch_dim, cfg.rpe_hidden)
        p["rpe.b1"] = zeros(1, cfg.rpe_hidden)
        p["rpe.w2"] = w(cfg.rpe_hidden, cfg.dim)
        p["rpe.b2"] = zeros(1, cfg.dim)
    for i in range(cfg.depth):
        pre = f"layer{i}"
        p[f"{pre}.ln1.gamma"] = Tensor(np.ones((1, cfg.dim)))
        p[f"{pre}.ln1.beta"] = zeros(1, cfg.dim)
        for j in range(cfg.heads):
            for nm in ("wq", "wk", "wv"):
                p[f"{pre}.attn.h{j}.{nm}"] = w(cfg.dim, cfg.head_dim)
        p[f"{pre}.attn.wo"] = w(cfg.dim, cfg.dim)
        p[f"{pre}.ln2.gamma"] = Tensor(np.ones((1, cfg.dim)))
        p[f"{pre}.ln2.beta"] = zeros(1, cfg.dim)
        p[f"{pre}.ffn.w1"] = w(cfg.dim, cfg.ffn_dim)
        p[f"{pre}.ffn.b1"] = zeros(1, cfg.ffn_dim)
        p[f"{pre}.ffn.w2"] = w(cfg.ffn_dim, cfg.dim)
        p[f"{pre}.ffn.b2"] = zeros(1, cfg.dim)
    return p


def attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """softmax(q k^T / sqrt(dk)) v for one head."""
    dk = q.data.shape[1]
    scores = scale(matmul(q, transpose(k)), 1.0 / np.sqrt(dk))
    return matmul(softmax_rows(scores), v)


def msa(params: dict, prefix: str, z: Tensor, heads: int, trace=None) -> Tensor:
    """Multi-head self-attention; heads are separate projections, concatenated."""
    outs = []
    for j in range(heads):
        q = matmul(z, params[f"{prefix}.h{j}.wq"])
        k = matmul(z, params[f"{prefix}.h{j}.wk"])
        v = matmul(z, params[f"{prefix}.h{j}.wv"])
        dk = q.data.shape[1]
        weights = softmax_rows(scale(matmul(q, transpose(k)), 1.0 / np.sqrt(dk)))
        if trace is not None:
            trace.append(weights.data.copy())
        outs.append(matmul(weights, v))
    return matmul(concat_last_axis(outs), params[f"{prefix}.wo"])


def encoder_block(params: dict, prefix: str, z: Tensor, heads: int, trace=None) -> Tensor:
    """Pre-norm block: z' = MSA(LN(z)) + z ; out = FFN(LN(z')) + z'."""
    a = msa(params, f"{prefix}.attn",
            layer_norm(z, params[f"{prefix}.ln1.gamma"], params[f"{prefix}.ln1.beta"]),
            heads, trace=trace)
    zp = add(a, z)
    h = layer_norm(zp, params[f"{prefix}.ln2.gamma"], params[f"{prefix}.ln2.beta"])
    h = matmul(gelu(add(matmul(h, params[f"{prefix}.ffn.w1"]), params[f"{prefix}.ffn.b1"])),
               params[f"{prefix}.ffn.w2"])
    h = add(h, params[f"{prefix}.ffn.b2"])
    return add(h, zp)


def rpe(params: dict, x: Tensor) -> Tensor:
    """Reference-based positional features: sigmoid(mlp(x - ref)), one row per patch."""
    delta = add(x, scale(params["rpe.ref"], -1.0))
    h = gelu(add(matmul(delta, params["rpe.w1"]), params["rpe.b1"]))
    return sigmoid(add(matmul(h, params["rpe.w2"]), params["rpe.b2"]))


def _plain_ln(x: Tensor) -> Tensor:
    # affine-free: constant unit scale / zero shift, not trainable
    d = x.data.shape[1]
    return layer_norm(x, Tensor(np.ones((1, d))), Tensor(np.zeros((1, d))))


def _row0(z: Tensor) -> Tensor:
    n = z.data.shape[0]
    pick = np.zeros((1, n))
    pick[0, 0] = 1.0
    return matmul(Tensor(pick), z)


def encode(params: dict, cfg: ModelConfig, patches: np.ndarray, trace: dict | None = None) -> Tensor:
    """Run the encoder stack; returns the (N+1, D) token matrix after depth blocks.

    patches: float64 (N, patch_dim). When ``trace`` is a dict it receives
    "tokens" (per-block token matrices) and "attn" (per-block lists of
    per-head attention weight matrices), as numpy copies.
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 2 or patches.shape[1] != cfg.patch_dim:
        raise ShapeError(
            f"expected patch matrix (N, {cfg.patch_dim}), got {patches.shape}"
        )
    x = Tensor(patches)
    emb = add(matmul(x, params["embed.w"]), params["embed.b"])
    if cfg.rpe:
        emb = add(emb, rpe(params, x))
    z = concat_rows([params["cls"], emb])
    if trace is not None:
        trace["tokens"] = [z.data.copy()]
        trace["attn"] = []
    for i in range(cfg.depth):
        attn_trace = [] if trace is not None else None
        z = encoder_block(params, f"layer{i}", z, cfg.heads, trace=attn_trace)
        if trace is not None:
            trace["tokens"].append(z.data.copy())
            trace["attn"].append(attn_trace)
    return z


def forward(params: dict, cfg: ModelConfig, patches: np.ndarray, trace: dict | None = None) -> Tensor:
    """Logits (1, n_classes) from the normalized class token."""
    z = encode(params, cfg, patches, trace=trace)
    y = _plain_ln(_row0(z))
    return add(matmul(y, params["head.w"]), params["head.b"])


def loss_fn(params: dict, cfg: ModelConfig, patches: np.ndarray, label: int) -> Tensor:
    return cross_entropy(forward(params, cfg, patches), label)


def predict(params: dict, cfg: ModelConfig, patches: np.ndarray) -> int:
    return int(np.argmax(forward(params, cfg, patches).data))


def export_attention(params: dict, cfg: ModelConfig, patches: np.ndarray) -> list:
    """Attention weight matrices, one list of (N+1, N+1) arrays per block."""
    trace: dict = {}
    encode(params, cfg, patches, trace=trace)
    return trace["attn"]
