"""Experiment plumbing: synthetic data, toy training runs, leakage and sweeps.

Everything here is a pure function of (config, seeds). The dataset is ten
classes of colored geometric shapes on a dark noisy background — deliberately
separable from a bag of patches, since the whole point is to train on
shuffled/mixed inputs. A separate smooth-field corpus feeds the jigsaw
experiments, where seam continuity (not class structure) is what matters.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import pevit
from .attacks import Arrangement, jigsaw_solve, puzzle_metrics
from .cipher import (
    drop_patches,
    gen_key,
    mi_encrypt,
    mixed_values,
    quantize_mixed,
    rs_encrypt,
    rs_encrypt_mixed,
    spn_encrypt,
)
from .errors import ConfigError, DataError
from .imgio import HOLE, Image, assemble, split_patches
from .pevit import ModelConfig, _plain_ln, _row0, encoder_block
from .rng import SplitMix64
from .tensor import (
    Tensor,
    add,
    backward,
    concat_rows,
    cross_entropy,
    matmul,
    save_checkpoint,
    zero_grads,
)

# ten distinct bright colors, none close to white (the leakage marker is
# the only source of exact 255/255/255 pixels)
PALETTE = (
    (220, 40, 40), (40, 200, 60), (50, 80, 220), (230, 220, 50),
    (200, 50, 200), (60, 210, 210), (240, 140, 30), (130, 60, 200),
    (160, 220, 40), (240, 120, 160),
)

MARKER_SIZE = 8

ENC_MODES = ("none", "rs", "mi", "rs+mi", "mi+rs")


@dataclass(frozen=True)
class SynthSpec:
    image_size: int = 64
    classes: int = 10
    train_per_class: int = 500
    test_per_class: int = 100
    marker: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.classes <= len(PALETTE):
            raise ConfigError(f"classes must be in 1..{len(PALETTE)}")
        if self.image_size < 16:
            raise ConfigError("image_size must be at least 16")


@dataclass(frozen=True)
class Dataset:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray


def _shape_mask(kind: int, size: int, cx: float, cy: float, r: float) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    dx, dy = xx - cx, yy - cy
    if kind == 0:      # filled square
        return (np.abs(dx) <= r) & (np.abs(dy) <= r)
    if kind == 1:      # disc
        return dx * dx + dy * dy <= r * r
    if kind == 2:      # downward-widening triangle
        return (np.abs(dy) <= r) & (np.abs(dx) <= (dy + r) / 2.0)
    if kind == 3:      # plus sign
        bar = max(1.0, r / 3.0)
        return ((np.abs(dx) <= bar) & (np.abs(dy) <= r)) | (
            (np.abs(dy) <= bar) & (np.abs(dx) <= r)
        )
    # ring
    d2 = dx * dx + dy * dy
    return (d2 <= r * r) & (d2 >= (r / 2.0) ** 2)


def _render_sample(rng, spec: SynthSpec, cls: int) -> np.ndarray:
    s = spec.image_size
    img = rng.integers(6, 34, size=(s, s, 3))
    cx = rng.uniform(0.3 * s, 0.7 * s)
    cy = rng.uniform(0.3 * s, 0.7 * s)
    r = rng.uniform(0.16 * s, 0.3 * s)
    mask = _shape_mask(cls % 5, s, cx, cy, r)
    img[mask] = PALETTE[cls % len(PALETTE)]
    if spec.marker:
        mx = int(rng.integers(0, s - MARKER_SIZE + 1))
        my = int(rng.integers(0, s - MARKER_SIZE + 1))
        img[my : my + MARKER_SIZE, mx : mx + MARKER_SIZE] = 255
    return img.astype(np.uint8)


def gen_dataset(spec: SynthSpec) -> Dataset:
    """Balanced labeled train/test images, deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    train_x, train_y, test_x, test_y = [], [], [], []
    for cls in range(spec.classes):
        for i in range(spec.train_per_class + spec.test_per_class):
            img = _render_sample(rng, spec, cls)
            if i < spec.train_per_class:
                train_x.append(img)
                train_y.append(cls)
            else:
                test_x.append(img)
                test_y.append(cls)
    def stack(lst):
        if lst:
            return np.stack(lst)
        return np.zeros((0, spec.image_size, spec.image_size, 3), dtype=np.uint8)

    return Dataset(
        train_x=stack(train_x),
        train_y=np.asarray(train_y, dtype=np.int64),
        test_x=stack(test_x),
        test_y=np.asarray(test_y, dtype=np.int64),
    )


def _bilinear_upsample(field: np.ndarray, size: int) -> np.ndarray:
    """Upsample (h, w, c) to (size, size, c) with bilinear interpolation."""
    h, w = field.shape[:2]
    ys = np.linspace(0.0, h - 1.0, size)
    xs = np.linspace(0.0, w - 1.0, size)
    y0 = np.clip(ys.astype(int), 0, h - 2)
    x0 = np.clip(xs.astype(int), 0, w - 2)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    a = field[y0][:, x0]
    b = field[y0][:, x0 + 1]
    c = field[y0 + 1][:, x0]
    d = field[y0 + 1][:, x0 + 1]
    return (a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx
            + c * fy * (1 - fx) + d * fy * fx)


def gen_puzzle_corpus(n: int, image_size: int, seed: int = 0,
                      cell: int = 12, noise_amp: float = 8.0,
                      bowl_amp: float = 110.0, field_amp: float = 55.0) -> list:
    """Images with smooth low-frequency structure for the jigsaw experiments.

    Each image is a quadratic intensity bowl (globally unique levels, so no
    two distant regions look alike) plus a bilinearly upsampled coarse
    random field (one control point every ``cell`` pixels) plus mild pixel
    noise. Adjacent pixels correlate strongly, pixels a few steps apart
    much less — which is what makes seam matching work at interval 0 and
    fail as gap pixels are discarded. Deliberately no flat regions:
    constant areas produce zero-cost impostor seams that poison any
    boundary-based solver.
    """
    rng = np.random.default_rng(seed)
    coarse = max(2, image_size // cell)
    yy, xx = np.mgrid[0:image_size, 0:image_size].astype(np.float64)
    out = []
    for _ in range(n):
        cx, cy = rng.uniform(0.2 * image_size, 0.8 * image_size, 2)
        d2 = ((xx - cx) ** 2 + (yy - cy) ** 2) / (image_size * image_size / 2.0)
        bowl = bowl_amp * (1.0 - np.clip(d2, 0.0, 1.0))
        field = rng.uniform(-field_amp, field_amp, size=(coarse, coarse, 3))
        img = 60.0 + bowl[..., None] + _bilinear_upsample(field, image_size)
        img += rng.uniform(-noise_amp, noise_amp, size=img.shape)
        out.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
    return out


# --------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    epochs: int = 20
    batch: int = 1
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    encryption: str = "rs"
    patch_size: int = 16
    interval: int = 0
    drop_ratio: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1:
            raise ConfigError("epochs and batch must be >= 1")
        if not 0.0 <= self.drop_ratio < 1.0:
            raise ConfigError(f"drop_ratio must be in [0, 1), got {self.drop_ratio}")
        if self.interval < 0:
            raise ConfigError(f"interval must be >= 0, got {self.interval}")
        _enc_mode(self.encryption)


def _enc_mode(setting: str):
    """Parse an encryption setting into (kind, spn_rounds)."""
    if setting in ENC_MODES:
        return setting, 0
    if setting.startswith("spn:"):
        try:
            rounds = int(setting[4:])
        except ValueError:
            raise ConfigError(f"bad spn rounds in {setting!r}") from None
        if rounds < 1:
            raise ConfigError(f"spn rounds must be >= 1, got {rounds}")
        return "spn", rounds
    raise ConfigError(
        f"unknown encryption setting {setting!r}; "
        f"expected one of {ENC_MODES} or spn:<rounds>"
    )


def expected_patch_dim(patch_size: int, channels: int, encryption: str) -> int:
    """Width of one model token for the given encryption setting."""
    kind, _ = _enc_mode(encryption)
    if kind in ("none", "rs"):
        return patch_size * patch_size * channels
    return (patch_size // 2) ** 2 * channels


def image_vectors(pixels: np.ndarray, cfg: TrainConfig, rng: SplitMix64) -> np.ndarray:
    """Encrypt one image per cfg and flatten it to a token matrix.

    Key material is drawn from ``rng``, so consecutive calls see fresh
    permutations — the per-sample shuffle the training recipe requires.
    """
    kind, rounds = _enc_mode(cfg.encryption)
    grid = split_patches(Image(pixels=pixels), cfg.patch_size, cfg.interval)
    if cfg.drop_ratio > 0.0:
        if kind not in ("none", "rs"):
            raise ConfigError("drop_ratio is only supported for none/rs settings")
        grid = drop_patches(grid, cfg.drop_ratio, rng.next_u64())
    if kind == "none":
        pass
    elif kind == "rs":
        grid = rs_encrypt(grid, gen_key(rng.next_u64(), grid.n_patches))
    elif kind == "mi":
        grid = mi_encrypt(grid)
    elif kind == "rs+mi":
        grid = mi_encrypt(rs_encrypt(grid, gen_key(rng.next_u64(), grid.n_patches)))
    elif kind == "mi+rs":
        grid = rs_encrypt_mixed(mi_encrypt(grid),
                                gen_key(rng.next_u64(), grid.n_patches))
    else:
        grid = spn_encrypt(grid, rounds, rng.next_u64())

    if kind in ("none", "rs"):
        rowsv = [p.reshape(-1).astype(np.float64) / 255.0
                 for p in grid.patches if p is not HOLE]
    else:
        rowsv = [mixed_values(p).reshape(-1) for p in grid.patches]
    return np.stack(rowsv)


class Adam:
    """Adaptive-moment gradient step over a named parameter dict."""

    def __init__(self, params: dict, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name in sorted(self.params):
            p = self.params[name]
            g = p.grad
            if g is None:
                continue
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            mhat = self.m[name] / (1 - b1**self.t)
            vhat = self.v[name] / (1 - b2**self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
        zero_grads(self.params)


def _check_geometry(cfg: TrainConfig, images: np.ndarray) -> None:
    size, channels = images.shape[1], images.shape[3]
    if cfg.interval == 0 and size % cfg.patch_size:
        raise ConfigError(
            f"image size {size} not divisible by patch size {cfg.patch_size}"
        )
    want = expected_patch_dim(cfg.patch_size, channels, cfg.encryption)
    if cfg.model.patch_dim != want:
        raise ConfigError(
            f"model patch_dim {cfg.model.patch_dim} does not match "
            f"{want} for encryption {cfg.encryption!r}"
        )


def train(cfg: TrainConfig, data: Dataset, checkpoint=None):
    """Train the permutation-invariant classifier; returns (params, history).

    Deterministic given cfg.seed: parameter init, epoch shuffles, and all
    encryption keys come from seeded streams. history holds one row per
    epoch with the mean loss and the running train accuracy.
    """
    _check_geometry(cfg, data.train_x)
    params = pevit.init_params(cfg.model, seed=cfg.seed)
    opt = Adam(params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    key_rng = SplitMix64(cfg.seed)
    order_rng = np.random.default_rng(cfg.seed)
    n = data.train_x.shape[0]
    history = []
    for epoch in range(cfg.epochs):
        order = order_rng.permutation(n)
        total_loss = 0.0
        correct = 0
        pending = 0
        for img_i in order:
            x = image_vectors(data.train_x[img_i], cfg, key_rng)
            label = int(data.train_y[img_i])
            logits = pevit.forward(params, cfg.model, x)
            if int(np.argmax(logits.data)) == label:
                correct += 1
            loss = cross_entropy(logits, label)
            total_loss += float(loss.data)
            backward(loss)
            pending += 1
            if pending == cfg.batch:
                if cfg.batch > 1:
                    for p in params.values():
                        if p.grad is not None:
                            p.grad /= cfg.batch
                opt.step()
                pending = 0
        if pending:
            for p in params.values():
                if p.grad is not None:
                    p.grad /= pending
            opt.step()
        history.append({
            "epoch": epoch,
            "loss": total_loss / n,
            "accuracy": correct / n,
        })
    if checkpoint is not None:
        save_checkpoint(checkpoint, params)
    return params, history


def evaluate(params: dict, cfg: TrainConfig, images: np.ndarray,
             labels: np.ndarray, seed: int = 0) -> float:
    """Top-1 accuracy under the configured test-time encryption."""
    _check_geometry(cfg, images)
    rng = SplitMix64(seed)
    correct = 0
    for i in range(images.shape[0]):
        x = image_vectors(images[i], cfg, rng)
        if pevit.predict(params, cfg.model, x) == int(labels[i]):
            correct += 1
    return correct / images.shape[0]


def predictions(params: dict, cfg: TrainConfig, images: np.ndarray,
                seed: int = 0, model=None) -> np.ndarray:
    """Predicted labels per image; ``model`` overrides the forward function."""
    _check_geometry(cfg, images)
    rng = SplitMix64(seed)
    fwd = model if model is not None else (
        lambda p, c, x: pevit.forward(p, c, x)
    )
    out = np.empty(images.shape[0], dtype=np.int64)
    for i in range(images.shape[0]):
        x = image_vectors(images[i], cfg, rng)
        out[i] = int(np.argmax(fwd(params, cfg.model, x).data))
    return out


# --------------------------------------------------------------------------
# positive-control baseline: same encoder, plus learned absolute positions


def baseline_init(cfg: ModelConfig, n_patches: int, seed: int = 0) -> dict:
    """Classifier params with a learned positional row per token (cls + N)."""
    params = pevit.init_params(cfg, seed=seed)
    rng = np.random.default_rng([seed, 1])
    params["pos"] = Tensor(rng.normal(0.0, 0.02, size=(n_patches + 1, cfg.dim)))
    return params


def baseline_forward(params: dict, cfg: ModelConfig, patches: np.ndarray) -> Tensor:
    """Like pevit.forward but adds absolute positional embeddings, so the
    logits depend on patch order."""
    x = Tensor(np.asarray(patches, dtype=np.float64))
    emb = add(matmul(x, params["embed.w"]), params["embed.b"])
    z = concat_rows([params["cls"], emb])
    z = add(z, params["pos"])
    for i in range(cfg.depth):
        z = encoder_block(params, f"layer{i}", z, cfg.heads)
    y = _plain_ln(_row0(z))
    return add(matmul(y, params["head.w"]), params["head.b"])


# --------------------------------------------------------------------------
# gradient leakage, end to end


def gradleak_demo(pixels: np.ndarray, patch_size: int, seed: int = 0,
                  model_cfg: ModelConfig | None = None) -> dict:
    """Recover a patch from a single-token training gradient.

    The image is RS-encrypted, one patch token is pushed through the full
    classifier, and the embedding-weight gradient (rank one: the token
    times the upstream gradient) is inverted by power iteration. The
    recovered direction matches the *encrypted* patch at that slot, not
    the plaintext one — the attack sees through the model, not the cipher.
    """
    from .attacks import grad_leak_invert

    grid = split_patches(Image(pixels=pixels), patch_size, 0)
    key = gen_key(seed, grid.n_patches)
    enc = rs_encrypt(grid, key)
    x_cipher = enc.patches[0].reshape(-1).astype(np.float64) / 255.0
    x_plain = grid.patches[0].reshape(-1).astype(np.float64) / 255.0
    if model_cfg is None:
        model_cfg = ModelConfig(patch_dim=x_cipher.size, dim=32, depth=2,
                                heads=2, ffn_dim=64, n_classes=10)
    params = pevit.init_params(model_cfg, seed=seed)
    zero_grads(params)
    loss = cross_entropy(pevit.forward(params, model_cfg, x_cipher[None, :]), 0)
    backward(loss)
    recovered = grad_leak_invert(params["embed.w"].grad)

    def corr(a, b):
        if np.std(a) == 0 or np.std(b) == 0:
            return 0.0
        return float(np.corrcoef(a, b)[0, 1])

    return {
        "recovered": recovered,
        "cipher_patch": x_cipher,
        "plain_patch": x_plain,
        "corr_cipher": corr(recovered, x_cipher) if recovered is not None else 0.0,
        "corr_plain": corr(recovered, x_plain) if recovered is not None else 0.0,
        "slot_source": int(key.perm[0]),
    }


# --------------------------------------------------------------------------
# privacy leakage


def white_marker_count(pixels: np.ndarray) -> int:
    """Exact template detector: number of all-white 8x8 windows."""
    h, w = pixels.shape[:2]
    if h < MARKER_SIZE or w < MARKER_SIZE:
        return 0
    win = np.lib.stride_tricks.sliding_window_view(
        pixels, (MARKER_SIZE, MARKER_SIZE), axis=(0, 1)
    )
    return int((win == 255).all(axis=(2, 3, 4)).sum())


def encrypt_pixels(pixels: np.ndarray, encryption: str, patch_size: int,
                   rng: SplitMix64) -> np.ndarray:
    """Encrypt and reassemble an image back to pixels (interval 0 only)."""
    kind, rounds = _enc_mode(encryption)
    if kind == "none":
        return pixels.copy()
    grid = split_patches(Image(pixels=pixels), patch_size, 0)
    if kind == "rs":
        out = rs_encrypt(grid, gen_key(rng.next_u64(), grid.n_patches))
    elif kind == "mi":
        out = quantize_mixed(mi_encrypt(grid))
    elif kind == "rs+mi":
        out = quantize_mixed(
            mi_encrypt(rs_encrypt(grid, gen_key(rng.next_u64(), grid.n_patches)))
        )
    elif kind == "mi+rs":
        out = quantize_mixed(
            rs_encrypt_mixed(mi_encrypt(grid),
                             gen_key(rng.next_u64(), grid.n_patches))
        )
    else:
        out = quantize_mixed(spn_encrypt(grid, rounds, rng.next_u64()))
    return assemble(out).pixels


def leakage_ratio(detector, corpus, encryption: str, patch_size: int = 16,
                  seed: int = 0) -> float:
    """detections(encrypted corpus) / detections(original corpus)."""
    rng = SplitMix64(seed)
    base = 0
    enc = 0
    for pixels in corpus:
        base += detector(pixels)
        enc += detector(encrypt_pixels(pixels, encryption, patch_size, rng))
    if base == 0:
        raise DataError("no detections on the original corpus; ratio undefined")
    return enc / base


# --------------------------------------------------------------------------
# solver experiments and sweeps


def truth_for_key(key, rows: int, cols: int, encrypted_patches) -> Arrangement:
    """Ground-truth arrangement of an RS-shuffled patch list.

    Position i of the encrypted list holds original patch key.perm[i], whose
    true slot is its row-major position in the original grid.
    """
    placement = {}
    for i, p in enumerate(encrypted_patches):
        if p is HOLE:
            continue
        orig = key.perm[i]
        placement[(orig // cols, orig % cols)] = i
    return Arrangement(rows=rows, cols=cols, placement=placement)


def solve_image(pixels: np.ndarray, patch_size: int, interval: int,
                drop_ratio: float, seed: int) -> dict:
    """Shuffle one image, run the jigsaw solver, score against the truth."""
    rng = SplitMix64(seed)
    grid = split_patches(Image(pixels=pixels), patch_size, interval)
    if drop_ratio > 0.0:
        grid = drop_patches(grid, drop_ratio, rng.next_u64())
    key = gen_key(rng.next_u64(), grid.n_patches)
    enc = rs_encrypt(grid, key)
    found = jigsaw_solve(enc.patches, grid.rows, grid.cols)
    truth = truth_for_key(key, grid.rows, grid.cols, enc.patches)
    return puzzle_metrics(found, truth)


def solve_corpus(corpus, patch_size: int, interval: int = 0,
                 drop_ratio: float = 0.0, seed: int = 0) -> dict:
    """Mean solver metrics over a corpus, one fresh key per image."""
    rng = SplitMix64(seed)
    direct = []
    neighbor = []
    for pixels in corpus:
        m = solve_image(pixels, patch_size, interval, drop_ratio, rng.next_u64())
        direct.append(m["direct"])
        neighbor.append(m["neighbor"])
    return {
        "direct": float(np.mean(direct)),
        "neighbor": float(np.mean(neighbor)),
        "per_image_direct": direct,
        "per_image_neighbor": neighbor,
    }


@dataclass(frozen=True)
class SweepCell:
    patch_size: int
    interval: int = 0
    drop_ratio: float = 0.0
    image_size: int = 224


SWEEP_HEADER = "patch_size,interval,drop_ratio,image_size,solver_direct,solver_neighbor,model_accuracy"


def sweep(cells, seed: int = 0, corpus_size: int = 20,
          train_spec: SynthSpec | None = None,
          train_base: TrainConfig | None = None) -> list:
    """Security-vs-granularity table: solver accuracy per cell, and model
    accuracy when a training budget (spec + base config) is supplied."""
    rows = []
    for cell in cells:
        corpus = gen_puzzle_corpus(corpus_size, cell.image_size, seed=seed)
        solved = solve_corpus(corpus, cell.patch_size, cell.interval,
                              cell.drop_ratio, seed=seed)
        acc = float("nan")
        if train_spec is not None and train_base is not None:
            spec = dataclasses.replace(train_spec, image_size=cell.image_size)
            data = gen_dataset(spec)
            pdim = expected_patch_dim(cell.patch_size, 3, train_base.encryption)
            cfg = dataclasses.replace(
                train_base,
                patch_size=cell.patch_size,
                interval=cell.interval,
                drop_ratio=cell.drop_ratio,
                model=dataclasses.replace(
                    train_base.model, patch_dim=pdim, n_classes=spec.classes
                ),
            )
            params, _ = train(cfg, data)
            acc = evaluate(params, cfg, data.test_x, data.test_y, seed=seed)
        rows.append({
            "patch_size": cell.patch_size,
            "interval": cell.interval,
            "drop_ratio": cell.drop_ratio,
            "image_size": cell.image_size,
            "solver_direct": solved["direct"],
            "solver_neighbor": solved["neighbor"],
            "model_accuracy": acc,
        })
    return rows


def sweep_to_csv(rows) -> str:
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(
            f"{r['patch_size']},{r['interval']},{r['drop_ratio']:g},"
            f"{r['image_size']},{r['solver_direct']:.6f},"
            f"{r['solver_neighbor']:.6f},{r['model_accuracy']:.6f}"
        )
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# key=value config files


_BOOL = {"true": True, "false": False, "1": True, "0": False}


def parse_config_text(text: str) -> dict:
    """Line-based key=value parser; '#' starts a comment, blanks ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _get(d, key, conv, default):
    if key not in d:
        return default
    raw = d[key]
    try:
        if conv is bool:
            return _BOOL[raw.lower()]
        return conv(raw)
    except (ValueError, KeyError):
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


_KNOWN_KEYS = {
    "data.image_size", "data.classes", "data.train_per_class",
    "data.test_per_class", "data.marker", "data.seed",
    "model.dim", "model.depth", "model.heads", "model.ffn_dim",
    "model.rpe", "model.rpe_hidden",
    "train.epochs", "train.batch", "train.lr", "train.seed",
    "enc.mode", "enc.patch_size", "enc.interval", "enc.drop_ratio",
}


def config_specs(d: dict) -> tuple:
    """Build (SynthSpec, TrainConfig) from a parsed key=value dict."""
    unknown = set(d) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    spec = SynthSpec(
        image_size=_get(d, "data.image_size", int, 64),
        classes=_get(d, "data.classes", int, 10),
        train_per_class=_get(d, "data.train_per_class", int, 500),
        test_per_class=_get(d, "data.test_per_class", int, 100),
        marker=_get(d, "data.marker", bool, False),
        seed=_get(d, "data.seed", int, 0),
    )
    encryption = _get(d, "enc.mode", str, "rs")
    patch_size = _get(d, "enc.patch_size", int, 16)
    model = ModelConfig(
        patch_dim=expected_patch_dim(patch_size, 3, encryption),
        dim=_get(d, "model.dim", int, 64),
        depth=_get(d, "model.depth", int, 4),
        heads=_get(d, "model.heads", int, 4),
        ffn_dim=_get(d, "model.ffn_dim", int, 256),
        n_classes=spec.classes,
        rpe=_get(d, "model.rpe", bool, False),
        rpe_hidden=_get(d, "model.rpe_hidden", int, 64),
    )
    cfg = TrainConfig(
        model=model,
        epochs=_get(d, "train.epochs", int, 20),
        batch=_get(d, "train.batch", int, 1),
        lr=_get(d, "train.lr", float, 1e-3),
        encryption=encryption,
        patch_size=patch_size,
        interval=_get(d, "enc.interval", int, 0),
        drop_ratio=_get(d, "enc.drop_ratio", float, 0.0),
        seed=_get(d, "train.seed", int, 0),
    )
    return spec, cfg
