"""Patch-level encryption: keyed shuffling, sub-patch mixing, and their
alternation in a substitution-permutation style.

Shuffling permutes whole patches under a seeded key (the secret); mixing
replaces each patch by the elementwise mean of its four quadrants, scaled
to [0, 1]. Mixed patches keep their grid position and are stored at full
patch size with the mean tiled into all four quadrants, so a mixed grid
still renders at the original image size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, KeyMismatchError
from .imgio import HOLE, PatchGrid
from .rng import SplitMix64

KEY_MAGIC = "PICRYPT-KEY 1"


@dataclass(frozen=True)
class PermutationKey:
    """Seeded permutation of ``n`` patch indices; the shuffling secret."""

    n: int
    perm: tuple
    seed: int

    def __post_init__(self):
        if sorted(self.perm) != list(range(self.n)):
            raise KeyMismatchError(f"perm is not a bijection on 0..{self.n - 1}")

    def inverse(self) -> np.ndarray:
        inv = np.empty(self.n, dtype=np.int64)
        inv[np.asarray(self.perm)] = np.arange(self.n)
        return inv


@dataclass(frozen=True)
class MixedGrid:
    """Grid of real-valued mixed patches, values in [0, 1].

    Geometry mirrors PatchGrid; every patch is (patch_size, patch_size,
    channels) float64 holding the quadrant mean tiled 2x2.
    """

    rows: int
    cols: int
    patch_size: int
    channels: int
    patches: tuple

    def __post_init__(self):
        if len(self.patches) != self.rows * self.cols:
            raise GeometryError(
                f"expected {self.rows * self.cols} patches, got {len(self.patches)}"
            )

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols


def gen_key(seed: int, n: int) -> PermutationKey:
    """Derive an n-element permutation from ``seed`` by Fisher-Yates.

    Walks i = n-1 down to 1, drawing j uniformly from [0, i] off one
    SplitMix64 stream, so a (seed, n) pair always yields the same key.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = SplitMix64(seed)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.next_below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return PermutationKey(n=n, perm=tuple(perm), seed=seed)


def rs_encrypt(grid: PatchGrid, key: PermutationKey) -> PatchGrid:
    """Shuffle patches: output position i receives input patch perm[i]."""
    if key.n != grid.n_patches:
        raise KeyMismatchError(
            f"key is for {key.n} patches, grid has {grid.n_patches}"
        )
    patches = tuple(grid.patches[key.perm[i]] for i in range(key.n))
    return PatchGrid(
        rows=grid.rows,
        cols=grid.cols,
        patch_size=grid.patch_size,
        channels=grid.channels,
        interval=grid.interval,
        patches=patches,
    )


def rs_decrypt(grid: PatchGrid, key: PermutationKey) -> PatchGrid:
    """Exact inverse of rs_encrypt for the same key."""
    if key.n != grid.n_patches:
        raise KeyMismatchError(
            f"key is for {key.n} patches, grid has {grid.n_patches}"
        )
    inv = key.inverse()
    patches = tuple(grid.patches[inv[i]] for i in range(key.n))
    return PatchGrid(
        rows=grid.rows,
        cols=grid.cols,
        patch_size=grid.patch_size,
        channels=grid.channels,
        interval=grid.interval,
        patches=patches,
    )


def _mix_patch(patch: np.ndarray) -> np.ndarray:
    """Average the four quadrants of a real-valued patch and tile the mean."""
    p = patch.shape[0]
    half = p // 2
    mean = 0.25 * (
        patch[:half, :half]
        + patch[:half, half:]
        + patch[half:, :half]
        + patch[half:, half:]
    )
    return np.tile(mean, (2, 2, 1))


def mi_encrypt(grid: PatchGrid) -> MixedGrid:
    """Mix each patch: quadrants scaled to [0, 1] and averaged elementwise.

    Patch positions are preserved; only within-patch content is destroyed.
    The mean is tiled back to full patch size.
    """
    if grid.patch_size % 2:
        raise GeometryError(
            f"patch_size must be even for mixing, got {grid.patch_size}"
        )
    if grid.hole_count():
        raise GeometryError("cannot mix a grid with holes")
    patches = tuple(
        _mix_patch(p.astype(np.float64) / 255.0) for p in grid.patches
    )
    return MixedGrid(
        rows=grid.rows,
        cols=grid.cols,
        patch_size=grid.patch_size,
        channels=grid.channels,
        patches=patches,
    )


def rs_encrypt_mixed(grid: MixedGrid, key: PermutationKey) -> MixedGrid:
    """Shuffle mixed patches with the same convention as rs_encrypt."""
    if key.n != grid.n_patches:
        raise KeyMismatchError(
            f"key is for {key.n} patches, grid has {grid.n_patches}"
        )
    patches = tuple(grid.patches[key.perm[i]] for i in range(key.n))
    return MixedGrid(
        rows=grid.rows,
        cols=grid.cols,
        patch_size=grid.patch_size,
        channels=grid.channels,
        patches=patches,
    )


def mixed_values(patch: np.ndarray) -> np.ndarray:
    """The distinct content of a tiled mixed patch: its top-left quadrant."""
    half = patch.shape[0] // 2
    return patch[:half, :half]


def spn_encrypt(grid: PatchGrid, rounds: int, seed: int) -> MixedGrid:
    """Alternate shuffling (permutation role) and mixing (substitution role).

    Every round shuffles then mixes; sub-key seeds come off one SplitMix64
    stream. The first shuffle permutes whole patches. Later rounds permute
    at half-patch granularity so that content crosses patch boundaries
    before being averaged again, otherwise repeated rounds would never mix
    anything new. Intermediate grids stay real-valued throughout; nothing
    is re-quantized between rounds.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if grid.patch_size % 2:
        raise GeometryError(
            f"patch_size must be even for mixing, got {grid.patch_size}"
        )
    if grid.hole_count():
        raise GeometryError("cannot mix a grid with holes")
    master = SplitMix64(seed)
    n = grid.n_patches

    key0 = gen_key(master.next_u64(), n)
    shuffled = rs_encrypt(grid, key0)
    state = [p.astype(np.float64) / 255.0 for p in shuffled.patches]
    state = [_mix_patch(p) for p in state]

    half = grid.patch_size // 2
    sub_rows, sub_cols = 2 * grid.rows, 2 * grid.cols
    for _ in range(1, rounds):
        sub_key = gen_key(master.next_u64(), 4 * n)
        units = []
        for r in range(sub_rows):
            for c in range(sub_cols):
                patch = state[(r // 2) * grid.cols + (c // 2)]
                units.append(
                    patch[(r % 2) * half : (r % 2 + 1) * half,
                          (c % 2) * half : (c % 2 + 1) * half]
                )
        units = [units[sub_key.perm[i]] for i in range(4 * n)]
        new_state = []
        for pr in range(grid.rows):
            for pc in range(grid.cols):
                quads = [
                    units[(2 * pr + dr) * sub_cols + (2 * pc + dc)]
                    for dr in (0, 1)
                    for dc in (0, 1)
                ]
                mean = 0.25 * (quads[0] + quads[1] + quads[2] + quads[3])
                new_state.append(np.tile(mean, (2, 2, 1)))
        state = new_state

    return MixedGrid(
        rows=grid.rows,
        cols=grid.cols,
        patch_size=grid.patch_size,
        channels=grid.channels,
        patches=tuple(state),
    )


def quantize_mixed(grid: MixedGrid) -> PatchGrid:
    """Export a mixed grid as 8-bit patches (round half to even).

    Only for producing a viewable image; all model-facing paths keep the
    real values.
    """
    patches = tuple(
        np.rint(np.clip(p, 0.0, 1.0) * 255.0).astype(np.uint8) for p in grid.patches
    )
    return PatchGrid(
        rows=grid.rows,
        cols=grid.cols,
        patch_size=grid.patch_size,
        channels=grid.channels,
        interval=0,
        patches=patches,
    )


def keyspace(n: int) -> int:
    """Number of distinct shuffling keys for n patches: exactly n!."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return math.factorial(n)


def drop_patches(grid: PatchGrid, ratio: float, seed: int) -> PatchGrid:
    """Replace floor(ratio * n) distinct patches by holes.

    Hole positions come from a partial Fisher-Yates draw on a SplitMix64
    stream seeded with ``seed``: position k swaps index k with a uniform
    pick from [k, n), and the first floor(ratio * n) indices become holes.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"ratio must be in [0, 1), got {ratio}")
    n = grid.n_patches
    k = int(ratio * n)
    if k == 0:
        return grid
    rng = SplitMix64(seed)
    idx = list(range(n))
    for i in range(k):
        j = i + rng.next_below(n - i)
        idx[i], idx[j] = idx[j], idx[i]
    holes = set(idx[:k])
    patches = tuple(
        HOLE if i in holes else p for i, p in enumerate(grid.patches)
    )
    return PatchGrid(
        rows=grid.rows,
        cols=grid.cols,
        patch_size=grid.patch_size,
        channels=grid.channels,
        interval=grid.interval,
        patches=patches,
    )


def save_key(key: PermutationKey, path) -> None:
    """Write a key file: magic line, n, seed, comma-separated permutation."""
    lines = [
        KEY_MAGIC,
        f"n={key.n}",
        f"seed={key.seed}",
        "perm=" + ",".join(str(i) for i in key.perm),
    ]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_key(path) -> PermutationKey:
    """Read a key file, verifying the permutation against its (seed, n)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != KEY_MAGIC:
        raise KeyMismatchError(f"bad key file magic: {lines[0] if lines else '<empty>'!r}")
    fields = {}
    for ln in lines[1:4]:
        if "=" not in ln:
            raise KeyMismatchError(f"malformed key line: {ln!r}")
        k, v = ln.split("=", 1)
        fields[k] = v
    try:
        n = int(fields["n"])
        seed = int(fields["seed"])
        perm = tuple(int(t) for t in fields["perm"].split(","))
    except (KeyError, ValueError) as exc:
        raise KeyMismatchError(f"malformed key file: {exc}") from None
    expected = gen_key(seed, n)
    if perm != expected.perm:
        raise KeyMismatchError("perm does not match the stated (seed, n)")
    return expected
