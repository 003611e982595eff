"""Adversary suite for the patch ciphers.

Three attacks, each matched to what it can and cannot recover:

* jigsaw: greedy kernel-growing solver that undoes patch shuffling when
  seams carry signal; degrades once gap pixels are discarded between
  patches (interval > 0).
* gradient leakage: for a single patch token through a linear embedding,
  the weight gradient is the rank-one outer product of the input and the
  output gradient, so the input direction is recoverable in closed form —
  but from an encrypted input it recovers the ciphertext patch, not the
  plaintext.
* mixing collision: constructs distinct sub-patch sets with the same mean,
  demonstrating that inverting the mix is ill-posed even with the key.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ShapeError
from .imgio import HOLE
from .rng import SplitMix64

# relation ranks used by the solver's tie-breaking, in pinned order
_REL_RANK = {"right": 0, "below": 1, "left": 2, "above": 3}


@dataclass(frozen=True)
class Arrangement:
    """A placement of patch indices into a rows x cols slot grid.

    placement maps (row, col) -> patch index; missing slots are empty.
    """

    rows: int
    cols: int
    placement: dict = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for (r, c), i in self.placement.items():
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise GeometryError(f"slot ({r}, {c}) outside {self.rows}x{self.cols}")
            if i in seen:
                raise GeometryError(f"patch {i} placed twice")
            seen.add(i)

    def slot_of(self) -> dict:
        return {i: rc for rc, i in self.placement.items()}


def identity_arrangement(rows: int, cols: int, indices=None) -> Arrangement:
    """Each patch index at its row-major slot; restrict to ``indices`` if given."""
    keep = set(range(rows * cols)) if indices is None else set(indices)
    placement = {(i // cols, i % cols): i for i in sorted(keep)}
    return Arrangement(rows=rows, cols=cols, placement=placement)


def _norm_patch(p: np.ndarray) -> np.ndarray:
    a = np.asarray(p)
    if a.dtype == np.uint8:
        return a.astype(np.float64) / 255.0
    return a.astype(np.float64)


def edge_dissimilarity(a, b, relation: str) -> float:
    """Boundary SSD across the seam between two patches, pixels in [0, 1].

    relation "right": b sits right of a (a's last column vs b's first);
    relation "below": b sits below a (a's last row vs b's first row).
    """
    pa, pb = _norm_patch(a), _norm_patch(b)
    if pa.shape != pb.shape:
        raise ShapeError(f"patch shapes differ: {pa.shape} vs {pb.shape}")
    if relation == "right":
        diff = pa[:, -1, :] - pb[:, 0, :]
    elif relation == "below":
        diff = pa[-1, :, :] - pb[0, :, :]
    else:
        raise ValueError(f"unknown relation {relation!r}")
    return float((diff * diff).sum())


def _dissimilarity_tables(patches: np.ndarray):
    """D_right[i, j] = cost of j right of i; D_below[i, j] = j below i."""
    n = patches.shape[0]
    last_col = patches[:, :, -1, :].reshape(n, -1)
    first_col = patches[:, :, 0, :].reshape(n, -1)
    last_row = patches[:, -1, :, :].reshape(n, -1)
    first_row = patches[:, 0, :, :].reshape(n, -1)
    d_right = ((last_col[:, None, :] - first_col[None, :, :]) ** 2).sum(axis=2)
    d_below = ((last_row[:, None, :] - first_row[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d_right, np.inf)
    np.fill_diagonal(d_below, np.inf)
    return d_right, d_below


def jigsaw_solve(patches, rows: int, cols: int) -> Arrangement:
    """Greedy kernel-growing placement of shuffled patches.

    Seeds with the globally minimal dissimilarity pair, then repeatedly
    places the unplaced patch with the smallest dissimilarity summed over
    its already-placed neighbors, keeping the kernel's bounding box within
    rows x cols. Ties break by lower patch index, then relation order
    right/below/left/above, then slot coordinates, so results are
    deterministic. Holes in the input are simply never placed.
    """
    idx_map = [i for i, p in enumerate(patches) if p is not HOLE]
    n = len(idx_map)
    if n > rows * cols:
        raise GeometryError(f"{n} patches cannot fit {rows}x{cols} slots")
    if n == 0:
        return Arrangement(rows=rows, cols=cols, placement={})
    stack = np.stack([_norm_patch(patches[i]) for i in idx_map])
    if n == 1:
        return Arrangement(rows=rows, cols=cols, placement={(0, 0): idx_map[0]})

    d_right, d_below = _dissimilarity_tables(stack)

    # seed: minimal pair over both relations; tie key (score, i, j, relation)
    best = None
    for rel, table in (("right", d_right), ("below", d_below)):
        lo = table.min()
        ii, jj = np.unravel_index(np.argmin(table), table.shape)
        key = (lo, int(ii), int(jj), _REL_RANK[rel])
        if best is None or key < best:
            best = key
    _, si, sj, srel = best
    placed = {(0, 0): si}
    if srel == _REL_RANK["right"]:
        placed[(0, 1)] = sj
    else:
        placed[(1, 0)] = sj
    unplaced = np.ones(n, dtype=bool)
    unplaced[si] = unplaced[sj] = False

    while unplaced.any():
        lo_r = min(r for r, _ in placed)
        hi_r = max(r for r, _ in placed)
        lo_c = min(c for _, c in placed)
        hi_c = max(c for _, c in placed)
        free = np.flatnonzero(unplaced)

        # frontier: empty slots adjacent to the kernel, bounding box permitting
        frontier = {}
        for (r, c) in placed:
            for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                s = (r + dr, c + dc)
                if s in placed or s in frontier:
                    continue
                height = max(hi_r, s[0]) - min(lo_r, s[0]) + 1
                width = max(hi_c, s[1]) - min(lo_c, s[1]) + 1
                if height <= rows and width <= cols:
                    frontier[s] = True

        best = None
        for (r, c) in sorted(frontier):
            score = np.zeros(len(free))
            rel_rank = 4
            for rel, (nr, nc) in (
                ("right", (r, c - 1)),   # neighbor to the left, slot right of it
                ("below", (r - 1, c)),   # neighbor above, slot below it
                ("left", (r, c + 1)),    # neighbor to the right
                ("above", (r + 1, c)),   # neighbor underneath
            ):
                if (nr, nc) not in placed:
                    continue
                q = placed[(nr, nc)]
                if rel == "right":
                    score += d_right[q, free]
                elif rel == "below":
                    score += d_below[q, free]
                elif rel == "left":
                    score += d_right[free, q]
                else:
                    score += d_below[free, q]
                rel_rank = min(rel_rank, _REL_RANK[rel])
            k = int(np.argmin(score))  # first occurrence = lowest patch index
            key = (float(score[k]), int(free[k]), rel_rank, r, c)
            if best is None or key < best:
                best = key
        _, pick, _, r, c = best
        placed[(r, c)] = pick
        unplaced[pick] = False

    lo_r = min(r for r, _ in placed)
    lo_c = min(c for _, c in placed)
    placement = {
        (r - lo_r, c - lo_c): idx_map[i] for (r, c), i in placed.items()
    }
    return Arrangement(rows=rows, cols=cols, placement=placement)


def puzzle_metrics(found: Arrangement, truth: Arrangement) -> dict:
    """direct: best-translation fraction of exact slots; neighbor: preserved
    adjacent pairs with the same relation."""
    if (found.rows, found.cols) != (truth.rows, truth.cols):
        raise GeometryError(
            f"geometry mismatch: {found.rows}x{found.cols} vs {truth.rows}x{truth.cols}"
        )
    t_slot = truth.slot_of()
    f_slot = found.slot_of()
    common = [i for i in t_slot if i in f_slot]
    total = len(t_slot)
    direct = 0.0
    if common and total:
        shifts = {}
        for i in common:
            tr, tc = t_slot[i]
            fr, fc = f_slot[i]
            d = (tr - fr, tc - fc)
            shifts[d] = shifts.get(d, 0) + 1
        direct = max(shifts.values()) / total

    pairs = 0
    kept = 0
    for (r, c), i in truth.placement.items():
        for rel, s in (("right", (r, c + 1)), ("below", (r + 1, c))):
            if s not in truth.placement:
                continue
            j = truth.placement[s]
            pairs += 1
            if i not in f_slot or j not in f_slot:
                continue
            fr, fc = f_slot[i]
            want = (fr, fc + 1) if rel == "right" else (fr + 1, fc)
            if f_slot[j] == want:
                kept += 1
    neighbor = kept / pairs if pairs else 1.0
    return {"direct": direct, "neighbor": neighbor}


def dump_arrangement(arr: Arrangement, metrics: dict | None = None) -> str:
    """Text form: one "slot r c -> patch i" line per filled slot, then metrics."""
    lines = [
        f"slot {r} {c} -> patch {arr.placement[(r, c)]}"
        for r, c in sorted(arr.placement)
    ]
    if metrics is not None:
        lines.append(f"direct={metrics['direct']:.6f}")
        lines.append(f"neighbor={metrics['neighbor']:.6f}")
    return "\n".join(lines) + "\n"


def grad_leak_invert(grad_e: np.ndarray, iters: int = 100, tol: float = 1e-10):
    """Dominant left singular direction of an embedding-weight gradient.

    For a loss over exactly one patch token through a linear embedding E,
    dL/dE = x g^T is rank one and the returned unit vector equals x/|x|.
    Power iteration on G G^T from a ones start; sign fixed so the
    largest-magnitude entry is positive. Returns None for a zero gradient.
    """
    g = np.asarray(grad_e, dtype=np.float64)
    if g.ndim != 2:
        raise ShapeError(f"expected a 2-D gradient matrix, got {g.shape}")
    if not np.any(g):
        return None
    m = g @ g.T
    v = np.ones(m.shape[0]) / np.sqrt(m.shape[0])
    for _ in range(iters):
        w = m @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return None
        w /= norm
        if np.linalg.norm(w - v) < tol:
            v = w
            break
        v = w
    peak = int(np.argmax(np.abs(v)))
    if v[peak] < 0:
        v = -v
    return v


def mi_collision(mixed: np.ndarray, seed: int, amplitude: float = 0.25):
    """Four sub-patches distinct from any original set whose mean is ``mixed``.

    Perturbations d1..d3 are PRNG-drawn in [-amplitude, amplitude] and
    d4 = -(d1 + d2 + d3), so the mean reproduces the ciphertext exactly;
    values may leave [0, 1] — the point is algebraic non-uniqueness.
    """
    m = np.asarray(mixed, dtype=np.float64)
    rng = SplitMix64(seed)
    deltas = []
    for _ in range(3):
        d = np.empty(m.size)
        for k in range(m.size):
            d[k] = (rng.next_unit() * 2.0 - 1.0) * amplitude
        deltas.append(d.reshape(m.shape))
    deltas.append(-(deltas[0] + deltas[1] + deltas[2]))
    return tuple(m + d for d in deltas)
