"""Bit-exact image I/O and decomposition into (sub-)patch grids.

Only binary netpbm rasters (P6 color / P5 gray, maxval 255) are supported:
they roundtrip byte-for-byte, which every encryption test here depends on.
Images are HxWxC uint8 arrays in row-major (row, column, channel) order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DecodeError, GeometryError

HOLE = None  # marker for a dropped patch inside a PatchGrid


@dataclass(frozen=True)
class Image:
    """8-bit raster; ``pixels`` has shape (height, width, channels)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3:
            raise GeometryError(f"pixels must be HxWxC, got shape {px.shape}")
        if px.shape[2] not in (1, 3):
            raise GeometryError(f"channels must be 1 or 3, got {px.shape[2]}")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class PatchGrid:
    """Row-major sequence of equally-sized square patches plus grid geometry.

    Each entry of ``patches`` is a (patch_size, patch_size, channels) uint8
    array, or HOLE for a dropped patch. ``interval`` records the pixel gap
    that was skipped between patches when the grid was cut.
    """

    rows: int
    cols: int
    patch_size: int
    channels: int
    interval: int
    patches: tuple

    def __post_init__(self):
        if len(self.patches) != self.rows * self.cols:
            raise GeometryError(
                f"expected {self.rows * self.cols} patches, got {len(self.patches)}"
            )
        shape = (self.patch_size, self.patch_size, self.channels)
        for i, p in enumerate(self.patches):
            if p is HOLE:
                continue
            if p.shape != shape or p.dtype != np.uint8:
                raise GeometryError(f"patch {i} has shape {p.shape}, expected {shape}")

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols

    def hole_count(self) -> int:
        return sum(1 for p in self.patches if p is HOLE)


def _read_token(data: bytes, pos: int, field: str):
    """Next whitespace-delimited header token, skipping '#' comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise DecodeError(f"unterminated comment while reading {field}")
            pos = nl + 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise DecodeError(f"truncated header: missing {field}")
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def load_ppm(path) -> Image:
    """Load a binary PPM (P6) or PGM (P5) file with maxval 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _read_token(data, 0, "magic")
    if magic == b"P6":
        channels = 3
    elif magic == b"P5":
        channels = 1
    else:
        raise DecodeError(f"magic must be P6 or P5, got {magic!r}")
    fields = {}
    for field in ("width", "height", "maxval"):
        token, pos = _read_token(data, pos, field)
        try:
            fields[field] = int(token)
        except ValueError:
            raise DecodeError(f"{field} is not an integer: {token!r}") from None
    width, height, maxval = fields["width"], fields["height"], fields["maxval"]
    if width <= 0 or height <= 0:
        raise DecodeError(f"width/height must be positive, got {width}x{height}")
    if maxval != 255:
        raise DecodeError(f"maxval must be 255, got {maxval}")
    # exactly one whitespace byte separates the header from the payload
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise DecodeError("missing whitespace after maxval")
    pos += 1
    expected = height * width * channels
    payload = data[pos : pos + expected]
    if len(payload) != expected:
        raise DecodeError(
            f"truncated payload: expected {expected} bytes, got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return Image(pixels=pixels)


def save_ppm(img: Image, path) -> None:
    """Write ``img`` with the canonical single-whitespace header.

    P6 for 3-channel images, P5 for 1-channel; load_ppm inverts the result
    exactly.
    """
    magic = b"P6" if img.channels == 3 else b"P5"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.pixels.tobytes())


def split_patches(img: Image, patch_size: int, interval: int = 0) -> PatchGrid:
    """Cut ``img`` into square patches of side ``patch_size``.

    Patches are sampled at stride patch_size + interval starting at (0, 0);
    pixels inside the gaps are discarded and never enter the grid. With
    interval 0 the image sides must be exact multiples of patch_size.
    """
    h, w = img.height, img.width
    if patch_size < 2:
        raise GeometryError(f"patch_size must be >= 2, got {patch_size}")
    if interval < 0:
        raise GeometryError(f"interval must be >= 0, got {interval}")
    if patch_size > min(h, w):
        raise GeometryError(
            f"patch_size {patch_size} exceeds image dimensions {h}x{w}"
        )
    if interval == 0 and (h % patch_size or w % patch_size):
        raise GeometryError(
            f"image {h}x{w} not divisible by patch_size {patch_size} with interval 0"
        )
    stride = patch_size + interval
    rows = (h - patch_size) // stride + 1
    cols = (w - patch_size) // stride + 1
    patches = []
    for r in range(rows):
        for c in range(cols):
            y, x = r * stride, c * stride
            patches.append(img.pixels[y : y + patch_size, x : x + patch_size].copy())
    return PatchGrid(
        rows=rows,
        cols=cols,
        patch_size=patch_size,
        channels=img.channels,
        interval=interval,
        patches=tuple(patches),
    )


def assemble(grid: PatchGrid) -> Image:
    """Reassemble a gap-free, hole-free grid into an image.

    Inverse of split_patches for interval 0; gaps discard pixels, so grids
    with interval > 0 cannot be assembled.
    """
    if grid.interval != 0:
        raise GeometryError(
            f"cannot assemble a grid with interval {grid.interval}: gap pixels were discarded"
        )
    if grid.hole_count():
        raise GeometryError(f"cannot assemble a grid with {grid.hole_count()} holes")
    p = grid.patch_size
    out = np.empty(
        (grid.rows * p, grid.cols * p, grid.channels), dtype=np.uint8
    )
    for i, patch in enumerate(grid.patches):
        r, c = divmod(i, grid.cols)
        out[r * p : (r + 1) * p, c * p : (c + 1) * p] = patch
    return Image(pixels=out)


def split_subpatches(patch: np.ndarray):
    """Quarter a patch into [top-left, top-right, bottom-left, bottom-right]."""
    p = patch.shape[0]
    if p % 2:
        raise GeometryError(f"patch size must be even to form sub-patches, got {p}")
    half = p // 2
    return [
        patch[:half, :half].copy(),
        patch[:half, half:].copy(),
        patch[half:, :half].copy(),
        patch[half:, half:].copy(),
    ]


def join_subpatches(subs) -> np.ndarray:
    """Inverse of split_subpatches: reassemble the four quadrants."""
    if len(subs) != 4:
        raise GeometryError(f"expected 4 sub-patches, got {len(subs)}")
    top = np.concatenate([subs[0], subs[1]], axis=1)
    bottom = np.concatenate([subs[2], subs[3]], axis=1)
    return np.concatenate([top, bottom], axis=0)
