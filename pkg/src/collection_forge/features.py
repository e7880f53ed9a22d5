"""Per-image feature units and the schema defining the group layout.

Images are represented by a concatenation of named feature units; the
unit boundaries define the groups used for group-sparse coding and the
blocks of the block-diagonal dictionary.  Three unit extractors are
built in (tiny image, LAB joint color histogram, a compact HOG), and
the registry is open so any unit count >= 2 works downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidImage, ParseError, SchemaMismatch

TINY_SIDE = 16
TINY_DIM = TINY_SIDE * TINY_SIDE * 3            # 768
LABHIST_GRID = 2                                 # 2x2 spatial cells
LABHIST_BINS = (4, 7, 7)                         # joint L, a, b quantization
LABHIST_DIM = LABHIST_GRID * LABHIST_GRID * 4 * 7 * 7   # 784
HOG_SIDE = 64
HOG_CELL = 8
HOG_ORIENTATIONS = 9
HOG_BLOCKS = HOG_SIDE // HOG_CELL - 1            # 7x7 sliding 2x2-cell blocks
HOG_DIM = HOG_BLOCKS * HOG_BLOCKS * 4 * HOG_ORIENTATIONS  # 1764


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered list of (unit name, dimension) pairs."""

    units: tuple

    def __post_init__(self):
        units = tuple((str(n), int(d)) for n, d in self.units)
        object.__setattr__(self, "units", units)
        names = [n for n, _ in units]
        if not units:
            raise SchemaMismatch("schema needs at least one unit")
        if len(set(names)) != len(names):
            raise SchemaMismatch(f"duplicate unit names in {names}")
        if any(d < 1 for _, d in units):
            raise SchemaMismatch("all unit dims must be >= 1")

    @property
    def unit_count(self) -> int:
        return len(self.units)

    @property
    def total_dim(self) -> int:
        return sum(d for _, d in self.units)

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.units)

    def spans(self) -> list:
        """Contiguous (start, stop) index span of each unit in the feature vector."""
        out, off = [], 0
        for _, d in self.units:
            out.append((off, off + d))
            off += d
        return out

    def group_spans(self, atoms_per_unit: int) -> list:
        """(start, stop) spans of each unit's block in coefficient space."""
        return [
            (k * atoms_per_unit, (k + 1) * atoms_per_unit)
            for k in range(self.unit_count)
        ]

    def to_manifest(self) -> dict:
        return {"units": [{"name": n, "dim": d} for n, d in self.units]}

    @classmethod
    def from_manifest(cls, manifest: dict) -> "FeatureSchema":
        return cls(tuple((u["name"], u["dim"]) for u in manifest["units"]))

    @classmethod
    def default(cls) -> "FeatureSchema":
        return cls((("tiny", TINY_DIM), ("labhist", LABHIST_DIM), ("hoglite", HOG_DIM)))


@dataclass(frozen=True)
class ImageFeature:
    image_id: str
    values: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class RasterImage:
    """8-bit RGB raster, pixels shaped (height, width, 3)."""

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if self.width <= 0 or self.height <= 0:
            raise InvalidImage(f"zero-area image {self.width}x{self.height}")
        if px.shape != (self.height, self.width, 3):
            raise InvalidImage(f"pixel buffer shape {px.shape} does not match "
                               f"{self.height}x{self.width}x3")
        object.__setattr__(self, "pixels", px)


def load_ppm(data: bytes) -> RasterImage:
    """Parse a binary PPM (P6, maxval 255).  Comments after tokens are honored."""
    if not data.startswith(b"P6"):
        raise ParseError("not a P6 PPM")
    pos, tokens = 2, []
    while len(tokens) < 3:
        if pos >= len(data):
            raise ParseError("truncated PPM header")
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise ParseError("unterminated PPM comment")
            pos = nl + 1
        elif c.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ParseError(f"bad PPM header tokens {tokens}") from exc
    if maxval != 255:
        raise ParseError(f"only maxval 255 supported, got {maxval}")
    if width <= 0 or height <= 0:
        raise ParseError(f"bad PPM dimensions {width}x{height}")
    pos += 1  # single whitespace after maxval
    body = data[pos : pos + 3 * width * height]
    if len(body) != 3 * width * height:
        raise ParseError("PPM body shorter than 3*w*h")
    px = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
    return RasterImage(width=width, height=height, pixels=px.copy())


def save_ppm(img: RasterImage) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode()
    return header + img.pixels.tobytes()


def _resize_mean(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Area-mean resize of a 2-D float plane (deterministic, no interpolation deps)."""
    h, w = plane.shape
    row_edges = (np.arange(out_h + 1) * h) // out_h
    col_edges = (np.arange(out_w + 1) * w) // out_w
    out = np.empty((out_h, out_w), dtype=np.float64)
    for i in range(out_h):
        # empty bins (upsampling) borrow the nearest source row/column
        r0 = min(int(row_edges[i]), h - 1)
        r1 = max(int(row_edges[i + 1]), r0 + 1)
        band = plane[r0:r1]
        for j in range(out_w):
            c0 = min(int(col_edges[j]), w - 1)
            c1 = max(int(col_edges[j + 1]), c0 + 1)
            out[i, j] = band[:, c0:c1].mean()
    return out


def extract_tiny(img: RasterImage) -> np.ndarray:
    """Raw tiny-image unit: 16x16x3 area-mean resize, values in [0, 1]."""
    px = img.pixels.astype(np.float64) / 255.0
    planes = [_resize_mean(px[:, :, c], TINY_SIDE, TINY_SIDE) for c in range(3)]
    return np.stack(planes, axis=-1).ravel()


def _rgb_to_lab(px: np.ndarray) -> np.ndarray:
    """sRGB (0..1) -> CIELAB (D65), vectorized over the trailing channel axis."""
    srgb = np.where(px <= 0.04045, px / 12.92, ((px + 0.055) / 1.055) ** 2.4)
    m = np.array(
        [
            [0.4124564, 0.3575761, 0.1804375],
            [0.2126729, 0.7151522, 0.0721750],
            [0.0193339, 0.1191920, 0.9503041],
        ]
    )
    xyz = srgb @ m.T
    white = np.array([0.95047, 1.0, 1.08883])
    t = xyz / white
    f = np.where(t > (6 / 29) ** 3, np.cbrt(t), t / (3 * (6 / 29) ** 2) + 4 / 29)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def extract_labhist(img: RasterImage) -> np.ndarray:
    """Joint LAB histogram on a 2x2 spatial grid; bin counts sum to pixel count."""
    lab = _rgb_to_lab(img.pixels.astype(np.float64) / 255.0)
    nl, na, nb = LABHIST_BINS
    l_bin = np.clip((lab[..., 0] / 100.0) * nl, 0, nl - 1).astype(np.intp)
    a_bin = np.clip((lab[..., 1] + 110.0) / 220.0 * na, 0, na - 1).astype(np.intp)
    b_bin = np.clip((lab[..., 2] + 110.0) / 220.0 * nb, 0, nb - 1).astype(np.intp)
    joint = (l_bin * na + a_bin) * nb + b_bin
    h, w = img.height, img.width
    cells = nl * na * nb
    out = np.zeros((LABHIST_GRID, LABHIST_GRID, cells), dtype=np.float64)
    row_split = (h + 1) // 2
    col_split = (w + 1) // 2
    for gi, rows in enumerate((slice(0, row_split), slice(row_split, h))):
        for gj, cols in enumerate((slice(0, col_split), slice(col_split, w))):
            block = joint[rows, cols].ravel()
            if block.size:
                out[gi, gj] = np.bincount(block, minlength=cells)
    return out.ravel()


def extract_hoglite(img: RasterImage) -> np.ndarray:
    """Compact HOG: 64x64 gray resize, 8-px cells, 9 unsigned orientation bins,
    2x2-cell blocks with L2 normalization -> 7*7*36 = 1764 dims."""
    px = img.pixels.astype(np.float64) / 255.0
    gray = 0.299 * px[:, :, 0] + 0.587 * px[:, :, 1] + 0.114 * px[:, :, 2]
    gray = _resize_mean(gray, HOG_SIDE, HOG_SIDE)
    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    obin = np.minimum((ang / np.pi * HOG_ORIENTATIONS).astype(np.intp), HOG_ORIENTATIONS - 1)
    n_cells = HOG_SIDE // HOG_CELL
    hist = np.zeros((n_cells, n_cells, HOG_ORIENTATIONS), dtype=np.float64)
    ci = np.arange(HOG_SIDE) // HOG_CELL
    flat = (ci[:, None] * n_cells + ci[None, :]) * HOG_ORIENTATIONS + obin
    np.add.at(hist.reshape(-1), flat.ravel(), mag.ravel())
    blocks = []
    for bi in range(HOG_BLOCKS):
        for bj in range(HOG_BLOCKS):
            block = hist[bi : bi + 2, bj : bj + 2].ravel()
            norm = np.sqrt((block * block).sum() + 1e-12)
            blocks.append(block / norm)
    return np.concatenate(blocks)


def _finish_tiny(vec: np.ndarray) -> np.ndarray:
    planes = vec.reshape(TINY_SIDE, TINY_SIDE, 3)
    return (planes - planes.mean(axis=(0, 1))).ravel()


# name -> (dimension, raw extractor, finishing step applied before normalization)
UNIT_EXTRACTORS = {
    "tiny": (TINY_DIM, extract_tiny, _finish_tiny),
    "labhist": (LABHIST_DIM, extract_labhist, None),
    "hoglite": (HOG_DIM, extract_hoglite, None),
}


def extract_unit(img: RasterImage, unit: str) -> np.ndarray:
    """Raw (un-normalized, un-centered) vector for one registered unit."""
    if unit not in UNIT_EXTRACTORS:
        raise SchemaMismatch(f"no extractor registered for unit {unit!r}")
    dim, raw, _ = UNIT_EXTRACTORS[unit]
    vec = raw(img)
    assert vec.shape == (dim,)
    return vec


def normalize_unit_slices(values: np.ndarray, schema: FeatureSchema) -> np.ndarray:
    """L2-normalize each unit slice in place-free fashion; zero slices stay zero."""
    values = np.asarray(values, dtype=np.float64).copy()
    for start, stop in schema.spans():
        norm = np.linalg.norm(values[start:stop])
        if norm > 0.0:
            values[start:stop] /= norm
    return values


def extract_image_features(img: RasterImage, schema: FeatureSchema,
                           image_id: str = "") -> ImageFeature:
    """Concatenate the schema's units, finishing + L2-normalizing each slice."""
    parts = []
    for name, dim in schema.units:
        if name not in UNIT_EXTRACTORS:
            raise SchemaMismatch(f"no extractor registered for unit {name!r}")
        reg_dim, _, finish = UNIT_EXTRACTORS[name]
        if reg_dim != dim:
            raise SchemaMismatch(f"unit {name!r} has dim {reg_dim}, schema says {dim}")
        vec = extract_unit(img, name)
        if finish is not None:
            vec = finish(vec)
        parts.append(vec)
    values = normalize_unit_slices(np.concatenate(parts), schema)
    return ImageFeature(image_id=image_id, values=values)
