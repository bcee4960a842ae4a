"""Image, disparity, and mask I/O in the bit-exact formats used by stereo datasets.

Carriers: binary PPM/PGM (P5/P6, 8 or 16 bit), PNG (8/16-bit grayscale,
8-bit RGB), PFM ("Pf" monochrome, bottom-up rows, scale sign = endianness),
and the KITTI disparity PNG (uint16, stored value = 256 * disparity, 0 =
invalid). In-memory images are float64 in [0, 1]; quantization happens only
at store time.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage


class FormatError(ValueError):
    """Malformed or unsupported file content."""


@dataclass(frozen=True)
class Image:
    """Planar image, shape (height, width, channels), float64 samples in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if not isinstance(d, np.ndarray) or d.ndim != 3:
            raise ValueError("image data must be a (H, W, C) array")
        if d.shape[2] not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {d.shape[2]}")
        if d.dtype != np.float64:
            object.__setattr__(self, "data", np.ascontiguousarray(d, dtype=np.float64))
            d = self.data
        if not np.isfinite(d).all():
            raise ValueError("image samples must be finite")
        if d.min() < 0.0 or d.max() > 1.0:
            raise ValueError("image samples must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def gray(self) -> np.ndarray:
        """Channel-mean grayscale plane, shape (H, W)."""
        d = self.data
        g = d[:, :, 0].copy()
        for c in range(1, d.shape[2]):
            g += d[:, :, c]
        return g / d.shape[2]

    @staticmethod
    def from_gray(plane: np.ndarray) -> "Image":
        return Image(np.ascontiguousarray(plane, dtype=np.float64)[:, :, None])


@dataclass(frozen=True)
class DisparityMap:
    """Per-pixel horizontal disparity of the left view with a validity mask.

    Valid disparities are finite and >= 0; invalid entries are normalized to 0.
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        m = np.ascontiguousarray(self.valid, dtype=bool)
        if v.ndim != 2 or m.shape != v.shape:
            raise ValueError("disparity values and validity must be matching 2-D arrays")
        if not np.isfinite(v[m]).all() or (v[m] < 0).any():
            raise ValueError("valid disparities must be finite and >= 0")
        v = np.where(m, v, 0.0)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "valid", m)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @staticmethod
    def dense(values: np.ndarray) -> "DisparityMap":
        values = np.asarray(values, dtype=np.float64)
        return DisparityMap(values, np.ones(values.shape, dtype=bool))


def _atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# PPM / PGM

def _read_pnm_tokens(buf: bytes, count: int, start: int):
    """Read whitespace-separated header tokens, skipping # comments."""
    tokens = []
    i = start
    while len(tokens) < count:
        while i < len(buf) and buf[i : i + 1].isspace():
            i += 1
        if i < len(buf) and buf[i : i + 1] == b"#":
            while i < len(buf) and buf[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(buf) and not buf[j : j + 1].isspace():
            j += 1
        if j == i:
            raise FormatError("truncated PNM header")
        tokens.append(buf[i:j])
        i = j
    return tokens, i + 1  # consume single whitespace after last token


def _load_pnm(buf: bytes) -> Image:
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported PNM magic {magic!r}")
    channels = 1 if magic == b"P5" else 3
    tokens, offset = _read_pnm_tokens(buf, 3, 2)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise FormatError(f"malformed PNM header: {e}") from e
    if w < 1 or h < 1:
        raise FormatError("nonpositive PNM dimensions")
    if maxval == 255:
        dtype, scale = np.dtype(np.uint8), 255.0
    elif maxval == 65535:
        dtype, scale = np.dtype(">u2"), 65535.0
    else:
        raise FormatError(f"unsupported PNM maxval {maxval} (expected 255 or 65535)")
    n = w * h * channels
    raster = buf[offset : offset + n * dtype.itemsize]
    if len(raster) != n * dtype.itemsize:
        raise FormatError("truncated PNM raster")
    arr = np.frombuffer(raster, dtype=dtype).astype(np.float64).reshape(h, w, channels)
    return Image(arr / scale)


def _store_pnm(image: Image, bit_depth: int) -> bytes:
    if bit_depth == 8:
        maxval, dtype = 255, np.uint8
    elif bit_depth == 16:
        maxval, dtype = 65535, np.dtype(">u2")
    else:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    magic = b"P5" if image.channels == 1 else b"P6"
    q = np.floor(image.data * maxval + 0.5).astype(dtype)
    header = magic + b"\n%d %d\n%d\n" % (image.width, image.height, maxval)
    return header + q.tobytes()


# ---------------------------------------------------------------------------
# PNG

def _load_png(path) -> Image:
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.array(im)
    except PILImage.UnidentifiedImageError as e:
        raise FormatError(f"not a PNG file: {e}") from e
    if mode == "L":
        return Image(arr.astype(np.float64)[:, :, None] / 255.0)
    if mode in ("I;16", "I"):
        a = arr.astype(np.float64)
        if a.max() > 65535 or a.min() < 0:
            raise FormatError("PNG integer samples out of 16-bit range")
        return Image(a[:, :, None] / 65535.0)
    if mode == "RGB":
        return Image(arr.astype(np.float64) / 255.0)
    raise FormatError(f"unsupported PNG mode {mode!r} (need 8/16-bit gray or 8-bit RGB)")


def _encode_png(arr: np.ndarray) -> bytes:
    bio = io.BytesIO()
    PILImage.fromarray(arr).save(bio, format="PNG")
    return bio.getvalue()


def _store_png(image: Image, bit_depth: int) -> bytes:
    if image.channels == 3:
        if bit_depth != 8:
            raise ValueError("RGB PNG supports bit_depth 8 only")
        q = np.floor(image.data * 255.0 + 0.5).astype(np.uint8)
        return _encode_png(q)
    if bit_depth == 8:
        q = np.floor(image.data[:, :, 0] * 255.0 + 0.5).astype(np.uint8)
    elif bit_depth == 16:
        q = np.floor(image.data[:, :, 0] * 65535.0 + 0.5).astype(np.uint16)
    else:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    return _encode_png(q)


# ---------------------------------------------------------------------------
# Public image API

def load_image(path) -> Image:
    """Load a PPM/PGM (binary) or PNG image, normalized to [0, 1]."""
    path = Path(path)
    try:
        head = open(path, "rb").read(2)
    except OSError:
        raise
    if head in (b"P5", b"P6"):
        return _load_pnm(open(path, "rb").read())
    if head == b"\x89P":
        return _load_png(path)
    raise FormatError(f"unrecognized image format in {path.name}")


def store_image(path, image: Image, bit_depth: int = 8) -> None:
    """Store an image; the format follows the file suffix (.pgm/.ppm/.png)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".pgm", ".ppm"):
        want = 1 if suffix == ".pgm" else 3
        if image.channels != want:
            raise ValueError(f"{suffix} requires {want} channel(s)")
        data = _store_pnm(image, bit_depth)
    elif suffix == ".png":
        data = _store_png(image, bit_depth)
    else:
        raise ValueError(f"unsupported image suffix {suffix!r}")
    _atomic_write_bytes(path, data)


# ---------------------------------------------------------------------------
# Disparity carriers

def _load_pfm(buf: bytes) -> DisparityMap:
    tokens, offset = _read_pnm_tokens(buf, 4, 0)
    if tokens[0] != b"Pf":
        raise FormatError(f"wrong PFM magic {tokens[0]!r} (color PFM unsupported)")
    try:
        w, h = int(tokens[1]), int(tokens[2])
        scale = float(tokens[3])
    except ValueError as e:
        raise FormatError(f"malformed PFM header: {e}") from e
    if w < 1 or h < 1:
        raise FormatError("nonpositive PFM dimensions")
    if scale == 0:
        raise FormatError("PFM scale must be nonzero")
    endian = "<" if scale < 0 else ">"
    raster = buf[offset:]
    if len(raster) != 4 * w * h:
        raise FormatError(f"PFM raster size mismatch: {len(raster)} != {4 * w * h}")
    arr = np.frombuffer(raster, dtype=endian + "f4").reshape(h, w)
    arr = arr[::-1].astype(np.float64)  # stored bottom-to-top
    valid = np.isfinite(arr) & (arr >= 0)
    return DisparityMap(np.where(valid, arr, 0.0), valid)


def _store_pfm(disp: DisparityMap) -> bytes:
    values = np.where(disp.valid, disp.values, np.inf).astype(np.float32)
    header = b"Pf\n%d %d\n-1.0\n" % (disp.width, disp.height)
    return header + values[::-1].astype("<f4").tobytes()


def _load_kitti_png(path) -> DisparityMap:
    with PILImage.open(path) as im:
        im.load()
        if im.mode not in ("I;16", "I"):
            raise FormatError(f"KITTI disparity PNG must be 16-bit grayscale, got {im.mode!r}")
        stored = np.array(im, dtype=np.int64)
    if stored.min() < 0 or stored.max() > 65535:
        raise FormatError("KITTI disparity samples out of uint16 range")
    valid = stored > 0
    return DisparityMap(np.where(valid, stored / 256.0, 0.0), valid)


def _store_kitti_png(disp: DisparityMap) -> bytes:
    stored = np.floor(disp.values * 256.0 + 0.5)
    if (stored[disp.valid] > 65535).any():
        raise ValueError("disparity too large for the KITTI uint16 carrier")
    # valid zero-disparity pixels would reload as invalid; bump to the smallest code
    stored = np.where(disp.valid & (stored == 0), 1.0, stored)
    stored = np.where(disp.valid, stored, 0.0).astype(np.uint16)
    return _encode_png(stored)


def load_disparity(path, format: str) -> DisparityMap:
    """Load a disparity map from PFM or the KITTI uint16 PNG carrier."""
    if format == "pfm":
        return _load_pfm(open(path, "rb").read())
    if format == "kitti-png":
        return _load_kitti_png(path)
    raise ValueError(f"unknown disparity format {format!r} (expected pfm or kitti-png)")


def store_disparity(path, disp: DisparityMap, format: str) -> None:
    if format == "pfm":
        _atomic_write_bytes(path, _store_pfm(disp))
    elif format == "kitti-png":
        _atomic_write_bytes(path, _store_kitti_png(disp))
    else:
        raise ValueError(f"unknown disparity format {format!r} (expected pfm or kitti-png)")


# ---------------------------------------------------------------------------
# Binary masks as 8-bit PNG (0/255)

def store_mask(path, mask: np.ndarray) -> None:
    m = np.asarray(mask)
    if m.ndim != 2 or m.dtype != bool:
        raise ValueError("mask must be a 2-D boolean array")
    _atomic_write_bytes(path, _encode_png(np.where(m, 255, 0).astype(np.uint8)))


def load_mask(path) -> np.ndarray:
    img = load_image(path)
    if img.channels != 1:
        raise FormatError("mask PNG must be grayscale")
    return img.data[:, :, 0] >= 0.5


# ---------------------------------------------------------------------------
# Resampling

def resample_bilinear(img: Image, new_width: int, new_height: int) -> Image:
    """Corner-aligned bilinear resampling with clamped edges."""
    if new_width < 1 or new_height < 1:
        raise ValueError("target dimensions must be >= 1")
    h, w = img.height, img.width
    if (new_width, new_height) == (w, h):
        return Image(img.data.copy())

    xs = np.arange(new_width, dtype=np.float64)
    ys = np.arange(new_height, dtype=np.float64)
    sx = xs * ((w - 1) / (new_width - 1)) if new_width > 1 else np.zeros(1)
    sy = ys * ((h - 1) / (new_height - 1)) if new_height > 1 else np.zeros(1)

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.clip(x0, 0, w - 1)
    y0 = np.clip(y0, 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[None, :, None]
    fy = (sy - y0)[:, None, None]

    d = img.data
    top = d[y0][:, x0] + fx * (d[y0][:, x1] - d[y0][:, x0])
    bot = d[y1][:, x0] + fx * (d[y1][:, x1] - d[y1][:, x0])
    out = top + fy * (bot - top)
    return Image(np.clip(out, 0.0, 1.0))
