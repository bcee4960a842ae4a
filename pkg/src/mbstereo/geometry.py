"""Disparity-conditioned horizontal warping of source views into the left view.

Sign convention, fixed package-wide: a left-view pixel x corresponds to
source-view abscissa x - s * D(x, y), where s is the per-view scale factor
(r: 1, ll: -1, rr: 2, c: 0.5) and D >= 0. Samples whose abscissa leaves
[0, width - 1] are invalid rather than clamped, so losses see true missing
correspondences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imageio import DisparityMap, Image

# canonical per-view disparity scale factors
VIEW_SCALES = {"ll": -1.0, "l": 0.0, "c": 0.5, "r": 1.0, "rr": 2.0}


@dataclass(frozen=True)
class ViewSource:
    name: str
    image: Image
    scale: float


@dataclass(frozen=True)
class ViewSet:
    """Left target image plus named source views with their warp scale factors."""

    target: Image
    sources: tuple[ViewSource, ...]

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        shape = self.target.data.shape
        for s in self.sources:
            if s.image.data.shape != shape:
                raise ValueError(f"source {s.name!r} dimensions differ from target")
            if not math.isfinite(s.scale):
                raise ValueError(f"source {s.name!r} has non-finite scale")
        names = [s.name for s in self.sources]
        if len(set(names)) != len(names):
            raise ValueError("duplicate source names in view set")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.sources)

    def source(self, name: str) -> ViewSource:
        for s in self.sources:
            if s.name == name:
                return s
        raise KeyError(f"no source named {name!r}")

    def subset(self, names) -> "ViewSet":
        return ViewSet(self.target, tuple(self.source(n) for n in names))


@dataclass(frozen=True)
class WarpResult:
    """Reconstruction of the left view plus per-pixel sampling validity."""

    image: Image
    valid: np.ndarray


def warp_to_left(source: Image, disparity: DisparityMap, scale: float) -> WarpResult:
    """Warp a source view into the left view under the given disparity.

    output(x, y) samples the source at abscissa x - scale * D(x, y) with
    bilinear interpolation along the row. Pixels whose abscissa leaves
    [0, width - 1], or whose disparity is invalid, are zero with
    validity False.
    """
    h, w = source.height, source.width
    if (disparity.height, disparity.width) != (h, w):
        raise ValueError("disparity dimensions do not match the source image")

    xs = np.arange(w, dtype=np.float64)[None, :] - scale * disparity.values
    valid = disparity.valid & (xs >= 0.0) & (xs <= w - 1.0)

    x0 = np.clip(np.floor(xs), 0, w - 1).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    f = np.clip(xs - x0, 0.0, 1.0)

    rows = np.arange(h, dtype=np.int64)[:, None]
    out = np.empty_like(source.data)
    for c in range(source.channels):
        plane = source.data[:, :, c]
        a = plane[rows, x0]
        b = plane[rows, x1]
        out[:, :, c] = a + f * (b - a)
    out = np.clip(out, 0.0, 1.0)
    out[~valid] = 0.0
    return WarpResult(Image(out), valid)


def effective_scale(base_scale: float, rescale_factor: float) -> float:
    """Scale factor after rendering at resolution factor X: shifts divide by X."""
    if not rescale_factor > 0:
        raise ValueError(f"rescale factor must be positive, got {rescale_factor}")
    return base_scale / rescale_factor
