"""Occlusion and out-of-frame masks from disparity via left-right consistency.

The occlusion test compares the left disparity with the right disparity
looked up at the corresponding abscissa, rounded to the nearest integer
(half away from zero toward +inf):

    delta(x, y) = | d_l(x, y) - d_r(round(x - d_l(x, y)), y) |
    occluded iff delta >= threshold

Lookups that leave the right frame, or hit an invalid right pixel, are
flagged occluded. The out-of-frame mask is x - d_l(x, y) < 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imageio import DisparityMap


@dataclass(frozen=True)
class RegionMasks:
    """Occluded / out-of-frame region masks for the left view."""

    occ: np.ndarray
    oof: np.ndarray

    def __post_init__(self):
        if self.occ.shape != self.oof.shape:
            raise ValueError("mask dimensions differ")
        if self.occ.dtype != bool or self.oof.dtype != bool:
            raise ValueError("masks must be boolean")

    @property
    def noc(self) -> np.ndarray:
        """Valid-evaluation region: neither occluded nor out of frame."""
        return ~self.occ & ~self.oof


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Nearest integer with halves rounded up; the package-wide rounding rule."""
    return np.floor(values + 0.5)


def occlusion_mask(
    d_left: DisparityMap, d_right: DisparityMap, threshold: float = 1.0
) -> np.ndarray:
    """Left-view pixels failing the left-right consistency check."""
    if (d_left.height, d_left.width) != (d_right.height, d_right.width):
        raise ValueError("disparity map dimensions differ")
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    h, w = d_left.height, d_left.width
    xs = np.arange(w, dtype=np.float64)[None, :] - d_left.values
    xr = round_half_up(xs).astype(np.int64)
    inside = (xr >= 0) & (xr <= w - 1)

    xr_c = np.clip(xr, 0, w - 1)
    rows = np.arange(h, dtype=np.int64)[:, None]
    dr = d_right.values[rows, xr_c]
    dr_valid = d_right.valid[rows, xr_c]
    delta = np.abs(d_left.values - dr)

    occ = np.zeros((h, w), dtype=bool)
    occ |= d_left.valid & ~inside
    occ |= d_left.valid & inside & ~dr_valid
    occ |= d_left.valid & inside & dr_valid & (delta >= threshold)
    return occ


def oof_mask(d_left: DisparityMap) -> np.ndarray:
    """Left-view pixels whose correspondence falls left of the source frame."""
    xs = np.arange(d_left.width, dtype=np.float64)[None, :] - d_left.values
    return d_left.valid & (xs < 0.0)
