"""Photometric reconstruction error and the per-pixel minimum warping loss.

The hybrid per-pixel error is

    L_pe(a, b) = (alpha / 2) * (1 - SSIM(a, b)) + (1 - alpha) * |a - b|

with SSIM over 3x3 uniform blocks (C1 = 0.01^2, C2 = 0.03^2, reflective
borders) and both terms channel-averaged. The warping loss evaluates L_pe
between the left view and every warped source, then reduces per pixel by
the minimum over sources whose warp is valid there.

Summation orders are fixed (row-major window accumulation, ascending
channels) so results are reproducible bit-for-bit by a scalar reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ViewSet, warp_to_left
from .imageio import DisparityMap, Image

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
DEFAULT_ALPHA = 0.85


@dataclass(frozen=True)
class LossMap:
    """Per-pixel minimum warping loss with the argmin source view.

    chosen holds indices into labels, -1 where no source is valid.
    """

    values: np.ndarray
    valid: np.ndarray
    chosen: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        if not (self.values.shape == self.valid.shape == self.chosen.shape):
            raise ValueError("loss map fields must share one shape")
        if (self.values[self.valid] < 0).any():
            raise ValueError("loss values must be >= 0 where valid")

    def chosen_label(self, y: int, x: int) -> str | None:
        i = int(self.chosen[y, x])
        return None if i < 0 else self.labels[i]


def _box3_mean(plane: np.ndarray) -> np.ndarray:
    """3x3 uniform block mean with reflective borders, fixed accumulation order."""
    h, w = plane.shape
    p = np.pad(plane, 1, mode="reflect")
    acc = np.zeros_like(plane)
    for dy in range(3):
        for dx in range(3):
            acc = acc + p[dy : dy + h, dx : dx + w]
    return acc / 9.0


def ssim_map(a: Image, b: Image) -> np.ndarray:
    """Per-pixel SSIM in [-1, 1], channel-averaged, shape (H, W)."""
    if a.data.shape != b.data.shape:
        raise ValueError("images must share dimensions and channels")
    if a.height < 2 or a.width < 2:
        raise ValueError("SSIM needs at least 2x2 images")
    out = np.zeros((a.height, a.width), dtype=np.float64)
    for c in range(a.channels):
        pa = a.data[:, :, c]
        pb = b.data[:, :, c]
        ma = _box3_mean(pa)
        mb = _box3_mean(pb)
        eaa = _box3_mean(pa * pa)
        ebb = _box3_mean(pb * pb)
        eab = _box3_mean(pa * pb)
        va = eaa - ma * ma
        vb = ebb - mb * mb
        cab = eab - ma * mb
        num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cab + SSIM_C2)
        den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2)
        out = out + num / den
    return out / a.channels


def photometric_error(a: Image, b: Image, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Hybrid SSIM + L1 per-pixel error grid, shape (H, W)."""
    if a.data.shape != b.data.shape:
        raise ValueError("images must share dimensions and channels")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    diff = np.abs(a.data - b.data)
    l1 = diff[:, :, 0].copy()
    for c in range(1, a.channels):
        l1 += diff[:, :, c]
    l1 = l1 / a.channels
    if alpha == 0.0:
        return l1
    return (alpha / 2.0) * (1.0 - ssim_map(a, b)) + (1.0 - alpha) * l1


def min_warping_loss(
    views: ViewSet, disparity: DisparityMap, alpha: float = DEFAULT_ALPHA
) -> LossMap:
    """Warp every source with its scale, reduce L_pe by the per-pixel minimum.

    A pixel is valid iff at least one source warp is valid there; chosen
    records the argmin source (first listed wins ties).
    """
    if not views.sources:
        raise ValueError("view set has no sources")
    target = views.target
    if (disparity.height, disparity.width) != (target.height, target.width):
        raise ValueError("disparity dimensions do not match the target")

    stack = np.full((len(views.sources), target.height, target.width), np.inf)
    any_valid = np.zeros((target.height, target.width), dtype=bool)
    for i, src in enumerate(views.sources):
        warped = warp_to_left(src.image, disparity, src.scale)
        pe = photometric_error(target, warped.image, alpha)
        stack[i] = np.where(warped.valid, pe, np.inf)
        any_valid |= warped.valid

    chosen = np.argmin(stack, axis=0).astype(np.int32)
    values = np.min(stack, axis=0)
    values = np.where(any_valid, values, 0.0)
    chosen = np.where(any_valid, chosen, -1).astype(np.int32)
    return LossMap(values, any_valid, chosen, views.labels)


def reduce_loss(loss: LossMap, selection: np.ndarray | None = None) -> float:
    """Mean loss over valid (and selected) pixels."""
    sel = loss.valid
    if selection is not None:
        if selection.shape != loss.valid.shape:
            raise ValueError("selection dimensions do not match the loss map")
        sel = sel & selection
    if not sel.any():
        raise ValueError("empty selection in loss reduction")
    return float(loss.values[sel].mean())
