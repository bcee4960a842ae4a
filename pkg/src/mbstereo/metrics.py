"""Quantitative evaluation: disparity, image-quality, consistency, and depth metrics.

Disparity errors are evaluated where the ground truth is valid (sparse GT
supported). EPE averages |d - d_hat| over pixels that are additionally
prediction-valid; outlier and D1 rates count prediction-valid pixels whose
error exceeds the threshold, over all GT-valid region pixels, so a matcher
that leaves a pixel unfilled is not charged an outlier there (density is
reported alongside).

The scalar SSIM here is the classic image-quality variant (11x11 Gaussian
window, sigma 1.5); the 3x3 uniform-block variant used inside the warping
loss lives in the photometric module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .geometry import warp_to_left
from .imageio import DisparityMap, Image
from .masks import RegionMasks
from .photometric import DEFAULT_ALPHA, SSIM_C1, SSIM_C2, photometric_error

REGION_ORDER = ("all", "occ", "oof", "noc")


@dataclass(frozen=True)
class RegionDisparityMetrics:
    epe: float | None  # None when no pixel is both GT- and prediction-valid
    outlier_rate: float  # fraction of region pixels measured wrong by > outlier_px
    d1_percent: float
    count: int  # GT-valid pixels in the region
    measured: int  # of those, prediction-valid


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    a1: float
    a2: float
    a3: float

    def as_tuple(self):
        return (self.abs_rel, self.sq_rel, self.rmse, self.rmse_log,
                self.a1, self.a2, self.a3)


@dataclass(frozen=True)
class MetricsReport:
    regions: dict[str, RegionDisparityMetrics]
    psnr: float | None = None
    ssim: float | None = None
    warp_error: float | None = None  # under the evaluated disparity
    warp_error_gt: float | None = None  # under the ground truth (scene reference)
    fusion_ssim: float | None = None
    depth: DepthMetrics | None = None


def _check_same_shape(pred: DisparityMap, gt: DisparityMap):
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise ValueError("disparity map dimensions differ")


def disparity_metrics(
    pred: DisparityMap,
    gt: DisparityMap,
    masks: RegionMasks | None = None,
    outlier_px: float = 3.0,
) -> dict[str, RegionDisparityMetrics]:
    """Region-wise EPE / outlier / D1 numbers; empty regions are omitted."""
    _check_same_shape(pred, gt)
    err = np.abs(pred.values - gt.values)
    full = np.ones(gt.values.shape, dtype=bool)
    regions = {"all": full}
    if masks is not None:
        if masks.occ.shape != gt.values.shape:
            raise ValueError("mask dimensions differ from the disparity maps")
        regions.update({"occ": masks.occ, "oof": masks.oof, "noc": masks.noc})

    out: dict[str, RegionDisparityMetrics] = {}
    for name in REGION_ORDER:
        if name not in regions:
            continue
        base = gt.valid & regions[name]
        count = int(base.sum())
        if count == 0:
            continue
        measured = base & pred.valid
        n_meas = int(measured.sum())
        epe = float(err[measured].mean()) if n_meas else None
        bad = int((err[measured] > outlier_px).sum())
        d1_bad = int(
            ((err > 3.0) & (err > 0.05 * gt.values) & measured).sum()
        )
        out[name] = RegionDisparityMetrics(
            epe=epe,
            outlier_rate=bad / count,
            d1_percent=100.0 * d1_bad / count,
            count=count,
            measured=n_meas,
        )
    if "all" not in out:
        raise ValueError("no ground-truth-valid pixels to evaluate")
    return out


def d1_rate(pred: DisparityMap, gt: DisparityMap, mask: np.ndarray | None = None) -> float:
    """KITTI D1 percentage: error > 3 px AND > 5% of the true disparity."""
    _check_same_shape(pred, gt)
    base = gt.valid if mask is None else gt.valid & mask
    count = int(base.sum())
    if count == 0:
        raise ValueError("empty selection for D1")
    err = np.abs(pred.values - gt.values)
    bad = (err > 3.0) & (err > 0.05 * gt.values) & base & pred.valid
    return 100.0 * int(bad.sum()) / count


# ---------------------------------------------------------------------------
# Image quality

def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB on [0, 1] images; +inf when identical."""
    if a.data.shape != b.data.shape:
        raise ValueError("images must share dimensions")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = size // 2
    g = np.exp(-np.arange(-half, half + 1, dtype=np.float64) ** 2 / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


_SSIM_KERNEL = _gaussian_kernel()


def _ssim_map_gaussian(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    win = lambda x: correlate(x, _SSIM_KERNEL, mode="mirror")
    ma, mb = win(pa), win(pb)
    va = win(pa * pa) - ma * ma
    vb = win(pb * pb) - mb * mb
    cab = win(pa * pb) - ma * mb
    num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cab + SSIM_C2)
    den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2)
    return num / den


def ssim(a: Image, b: Image) -> float:
    """Mean SSIM with the classic 11x11 Gaussian window (sigma 1.5)."""
    if a.data.shape != b.data.shape:
        raise ValueError("images must share dimensions and channels")
    total = 0.0
    for c in range(a.channels):
        total += float(_ssim_map_gaussian(a.data[:, :, c], b.data[:, :, c]).mean())
    return total / a.channels


# ---------------------------------------------------------------------------
# Stereo-consistency proxies

def warp_error(left: Image, right: Image, gt: DisparityMap,
               alpha: float = DEFAULT_ALPHA) -> float:
    """Mean photometric error of the right view warped onto the left under GT."""
    warped = warp_to_left(right, gt, 1.0)
    if not warped.valid.any():
        raise ValueError("no valid pixels under the given disparity")
    pe = photometric_error(left, warped.image, alpha)
    return float(pe[warped.valid].mean())


def _cyclopean(left: Image, warped: Image) -> np.ndarray:
    mixed = (left.data + warped.data) / 2.0
    return Image(mixed).gray()


def fusion_ssim(pair_a, pair_b, gt: DisparityMap) -> float:
    """SSIM between the cyclopean (left + warped-right averaged) grayscale images."""
    la, ra = pair_a
    lb, rb = pair_b
    wa = warp_to_left(ra, gt, 1.0)
    wb = warp_to_left(rb, gt, 1.0)
    common = wa.valid & wb.valid
    if not common.any():
        raise ValueError("no mutually valid pixels for the cyclopean images")
    ca = np.where(common, _cyclopean(la, wa.image), 0.0)
    cb = np.where(common, _cyclopean(lb, wb.image), 0.0)
    return ssim(Image.from_gray(ca), Image.from_gray(cb))


# ---------------------------------------------------------------------------
# Depth metrics

def depth_metrics(pred: np.ndarray, gt: np.ndarray, valid: np.ndarray) -> DepthMetrics:
    """The seven standard depth-evaluation numbers over the valid mask."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or valid.shape != gt.shape:
        raise ValueError("depth grids and mask must share one shape")
    if not valid.any():
        raise ValueError("empty valid mask for depth metrics")
    p = pred[valid]
    g = gt[valid]
    if (p <= 0).any() or (g <= 0).any():
        raise ValueError("depths must be positive on the valid mask")
    diff = p - g
    ratio = np.maximum(p / g, g / p)
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff**2 / g)),
        rmse=float(np.sqrt(np.mean(diff**2))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        a1=float(np.mean(ratio < 1.25)),
        a2=float(np.mean(ratio < 1.25**2)),
        a3=float(np.mean(ratio < 1.25**3)),
    )


# ---------------------------------------------------------------------------
# Report formatting (stable key order, machine parseable)

def format_report(report: MetricsReport) -> str:
    lines = []
    for name in REGION_ORDER:
        if name not in report.regions:
            continue
        r = report.regions[name]
        if r.epe is not None:
            lines.append(f"disp.{name}.epe = {r.epe!r}")
        lines.append(f"disp.{name}.outlier_rate = {r.outlier_rate!r}")
        lines.append(f"disp.{name}.d1_percent = {r.d1_percent!r}")
        lines.append(f"disp.{name}.count = {r.count}")
        lines.append(f"disp.{name}.measured = {r.measured}")
    if report.psnr is not None:
        lines.append(f"image.psnr = {report.psnr!r}")
    if report.ssim is not None:
        lines.append(f"image.ssim = {report.ssim!r}")
    if report.warp_error is not None:
        lines.append(f"consistency.warp_error = {report.warp_error!r}")
    if report.warp_error_gt is not None:
        lines.append(f"consistency.warp_error_gt = {report.warp_error_gt!r}")
    if report.fusion_ssim is not None:
        lines.append(f"consistency.fusion_ssim = {report.fusion_ssim!r}")
    if report.depth is not None:
        d = report.depth
        lines.append(f"depth.abs_rel = {d.abs_rel!r}")
        lines.append(f"depth.sq_rel = {d.sq_rel!r}")
        lines.append(f"depth.rmse = {d.rmse!r}")
        lines.append(f"depth.rmse_log = {d.rmse_log!r}")
        lines.append(f"depth.a1 = {d.a1!r}")
        lines.append(f"depth.a2 = {d.a2!r}")
        lines.append(f"depth.a3 = {d.a3!r}")
    return "\n".join(lines) + "\n"
