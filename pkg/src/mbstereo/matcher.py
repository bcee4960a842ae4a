"""Disparity estimation from a view set.

Two engines share the CostVolume carrier:

* photometric_match scans integer candidates and, per pixel, picks the
  candidate minimizing the window-averaged per-pixel-minimum warping loss.
  It is the direct embodiment of the minimum-over-views reconstruction
  objective and doubles as the reference signal for everything else.

* sgm_match runs census matching per source view, fuses the volumes by
  per-entry minimum over views (mirroring the per-pixel loss minimum),
  aggregates with the standard SGM recurrence, refines by parabolic fit,
  and invalidates left-right inconsistent pixels.

Invalid (out-of-frame) cost entries carry the volume's designated
max_cost value and are tracked separately in a validity grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ViewSet
from .imageio import DisparityMap, Image
from .masks import occlusion_mask
from .photometric import DEFAULT_ALPHA, min_warping_loss


@dataclass(frozen=True)
class CostVolume:
    """Per-(pixel, candidate) matching costs, shape (H, W, d_max).

    valid is False where the sample was out of frame; those entries hold
    max_cost so downstream arithmetic stays finite.
    """

    costs: np.ndarray
    valid: np.ndarray
    max_cost: float

    def __post_init__(self):
        if self.costs.ndim != 3 or self.valid.shape != self.costs.shape:
            raise ValueError("costs and validity must be matching (H, W, D) arrays")
        if not np.isfinite(self.costs).all():
            raise ValueError("costs must be finite")

    @property
    def d_max(self) -> int:
        return self.costs.shape[2]


@dataclass(frozen=True)
class SgmParams:
    census_window: int = 5
    p1: float = 10.0
    p2: float = 120.0
    paths: int = 8
    lr_threshold: float = 1.0

    def __post_init__(self):
        if self.census_window % 2 == 0 or not 3 <= self.census_window <= 7:
            raise ValueError("census window must be odd and in [3, 7]")
        # zero penalties are legal and reduce aggregation to paths * raw cost
        if not 0 <= self.p1 <= self.p2:
            raise ValueError("penalties must satisfy 0 <= p1 <= p2")
        if self.paths not in (4, 8):
            raise ValueError("paths must be 4 or 8")
        if not self.lr_threshold > 0:
            raise ValueError("lr_threshold must be positive")


def _abscissa_shift(offset: float) -> int:
    """Integer k with round_half_up(x - offset) == x - k for integer x."""
    return -int(math.floor(0.5 - offset))


def _window_average(values: np.ndarray, weights: np.ndarray, window: int):
    """Window mean over weighted entries, fixed row-major accumulation order."""
    h, w = values.shape
    k = window // 2
    vp = np.zeros((h + 2 * k, w + 2 * k), dtype=np.float64)
    wp = np.zeros_like(vp)
    vp[k : k + h, k : k + w] = values
    wp[k : k + h, k : k + w] = weights
    vs = np.zeros((h, w), dtype=np.float64)
    ws = np.zeros((h, w), dtype=np.float64)
    for dy in range(window):
        for dx in range(window):
            vs = vs + vp[dy : dy + h, dx : dx + w]
            ws = ws + wp[dy : dy + h, dx : dx + w]
    out = np.full((h, w), np.inf)
    np.divide(vs, ws, out=out, where=ws > 0)
    return out, ws


# window-averaged L_pe never exceeds 1, so 2 is a safe designated max cost
PHOTOMETRIC_MAX_COST = 2.0


def photometric_cost_volume(
    views: ViewSet, d_max: int, alpha: float = DEFAULT_ALPHA, window: int = 1
) -> CostVolume:
    """Per-candidate window-averaged minimum warping loss as a cost volume.

    An entry is valid iff the center pixel sees at least one source view
    at that candidate shift.
    """
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    if not views.sources:
        raise ValueError("view set has no sources")
    h, w = views.target.height, views.target.width
    costs = np.full((h, w, d_max), PHOTOMETRIC_MAX_COST)
    valid = np.zeros((h, w, d_max), dtype=bool)
    for d in range(d_max):
        lm = min_warping_loss(views, DisparityMap.dense(np.full((h, w), float(d))), alpha)
        masked = np.where(lm.valid, lm.values, 0.0)
        cost, _ = _window_average(masked, lm.valid.astype(np.float64), window)
        costs[:, :, d] = np.where(lm.valid, cost, PHOTOMETRIC_MAX_COST)
        valid[:, :, d] = lm.valid
    return CostVolume(costs, valid, PHOTOMETRIC_MAX_COST)


def photometric_match(
    views: ViewSet, d_max: int, alpha: float = DEFAULT_ALPHA, window: int = 1
) -> DisparityMap:
    """Integer-candidate argmin of the window-averaged minimum warping loss.

    The default window of 1 is the pure per-pixel argmin of the loss;
    larger odd windows average it over a neighborhood, trading boundary
    sharpness for robustness. Ties break toward the smaller candidate; a
    pixel is invalid iff no source view gives a valid warp at any candidate.
    """
    vol = photometric_cost_volume(views, d_max, alpha, window)
    best_d = np.argmin(vol.costs, axis=2)
    ever_valid = vol.valid.any(axis=2)
    values = np.where(ever_valid, best_d.astype(np.float64), 0.0)
    return DisparityMap(values, ever_valid)


# ---------------------------------------------------------------------------
# Census / SGM

def _census_signature(plane: np.ndarray, window: int) -> np.ndarray:
    """Per-pixel census bits (neighbor < center), edge-replicated borders."""
    h, w = plane.shape
    k = window // 2
    p = np.pad(plane, k, mode="edge")
    sig = np.zeros((h, w), dtype=np.uint64)
    for dy in range(window):
        for dx in range(window):
            if dy == k and dx == k:
                continue
            bit = (p[dy : dy + h, dx : dx + w] < plane).astype(np.uint64)
            sig = (sig << np.uint64(1)) | bit
    return sig


def census_cost(
    target: Image, source: Image, scale: float, d_max: int, window: int = 5
) -> CostVolume:
    """Hamming distance between census signatures at candidate shifts.

    Inputs are grayscale-converted; cost(x, y, d) compares the target at x
    with the source at round(x - scale * d). Out-of-frame samples get the
    designated max cost and valid=False.
    """
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    if window % 2 == 0 or not 3 <= window <= 7:
        raise ValueError("census window must be odd and in [3, 7]")
    if target.data.shape[:2] != source.data.shape[:2]:
        raise ValueError("target and source dimensions differ")
    sig_t = _census_signature(target.gray(), window)
    sig_s = _census_signature(source.gray(), window)
    h, w = sig_t.shape
    max_cost = float(window * window)

    costs = np.full((h, w, d_max), max_cost)
    valid = np.zeros((h, w, d_max), dtype=bool)
    for d in range(d_max):
        k = _abscissa_shift(scale * d)
        t_lo, t_hi = max(0, k), min(w, w + k)
        if t_hi <= t_lo:
            continue
        ham = np.bitwise_count(sig_t[:, t_lo:t_hi] ^ sig_s[:, t_lo - k : t_hi - k])
        costs[:, t_lo:t_hi, d] = ham.astype(np.float64)
        valid[:, t_lo:t_hi, d] = True
    return CostVolume(costs, valid, max_cost)


def fuse_multibaseline(volumes) -> CostVolume:
    """Per-entry minimum over views, ignoring invalid entries.

    An output entry is invalid only where every input is invalid.
    """
    volumes = list(volumes)
    if not volumes:
        raise ValueError("no cost volumes to fuse")
    shape = volumes[0].costs.shape
    for v in volumes[1:]:
        if v.costs.shape != shape:
            raise ValueError("cost volume dimensions differ")
    max_cost = max(v.max_cost for v in volumes)
    best = np.full(shape, np.inf)
    any_valid = np.zeros(shape, dtype=bool)
    for v in volumes:
        best = np.minimum(best, np.where(v.valid, v.costs, np.inf))
        any_valid |= v.valid
    return CostVolume(np.where(any_valid, best, max_cost), any_valid, max_cost)


_DIRS_8 = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1))


def _dp_step(c_slice, prev, has_prev, p1, p2):
    """One SGM recurrence step along a path; lanes without predecessor copy costs."""
    m = prev.min(axis=1, keepdims=True)
    up = np.empty_like(prev)
    up[:, 1:] = prev[:, :-1]
    up[:, 0] = np.inf
    dn = np.empty_like(prev)
    dn[:, :-1] = prev[:, 1:]
    dn[:, -1] = np.inf
    trans = np.minimum(prev, np.minimum(up, dn) + p1)
    trans = np.minimum(trans, m + p2)
    out = c_slice + (trans - m)
    if not has_prev.all():
        out[~has_prev] = c_slice[~has_prev]
    return out


def _aggregate_direction(costs: np.ndarray, dx: int, dy: int, p1: float, p2: float):
    h, w, _ = costs.shape
    agg = np.empty_like(costs)
    if dy == 0:
        xs = range(w) if dx == 1 else range(w - 1, -1, -1)
        first = True
        all_rows = np.ones(h, dtype=bool)
        for x in xs:
            if first:
                agg[:, x] = costs[:, x]
                first = False
            else:
                agg[:, x] = _dp_step(costs[:, x], agg[:, x - dx], all_rows, p1, p2)
        return agg

    ys = range(h) if dy == 1 else range(h - 1, -1, -1)
    first = True
    for y in ys:
        if first:
            agg[y] = costs[y]
            first = False
            continue
        prev_row = agg[y - dy]
        if dx == 0:
            pred, has = prev_row, np.ones(w, dtype=bool)
        else:
            pred = np.empty_like(prev_row)
            has = np.ones(w, dtype=bool)
            if dx == 1:
                pred[1:] = prev_row[:-1]
                pred[0] = 0.0
                has[0] = False
            else:
                pred[:-1] = prev_row[1:]
                pred[-1] = 0.0
                has[-1] = False
        agg[y] = _dp_step(costs[y], pred, has, p1, p2)
    return agg


def sgm_aggregate(volume: CostVolume, params: SgmParams) -> CostVolume:
    """Sum of the standard SGM path recurrence over 4 or 8 directions."""
    dirs = _DIRS_8[: params.paths]
    total = np.zeros_like(volume.costs)
    for dx, dy in dirs:
        total = total + _aggregate_direction(volume.costs, dx, dy, params.p1, params.p2)
    return CostVolume(total, volume.valid.copy(), float(params.paths) * volume.max_cost)


def wta_subpixel(volume: CostVolume) -> DisparityMap:
    """Winner-take-all with parabolic refinement on interior candidates.

    Ties break toward the smaller candidate; the refinement offset is
    clamped to +-0.5 and skipped at the boundary candidates or where the
    three-point fit is not convex.
    """
    costs = volume.costs
    h, w, d_max = costs.shape
    d0 = np.argmin(costs, axis=2)
    px_valid = volume.valid.any(axis=2)
    values = d0.astype(np.float64)
    if d_max >= 3:
        interior = (d0 > 0) & (d0 < d_max - 1)
        d0c = np.clip(d0, 1, d_max - 2)
        rows = np.arange(h)[:, None]
        cols = np.arange(w)[None, :]
        cm = costs[rows, cols, d0c - 1]
        c0 = costs[rows, cols, d0c]
        cp = costs[rows, cols, d0c + 1]
        denom = cm - 2.0 * c0 + cp
        ok = interior & (denom > 0)
        offset = np.zeros((h, w), dtype=np.float64)
        np.divide(cm - cp, 2.0 * denom, out=offset, where=ok)
        offset = np.clip(offset, -0.5, 0.5)
        values = values + np.where(ok, offset, 0.0)
    values = np.where(px_valid, values, 0.0)
    return DisparityMap(values, px_valid)


def _match_one_target(target: Image, sources, d_max: int, params: SgmParams) -> DisparityMap:
    volumes = [census_cost(target, img, scale, d_max, params.census_window)
               for (img, scale) in sources]
    fused = fuse_multibaseline(volumes)
    aggregated = sgm_aggregate(fused, params)
    return wta_subpixel(aggregated)


def sgm_match(views: ViewSet, d_max: int, params: SgmParams = SgmParams()) -> DisparityMap:
    """Census -> multi-baseline fusion -> SGM -> subpixel WTA -> LR invalidation.

    The right-view disparity for the consistency check comes from a second
    pass with the r image as target: a source at scale s sits at scale
    s - 1 relative to r, and the left image joins as a source at -1.
    The view set must therefore contain a source named "r". Inconsistent
    pixels are marked invalid; there is no inpainting.
    """
    if "r" not in views.labels:
        raise ValueError('sgm_match needs a source named "r" for the LR check')
    d_left = _match_one_target(
        views.target, [(s.image, s.scale) for s in views.sources], d_max, params
    )
    right = views.source("r").image
    right_sources = [(views.target, -1.0)] + [
        (s.image, s.scale - 1.0) for s in views.sources if s.name != "r"
    ]
    d_right = _match_one_target(right, right_sources, d_max, params)

    occ = occlusion_mask(d_left, d_right, params.lr_threshold)
    valid = d_left.valid & ~occ
    return DisparityMap(np.where(valid, d_left.values, 0.0), valid)
