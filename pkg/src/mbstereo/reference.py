"""Slow scalar reference implementations for oracle-equivalence checks.

naive_photometric_match re-derives the photometric matcher with per-pixel
loops and no shared code, keeping every accumulation in the same order as
the vectorized path (row-major windows, ascending channels, ascending
candidates with strict improvement) so results agree bit for bit. Only
usable for small scenes.
"""

from __future__ import annotations

import numpy as np

from .geometry import ViewSet
from .imageio import DisparityMap


def _reflect(i: int, n: int) -> int:
    if i < 0:
        return -i
    if i >= n:
        return 2 * (n - 1) - i
    return i


def _naive_warp(plane_stack, d: float, scale: float):
    """Warp all channels of one source by a constant disparity; returns (img, valid)."""
    h, w, ch = plane_stack.shape
    out = np.zeros((h, w, ch), dtype=np.float64)
    valid = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            xs = x - scale * d
            if xs < 0.0 or xs > w - 1.0:
                continue
            x0 = int(np.floor(xs))
            if x0 > w - 1:
                x0 = w - 1
            x1 = x0 + 1 if x0 + 1 <= w - 1 else w - 1
            f = xs - x0
            valid[y, x] = True
            for c in range(ch):
                a = plane_stack[y, x0, c]
                b = plane_stack[y, x1, c]
                v = a + f * (b - a)
                if v < 0.0:
                    v = 0.0
                if v > 1.0:
                    v = 1.0
                out[y, x, c] = v
    return out, valid


def _naive_box3(plane):
    h, w = plane.shape
    out = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            s = 0.0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    s += plane[_reflect(y + dy, h), _reflect(x + dx, w)]
            out[y, x] = s / 9.0
    return out


def _naive_pe(target, other, alpha):
    """Per-pixel hybrid error between two (H, W, C) arrays."""
    c1 = 0.01**2
    c2 = 0.03**2
    h, w, ch = target.shape
    l1 = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            s = abs(target[y, x, 0] - other[y, x, 0])
            for c in range(1, ch):
                s += abs(target[y, x, c] - other[y, x, c])
            l1[y, x] = s / ch
    if alpha == 0.0:
        return l1

    ssim_sum = np.zeros((h, w), dtype=np.float64)
    for c in range(ch):
        pa = target[:, :, c]
        pb = other[:, :, c]
        ma = _naive_box3(pa)
        mb = _naive_box3(pb)
        eaa = _naive_box3(pa * pa)
        ebb = _naive_box3(pb * pb)
        eab = _naive_box3(pa * pb)
        for y in range(h):
            for x in range(w):
                va = eaa[y, x] - ma[y, x] * ma[y, x]
                vb = ebb[y, x] - mb[y, x] * mb[y, x]
                cab = eab[y, x] - ma[y, x] * mb[y, x]
                num = (2.0 * ma[y, x] * mb[y, x] + c1) * (2.0 * cab + c2)
                den = (ma[y, x] * ma[y, x] + mb[y, x] * mb[y, x] + c1) * (va + vb + c2)
                ssim_sum[y, x] += num / den
    pe = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            pe[y, x] = (alpha / 2.0) * (1.0 - ssim_sum[y, x] / ch) + (1.0 - alpha) * l1[y, x]
    return pe


def naive_photometric_match(views: ViewSet, d_max: int, alpha: float = 0.85,
                            window: int = 5) -> DisparityMap:
    target = views.target.data
    h, w = target.shape[:2]
    half = window // 2

    # stage 1: per (candidate, view) error maps, then the per-pixel view minimum
    min_maps = []
    min_valid = []
    for d in range(d_max):
        maps = []
        valids = []
        for src in views.sources:
            warped, wvalid = _naive_warp(src.image.data, float(d), src.scale)
            maps.append(_naive_pe(target, warped, alpha))
            valids.append(wvalid)
        mmap = np.zeros((h, w), dtype=np.float64)
        mvalid = np.zeros((h, w), dtype=bool)
        for y in range(h):
            for x in range(w):
                best = np.inf
                ok = False
                for i in range(len(maps)):
                    if valids[i][y, x] and maps[i][y, x] < best:
                        best = maps[i][y, x]
                        ok = True
                if ok:
                    mmap[y, x] = best
                    mvalid[y, x] = True
        min_maps.append(mmap)
        min_valid.append(mvalid)

    # stage 2: window-averaged cost, argmin over candidates
    values = np.zeros((h, w), dtype=np.float64)
    valid = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            best_cost = np.inf
            best_d = 0
            ok = False
            for d in range(d_max):
                if not min_valid[d][y, x]:
                    continue
                s = 0.0
                n = 0.0
                for dy in range(-half, half + 1):
                    for dx in range(-half, half + 1):
                        yy = y + dy
                        xx = x + dx
                        if 0 <= yy < h and 0 <= xx < w and min_valid[d][yy, xx]:
                            s += min_maps[d][yy, xx]
                            n += 1.0
                cost = s / n
                if cost < best_cost:
                    best_cost = cost
                    best_d = d
                ok = True
            if ok:
                values[y, x] = float(best_d)
                valid[y, x] = True
    return DisparityMap(values, valid)
