"""Self-contained property battery behind the `validate` CLI command.

Every module invariant is re-checked here against freshly generated
scenes; a failing check makes `validate` exit nonzero. Checks are pure
and independent, so they may run on a thread pool; results print in
registration order either way.
"""

from __future__ import annotations

import io as _io
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imageio, masks, matcher, metrics, photometric, reference, synth
from .geometry import warp_to_left
from .imageio import DisparityMap, Image

_SUITE_SEEDS = (0, 1)


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _rand_image(rng, h, w, c=3) -> Image:
    return Image(np.round(rng.random((h, w, c)) * 255.0) / 255.0)


def _scene(seed):
    return synth.generate_scene(synth.standard_spec(seed))


# --- imageio ---------------------------------------------------------------

def check_io_roundtrip():
    rng = np.random.default_rng(7)
    with tempfile.TemporaryDirectory() as td:
        td = Path(td)
        img8 = _rand_image(rng, 9, 13)
        for name, depth in (("a.ppm", 8), ("b.png", 8)):
            imageio.store_image(td / name, img8, bit_depth=depth)
            back = imageio.load_image(td / name)
            assert np.array_equal(back.data, img8.data), f"{name} round trip differs"
        gray16 = Image(np.round(rng.random((7, 5, 1)) * 65535.0) / 65535.0)
        for name in ("c.pgm", "c.png"):
            imageio.store_image(td / name, gray16, bit_depth=16)
            back = imageio.load_image(td / name)
            assert np.array_equal(back.data, gray16.data), f"{name} 16-bit differs"

        vals = (rng.random((6, 11)) * 40).astype(np.float32).astype(np.float64)
        valid = rng.random((6, 11)) > 0.2
        disp = DisparityMap(np.where(valid, vals, 0.0), valid)
        imageio.store_disparity(td / "d.pfm", disp, "pfm")
        back = imageio.load_disparity(td / "d.pfm", "pfm")
        assert np.array_equal(back.values, disp.values) and np.array_equal(
            back.valid, disp.valid
        ), "PFM round trip not bit-identical"

        kd = DisparityMap(np.where(valid, np.round(vals * 256) / 256 + 1, 0.0), valid)
        imageio.store_disparity(td / "d.png", kd, "kitti-png")
        back = imageio.load_disparity(td / "d.png", "kitti-png")
        assert np.allclose(back.values[valid], kd.values[valid], atol=1e-9) and np.array_equal(
            back.valid, kd.valid
        ), "KITTI PNG round trip differs"
    return "store/load identity holds for PPM, PGM, PNG8/16, PFM, KITTI PNG"


def check_io_ranges():
    rng = np.random.default_rng(8)
    with tempfile.TemporaryDirectory() as td:
        td = Path(td)
        imageio.store_image(td / "x.png", _rand_image(rng, 8, 8), bit_depth=8)
        img = imageio.load_image(td / "x.png")
        assert img.data.min() >= 0 and img.data.max() <= 1, "samples left [0, 1]"
        disp = DisparityMap.dense(rng.random((8, 8)) * 30)
        imageio.store_disparity(td / "x.pfm", disp, "pfm")
        back = imageio.load_disparity(td / "x.pfm", "pfm")
        assert (back.values[back.valid] >= 0).all(), "negative valid disparity"
    return "loaded samples in [0,1]; valid disparities >= 0"


def check_resample_constant():
    const = Image(np.full((10, 14, 3), 0.37))
    out = imageio.resample_bilinear(const, 23, 9)
    assert np.array_equal(out.data, np.full((9, 23, 3), 0.37)), "constant not preserved"
    img = _rand_image(np.random.default_rng(3), 10, 14)
    same = imageio.resample_bilinear(img, 14, 10)
    assert np.array_equal(same.data, img.data), "same-size resample not identity"
    return "resampling preserves constants and same-size identity"


# --- geometry ---------------------------------------------------------------

def check_warp_zero_identity():
    rng = np.random.default_rng(11)
    img = _rand_image(rng, 12, 17)
    zero = DisparityMap.dense(np.zeros((12, 17)))
    for scale in (0.0, 1.0, -1.0, 2.0):
        res = warp_to_left(img, zero, scale)
        assert res.valid.all() and np.array_equal(res.image.data, img.data), \
            f"zero-disparity warp at scale {scale} is not identity"
    some = DisparityMap.dense(rng.random((12, 17)) * 3)
    res = warp_to_left(img, some, 0.0)
    assert res.valid.all() and np.array_equal(res.image.data, img.data), \
        "zero-scale warp is not identity"
    return "zero-disparity (and zero-scale) warp is the identity on all pixels"


def check_warp_composition():
    scene = _scene(0)
    gt = scene.gt_disparity_left
    doubled = DisparityMap(gt.values * 2.0, gt.valid)
    a = warp_to_left(scene.views_by_label["r"], gt, 1.0)
    b = warp_to_left(scene.views_by_label["r"], doubled, 0.5)
    assert np.array_equal(a.valid, b.valid), "composition validity differs"
    assert np.array_equal(a.image.data[a.valid], b.image.data[b.valid]), \
        "warp(s, D) != warp(s/X, X*D)"
    return "warping commutes with disparity rescaling"


def check_warp_validity_predicate():
    rng = np.random.default_rng(13)
    h, w = 9, 21
    img = _rand_image(rng, h, w)
    values = rng.random((h, w)) * 12
    valid = rng.random((h, w)) > 0.15
    disp = DisparityMap(np.where(valid, values, 0.0), valid)
    for scale in (1.0, -1.0, 0.5, 2.0):
        res = warp_to_left(img, disp, scale)
        xs = np.arange(w)[None, :] - scale * disp.values
        expect = disp.valid & (xs >= 0.0) & (xs <= w - 1.0)
        assert np.array_equal(res.valid, expect), f"validity mask wrong at scale {scale}"
    return "warp validity equals the analytic out-of-frame predicate"


# --- photometric ------------------------------------------------------------

def check_min_monotonicity():
    scene = _scene(1)
    gt = scene.gt_disparity_left
    small = photometric.min_warping_loss(scene.views.subset(["r"]), gt)
    big = photometric.min_warping_loss(scene.views.subset(["r", "ll", "rr", "c"]), gt)
    both = small.valid  # superset keeps every valid pixel
    assert (big.valid | ~small.valid).all(), "adding views lost validity"
    assert (big.values[both] <= small.values[both]).all(), \
        "per-pixel minimum increased when adding views"
    return "adding views never increases the per-pixel minimum loss"


def check_loss_basin():
    scene = _scene(0)
    gt = scene.gt_disparity_left
    views = scene.views
    at_gt = photometric.min_warping_loss(views, gt)
    lo = photometric.reduce_loss(at_gt)
    for delta in (-2.0, 2.0):
        shifted = DisparityMap(np.maximum(gt.values + delta, 0.0), gt.valid)
        other = photometric.min_warping_loss(views, shifted)
        sel = at_gt.valid & other.valid
        hi = float(other.values[sel].mean())
        assert lo < hi, f"loss at GT ({lo:.4f}) not below GT{delta:+} ({hi:.4f})"
    # per-pixel form: with the pure L1 error every >=1-view-visible pixel
    # has zero loss at GT, so no shift can beat it anywhere
    at_gt0 = photometric.min_warping_loss(views, gt, alpha=0.0)
    for delta in (-4.0, -2.0, 2.0, 4.0):
        shifted = DisparityMap(np.maximum(gt.values + delta, 0.0), gt.valid)
        other = photometric.min_warping_loss(views, shifted, alpha=0.0)
        sel = at_gt0.valid & other.valid
        assert (at_gt0.values[sel] <= other.values[sel]).all(), \
            f"per-pixel basin violated at GT{delta:+}"
    return "loss basin at GT holds in mean (hybrid) and per pixel (L1)"


def check_pe_symmetry_zero():
    rng = np.random.default_rng(17)
    a = _rand_image(rng, 10, 12)
    b = _rand_image(rng, 10, 12)
    ab = photometric.photometric_error(a, b)
    ba = photometric.photometric_error(b, a)
    assert np.array_equal(ab, ba), "photometric error is not symmetric"
    assert np.array_equal(photometric.photometric_error(a, a), np.zeros((10, 12))), \
        "photometric error of identical images is not zero"
    assert (ab > 0).any(), "textured distinct images should differ"
    return "photometric error symmetric, zero iff equal"


# --- masks -------------------------------------------------------------------

def check_mask_fidelity():
    for seed in _SUITE_SEEDS:
        scene = _scene(seed)
        analytic = scene.analytic["r"]
        lr = masks.occlusion_mask(scene.gt_disparity_left, scene.gt_disparity_right, 1.0)
        # the LR rule flags frame-leaving lookups too; compare occlusion
        # detection on the domain outside the (separately exact) oof region
        dom = ~analytic.oof
        inter = int((lr & analytic.occ & dom).sum())
        union = int(((lr | analytic.occ) & dom).sum())
        occ_n = int((analytic.occ & dom).sum())
        assert occ_n > 0, "scene has no occlusion to validate against"
        iou = inter / union
        recall = inter / occ_n
        assert iou >= 0.9, f"seed {seed}: occlusion IoU {iou:.3f} < 0.9"
        assert recall >= 0.95, f"seed {seed}: occlusion recall {recall:.3f} < 0.95"
        oof = masks.oof_mask(scene.gt_disparity_left)
        assert np.array_equal(oof, analytic.oof), f"seed {seed}: oof mask not exact"
    return "LR occlusion IoU >= 0.9, recall >= 0.95; oof exact"


def check_oof_monotone():
    rng = np.random.default_rng(23)
    values = rng.random((8, 15)) * 10
    base = DisparityMap.dense(values)
    grown = DisparityMap.dense(values + rng.random((8, 15)) * 4)
    m0 = masks.oof_mask(base)
    m1 = masks.oof_mask(grown)
    assert (m1 | ~m0).all(), "increasing disparity turned an oof pixel back on"
    return "oof mask is monotone in disparity"


def check_mask_determinism():
    scene = _scene(0)
    a = masks.occlusion_mask(scene.gt_disparity_left, scene.gt_disparity_right)
    b = masks.occlusion_mask(scene.gt_disparity_left, scene.gt_disparity_right)
    assert np.array_equal(a, b), "occlusion mask not deterministic"
    return "masks deterministic and idempotent"


# --- synth -------------------------------------------------------------------

def check_scene_determinism():
    a = _scene(2)
    b = _scene(2)
    for label in synth.VIEW_LABELS:
        assert np.array_equal(a.views_by_label[label].data, b.views_by_label[label].data)
    assert np.array_equal(a.gt_disparity_left.values, b.gt_disparity_left.values)
    assert np.array_equal(a.gt_disparity_right.values, b.gt_disparity_right.values)
    return "scene generation is a pure function of the scene spec"


def check_warp_consistency():
    scene = _scene(1)
    assert scene.integer_mode, "standard scene should be integer mode"
    target = scene.views.target.data
    for src in scene.views.sources:
        res = warp_to_left(src.image, scene.gt_disparity_left, src.scale)
        covis = synth.analytic_covisibility(scene, src.name)
        assert res.valid[covis].all(), f"{src.name}: covisible pixel warp-invalid"
        assert np.array_equal(res.image.data[covis], target[covis]), \
            f"{src.name}: warped view differs from left on covisible pixels"
    return "each view warps onto the left exactly on covisible pixels"


def check_occlusion_complementarity():
    for seed in _SUITE_SEEDS:
        scene = _scene(seed)
        occ_r = scene.analytic["r"].occ
        covis_ll = synth.analytic_covisibility(scene, "ll")
        assert (covis_ll | ~occ_r).all(), \
            f"seed {seed}: pixel occluded vs r is not covered by ll"
    return "pixels occluded in r are covered by ll"


def check_covisibility_union():
    for seed in _SUITE_SEEDS:
        scene = _scene(seed)
        union = np.zeros((scene.spec.height, scene.spec.width), dtype=bool)
        for label in ("r", "ll", "rr", "c"):
            union |= synth.analytic_covisibility(scene, label)
        frac = union.mean()
        assert frac >= 0.99, f"seed {seed}: union covers only {frac:.4f}"
    return "source-view covisibility union covers >= 99% of pixels"


# --- matcher ------------------------------------------------------------------

def check_matcher_oracle():
    for seed, use in ((0, ["r"]), (1, ["r", "ll"])):
        scene = synth.generate_scene(synth.tiny_spec(seed))
        views = scene.views.subset(use)
        fast = matcher.photometric_match(views, d_max=6, window=3)
        slow = reference.naive_photometric_match(views, d_max=6, window=3)
        assert np.array_equal(fast.valid, slow.valid), f"seed {seed}: validity differs"
        assert np.array_equal(fast.values, slow.values), f"seed {seed}: values differ"
    return "photometric_match equals the naive reference bit-exactly"


def check_fuse_monotonic():
    rng = np.random.default_rng(31)
    vols = []
    for _ in range(3):
        costs = np.floor(rng.random((6, 9, 5)) * 24)
        valid = rng.random((6, 9, 5)) > 0.25
        vols.append(matcher.CostVolume(np.where(valid, costs, 25.0), valid, 25.0))
    prev = matcher.fuse_multibaseline(vols[:1])
    for k in (2, 3):
        cur = matcher.fuse_multibaseline(vols[:k])
        sel = prev.valid
        assert (cur.costs[sel] <= prev.costs[sel]).all(), "fused cost increased"
        assert (cur.valid | ~prev.valid).all(), "fusion lost validity"
        prev = cur
    return "adding a volume never increases any fused cost entry"


def check_sgm_zero_penalty_identity():
    rng = np.random.default_rng(37)
    costs = np.floor(rng.random((7, 11, 6)) * 20)
    vol = matcher.CostVolume(costs, np.ones(costs.shape, dtype=bool), 25.0)
    for paths in (4, 8):
        params = matcher.SgmParams(p1=0.0, p2=0.0, paths=paths)
        agg = matcher.sgm_aggregate(vol, params)
        assert np.array_equal(agg.costs, paths * costs), \
            f"{paths}-path zero-penalty aggregation is not paths * raw"
    return "zero-penalty aggregation equals paths * raw cost"


def check_matcher_determinism():
    scene = _scene(0)
    views = scene.views.subset(["r", "ll"])
    a = matcher.sgm_match(views, d_max=16)
    b = matcher.sgm_match(views, d_max=16)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.valid, b.valid), \
        "sgm_match is not bit-deterministic"
    return "identical inputs give bit-identical disparity maps"


def check_census_and_wta_rules():
    rng = np.random.default_rng(41)
    img = _rand_image(rng, 10, 16)
    vol = matcher.census_cost(img, img, 1.0, d_max=3)
    assert (vol.costs[:, :, 0] == 0).all(), "census self-cost at d=0 is not zero"
    flat = Image(np.full((6, 8, 3), 0.5))
    vol = matcher.census_cost(flat, flat, 1.0, d_max=4)
    assert (vol.costs[vol.valid] == 0).all(), "constant images should cost zero"
    uniform = matcher.CostVolume(np.ones((4, 5, 6)), np.ones((4, 5, 6), bool), 7.0)
    wta = matcher.wta_subpixel(uniform)
    assert (wta.values == 0).all(), "uniform volume must pick d = 0 (tie rule)"
    costs = np.array([[[4.0, 1.0, 2.0]]])
    ref = matcher.wta_subpixel(matcher.CostVolume(costs, np.ones((1, 1, 3), bool), 9.0))
    assert abs(float(ref.values[0, 0]) - 1.25) < 1e-12, "parabolic offset wrong"
    return "census self/flat costs zero; WTA tie and parabola rules hold"


# --- metrics -------------------------------------------------------------------

def check_metric_permutation_invariance():
    rng = np.random.default_rng(43)
    gt = DisparityMap.dense(rng.random((8, 9)) * 20)
    pred = DisparityMap.dense(np.maximum(gt.values + rng.normal(0, 2, (8, 9)), 0.0))
    base = metrics.disparity_metrics(pred, gt)["all"]
    perm = rng.permutation(8 * 9)
    shuffle = lambda a: a.reshape(-1)[perm].reshape(8, 9)
    shuffled = metrics.disparity_metrics(
        DisparityMap.dense(shuffle(pred.values)), DisparityMap.dense(shuffle(gt.values))
    )["all"]
    assert abs(base.epe - shuffled.epe) < 1e-12 and base.outlier_rate == shuffled.outlier_rate
    return "metrics are permutation-invariant over pixels"


def check_epe_symmetry():
    rng = np.random.default_rng(47)
    a = DisparityMap.dense(rng.random((6, 7)) * 10)
    b = DisparityMap.dense(rng.random((6, 7)) * 10)
    ab = metrics.disparity_metrics(a, b)["all"].epe
    ba = metrics.disparity_metrics(b, a)["all"].epe
    assert abs(ab - ba) < 1e-12, "EPE not symmetric"
    return "EPE(pred, gt) == EPE(gt, pred)"


def check_region_partition():
    scene = _scene(0)
    m = scene.analytic["r"]
    occ = m.occ & ~m.oof  # disjoint by construction here
    disjoint = masks.RegionMasks(occ, m.oof)
    gt = scene.gt_disparity_left
    rep = metrics.disparity_metrics(gt, gt, disjoint)
    total = rep["all"].count
    parts = sum(rep[k].count for k in ("occ", "oof", "noc") if k in rep)
    assert total == parts, f"partition counts differ: {total} != {parts}"
    return "region counts partition the evaluable pixels"


def check_depth_metric_scaling():
    rng = np.random.default_rng(53)
    gt = rng.random((7, 9)) * 40 + 1
    pred = gt * (1 + rng.normal(0, 0.1, (7, 9)))
    pred = np.maximum(pred, 0.1)
    valid = np.ones((7, 9), dtype=bool)
    base = metrics.depth_metrics(pred, gt, valid)
    scaled = metrics.depth_metrics(3.0 * pred, 3.0 * gt, valid)
    assert abs(base.abs_rel - scaled.abs_rel) < 1e-12
    assert abs(base.rmse_log - scaled.rmse_log) < 1e-12
    assert base.a1 == scaled.a1 and base.a2 == scaled.a2 and base.a3 == scaled.a3
    assert abs(scaled.rmse - 3.0 * base.rmse) < 1e-9
    assert abs(scaled.sq_rel - 3.0 * base.sq_rel) < 1e-9
    return "depth metrics scale as expected under a global depth scale"


def check_metric_closed_forms():
    gt = DisparityMap.dense(np.full((2, 2), 10.0))
    pred = DisparityMap.dense(gt.values + np.array([[1.0, -4.0], [5.0, 2.0]]))
    r = metrics.disparity_metrics(pred, gt)["all"]
    assert abs(r.epe - 3.0) < 1e-12 and abs(r.outlier_rate - 0.5) < 1e-12
    img0 = Image(np.zeros((8, 8, 1)))
    img1 = Image(np.full((8, 8, 1), 0.1))
    assert abs(metrics.psnr(img0, img1) - 20.0) < 1e-9
    assert metrics.psnr(img0, img0) == float("inf")
    assert abs(metrics.ssim(img1, img1) - 1.0) < 1e-12
    d = metrics.depth_metrics(np.full((3, 3), 5.0), np.full((3, 3), 5.0),
                              np.ones((3, 3), bool))
    assert d.as_tuple() == (0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0)
    return "hand-computable metric examples hold exactly"


# --- cli-level artifact determinism ------------------------------------------

def check_scene_dir_determinism():
    scene = _scene(3)
    with tempfile.TemporaryDirectory() as td:
        d1, d2 = Path(td) / "a", Path(td) / "b"
        synth.write_scene_dir(scene, d1)
        synth.write_scene_dir(scene, d2)
        for f in sorted(p.name for p in d1.iterdir()):
            assert (d1 / f).read_bytes() == (d2 / f).read_bytes(), f"{f} differs"
    return "scene directories are byte-identical across runs"


CHECKS = [
    ("imageio.roundtrip", check_io_roundtrip),
    ("imageio.ranges", check_io_ranges),
    ("imageio.resample_constant", check_resample_constant),
    ("geometry.zero_disparity_identity", check_warp_zero_identity),
    ("geometry.rescale_composition", check_warp_composition),
    ("geometry.validity_predicate", check_warp_validity_predicate),
    ("photometric.min_monotonicity", check_min_monotonicity),
    ("photometric.loss_basin", check_loss_basin),
    ("photometric.symmetry_zero", check_pe_symmetry_zero),
    ("masks.occlusion_fidelity", check_mask_fidelity),
    ("masks.oof_monotone", check_oof_monotone),
    ("masks.deterministic", check_mask_determinism),
    ("synth.determinism", check_scene_determinism),
    ("synth.warp_consistency", check_warp_consistency),
    ("synth.occlusion_complementarity", check_occlusion_complementarity),
    ("synth.covisibility_union", check_covisibility_union),
    ("matcher.oracle_equivalence", check_matcher_oracle),
    ("matcher.fuse_monotonic", check_fuse_monotonic),
    ("matcher.zero_penalty_identity", check_sgm_zero_penalty_identity),
    ("matcher.determinism", check_matcher_determinism),
    ("matcher.census_wta_rules", check_census_and_wta_rules),
    ("metrics.permutation_invariance", check_metric_permutation_invariance),
    ("metrics.epe_symmetry", check_epe_symmetry),
    ("metrics.region_partition", check_region_partition),
    ("metrics.depth_scaling", check_depth_metric_scaling),
    ("metrics.closed_forms", check_metric_closed_forms),
    ("cli.artifact_determinism", check_scene_dir_determinism),
]


def _run_one(item) -> CheckResult:
    name, fn = item
    try:
        detail = fn()
        return CheckResult(name, True, detail or "")
    except Exception as e:  # noqa: BLE001 - a failing check must not kill the run
        buf = _io.StringIO()
        buf.write(f"{type(e).__name__}: {e}")
        return CheckResult(name, False, buf.getvalue())


def run_validation(threads: int = 1) -> list[CheckResult]:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_run_one, CHECKS))
    return [_run_one(item) for item in CHECKS]
