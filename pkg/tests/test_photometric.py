import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mbstereo.geometry import warp_to_left
from mbstereo.imageio import DisparityMap, Image
from mbstereo.photometric import (
    LossMap,
    min_warping_loss,
    photometric_error,
    reduce_loss,
    ssim_map,
)
from mbstereo.synth import (
    RectLayer,
    SceneSpec,
    analytic_covisibility,
    generate_scene,
    standard_spec,
)

from conftest import quantized_image

C1 = 0.01**2
C2 = 0.03**2


def scalar_ssim_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Independent per-window SSIM: reflect borders, 3x3 uniform stats."""
    h, w, ch = a.shape

    def refl(i, n):
        if i < 0:
            return -i
        if i >= n:
            return 2 * (n - 1) - i
        return i

    def box(plane, y, x):
        s = 0.0
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                s += plane[refl(y + dy, h), refl(x + dx, w)]
        return s / 9.0

    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            total = 0.0
            for c in range(ch):
                pa = a[:, :, c]
                pb = b[:, :, c]
                ma = box(pa, y, x)
                mb = box(pb, y, x)
                va = box(pa * pa, y, x) - ma * ma
                vb = box(pb * pb, y, x) - mb * mb
                cab = box(pa * pb, y, x) - ma * mb
                num = (2.0 * ma * mb + C1) * (2.0 * cab + C2)
                den = (ma * ma + mb * mb + C1) * (va + vb + C2)
                total += num / den
            out[y, x] = total / ch
    return out


def constant_ssim(c1: float, c2: float) -> float:
    """Closed form on constant images: variance terms collapse to C2/C2."""
    return ((2 * c1 * c2 + C1) * C2) / ((c1 * c1 + c2 * c2 + C1) * C2)


class TestSsimMap:
    def test_self_similarity_is_exactly_one(self, rng):
        img = quantized_image(rng, 9, 12)
        assert np.array_equal(ssim_map(img, img), np.ones((9, 12)))

    def test_constant_pair_closed_form(self):
        a = Image(np.full((5, 6, 1), 0.2))
        b = Image(np.full((5, 6, 1), 0.8))
        expected = constant_ssim(0.2, 0.8)
        assert np.allclose(ssim_map(a, b), expected, atol=1e-15)

    def test_matches_scalar_window_oracle_exactly(self, rng):
        a = quantized_image(rng, 16, 16)
        b = quantized_image(rng, 16, 16)
        assert np.array_equal(ssim_map(a, b), scalar_ssim_oracle(a.data, b.data))

    def test_range(self, rng):
        a = quantized_image(rng, 10, 10)
        b = quantized_image(rng, 10, 10)
        s = ssim_map(a, b)
        assert s.min() >= -1.0 - 1e-12 and s.max() <= 1.0 + 1e-12

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            ssim_map(quantized_image(rng, 4, 5), quantized_image(rng, 4, 6))


class TestPhotometricError:
    def test_identical_inputs_zero(self, rng):
        img = quantized_image(rng, 7, 8)
        for alpha in (0.0, 0.5, 0.85, 1.0):
            assert np.array_equal(photometric_error(img, img, alpha), np.zeros((7, 8)))

    def test_alpha_zero_is_mean_abs_difference(self, rng):
        a = quantized_image(rng, 6, 7)
        b = quantized_image(rng, 6, 7)
        expect = np.abs(a.data - b.data).mean(axis=2)
        assert np.allclose(photometric_error(a, b, 0.0), expect, atol=1e-15)

    def test_alpha_one_constant_closed_form(self):
        a = Image(np.full((4, 4, 1), 0.2))
        b = Image(np.full((4, 4, 1), 0.8))
        expected = 0.5 * (1.0 - constant_ssim(0.2, 0.8))
        assert np.allclose(photometric_error(a, b, 1.0), expected, atol=1e-15)

    def test_alpha_out_of_range(self, rng):
        img = quantized_image(rng, 4, 4)
        with pytest.raises(ValueError):
            photometric_error(img, img, 1.5)

    @given(st.integers(0, 2**31 - 1))
    def test_symmetric(self, seed):
        r = np.random.default_rng(seed)
        a = Image(r.random((5, 6, 3)))
        b = Image(r.random((5, 6, 3)))
        assert np.array_equal(photometric_error(a, b), photometric_error(b, a))

    def test_positive_when_different(self, rng):
        a = quantized_image(rng, 6, 6)
        b = quantized_image(rng, 6, 6)
        assert (photometric_error(a, b) > 0).any()


def no_occlusion_scene(seed=0):
    return generate_scene(
        SceneSpec(seed=seed, width=96, height=64, layers=(),
                  background_disparity=3.0, texture_smoothness=0.0)
    )


def one_layer_scene(seed=5):
    return generate_scene(
        SceneSpec(seed=seed, width=96, height=64,
                  layers=(RectLayer(40, 16, 20, 24, 8.0),),
                  background_disparity=2.0, texture_smoothness=0.0)
    )


class TestMinWarpingLoss:
    def test_single_view_at_gt_near_zero(self):
        scene = no_occlusion_scene()
        lm = min_warping_loss(scene.views.subset(["r"]), scene.gt_disparity_left)
        assert reduce_loss(lm) <= 0.01

    def test_duplicated_source_changes_nothing(self):
        scene = one_layer_scene()
        r = scene.views.source("r")
        from mbstereo.geometry import ViewSet, ViewSource

        single = ViewSet(scene.views.target, (r,))
        doubled = ViewSet(scene.views.target,
                          (r, ViewSource("r2", r.image, r.scale)))
        a = min_warping_loss(single, scene.gt_disparity_left)
        b = min_warping_loss(doubled, scene.gt_disparity_left)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.valid, b.valid)
        assert all(b.labels[i] == "r" for i in b.chosen[b.valid])

    def test_occluded_pixel_prefers_opposite_side_view(self):
        scene = one_layer_scene()
        gt = scene.gt_disparity_left
        views = scene.views.subset(["r", "ll"])
        lm = min_warping_loss(views, gt)

        pick = scene.analytic["r"].occ & analytic_covisibility(scene, "ll")
        assert pick.any()
        # oracle: recompute both per-view error maps directly
        pe = {}
        for name in ("r", "ll"):
            src = scene.views.source(name)
            w = warp_to_left(src.image, gt, src.scale)
            pe[name] = np.where(w.valid, photometric_error(scene.views.target, w.image),
                                np.inf)
        assert (pe["ll"][pick] < pe["r"][pick]).all()
        assert all(lm.labels[i] == "ll" for i in lm.chosen[pick])

    def test_empty_sources_rejected(self, rng):
        from mbstereo.geometry import ViewSet

        views = ViewSet(quantized_image(rng, 4, 4), ())
        with pytest.raises(ValueError):
            min_warping_loss(views, DisparityMap.dense(np.zeros((4, 4))))

    def test_invalid_only_where_no_view_sees(self):
        scene = one_layer_scene()
        gt = scene.gt_disparity_left
        lm = min_warping_loss(scene.views.subset(["r"]), gt)
        xs = np.arange(96)[None, :] - gt.values
        assert np.array_equal(lm.valid, (xs >= 0) & (xs <= 95))

    @given(st.integers(0, 5))
    def test_min_monotone_under_view_addition(self, seed):
        scene = generate_scene(standard_spec(seed, width=96, height=64))
        gt = scene.gt_disparity_left
        small = min_warping_loss(scene.views.subset(["r", "c"]), gt)
        big = min_warping_loss(scene.views, gt)
        assert (big.valid | ~small.valid).all()
        sel = small.valid
        assert (big.values[sel] <= small.values[sel]).all()


class TestReduceLoss:
    def _lossmap(self, values, valid):
        chosen = np.where(valid, 0, -1).astype(np.int32)
        return LossMap(values, valid, chosen, ("r",))

    def test_uniform_map(self):
        lm = self._lossmap(np.full((4, 4), 0.5), np.ones((4, 4), bool))
        assert reduce_loss(lm) == 0.5

    def test_checker_selection(self):
        checker = np.indices((4, 4)).sum(axis=0) % 2 == 0
        values = checker.astype(np.float64)
        lm = self._lossmap(values, np.ones((4, 4), bool))
        assert reduce_loss(lm, checker) == 1.0
        assert reduce_loss(lm, ~checker) == 0.0

    def test_matches_brute_force_mean(self, rng):
        values = rng.random((6, 7))
        valid = rng.random((6, 7)) > 0.3
        lm = self._lossmap(np.where(valid, values, 0.0), valid)
        total = 0.0
        n = 0
        for y in range(6):
            for x in range(7):
                if valid[y, x]:
                    total += values[y, x]
                    n += 1
        assert reduce_loss(lm) == pytest.approx(total / n, rel=1e-12)

    def test_empty_selection_rejected(self):
        lm = self._lossmap(np.zeros((3, 3)), np.zeros((3, 3), bool))
        with pytest.raises(ValueError):
            reduce_loss(lm)


class TestLossBasin:
    def test_gt_beats_shifted_disparity(self):
        scene = generate_scene(standard_spec(6))
        gt = scene.gt_disparity_left
        at_gt = min_warping_loss(scene.views, gt)
        for delta in (-2.0, 2.0):
            shifted = DisparityMap(np.maximum(gt.values + delta, 0.0), gt.valid)
            off = min_warping_loss(scene.views, shifted)
            sel = at_gt.valid & off.valid
            assert at_gt.values[sel].mean() < off.values[sel].mean()

    def test_per_pixel_basin_with_pure_l1(self):
        scene = generate_scene(standard_spec(6))
        gt = scene.gt_disparity_left
        at_gt = min_warping_loss(scene.views, gt, alpha=0.0)
        union_visible = np.zeros(gt.values.shape, dtype=bool)
        for label in ("r", "ll", "rr", "c"):
            union_visible |= analytic_covisibility(scene, label)
        assert (at_gt.values[union_visible & at_gt.valid] == 0.0).all()
        for delta in (-4.0, -2.0, 2.0, 4.0):
            shifted = DisparityMap(np.maximum(gt.values + delta, 0.0), gt.valid)
            off = min_warping_loss(scene.views, shifted, alpha=0.0)
            sel = at_gt.valid & off.valid
            assert (at_gt.values[sel] <= off.values[sel]).all()
