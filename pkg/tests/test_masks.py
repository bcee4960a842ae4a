import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mbstereo.imageio import DisparityMap
from mbstereo.masks import RegionMasks, occlusion_mask, oof_mask
from mbstereo.synth import generate_scene, standard_spec


def dense(values):
    return DisparityMap.dense(np.asarray(values, dtype=np.float64))


class TestOcclusionMask:
    def test_consistent_constant_fields_interior(self):
        d = dense(np.full((3, 12), 4.0))
        occ = occlusion_mask(d, d, 1.0)
        assert not occ[:, 4:].any()  # interior: lookup lands in frame, delta 0
        assert occ[:, :4].all()  # lookup abscissa leaves the frame

    def test_direct_substitution_example(self):
        # d_l(x=10) = 5 and d_r(x=5) = 2 gives delta 3 >= 1
        d_l = np.zeros((1, 16))
        d_r = np.zeros((1, 16))
        d_l[0, 10] = 5.0
        d_r[0, 5] = 2.0
        occ = occlusion_mask(dense(d_l), dense(d_r), 1.0)
        assert occ[0, 10]

    def test_threshold_gates_delta(self):
        d_l = np.full((1, 16), 6.0)
        d_r = np.full((1, 16), 4.0)  # delta 2 everywhere
        left, right = dense(d_l), dense(d_r)
        assert occlusion_mask(left, right, 2.0)[0, 10]
        assert not occlusion_mask(left, right, 2.5)[0, 10]

    def test_rounding_of_lookup_abscissa(self):
        # d_l = 1.5 at x=10 looks up round(8.5) = 9 (half rounds up)
        d_l = np.zeros((1, 16))
        d_l[0, 10] = 1.5
        d_r = np.zeros((1, 16))
        d_r[0, 9] = 3.0
        occ = occlusion_mask(dense(d_l), dense(d_r), 1.0)
        assert occ[0, 10]
        d_r[0, 9] = 1.5  # consistent again
        assert not occlusion_mask(dense(d_l), dense(d_r), 1.0)[0, 10]

    def test_invalid_left_pixels_not_flagged(self):
        values = np.full((2, 8), 3.0)
        valid = np.ones((2, 8), bool)
        valid[0, 0] = False
        left = DisparityMap(np.where(valid, values, 0.0), valid)
        occ = occlusion_mask(left, dense(np.full((2, 8), 3.0)), 1.0)
        assert not occ[0, 0]

    def test_invalid_right_lookup_flagged(self):
        left = dense(np.zeros((1, 8)))
        right = DisparityMap(np.zeros((1, 8)), np.zeros((1, 8), bool))
        assert occlusion_mask(left, right, 1.0).all()

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            occlusion_mask(dense(np.zeros((2, 4))), dense(np.zeros((2, 5))))

    def test_nonpositive_threshold(self):
        d = dense(np.zeros((2, 4)))
        with pytest.raises(ValueError):
            occlusion_mask(d, d, 0.0)


class TestOofMask:
    def test_substitution_examples(self):
        values = np.zeros((1, 16))
        values[0, 3] = 5.0  # shift -2 -> oof
        values[0, 10] = 10.0  # shift 0 -> still in frame
        m = oof_mask(dense(values))
        assert m[0, 3]
        assert not m[0, 10]

    def test_invalid_pixels_excluded(self):
        values = np.full((1, 8), 20.0)
        valid = np.zeros((1, 8), bool)
        m = oof_mask(DisparityMap(np.zeros((1, 8)), valid))
        assert not m.any()

    @given(st.integers(0, 2**31 - 1))
    def test_monotone_in_disparity(self, seed):
        r = np.random.default_rng(seed)
        base = r.random((4, 9)) * 6
        grown = base + r.random((4, 9)) * 5
        m0 = oof_mask(dense(base))
        m1 = oof_mask(dense(grown))
        assert (m1 | ~m0).all()

    def test_idempotent(self):
        d = dense(np.arange(12).reshape(2, 6) * 1.5)
        assert np.array_equal(oof_mask(d), oof_mask(d))


class TestAgainstSyntheticOracle:
    def test_lr_mask_matches_analytic_occlusion(self):
        for seed in range(4):
            scene = generate_scene(standard_spec(seed))
            an = scene.analytic["r"]
            lr = occlusion_mask(scene.gt_disparity_left, scene.gt_disparity_right, 1.0)
            dom = ~an.oof  # frame-leaving lookups are flagged by design
            inter = int((lr & an.occ & dom).sum())
            union = int(((lr | an.occ) & dom).sum())
            occ_n = int((an.occ & dom).sum())
            assert inter / union >= 0.9
            assert inter / occ_n >= 0.95

    def test_oof_mask_exact(self):
        for seed in range(4):
            scene = generate_scene(standard_spec(seed))
            assert np.array_equal(oof_mask(scene.gt_disparity_left),
                                  scene.analytic["r"].oof)


class TestRegionMasks:
    def test_noc_is_complement(self, rng):
        occ = rng.random((5, 6)) > 0.6
        oof = rng.random((5, 6)) > 0.7
        m = RegionMasks(occ, oof)
        assert np.array_equal(m.noc, ~occ & ~oof)

    def test_shape_and_dtype_checks(self):
        with pytest.raises(ValueError):
            RegionMasks(np.zeros((2, 2), bool), np.zeros((2, 3), bool))
        with pytest.raises(ValueError):
            RegionMasks(np.zeros((2, 2)), np.zeros((2, 2), bool))
