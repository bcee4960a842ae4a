"""Multi-baseline stereo toolkit.

Disparity-conditioned view warping, the per-pixel minimum warping loss,
occlusion / out-of-frame masks, census + SGM matching with multi-baseline
cost fusion, evaluation metrics, and a deterministic synthetic scene
oracle, all tied together by the `mbstereo` CLI.
"""

from .geometry import VIEW_SCALES, ViewSet, ViewSource, WarpResult, effective_scale, warp_to_left
from .imageio import (
    DisparityMap,
    FormatError,
    Image,
    load_disparity,
    load_image,
    load_mask,
    resample_bilinear,
    store_disparity,
    store_image,
    store_mask,
)
from .masks import RegionMasks, occlusion_mask, oof_mask
from .matcher import (
    CostVolume,
    SgmParams,
    census_cost,
    fuse_multibaseline,
    photometric_cost_volume,
    photometric_match,
    sgm_aggregate,
    sgm_match,
    wta_subpixel,
)
from .metrics import (
    DepthMetrics,
    MetricsReport,
    RegionDisparityMetrics,
    d1_rate,
    depth_metrics,
    disparity_metrics,
    format_report,
    fusion_ssim,
    psnr,
    ssim,
    warp_error,
)
from .photometric import LossMap, min_warping_loss, photometric_error, reduce_loss, ssim_map
from .synth import (
    RectLayer,
    SceneSpec,
    SyntheticScene,
    analytic_covisibility,
    generate_scene,
    read_scene_dir,
    standard_spec,
    standard_suite,
    tiny_spec,
    write_scene_dir,
)

__version__ = "0.1.0"
