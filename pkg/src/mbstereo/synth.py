"""Deterministic synthetic multi-baseline scenes with exact ground truth.

A scene is a textured background plane plus fronto-parallel textured
rectangles (nearer = larger disparity). Five views are rendered on the
shared epipolar axis: ll, l, c, r, rr at scales -1, 0, 0.5, 1, 2; a scene
point at left abscissa x appears at x - s * d in the view with scale s.
Layer shifts that are integral for every view make rendering exact
(copied texels); fractional shifts fall back to bilinear sampling.

Ground-truth disparities for the left and right views, per-view analytic
occlusion / out-of-frame masks, and co-visibility are computed in closed
form from the rectangle geometry, which is what makes these scenes usable
as an oracle for warping, losses, masks, and matching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .geometry import VIEW_SCALES, ViewSet, ViewSource
from .imageio import (
    DisparityMap,
    Image,
    _atomic_write_bytes,
    load_disparity,
    load_image,
    load_mask,
    store_disparity,
    store_image,
    store_mask,
)
from .masks import RegionMasks

VIEW_LABELS = ("ll", "l", "c", "r", "rr")
SOURCE_ORDER = ("r", "ll", "rr", "c")  # canonical source order; target is l

_SHIFT_EPS = 1e-9


@dataclass(frozen=True)
class RectLayer:
    """Fronto-parallel rectangle at a constant disparity, in left-view pixels."""

    x: int
    y: int
    w: int
    h: int
    disparity: float


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    width: int
    height: int
    layers: tuple[RectLayer, ...]
    background_disparity: float = 0.0
    texture_smoothness: float = 1.0
    channels: int = 3

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.width < 2 or self.height < 2:
            raise ValueError("scene must be at least 2x2")
        if not 0 <= self.background_disparity < math.inf:
            raise ValueError("background disparity must be finite and >= 0")
        for k, lay in enumerate(self.layers):
            if lay.disparity <= self.background_disparity:
                raise ValueError(f"layer {k} must be nearer than the background")
            if lay.w < 1 or lay.h < 1:
                raise ValueError(f"layer {k} has an empty rectangle")
            if not (0 <= lay.x and lay.x + lay.w <= self.width):
                raise ValueError(f"layer {k} leaves the frame horizontally")
            if not (0 <= lay.y and lay.y + lay.h <= self.height):
                raise ValueError(f"layer {k} leaves the frame vertically")


@dataclass(frozen=True)
class _Element:
    """Renderable scene element: the background plane or one layer."""

    disparity: float
    texture: np.ndarray  # (rows, cols, C)
    x_origin: int  # left-view abscissa of texture column 0
    y0: int
    y1: int  # row span [y0, y1)


@dataclass(frozen=True)
class SyntheticScene:
    spec: SceneSpec
    views: ViewSet  # target = l, sources in SOURCE_ORDER
    views_by_label: dict[str, Image]
    gt_disparity_left: DisparityMap
    gt_disparity_right: DisparityMap
    analytic: dict[str, RegionMasks]  # per view label, left view vs that view
    integer_mode: bool

    @property
    def analytic_masks(self) -> RegionMasks:
        """Masks of the canonical stereo pair (left vs r)."""
        return self.analytic["r"]


def _texture(seed_key, rows: int, cols: int, channels: int, smoothness: float) -> np.ndarray:
    rng = np.random.default_rng(seed_key)
    t = rng.random((rows, cols, channels))
    if smoothness > 0:
        t = gaussian_filter(t, sigma=(smoothness, smoothness, 0), mode="reflect")
    lo, hi = float(t.min()), float(t.max())
    if hi - lo < 1e-9:  # blur degenerated; keep contrast with a deterministic ramp
        t = np.add.outer(np.arange(rows) % 7, np.arange(cols) % 11)[:, :, None] / 18.0
        t = np.broadcast_to(t, (rows, cols, channels)).copy()
        lo, hi = float(t.min()), float(t.max())
    t = 0.05 + 0.9 * (t - lo) / (hi - lo)
    t = np.round(t * 255.0) / 255.0  # 8-bit grid so PNG round-trips are lossless
    assert float(t.max()) - float(t.min()) >= 0.25, "texture variance too low"
    return t


def _elements(spec: SceneSpec) -> list[_Element]:
    d_max = max([spec.background_disparity] + [l.disparity for l in spec.layers])
    margin = int(math.ceil(2.0 * d_max)) + 2
    bg = _Element(
        disparity=spec.background_disparity,
        texture=_texture([spec.seed, 977, 0], spec.height, spec.width + 2 * margin,
                         spec.channels, spec.texture_smoothness),
        x_origin=-margin,
        y0=0,
        y1=spec.height,
    )
    elems = [bg]
    order = sorted(range(len(spec.layers)), key=lambda k: spec.layers[k].disparity)
    for k in order:  # back to front: nearer layers painted later
        lay = spec.layers[k]
        elems.append(
            _Element(
                disparity=lay.disparity,
                texture=_texture([spec.seed, 977, k + 1], lay.h, lay.w,
                                 spec.channels, spec.texture_smoothness),
                x_origin=lay.x,
                y0=lay.y,
                y1=lay.y + lay.h,
            )
        )
    return elems


def _paint(canvas: np.ndarray, elem: _Element, scale: float) -> None:
    """Paint one element into a view canvas; exact texel copy for integral shifts."""
    h, w = canvas.shape[:2]
    shift = scale * elem.disparity  # view abscissa = left abscissa - shift
    cols = elem.texture.shape[1]
    # view columns xv with texture abscissa u = xv + shift - x_origin in [0, cols)
    lo = elem.x_origin - shift
    hi = lo + cols
    x_start = max(0, int(math.ceil(lo - _SHIFT_EPS)))
    x_stop = min(w, int(math.ceil(hi - _SHIFT_EPS)))
    if x_stop <= x_start:
        return
    xv = np.arange(x_start, x_stop)
    u = xv + (shift - elem.x_origin)
    if abs(shift - round(shift)) < _SHIFT_EPS:
        ui = np.clip(np.rint(u).astype(np.int64), 0, cols - 1)
        patch = elem.texture[:, ui]
    else:
        u0 = np.clip(np.floor(u).astype(np.int64), 0, cols - 1)
        u1 = np.minimum(u0 + 1, cols - 1)
        f = np.clip(u - u0, 0.0, 1.0)[None, :, None]
        a = elem.texture[:, u0]
        b = elem.texture[:, u1]
        patch = np.clip(a + f * (b - a), 0.0, 1.0)
    canvas[elem.y0 : elem.y1, x_start:x_stop] = patch[: elem.y1 - elem.y0]


def _render_view(spec: SceneSpec, elems: list[_Element], scale: float) -> Image:
    canvas = np.zeros((spec.height, spec.width, spec.channels), dtype=np.float64)
    for elem in elems:
        _paint(canvas, elem, scale)
    return Image(canvas)


def _disparity_in_view(spec: SceneSpec, elems: list[_Element], scale: float) -> DisparityMap:
    """True per-unit-baseline disparity field of the view with the given scale."""
    values = np.zeros((spec.height, spec.width), dtype=np.float64)
    h, w = spec.height, spec.width
    for elem in elems:
        shift = scale * elem.disparity
        cols = elem.texture.shape[1]
        lo = elem.x_origin - shift
        x_start = max(0, int(math.ceil(lo - _SHIFT_EPS)))
        x_stop = min(w, int(math.ceil(lo + cols - _SHIFT_EPS)))
        if x_stop > x_start:
            values[elem.y0 : elem.y1, x_start:x_stop] = elem.disparity
    return DisparityMap.dense(values)


def _masks_for_view(spec: SceneSpec, elems: list[_Element], gt_left: DisparityMap,
                    scale: float) -> RegionMasks:
    """Closed-form occlusion and out-of-frame masks for left vs one view."""
    h, w = spec.height, spec.width
    d_front = gt_left.values  # disparity of the element seen at each left pixel
    xv = np.arange(w, dtype=np.float64)[None, :] - scale * d_front
    oof = (xv < 0.0) | (xv > w - 1.0)

    occ = np.zeros((h, w), dtype=bool)
    ys = np.arange(h)[:, None]
    for elem in elems[1:]:  # layers only; the background occludes nothing
        shift = scale * elem.disparity
        cols = elem.texture.shape[1]
        u = xv + (shift - elem.x_origin)
        covers = (u > -_SHIFT_EPS) & (u < cols - _SHIFT_EPS)
        in_rows = (ys >= elem.y0) & (ys < elem.y1)
        occ |= (elem.disparity > d_front) & in_rows & covers
    return RegionMasks(occ, oof)


def generate_scene(spec: SceneSpec) -> SyntheticScene:
    """Render all five views plus ground truth; pure function of the spec."""
    elems = _elements(spec)
    views_by_label = {
        label: _render_view(spec, elems, VIEW_SCALES[label]) for label in VIEW_LABELS
    }
    gt_left = _disparity_in_view(spec, elems, 0.0)
    gt_right = _disparity_in_view(spec, elems, 1.0)
    analytic = {
        label: _masks_for_view(spec, elems, gt_left, VIEW_SCALES[label])
        for label in VIEW_LABELS
    }
    integer_mode = all(
        abs(s * e.disparity - round(s * e.disparity)) < _SHIFT_EPS
        for e in elems
        for s in VIEW_SCALES.values()
    )
    views = ViewSet(
        views_by_label["l"],
        tuple(ViewSource(n, views_by_label[n], VIEW_SCALES[n]) for n in SOURCE_ORDER),
    )
    return SyntheticScene(
        spec=spec,
        views=views,
        views_by_label=views_by_label,
        gt_disparity_left=gt_left,
        gt_disparity_right=gt_right,
        analytic=analytic,
        integer_mode=integer_mode,
    )


def analytic_covisibility(scene: SyntheticScene, view_label: str) -> np.ndarray:
    """True where the left pixel's scene point is unoccluded and in-frame in the view."""
    if view_label not in scene.analytic:
        raise KeyError(f"unknown view label {view_label!r}")
    m = scene.analytic[view_label]
    return ~m.occ & ~m.oof


# ---------------------------------------------------------------------------
# Canonical scene families

def standard_spec(seed: int, width: int = 256, height: int = 128,
                  fractional: bool = False) -> SceneSpec:
    """One scene of the standard suite: slotted non-interacting layers.

    Layers live in horizontal slots with enough slack that occlusion bands
    never touch a neighboring layer, and even disparities keep all five
    view shifts integral. The fractional variant offsets disparities by
    0.5 and smooths textures more, for subpixel tests.
    """
    rng = np.random.default_rng([seed, 2417])
    bg_d = 2.0
    d_pool = [6.0, 8.0, 10.0, 12.0]
    edge = 28  # >= 2 * max disparity + 4
    usable = width - 2 * edge
    n_layers = int(rng.integers(2, 4)) if usable >= 150 else max(1, usable // 60)
    slot_w = usable // n_layers
    layers = []
    for i in range(n_layers):
        d = float(rng.choice(d_pool))
        w_max = min(48, slot_w - 26)
        w = int(rng.integers(20, max(21, w_max + 1)))
        h = int(rng.integers(24, min(57, height - 12)))
        slot_start = edge + i * slot_w
        x = slot_start + 13 + int(rng.integers(0, max(1, slot_w - 26 - w + 1)))
        y = 6 + int(rng.integers(0, max(1, height - 12 - h + 1)))
        layers.append(RectLayer(x, y, w, h, d + (0.5 if fractional else 0.0)))
    # raw noise keeps per-pixel matching unambiguous (no flat-spot ties);
    # the fractional variant smooths so bilinear resampling stays accurate
    return SceneSpec(
        seed=seed,
        width=width,
        height=height,
        layers=tuple(layers),
        background_disparity=bg_d + (0.25 if fractional else 0.0),
        texture_smoothness=2.0 if fractional else 0.0,
    )


def standard_suite(seeds=range(10), width: int = 256, height: int = 128,
                   fractional: bool = False) -> list[SceneSpec]:
    return [standard_spec(s, width, height, fractional) for s in seeds]


def tiny_spec(seed: int, width: int = 28, height: int = 24) -> SceneSpec:
    """Small random scene for oracle-equivalence checks (integer disparities)."""
    if width < 12 or height < 8:
        raise ValueError("tiny scenes need at least 12x8 pixels")
    rng = np.random.default_rng([seed, 5021])
    bg_d = float(rng.integers(0, 2))
    n_layers = int(rng.integers(1, 3))
    layers = []
    for _ in range(n_layers):
        d = float(rng.integers(int(bg_d) + 2, 6))
        w = int(rng.integers(4, min(width - 6, max(5, width // 3)) + 1))
        h = int(rng.integers(4, min(height - 3, max(5, height // 2)) + 1))
        x = int(rng.integers(2, width - w - 1))
        y = int(rng.integers(1, height - h))
        layers.append(RectLayer(x, y, w, h, d))
    return SceneSpec(
        seed=seed,
        width=width,
        height=height,
        layers=tuple(layers),
        background_disparity=bg_d,
        texture_smoothness=0.8,
    )


# ---------------------------------------------------------------------------
# Scene directories (written by the synth command, read by match / eval)

MANIFEST_NAME = "manifest.txt"


def write_scene_dir(scene: SyntheticScene, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for label in VIEW_LABELS:
        store_image(out / f"{label}.png", scene.views_by_label[label], bit_depth=8)
    store_disparity(out / "disp_l.pfm", scene.gt_disparity_left, "pfm")
    store_disparity(out / "disp_r.pfm", scene.gt_disparity_right, "pfm")
    store_mask(out / "occ.png", scene.analytic_masks.occ)
    store_mask(out / "oof.png", scene.analytic_masks.oof)

    spec = scene.spec
    lines = [
        f"seed = {spec.seed}",
        f"width = {spec.width}",
        f"height = {spec.height}",
        f"channels = {spec.channels}",
        f"background_disparity = {spec.background_disparity!r}",
        f"texture_smoothness = {spec.texture_smoothness!r}",
        f"layer_count = {len(spec.layers)}",
    ]
    for i, lay in enumerate(spec.layers):
        lines.append(f"layer.{i} = {lay.x},{lay.y},{lay.w},{lay.h},{lay.disparity!r}")
    for label in VIEW_LABELS:
        lines.append(f"scale.{label} = {VIEW_SCALES[label]!r}")
    lines.append(f"integer_mode = {str(scene.integer_mode).lower()}")
    text = "\n".join(lines) + "\n"
    _atomic_write_bytes(out / MANIFEST_NAME, text.encode())


def parse_manifest(text: str) -> dict[str, str]:
    entries = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"manifest line without '=': {raw!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def spec_from_manifest(entries: dict[str, str]) -> SceneSpec:
    n = int(entries["layer_count"])
    layers = []
    for i in range(n):
        x, y, w, h, d = entries[f"layer.{i}"].split(",")
        layers.append(RectLayer(int(x), int(y), int(w), int(h), float(d)))
    return SceneSpec(
        seed=int(entries["seed"]),
        width=int(entries["width"]),
        height=int(entries["height"]),
        layers=tuple(layers),
        background_disparity=float(entries["background_disparity"]),
        texture_smoothness=float(entries["texture_smoothness"]),
        channels=int(entries["channels"]),
    )


@dataclass(frozen=True)
class SceneDir:
    """A scene directory loaded from disk."""

    views_by_label: dict[str, Image]
    scales: dict[str, float]
    gt_disparity_left: DisparityMap
    gt_disparity_right: DisparityMap
    masks: RegionMasks
    manifest: dict[str, str] = field(default_factory=dict)

    def view_set(self, use=SOURCE_ORDER) -> ViewSet:
        for name in use:
            if name not in self.views_by_label or name == "l":
                raise ValueError(f"unknown source view {name!r}")
        return ViewSet(
            self.views_by_label["l"],
            tuple(ViewSource(n, self.views_by_label[n], self.scales[n]) for n in use),
        )


def read_scene_dir(path) -> SceneDir:
    from .imageio import FormatError

    p = Path(path)
    manifest = parse_manifest((p / MANIFEST_NAME).read_text())
    views = {label: load_image(p / f"{label}.png") for label in VIEW_LABELS}
    try:
        scales = {label: float(manifest[f"scale.{label}"]) for label in VIEW_LABELS}
    except KeyError as e:
        raise FormatError(f"scene manifest missing key {e}") from e
    return SceneDir(
        views_by_label=views,
        scales=scales,
        gt_disparity_left=load_disparity(p / "disp_l.pfm", "pfm"),
        gt_disparity_right=load_disparity(p / "disp_r.pfm", "pfm"),
        masks=RegionMasks(load_mask(p / "occ.png"), load_mask(p / "oof.png")),
        manifest=manifest,
    )
