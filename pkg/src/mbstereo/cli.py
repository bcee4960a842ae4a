"""Command-line entry point binding the library into reproducible pipelines.

Subcommands: synth | warp | masks | loss-map | match | eval | validate.
Every parameter can come from a plain `key = value` config file
(--config); explicit flags override it. The fully resolved configuration
is echoed next to the outputs so runs can be reproduced exactly.

Exit codes: 0 ok, 1 invalid arguments, 2 I/O failure, 3 validation failure.
MBSTEREO_THREADS sets the default worker count where parallelism applies.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .geometry import warp_to_left
from .imageio import (
    DisparityMap,
    FormatError,
    Image,
    _atomic_write_bytes,
    load_disparity,
    load_image,
    store_disparity,
    store_image,
    store_mask,
)
from .masks import occlusion_mask, oof_mask
from .matcher import SgmParams, photometric_match, sgm_match
from .metrics import MetricsReport, depth_metrics, disparity_metrics, format_report
from .metrics import fusion_ssim as metric_fusion_ssim
from .metrics import psnr as metric_psnr
from .metrics import ssim as metric_ssim
from .metrics import warp_error as metric_warp_error
from .photometric import min_warping_loss
from .synth import (
    generate_scene,
    parse_manifest,
    read_scene_dir,
    standard_spec,
    write_scene_dir,
)
from .validation import run_validation

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_VALIDATION = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise UsageError(message)


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _default_threads() -> int:
    raw = os.environ.get("MBSTEREO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"MBSTEREO_THREADS must be an integer, got {raw!r}")


# Option tables drive argparse, the config file, and the config echo alike.
# (name, type, default, help); required options use default=REQUIRED.
REQUIRED = object()

_COMMON = [("config", str, None, "plain key = value config file; flags override")]

_SPECS: dict[str, list[tuple]] = {
    "synth": _COMMON + [
        ("seed", int, REQUIRED, "master scene seed"),
        ("out", str, REQUIRED, "output scene directory"),
        ("width", int, 256, "scene width in pixels"),
        ("height", int, 128, "scene height in pixels"),
        ("fractional", _parse_bool, False, "use fractional disparities"),
    ],
    "warp": _COMMON + [
        ("views", str, REQUIRED, "scene directory (from synth)"),
        ("view", str, REQUIRED, "source view label: ll, c, r, or rr"),
        ("disp", str, None, "PFM disparity (default: scene ground truth)"),
        ("out", str, REQUIRED, "output directory"),
    ],
    "masks": _COMMON + [
        ("left_disp", str, REQUIRED, "left-view disparity PFM"),
        ("right_disp", str, REQUIRED, "right-view disparity PFM"),
        ("threshold", float, 1.0, "consistency threshold in pixels"),
        ("out", str, REQUIRED, "output directory"),
    ],
    "loss-map": _COMMON + [
        ("views", str, REQUIRED, "scene directory"),
        ("use", str, "r,ll,rr,c", "comma-separated source views"),
        ("disp", str, None, "PFM disparity (default: scene ground truth)"),
        ("alpha", float, 0.85, "SSIM weight of the hybrid error"),
        ("out", str, REQUIRED, "output directory"),
    ],
    "match": _COMMON + [
        ("views", str, REQUIRED, "scene directory"),
        ("mode", str, REQUIRED, "matcher: photo or sgm"),
        ("d_max", int, REQUIRED, "number of integer disparity candidates"),
        ("use", str, "r", "comma-separated source views"),
        ("alpha", float, 0.85, "photo mode: SSIM weight"),
        ("window", int, 1, "photo mode: aggregation window (odd)"),
        ("census_window", int, 5, "sgm mode: census window (odd, 3..7)"),
        ("p1", float, 10.0, "sgm mode: small penalty"),
        ("p2", float, 120.0, "sgm mode: large penalty"),
        ("paths", int, 8, "sgm mode: aggregation paths, 4 or 8"),
        ("lr_threshold", float, 1.0, "sgm mode: LR consistency threshold"),
        ("fuse_stage", str, "pre", "volume fusion stage; only 'pre' exists "
                                   "(post-aggregation fusion intentionally unimplemented)"),
        ("out", str, REQUIRED, "output disparity PFM"),
    ],
    "eval": _COMMON + [
        ("views", str, REQUIRED, "scene directory with ground truth"),
        ("pred", str, None, "predicted disparity PFM to evaluate"),
        ("alt_right", str, None, "alternative right image for stereo-quality metrics"),
        ("outlier_px", float, 3.0, "outlier threshold in pixels"),
        ("alpha", float, 0.85, "SSIM weight for warp error"),
        ("focal_baseline", float, 128.0, "depth = focal_baseline / disparity"),
        ("error_maps", _parse_bool, False, "also write 8-bit error heat PNGs"),
        ("out", str, REQUIRED, "output report file"),
    ],
    "validate": _COMMON + [
        ("threads", int, None, "worker threads (default MBSTEREO_THREADS or 1)"),
        ("out", str, None, "optional directory for the validation report"),
    ],
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="mbstereo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, opts in _SPECS.items():
        p = sub.add_parser(name, add_help=True)
        for dest, typ, default, help_text in opts:
            flag = "--" + dest.replace("_", "-")
            p.add_argument(flag, dest=dest, type=str, default=None, help=help_text)
    return parser


def _resolve(command: str, args: argparse.Namespace) -> dict:
    spec = _SPECS[command]
    types = {dest: typ for dest, typ, _, _ in spec}
    resolved = {dest: default for dest, _, default, _ in spec}

    config_path = getattr(args, "config", None)
    if config_path:
        try:
            entries = parse_manifest(Path(config_path).read_text())
        except ValueError as e:
            raise UsageError(f"bad config file: {e}")
        for key, value in entries.items():
            dest = key.replace("-", "_")
            if dest not in types or dest == "config":
                raise UsageError(f"unknown config key {key!r} for {command}")
            resolved[dest] = types[dest](value)

    for dest, typ, _, _ in spec:
        raw = getattr(args, dest, None)
        if raw is not None:
            resolved[dest] = typ(raw) if dest != "config" else raw

    missing = [dest for dest, value in resolved.items() if value is REQUIRED]
    if missing:
        flags = ", ".join("--" + m.replace("_", "-") for m in missing)
        raise UsageError(f"{command}: missing required argument(s): {flags}")
    return resolved


def _config_echo(command: str, cfg: dict) -> bytes:
    lines = [f"command = {command}"]
    for key in sorted(cfg):
        if key == "config":
            continue
        value = cfg[key]
        if isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{key} = {value}")
    return ("\n".join(lines) + "\n").encode()


def _echo_into_dir(command: str, cfg: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write_bytes(out_dir / "run_config.txt", _config_echo(command, cfg))


def _echo_beside_file(command: str, cfg: dict, out_file: Path) -> None:
    out_file.parent.mkdir(parents=True, exist_ok=True)
    beside = out_file.with_suffix("").name + ".config.txt"
    _atomic_write_bytes(out_file.parent / beside, _config_echo(command, cfg))


def _heat_image(values: np.ndarray) -> Image:
    return Image.from_gray(np.clip(values, 0.0, 1.0))


def _split_use(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise UsageError("--use must list at least one source view")
    return names


# ---------------------------------------------------------------------------
# Command bodies

def _cmd_synth(cfg: dict) -> int:
    spec = standard_spec(cfg["seed"], cfg["width"], cfg["height"], cfg["fractional"])
    scene = generate_scene(spec)
    out = Path(cfg["out"])
    write_scene_dir(scene, out)
    _echo_into_dir("synth", cfg, out)
    return EXIT_OK


def _cmd_warp(cfg: dict) -> int:
    sd = read_scene_dir(cfg["views"])
    label = cfg["view"]
    if label not in sd.scales or label == "l":
        raise UsageError(f"--view must name a source view, got {label!r}")
    disp = load_disparity(cfg["disp"], "pfm") if cfg["disp"] else sd.gt_disparity_left
    result = warp_to_left(sd.views_by_label[label], disp, sd.scales[label])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    store_image(out / "warped.png", result.image, bit_depth=8)
    store_mask(out / "valid.png", result.valid)
    _echo_into_dir("warp", cfg, out)
    return EXIT_OK


def _cmd_masks(cfg: dict) -> int:
    d_left = load_disparity(cfg["left_disp"], "pfm")
    d_right = load_disparity(cfg["right_disp"], "pfm")
    occ = occlusion_mask(d_left, d_right, cfg["threshold"])
    oof = oof_mask(d_left)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    store_mask(out / "occ.png", occ)
    store_mask(out / "oof.png", oof)
    _echo_into_dir("masks", cfg, out)
    return EXIT_OK


def _cmd_loss_map(cfg: dict) -> int:
    sd = read_scene_dir(cfg["views"])
    views = sd.view_set(_split_use(cfg["use"]))
    disp = load_disparity(cfg["disp"], "pfm") if cfg["disp"] else sd.gt_disparity_left
    lm = min_warping_loss(views, disp, cfg["alpha"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    store_image(out / "loss.png", _heat_image(lm.values), bit_depth=8)
    n = len(lm.labels)
    codes = np.where(lm.chosen >= 0, (lm.chosen + 1) / n, 0.0)
    store_image(out / "chosen.png", _heat_image(codes), bit_depth=8)
    store_mask(out / "valid.png", lm.valid)
    _echo_into_dir("loss-map", cfg, out)
    return EXIT_OK


def _cmd_match(cfg: dict) -> int:
    if cfg["fuse_stage"] != "pre":
        raise UsageError("only --fuse-stage pre is implemented")
    sd = read_scene_dir(cfg["views"])
    views = sd.view_set(_split_use(cfg["use"]))
    if cfg["mode"] == "photo":
        disp = photometric_match(views, cfg["d_max"], cfg["alpha"], cfg["window"])
    elif cfg["mode"] == "sgm":
        params = SgmParams(
            census_window=cfg["census_window"],
            p1=cfg["p1"],
            p2=cfg["p2"],
            paths=cfg["paths"],
            lr_threshold=cfg["lr_threshold"],
        )
        disp = sgm_match(views, cfg["d_max"], params)
    else:
        raise UsageError(f"--mode must be photo or sgm, got {cfg['mode']!r}")
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    store_disparity(out, disp, "pfm")
    _echo_beside_file("match", cfg, out)
    return EXIT_OK


def _depth_from_disparity(disp: DisparityMap, fb: float):
    positive = disp.valid & (disp.values > 0)
    depth = np.zeros_like(disp.values)
    np.divide(fb, disp.values, out=depth, where=positive)
    return depth, positive


def _cmd_eval(cfg: dict) -> int:
    sd = read_scene_dir(cfg["views"])
    gt = sd.gt_disparity_left
    left = sd.views_by_label["l"]
    right = sd.views_by_label["r"]

    regions = {}
    depth = None
    warp_err_pred = None
    error_map = None
    if cfg["pred"]:
        pred = load_disparity(cfg["pred"], "pfm")
        regions = disparity_metrics(pred, gt, sd.masks, cfg["outlier_px"])
        warp_err_pred = metric_warp_error(left, right, pred, cfg["alpha"])
        gt_depth, gt_pos = _depth_from_disparity(gt, cfg["focal_baseline"])
        pr_depth, pr_pos = _depth_from_disparity(pred, cfg["focal_baseline"])
        both = gt_pos & pr_pos
        if both.any():
            depth = depth_metrics(pr_depth, gt_depth, both)
        error_map = np.where(
            pred.valid & gt.valid, np.abs(pred.values - gt.values), 0.0
        )

    psnr_val = ssim_val = fusion = None
    if cfg["alt_right"]:
        alt = load_image(cfg["alt_right"])
        psnr_val = metric_psnr(right, alt)
        ssim_val = metric_ssim(right, alt)
        fusion = metric_fusion_ssim((left, right), (left, alt), gt)

    report = MetricsReport(
        regions=regions,
        psnr=psnr_val,
        ssim=ssim_val,
        warp_error=warp_err_pred,
        warp_error_gt=metric_warp_error(left, right, gt, cfg["alpha"]),
        fusion_ssim=fusion,
        depth=depth,
    )
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write_bytes(out, format_report(report).encode())
    if cfg["error_maps"] and error_map is not None:
        heat = _heat_image(error_map / (2.0 * cfg["outlier_px"]))
        store_image(out.parent / (out.with_suffix("").name + "_error.png"), heat, 8)
    _echo_beside_file("eval", cfg, out)
    return EXIT_OK


def _cmd_validate(cfg: dict) -> int:
    threads = cfg["threads"] if cfg["threads"] else _default_threads()
    results = run_validation(threads=threads)
    lines = []
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        lines.append(f"{status} {r.name}: {r.detail}")
    n_fail = sum(1 for r in results if not r.ok)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        _atomic_write_bytes(out / "validate.txt", text.encode())
        _echo_into_dir("validate", cfg, out)
    return EXIT_VALIDATION if n_fail else EXIT_OK


_HANDLERS = {
    "synth": _cmd_synth,
    "warp": _cmd_warp,
    "masks": _cmd_masks,
    "loss-map": _cmd_loss_map,
    "match": _cmd_match,
    "eval": _cmd_eval,
    "validate": _cmd_validate,
}


def run(argv) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        raise UsageError("missing subcommand (see --help)")
    cfg = _resolve(args.command, args)
    return _HANDLERS[args.command](cfg)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
