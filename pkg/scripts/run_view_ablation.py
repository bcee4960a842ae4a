#!/usr/bin/env python3
"""View-set ablation on the synthetic suite.

Runs the photometric matcher with growing source-view sets and reports
EPE and >3px outlier ratios over the overall / occluded / out-of-frame
regions, the desk-scale analog of an ablation table for the per-pixel
minimum warping loss.

Usage: python scripts/run_view_ablation.py [--seeds 10] [--d-max 16] [--alpha 0.0]
"""

import argparse
import sys
import time

import numpy as np

from mbstereo.matcher import photometric_match
from mbstereo.synth import generate_scene, standard_spec

VIEW_SETS = [
    ("r", ["r"]),
    ("r+ll+rr", ["r", "ll", "rr"]),
    ("r+c", ["r", "c"]),
    ("r+ll+rr+c", ["r", "ll", "rr", "c"]),
]


def pooled(scenes, preds, region_of):
    errs = []
    for scene, pred in zip(scenes, preds):
        gt = scene.gt_disparity_left
        sel = region_of(scene) & gt.valid & pred.valid
        errs.append(np.abs(pred.values - gt.values)[sel])
    pool = np.concatenate(errs)
    if pool.size == 0:
        return float("nan"), float("nan")
    return float(pool.mean()), float((pool > 3.0).mean() * 100.0)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10, help="number of suite scenes")
    ap.add_argument("--d-max", type=int, default=16)
    ap.add_argument("--alpha", type=float, default=0.0,
                    help="SSIM weight of the hybrid error (0 = pure L1)")
    args = ap.parse_args(argv)

    print(f"generating {args.seeds} scenes...", file=sys.stderr)
    scenes = [generate_scene(standard_spec(s)) for s in range(args.seeds)]

    regions = [
        ("all", lambda s: np.ones_like(s.analytic["r"].occ)),
        ("occ", lambda s: s.analytic["r"].occ),
        ("oof", lambda s: s.analytic["r"].oof),
    ]
    header = f"{'views':<12}" + "".join(
        f"{'epe/' + name:>12}{'>3px%/' + name:>12}" for name, _ in regions
    ) + f"{'time':>8}"
    print(header)
    print("-" * len(header))
    for label, use in VIEW_SETS:
        t0 = time.perf_counter()
        preds = [photometric_match(s.views.subset(use), args.d_max, alpha=args.alpha)
                 for s in scenes]
        dt = time.perf_counter() - t0
        cells = ""
        for _, region_of in regions:
            epe, bad = pooled(scenes, preds, region_of)
            cells += f"{epe:>12.3f}{bad:>12.2f}"
        print(f"{label:<12}{cells}{dt:>7.1f}s")


if __name__ == "__main__":
    main()
