"""Border bias index of objectness errors: uniform flips vs border-suppressing corruption.

Also sweeps the border band width, since the index depends strongly on how far
into the image suppression reaches. Optionally writes both error heatmaps.
"""

import argparse
from pathlib import Path

import numpy as np

from pseudolabel import CorruptionParams, LabelMap, bias_report, corrupt_objectness, synth_scene
from pseudolabel.annotations import write_png_array
from pseudolabel.prng import derive_seed


def suite(scenes: int, params: CorruptionParams):
    pairs = []
    for seed in range(scenes):
        clean = synth_scene(seed).objectness_clean
        noisy = corrupt_objectness(clean, derive_seed(seed, 99), params)
        gt = np.where(clean.data, 1, 255).astype(np.uint8)
        pairs.append((LabelMap(noisy.data.astype(np.uint8)), LabelMap(gt)))
    return pairs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=50)
    ap.add_argument("--flip-rate", type=float, default=0.3)
    ap.add_argument("--grid", type=int, default=8)
    ap.add_argument("--bins", type=int, default=10)
    ap.add_argument("--heatmaps", type=Path, help="directory for uniform.png and border.png")
    args = ap.parse_args()

    uniform = bias_report(suite(args.scenes, CorruptionParams(flip_rate=args.flip_rate)), args.grid, args.bins)
    print(f"uniform: index {uniform.border_bias_index:.3f}")
    print(f"{'band':>6} {'index':>8} {'ratio':>7}")
    for band in (0.2, 0.3, 0.5, 0.7, 1.0):
        params = CorruptionParams(flip_rate=args.flip_rate, border_suppress=True, border_band=band)
        rep = bias_report(suite(args.scenes, params), args.grid, args.bins)
        print(f"{band:>6.1f} {rep.border_bias_index:>8.3f} {rep.border_bias_index / uniform.border_bias_index:>7.2f}")
        if band == CorruptionParams.border_band and args.heatmaps:
            args.heatmaps.mkdir(parents=True, exist_ok=True)
            (args.heatmaps / "border.png").write_bytes(write_png_array(rep.heatmap_data()))
    if args.heatmaps:
        (args.heatmaps / "uniform.png").write_bytes(write_png_array(uniform.heatmap_data()))


if __name__ == "__main__":
    main()
