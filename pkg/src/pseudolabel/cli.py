"""Command-line driver: ``pseudolabel {generate,eval,bias,synth}``.

Images are joined across directories by file stem. Work is split per image
over a process pool; every cross-image result is an integer sum, so output
files are byte-identical for any worker count.

Exit codes: 0 success, 1 validation or format error, 2 partial failure
under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, Sequence

from .annotations import (
    BBox,
    FormatError,
    parse_box_file,
    read_cam_container,
    read_label_png,
    read_png_array,
    write_label_png,
    write_png_array,
)
from .bias import BiasAccumulator
from .evaluation import EvalAccumulator
from .fusion_box import DEFAULT_ALPHA, DEFAULT_INNER_FRACTION, BoxFusionParams, fuse_box
from .fusion_cam import DEFAULT_DELTA, CamFusionParams, fuse_cam, threshold_cam_raw
from .raster import DEFAULT_TAU, ProbRaster, ShapeError, binarize_objectness
from .synth import SceneConfig, make_dirs, scene_id, synth_scene, write_bundle, write_dataset_index

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARTIAL = 2

MODES = ("cam", "cam-raw", "box", "box-raw", "box-ign")
WORKERS_ENV = "PSEUDOLABEL_WORKERS"


class CliError(Exception):
    """Abort the command with exit code 1."""


def resolve_workers(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return 1


def parallel_map(fn: Callable, items: Sequence, workers: int) -> list:
    """Order-preserving map over a process pool (inline when workers == 1)."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    ctx = multiprocessing.get_context("fork" if "fork" in multiprocessing.get_all_start_methods() else None)
    chunksize = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))


def stems(directory: Path, suffix: str) -> dict[str, Path]:
    if not directory.is_dir():
        raise CliError(f"{directory}: not a directory")
    return {p.stem: p for p in sorted(directory.glob(f"*{suffix}")) if p.is_file()}


# ------------------------------------------------------------------ generate


@dataclass(frozen=True)
class GenerateTask:
    image_id: str
    mode: str
    out_path: Path
    cam_path: Path | None = None
    obj_path: Path | None = None
    size: tuple[int, int] | None = None  # (height, width) from the box file
    boxes: tuple[BBox, ...] = ()


@dataclass(frozen=True)
class GenerateParams:
    delta: float = DEFAULT_DELTA
    alpha: float = DEFAULT_ALPHA
    inner_fraction: float = DEFAULT_INNER_FRACTION
    tau: int = DEFAULT_TAU


def _load_objectness(path: Path, tau: int):
    return binarize_objectness(ProbRaster(read_png_array(path.read_bytes())), tau)


def generate_one(task: GenerateTask, params: GenerateParams) -> tuple[str, str | None, str | None]:
    """Returns (image_id, failure kind, message); kind is None on success."""
    current = None
    try:
        obj = None
        if task.obj_path is not None:
            current = task.obj_path
            if not current.exists():
                return task.image_id, "missing", f"no objectness file {current}"
            obj = _load_objectness(current, params.tau)
        if task.mode in ("cam", "cam-raw"):
            current = task.cam_path
            cam = read_cam_container(current.read_bytes())
            cam_params = CamFusionParams(params.delta)
            labels = fuse_cam(cam, obj, cam_params) if task.mode == "cam" else threshold_cam_raw(cam, cam_params)
        else:
            current = task.obj_path
            box_params = BoxFusionParams(
                alpha=params.alpha,
                inner_fraction=params.inner_fraction,
                ignore_enabled=task.mode == "box-ign",
                use_objectness=task.mode != "box-raw",
            )
            labels = fuse_box(task.size[0], task.size[1], task.boxes, obj, box_params)
        task.out_path.write_bytes(write_label_png(labels))
    except (FormatError, ShapeError, OSError) as exc:
        return task.image_id, "invalid", f"{current}: {exc}"
    return task.image_id, None, None


def run_generate(args) -> int:
    mode = args.mode
    params = GenerateParams(args.delta, args.alpha, args.inner_fraction, args.tau)
    CamFusionParams(params.delta)
    BoxFusionParams(params.alpha, params.inner_fraction)
    needs_obj = mode in ("cam", "box", "box-ign")
    if mode.startswith("cam") and args.cams is None:
        raise CliError(f"--mode {mode} needs --cams")
    if mode.startswith("box") and args.boxes is None:
        raise CliError(f"--mode {mode} needs --boxes")
    if needs_obj and args.objectness is None:
        raise CliError(f"--mode {mode} needs --objectness")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    obj_dir = Path(args.objectness) if needs_obj else None

    tasks = []
    if mode.startswith("cam"):
        for image_id, path in stems(Path(args.cams), ".cams").items():
            tasks.append(GenerateTask(
                image_id, mode, out / f"{image_id}.png", cam_path=path,
                obj_path=obj_dir / f"{image_id}.png" if obj_dir else None,
            ))
    else:
        box_path = Path(args.boxes)
        try:
            collection = parse_box_file(box_path.read_bytes())
        except OSError as exc:
            raise CliError(f"{box_path}: {exc}") from None
        except FormatError as exc:
            raise CliError(f"{box_path}: {exc}") from None
        for im in sorted(collection.images, key=lambda im: im.image_id):
            tasks.append(GenerateTask(
                im.image_id, mode, out / f"{im.image_id}.png",
                obj_path=obj_dir / f"{im.image_id}.png" if obj_dir else None,
                size=(im.height, im.width), boxes=im.boxes,
            ))

    results = parallel_map(partial(generate_one, params=params), tasks, resolve_workers(args.workers))
    written = [image_id for image_id, kind, _ in results if kind is None]
    failures = [{"id": image_id, "kind": kind, "error": msg} for image_id, kind, msg in results if kind is not None]
    manifest = {
        "mode": mode,
        "params": {"delta": params.delta, "alpha": params.alpha, "inner_fraction": params.inner_fraction, "tau": params.tau},
        "count": len(written),
        "images": written,
        "failures": failures,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    for f in failures:
        print(f"{f['id']}: {f['error']}", file=sys.stderr)
    if any(f["kind"] == "invalid" for f in failures):
        return EXIT_INVALID
    if failures and args.strict:
        return EXIT_PARTIAL
    return EXIT_OK


# --------------------------------------------------------------- eval / bias


def _read_pair(pair: tuple[Path, Path]):
    pred_path, gt_path = pair
    current = pred_path
    try:
        pred = read_label_png(pred_path.read_bytes())
        current = gt_path
        gt = read_label_png(gt_path.read_bytes())
    except FormatError as exc:
        raise CliError(f"{current}: {exc}") from None
    return pred, gt


def eval_one(pair: tuple[Path, Path], num_classes: int, count_pred_ignore: bool) -> EvalAccumulator:
    pred, gt = _read_pair(pair)
    acc = EvalAccumulator(num_classes, count_pred_ignore)
    try:
        acc.add(pred, gt)
    except ValueError as exc:
        raise CliError(f"{pair[0]}: {exc}") from None
    return acc


def bias_one(pair: tuple[Path, Path], grid: int, bins: int) -> BiasAccumulator:
    pred, gt = _read_pair(pair)
    acc = BiasAccumulator(grid, bins)
    try:
        acc.add(pred, gt)
    except ShapeError as exc:
        raise CliError(f"{pair[0]}: {exc}") from None
    return acc


def _matched_pairs(pred_dir: str, gt_dir: str) -> tuple[list[tuple[Path, Path]], list[str]]:
    pred = stems(Path(pred_dir), ".png")
    gt = stems(Path(gt_dir), ".png")
    common = sorted(set(pred) & set(gt))
    mismatched = sorted(set(pred) ^ set(gt))
    for image_id in mismatched:
        side = "prediction" if image_id in pred else "ground truth"
        print(f"{image_id}: only present in {side} directory", file=sys.stderr)
    return [(pred[i], gt[i]) for i in common], mismatched


def _emit(text: str, out: str | None) -> None:
    sys.stdout.write(text)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def run_eval(args) -> int:
    if not 1 <= args.num_classes < 255:
        raise CliError("--num-classes must be in [1, 255)")
    pairs, mismatched = _matched_pairs(args.pred, args.gt)
    fn = partial(eval_one, num_classes=args.num_classes, count_pred_ignore=not args.exclude_pred_ignore)
    total = EvalAccumulator(args.num_classes, not args.exclude_pred_ignore)
    for acc in parallel_map(fn, pairs, resolve_workers(args.workers)):
        total.merge(acc)
    _emit(total.report().to_json(), args.out)
    return EXIT_PARTIAL if mismatched and args.strict else EXIT_OK


def run_bias(args) -> int:
    if args.grid < 1 or args.bins < 2:
        raise CliError("--grid must be >= 1 and --bins >= 2")
    pairs, mismatched = _matched_pairs(args.pred, args.gt)
    total = BiasAccumulator(args.grid, args.bins)
    for acc in parallel_map(partial(bias_one, grid=args.grid, bins=args.bins), pairs, resolve_workers(args.workers)):
        total.merge(acc)
    report = total.report()
    _emit(report.to_json(), args.out)
    if args.heatmap:
        Path(args.heatmap).parent.mkdir(parents=True, exist_ok=True)
        Path(args.heatmap).write_bytes(write_png_array(report.heatmap_data()))
    return EXIT_PARTIAL if mismatched and args.strict else EXIT_OK


# --------------------------------------------------------------------- synth


def synth_one(seed: int, config: SceneConfig, out: Path) -> tuple[str, tuple[BBox, ...]]:
    bundle = synth_scene(seed, config)
    image_id = scene_id(seed)
    write_bundle(bundle, out, image_id)
    return image_id, bundle.boxes


def load_scene_config(path: str | None) -> SceneConfig:
    if path is None:
        return SceneConfig()
    try:
        return SceneConfig.from_dict(json.loads(Path(path).read_text()))
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"{path}: {exc}") from None


def run_synth(args) -> int:
    if args.count < 0:
        raise CliError("--count must be >= 0")
    config = load_scene_config(args.config)
    out = Path(args.out)
    try:
        make_dirs(out)
        seeds = [args.seed + i for i in range(args.count)]
        entries = parallel_map(partial(synth_one, config=config, out=out), seeds, resolve_workers(args.workers))
        write_dataset_index(out, entries, config, args.seed)
    except OSError as exc:
        raise CliError(f"write failed: {exc}") from None
    return EXIT_OK


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseudolabel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--workers", type=int, default=None, help=f"worker processes (default: ${WORKERS_ENV} or 1)")
        p.add_argument("--strict", action="store_true", help="exit 2 when any image is missing or mismatched")

    g = sub.add_parser("generate", help="fuse proposals into pseudo-label PNGs")
    g.add_argument("--mode", choices=MODES, required=True)
    g.add_argument("--objectness", help="directory of <id>.png objectness masks")
    g.add_argument("--cams", help="directory of <id>.cams score stacks")
    g.add_argument("--boxes", help="box annotation JSON file")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="CAM score threshold (default: %(default)s)")
    g.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="overlap threshold for the ignore ring (default: %(default)s)")
    g.add_argument("--inner-fraction", type=float, default=DEFAULT_INNER_FRACTION, help="area kept by the ignore rule (default: %(default)s)")
    g.add_argument("--tau", type=int, default=DEFAULT_TAU, help="objectness binarization threshold (default: %(default)s)")
    common(g)
    g.set_defaults(func=run_generate)

    e = sub.add_parser("eval", help="mIoU and precision/recall of pseudo-labels against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--num-classes", type=int, required=True, help="including background")
    e.add_argument("--exclude-pred-ignore", action="store_true", help="skip predicted 255 pixels instead of scoring them as misses")
    e.add_argument("--out", help="also write the JSON report here")
    common(e)
    e.set_defaults(func=run_eval)

    b = sub.add_parser("bias", help="spatial error heatmap and border profile")
    b.add_argument("--pred", required=True)
    b.add_argument("--gt", required=True)
    b.add_argument("--grid", type=int, default=8)
    b.add_argument("--bins", type=int, default=10)
    b.add_argument("--out", help="also write the JSON report here")
    b.add_argument("--heatmap", help="write the error grid as an 8-bit PNG")
    common(b)
    b.set_defaults(func=run_bias)

    s = sub.add_parser("synth", help="write a seeded synthetic dataset")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config", help="SceneConfig JSON file")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=run_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
