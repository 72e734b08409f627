"""Time `pseudolabel generate --mode box-ign` on a directory of large box fixtures."""

import argparse
import tempfile
import time
from pathlib import Path

import numpy as np

from pseudolabel import BBox, BoxCollection, ImageBoxes, dump_box_file
from pseudolabel.annotations import write_png_array
from pseudolabel.cli import main as cli


def build_fixture(root: Path, count: int, size: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    (root / "obj").mkdir()
    images = []
    for n in range(count):
        obj = np.zeros((size, size), dtype=np.uint8)
        boxes = []
        for _ in range(3):
            x0, y0 = (int(v) for v in rng.integers(0, size - 64, 2))
            x1, y1 = x0 + int(rng.integers(32, size - x0)), y0 + int(rng.integers(32, size - y0))
            boxes.append(BBox(int(rng.integers(1, 21)), x0, y0, x1, y1))
            obj[y0 + 4 : y1 - 4, x0 + 4 : x1 - 4] = 255
        image_id = f"im{n:05d}"
        (root / "obj" / f"{image_id}.png").write_bytes(write_png_array(obj))
        images.append(ImageBoxes(image_id, size, size, tuple(boxes)))
    (root / "boxes.json").write_bytes(dump_box_file(BoxCollection(tuple(images))))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--workers", type=int, nargs="+", default=[1, 4])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        t0 = time.perf_counter()
        build_fixture(root, args.count, args.size, args.seed)
        print(f"fixture: {args.count} images of {args.size}x{args.size} in {time.perf_counter() - t0:.2f}s")
        for workers in args.workers:
            t0 = time.perf_counter()
            rc = cli(["generate", "--mode", "box-ign", "--boxes", str(root / "boxes.json"),
                      "--objectness", str(root / "obj"), "--out", str(root / f"out{workers}"),
                      "--workers", str(workers)])
            elapsed = time.perf_counter() - t0
            print(f"workers={workers}: exit {rc}, {elapsed:.2f}s ({1000 * elapsed / args.count:.2f} ms/image)")


if __name__ == "__main__":
    main()
