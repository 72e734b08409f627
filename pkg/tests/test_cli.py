import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pseudolabel.annotations import (
    BBox,
    BoxCollection,
    CamStack,
    ImageBoxes,
    dump_box_file,
    read_label_png,
    write_cam_container,
    write_label_png,
    write_png_array,
)
from pseudolabel.cli import main, resolve_workers
from pseudolabel.raster import LabelMap


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def write_obj(directory: Path, image_id: str, data) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{image_id}.png").write_bytes(write_png_array(np.asarray(data, dtype=np.uint8)))


@pytest.fixture
def box_fixture(tmp_path):
    coll = BoxCollection((ImageBoxes("a", 8, 8, (BBox(1, 0, 0, 6, 6), BBox(2, 3, 3, 7, 7))),))
    (tmp_path / "boxes.json").write_bytes(dump_box_file(coll))
    write_obj(tmp_path / "obj", "a", np.full((8, 8), 255))
    return tmp_path


@pytest.fixture
def synth_dataset(tmp_path):
    root = tmp_path / "data"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"corruption": {"boundary_radius": 2, "flip_rate": 0.02}, "cam_blur": 2, "cam_noise": 0.1, "box_jitter": 2}))
    assert main(["synth", "--seed", "3", "--count", "20", "--config", str(cfg), "--out", str(root)]) == 0
    return root


# -------------------------------------------------------------------- generate


def test_generate_box_ign_example(box_fixture):
    out = box_fixture / "out"
    rc = main(["generate", "--mode", "box-ign", "--boxes", str(box_fixture / "boxes.json"),
               "--objectness", str(box_fixture / "obj"), "--out", str(out)])
    assert rc == 0
    expected = np.zeros((8, 8), dtype=np.uint8)
    expected[0:6, 0:6] = 1
    expected[3:7, 3:7] = 255
    expected[3:6, 3:6] = 2
    assert read_label_png((out / "a.png").read_bytes()) == LabelMap(expected)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["count"] == 1 and manifest["images"] == ["a"] and manifest["failures"] == []
    assert manifest["params"] == {"delta": 0.01, "alpha": 0.3, "inner_fraction": 0.6, "tau": 128}


def test_generate_box_without_ignore(box_fixture):
    out = box_fixture / "out"
    assert main(["generate", "--mode", "box", "--boxes", str(box_fixture / "boxes.json"),
                 "--objectness", str(box_fixture / "obj"), "--out", str(out)]) == 0
    labels = read_label_png((out / "a.png").read_bytes()).data
    assert not (labels == 255).any() and (labels[3:7, 3:7] == 2).all()


def test_generate_objectness_threshold(box_fixture):
    write_obj(box_fixture / "obj", "a", np.full((8, 8), 127))
    out = box_fixture / "out"
    assert main(["generate", "--mode", "box", "--boxes", str(box_fixture / "boxes.json"),
                 "--objectness", str(box_fixture / "obj"), "--out", str(out)]) == 0
    assert not read_label_png((out / "a.png").read_bytes()).data.any()
    assert main(["generate", "--mode", "box", "--boxes", str(box_fixture / "boxes.json"),
                 "--objectness", str(box_fixture / "obj"), "--out", str(out), "--tau", "127"]) == 0
    assert read_label_png((out / "a.png").read_bytes()).data.any()


def test_generate_cam_modes(tmp_path):
    cams = tmp_path / "cams"
    cams.mkdir()
    stack = CamStack((3, 7), np.array([[[0.5, 0.005], [0.2, 0.0]], [[0.1, 0.0], [0.2, 0.9]]], dtype=np.float32))
    (cams / "x.cams").write_bytes(write_cam_container(stack))
    write_obj(tmp_path / "obj", "x", [[255, 255], [255, 0]])
    assert main(["generate", "--mode", "cam-raw", "--cams", str(cams), "--out", str(tmp_path / "raw")]) == 0
    assert read_label_png((tmp_path / "raw" / "x.png").read_bytes()) == LabelMap([[3, 0], [3, 7]])
    assert main(["generate", "--mode", "cam", "--cams", str(cams), "--objectness", str(tmp_path / "obj"),
                 "--out", str(tmp_path / "fused")]) == 0
    assert read_label_png((tmp_path / "fused" / "x.png").read_bytes()) == LabelMap([[3, 0], [3, 0]])


def test_generate_empty_input(tmp_path):
    (tmp_path / "cams").mkdir()
    assert main(["generate", "--mode", "cam-raw", "--cams", str(tmp_path / "cams"), "--out", str(tmp_path / "out")]) == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["count"] == 0 and manifest["images"] == []


def test_generate_missing_objectness(box_fixture, capsys):
    (box_fixture / "obj" / "a.png").unlink()
    args = ["generate", "--mode", "box", "--boxes", str(box_fixture / "boxes.json"),
            "--objectness", str(box_fixture / "obj"), "--out", str(box_fixture / "out")]
    assert main(args) == 0
    assert main(args + ["--strict"]) == 2
    manifest = json.loads((box_fixture / "out" / "manifest.json").read_text())
    assert manifest["failures"][0]["id"] == "a" and manifest["failures"][0]["kind"] == "missing"
    assert "a:" in capsys.readouterr().err


def test_generate_malformed_cams(tmp_path, capsys):
    cams = tmp_path / "cams"
    cams.mkdir()
    (cams / "bad.cams").write_bytes(b"XAMS" + b"\0" * 20)
    stack = CamStack((1,), np.ones((1, 2, 2), dtype=np.float32))
    (cams / "good.cams").write_bytes(write_cam_container(stack))
    assert main(["generate", "--mode", "cam-raw", "--cams", str(cams), "--out", str(tmp_path / "out")]) == 1
    assert (tmp_path / "out" / "good.png").exists()
    assert "bad.cams" in capsys.readouterr().err


def test_generate_shape_mismatch_is_invalid(box_fixture):
    write_obj(box_fixture / "obj", "a", np.full((8, 9), 255))
    assert main(["generate", "--mode", "box", "--boxes", str(box_fixture / "boxes.json"),
                 "--objectness", str(box_fixture / "obj"), "--out", str(box_fixture / "out")]) == 1


def test_generate_malformed_box_file(tmp_path):
    (tmp_path / "boxes.json").write_bytes(b'{"images": [')
    assert main(["generate", "--mode", "box-raw", "--boxes", str(tmp_path / "boxes.json"), "--out", str(tmp_path / "o")]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["generate", "--mode", "cam", "--out", "o"],
        ["generate", "--mode", "box", "--boxes", "b.json", "--out", "o"],
        ["generate", "--mode", "box-raw", "--boxes", "b.json", "--out", "o", "--alpha", "2"],
        ["eval", "--pred", "p", "--gt", "g", "--num-classes", "0"],
        ["bias", "--pred", "p", "--gt", "g", "--bins", "1"],
        ["synth", "--count", "-1", "--out", "o"],
    ],
)
def test_invalid_arguments(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1


def test_unknown_mode_rejected_by_parser():
    with pytest.raises(SystemExit) as info:
        main(["generate", "--mode", "nope", "--out", "o"])
    assert info.value.code != 0


# ------------------------------------------------------------------------ eval


def test_eval_identity(synth_dataset, capsys):
    labels = synth_dataset / "labels"
    assert main(["eval", "--pred", str(labels), "--gt", str(labels), "--num-classes", "4"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["miou"] == 1.0 and report["images_evaluated"] == 20


def test_eval_two_images(tmp_path, capsys):
    for name, pred, gt in [("i0", [[1, 0], [2, 2]], [[1, 1], [2, 0]]), ("i1", [[0, 255], [1, 2]], [[0, 1], [1, 255]])]:
        (tmp_path / "p").mkdir(exist_ok=True)
        (tmp_path / "g").mkdir(exist_ok=True)
        (tmp_path / "p" / f"{name}.png").write_bytes(write_label_png(LabelMap(pred)))
        (tmp_path / "g" / f"{name}.png").write_bytes(write_label_png(LabelMap(gt)))
    out = tmp_path / "report.json"
    assert main(["eval", "--pred", str(tmp_path / "p"), "--gt", str(tmp_path / "g"), "--num-classes", "3", "--out", str(out)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report == json.loads(out.read_text())
    assert report["per_class_iou"] == {"0": 1 / 3, "1": 0.5, "2": 0.5}
    assert report["miou"] == pytest.approx(4 / 9)


def test_eval_empty_dirs(tmp_path, capsys):
    (tmp_path / "p").mkdir()
    (tmp_path / "g").mkdir()
    assert main(["eval", "--pred", str(tmp_path / "p"), "--gt", str(tmp_path / "g"), "--num-classes", "21"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["miou"] is None and report["images_evaluated"] == 0


def test_eval_mismatched_ids(tmp_path, capsys):
    for d, names in (("p", ["a", "b"]), ("g", ["a"])):
        (tmp_path / d).mkdir()
        for n in names:
            (tmp_path / d / f"{n}.png").write_bytes(write_label_png(LabelMap([[0]])))
    args = ["eval", "--pred", str(tmp_path / "p"), "--gt", str(tmp_path / "g"), "--num-classes", "2"]
    assert main(args) == 0
    assert "b: only present in prediction" in capsys.readouterr().err
    assert main(args + ["--strict"]) == 2


def test_eval_out_of_range_label(tmp_path):
    for d in ("p", "g"):
        (tmp_path / d).mkdir()
        (tmp_path / d / "a.png").write_bytes(write_label_png(LabelMap([[7]])))
    assert main(["eval", "--pred", str(tmp_path / "p"), "--gt", str(tmp_path / "g"), "--num-classes", "3"]) == 1


# ------------------------------------------------------------------------ bias


def test_bias_identity(synth_dataset, capsys, tmp_path):
    labels = synth_dataset / "labels"
    heat = tmp_path / "heat.png"
    assert main(["bias", "--pred", str(labels), "--gt", str(labels), "--grid", "4", "--heatmap", str(heat)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["error_grid"] == [[0.0] * 4] * 4
    assert report["border_bias_index"] is None
    assert read_label_png(heat.read_bytes()) == LabelMap(np.zeros((4, 4)))


def test_bias_border_errors(tmp_path, capsys):
    pred = np.zeros((100, 100), dtype=np.uint8)
    pred[0, :] = pred[-1, :] = pred[:, 0] = pred[:, -1] = 1
    for d, arr in (("p", pred), ("g", np.zeros((100, 100)))):
        (tmp_path / d).mkdir()
        (tmp_path / d / "a.png").write_bytes(write_label_png(LabelMap(arr)))
    assert main(["bias", "--pred", str(tmp_path / "p"), "--gt", str(tmp_path / "g")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["border_profile"][0] > 0 and not any(report["border_profile"][1:])


# ----------------------------------------------------------------------- synth


def test_synth_layout(synth_dataset):
    manifest = json.loads((synth_dataset / "manifest.json").read_text())
    assert manifest["count"] == 20 and len(manifest["images"]) == 20
    for entry in manifest["images"]:
        for key in ("labels", "objectness", "objectness_clean", "cams"):
            assert (synth_dataset / entry[key]).is_file()


def test_synth_reproducible(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--seed", "9", "--count", "3", "--out", str(tmp_path / name)]) == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_synth_bad_config(tmp_path):
    (tmp_path / "cfg.json").write_text('{"num_shapes": 0}')
    assert main(["synth", "--count", "1", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o")]) == 1


def test_pipeline_round_trip(synth_dataset, tmp_path, capsys):
    """synth -> generate -> eval on the same tree."""
    out = tmp_path / "labels"
    assert main(["generate", "--mode", "box", "--boxes", str(synth_dataset / "boxes.json"),
                 "--objectness", str(synth_dataset / "objectness"), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["eval", "--pred", str(out), "--gt", str(synth_dataset / "labels"), "--num-classes", "4"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["images_evaluated"] == 20
    assert 0.5 < report["miou"] < 1.0


# --------------------------------------------------------------------- workers


def test_workers_resolution(monkeypatch):
    monkeypatch.delenv("PSEUDOLABEL_WORKERS", raising=False)
    assert resolve_workers(None) == 1
    assert resolve_workers(3) == 3
    monkeypatch.setenv("PSEUDOLABEL_WORKERS", "4")
    assert resolve_workers(None) == 4
    assert resolve_workers(2) == 2


def test_env_workers_same_output(synth_dataset, tmp_path, monkeypatch):
    args = ["generate", "--mode", "cam", "--cams", str(synth_dataset / "cams"),
            "--objectness", str(synth_dataset / "objectness")]
    assert main(args + ["--out", str(tmp_path / "one"), "--workers", "1"]) == 0
    monkeypatch.setenv("PSEUDOLABEL_WORKERS", "3")
    assert main(args + ["--out", str(tmp_path / "env")]) == 0
    assert tree(tmp_path / "one") == tree(tmp_path / "env")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pseudolabel", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "generate" in proc.stdout
