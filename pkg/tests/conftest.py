import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from pseudolabel.annotations import BBox, BoxCollection, CamStack, ImageBoxes
from pseudolabel.raster import LabelMap, ObjectnessMask

dims = st.tuples(st.integers(1, 12), st.integers(1, 12))


@st.composite
def label_maps(draw, num_classes=5, shape=None):
    h, w = shape if shape is not None else draw(dims)
    values = st.sampled_from(list(range(num_classes)) + [255])
    return LabelMap(draw(hnp.arrays(np.uint8, (h, w), elements=values)))


@st.composite
def objectness_masks(draw, shape):
    return ObjectnessMask(draw(hnp.arrays(bool, shape)))


@st.composite
def cam_stacks(draw, shape=None, max_classes=4):
    h, w = shape if shape is not None else draw(dims)
    classes = sorted(draw(st.sets(st.integers(1, 254), min_size=1, max_size=max_classes)))
    # coarse grid of values so ties and exact-threshold cases actually occur
    score = st.one_of(st.sampled_from([0.0, 0.01, 0.5, 1.0]), st.floats(0, 1, width=32))
    scores = draw(hnp.arrays(np.float32, (len(classes), h, w), elements=score))
    return CamStack(tuple(classes), scores)


@st.composite
def bboxes(draw, height, width, classes=(1, 2, 3)):
    x0 = draw(st.integers(0, width - 1))
    y0 = draw(st.integers(0, height - 1))
    x1 = draw(st.integers(x0 + 1, width))
    y1 = draw(st.integers(y0 + 1, height))
    return BBox(draw(st.sampled_from(classes)), x0, y0, x1, y1)


@st.composite
def box_scenes(draw, max_boxes=5):
    h, w = draw(st.integers(1, 16)), draw(st.integers(1, 16))
    boxes = draw(st.lists(bboxes(h, w), max_size=max_boxes))
    return h, w, boxes


@st.composite
def box_collections(draw):
    ids = draw(st.lists(st.text(min_size=1, max_size=8), unique=True, max_size=4))
    images = []
    for image_id in ids:
        h, w = draw(st.integers(1, 64)), draw(st.integers(1, 64))
        boxes = draw(st.lists(bboxes(h, w, classes=tuple(range(1, 255))), max_size=4))
        images.append(ImageBoxes(image_id, w, h, tuple(boxes)))
    return BoxCollection(tuple(images))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ------------------------------------------------------- acceptance summary

_acceptance_key = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Record one pass/fail line per acceptance criterion, printed at session end."""
    lines = request.config.stash.setdefault(_acceptance_key, [])

    def record(criterion: int, name: str, ok: bool, detail: str) -> None:
        line = f"criterion {criterion} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_acceptance_key, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
