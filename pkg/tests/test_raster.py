import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from pseudolabel.raster import (
    LabelMap,
    LabelValueError,
    LabelViolation,
    ObjectnessMask,
    ProbRaster,
    binarize_objectness,
    check_label_map,
    validate_label_map,
)

prob_rasters = hnp.arrays(np.uint8, hnp.array_shapes(min_dims=2, max_dims=2, max_side=10)).map(ProbRaster)


def test_binarize_threshold():
    out = binarize_objectness(ProbRaster([[0, 127], [128, 255]]), 128)
    assert out == ObjectnessMask([[False, False], [True, True]])


def test_binarize_boundary_inclusive():
    assert binarize_objectness(ProbRaster(np.full((3, 2), 255)), 255).data.all()


@given(prob_rasters)
def test_binarize_zero_threshold_is_all_true(prob):
    assert binarize_objectness(prob, 0).data.all()


@given(prob_rasters, st.integers(0, 255), st.integers(0, 255))
def test_binarize_monotone_in_tau(prob, a, b):
    lo, hi = sorted((a, b))
    strict = binarize_objectness(prob, hi).data
    loose = binarize_objectness(prob, lo).data
    assert not (strict & ~loose).any()


def test_binarize_keeps_dims():
    assert binarize_objectness(ProbRaster(np.zeros((3, 7)))).shape == (3, 7)


@pytest.mark.parametrize(
    "data, num_classes, expected",
    [
        ([[0, 1], [255, 2]], 3, None),
        ([[0, 3]], 3, LabelViolation(0, 1, 3)),
        ([[255]], 1, None),
        ([[0, 0], [7, 9]], 5, LabelViolation(1, 0, 7)),
    ],
)
def test_validate_label_map(data, num_classes, expected):
    assert validate_label_map(LabelMap(data), num_classes) == expected


def test_check_label_map_raises():
    with pytest.raises(LabelValueError, match=r"value 3 at \(0, 1\)"):
        check_label_map(LabelMap([[0, 3]]), 3)


@pytest.mark.parametrize("n", [0, 255, 300])
def test_validate_rejects_bad_class_count(n):
    with pytest.raises(ValueError):
        validate_label_map(LabelMap([[0]]), n)


def test_rasters_are_read_only():
    m = LabelMap([[1, 2]])
    with pytest.raises(ValueError):
        m.data[0, 0] = 5


def test_construction_copies_input():
    src = np.zeros((2, 2), dtype=np.uint8)
    m = LabelMap(src)
    src[0, 0] = 9
    assert m.data[0, 0] == 0


@pytest.mark.parametrize("bad", [np.zeros(4), np.zeros((0, 3)), np.zeros((2, 2, 2))])
def test_rejects_non_2d(bad):
    with pytest.raises(ValueError):
        LabelMap(bad)


def test_equality_and_hash():
    a, b = LabelMap([[1, 2]]), LabelMap(np.array([[1, 2]]))
    assert a == b and hash(a) == hash(b)
    assert a != LabelMap([[1, 3]])
    assert a != ProbRaster([[1, 2]])
