import numpy as np
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from depthtrack.tracker import BinaryMask, extract_outlines
from depthtrack.tracker.contours import _trace_nb, _trace_py

from conftest import block_mask
from oracles import outer_border_sets


def _check_against_oracle(bits, tracer=None):
    got = extract_outlines(BinaryMask(bits), tracer=tracer)
    want = outer_border_sets(bits)
    assert len(got) == len(want)
    for poly, (area, border) in zip(got, want):
        verts = [tuple(int(c) for c in v) for v in poly.vertices]
        assert poly.area_px == area
        assert set(verts) == border
        # consecutive vertices (cyclically) are distinct 8-neighbours
        for a, b in zip(verts, verts[1:] + verts[:1]):
            if len(verts) > 1:
                assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1


def test_empty_mask():
    assert extract_outlines(BinaryMask(np.zeros((5, 5), bool))) == []


def test_3x3_block():
    (poly,) = extract_outlines(BinaryMask(block_mask((7, 7), (2, 5, 1, 4))))
    assert poly.area_px == 9
    assert {tuple(v) for v in poly.vertices.astype(int).tolist()} == {
        (x, y) for x in range(1, 4) for y in range(2, 5) if (x, y) != (2, 3)}
    assert len(poly) == 8


def test_two_blocks():
    m = block_mask((10, 12), (1, 4, 1, 4), (5, 9, 6, 11))
    polys = extract_outlines(BinaryMask(m))
    assert [p.area_px for p in polys] == [9, 20]
    _check_against_oracle(m)


def test_hole_is_not_part_of_outer_outline():
    m = block_mask((9, 9), (1, 8, 1, 8))
    m[3:6, 3:6] = False
    _check_against_oracle(m)
    (poly,) = extract_outlines(BinaryMask(m))
    assert poly.area_px == 49 - 9
    assert (4, 2) not in {tuple(v) for v in poly.vertices.astype(int).tolist()}


def test_region_inside_hole():
    m = block_mask((11, 11), (0, 11, 0, 11))
    m[2:9, 2:9] = False
    m[4:7, 4:7] = True
    _check_against_oracle(m)


def test_min_area_filter():
    m = block_mask((10, 12), (1, 4, 1, 4), (5, 9, 6, 11))
    assert [p.area_px for p in extract_outlines(BinaryMask(m), min_area=10)] == [20]


def test_500_random_masks_match_flood_fill_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        h, w = rng.integers(1, 33, size=2)
        density = rng.uniform(0.2, 0.8)
        _check_against_oracle(rng.random((h, w)) < density)


@given(arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_oracle_property(bits):
    _check_against_oracle(bits)


@given(arrays(bool, st.tuples(st.integers(1, 16), st.integers(1, 16))))
def test_tracer_backends_agree(bits):
    a = extract_outlines(BinaryMask(bits), tracer=_trace_nb)
    b = extract_outlines(BinaryMask(bits), tracer=_trace_py)
    assert len(a) == len(b)
    for p, q in zip(a, b):
        assert np.array_equal(p.vertices, q.vertices) and p.area_px == q.area_px
