import numpy as np
import pytest

from depthtrack.metrics import polygon_mask
from depthtrack.tracker import TrackerConfig, refine_corners
from depthtrack.tracker.refine import MARGIN, OK, SINGULAR

CFG = TrackerConfig()


def _l_corner(n=40, at=20):
    img = np.zeros((n, n))
    img[at:, at:] = 1.0
    return img, np.array([at - 0.5, at - 0.5])


def _four(p):
    return np.tile(p, (4, 1))


def test_corner_at_ideal_intersection_barely_moves():
    img, truth = _l_corner()
    res = refine_corners(img, _four(truth), CFG)
    assert res.status[0] == OK
    assert np.hypot(*(res.corners[0] - truth)) < 0.5


@pytest.mark.parametrize("offset", [(1, 0), (0, 1), (-1, 0), (0.7, -0.7)])
def test_one_pixel_off_moves_closer(offset):
    img, truth = _l_corner()
    start = truth + np.array(offset)
    res = refine_corners(img, _four(start), CFG)
    assert np.hypot(*(res.corners[0] - truth)) < np.hypot(*(start - truth))


def test_tilted_corner_moves_closer():
    quad = np.array([[20.3, 14.1], [52.0, 22.7], [44.9, 50.2], [12.6, 42.0]])
    img = polygon_mask((64, 64), quad).astype(float)
    for k in range(4):
        start = quad[k] + np.array([0.8, -0.6])
        res = refine_corners(img, _four(start), CFG)
        assert np.hypot(*(res.corners[0] - quad[k])) < np.hypot(*(start - quad[k]))


def test_uniform_neighbourhood_is_flagged():
    img = np.full((30, 30), 500.0)
    res = refine_corners(img, _four(np.array([15.0, 15.0])), CFG)
    assert res.status == (SINGULAR,) * 4 and all(res.flagged)
    assert np.array_equal(res.corners, _four(np.array([15.0, 15.0])))


def test_straight_edge_is_singular():
    img = np.zeros((30, 30))
    img[:, 15:] = 1.0
    res = refine_corners(img, _four(np.array([14.5, 15.0])), CFG)
    assert res.status[0] == SINGULAR


def test_margin_returns_unrefined():
    img, _ = _l_corner()
    p = np.array([2.0, 2.0])
    res = refine_corners(img, _four(p), CFG)
    assert res.status[0] == MARGIN and np.array_equal(res.corners[0], p)


def test_refined_within_half_window():
    rng = np.random.default_rng(3)
    img = (rng.random((60, 60)) < 0.5).astype(float)
    pts = rng.uniform(8, 52, (4, 2))
    res = refine_corners(img, pts, CFG)
    assert np.all(np.hypot(*(res.corners - pts).T) <= CFG.refine_window / 2)
