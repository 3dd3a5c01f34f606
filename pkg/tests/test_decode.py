import numpy as np
import pytest

from movepose.decode import (AffineTransform, PosePrediction, SimccOutput, dark_decode, flip_fuse,
                             map_coords, simcc_decode, unflip, unmap_coords)
from movepose.errors import ConfigurationError, DimensionError


def scan_argmax(v):
    """Linear scan, first maximum wins."""
    best, idx = v[0], 0
    for i in range(1, len(v)):
        if v[i] > best:
            best, idx = v[i], i
    return idx


def simcc_oracle(ox, oy, k):
    return np.array([[scan_argmax(ox[j]) / k, scan_argmax(oy[j]) / k] for j in range(ox.shape[0])])


def gaussian_map(h, w, cx, cy, sigma):
    yy, xx = np.mgrid[0:h, 0:w]
    return np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma ** 2))


# --- SimCC -------------------------------------------------------------------

def test_simcc_worked_example():
    ox = np.zeros((1, 512))
    oy = np.zeros((1, 512))
    ox[0, 300] = 5.0
    oy[0, 120] = 5.0
    pred = simcc_decode(SimccOutput(ox, oy, 2.0))
    np.testing.assert_array_equal(pred.xy, [[150.0, 60.0]])
    assert pred.frame == "crop"


def test_simcc_unit_split():
    ox = np.zeros((1, 64))
    ox[0, 37] = 1.0
    pred = simcc_decode(SimccOutput(ox, ox.copy(), 1.0))
    assert pred.xy[0, 0] == 37.0 and pred.xy[0, 1] == 37.0


def test_simcc_ties_take_lowest_index():
    ox = np.zeros((2, 16))
    ox[0, [3, 9]] = 1.0
    pred = simcc_decode(SimccOutput(ox, ox, 1.0))
    assert pred.xy[0, 0] == 3.0 and pred.xy[1, 0] == 0.0


@pytest.mark.parametrize("k", [1, 2, 4])
def test_simcc_matches_linear_scan(k, rng):
    for _ in range(50):
        ox = rng.standard_normal((17, 64 * k))
        oy = rng.standard_normal((17, 64 * k))
        # make ties common
        ox = np.round(ox, 1)
        pred = simcc_decode(SimccOutput(ox[None], oy[None], float(k)))
        np.testing.assert_array_equal(pred.xy, simcc_oracle(ox, oy, k))


def test_simcc_invariant_under_monotone_maps(rng):
    ox = rng.standard_normal((17, 128))
    oy = rng.standard_normal((17, 128))
    base = simcc_decode(SimccOutput(ox, oy, 2.0)).xy
    for f in (lambda v: 3 * v + 7, np.exp, np.tanh, lambda v: v ** 3, lambda v: np.arctan(v) - 1):
        np.testing.assert_array_equal(simcc_decode(SimccOutput(f(ox), f(oy), 2.0)).xy, base)


def test_simcc_score_is_product_of_peak_probabilities():
    ox = np.log(np.array([[0.1, 0.6, 0.3]]))
    oy = np.log(np.array([[0.5, 0.25, 0.25]]))
    pred = simcc_decode(SimccOutput(ox, oy, 1.0))
    assert pred.scores[0] == pytest.approx(0.3)


def test_simcc_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        SimccOutput(np.zeros((1, 4)), np.zeros((1, 4)), 0.5)
    with pytest.raises(DimensionError):
        SimccOutput(np.zeros((2, 4)), np.zeros((3, 4)))
    with pytest.raises(DimensionError):
        simcc_decode(SimccOutput(np.zeros((2, 1, 4)), np.zeros((2, 1, 4))))


# --- DARK ----------------------------------------------------------------------

def test_dark_worked_example():
    hm = gaussian_map(64, 64, 10.3, 20.7, 2.0)[None]
    pred = dark_decode(hm, stride=4.0)
    assert abs(pred.xy[0, 0] - 41.2) <= 0.05 * 4
    assert abs(pred.xy[0, 1] - 82.8) <= 0.05 * 4


def test_dark_recovers_gaussian_centres(rng):
    for _ in range(100):
        cx, cy = rng.uniform(8, 56, 2)
        sigma = rng.uniform(1.5, 3.0)
        pred = dark_decode(gaussian_map(64, 64, cx, cy, sigma)[None], stride=1.0)
        assert abs(pred.xy[0, 0] - cx) < 0.05 and abs(pred.xy[0, 1] - cy) < 0.05


def test_dark_delta_is_exact(rng):
    for _ in range(30):
        x, y = rng.integers(0, 64, 2)
        hm = np.zeros((1, 64, 64))
        hm[0, y, x] = rng.uniform(0.1, 5)
        pred = dark_decode(hm, stride=4.0)
        assert pred.xy[0, 0] == 4.0 * x and pred.xy[0, 1] == 4.0 * y


def test_dark_two_peaks_pick_one_not_midpoint():
    hm = np.zeros((1, 64, 64))
    hm[0, 30, 20] = 1.0
    hm[0, 30, 28] = 1.0
    pred = dark_decode(hm, stride=1.0)
    np.testing.assert_array_equal(pred.xy[0], [20.0, 30.0])


def test_dark_scores_and_empty_maps():
    hm = np.zeros((2, 8, 8))
    hm[0, 2, 3] = 3.0
    pred = dark_decode(hm[None])
    assert pred.scores[0] == 1.0 and pred.scores[1] == 0.0
    np.testing.assert_array_equal(pred.xy[1], [0.0, 0.0])


# --- flip fusion -----------------------------------------------------------------

PAIRS = [(1, 2), (3, 4)]


def test_unflip_swaps_and_reverses():
    hm = np.arange(5 * 2 * 3, dtype=float).reshape(5, 2, 3)
    back = unflip(hm, PAIRS)
    np.testing.assert_array_equal(back[1], hm[2, :, ::-1])
    np.testing.assert_array_equal(back[0], hm[0, :, ::-1])
    np.testing.assert_array_equal(unflip(back, PAIRS), hm)


def test_flip_fuse_fixed_point_on_mirrored_prediction(rng):
    ox = rng.standard_normal((1, 5, 32))
    oy = rng.standard_normal((1, 5, 32))
    out = SimccOutput(ox, oy)
    mirrored = unflip(out, PAIRS)  # what a perfectly symmetric model returns for the mirrored crop
    fused = flip_fuse(out, mirrored, PAIRS)
    np.testing.assert_array_equal(fused.x, ox)
    np.testing.assert_array_equal(fused.y, oy)
    hm = rng.standard_normal((1, 5, 8, 8))
    np.testing.assert_array_equal(flip_fuse(hm, unflip(hm, PAIRS), PAIRS), hm)


def test_flip_fuse_averages():
    a = np.zeros((3, 2, 2))
    b = np.ones((3, 2, 2))
    np.testing.assert_array_equal(flip_fuse(a, b, []), np.full((3, 2, 2), 0.5))


def test_flip_pairs_validated():
    hm = np.zeros((3, 2, 2))
    with pytest.raises(ConfigurationError):
        unflip(hm, [(0, 5)])
    with pytest.raises(ConfigurationError):
        unflip(hm, [(0, 1), (1, 2)])
    with pytest.raises(DimensionError):
        flip_fuse(np.zeros((3, 2, 2)), np.zeros((3, 2, 4)), [])


# --- coordinate frames -------------------------------------------------------------

def test_unmap_identity_and_translation(rng):
    kps = np.column_stack([rng.uniform(0, 256, (17, 2)), rng.uniform(0, 1, 17)])
    pred = PosePrediction(kps)
    same = unmap_coords(pred, AffineTransform.identity())
    np.testing.assert_array_equal(same.keypoints, kps)
    assert same.frame == "original"
    moved = unmap_coords(pred, AffineTransform([[1, 0, 10], [0, 1, -4]]))
    np.testing.assert_array_equal(moved.xy, kps[:, :2] + [10, -4])
    np.testing.assert_array_equal(moved.scores, kps[:, 2])


def test_map_inverts_unmap(rng):
    kps = np.column_stack([rng.uniform(0, 256, (17, 2)), np.ones(17)])
    t = AffineTransform([[1.7, 0.0, 33.0], [0.0, 1.7, -12.5]])
    back = map_coords(unmap_coords(PosePrediction(kps), t), t)
    np.testing.assert_allclose(back.keypoints, kps, atol=1e-9)
    with pytest.raises(ConfigurationError):
        unmap_coords(back.__class__(kps, "original"), t)
    with pytest.raises(ConfigurationError):
        AffineTransform([[0, 0, 1], [0, 0, 1]])
