import numpy as np
import pytest

from pilotdecon import (
    MaskPair,
    OracleVerdict,
    build_mask,
    cluster_by_delay,
    default_mask_threshold,
    partition_rectangles,
    supervised_select,
)
from pilotdecon.clustering import hypothesis_order, mask_pair_for_candidate
from pilotdecon.grid import AngleDelayGrid


@pytest.fixture
def grid():
    return AngleDelayGrid(16, 16, np.sin(np.deg2rad(60)), 1e-4)


def _weights_with_blobs(grid, blobs):
    """blobs: list of (angle_center, delay_center, half_size, weight)."""
    w = np.zeros((grid.num_angles, grid.num_delays))
    for ai, di, half, val in blobs:
        w[ai - half : ai + half + 1, di - half : di + half + 1] = val
    return grid.to_flat(w)


def test_mask_pair_disjointness_enforced():
    a = np.zeros((4, 4), bool)
    a[0, 0] = True
    with pytest.raises(ValueError):
        MaskPair(a, a)


def test_build_mask_zero_threshold_is_support(grid, rng):
    w = np.where(rng.uniform(size=grid.size) < 0.1, 1.0, 0.0)
    mask = build_mask(w, grid, 0.0)
    assert mask.sum() == w.astype(bool).sum()
    assert np.array_equal(grid.to_flat(mask), w > 0)


def test_build_mask_above_max_empty(grid):
    w = np.zeros(grid.size)
    w[5] = 2.0
    assert not build_mask(w, grid, 2.5).any()


def test_build_mask_threshold_selection(grid):
    w = np.zeros(grid.size)
    w[[0, 1, 2]] = (0.5, 0.2, 0.05)
    mask = grid.to_flat(build_mask(w, grid, 0.1))
    assert set(np.flatnonzero(mask)) == {0, 1}


def test_default_threshold_scales():
    w = np.zeros(100)
    w[:10] = 1.0
    w[10] = 100.0
    iota = default_mask_threshold(w)
    assert iota == pytest.approx(3.0)  # floor: 3 x median nonzero
    w2 = np.zeros(100)
    w2[0] = 100.0
    assert default_mask_threshold(w2) == pytest.approx(3 * 100.0)


def test_cluster_by_delay_all_signal(grid):
    w = _weights_with_blobs(grid, [(4, 2, 1, 1.0)])
    tau0 = grid.delay_points[8]
    pair = cluster_by_delay(w, grid, tau0)
    assert not pair.interference.any()
    assert pair.signal.sum() == 9


def test_cluster_by_delay_partitions_support(grid):
    w = _weights_with_blobs(grid, [(3, 2, 1, 1.0), (11, 12, 1, 0.5)])
    tau0 = grid.delay_points[7]
    pair = cluster_by_delay(w, grid, tau0, iota=0.1)
    support = build_mask(w, grid, 0.1)
    assert np.array_equal(pair.union, support)
    assert not (pair.signal & pair.interference).any()
    # each blob lands wholly on one side
    assert pair.signal.sum() == 9 and pair.interference.sum() == 9


def test_cluster_by_delay_scale_invariance(grid):
    w = _weights_with_blobs(grid, [(3, 2, 1, 1.0), (11, 12, 1, 0.5)])
    tau0 = grid.delay_points[7]
    a = cluster_by_delay(w, grid, tau0, iota=0.1)
    b = cluster_by_delay(10 * np.asarray(w), grid, tau0, iota=1.0)
    assert np.array_equal(a.signal, b.signal)
    assert np.array_equal(a.interference, b.interference)


def test_cluster_by_delay_threshold_domain(grid):
    with pytest.raises(ValueError):
        cluster_by_delay(np.zeros(grid.size), grid, grid.delay_period)


def test_partition_single_blob(grid):
    w = _weights_with_blobs(grid, [(8, 8, 2, 1.0)])
    hyp = partition_rectangles(w, grid, k=7)
    assert len(hyp.clusters) == 1
    assert hyp.clusters[0].rectangle == (6, 10, 6, 10)


def test_partition_separated_blobs(grid):
    blobs = [(2, 2, 1, 1.0), (2, 12, 1, 0.9), (8, 7, 1, 0.8), (13, 2, 1, 0.7)]
    w = _weights_with_blobs(grid, blobs)
    hyp = partition_rectangles(w, grid, k=7)
    assert len(hyp.clusters) == 4
    rects = sorted(c.rectangle for c in hyp.clusters)
    assert rects == [(1, 3, 1, 3), (1, 3, 11, 13), (7, 9, 6, 8), (12, 14, 1, 3)]
    # memberships are disjoint and cover the mask
    total = sum(len(c.cells) for c in hyp.clusters)
    assert total == hyp.mask.sum()


def test_partition_merges_nearest(grid):
    # three blobs, k=2: the two closest merge
    blobs = [(2, 2, 1, 1.0), (2, 5, 1, 1.0), (13, 13, 1, 1.0)]
    w = _weights_with_blobs(grid, blobs)
    hyp = partition_rectangles(w, grid, k=2)
    assert len(hyp.clusters) == 2
    sizes = sorted(len(c.cells) for c in hyp.clusters)
    assert sizes == [9, 18]


def test_partition_angle_wraparound(grid):
    # energy aliasing across the angle edge groups into one component
    w = np.zeros((grid.num_angles, grid.num_delays))
    w[0, 4] = 1.0
    w[grid.num_angles - 1, 4] = 1.0
    hyp = partition_rectangles(grid.to_flat(w), grid, k=7)
    assert len(hyp.clusters) == 1


def test_partition_empty_mask_raises(grid):
    with pytest.raises(ValueError):
        partition_rectangles(np.zeros(grid.size), grid, k=3)


def test_hypothesis_order_mass_then_delay(grid):
    blobs = [(2, 12, 1, 0.5), (8, 2, 1, 1.0)]
    w = _weights_with_blobs(grid, blobs)
    hyp = partition_rectangles(w, grid, k=3)
    order = hypothesis_order(hyp)
    first = hyp.clusters[order[0]]
    assert first.mass == pytest.approx(9.0)  # heavier blob first


def test_mask_pair_candidate_covers_support(grid):
    blobs = [(2, 2, 1, 1.0), (10, 12, 1, 0.5)]
    w = _weights_with_blobs(grid, blobs)
    hyp = partition_rectangles(w, grid, k=2)
    pair = mask_pair_for_candidate(hyp, 0)
    assert np.array_equal(pair.union, hyp.mask)


def test_supervised_select_finds_oracle_cluster(grid):
    blobs = [(2, 2, 1, 1.0), (8, 8, 1, 2.0), (13, 13, 1, 1.5)]
    w = _weights_with_blobs(grid, blobs)
    hyp = partition_rectangles(w, grid, k=3)
    target = (1, 3)  # the blob at (2, 2) in angle-range terms

    def estimator(pair):
        return pair

    def oracle(pair):
        lo_a = np.flatnonzero(pair.signal.any(axis=1))
        good = lo_a.size and lo_a.min() == target[0] and lo_a.max() == target[1]
        return OracleVerdict(bool(good), 2.0 if good else 0.1)

    result = supervised_select(hyp, estimator, oracle)
    assert result.accepted
    chosen = hyp.clusters[result.selected]
    assert chosen.rectangle[:2] == target
    # not the first candidate in canonical order (mass 9 < 18), so the
    # oracle really drove the choice
    assert result.selected != hypothesis_order(hyp)[0]


def test_supervised_select_single_hypothesis(grid):
    w = _weights_with_blobs(grid, [(8, 8, 1, 1.0)])
    hyp = partition_rectangles(w, grid, k=1)
    ok = supervised_select(hyp, lambda p: p, lambda e: OracleVerdict(True, 2.0))
    assert ok.accepted and ok.selected == 0
    bad = supervised_select(hyp, lambda p: p, lambda e: OracleVerdict(False, 0.0))
    assert not bad.accepted and bad.mask_pair is None
    assert len(bad.verdicts) == 1


def test_supervised_select_order_independent(grid):
    # exactly one passing hypothesis: result invariant to cluster order
    blobs = [(2, 2, 1, 1.0), (10, 12, 1, 3.0)]
    w = _weights_with_blobs(grid, blobs)
    hyp = partition_rectangles(w, grid, k=2)

    def oracle(pair):
        rows = np.flatnonzero(pair.signal.any(axis=1))
        return OracleVerdict(bool(rows.size and rows.min() <= 3), 1.0)

    res1 = supervised_select(hyp, lambda p: p, oracle)
    swapped = type(hyp)(clusters=hyp.clusters[::-1], mask=hyp.mask)
    res2 = supervised_select(swapped, lambda p: p, oracle)
    assert np.array_equal(res1.mask_pair.signal, res2.mask_pair.signal)
