"""Decomposition of an estimated PSF into signal and interference masks.

Unsupervised clustering thresholds the PSF and splits it by a delay
threshold; supervised clustering partitions the thresholded support into
rectangular cluster hypotheses and picks the one a decoding oracle
accepts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .grid import AngleDelayGrid


@dataclass(frozen=True)
class MaskPair:
    """Disjoint signal/interference masks over the (Gt, Gd) grid."""

    signal: np.ndarray
    interference: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "signal", np.asarray(self.signal, bool))
        object.__setattr__(self, "interference", np.asarray(self.interference, bool))
        if self.signal.shape != self.interference.shape:
            raise ValueError("mask shapes differ")
        if np.any(self.signal & self.interference):
            raise ValueError("signal and interference masks must be disjoint")

    @property
    def union(self) -> np.ndarray:
        return self.signal | self.interference


def default_mask_threshold(weights: np.ndarray) -> float:
    """Relative masking threshold: 2% of the peak weight, floored at
    3x the median nonzero weight."""
    weights = np.asarray(weights, float)
    nz = weights[weights > 0]
    if nz.size == 0:
        return 0.0
    return max(0.02 * float(nz.max()), 3.0 * float(np.median(nz)))


def build_mask(weights: np.ndarray, grid: AngleDelayGrid, iota: float) -> np.ndarray:
    """Boolean (Gt, Gd) mask, true exactly where the PSF weight >= iota.

    The mask lives on the PSF's support: zero-weight cells never enter,
    so iota = 0 selects exactly the support.
    """
    if iota < 0:
        raise ValueError("masking threshold must be nonnegative")
    weights = np.asarray(weights, float)
    if weights.shape == (grid.size,):
        weights = grid.to_matrix(weights)
    return (weights >= iota) & (weights > 0)


def cluster_by_delay(
    weights: np.ndarray,
    grid: AngleDelayGrid,
    tau0: float,
    iota: float = 0.0,
) -> MaskPair:
    """Split the thresholded PSF at a delay threshold.

    Grid cells with delay <= tau0 go to the signal mask, the rest to the
    interference mask; the two cover the thresholded support exactly.
    """
    if not 0 <= tau0 < grid.delay_period:
        raise ValueError(f"tau0 must lie in [0, {grid.delay_period})")
    mask = build_mask(weights, grid, iota)
    early = grid.delay_points <= tau0
    signal = mask & early[None, :]
    return MaskPair(signal, mask & ~signal)


@dataclass(frozen=True)
class Cluster:
    cells: np.ndarray  # (n, 2) int array of (angle_index, delay_index)
    mass: float
    centroid: tuple[float, float]  # weight centroid in index coordinates

    @property
    def rectangle(self) -> tuple[int, int, int, int]:
        """Bounding box (angle_lo, angle_hi, delay_lo, delay_hi), inclusive."""
        return (
            int(self.cells[:, 0].min()),
            int(self.cells[:, 0].max()),
            int(self.cells[:, 1].min()),
            int(self.cells[:, 1].max()),
        )


@dataclass(frozen=True)
class ClusterHypothesis:
    """Partition of the thresholded mask into at most k clusters."""

    clusters: tuple[Cluster, ...]
    mask: np.ndarray  # the thresholded support all clusters cover
    selected: Optional[int] = None


def _connected_components(mask: np.ndarray) -> np.ndarray:
    """8-connected component labels; the angle axis (axis 0) wraps.

    Angle wraparound groups energy that aliases across the +-max_aoa
    edge of the spatial-frequency grid; the delay axis does not wrap.
    Returns an int array, 0 = background.
    """
    from scipy import ndimage

    labels, num = ndimage.label(mask, structure=np.ones((3, 3), int))
    if num > 1 and mask.shape[0] > 2:
        # merge labels adjacent across the angle seam (rows 0 and -1)
        parent = np.arange(num + 1)

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        top, bottom = labels[0, :], labels[-1, :]
        gd = mask.shape[1]
        for j in range(gd):
            if top[j] == 0:
                continue
            for dj in (-1, 0, 1):
                jj = j + dj
                if 0 <= jj < gd and bottom[jj] != 0:
                    ra, rb = find(top[j]), find(bottom[jj])
                    if ra != rb:
                        parent[rb] = ra
        labels = np.array([find(a) for a in range(num + 1)])[labels]
    return labels


def partition_rectangles(
    weights: np.ndarray,
    grid: AngleDelayGrid,
    k: int,
    iota: float = 0.0,
) -> ClusterHypothesis:
    """Group the thresholded PSF into at most k rectangular clusters.

    Connected components of the mask are merged bottom-up by nearest
    weight-centroid until at most k remain; each cluster is reported with
    its member cells (disjoint) and bounding rectangle (may touch).
    Raises on an empty mask.
    """
    if k < 1:
        raise ValueError("cluster count must be >= 1")
    wmat = np.asarray(weights, float)
    if wmat.shape == (grid.size,):
        wmat = grid.to_matrix(wmat)
    mask = wmat >= iota if iota > 0 else (wmat > 0)
    if not mask.any():
        raise ValueError("mask is empty; nothing to cluster")

    labels = _connected_components(mask)
    groups: dict[int, list[np.ndarray]] = {}
    for lab in np.unique(labels):
        if lab == 0:
            continue
        cells = np.argwhere(labels == lab)
        groups[lab] = [cells]

    def stats(cells: np.ndarray) -> tuple[float, np.ndarray]:
        w = wmat[cells[:, 0], cells[:, 1]]
        total = float(w.sum())
        if total > 0:
            centroid = (w[:, None] * cells).sum(axis=0) / total
        else:
            centroid = cells.mean(axis=0)
        return total, centroid

    members = [np.concatenate(v) for v in groups.values()]
    info = [stats(c) for c in members]
    while len(members) > k:
        best = None
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                d = float(np.linalg.norm(info[a][1] - info[b][1]))
                if best is None or d < best[0]:
                    best = (d, a, b)
        _, a, b = best
        merged = np.concatenate([members[a], members[b]])
        members = [m for i, m in enumerate(members) if i not in (a, b)] + [merged]
        info = [s for i, s in enumerate(info) if i not in (a, b)] + [stats(merged)]

    clusters = tuple(
        Cluster(cells=c, mass=s[0], centroid=(float(s[1][0]), float(s[1][1])))
        for c, s in zip(members, info)
    )
    return ClusterHypothesis(clusters=clusters, mask=mask)


def hypothesis_order(hypothesis: ClusterHypothesis) -> list[int]:
    """Canonical evaluation order: descending mass, ties by smaller delay
    centroid."""
    keys = [(-c.mass, c.centroid[1], i) for i, c in enumerate(hypothesis.clusters)]
    return [i for _, _, i in sorted(keys)]


def mask_pair_for_candidate(hypothesis: ClusterHypothesis, index: int) -> MaskPair:
    """Treat cluster ``index``'s rectangle as signal, the rest of the
    thresholded mask as interference."""
    lo_a, hi_a, lo_d, hi_d = hypothesis.clusters[index].rectangle
    box = np.zeros_like(hypothesis.mask)
    box[lo_a : hi_a + 1, lo_d : hi_d + 1] = True
    signal = hypothesis.mask & box
    return MaskPair(signal, hypothesis.mask & ~signal)


@dataclass(frozen=True)
class OracleVerdict:
    success: bool
    achieved_rate: float = 0.0  # bits/s/Hz, diagnostic


@dataclass
class SelectionResult:
    """Outcome of supervised cluster selection.

    ``mask_pair`` is None when every hypothesis failed (packet-failure
    semantics: the slot is rejected rather than erroring).
    """

    mask_pair: Optional[MaskPair]
    selected: Optional[int]
    verdicts: list[OracleVerdict] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.mask_pair is not None


def supervised_select(
    hypothesis: ClusterHypothesis,
    estimator: Callable[[MaskPair], Any],
    oracle: Callable[[Any], OracleVerdict],
) -> SelectionResult:
    """Pick the cluster whose decontaminated estimate the oracle accepts.

    Candidates are tried in canonical order (descending PSF mass); for
    each, the estimator builds a decontaminated channel estimate from the
    candidate mask pair and the oracle judges it.  The first success
    wins; if none succeeds the packet is rejected.
    """
    if not hypothesis.clusters:
        raise ValueError("hypothesis has no clusters")
    verdicts: list[OracleVerdict] = []
    for idx in hypothesis_order(hypothesis):
        pair = mask_pair_for_candidate(hypothesis, idx)
        verdict = oracle(estimator(pair))
        verdicts.append(verdict)
        if verdict.success:
            return SelectionResult(mask_pair=pair, selected=idx, verdicts=verdicts)
    return SelectionResult(mask_pair=None, selected=None, verdicts=verdicts)
