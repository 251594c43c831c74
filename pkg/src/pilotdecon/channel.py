"""Multipath channel generation, uplink sketches, and sampling patterns.

Ground-truth channels follow a one-ring scattering geometry: scatterers
sit on a ring around the user, each contributing one multipath component
whose AoA and delay come from the BS -> scatterer -> user ray.  Gains are
i.i.d. circularly-symmetric Gaussian per slot, so slots decorrelate and
the per-slot channel matrix is a sum of rank-one angle-delay atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .steering import SPEED_OF_LIGHT, ArrayConfig, OfdmConfig


class GeometryError(ValueError):
    """Scene geometry produces multipath outside the supported domain."""


@dataclass(frozen=True)
class MultipathComponent:
    aoa: float  # radians
    delay: float  # seconds
    power: float  # linear, E|gain|^2

    def __post_init__(self) -> None:
        if self.power <= 0:
            raise ValueError("multipath power must be positive")
        if self.delay < 0:
            raise ValueError("multipath delay must be nonnegative")


@dataclass(frozen=True)
class UserGeometry:
    """User position with its scattering ring."""

    position: tuple[float, float]  # meters, BS frame
    ring_radius: float = 150.0
    num_mpcs: int = 50

    def __post_init__(self) -> None:
        if self.ring_radius <= 0 or self.num_mpcs < 1:
            raise ValueError("ring_radius must be positive and num_mpcs >= 1")

    def distance_to(self, point: tuple[float, float]) -> float:
        return float(np.hypot(self.position[0] - point[0], self.position[1] - point[1]))


def snr_before_beamforming(r: float, exponent: float, r0: float, snr_max: float) -> float:
    """Distance-dependent SNR, snr_max / (1 + (r/r0)^exponent)."""
    if r < 0:
        raise ValueError("distance must be nonnegative")
    return snr_max / (1.0 + (r / r0) ** exponent)


def calibrate_snr_max(cell_radius: float, exponent: float, r0: float, snr_min: float) -> float:
    """Pick snr_max so the cell-boundary SNR equals snr_min."""
    return snr_min * (1.0 + (cell_radius / r0) ** exponent)


def one_ring_mpcs(
    geom: UserGeometry,
    bs_position: tuple[float, float],
    snr_model: Callable[[float], float],
    *,
    max_aoa: float,
    max_delay: float,
    boresight: float = 0.0,
    drop_out_of_view: bool = False,
) -> list[MultipathComponent]:
    """Multipath components for a one-ring scatterer geometry.

    Scatterers are placed at equal angular spacing on the ring; every
    component carries power SNR(r)/L where r is the BS-user distance.
    AoAs are bearings of the scatterers seen from the BS, measured from
    ``boresight``.  The resulting delay span is exactly
    2*ring_radius/c0 (scatterer-to-user legs all equal the ring radius).

    With ``drop_out_of_view`` the components invisible to the array
    (AoA beyond max_aoa) or beyond the cyclic prefix are discarded
    instead of raising; use this for interferers observed at a
    non-serving BS.
    """
    ux = geom.position[0] - bs_position[0]
    uy = geom.position[1] - bs_position[1]
    r = float(np.hypot(ux, uy))
    power = snr_model(r) / geom.num_mpcs
    phis = 2.0 * np.pi * np.arange(geom.num_mpcs) / geom.num_mpcs
    sx = ux + geom.ring_radius * np.cos(phis)
    sy = uy + geom.ring_radius * np.sin(phis)
    d_bs_scat = np.hypot(sx, sy)
    delays = (d_bs_scat + geom.ring_radius) / SPEED_OF_LIGHT
    aoas = _wrap_angle(np.arctan2(sy, sx) - boresight)

    mpcs = []
    for aoa, delay in zip(aoas, delays):
        visible = abs(aoa) <= max_aoa and delay < max_delay
        if not visible:
            if drop_out_of_view:
                continue
            raise GeometryError(
                f"multipath (aoa={np.degrees(aoa):.1f} deg, delay={delay * 1e6:.2f} us) "
                f"outside sector span or cyclic prefix"
            )
        mpcs.append(MultipathComponent(float(aoa), float(delay), float(power)))
    return mpcs


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def realize_channel(
    mpcs: Sequence[MultipathComponent],
    arr: ArrayConfig,
    ofdm: OfdmConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw one M x N channel matrix, sum of rank-one atoms with CN gains."""
    m, n = arr.num_antennas, ofdm.num_subcarriers
    if not mpcs:
        return np.zeros((m, n), dtype=complex)
    thetas = np.array([c.aoa for c in mpcs])
    taus = np.array([c.delay for c in mpcs])
    stds = np.sqrt([c.power for c in mpcs])
    gains = stds * (
        rng.standard_normal(len(mpcs)) + 1j * rng.standard_normal(len(mpcs))
    ) / np.sqrt(2.0)
    k = np.arange(m)[:, None]
    w = np.arange(n)[:, None]
    a = np.exp(1j * np.pi * k * np.sin(thetas)[None, :] / arr.max_sin)
    bconj = np.exp(-2j * np.pi * ofdm.bandwidth * w * taus[None, :] / n)
    return (a * gains[None, :]) @ bconj.T


@dataclass(frozen=True)
class SamplingPattern:
    """Antenna/subcarrier selection applied to one uplink slot."""

    antenna_indices: np.ndarray  # m distinct ints in [0, M)
    subcarrier_indices: np.ndarray  # n distinct ints in [0, N)
    slot: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "antenna_indices", np.asarray(self.antenna_indices, int))
        object.__setattr__(
            self, "subcarrier_indices", np.asarray(self.subcarrier_indices, int)
        )
        if len(np.unique(self.antenna_indices)) != len(self.antenna_indices):
            raise ValueError("antenna indices must be distinct")
        if len(np.unique(self.subcarrier_indices)) != len(self.subcarrier_indices):
            raise ValueError("subcarrier indices must be distinct")

    @property
    def num_antennas(self) -> int:
        return len(self.antenna_indices)

    @property
    def num_subcarriers(self) -> int:
        return len(self.subcarrier_indices)

    @property
    def size(self) -> int:
        return self.num_antennas * self.num_subcarriers

    def flat_indices(self, total_antennas: int) -> np.ndarray:
        """Selected positions in the vectorized M x N matrix.

        Entry (i, j) of the sampled m x n matrix sits at output position
        i + m*j and reads input position a_i + M*f_j.
        """
        grid = self.antenna_indices[:, None] + total_antennas * self.subcarrier_indices[None, :]
        return grid.reshape(-1, order="F")

    def select(self, matrix: np.ndarray) -> np.ndarray:
        """Extract the sampled m x n submatrix from an M x N matrix."""
        return matrix[np.ix_(self.antenna_indices, self.subcarrier_indices)]


def full_sampling(arr: ArrayConfig, ofdm: OfdmConfig, slot: int = 0) -> SamplingPattern:
    return SamplingPattern(
        np.arange(arr.num_antennas), np.arange(ofdm.num_subcarriers), slot
    )


def random_antenna_subset(
    num_antennas: int, ratio: float, rng: np.random.Generator
) -> np.ndarray:
    """I.i.d. uniform antenna subset of size round(ratio*M), without replacement."""
    m = max(1, int(round(ratio * num_antennas)))
    return np.sort(rng.choice(num_antennas, size=m, replace=False))


def pilot_pattern(
    ofdm: OfdmConfig,
    offset: int = 0,
    mode: str = "uniform",
    seed: int | np.random.Generator | None = None,
) -> np.ndarray:
    """Probed subcarrier indices: one per coherence sub-block.

    ``uniform`` probes offset, offset+D, ... (D the sub-block width);
    ``hopping`` draws one uniform index per sub-block, reproducible for a
    fixed seed.  Only the floor(N/D) complete sub-blocks carry pilots.
    """
    d = ofdm.coherence_block_subcarriers
    if not 0 <= offset < d:
        raise ValueError(f"offset must lie in [0, {d}), got {offset}")
    blocks = ofdm.num_subcarriers // d
    starts = d * np.arange(blocks)
    if mode == "uniform":
        return starts + offset
    if mode == "hopping":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return starts + rng.integers(0, d, size=blocks)
    raise ValueError(f"unknown pilot mode {mode!r}")


def sketch(
    channel_sum: np.ndarray,
    pattern: SamplingPattern,
    sigma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Noise-normalized sampled observation of a (superposed) channel.

    Returns vec(S^a (D + Z) S^f,H) / sigma as an mn-vector, with Z
    per-entry CN(0, sigma^2), so the output noise floor is unit variance.
    """
    if sigma <= 0:
        raise ValueError("noise std must be positive")
    if pattern.size == 0:
        raise ValueError("sampling pattern is empty")
    sampled = pattern.select(np.asarray(channel_sum))
    noise = (
        rng.standard_normal(sampled.shape) + 1j * rng.standard_normal(sampled.shape)
    ) * (sigma / np.sqrt(2.0))
    return ((sampled + noise) / sigma).reshape(-1, order="F")


@dataclass
class SketchWindow:
    """Window of w sketches with their per-slot sampling patterns."""

    sketches: np.ndarray  # (mn, w) complex, noise-normalized
    patterns: list[SamplingPattern] = field(default_factory=list)
    sigma: float = 1.0

    def __post_init__(self) -> None:
        self.sketches = np.asarray(self.sketches, complex)
        if self.sketches.ndim != 2:
            raise ValueError("sketches must be an (mn, w) matrix")
        if len(self.patterns) != self.sketches.shape[1]:
            raise ValueError("need one sampling pattern per sketch column")

    @property
    def window(self) -> int:
        return self.sketches.shape[1]
