"""Uniform linear array and OFDM configuration plus steering responses.

Conventions used throughout the package:

* antennas are indexed ``k = 0 .. M-1``, subcarriers ``w = 0 .. N-1``;
* a space-frequency channel matrix is ``M x N`` (antennas by subcarriers);
* vectorization is column-major with the antenna index varying fastest,
  i.e. ``vec(H)[k + M*w] = H[k, w]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class DomainError(ValueError):
    """Argument outside the physical domain of an operation."""


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array serving one 2*max_aoa sector.

    The element spacing is tied to the angular span as d/lambda =
    1 / (2 sin(max_aoa)) so that the full span maps onto the unaliased
    spatial-frequency range.
    """

    num_antennas: int
    max_aoa: float  # radians, half-span of the served sector

    def __post_init__(self) -> None:
        if self.num_antennas < 1:
            raise ValueError(f"num_antennas must be >= 1, got {self.num_antennas}")
        if not 0.0 < self.max_aoa <= np.pi / 2:
            raise ValueError(f"max_aoa must lie in (0, pi/2], got {self.max_aoa}")

    @property
    def spacing_ratio(self) -> float:
        """Element spacing in wavelengths, d / lambda."""
        return 1.0 / (2.0 * np.sin(self.max_aoa))

    @property
    def max_sin(self) -> float:
        return float(np.sin(self.max_aoa))


@dataclass(frozen=True)
class OfdmConfig:
    """OFDM numerology for one slot.

    ``max_delay`` is the longest delay spread the cyclic prefix absorbs;
    delays must satisfy max_delay * bandwidth <= num_subcarriers so that
    they are representable on the discrete frequency grid.
    """

    num_subcarriers: int
    bandwidth: float  # Hz
    subcarrier_spacing: float  # Hz
    max_delay: float  # seconds (cyclic-prefix length)
    coherence_block_subcarriers: int = 1
    symbols_per_slot: int = 1
    slot_duration: float = 1e-3  # seconds

    def __post_init__(self) -> None:
        if self.num_subcarriers < 1:
            raise ValueError("num_subcarriers must be >= 1")
        if self.bandwidth <= 0 or self.subcarrier_spacing <= 0:
            raise ValueError("bandwidth and subcarrier_spacing must be positive")
        n_expected = self.bandwidth / self.subcarrier_spacing
        if abs(n_expected - self.num_subcarriers) > 1e-6 * self.num_subcarriers:
            raise ValueError(
                f"num_subcarriers ({self.num_subcarriers}) must equal "
                f"bandwidth/subcarrier_spacing ({n_expected:g})"
            )
        if self.max_delay <= 0:
            raise ValueError("max_delay must be positive")
        if self.max_delay * self.bandwidth > self.num_subcarriers * (1 + 1e-12):
            raise ValueError(
                "max_delay * bandwidth exceeds num_subcarriers; delays not representable"
            )
        if not 1 <= self.coherence_block_subcarriers <= self.num_subcarriers:
            raise ValueError("coherence_block_subcarriers must lie in [1, num_subcarriers]")
        if self.symbols_per_slot < 1:
            raise ValueError("symbols_per_slot must be >= 1")

    @property
    def useful_symbol_time(self) -> float:
        """Effective OFDM symbol duration 1/subcarrier_spacing."""
        return 1.0 / self.subcarrier_spacing

    @property
    def delay_period(self) -> float:
        """Unambiguous delay range N/W of the discrete frequency grid."""
        return self.num_subcarriers / self.bandwidth


def array_response(cfg: ArrayConfig, theta: float) -> np.ndarray:
    """Array response a(theta), entries exp(j*k*pi*sin(theta)/sin(max_aoa)).

    Raises DomainError for angles outside [-max_aoa, max_aoa].
    """
    if abs(theta) > cfg.max_aoa + 1e-12:
        raise DomainError(f"AoA {theta} outside [-{cfg.max_aoa}, {cfg.max_aoa}]")
    k = np.arange(cfg.num_antennas)
    return np.exp(1j * np.pi * k * np.sin(theta) / cfg.max_sin)


def delay_response(cfg: OfdmConfig, tau: float) -> np.ndarray:
    """Delay response b(tau), entries exp(j*2*pi*W*tau*w/N).

    Accepts 0 <= tau <= N/W (the full unambiguous delay period; tau = N/W
    wraps to the all-ones vector).  Channel generation additionally
    restricts physical delays to [0, max_delay) at the multipath level.
    """
    if tau < 0 or tau > cfg.delay_period * (1 + 1e-12):
        raise DomainError(f"delay {tau} outside [0, {cfg.delay_period}]")
    w = np.arange(cfg.num_subcarriers)
    return np.exp(2j * np.pi * cfg.bandwidth * tau * w / cfg.num_subcarriers)


def steering_vector(arr: ArrayConfig, ofdm: OfdmConfig, theta: float, tau: float) -> np.ndarray:
    """Angle-delay response vec(a(theta) b(tau)^H), length M*N, norm sqrt(M*N)."""
    a = array_response(arr, theta)
    b = delay_response(ofdm, tau)
    return np.outer(a, b.conj()).reshape(-1, order="F")


def steering_matrix(
    arr: ArrayConfig, ofdm: OfdmConfig, thetas: np.ndarray, taus: np.ndarray
) -> np.ndarray:
    """Stack of angle-delay responses, shape (M*N, L), columns vec(a b^H).

    Vectorized over components; does not apply the 1/sqrt(M*N) dictionary
    normalization.
    """
    thetas = np.asarray(thetas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    if thetas.shape != taus.shape:
        raise ValueError("thetas and taus must have matching shapes")
    k = np.arange(arr.num_antennas)[:, None]
    w = np.arange(ofdm.num_subcarriers)[:, None]
    a = np.exp(1j * np.pi * k * np.sin(thetas)[None, :] / arr.max_sin)  # (M, L)
    bconj = np.exp(
        -2j * np.pi * ofdm.bandwidth * w * taus[None, :] / ofdm.num_subcarriers
    )  # (N, L)
    atoms = a[:, None, :] * bconj[None, :, :]  # (M, N, L)
    mn = arr.num_antennas * ofdm.num_subcarriers
    return atoms.reshape(mn, -1, order="F")
