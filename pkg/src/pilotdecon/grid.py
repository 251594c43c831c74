"""Quantized angle-delay grid and the FFT-backed dictionary operator.

The grid is uniform in sin(theta) over the array span and uniform in delay
over the unambiguous period N/W, with both sizes powers of two.  On that
grid every dictionary column is a radix-2 transform atom, so applications
of the dictionary and its adjoint reduce to 2D FFTs plus crop/zero-pad.

Grid coefficients are stored either as flat vectors of length G with the
angle index varying fastest (``l = i + G_theta * j``) or as
(G_theta, G_tau) matrices; channel matrices are M x N with antennas on
rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .steering import ArrayConfig, OfdmConfig, steering_matrix


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class AngleDelayGrid:
    """Rectangular angle-delay grid of G = num_angles * num_delays points.

    Angles are uniform in sin(theta) on [-max_sin, max_sin) and delays
    uniform on [0, delay_period), both half-open so no point is duplicated
    by wraparound.
    """

    num_angles: int
    num_delays: int
    max_sin: float
    delay_period: float  # seconds, equals N/W of the OFDM config

    def __post_init__(self) -> None:
        if not _is_pow2(self.num_angles) or not _is_pow2(self.num_delays):
            raise ValueError("grid sizes must be powers of two")
        if not 0 < self.max_sin <= 1:
            raise ValueError("max_sin must lie in (0, 1]")
        if self.delay_period <= 0:
            raise ValueError("delay_period must be positive")

    @classmethod
    def for_configs(
        cls,
        arr: ArrayConfig,
        ofdm: OfdmConfig,
        angle_oversampling: int = 2,
        delay_oversampling: int = 2,
    ) -> "AngleDelayGrid":
        gt = angle_oversampling * arr.num_antennas
        gd = delay_oversampling * ofdm.num_subcarriers
        if not _is_pow2(gt) or not _is_pow2(gd):
            raise ValueError(
                f"oversampled grid sizes ({gt}, {gd}) must be powers of two"
            )
        return cls(gt, gd, arr.max_sin, ofdm.delay_period)

    @property
    def size(self) -> int:
        return self.num_angles * self.num_delays

    @property
    def angle_sines(self) -> np.ndarray:
        return (-1.0 + 2.0 * np.arange(self.num_angles) / self.num_angles) * self.max_sin

    @property
    def angle_points(self) -> np.ndarray:
        """Grid AoAs in radians, uniform in sin(theta)."""
        return np.arcsin(self.angle_sines)

    @property
    def delay_points(self) -> np.ndarray:
        """Grid delays in seconds, uniform on [0, delay_period)."""
        return self.delay_period * np.arange(self.num_delays) / self.num_delays

    def flat_index(self, angle_index, delay_index):
        return np.asarray(angle_index) + self.num_angles * np.asarray(delay_index)

    def unravel(self, flat):
        flat = np.asarray(flat)
        return flat % self.num_angles, flat // self.num_angles

    def point(self, flat: int) -> tuple[float, float]:
        i, j = self.unravel(flat)
        return float(self.angle_points[i]), float(self.delay_points[j])

    def to_matrix(self, flat_values: np.ndarray) -> np.ndarray:
        """Reshape a flat G-vector to (num_angles, num_delays)."""
        return np.asarray(flat_values).reshape(self.num_delays, self.num_angles).T

    def to_flat(self, matrix: np.ndarray) -> np.ndarray:
        return np.asarray(matrix).T.reshape(-1)


def synthesis_full(coeffs: np.ndarray, num_angles: int) -> np.ndarray:
    """Unnormalized grid-to-space map on the last two axes.

    Input (..., G_theta, G_tau) grid coefficients; output the same shape,
    of which the top-left M x N block holds sqrt(M*N) times the dictionary
    image.  The angle axis uses a half-grid-shifted inverse DFT (so grid
    index 0 is sin = -max_sin) and the delay axis a forward DFT (delay
    responses enter conjugated via b^H).
    """
    shifted = np.fft.ifftshift(coeffs, axes=-2)
    return num_angles * np.fft.ifft(np.fft.fft(shifted, axis=-1), axis=-2)


def synthesis_adjoint(values: np.ndarray, num_delays: int) -> np.ndarray:
    """Adjoint of synthesis_full, space-to-grid on the last two axes."""
    t = num_delays * np.fft.ifft(np.fft.fft(values, axis=-2), axis=-1)
    return np.fft.fftshift(t, axes=-2)


@dataclass(frozen=True)
class Dictionary:
    """Linear operator mapping grid coefficients to M x N space-frequency
    responses; columns are unit-norm angle-delay atoms.

    Applications route through 2D FFTs (O(G log G)); ``dense()``
    materializes the MN x G matrix for test-scale validation.
    """

    grid: AngleDelayGrid
    num_antennas: int
    num_subcarriers: int

    def __post_init__(self) -> None:
        if self.num_antennas > self.grid.num_angles:
            raise ValueError("grid must have at least num_antennas angle points")
        if self.num_subcarriers > self.grid.num_delays:
            raise ValueError("grid must have at least num_subcarriers delay points")

    @classmethod
    def for_configs(
        cls,
        arr: ArrayConfig,
        ofdm: OfdmConfig,
        angle_oversampling: int = 2,
        delay_oversampling: int = 2,
    ) -> "Dictionary":
        grid = AngleDelayGrid.for_configs(arr, ofdm, angle_oversampling, delay_oversampling)
        return cls(grid, arr.num_antennas, ofdm.num_subcarriers)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_antennas * self.num_subcarriers, self.grid.size)

    # -- fast applications ------------------------------------------------

    def apply2d(self, coeffs: np.ndarray) -> np.ndarray:
        """Dictionary times coefficients: (..., Gt, Gd) -> (..., M, N)."""
        full = synthesis_full(coeffs, self.grid.num_angles)
        scale = 1.0 / np.sqrt(self.num_antennas * self.num_subcarriers)
        return scale * full[..., : self.num_antennas, : self.num_subcarriers]

    def adjoint2d(self, values: np.ndarray) -> np.ndarray:
        """Dictionary adjoint: (..., M, N) -> (..., Gt, Gd)."""
        values = np.asarray(values)
        padded_shape = values.shape[:-2] + (self.grid.num_angles, self.grid.num_delays)
        padded = np.zeros(padded_shape, dtype=complex)
        padded[..., : self.num_antennas, : self.num_subcarriers] = values
        scale = 1.0 / np.sqrt(self.num_antennas * self.num_subcarriers)
        return scale * synthesis_adjoint(padded, self.grid.num_delays)

    def apply(self, coeffs_flat: np.ndarray) -> np.ndarray:
        """Flat G-vector in, flat MN-vector out (antenna index fastest)."""
        out = self.apply2d(self.grid.to_matrix(coeffs_flat))
        return out.reshape(-1, order="F")

    def adjoint(self, values_flat: np.ndarray) -> np.ndarray:
        mat = np.asarray(values_flat).reshape(
            self.num_antennas, self.num_subcarriers, order="F"
        )
        return self.grid.to_flat(self.adjoint2d(mat))

    # -- analysis transform for mask-constrained reconstruction ----------

    def analysis(self, channel: np.ndarray) -> np.ndarray:
        """Isometric M x N -> Gt x Gd analysis map (zero-pad + adjoint DFT).

        Shares the dictionary's grid indexing, so masks produced from PSF
        weights apply directly to its output.  Satisfies
        ||analysis(H)|| = ||H||.
        """
        root_g = np.sqrt(self.grid.size)
        scale = np.sqrt(self.num_antennas * self.num_subcarriers) / root_g
        return scale * self.adjoint2d(channel)

    def synthesis_crop(self, coeffs2d: np.ndarray) -> np.ndarray:
        """Left inverse of ``analysis`` on its range; Gt x Gd -> M x N."""
        root_g = np.sqrt(self.grid.size)
        scale = np.sqrt(self.num_antennas * self.num_subcarriers) / root_g
        return scale * self.apply2d(coeffs2d)

    # -- test-scale realizations ------------------------------------------

    def column(self, flat_index: int) -> np.ndarray:
        """Unit-norm dictionary column as an MN-vector."""
        e = np.zeros(self.grid.size)
        e[flat_index] = 1.0
        return self.apply(e)

    def steering(self, flat_index: int) -> np.ndarray:
        """Unnormalized angle-delay response at a grid point, norm sqrt(MN)."""
        mn = self.num_antennas * self.num_subcarriers
        return np.sqrt(mn) * self.column(flat_index)

    def dense(self, arr: ArrayConfig, ofdm: OfdmConfig) -> np.ndarray:
        """Materialize the MN x G matrix from steering responses.

        Independent of the FFT path; intended as a test oracle and for
        small problem sizes.
        """
        ii, jj = self.unravel_all()
        thetas = self.grid.angle_points[ii]
        taus = self.grid.delay_points[jj]
        mn = self.num_antennas * self.num_subcarriers
        return steering_matrix(arr, ofdm, thetas, taus) / np.sqrt(mn)

    def unravel_all(self) -> tuple[np.ndarray, np.ndarray]:
        flat = np.arange(self.grid.size)
        return self.grid.unravel(flat)
