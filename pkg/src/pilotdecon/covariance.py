"""Covariance models assembled from weighted angle-delay atoms.

The estimated covariance of a channel superposition is
C = sum_l s_l * abar_l abar_l^H with abar the unit-norm angle-delay
response; the same atomic form covers true covariances of synthetic
multipath ensembles (weights MN * sigma_l^2 on off-grid atoms), so the
MMSE filters accept either.  Dense materialization is meant for test
scale; filters consume only sampled sub-blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import MultipathComponent, SamplingPattern
from .grid import AngleDelayGrid
from .steering import ArrayConfig, OfdmConfig, steering_matrix


@dataclass(frozen=True)
class AtomicCovariance:
    """Hermitian PSD matrix sum_l weight_l * abar_l abar_l^H.

    abar(theta, tau) = vec(a(theta) b(tau)^H) / sqrt(M*N) has unit norm,
    so the trace equals the weight sum.
    """

    arr: ArrayConfig
    ofdm: OfdmConfig
    thetas: np.ndarray
    taus: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "thetas", np.atleast_1d(np.asarray(self.thetas, float)))
        object.__setattr__(self, "taus", np.atleast_1d(np.asarray(self.taus, float)))
        object.__setattr__(self, "weights", np.atleast_1d(np.asarray(self.weights, float)))
        if not (len(self.thetas) == len(self.taus) == len(self.weights)):
            raise ValueError("thetas, taus, weights must have equal length")
        if np.any(self.weights < 0):
            raise ValueError("covariance weights must be nonnegative")

    @property
    def num_atoms(self) -> int:
        return len(self.weights)

    @property
    def trace(self) -> float:
        return float(self.weights.sum())

    def atom_matrix(self) -> np.ndarray:
        """Unit-norm atoms as an (MN, L) matrix."""
        mn = self.arr.num_antennas * self.ofdm.num_subcarriers
        return steering_matrix(self.arr, self.ofdm, self.thetas, self.taus) / np.sqrt(mn)

    def sampled_atom_matrix(self, pattern: SamplingPattern) -> np.ndarray:
        """Rows of the atom matrix at the pattern's flat indices, (mn_s, L)."""
        ia = pattern.antenna_indices
        jf = pattern.subcarrier_indices
        k = ia[:, None]
        w = jf[:, None]
        a = np.exp(1j * np.pi * k * np.sin(self.thetas)[None, :] / self.arr.max_sin)
        bconj = np.exp(
            -2j
            * np.pi
            * self.ofdm.bandwidth
            * w
            * self.taus[None, :]
            / self.ofdm.num_subcarriers
        )
        atoms = a[:, None, :] * bconj[None, :, :]  # (m, n, L)
        mn_full = self.arr.num_antennas * self.ofdm.num_subcarriers
        return atoms.reshape(pattern.size, -1, order="F") / np.sqrt(mn_full)

    def dense(self) -> np.ndarray:
        """Materialize the MN x MN matrix (test scale)."""
        atoms = self.atom_matrix()
        return (atoms * self.weights[None, :]) @ atoms.conj().T

    def sampled_block(self, pattern: SamplingPattern) -> np.ndarray:
        """S C S^H as an mn_s x mn_s matrix."""
        atoms = self.sampled_atom_matrix(pattern)
        return (atoms * self.weights[None, :]) @ atoms.conj().T

    def spatial(self) -> np.ndarray:
        """M x M Toeplitz spatial covariance sum_l w_l a_l a_l^H / M.

        Uses unit-norm spatial atoms a/sqrt(M), so the trace again equals
        the weight sum; equals N times the per-subcarrier diagonal block
        of ``dense()``.
        """
        k = np.arange(self.arr.num_antennas)[:, None]
        a = np.exp(1j * np.pi * k * np.sin(self.thetas)[None, :] / self.arr.max_sin)
        a = a / np.sqrt(self.arr.num_antennas)
        return (a * self.weights[None, :]) @ a.conj().T

    @classmethod
    def zero(cls, arr: ArrayConfig, ofdm: OfdmConfig) -> "AtomicCovariance":
        return cls(arr, ofdm, np.zeros(0), np.zeros(0), np.zeros(0))

    @classmethod
    def from_mpcs(
        cls, arr: ArrayConfig, ofdm: OfdmConfig, mpcs: Sequence[MultipathComponent]
    ) -> "AtomicCovariance":
        """True covariance of a multipath ensemble: weights MN * power_l."""
        mn = arr.num_antennas * ofdm.num_subcarriers
        thetas = np.array([c.aoa for c in mpcs])
        taus = np.array([c.delay for c in mpcs])
        weights = mn * np.array([c.power for c in mpcs])
        return cls(arr, ofdm, thetas, taus, weights)


def covariance_from_psf(
    weights: np.ndarray,
    grid: AngleDelayGrid,
    arr: ArrayConfig,
    ofdm: OfdmConfig,
    mask: np.ndarray | None = None,
) -> AtomicCovariance:
    """Plug-in covariance from PSF weights on a grid.

    ``weights`` is the flat G-vector of PSF weights; an optional boolean
    mask (flat or grid-shaped) restricts the atoms, e.g. to the signal or
    interference cluster.  Zero-weight atoms are dropped.
    """
    weights = np.asarray(weights, float)
    if weights.shape != (grid.size,):
        raise ValueError(f"weights must be a flat vector of length {grid.size}")
    keep = weights > 0
    if mask is not None:
        mask = np.asarray(mask, bool)
        if mask.shape == (grid.num_angles, grid.num_delays):
            mask = grid.to_flat(mask)
        keep = keep & mask
    flat = np.flatnonzero(keep)
    i, j = grid.unravel(flat)
    return AtomicCovariance(
        arr, ofdm, grid.angle_points[i], grid.delay_points[j], weights[flat]
    )


def spatial_covariance_from_psf(
    weights: np.ndarray,
    grid: AngleDelayGrid,
    arr: ArrayConfig,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """M x M spatial covariance from the PSF's angle marginal.

    Returns sum_theta gamma(theta) a(theta) a(theta)^H / M where
    gamma(theta) sums the (optionally masked) PSF over delays.  Equals N
    times the per-subcarrier diagonal block of the full covariance.
    """
    weights = np.asarray(weights, float)
    if weights.shape != (grid.size,):
        raise ValueError(f"weights must be a flat vector of length {grid.size}")
    if mask is not None:
        mask = np.asarray(mask, bool)
        if mask.shape == (grid.num_angles, grid.num_delays):
            mask = grid.to_flat(mask)
        weights = np.where(mask, weights, 0.0)
    marginal = grid.to_matrix(weights).sum(axis=1)  # per-angle mass
    k = np.arange(arr.num_antennas)[:, None]
    a = np.exp(1j * np.pi * k * grid.angle_sines[None, :] / grid.max_sin)
    a = a / np.sqrt(arr.num_antennas)
    return (a * marginal[None, :]) @ a.conj().T


def subspace_capture(
    covariance: AtomicCovariance | np.ndarray,
    atom_matrix: np.ndarray,
    tol: float = 1e-10,
) -> float:
    """Fraction of channel energy within the span of the given atoms.

    Computes tr(P C) / tr(C) with P the orthogonal projector onto the
    column span of ``atom_matrix``; 0 for an empty span.
    """
    dense = covariance.dense() if isinstance(covariance, AtomicCovariance) else covariance
    total = float(np.real(np.trace(dense)))
    if atom_matrix.size == 0 or total <= 0:
        return 0.0
    q, r = np.linalg.qr(atom_matrix)
    keep = np.abs(np.diag(r)) > tol * max(1.0, np.abs(np.diag(r)).max())
    q = q[:, keep]
    captured = float(np.real(np.trace(q.conj().T @ dense @ q)))
    return captured / total
