import numpy as np
import pytest

from pilotdecon import (
    AngleDelayGrid,
    AtomicCovariance,
    MultipathComponent,
    SamplingPattern,
    covariance_from_psf,
    spatial_covariance_from_psf,
    steering_matrix,
    subspace_capture,
)
from conftest import make_pair


def test_single_atom_rank_one(arr8, ofdm8):
    cov = AtomicCovariance(arr8, ofdm8, [0.2], [1e-5], [3.0])
    dense = cov.dense()
    atom = steering_matrix(arr8, ofdm8, [0.2], [1e-5])[:, 0] / 8.0
    assert np.allclose(dense, 3.0 * np.outer(atom, atom.conj()))
    assert np.linalg.matrix_rank(dense) == 1


def test_trace_equals_weight_sum(arr8, ofdm8, rng):
    thetas = rng.uniform(-1.0, 1.0, 7)
    taus = rng.uniform(0, ofdm8.delay_period * 0.9, 7)
    weights = rng.uniform(0.1, 2.0, 7)
    cov = AtomicCovariance(arr8, ofdm8, thetas, taus, weights)
    assert np.trace(cov.dense()).real == pytest.approx(weights.sum(), abs=1e-10)
    assert cov.trace == pytest.approx(weights.sum())


def test_dense_matches_atom_sum_oracle(rng):
    arr, ofdm = make_pair(4, 4)
    thetas = rng.uniform(-1.0, 1.0, 5)
    taus = rng.uniform(0, ofdm.delay_period * 0.9, 5)
    weights = rng.uniform(0.0, 1.0, 5)
    cov = AtomicCovariance(arr, ofdm, thetas, taus, weights)
    oracle = np.zeros((16, 16), complex)
    for t, d, w in zip(thetas, taus, weights):
        a = steering_matrix(arr, ofdm, [t], [d])[:, 0] / 4.0
        oracle += w * np.outer(a, a.conj())
    assert np.linalg.norm(cov.dense() - oracle) < 1e-10


def test_dense_is_psd(arr8, ofdm8, rng):
    cov = AtomicCovariance(
        arr8, ofdm8, rng.uniform(-1, 1, 6), rng.uniform(0, 1e-5, 6), rng.uniform(0, 1, 6)
    )
    evals = np.linalg.eigvalsh(cov.dense())
    assert evals.min() > -1e-12


def test_sampled_block_matches_dense(arr8, ofdm8, rng):
    cov = AtomicCovariance(
        arr8, ofdm8, rng.uniform(-1, 1, 4), rng.uniform(0, 1e-5, 4), rng.uniform(0.1, 1, 4)
    )
    pat = SamplingPattern([1, 4, 6], [0, 3])
    flat = pat.flat_indices(8)
    dense = cov.dense()
    assert np.allclose(cov.sampled_block(pat), dense[np.ix_(flat, flat)], atol=1e-12)


def test_covariance_from_psf_masking(arr8, ofdm8, dict8, rng):
    grid = dict8.grid
    weights = np.zeros(grid.size)
    weights[[3, 50, 100]] = (1.0, 2.0, 3.0)
    mask = np.zeros(grid.size, bool)
    mask[[3, 100]] = True
    cov = covariance_from_psf(weights, grid, arr8, ofdm8, mask=mask)
    assert cov.num_atoms == 2
    assert cov.trace == pytest.approx(4.0)


def test_spatial_single_broadside_atom_is_constant(arr8, ofdm8, dict8):
    grid = dict8.grid
    # atom at sin(theta) = 0: angle index Gt/2
    flat = grid.flat_index(grid.num_angles // 2, 5)
    weights = np.zeros(grid.size)
    weights[flat] = 2.0
    spatial = spatial_covariance_from_psf(weights, grid, arr8)
    assert np.allclose(spatial, 2.0 * np.ones((8, 8)) / 8.0)


def test_spatial_symmetric_psf_real(arr8, dict8):
    grid = dict8.grid
    weights = np.zeros(grid.size)
    # mirror pair: sin(theta_i) = -sin(theta_{Gt-i}) for i != 0
    weights[grid.flat_index(3, 2)] = 1.0
    weights[grid.flat_index(grid.num_angles - 3, 2)] = 1.0
    spatial = spatial_covariance_from_psf(weights, grid, arr8)
    assert np.max(np.abs(spatial.imag)) < 1e-12


def test_spatial_is_toeplitz(arr8, dict8, rng):
    grid = dict8.grid
    weights = rng.uniform(0, 1, grid.size)
    spatial = spatial_covariance_from_psf(weights, grid, arr8)
    for d in range(8):
        diag = np.diagonal(spatial, offset=d)
        assert np.max(np.abs(diag - diag[0])) < 1e-10


def test_spatial_equals_scaled_diagonal_block(arr8, ofdm8, dict8, rng):
    grid = dict8.grid
    weights = np.where(rng.uniform(size=grid.size) < 0.05, rng.uniform(0, 1, grid.size), 0.0)
    spatial = spatial_covariance_from_psf(weights, grid, arr8)
    dense = covariance_from_psf(weights, grid, arr8, ofdm8).dense()
    block = dense[:8, :8]  # subcarrier-0 diagonal block
    assert np.linalg.norm(spatial / 8 - block) < 1e-10  # N = 8


def test_from_mpcs_matches_true_covariance(rng):
    arr, ofdm = make_pair(2, 4)
    mpcs = [MultipathComponent(0.3, 5e-6, 1.2), MultipathComponent(-0.2, 2e-5, 0.4)]
    cov = AtomicCovariance.from_mpcs(arr, ofdm, mpcs)
    atoms = steering_matrix(arr, ofdm, [c.aoa for c in mpcs], [c.delay for c in mpcs])
    analytic = sum(
        c.power * np.outer(atoms[:, l], atoms[:, l].conj()) for l, c in enumerate(mpcs)
    )
    assert np.linalg.norm(cov.dense() - analytic) < 1e-10


def test_subspace_capture_bounds(arr8, ofdm8):
    cov = AtomicCovariance(arr8, ofdm8, [0.1, -0.4], [1e-5, 3e-5], [1.0, 2.0])
    atoms = cov.atom_matrix()
    assert subspace_capture(cov, atoms) == pytest.approx(1.0, abs=1e-10)
    assert subspace_capture(cov, np.zeros((64, 0))) == 0.0
    other = AtomicCovariance(arr8, ofdm8, [0.8], [5.5e-5], [1.0]).atom_matrix()
    assert subspace_capture(cov, other) < 0.5
