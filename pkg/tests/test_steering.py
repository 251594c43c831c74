import numpy as np
import pytest

from pilotdecon import (
    ArrayConfig,
    DomainError,
    OfdmConfig,
    array_response,
    delay_response,
    steering_matrix,
    steering_vector,
)
from conftest import make_ofdm


def test_array_config_validation():
    with pytest.raises(ValueError):
        ArrayConfig(0, np.deg2rad(60))
    with pytest.raises(ValueError):
        ArrayConfig(4, 0.0)
    with pytest.raises(ValueError):
        ArrayConfig(4, np.pi)
    cfg = ArrayConfig(4, np.pi / 2)
    assert cfg.spacing_ratio == pytest.approx(0.5)  # half-wavelength at 90 deg


def test_ofdm_config_validation():
    with pytest.raises(ValueError):
        OfdmConfig(8, 8 * 15e3, 16e3, 1e-6)  # N != W / spacing
    with pytest.raises(ValueError):
        OfdmConfig(8, 8 * 15e3, 15e3, 1.0)  # delay beyond representable range
    cfg = make_ofdm(8)
    assert cfg.useful_symbol_time == pytest.approx(1 / 15e3)
    assert cfg.delay_period == pytest.approx(8 / (8 * 15e3))


def test_array_response_broadside_is_ones():
    cfg = ArrayConfig(6, np.deg2rad(60))
    assert np.allclose(array_response(cfg, 0.0), np.ones(6))


def test_array_response_at_max_aoa_alternates():
    cfg = ArrayConfig(5, np.deg2rad(60))
    expected = (-1.0) ** np.arange(5)
    assert np.allclose(array_response(cfg, cfg.max_aoa), expected, atol=1e-12)


def test_array_response_direct_exponent():
    # M = 4, max 60 deg, theta = 30 deg: exponent k*pi*sin(30)/sin(60)
    cfg = ArrayConfig(4, np.deg2rad(60))
    ratio = np.sin(np.deg2rad(30)) / np.sin(np.deg2rad(60))
    expected = np.exp(1j * np.pi * np.arange(4) * ratio)
    got = array_response(cfg, np.deg2rad(30))
    assert np.allclose(got, expected)
    assert ratio == pytest.approx(0.57735, abs=1e-5)


def test_array_response_unit_modulus_and_domain():
    cfg = ArrayConfig(16, np.deg2rad(45))
    resp = array_response(cfg, -0.3)
    assert np.allclose(np.abs(resp), 1.0)
    with pytest.raises(DomainError):
        array_response(cfg, np.deg2rad(46))
    with pytest.raises(DomainError):
        array_response(cfg, -np.deg2rad(50))


def test_delay_response_zero_and_wraparound():
    cfg = make_ofdm(8)
    assert np.allclose(delay_response(cfg, 0.0), np.ones(8))
    # a full period of the discrete grid wraps back to all ones
    assert np.allclose(delay_response(cfg, cfg.num_subcarriers / cfg.bandwidth), np.ones(8))


def test_delay_response_quarter_period():
    # N = 4, W*tau = 1: entries exp(j pi/2 w) = (1, j, -1, -j)
    cfg = make_ofdm(4)
    got = delay_response(cfg, 1.0 / cfg.bandwidth)
    assert np.allclose(got, [1, 1j, -1, -1j])


def test_delay_response_domain():
    cfg = make_ofdm(8)
    with pytest.raises(DomainError):
        delay_response(cfg, -1e-9)
    with pytest.raises(DomainError):
        delay_response(cfg, 1.01 * cfg.delay_period)


def test_steering_broadside_zero_delay_all_ones():
    cfg = ArrayConfig(3, np.deg2rad(60))
    ofdm = make_ofdm(4)
    assert np.allclose(steering_vector(cfg, ofdm, 0.0, 0.0), np.ones(12))


def test_steering_norm():
    cfg = ArrayConfig(5, np.deg2rad(60))
    ofdm = make_ofdm(8)
    v = steering_vector(cfg, ofdm, 0.21, 1e-6)
    assert np.linalg.norm(v) == pytest.approx(np.sqrt(40))


def test_steering_outer_product_by_hand():
    # M = N = 2, (theta_max, tau=0): a = (1, -1), b = (1, 1)
    cfg = ArrayConfig(2, np.deg2rad(60))
    ofdm = make_ofdm(2)
    v = steering_vector(cfg, ofdm, cfg.max_aoa, 0.0)
    expected = np.outer([1, -1], [1, 1]).reshape(-1, order="F")
    assert np.allclose(v, expected)


def test_steering_matrix_matches_vectors(rng):
    cfg = ArrayConfig(4, np.deg2rad(60))
    ofdm = make_ofdm(8)
    thetas = rng.uniform(-cfg.max_aoa, cfg.max_aoa, 5)
    taus = rng.uniform(0, ofdm.delay_period * 0.99, 5)
    mat = steering_matrix(cfg, ofdm, thetas, taus)
    for l in range(5):
        assert np.allclose(mat[:, l], steering_vector(cfg, ofdm, thetas[l], taus[l]))
