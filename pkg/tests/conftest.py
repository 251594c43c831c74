import numpy as np
import pytest

from pilotdecon import ArrayConfig, Dictionary, OfdmConfig

SPACING = 15e3


def make_ofdm(n, max_delay=None, blocks=1):
    """OFDM config with the delay period equal to the full DFT range."""
    return OfdmConfig(
        num_subcarriers=n,
        bandwidth=n * SPACING,
        subcarrier_spacing=SPACING,
        max_delay=max_delay if max_delay is not None else n / (n * SPACING),
        coherence_block_subcarriers=blocks,
    )


def make_pair(m, n, **kw):
    return ArrayConfig(m, np.deg2rad(60.0)), make_ofdm(n, **kw)


@pytest.fixture
def arr8():
    return ArrayConfig(8, np.deg2rad(60.0))


@pytest.fixture
def ofdm8():
    return make_ofdm(8)


@pytest.fixture
def dict8(arr8, ofdm8):
    return Dictionary.for_configs(arr8, ofdm8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
