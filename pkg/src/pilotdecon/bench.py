"""Micro-benchmarks for the transform-heavy kernels.

Per-iteration wall times for the sparse-recovery gradient step and one
ADMM iteration should scale near-linearly (log-log slope ~1) with the
grid size G, reflecting their O(G log G) FFT cost.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .channel import SamplingPattern, SketchWindow
from .clustering import MaskPair
from .decontam import AdmmConfig, admm_interpolate
from .grid import AngleDelayGrid, Dictionary
from .recovery import SolverConfig, _SlotOperators, solve_psf
from .steering import ArrayConfig, OfdmConfig


def _square_grid(g: int) -> tuple[int, int]:
    k = int(round(np.log2(g)))
    if 2**k != g:
        raise ValueError("grid size must be a power of two")
    gt = 2 ** ((k + 1) // 2)
    return gt, g // gt


def _instance(g: int, window: int, rng: np.random.Generator):
    gt, gd = _square_grid(g)
    m, n = gt // 2, gd // 2
    arr = ArrayConfig(num_antennas=m, max_aoa=np.deg2rad(60.0))
    ofdm = OfdmConfig(
        num_subcarriers=n,
        bandwidth=n * 15e3,
        subcarrier_spacing=15e3,
        max_delay=n / (n * 15e3),
    )
    dictionary = Dictionary.for_configs(arr, ofdm)
    m_s = max(1, m // 4)
    n_s = max(1, n // 4)
    patterns = [
        SamplingPattern(
            np.sort(rng.choice(m, m_s, replace=False)),
            np.sort(rng.choice(n, n_s, replace=False)),
            slot=s,
        )
        for s in range(window)
    ]
    sketches = rng.standard_normal((m_s * n_s, window)) + 1j * rng.standard_normal(
        (m_s * n_s, window)
    )
    return dictionary, patterns, sketches


def bench_solver_step(g: int, window: int = 16, repeats: int = 3, seed: int = 0) -> float:
    """Seconds per gradient step (forward + adjoint over the window)."""
    rng = np.random.default_rng(seed)
    dictionary, patterns, _ = _instance(g, window, rng)
    ops = _SlotOperators(dictionary, patterns)
    cube = rng.standard_normal(ops.cube_shape) + 1j * rng.standard_normal(ops.cube_shape)
    x = ops.forward(cube)
    ops.adjoint(x - x.mean())  # warm up FFT plans
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        ops.adjoint(ops.forward(cube) - x)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_admm_step(g: int, repeats: int = 3, seed: int = 0) -> float:
    """Seconds per ADMM iteration on a G-point grid."""
    rng = np.random.default_rng(seed)
    dictionary, patterns, _ = _instance(g, 1, rng)
    gt, gd = dictionary.grid.num_angles, dictionary.grid.num_delays
    mask_h = np.zeros((gt, gd), bool)
    mask_i = np.zeros((gt, gd), bool)
    mask_h[: gt // 4, : gd // 4] = True
    mask_i[gt // 2 :, gd // 2 :] = True
    pattern = patterns[0]
    x = rng.standard_normal((pattern.num_antennas, pattern.num_subcarriers)) + 0j
    times = []
    for it in (2, 2 + repeats):
        cfg = AdmmConfig(max_iterations=it, tolerance=0.0)
        t0 = time.perf_counter()
        admm_interpolate(x, pattern, MaskPair(mask_h, mask_i), dictionary, cfg)
        times.append(time.perf_counter() - t0)
    return max(times[1] - times[0], 1e-12) / repeats


def bench_dictionary(m: int = 8, n: int = 8, seed: int = 0) -> tuple[float, float]:
    """(max relative error dense vs transform, seconds per transform apply)."""
    rng = np.random.default_rng(seed)
    arr = ArrayConfig(num_antennas=m, max_aoa=np.deg2rad(60.0))
    ofdm = OfdmConfig(
        num_subcarriers=n, bandwidth=n * 15e3, subcarrier_spacing=15e3, max_delay=n / (n * 15e3)
    )
    dictionary = Dictionary.for_configs(arr, ofdm)
    dense = dictionary.dense(arr, ofdm)
    x = rng.standard_normal(dictionary.grid.size) + 1j * rng.standard_normal(dictionary.grid.size)
    y = rng.standard_normal(m * n) + 1j * rng.standard_normal(m * n)
    err_f = np.linalg.norm(dictionary.apply(x) - dense @ x) / np.linalg.norm(dense @ x)
    err_a = np.linalg.norm(dictionary.adjoint(y) - dense.conj().T @ y) / np.linalg.norm(
        dense.conj().T @ y
    )
    t0 = time.perf_counter()
    for _ in range(10):
        dictionary.apply(x)
    per_apply = (time.perf_counter() - t0) / 10
    return float(max(err_f, err_a)), per_apply


def fitted_slope(sizes: np.ndarray, seconds: np.ndarray) -> float:
    """Least-squares slope of log(seconds) against log(size)."""
    logs = np.log(np.asarray(sizes, float))
    logt = np.log(np.asarray(seconds, float))
    slope, _ = np.polyfit(logs, logt, 1)
    return float(slope)


@dataclass
class BenchReport:
    sizes: np.ndarray
    seconds: np.ndarray

    @property
    def slope(self) -> float:
        return fitted_slope(self.sizes, self.seconds)


def sweep(component: str, sizes: list[int]) -> BenchReport:
    if component == "solver":
        times = [bench_solver_step(g) for g in sizes]
    elif component == "admm":
        times = [bench_admm_step(g) for g in sizes]
    else:
        raise ValueError(f"unknown component {component!r}")
    return BenchReport(np.array(sizes), np.array(times))
