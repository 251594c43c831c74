"""Angle-delay power spread function estimation by l2,1-regularized
least squares over multiple sketches.

The program solved is

    min_W  (1/(2 zeta)) sum_c ||A_c W[:, c] - X[:, c]||^2 + ||W||_{2,1}

with A_c = sqrt(MN/mn) * S_c * D the scaled, per-slot-subsampled
dictionary, zeta the regularization weight (sqrt(w) by default, which
makes the unscaled objective 1/2 sum ||.||^2 + sqrt(w) ||W||_{2,1}), and
rows of W indexed by grid points.  The solver is forward-backward
splitting with Nesterov momentum; all operator applications go through
the FFT dictionary, so one iteration costs O(w G log G).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import SamplingPattern, SketchWindow
from .grid import Dictionary, synthesis_adjoint, synthesis_full


class NumericalError(RuntimeError):
    """Solver state became non-finite."""


def prox_l21(w_mat: np.ndarray, alpha: float) -> np.ndarray:
    """Row-wise group shrinkage: row -> ((||row|| - alpha)_+ / ||row||) row.

    Zero rows (0/0) map to zero.  This is the proximal operator of
    alpha * ||.||_{2,1}.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    w_mat = np.asarray(w_mat)
    norms = np.linalg.norm(w_mat, axis=-1, keepdims=True)
    scale = np.zeros_like(norms)
    np.divide(np.maximum(norms - alpha, 0.0), norms, out=scale, where=norms > 0)
    return w_mat * scale


def _group_shrink_axis0(cube: np.ndarray, alpha: float) -> np.ndarray:
    norms = np.sqrt(np.sum(np.abs(cube) ** 2, axis=0))
    scale = np.zeros_like(norms)
    np.divide(np.maximum(norms - alpha, 0.0), norms, out=scale, where=norms > 0)
    return cube * scale[None, :, :]


class _SlotOperators:
    """Batched per-slot forward/adjoint maps A_c on (w, Gt, Gd) cubes."""

    def __init__(self, dictionary: Dictionary, patterns: list[SamplingPattern]):
        self.dictionary = dictionary
        gt, gd = dictionary.grid.num_angles, dictionary.grid.num_delays
        g = gt * gd
        self.cube_shape = (len(patterns), gt, gd)
        gathers = []
        scales = []
        for c, pat in enumerate(patterns):
            ia = pat.antenna_indices
            jf = pat.subcarrier_indices
            if ia.max(initial=0) >= dictionary.num_antennas:
                raise ValueError("antenna index beyond array size")
            if jf.max(initial=0) >= dictionary.num_subcarriers:
                raise ValueError("subcarrier index beyond OFDM size")
            idx = c * g + ia[:, None] * gd + jf[None, :]
            gathers.append(idx.reshape(-1, order="F"))
            scales.append(1.0 / np.sqrt(pat.size))
        self.gather = np.concatenate(gathers)
        self.sizes = np.array([p.size for p in patterns])
        self.bounds = np.concatenate([[0], np.cumsum(self.sizes)])
        self.scales = np.repeat(np.array(scales), self.sizes)

    def forward(self, cube: np.ndarray) -> np.ndarray:
        """A_c applied per slot; returns concatenated sampled values."""
        t = synthesis_full(cube, self.dictionary.grid.num_angles)
        return t.reshape(-1)[self.gather] * self.scales

    def adjoint(self, values: np.ndarray) -> np.ndarray:
        """A_c^H applied per slot to concatenated sampled values."""
        embedded = np.zeros(self.cube_shape, dtype=complex).reshape(-1)
        embedded[self.gather] = values * self.scales
        embedded = embedded.reshape(self.cube_shape)
        return synthesis_adjoint(embedded, self.dictionary.grid.num_delays)

    def split(self, values: np.ndarray) -> list[np.ndarray]:
        return [values[self.bounds[c] : self.bounds[c + 1]] for c in range(len(self.sizes))]


def lipschitz_estimate(
    dictionary: Dictionary,
    patterns: list[SamplingPattern],
    zeta: float,
    mode: str = "power",
    power_iterations: int = 20,
    rng: np.random.Generator | None = None,
) -> float:
    """Lipschitz constant of the data-fit gradient.

    ``power`` runs power iteration on each slot operator A_c^H A_c and
    returns max_c lambda_max / zeta; ``approx`` returns the closed form
    G / (zeta * mn), exact when the full grid is used (the oversampled
    grid is a tight frame).
    """
    if not patterns:
        raise ValueError("need at least one sampling pattern")
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    if mode == "approx":
        mn = min(p.size for p in patterns)
        return dictionary.grid.size / (zeta * mn)
    if mode != "power":
        raise ValueError(f"unknown lipschitz mode {mode!r}")
    rng = rng or np.random.default_rng(0)
    ops = _SlotOperators(dictionary, patterns)
    cube = rng.standard_normal(ops.cube_shape) + 1j * rng.standard_normal(ops.cube_shape)
    lam = np.ones(len(patterns))
    for _ in range(power_iterations):
        nxt = ops.adjoint(ops.forward(cube))
        norms_prev = np.sqrt(np.sum(np.abs(cube) ** 2, axis=(1, 2)))
        norms_next = np.sqrt(np.sum(np.abs(nxt) ** 2, axis=(1, 2)))
        lam = norms_next / np.maximum(norms_prev, 1e-300)
        cube = nxt / np.maximum(norms_next, 1e-300)[:, None, None]
    return float(lam.max() / zeta)


@dataclass
class SolverConfig:
    max_iterations: int = 500
    objective_tolerance: float = 1e-6  # relative change; 0 disables early stop
    tolerance_window: int = 5  # consecutive small changes required
    lipschitz_override: float | None = None
    regularization_weight: float | None = None  # zeta, defaults to sqrt(w)
    lipschitz_mode: str = "power"

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.objective_tolerance < 0:
            raise ValueError("objective_tolerance must be nonnegative")


@dataclass
class PsfSolution:
    """Solver output: coefficients, PSF weights, and diagnostics.

    ``objective_trace[k]`` is the scaled objective f(W^(k)) (data fit
    weighted by 1/zeta plus the plain l2,1 norm) -- the quantity the
    O(1/k^2) convergence guarantee bounds.
    """

    coefficients: np.ndarray  # (G, w)
    weights: np.ndarray  # (G,) PSF weights, ||row|| / mn
    objective_trace: np.ndarray
    beta: float
    zeta: float
    iterations: int
    converged: bool
    grid_shape: tuple[int, int] = (0, 0)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)


def solve_psf(
    window: SketchWindow,
    dictionary: Dictionary,
    cfg: SolverConfig | None = None,
) -> PsfSolution:
    """Estimate the angle-delay PSF from a window of normalized sketches.

    Implements forward-backward splitting with Nesterov momentum: a
    gradient step on the momentum point, the row-shrinkage prox with step
    1/beta, then the momentum update t_{k+1} = (1 + sqrt(4 t_k^2 + 1))/2.
    Stops when the relative objective change stays below the tolerance
    for ``tolerance_window`` consecutive iterations, or at the cap.
    """
    cfg = cfg or SolverConfig()
    patterns = window.patterns
    w = window.window
    if any(p.size != window.sketches.shape[0] for p in patterns):
        raise ValueError("all sampling patterns must match the sketch row count")
    zeta = cfg.regularization_weight if cfg.regularization_weight is not None else np.sqrt(w)
    if zeta <= 0:
        raise ValueError("regularization weight must be positive")
    mn = window.sketches.shape[0]

    ops = _SlotOperators(dictionary, patterns)
    x = window.sketches.T.reshape(-1).copy()  # slot-major concatenation
    # reorder each slot column from (m*n,) F-layout to the gather layout
    # (they already agree: gather emits F-order within a slot)
    if cfg.lipschitz_override is not None:
        beta = float(cfg.lipschitz_override)
    else:
        beta = lipschitz_estimate(dictionary, patterns, zeta, mode=cfg.lipschitz_mode)
    if beta <= 0:
        raise ValueError("Lipschitz constant must be positive")
    alpha = 1.0 / beta

    def objective(cube: np.ndarray, fwd: np.ndarray | None = None) -> float:
        fwd = ops.forward(cube) if fwd is None else fwd
        fit = 0.5 / zeta * float(np.sum(np.abs(fwd - x) ** 2))
        rows = float(np.sum(np.sqrt(np.sum(np.abs(cube) ** 2, axis=0))))
        return fit + rows

    w_cube = np.zeros(ops.cube_shape, dtype=complex)
    z_cube = w_cube.copy()
    t_k = 1.0
    trace = [objective(w_cube)]
    converged = False
    small_changes = 0
    iterations = 0

    for k in range(cfg.max_iterations):
        grad = ops.adjoint(ops.forward(z_cube) - x) / zeta
        r_cube = z_cube - grad / beta
        w_next = _group_shrink_axis0(r_cube, alpha)
        t_next = 0.5 * (1.0 + np.sqrt(4.0 * t_k * t_k + 1.0))
        mu = 1.0 + (t_k - 1.0) / t_next
        z_cube = w_cube + mu * (w_next - w_cube)
        w_cube = w_next
        t_k = t_next
        iterations = k + 1

        f_k = objective(w_cube)
        if not np.isfinite(f_k):
            raise NumericalError(f"objective became non-finite at iteration {iterations}")
        prev = trace[-1]
        trace.append(f_k)
        rel = abs(f_k - prev) / max(abs(f_k), 1e-300)
        if cfg.objective_tolerance > 0 and rel < cfg.objective_tolerance:
            small_changes += 1
            if small_changes >= cfg.tolerance_window:
                converged = True
                break
        else:
            small_changes = 0

    gt, gd = ops.cube_shape[1], ops.cube_shape[2]
    coeffs = w_cube.transpose(0, 2, 1).reshape(w, gt * gd).T
    weights = np.sqrt(np.sum(np.abs(coeffs) ** 2, axis=1)) / mn
    return PsfSolution(
        coefficients=coeffs,
        weights=weights,
        objective_trace=np.array(trace),
        beta=beta,
        zeta=float(zeta),
        iterations=iterations,
        converged=converged,
        grid_shape=(gt, gd),
    )
