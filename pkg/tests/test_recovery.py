import numpy as np
import pytest

from pilotdecon import (
    Dictionary,
    MultipathComponent,
    SamplingPattern,
    SketchWindow,
    SolverConfig,
    full_sampling,
    lipschitz_estimate,
    prox_l21,
    realize_channel,
    sketch,
    solve_psf,
)
from conftest import make_pair


def prox_oracle(r_mat, alpha):
    """Solve min 0.5||X - R||_F^2 + alpha ||X||_{2,1} as a real SOCP."""
    import cvxpy as cp

    stacked = np.hstack([r_mat.real, r_mat.imag])
    x = cp.Variable(stacked.shape)
    obj = 0.5 * cp.sum_squares(x - stacked) + alpha * cp.sum(cp.norm(x, 2, axis=1))
    cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL)
    half = r_mat.shape[1]
    return x.value[:, :half] + 1j * x.value[:, half:]


def test_prox_identity_at_zero_alpha(rng):
    w = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    assert np.allclose(prox_l21(w, 0.0), w)


def test_prox_kills_small_rows():
    w = np.array([[0.1 + 0j, 0.2], [3.0, 4.0]])
    out = prox_l21(w, 1.0)
    assert np.allclose(out[0], 0.0)


def test_prox_hand_computed_row():
    # row (3, 4): norm 5, alpha 1 -> scale 4/5 -> (2.4, 3.2)
    out = prox_l21(np.array([[3.0 + 0j, 4.0]]), 1.0)
    assert np.allclose(out, [[2.4, 3.2]])


def test_prox_reduces_row_norms_exactly(rng):
    w = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    alpha = 0.7
    out = prox_l21(w, alpha)
    for i in range(6):
        n_in, n_out = np.linalg.norm(w[i]), np.linalg.norm(out[i])
        assert n_out == pytest.approx(max(n_in - alpha, 0.0), abs=1e-12)


def test_prox_matches_convex_oracle(rng):
    for _ in range(5):
        r = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        alpha = rng.uniform(0.2, 2.0)
        ref = prox_oracle(r, alpha)
        assert np.linalg.norm(prox_l21(r, alpha) - ref) < 1e-7


def _random_patterns(m_full, n_full, m, n, w, rng):
    return [
        SamplingPattern(
            np.sort(rng.choice(m_full, m, replace=False)),
            np.sort(rng.choice(n_full, n, replace=False)),
            slot=s,
        )
        for s in range(w)
    ]


def test_lipschitz_closed_form():
    arr, ofdm = make_pair(16, 16)  # G = 1024
    d = Dictionary.for_configs(arr, ofdm)
    rng = np.random.default_rng(0)
    pats = _random_patterns(16, 16, 4, 4, 3, rng)
    beta = lipschitz_estimate(d, pats, zeta=5.0, mode="approx")
    assert beta == pytest.approx(1024 / (16 * 5))  # 12.8


def test_lipschitz_power_vs_approx(rng):
    arr, ofdm = make_pair(8, 8)
    d = Dictionary.for_configs(arr, ofdm)
    pats = _random_patterns(8, 8, 4, 4, 4, rng)
    exact = lipschitz_estimate(d, pats, zeta=2.0, mode="power")
    approx = lipschitz_estimate(d, pats, zeta=2.0, mode="approx")
    assert 0.5 <= exact / approx <= 2.0


def test_lipschitz_scales_inversely_with_zeta(rng):
    arr, ofdm = make_pair(8, 8)
    d = Dictionary.for_configs(arr, ofdm)
    pats = _random_patterns(8, 8, 4, 4, 2, rng)
    b1 = lipschitz_estimate(d, pats, zeta=1.0, mode="power")
    b2 = lipschitz_estimate(d, pats, zeta=2.0, mode="power")
    assert b1 == pytest.approx(2 * b2, rel=1e-9)


def test_solve_psf_zero_sketches(dict8, rng):
    pats = _random_patterns(8, 8, 4, 4, 5, rng)
    window = SketchWindow(np.zeros((16, 5), complex), pats)
    sol = solve_psf(window, dict8, SolverConfig(max_iterations=20))
    assert np.allclose(sol.coefficients, 0.0)
    assert np.allclose(sol.weights, 0.0)


def test_solve_psf_single_on_grid_mpc(arr8, ofdm8, dict8, rng):
    # strong on-grid component, full sampling: support concentrates there
    grid = dict8.grid
    flat_true = grid.flat_index(11, 3)
    theta = grid.angle_points[11]
    tau = grid.delay_points[3]
    mpc = MultipathComponent(theta, tau, 100.0)
    w = 100
    pats, cols = [], []
    for s in range(w):
        pat = full_sampling(arr8, ofdm8, slot=s)
        h = realize_channel([mpc], arr8, ofdm8, rng)
        cols.append(sketch(h, pat, sigma=1.0, rng=rng))
        pats.append(pat)
    window = SketchWindow(np.column_stack(cols), pats)
    sol = solve_psf(window, dict8, SolverConfig(max_iterations=200))
    assert sol.weights[flat_true] >= 0.9 * sol.weights.sum()


def test_solve_psf_objective_envelope_monotone(dict8, rng):
    pats = _random_patterns(8, 8, 4, 4, 6, rng)
    x = rng.standard_normal((16, 6)) + 1j * rng.standard_normal((16, 6))
    sol = solve_psf(
        SketchWindow(x, pats), dict8, SolverConfig(max_iterations=80, objective_tolerance=0)
    )
    envelope = np.minimum.accumulate(sol.objective_trace)
    assert np.all(np.diff(envelope) <= 1e-12)


def test_solve_psf_homogeneity(dict8, rng):
    # doubling the sketches and the regularization weight doubles the iterates
    pats = _random_patterns(8, 8, 4, 4, 5, rng)
    x = rng.standard_normal((16, 5)) + 1j * rng.standard_normal((16, 5))
    cfg1 = SolverConfig(max_iterations=60, objective_tolerance=0, regularization_weight=np.sqrt(5))
    cfg2 = SolverConfig(
        max_iterations=60, objective_tolerance=0, regularization_weight=2 * np.sqrt(5)
    )
    s1 = solve_psf(SketchWindow(x, pats), dict8, cfg1)
    s2 = solve_psf(SketchWindow(2 * x, pats), dict8, cfg2)
    assert np.allclose(2 * s1.coefficients, s2.coefficients, atol=1e-10)


def test_solve_psf_convergence_bound(dict8, rng):
    # O(1/k^2) guarantee with the exact Lipschitz constant
    pats = _random_patterns(8, 8, 4, 4, 10, rng)
    x = rng.standard_normal((16, 10)) + 1j * rng.standard_normal((16, 10))
    window = SketchWindow(x, pats)
    short = solve_psf(window, dict8, SolverConfig(max_iterations=100, objective_tolerance=0))
    ref = solve_psf(window, dict8, SolverConfig(max_iterations=1000, objective_tolerance=0))
    f_ref = ref.objective_trace[-1]
    gap0 = np.linalg.norm(ref.coefficients) ** 2  # W0 = 0
    ks = np.arange(1, len(short.objective_trace))
    bound = f_ref + 4 * short.beta * gap0 / ks**2
    assert np.all(short.objective_trace[1:] <= bound + 1e-9)


def test_solve_psf_weights_are_row_norms(dict8, rng):
    pats = _random_patterns(8, 8, 4, 4, 4, rng)
    x = rng.standard_normal((16, 4)) + 1j * rng.standard_normal((16, 4))
    sol = solve_psf(SketchWindow(x, pats), dict8, SolverConfig(max_iterations=40))
    expect = np.linalg.norm(sol.coefficients, axis=1) / 16
    assert np.allclose(sol.weights, expect)
