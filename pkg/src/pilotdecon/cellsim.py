"""Multi-cell Monte Carlo harness: geometry, pilot reuse, beamforming,
SINR, and spectral-efficiency CDFs.

The modeled system is one reference sector (ULA at the origin, boresight
along +x) plus the nearest copilot sectors of the first-tier neighbor
cells.  Desired users live in the reference sector; every desired user
drags along ``num_interferers`` copilot users whose channels to the
reference array contaminate its uplink pilots.  An experiment compares
the sum-rate CDF with masked-ADMM decontamination against a contaminated
baseline that DFT-interpolates the raw probed observations.
"""

from __future__ import annotations

import concurrent.futures as cf
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .channel import (
    GeometryError,
    MultipathComponent,
    SamplingPattern,
    SketchWindow,
    UserGeometry,
    calibrate_snr_max,
    one_ring_mpcs,
    pilot_pattern,
    random_antenna_subset,
    realize_channel,
    sketch,
    snr_before_beamforming,
)
from .clustering import (
    MaskPair,
    OracleVerdict,
    cluster_by_delay,
    default_mask_threshold,
    mask_pair_for_candidate,
    partition_rectangles,
    supervised_select,
)
from .decontam import AdmmConfig, admm_interpolate, interpolate_unprobed_columns
from .grid import Dictionary
from .recovery import SolverConfig, solve_psf
from .steering import SPEED_OF_LIGHT, ArrayConfig, OfdmConfig


@dataclass(frozen=True)
class CellLayout:
    """Hexagonal layout truncated to the sectors that matter for the
    reference sector's uplink."""

    radius: float  # meters, cell center to vertex
    pilot_reuse: int = 3  # 3: sectors share by index; 1: all sectors collide
    num_interferers: int = 2  # modeled copilot users per desired user
    pilot_symbols: int = 3  # OFDM symbols carrying pilots per slot

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("cell radius must be positive")
        if self.pilot_reuse not in (1, 3):
            raise ValueError("pilot_reuse must be 1 or 3")
        if self.num_interferers < 0:
            raise ValueError("num_interferers must be nonnegative")

    @property
    def neighbor_centers(self) -> np.ndarray:
        """First-tier neighbor cell centers, (6, 2)."""
        d = np.sqrt(3.0) * self.radius
        bearings = np.deg2rad(30.0 + 60.0 * np.arange(6))
        return d * np.stack([np.cos(bearings), np.sin(bearings)], axis=1)

    def copilot_sectors(self) -> list[tuple[np.ndarray, float]]:
        """(cell center, boresight) of the copilot sectors facing the
        reference sector, nearest first.

        PR3 reuses each pilot only in same-index sectors, so the copilot
        sectors are the forward neighbors' sector 1 (2 sectors); PR1
        reuses everything, adding those cells' other two sectors
        (6 sectors).
        """
        centers = self.neighbor_centers
        forward = [centers[0], centers[5]]  # bearings +30 and -30 deg
        sectors = [(c, 0.0) for c in forward]
        if self.pilot_reuse == 1:
            for boresight in (np.deg2rad(120.0), np.deg2rad(240.0)):
                sectors.extend((c, float(boresight)) for c in forward)
        return sectors

    def pilot_budget(self, coherence_block_subcarriers: int) -> int:
        total = self.pilot_symbols * coherence_block_subcarriers
        return total // self.pilot_reuse if self.pilot_reuse == 3 else total


@dataclass(frozen=True)
class PowerModel:
    exponent: float
    reference_distance: float  # r0
    snr_max: float  # linear

    def __call__(self, r: float) -> float:
        return snr_before_beamforming(r, self.exponent, self.reference_distance, self.snr_max)

    @classmethod
    def calibrated(
        cls,
        cell_radius: float,
        exponent: float,
        reference_distance: float,
        edge_snr: float,
        calibration_exponent: float | None = None,
        anchor_fraction: float = 0.1,
    ) -> "PowerModel":
        """Edge-calibrated model; when ``calibration_exponent`` differs
        from ``exponent`` the transmit power is instead matched to the
        calibrated model at r = anchor_fraction * r0 (near-BS anchor)."""
        base_exp = calibration_exponent if calibration_exponent is not None else exponent
        snr_max = calibrate_snr_max(cell_radius, base_exp, reference_distance, edge_snr)
        if base_exp != exponent:
            a = anchor_fraction
            snr_max = snr_max * (1.0 + a**exponent) / (1.0 + a**base_exp)
        return cls(exponent, reference_distance, snr_max)


@dataclass(frozen=True)
class PlacedUser:
    geometry: UserGeometry
    pilot_symbol: int
    pilot_offset: int
    copilots: tuple[UserGeometry, ...] = ()


@dataclass
class UserPopulation:
    users: list[PlacedUser]
    layout: CellLayout

    @property
    def num_users(self) -> int:
        return len(self.users)


def _sample_sector_position(
    rng: np.random.Generator,
    radius: float,
    max_aoa: float,
    ring_radius: float,
    r_range: tuple[float, float] | None = None,
) -> tuple[float, float]:
    """Uniform-in-area position whose full scattering ring stays inside
    the sector span (bearing +- arcsin(ring/r) within +-max_aoa)."""
    lo = max(1.5 * ring_radius, 0.05 * radius)
    hi = radius
    if r_range is not None:
        lo, hi = max(lo, r_range[0]), min(hi, r_range[1])
    if lo >= hi:
        raise GeometryError("sector too small for the scattering ring")
    for _ in range(10_000):
        r = np.sqrt(rng.uniform(lo**2, hi**2))
        half = max_aoa - np.arcsin(min(ring_radius / r, 1.0))
        if half <= 0:
            continue
        bearing = rng.uniform(-half, half)
        return float(r * np.cos(bearing)), float(r * np.sin(bearing))
    raise GeometryError("could not place a user satisfying the ring constraint")


def place_users(
    layout: CellLayout,
    per_sector: int,
    arr: ArrayConfig,
    ofdm: OfdmConfig,
    rng: np.random.Generator,
    ring_radius: float = 150.0,
    num_mpcs: int = 50,
    edge: bool = False,
) -> UserPopulation:
    """Drop desired users in the reference sector plus their copilots.

    Copilot users are placed in the layout's copilot sectors (cyclically
    when more interferers than sectors are modeled) and share the desired
    user's pilot dimensions.  ``edge`` confines desired users to the
    outer 10% annulus of the cell.
    """
    budget = layout.pilot_budget(ofdm.coherence_block_subcarriers)
    if per_sector > budget:
        raise ValueError(f"{per_sector} users exceed the pilot budget {budget}")
    sectors = layout.copilot_sectors()
    r_range = (0.9 * layout.radius, layout.radius) if edge else None
    users = []
    for k in range(per_sector):
        pos = _sample_sector_position(rng, layout.radius, arr.max_aoa, ring_radius, r_range)
        copilots = []
        for j in range(layout.num_interferers):
            center, boresight = sectors[j % len(sectors)]
            local = _sample_sector_position(rng, layout.radius, arr.max_aoa, ring_radius)
            c, s = np.cos(boresight), np.sin(boresight)
            absolute = (
                center[0] + c * local[0] - s * local[1],
                center[1] + s * local[0] + c * local[1],
            )
            copilots.append(UserGeometry(absolute, ring_radius, num_mpcs))
        users.append(
            PlacedUser(
                geometry=UserGeometry(pos, ring_radius, num_mpcs),
                pilot_symbol=k // ofdm.coherence_block_subcarriers,
                pilot_offset=k % ofdm.coherence_block_subcarriers,
                copilots=tuple(copilots),
            )
        )
    return UserPopulation(users=users, layout=layout)


# -- beamforming and rates -------------------------------------------------


def mmse_beamformer(estimates: np.ndarray, sigma: float) -> np.ndarray:
    """Unit-norm MMSE beamformers for co-scheduled users at one subcarrier.

    ``estimates`` is (M, K); returns (M, K) with column k proportional to
    (sigma^2 I + sum_k' h_k' h_k'^H)^{-1} h_k.
    """
    if sigma <= 0:
        raise ValueError("noise std must be positive")
    h = np.asarray(estimates, complex)
    m = h.shape[0]
    gram = sigma**2 * np.eye(m) + h @ h.conj().T
    v = np.linalg.solve(gram, h)
    norms = np.linalg.norm(v, axis=0)
    if np.any(norms == 0):
        raise ValueError("beamformer collapsed to zero")
    return v / norms


def conjugate_beamformer(estimate: np.ndarray) -> np.ndarray:
    """Unit vector along the channel estimate."""
    h = np.asarray(estimate, complex)
    norm = np.linalg.norm(h)
    if norm == 0:
        raise ValueError("cannot beamform on a zero channel estimate")
    return h / norm


def sinr(
    beamformer: np.ndarray,
    desired: np.ndarray,
    interferers: np.ndarray | None,
    sigma: float,
) -> float:
    """|g^H h|^2 / (sigma^2 + sum |g^H h_j|^2) with true channels."""
    g = np.asarray(beamformer, complex)
    num = abs(np.vdot(g, desired)) ** 2
    den = sigma**2
    if interferers is not None and interferers.size:
        den += float(np.sum(np.abs(interferers.conj().T @ g) ** 2))
    return float(num / den)


def spectral_efficiency(sinrs: np.ndarray) -> float:
    """Mean over subcarriers of log2(1 + sinr)."""
    sinrs = np.asarray(sinrs, float)
    if np.any(sinrs < 0):
        raise ValueError("SINR must be nonnegative")
    return float(np.mean(np.log2(1.0 + sinrs)))


# -- experiment configuration ----------------------------------------------


@dataclass(frozen=True)
class LearningSettings:
    window: int = 50
    antenna_ratio: float = 0.25
    pilot_mode: str = "uniform"  # frequency pattern during the window
    angle_oversampling: int = 2
    delay_oversampling: int = 2
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(max_iterations=150))


@dataclass(frozen=True)
class ExperimentSettings:
    name: str = "experiment"
    trials: int = 200
    geometries: int = 10
    users_per_sector: int = 4
    noise_std: float = 1.0
    beamformer: str = "mmse"  # or "conjugate"
    delay_threshold: Optional[float] = None  # default radius / c0
    metric: str = "sum"  # or "edge_user"
    edge_placement: bool = False
    oracle_rate_target: float = 1.0  # bits/s/Hz for supervised clustering
    genie_estimates: bool = False  # substitute true channels for estimates
    ring_radius: float = 150.0
    mpcs_per_ring: int = 50


@dataclass(frozen=True)
class SimulationConfig:
    arr: ArrayConfig
    ofdm: OfdmConfig
    layout: CellLayout
    power: PowerModel
    learning: LearningSettings = field(default_factory=LearningSettings)
    admm: AdmmConfig = field(default_factory=lambda: AdmmConfig(max_iterations=60))
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)

    @property
    def delay_threshold(self) -> float:
        if self.experiment.delay_threshold is not None:
            return self.experiment.delay_threshold
        return self.layout.radius / SPEED_OF_LIGHT


@dataclass
class RateSample:
    trial: int
    geometry: int
    contaminated: float  # bits/s/Hz
    decontaminated: float
    failed: bool = False


@dataclass
class ExperimentResult:
    samples: list[RateSample]
    config: SimulationConfig
    seed: int
    failures: int = 0

    def rates(self) -> tuple[np.ndarray, np.ndarray]:
        ok = [s for s in self.samples if not s.failed]
        cont = np.array([s.contaminated for s in ok])
        dec = np.array([s.decontaminated for s in ok])
        return cont, dec

    def cdf_table(self) -> np.ndarray:
        """(rate, cdf_contaminated, cdf_decontaminated) rows over the
        pooled rate grid."""
        cont, dec = self.rates()
        grid = np.unique(np.concatenate([cont, dec]))
        cdf_c = np.searchsorted(np.sort(cont), grid, side="right") / len(cont)
        cdf_d = np.searchsorted(np.sort(dec), grid, side="right") / len(dec)
        return np.column_stack([grid, cdf_c, cdf_d])


# -- internal scene machinery ----------------------------------------------


@dataclass
class _Scene:
    """One geometry realization: users, their multipath, and pilots."""

    config: SimulationConfig
    population: UserPopulation
    desired_mpcs: list[list[MultipathComponent]]
    copilot_mpcs: list[list[list[MultipathComponent]]]  # [user][cpu]
    pilot_subcarriers: list[np.ndarray]  # evaluation-phase probing per user
    masks: list[MaskPair] = field(default_factory=list)
    dictionary: Dictionary = None


def _build_scene(cfg: SimulationConfig, rng: np.random.Generator) -> _Scene:
    exp = cfg.experiment
    population = place_users(
        cfg.layout,
        exp.users_per_sector,
        cfg.arr,
        cfg.ofdm,
        rng,
        ring_radius=exp.ring_radius,
        num_mpcs=exp.mpcs_per_ring,
        edge=exp.edge_placement,
    )
    desired_mpcs = []
    copilot_mpcs = []
    pilots = []
    for user in population.users:
        desired_mpcs.append(
            one_ring_mpcs(
                user.geometry,
                (0.0, 0.0),
                cfg.power,
                max_aoa=cfg.arr.max_aoa,
                max_delay=cfg.ofdm.max_delay,
            )
        )
        copilot_mpcs.append(
            [
                one_ring_mpcs(
                    cpu,
                    (0.0, 0.0),
                    cfg.power,
                    max_aoa=cfg.arr.max_aoa,
                    max_delay=cfg.ofdm.max_delay,
                    drop_out_of_view=True,
                )
                for cpu in user.copilots
            ]
        )
        pilots.append(pilot_pattern(cfg.ofdm, user.pilot_offset, mode="uniform"))
    dictionary = Dictionary.for_configs(
        cfg.arr,
        cfg.ofdm,
        cfg.learning.angle_oversampling,
        cfg.learning.delay_oversampling,
    )
    return _Scene(cfg, population, desired_mpcs, copilot_mpcs, pilots, dictionary=dictionary)


def _superposed_channel(
    scene: _Scene, user_index: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """(desired H, contaminated sum, per-CPU channels) for one slot."""
    cfg = scene.config
    h = realize_channel(scene.desired_mpcs[user_index], cfg.arr, cfg.ofdm, rng)
    cpus = [
        realize_channel(mpcs, cfg.arr, cfg.ofdm, rng)
        for mpcs in scene.copilot_mpcs[user_index]
    ]
    total = h.copy()
    for c in cpus:
        total += c
    return h, total, cpus


def _learn_user_mask(
    scene: _Scene, user_index: int, seed: np.random.SeedSequence
) -> MaskPair:
    """Estimate the superposition PSF over the learning window and split
    it into signal/interference masks."""
    cfg = scene.config
    learn = cfg.learning
    rng = np.random.default_rng(seed)
    sigma = cfg.experiment.noise_std
    user = scene.population.users[user_index]
    sketches = []
    patterns = []
    for s in range(learn.window):
        ants = random_antenna_subset(cfg.arr.num_antennas, learn.antenna_ratio, rng)
        if learn.pilot_mode == "hopping":
            subs = pilot_pattern(cfg.ofdm, user.pilot_offset, mode="hopping", seed=rng)
        else:
            subs = scene.pilot_subcarriers[user_index]
        pattern = SamplingPattern(ants, subs, slot=s)
        _, total, _ = _superposed_channel(scene, user_index, rng)
        sketches.append(sketch(total, pattern, sigma, rng))
        patterns.append(pattern)
    window = SketchWindow(np.column_stack(sketches), patterns, sigma)
    solution = solve_psf(window, scene.dictionary, learn.solver)
    weights = solution.weights
    iota = default_mask_threshold(weights)

    if cfg.layout.pilot_reuse == 3:
        return cluster_by_delay(weights, scene.dictionary.grid, cfg.delay_threshold, iota)
    # PR1: supervised selection against a genie decoding oracle on a
    # fresh validation slot.
    hypothesis = partition_rectangles(
        weights, scene.dictionary.grid, k=1 + cfg.layout.num_interferers, iota=iota
    )
    h_true, total, cpus = _superposed_channel(scene, user_index, rng)
    noise = (rng.standard_normal(total.shape) + 1j * rng.standard_normal(total.shape)) * (
        sigma / np.sqrt(2.0)
    )
    observed = (total + noise)[:, scene.pilot_subcarriers[user_index]]
    pattern = SamplingPattern(
        np.arange(cfg.arr.num_antennas), scene.pilot_subcarriers[user_index]
    )

    def estimator(pair: MaskPair) -> np.ndarray:
        return admm_interpolate(observed, pattern, pair, scene.dictionary, cfg.admm).p

    interferers = np.stack([c.reshape(-1, order="F") for c in cpus], axis=1) if cpus else None
    oracle = make_genie_oracle(
        h_true, interferers, sigma, cfg.experiment.oracle_rate_target
    )
    result = supervised_select(hypothesis, estimator, oracle)
    if result.accepted:
        return result.mask_pair
    # every hypothesis rejected: fall back to treating everything as signal
    full = hypothesis.mask
    return MaskPair(full, np.zeros_like(full))


def make_genie_oracle(
    true_channel: np.ndarray,
    interferer_channels: np.ndarray | None,
    sigma: float,
    rate_target: float,
) -> Callable[[np.ndarray], OracleVerdict]:
    """Decoding oracle: success iff the mean conjugate-beamforming rate
    under the candidate estimate exceeds the target.

    ``interferer_channels`` is (MN, J) of vectorized true copilot
    channels (None for none); the candidate estimate is an M x N matrix.
    """
    m, n = true_channel.shape

    def oracle(estimate: np.ndarray) -> OracleVerdict:
        sinrs = np.zeros(n)
        for w in range(n):
            col = estimate[:, w]
            norm = np.linalg.norm(col)
            if norm == 0:
                return OracleVerdict(False, 0.0)
            g = col / norm
            interf = None
            if interferer_channels is not None:
                interf = interferer_channels.reshape(m, n, -1, order="F")[:, w, :]
            sinrs[w] = sinr(g, true_channel[:, w], interf, sigma)
        rate = spectral_efficiency(sinrs)
        return OracleVerdict(rate >= rate_target, rate)

    return oracle


def _run_trial(
    scene: _Scene, trial_index: int, geometry_index: int, seed: np.random.SeedSequence
) -> RateSample:
    cfg = scene.config
    exp = cfg.experiment
    rng = np.random.default_rng(seed)
    sigma = exp.noise_std
    arr, ofdm = cfg.arr, cfg.ofdm
    m, n = arr.num_antennas, ofdm.num_subcarriers
    num_users = scene.population.num_users

    true_h = np.zeros((num_users, m, n), complex)
    cpu_h: list[np.ndarray] = []
    est_cont = np.zeros((num_users, m, n), complex)
    est_dec = np.zeros((num_users, m, n), complex)
    for k in range(num_users):
        h, total, cpus = _superposed_channel(scene, k, rng)
        true_h[k] = h
        cpu_h.extend(cpus)
        subs = scene.pilot_subcarriers[k]
        noise = (rng.standard_normal((m, len(subs))) + 1j * rng.standard_normal((m, len(subs)))) * (
            sigma / np.sqrt(2.0)
        )
        observed = total[:, subs] + noise
        est_cont[k] = interpolate_unprobed_columns(observed, subs, ofdm, method="dft")
        if exp.genie_estimates:
            est_dec[k] = h
        else:
            pattern = SamplingPattern(np.arange(m), subs)
            est_dec[k] = admm_interpolate(
                observed, pattern, scene.masks[k], scene.dictionary, cfg.admm
            ).p

    interferer_pool = np.stack([*true_h, *cpu_h]) if cpu_h else true_h.copy()

    def rates(estimates: np.ndarray) -> float:
        per_user = np.zeros(num_users)
        for w in range(n):
            cols = estimates[:, :, w].T  # (M, K)
            if exp.beamformer == "mmse":
                g = mmse_beamformer(cols, sigma)
            else:
                norms = np.linalg.norm(cols, axis=0)
                if np.any(norms == 0):
                    raise ValueError("zero channel estimate in conjugate beamforming")
                g = cols / norms
            pool_cols = interferer_pool[:, :, w]  # (U, M)
            cross = np.abs(pool_cols.conj() @ g) ** 2  # (U, K): |h_u^H g_k|^2
            for k in range(num_users):
                num_pow = cross[k, k]
                den = sigma**2 + cross[:, k].sum() - cross[k, k]
                per_user[k] += np.log2(1.0 + num_pow / den)
        per_user /= n
        if exp.metric == "edge_user":
            return float(per_user[0])
        return float(per_user.sum())

    try:
        r_cont = rates(est_cont)
        r_dec = rates(est_dec)
    except (ValueError, np.linalg.LinAlgError):
        return RateSample(trial_index, geometry_index, np.nan, np.nan, failed=True)
    return RateSample(trial_index, geometry_index, r_cont, r_dec)


def run_experiment(
    cfg: SimulationConfig, seed: int, threads: int = 1
) -> ExperimentResult:
    """Monte Carlo over geometries and fading trials.

    Deterministic for a fixed (config, seed) regardless of thread count:
    every geometry and trial draws from a pre-spawned seed stream and
    results aggregate in task order.
    """
    exp = cfg.experiment
    root = np.random.SeedSequence(seed)
    geometry_seeds = root.spawn(exp.geometries)

    scenes = []
    for gi, gseed in enumerate(geometry_seeds):
        place_seed, learn_seed, trial_seed = gseed.spawn(3)
        scene = _build_scene(cfg, np.random.default_rng(place_seed))
        mask_seeds = learn_seed.spawn(scene.population.num_users)
        if exp.genie_estimates:
            full = np.ones(
                (scene.dictionary.grid.num_angles, scene.dictionary.grid.num_delays), bool
            )
            scene.masks = [MaskPair(full, np.zeros_like(full))] * scene.population.num_users
        else:
            scene.masks = [
                _learn_user_mask(scene, k, mask_seeds[k])
                for k in range(scene.population.num_users)
            ]
        scenes.append((scene, trial_seed.spawn(exp.trials)))

    tasks = [
        (scenes[gi][0], ti, gi, scenes[gi][1][ti])
        for gi in range(exp.geometries)
        for ti in range(exp.trials)
    ]
    if threads > 1:
        with cf.ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(lambda t: _run_trial(*t), tasks))
    else:
        samples = [_run_trial(*t) for t in tasks]
    failures = sum(1 for s in samples if s.failed)
    return ExperimentResult(samples=samples, config=cfg, seed=seed, failures=failures)
