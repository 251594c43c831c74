"""Experiment configuration files (TOML) -> simulation objects.

Sections: [array], [ofdm], [cells], [solver], [admm], [experiment].
Unknown keys raise, so typos fail fast.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cellsim import (
    CellLayout,
    ExperimentSettings,
    LearningSettings,
    PowerModel,
    SimulationConfig,
)
from .decontam import AdmmConfig
from .recovery import SolverConfig
from .steering import ArrayConfig, OfdmConfig


class ConfigError(ValueError):
    pass


def _section(data: dict, name: str, allowed: set[str]) -> dict:
    sec = data.get(name, {})
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"[{name}] has unknown keys: {sorted(unknown)}")
    return sec


def load_config(path: str | Path) -> tuple[SimulationConfig, dict]:
    """Parse a TOML experiment config; returns the config object and the
    raw mapping (for hashing into the manifest)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return build_config(data), data


def build_config(data: dict) -> SimulationConfig:
    arr_s = _section(data, "array", {"num_antennas", "max_aoa_deg"})
    ofdm_s = _section(
        data,
        "ofdm",
        {
            "num_subcarriers",
            "subcarrier_spacing_hz",
            "max_delay_s",
            "coherence_block_subcarriers",
            "symbols_per_slot",
            "slot_duration_s",
        },
    )
    cells_s = _section(
        data,
        "cells",
        {
            "radius_m",
            "pilot_reuse",
            "copilot_interferers",
            "pilot_symbols",
            "pathloss_exponent",
            "calibration_exponent",
            "pathloss_reference_m",
            "edge_snr_db",
            "anchor_fraction",
        },
    )
    solver_s = _section(
        data,
        "solver",
        {
            "window",
            "antenna_sampling_ratio",
            "pilot_mode",
            "angle_oversampling",
            "delay_oversampling",
            "max_iterations",
            "objective_tolerance",
        },
    )
    admm_s = _section(data, "admm", {"step", "max_iterations", "tolerance", "relaxation"})
    exp_s = _section(
        data,
        "experiment",
        {
            "name",
            "trials",
            "geometries",
            "users_per_sector",
            "noise_std",
            "beamformer",
            "delay_threshold_s",
            "metric",
            "edge_placement",
            "oracle_rate_target",
            "genie_estimates",
            "ring_radius_m",
            "mpcs_per_ring",
        },
    )

    try:
        arr = ArrayConfig(
            num_antennas=int(arr_s.get("num_antennas", 32)),
            max_aoa=float(np.deg2rad(arr_s.get("max_aoa_deg", 60.0))),
        )
        n = int(ofdm_s.get("num_subcarriers", 32))
        spacing = float(ofdm_s.get("subcarrier_spacing_hz", 15e3))
        ofdm = OfdmConfig(
            num_subcarriers=n,
            bandwidth=n * spacing,
            subcarrier_spacing=spacing,
            max_delay=float(ofdm_s.get("max_delay_s", 12e-6)),
            coherence_block_subcarriers=int(ofdm_s.get("coherence_block_subcarriers", 4)),
            symbols_per_slot=int(ofdm_s.get("symbols_per_slot", 7)),
            slot_duration=float(ofdm_s.get("slot_duration_s", 0.532e-3)),
        )
        layout = CellLayout(
            radius=float(cells_s.get("radius_m", 800.0)),
            pilot_reuse=int(cells_s.get("pilot_reuse", 3)),
            num_interferers=int(cells_s.get("copilot_interferers", 2)),
            pilot_symbols=int(cells_s.get("pilot_symbols", 3)),
        )
        power = PowerModel.calibrated(
            cell_radius=layout.radius,
            exponent=float(cells_s.get("pathloss_exponent", 3.2)),
            reference_distance=float(
                cells_s.get("pathloss_reference_m", layout.radius / 3.0)
            ),
            edge_snr=float(10 ** (cells_s.get("edge_snr_db", 5.0) / 10.0)),
            calibration_exponent=(
                float(cells_s["calibration_exponent"])
                if "calibration_exponent" in cells_s
                else None
            ),
            anchor_fraction=float(cells_s.get("anchor_fraction", 0.1)),
        )
        learning = LearningSettings(
            window=int(solver_s.get("window", 50)),
            antenna_ratio=float(solver_s.get("antenna_sampling_ratio", 0.25)),
            pilot_mode=str(solver_s.get("pilot_mode", "uniform")),
            angle_oversampling=int(solver_s.get("angle_oversampling", 2)),
            delay_oversampling=int(solver_s.get("delay_oversampling", 2)),
            solver=SolverConfig(
                max_iterations=int(solver_s.get("max_iterations", 150)),
                objective_tolerance=float(solver_s.get("objective_tolerance", 1e-6)),
            ),
        )
        admm = AdmmConfig(
            step=float(admm_s.get("step", 1.0)),
            max_iterations=int(admm_s.get("max_iterations", 60)),
            tolerance=float(admm_s.get("tolerance", 1e-6)),
            relaxation=float(admm_s.get("relaxation", 1.0)),
        )
        experiment = ExperimentSettings(
            name=str(exp_s.get("name", "experiment")),
            trials=int(exp_s.get("trials", 200)),
            geometries=int(exp_s.get("geometries", 10)),
            users_per_sector=int(exp_s.get("users_per_sector", 4)),
            noise_std=float(exp_s.get("noise_std", 1.0)),
            beamformer=str(exp_s.get("beamformer", "mmse")),
            delay_threshold=(
                float(exp_s["delay_threshold_s"]) if "delay_threshold_s" in exp_s else None
            ),
            metric=str(exp_s.get("metric", "sum")),
            edge_placement=bool(exp_s.get("edge_placement", False)),
            oracle_rate_target=float(exp_s.get("oracle_rate_target", 1.0)),
            genie_estimates=bool(exp_s.get("genie_estimates", False)),
            ring_radius=float(exp_s.get("ring_radius_m", 150.0)),
            mpcs_per_ring=int(exp_s.get("mpcs_per_ring", 50)),
        )
        return SimulationConfig(
            arr=arr,
            ofdm=ofdm,
            layout=layout,
            power=power,
            learning=learning,
            admm=admm,
            experiment=experiment,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
