"""Portable on-disk formats: channel dumps, sketch bundles, CSV tables.

Channel dumps hold a header (magic, version, M, N, count) followed by
``count`` M x N complex matrices as interleaved little-endian float64
(re, im) pairs in column-major order, enabling bit-exact diffing of
ground truth against estimates.  Sketch bundles additionally record the
per-slot sampling patterns and the grid geometry needed to re-estimate a
PSF offline.  All CSV numbers use shortest round-trip float formatting.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .channel import SamplingPattern, SketchWindow
from .grid import AngleDelayGrid

CHANNEL_MAGIC = b"WBCH"
SKETCH_MAGIC = b"WBSK"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """Malformed or truncated binary file."""


def fmt(x: float) -> str:
    """Shortest decimal that round-trips the float64 exactly."""
    return repr(float(x))


# -- channel dumps -----------------------------------------------------------


def write_channels(path: str | Path, matrices: Sequence[np.ndarray]) -> None:
    matrices = [np.asarray(h, complex) for h in matrices]
    if not matrices:
        raise ValueError("nothing to write")
    m, n = matrices[0].shape
    if any(h.shape != (m, n) for h in matrices):
        raise ValueError("all channel matrices must share one shape")
    with open(path, "wb") as fh:
        fh.write(CHANNEL_MAGIC)
        fh.write(struct.pack("<III Q", FORMAT_VERSION, m, n, len(matrices)))
        for h in matrices:
            fh.write(np.ascontiguousarray(h.reshape(-1, order="F").astype("<c16")).tobytes())


def read_channels(path: str | Path) -> list[np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < 24 or raw[:4] != CHANNEL_MAGIC:
        raise FormatError(f"{path}: not a channel dump")
    version, m, n, count = struct.unpack("<III Q", raw[4:24])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    need = 24 + count * m * n * 16
    if len(raw) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<c16", offset=24)
    return [
        data[i * m * n : (i + 1) * m * n].reshape(m, n, order="F").copy()
        for i in range(count)
    ]


# -- sketch bundles ----------------------------------------------------------


def write_sketches(
    path: str | Path,
    window: SketchWindow,
    num_antennas: int,
    num_subcarriers: int,
    max_sin: float,
    delay_period: float,
) -> None:
    """Serialize a sketch window with its sampling patterns and the
    geometry needed to rebuild the estimation grid."""
    w = window.window
    if w == 0:
        raise ValueError("empty sketch window")
    m = window.patterns[0].num_antennas
    n = window.patterns[0].num_subcarriers
    if any(p.num_antennas != m or p.num_subcarriers != n for p in window.patterns):
        raise ValueError("all patterns must share one (m, n) shape")
    with open(path, "wb") as fh:
        fh.write(SKETCH_MAGIC)
        fh.write(
            struct.pack(
                "<I IIII I ddd",
                FORMAT_VERSION,
                num_antennas,
                num_subcarriers,
                m,
                n,
                w,
                window.sigma,
                max_sin,
                delay_period,
            )
        )
        for c, pattern in enumerate(window.patterns):
            fh.write(np.ascontiguousarray(pattern.antenna_indices.astype("<u4")).tobytes())
            fh.write(np.ascontiguousarray(pattern.subcarrier_indices.astype("<u4")).tobytes())
            fh.write(np.ascontiguousarray(window.sketches[:, c].astype("<c16")).tobytes())


@dataclass
class SketchBundle:
    window: SketchWindow
    num_antennas: int
    num_subcarriers: int
    max_sin: float
    delay_period: float

    def grid(self, angle_oversampling: int = 2, delay_oversampling: int = 2) -> AngleDelayGrid:
        return AngleDelayGrid(
            angle_oversampling * self.num_antennas,
            delay_oversampling * self.num_subcarriers,
            self.max_sin,
            self.delay_period,
        )


def read_sketches(path: str | Path) -> SketchBundle:
    raw = Path(path).read_bytes()
    header = struct.calcsize("<I IIII I ddd") + 4
    if len(raw) < header or raw[:4] != SKETCH_MAGIC:
        raise FormatError(f"{path}: not a sketch bundle")
    version, mm, nn, m, n, w, sigma, max_sin, delay_period = struct.unpack(
        "<I IIII I ddd", raw[4:header]
    )
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    slot_bytes = 4 * m + 4 * n + 16 * m * n
    if len(raw) != header + w * slot_bytes or w == 0:
        raise FormatError(f"{path}: truncated sketch bundle")
    patterns = []
    cols = []
    off = header
    for s in range(w):
        ants = np.frombuffer(raw, dtype="<u4", count=m, offset=off).astype(int)
        off += 4 * m
        subs = np.frombuffer(raw, dtype="<u4", count=n, offset=off).astype(int)
        off += 4 * n
        col = np.frombuffer(raw, dtype="<c16", count=m * n, offset=off).copy()
        off += 16 * m * n
        patterns.append(SamplingPattern(ants, subs, slot=s))
        cols.append(col)
    window = SketchWindow(np.column_stack(cols), patterns, sigma)
    return SketchBundle(window, mm, nn, max_sin, delay_period)


# -- CSV tables --------------------------------------------------------------


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def write_psf_csv(path: str | Path, weights: np.ndarray, grid: AngleDelayGrid) -> None:
    angles = grid.angle_points
    delays = grid.delay_points
    rows = []
    for flat in np.flatnonzero(np.asarray(weights) > 0):
        i, j = grid.unravel(flat)
        rows.append((int(i), int(j), float(angles[i]), float(delays[j]), float(weights[flat])))
    write_csv(path, ("angle_index", "delay_index", "theta_rad", "tau_s", "weight"), rows)


def write_trace_csv(path: str | Path, trace: np.ndarray, bounds: np.ndarray) -> None:
    rows = [
        (k, float(trace[k]), float(bounds[k]))
        for k in range(len(trace))
    ]
    write_csv(path, ("iteration", "objective", "bound"), rows)


def write_mask_csv(path: str | Path, signal: np.ndarray, interference: np.ndarray) -> None:
    signal = np.asarray(signal, bool)
    interference = np.asarray(interference, bool)
    rows = []
    for i in range(signal.shape[0]):
        for j in range(signal.shape[1]):
            if signal[i, j]:
                label = "signal"
            elif interference[i, j]:
                label = "interference"
            else:
                continue
            rows.append((i, j, label))
    write_csv(path, ("angle_index", "delay_index", "label"), rows)


def read_mask_csv(path: str | Path, shape: tuple[int, int]):
    signal = np.zeros(shape, bool)
    interference = np.zeros(shape, bool)
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0].split(",")[:3] != ["angle_index", "delay_index", "label"]:
        raise FormatError(f"{path}: not a mask CSV")
    for line in lines[1:]:
        i_s, j_s, label = line.split(",")[:3]
        i, j = int(i_s), int(j_s)
        if label == "signal":
            signal[i, j] = True
        elif label == "interference":
            interference[i, j] = True
    return signal, interference


# -- manifests ---------------------------------------------------------------


def config_hash(config_dict: dict) -> str:
    """Stable hash of a (nested) config mapping, key order canonicalized."""
    blob = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_manifest(
    path: str | Path,
    config_dict: dict,
    seed: int,
    outputs: Sequence[str],
    wall_time: float,
    version: str,
) -> None:
    manifest = {
        "config_hash": config_hash(config_dict),
        "master_seed": int(seed),
        "tool_version": version,
        "wall_time_s": wall_time,
        "outputs": list(outputs),
        "created_unix": int(time.time()),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
