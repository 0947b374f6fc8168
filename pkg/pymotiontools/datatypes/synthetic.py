"""Seeded synthetic skeleton motion for experiments without motion capture data"""

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from ..io.utils import atomic_write
from .skeleton import FRAME_INTERVAL_MS, SkeletonSequence


@dataclass
class SynthParams:
    """
    Ranges of the per joint and per coordinate motion parameters.

    Every coordinate follows x(t) = a sin(w t + phi) + v t + c with
    a in amplitude_mm, w = 2 pi / period with period in period_frames,
    phi uniform in [0, 2 pi), |v| <= max_drift_mm and c in offset_mm.
    """

    amplitude_mm: tuple = (20.0, 120.0)
    period_frames: tuple = (20.0, 80.0)
    max_drift_mm: float = 3.0
    offset_mm: tuple = (-500.0, 500.0)


def sequence_name(index: int) -> str:
    return f"seq_{index:04d}"


def synth_sequence(index: int, n_frames: int, n_joints: int, seed: int, params: SynthParams = None) -> SkeletonSequence:
    """Generate sequence number index. Its stream depends on (seed, index) only."""

    if params is None:
        params = SynthParams()

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
    shape = (n_joints, 3)

    amplitude = rng.uniform(*params.amplitude_mm, size=shape)
    period = rng.uniform(*params.period_frames, size=shape)
    phase = rng.uniform(0.0, 2 * np.pi, size=shape)
    drift = rng.uniform(-params.max_drift_mm, params.max_drift_mm, size=shape)
    offset = rng.uniform(*params.offset_mm, size=shape)

    t = np.arange(n_frames, dtype=np.float64)[:, None, None]
    frames = amplitude * np.sin(2 * np.pi / period * t + phase) + drift * t + offset

    return SkeletonSequence(frames, name=sequence_name(index), frame_interval_ms=FRAME_INTERVAL_MS)


def synth_generate(n_seq: int, n_frames: int, n_joints: int, seed: int, params: SynthParams = None) -> list:
    """
    Generate a synthetic dataset.

    Parameters
    ----------
    n_seq : int
        Number of sequences.
    n_frames : int
        Frames per sequence.
    n_joints : int
        Joints per pose.
    seed : int
        Seed. The same seed always gives the same dataset.
    params : SynthParams, optional
        Parameter ranges.

    Returns
    -------
    list of SkeletonSequence
        Sequences named seq_0000, seq_0001, ...

    Examples
    --------
    >>> seqs = synth_generate(4, 60, 8, seed=0)
    """

    return [synth_sequence(i, n_frames, n_joints, seed, params) for i in range(n_seq)]


def synth_manifest(n_seq: int, n_frames: int, n_joints: int, seed: int, params: SynthParams = None) -> dict:
    """Description of a generated dataset, enough to regenerate it."""

    if params is None:
        params = SynthParams()
    return {
        "generator": "sinusoid+drift",
        "seed": int(seed),
        "sequences": int(n_seq),
        "frames": int(n_frames),
        "joints": int(n_joints),
        "frame_interval_ms": FRAME_INTERVAL_MS,
        "parameters": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(params).items()},
        "files": [{"name": f"{sequence_name(i)}.csv", "stream": [int(seed), i]} for i in range(n_seq)],
    }


def write_manifest(folder: str, manifest: dict):
    atomic_write(os.path.join(folder, "manifest.json"), json.dumps(manifest, indent=2))
