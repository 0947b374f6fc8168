"""Horizon tables of the model and the baselines over many windows"""

from dataclasses import dataclass

import numpy as np

from ..comm.router import Router
from ..errors import ConfigError, DataError
from ..model.network import ModelParams, predict
from .losses import FRAME_MS, constant_velocity_baseline, horizon_frame, mpjpe_curve, zero_velocity_baseline

PREDICT_CHUNK = 64


@dataclass
class HorizonRow:
    ms: int
    frame: int
    model: float
    zero_velocity: float
    constant_velocity: float


def check_horizons(horizons_ms, T_out: int) -> list:
    """
    Convert horizons to frames, rejecting those beyond the predicted range.

    Raises
    ------
    ConfigError
        Listing the valid horizons when one is out of range.
    """

    valid = [FRAME_MS * i for i in range(1, T_out + 1)]
    frames = []
    for ms in horizons_ms:
        frame = horizon_frame(ms)
        if frame > T_out:
            raise ConfigError(f"Horizon {ms} ms is beyond the {T_out} predicted frames, valid horizons are {valid}")
        frames.append(frame)
    return frames


def evaluate_windows(comm, params: ModelParams, inputs: np.ndarray, targets: np.ndarray, horizons_ms, scale: float = 1.0) -> list:
    """
    Model and baseline MPJPE at a set of horizons.

    Windows are split among the ranks and the per-window errors are gathered in
    window order, so the result does not depend on the number of ranks.

    Parameters
    ----------
    comm : MPI communicator
        Communicator.
    params : ModelParams
        Trained model.
    inputs : ndarray
        Observed poses, shape (B, T, N_j, 3).
    targets : ndarray
        Future poses, shape (B, T_out, N_j, 3).
    horizons_ms : sequence of int
        Horizons in milliseconds.
    scale : float, optional
        Factor from the units of the windows to millimeters, the scale of the
        preprocessing for preprocessed windows.

    Returns
    -------
    list of HorizonRow
        One row per horizon, in the given order.
    """

    T_out = params.hyper.T_out
    frames = check_horizons(horizons_ms, T_out)
    if inputs.shape[0] == 0:
        raise DataError("There are no windows to evaluate")

    rt = Router(comm)
    start, count = rt.partition(inputs.shape[0])
    local_in = inputs[start : start + count]
    local_gt = targets[start : start + count]

    curves = np.zeros((3, count, T_out), dtype=np.float64)
    for c0 in range(0, count, PREDICT_CHUNK):
        chunk = slice(c0, min(c0 + PREDICT_CHUNK, count))
        curves[0, chunk] = mpjpe_curve(predict(params, local_in[chunk]), local_gt[chunk])
    if count > 0:
        curves[1] = mpjpe_curve(zero_velocity_baseline(local_in, T_out), local_gt)
        curves[2] = mpjpe_curve(constant_velocity_baseline(local_in, T_out), local_gt)

    # Gather window-major so that every rank holds the windows in order
    local = np.ascontiguousarray(curves.transpose(1, 0, 2))
    gathered, _ = rt.all_gather(data=local, dtype=np.float64)
    gathered = gathered.reshape(-1, 3, T_out)
    mean = gathered.mean(axis=0) * scale

    return [
        HorizonRow(ms=int(ms), frame=f, model=float(mean[0, f - 1]), zero_velocity=float(mean[1, f - 1]), constant_velocity=float(mean[2, f - 1]))
        for ms, f in zip(horizons_ms, frames)
    ]
