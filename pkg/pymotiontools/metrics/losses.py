"""Temporally weighted training loss, joint position errors and simple baselines"""

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..errors import ConfigError, ShapeError

FRAME_MS = 40
REPORT_HORIZONS_MS = (80, 160, 320, 400, 560, 1000)
LOSS_VARIANTS = ("exp", "linear", "uniform")


@dataclass
class LossWeights:
    """
    Per-step weights of the training loss.

    Attributes
    ----------
    w : ndarray
        T_out weights summing to one.
    alpha : float
        Decay rate of the exponential variant.
    variant : str
        "exp", "linear" or "uniform".
    """

    w: np.ndarray
    alpha: float = 0.3
    variant: str = "exp"

    def __post_init__(self):
        if abs(float(np.sum(self.w)) - 1.0) > 1e-6:
            raise ConfigError(f"Loss weights must sum to 1, got {np.sum(self.w)}")

    @property
    def T_out(self) -> int:
        return len(self.w)


def temporal_weights(T_out: int, alpha: float = 0.3, variant: str = "exp") -> LossWeights:
    """
    Weights of the future steps i = 1 .. T_out.

    exp gives w_i proportional to exp(-alpha i), linear gives w_i proportional to
    T_out - i + 1 and uniform gives 1 / T_out.

    Examples
    --------
    >>> np.round(temporal_weights(2, 0.3).w, 4)
    array([0.5744, 0.4256])
    """

    if T_out < 1:
        raise ConfigError(f"T_out must be at least 1, got {T_out}")
    if alpha < 0:
        raise ConfigError(f"The decay rate alpha must be non-negative, got {alpha}")

    i = np.arange(1, T_out + 1, dtype=np.float64)
    if variant == "exp":
        w = softmax(-alpha * i)
    elif variant == "linear":
        w = (T_out - i + 1) / np.sum(T_out - i + 1)
    elif variant == "uniform":
        w = np.full(T_out, 1.0 / T_out)
    else:
        raise ConfigError(f"Unknown loss variant '{variant}', options are {', '.join(LOSS_VARIANTS)}")

    return LossWeights(w=w, alpha=alpha, variant=variant)


def tw_mpjpe_loss(pred: Tensor, gt, weights: LossWeights) -> Tensor:
    """
    Differentiable weighted squared joint error.

    L = 1/(B N_j) sum_b sum_i w_i sum_j |J_ij - J^_ij|^2

    Parameters
    ----------
    pred : Tensor
        Predicted poses of dims (B, T_out, N_j, 3).
    gt : ndarray or Tensor
        Ground truth with the same dims.
    weights : LossWeights
        T_out step weights.

    Returns
    -------
    Tensor
        The loss, dims (1, 1, 1, 1).
    """

    if not isinstance(gt, Tensor):
        gt = Tensor(np.asarray(gt, dtype=pred.dtype))
    if pred.shape != gt.shape:
        raise ShapeError(f"Prediction {pred.shape} and ground truth {gt.shape} differ")
    B, T_out, N_j, _ = pred.shape
    if T_out != weights.T_out:
        raise ShapeError(f"{weights.T_out} loss weights for {T_out} predicted steps")

    factor = (weights.w / (B * N_j)).astype(pred.dtype)
    factor = Tensor(np.ascontiguousarray(np.broadcast_to(factor[None, :, None, None], pred.shape)))

    diff = ops.sub(pred, gt)
    return ops.sum_all(ops.mul(ops.mul(diff, diff), factor))


def tw_mpjpe(pred: np.ndarray, gt: np.ndarray, weights: LossWeights) -> float:
    """Value of the weighted loss on plain arrays of shape (B, T_out, N_j, 3) or (T_out, N_j, 3)."""

    pred, gt = _as_batch(pred, gt)
    sq = np.sum((pred.astype(np.float64) - gt) ** 2, axis=-1)
    return float(np.mean(np.sum(weights.w[None, :] * np.sum(sq, axis=-1), axis=1)) / pred.shape[2])


def mpjpe_curve(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Mean per joint position error of every window and step, shape (B, T_out)."""

    pred, gt = _as_batch(pred, gt)
    return np.mean(np.linalg.norm(pred.astype(np.float64) - gt, axis=-1), axis=-1)


def mpjpe(pred: np.ndarray, gt: np.ndarray, horizon: int) -> float:
    """
    Mean Euclidean joint distance at a 1-based step, in the units of the input.

    Averaged over windows when a batch is given.
    """

    pred, gt = _as_batch(pred, gt)
    if not 1 <= horizon <= pred.shape[1]:
        raise ConfigError(f"Horizon {horizon} out of range 1 .. {pred.shape[1]}")
    return float(np.mean(mpjpe_curve(pred, gt)[:, horizon - 1]))


def zero_velocity_baseline(window: np.ndarray, T_out: int) -> np.ndarray:
    """Repeat the last observed pose T_out times."""

    window = np.asarray(window)
    last = window[..., -1:, :, :]
    reps = [1] * window.ndim
    reps[-3] = T_out
    return np.tile(last, reps)


def constant_velocity_baseline(window: np.ndarray, T_out: int) -> np.ndarray:
    """Continue the displacement between the last two observed poses."""

    window = np.asarray(window)
    if window.shape[-3] < 2:
        raise ConfigError("The constant velocity baseline needs at least two observed poses")
    last = window[..., -1:, :, :]
    velocity = last - window[..., -2:-1, :, :]
    steps = np.arange(1, T_out + 1, dtype=window.dtype).reshape(-1, 1, 1)
    return last + steps * velocity


def horizon_frame(ms: int) -> int:
    """1-based frame index of a horizon in milliseconds."""

    if ms <= 0 or ms % FRAME_MS != 0:
        raise ConfigError(f"Horizons must be positive multiples of {FRAME_MS} ms, got {ms}")
    return ms // FRAME_MS


def available_horizons(T_out: int) -> tuple:
    """The standard report horizons that fit in T_out predicted frames."""
    return tuple(ms for ms in REPORT_HORIZONS_MS if ms // FRAME_MS <= T_out)


def _as_batch(pred, gt):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"Prediction {pred.shape} and ground truth {gt.shape} differ")
    if pred.ndim == 3:
        return pred[None], gt[None]
    return pred, gt
