"""Training loop of the motion prediction network"""

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np
from mpi4py import MPI

from ..autodiff.tensor import Tape
from ..datatypes.skeleton import SampleWindow, stack_windows
from ..errors import ConfigError, DataError, NumericError
from ..io.utils import atomic_write
from ..metrics.losses import LOSS_VARIANTS, temporal_weights, tw_mpjpe, tw_mpjpe_loss
from ..model.network import ModelHyper, ModelParams, forward, predict
from ..model.schedule import build_schedule
from ..monitoring.logger import Logger
from .adam import AdamState, adam_step
from .checkpoint import save_checkpoint

EVAL_CHUNK = 64


@dataclass
class TrainConfig:
    """
    Hyperparameters of a training run.

    The model fields mirror ModelHyper. N_j may be left as None to take it from the data.
    loss selects the step weights: "exp" (decay rate alpha), "linear" or "uniform".
    """

    T: int = 10
    T_out: int = 10
    N_j: Optional[int] = None
    C: int = 64
    k: int = 3
    l_en: int = 1
    l_de: int = 1
    n: int = 2
    alpha: float = 0.3
    learning_rate: float = 1e-4
    steps: int = 1000
    batch_size: int = 16
    seed: int = 0
    loss: str = "exp"
    ted_off: bool = False
    amg_off: bool = False
    rc_off: bool = False
    ei_off: bool = False
    save_interval: int = 0
    log_interval: int = 50
    stride: int = 1
    root: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_VARIANTS:
            raise ConfigError(f"Unknown loss variant '{self.loss}', options are {', '.join(LOSS_VARIANTS)}")
        for name in ("steps", "save_interval", "log_interval"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        for name in ("batch_size", "stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ConfigError(f"The learning rate must be positive, got {self.learning_rate}")

    @classmethod
    def field_types(cls) -> dict:
        hints = {"N_j": int}
        return {f.name: hints.get(f.name, type(f.default)) for f in fields(cls)}

    def model_hyper(self, N_j: Optional[int] = None) -> ModelHyper:
        """Architecture of this run, with the joint count taken from the data if not set."""

        if N_j is None:
            N_j = self.N_j
        elif self.N_j is not None and self.N_j != N_j:
            raise ConfigError(f"The configuration has N_j={self.N_j} but the data has {N_j} joints")
        if N_j is None:
            raise ConfigError("The joint count N_j is unknown")

        return ModelHyper(
            T=self.T,
            T_out=self.T_out,
            N_j=N_j,
            C=self.C,
            k=self.k,
            l_en=self.l_en,
            l_de=self.l_de,
            n=self.n,
            ted_off=self.ted_off,
            amg_off=self.amg_off,
            rc_off=self.rc_off,
            ei_off=self.ei_off,
        )


@dataclass
class TrainResult:
    params: ModelParams
    history: list = field(default_factory=list)


def _as_arrays(dataset):
    if isinstance(dataset, tuple):
        inputs, targets = dataset
        return np.asarray(inputs, dtype=np.float32), np.asarray(targets, dtype=np.float32)
    if len(dataset) > 0 and isinstance(dataset[0], SampleWindow):
        return stack_windows(dataset)
    raise DataError("The dataset has no windows")


def batch_indices(n_windows: int, batch_size: int, steps: int, seed: int) -> list:
    """
    Window indices of every step.

    Each epoch is a seeded permutation consumed batch_size at a time. The last
    batch of an epoch may be shorter.
    """

    rng = np.random.default_rng(seed)
    batches = []
    order = np.empty(0, dtype=np.int64)
    pos = 0
    for _ in range(steps):
        if pos >= order.size:
            order = rng.permutation(n_windows)
            pos = 0
        batches.append(order[pos : pos + batch_size])
        pos += batch_size
    return batches


def train(config: TrainConfig, dataset, comm=None, checkpoint_path: Optional[str] = None, logger: Logger = None) -> TrainResult:
    """
    Train a model with Adam on the weighted joint error.

    Parameters
    ----------
    config : TrainConfig
        Run configuration.
    dataset : list of SampleWindow or tuple
        Windows, or (inputs, targets) arrays of shapes (B, T, N_j, 3) and (B, T_out, N_j, 3).
    comm : MPI communicator, optional
        Every rank trains the same model, only rank 0 writes files.
    checkpoint_path : str, optional
        Checkpoint written at the end and every save_interval steps.
    logger : Logger, optional
        Where progress goes.

    Returns
    -------
    TrainResult
        Final parameters and the loss of every step.

    Raises
    ------
    NumericError
        If the loss becomes non-finite. The message names the step.
    """

    if comm is None:
        comm = MPI.COMM_WORLD
    log = logger if logger is not None else Logger(comm=comm, module_name="train")

    inputs, targets = _as_arrays(dataset)
    if inputs.shape[0] == 0:
        raise DataError("The dataset has no windows")
    if inputs.shape[1] != config.T or targets.shape[1] != config.T_out:
        raise ConfigError(
            f"Windows have {inputs.shape[1]} input and {targets.shape[1]} target frames, the configuration asks for {config.T} and {config.T_out}"
        )

    hyper = config.model_hyper(inputs.shape[2])
    schedule = build_schedule(hyper.T)
    params = ModelParams.init(hyper, config.seed)
    weights = temporal_weights(config.T_out, config.alpha, config.loss)
    state = AdamState(learning_rate=config.learning_rate)

    log.write("info", f"Training on {inputs.shape[0]} windows, {params.count()} parameters, {config.steps} steps")
    log.tic()

    history = []
    for step, idx in enumerate(batch_indices(inputs.shape[0], config.batch_size, config.steps, config.seed), start=1):
        tape = Tape()
        tensors = params.track(tape)
        pred = forward(inputs[idx], tensors, hyper, schedule)
        loss = tw_mpjpe_loss(pred, targets[idx], weights)

        value = float(loss.data.reshape(-1)[0])
        if not np.isfinite(value):
            raise NumericError(f"The loss is {value} at step {step}")

        grads = tape.backward(loss, tensors)
        adam_step(params.arrays, grads, state)
        history.append(value)

        if config.log_interval > 0 and step % config.log_interval == 0:
            log.write("info", f"Step {step}: loss {value:.6g}")
        if checkpoint_path is not None and config.save_interval > 0 and step % config.save_interval == 0:
            if comm.Get_rank() == 0:
                save_checkpoint(checkpoint_path, params)

    log.toc()

    if checkpoint_path is not None and comm.Get_rank() == 0:
        save_checkpoint(checkpoint_path, params)

    return TrainResult(params=params, history=history)


def dataset_loss(params: ModelParams, inputs: np.ndarray, targets: np.ndarray, weights) -> float:
    """Weighted joint error of a trained model over a set of windows, without a tape."""

    if inputs.shape[0] == 0:
        raise DataError("There are no windows to evaluate")
    pred = np.concatenate([predict(params, inputs[i : i + EVAL_CHUNK]) for i in range(0, inputs.shape[0], EVAL_CHUNK)])
    return tw_mpjpe(pred, targets, weights)


def write_loss_history(path: str, history: list):
    """Write the losses as a step,loss CSV, steps counted from 1."""

    lines = ["step,loss"] + [f"{i},{v:.9g}" for i, v in enumerate(history, start=1)]
    atomic_write(path, "\n".join(lines) + "\n")
