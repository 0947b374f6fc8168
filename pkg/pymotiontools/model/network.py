"""Encoder, trajectory pyramid, multi-granularity aggregation and decoders"""

from dataclasses import dataclass, field, fields
from typing import Mapping, Optional

import numpy as np

from ..autodiff import ops
from ..autodiff.init import seeded_init
from ..autodiff.tensor import Tape, Tensor
from ..errors import ConfigError, ShapeError
from .blocks import BSMEParams, ConvParams, SEParams, bsme_forward, bsme_specs, conv_specs, se_specs, se_stack, zeros_like
from .schedule import LevelSchedule, build_schedule, reachable_nodes

AGG_HIDDEN = (128, 64)

# Multipliers of the He-normal scale
RESIDUAL_GAIN = 0.1
LINEAR_GAIN = float(np.sqrt(0.5))
SHORTCUT_GAIN = float(np.sqrt(1.0 / 8.0))
MOTION_GAIN = 0.25


@dataclass
class ModelHyper:
    """
    Architecture hyperparameters.

    Attributes
    ----------
    T : int
        Number of input frames, at least 2. The pyramid has T-1 levels.
    T_out : int
        Number of predicted frames.
    N_j : int
        Number of joints seen by the network.
    C : int
        Feature channels.
    k : int
        Odd kernel size of the spatial convolutions.
    l_en, l_de : int
        SE blocks in the encoder and in each decoder.
    n : int
        Stack length inside the BSME blocks.
    ted_off : bool
        Sum the node outputs of each level instead of concatenating and convolving them.
    amg_off : bool
        Use the top level feature instead of the weighted sum over levels.
        Levels that do not feed the top level then have no parameters.
    rc_off : bool
        Remove the 1x1 shortcuts of the BSME blocks.
    ei_off : bool
        Feed zeros to the extra interface of the BSME blocks, which then have no
        extra interface shortcut.
    """

    T: int
    T_out: int
    N_j: int
    C: int = 64
    k: int = 3
    l_en: int = 1
    l_de: int = 1
    n: int = 2
    ted_off: bool = False
    amg_off: bool = False
    rc_off: bool = False
    ei_off: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.T < 2:
            raise ConfigError(f"T must be at least 2, got {self.T}")
        for name in ("T_out", "N_j", "C", "n"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        for name in ("l_en", "l_de"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.k < 1 or self.k % 2 == 0:
            raise ConfigError(f"The kernel size k must be a positive odd number, got {self.k}")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def used_levels(hyper: ModelHyper) -> list:
    """Levels whose features enter the aggregation, only the top one with amg_off."""

    if hyper.amg_off:
        return [hyper.T - 1]
    return list(range(1, hyper.T))


def bsme_levels(hyper: ModelHyper, schedule: LevelSchedule) -> set:
    """Levels with at least one BSME node that reaches the output."""

    active = reachable_nodes(schedule, used_levels(hyper))
    return {l for l, i in active if schedule.levels[l - 1][i].kind == "bsme"}


def param_specs(hyper: ModelHyper, schedule: Optional[LevelSchedule] = None) -> dict:
    """
    Names, shapes and fan-ins of every learnable tensor of the model.

    Only the levels that reach the output get parameters, which is all of them
    unless aggregation is switched off.

    Returns
    -------
    dict
        name -> (shape, fan_in), fan_in None for biases.
    """

    if schedule is None:
        schedule = build_schedule(hyper.T)
    C, k = hyper.C, hyper.k
    with_bsme = bsme_levels(hyper, schedule)
    with_feature = set(used_levels(hyper))

    specs = {}
    specs.update(conv_specs("encoder.input", C, 1, 1))
    for i in range(hyper.l_en):
        specs.update(se_specs(f"encoder.se{i}", C, C, k))

    for l, nodes in enumerate(schedule.levels, start=1):
        if l in with_bsme:
            specs.update(bsme_specs(f"pyramid.level{l:02d}", C, k, hyper.n, hyper.rc_off, hyper.ei_off))
        if l in with_feature and not hyper.ted_off:
            specs.update(conv_specs(f"traj.level{l:02d}", C, len(nodes) * C, k))

    if not hyper.amg_off:
        sizes = (C * hyper.N_j * 3,) + AGG_HIDDEN + (hyper.T - 1,)
        for i in range(3):
            name = f"agg.fc{i + 1}"
            specs[f"{name}.weight"] = ((sizes[i + 1], sizes[i], 1, 1), sizes[i])
            specs[f"{name}.bias"] = ((1, sizes[i + 1], 1, 1), None)

    for s in range(hyper.T_out):
        for i in range(hyper.l_de):
            specs.update(se_specs(f"decoder.step{s:02d}.se{i}", C, C, k))
        specs.update(conv_specs(f"decoder.step{s:02d}.out", 1, C, 1))

    return specs


def init_gain(name: str) -> float:
    """
    Factor applied to the He-normal scale of a weight.

    Convs with no activation after them get unit variance gain and the last conv of
    every SE branch starts small. The four terms summed at a BSME output, the motion
    pathway and the three shortcuts, get a quarter of the input variance each.
    Activations then keep about the scale of the input through the whole network.
    """

    if name.endswith(".conv_b.weight"):
        return RESIDUAL_GAIN
    if ".shortcut_" in name:
        return SHORTCUT_GAIN
    if name.endswith(".motion.se0.skip.weight"):
        return MOTION_GAIN
    if name.endswith((".skip.weight", ".out.weight")) or name.startswith(("encoder.input.", "agg.")):
        return LINEAR_GAIN
    return 1.0


def init_arrays(specs: dict, seed: int, dtype=np.float32) -> dict:
    """Initial values for a parameter layout: seeded He-normal weights scaled by init_gain, zero biases."""

    arrays = {}
    for name, (shape, fan_in) in specs.items():
        if fan_in is None:
            arrays[name] = np.zeros(shape, dtype=dtype)
        else:
            values = seeded_init(shape, fan_in, seed, name, dtype=np.float64) * init_gain(name)
            arrays[name] = values.astype(dtype)
    return arrays


class ModelParams:
    """
    Named collection of all learnable arrays of the network.

    Parameters
    ----------
    hyper : ModelHyper
        Architecture the arrays belong to.
    arrays : dict
        name -> ndarray.

    Examples
    --------
    >>> hyper = ModelHyper(T=4, T_out=2, N_j=5, C=4)
    >>> params = ModelParams.init(hyper, seed=0)
    >>> tape = Tape()
    >>> tensors = params.track(tape)
    """

    def __init__(self, hyper: ModelHyper, arrays: dict):

        expected = param_specs(hyper)
        missing = sorted(set(expected) - set(arrays))
        unknown = sorted(set(arrays) - set(expected))
        if missing or unknown:
            raise ConfigError(f"Parameter names do not match the architecture, missing {missing[:3]}, unknown {unknown[:3]}")
        for name, (shape, _) in expected.items():
            if arrays[name].shape != shape:
                raise ShapeError(f"Parameter {name} has shape {arrays[name].shape}, expected {shape}")

        self.hyper = hyper
        self.arrays = arrays

    @classmethod
    def init(cls, hyper: ModelHyper, seed: int, dtype=np.float32):
        """Scaled He-normal weights keyed by (seed, name), zero biases."""

        return cls(hyper, init_arrays(param_specs(hyper), seed, dtype))

    def names(self) -> list:
        return sorted(self.arrays)

    def count(self) -> int:
        return int(sum(a.size for a in self.arrays.values()))

    def track(self, tape: Tape) -> dict:
        return {name: tape.watch(self.arrays[name]) for name in self.names()}

    def constants(self) -> dict:
        return {name: Tensor(self.arrays[name]) for name in self.names()}

    def copy(self):
        return ModelParams(self.hyper, {name: a.copy() for name, a in self.arrays.items()})


@dataclass
class ModelView:
    """
    Parameter tensors grouped by network component.

    pyramid and traj_convs hold one entry per level, None for a level without
    parameters. active lists the (level, index) nodes that reach the output.
    """

    hyper: ModelHyper
    schedule: LevelSchedule
    encoder_input: ConvParams
    encoder_stack: list
    pyramid: list
    traj_convs: list
    agg_fcs: Optional[list]
    decoders: list
    active: set = field(default_factory=set)

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, Tensor], hyper: ModelHyper, schedule: Optional[LevelSchedule] = None):

        if schedule is None:
            schedule = build_schedule(hyper.T)

        levels = range(1, schedule.n_levels + 1)
        with_bsme = bsme_levels(hyper, schedule)
        with_feature = set(used_levels(hyper))
        agg_fcs = None
        if not hyper.amg_off:
            agg_fcs = [ConvParams.from_tensors(tensors, f"agg.fc{i}") for i in (1, 2, 3)]

        return cls(
            hyper=hyper,
            schedule=schedule,
            encoder_input=ConvParams.from_tensors(tensors, "encoder.input"),
            encoder_stack=[SEParams.from_tensors(tensors, f"encoder.se{i}") for i in range(hyper.l_en)],
            pyramid=[BSMEParams.from_tensors(tensors, f"pyramid.level{l:02d}") if l in with_bsme else None for l in levels],
            traj_convs=[
                ConvParams.from_tensors(tensors, f"traj.level{l:02d}") if l in with_feature and not hyper.ted_off else None for l in levels
            ],
            agg_fcs=agg_fcs,
            active=reachable_nodes(schedule, with_feature),
            decoders=[
                (
                    [SEParams.from_tensors(tensors, f"decoder.step{s:02d}.se{i}") for i in range(hyper.l_de)],
                    ConvParams.from_tensors(tensors, f"decoder.step{s:02d}.out"),
                )
                for s in range(hyper.T_out)
            ],
        )


def encode(x_frame: Tensor, view: ModelView) -> Tensor:
    """
    Encode one frame of dims (B, 1, N_j, 3) into features (B, C, N_j, 3).

    A 1x1 conv lifts the coordinates to C channels, then l_en SE blocks follow.
    The same parameters are used for every frame.
    """

    if x_frame.shape[1:] != (1, view.hyper.N_j, 3):
        raise ShapeError(f"encode expects a frame of dims (B, 1, {view.hyper.N_j}, 3), got {x_frame.shape}")

    return se_stack(view.encoder_input(x_frame), view.encoder_stack)


def run_pyramid(encodings: list, schedule: LevelSchedule, view: ModelView, traces: Optional[list] = None) -> list:
    """
    Execute every node of the schedule.

    Parameters
    ----------
    encodings : list of Tensor
        The T frame encodings.
    schedule : LevelSchedule
        Pairing plan.
    view : ModelView
        Parameters, one BSME set per level shared by all nodes of that level.
    traces : list, optional
        If given, one dict per BSME call is appended with its "motion_input".

    Returns
    -------
    list
        For each level 1 .. T-1, the ordered list of node outputs. Nodes that do
        not reach the output are not executed and give None.
    """

    if len(encodings) != schedule.T:
        raise ConfigError(f"The schedule expects {schedule.T} encodings, got {len(encodings)}")
    if len(view.pyramid) != schedule.n_levels:
        raise ConfigError(f"The schedule has {schedule.n_levels} levels but there are {len(view.pyramid)} BSME parameter sets")

    outputs = [list(encodings)]
    for l, nodes in enumerate(schedule.levels, start=1):
        level_out = []
        for j, node in enumerate(nodes):
            if (l, j) not in view.active:
                level_out.append(None)
                continue
            if node.kind == "carry":
                src_level, src = node.sources[0]
                level_out.append(outputs[src_level][src])
                continue

            (pl, pi), (cl, ci) = node.sources
            f_prev = outputs[pl][pi]
            f_cur = outputs[cl][ci]
            extra = encodings[node.extra_frame - 1]
            if view.hyper.ei_off:
                extra = zeros_like(extra)

            if view.pyramid[l - 1] is None:
                raise ConfigError(f"Level {l} has no BSME parameters")

            trace = {} if traces is not None else None
            level_out.append(bsme_forward(f_prev, f_cur, extra, view.pyramid[l - 1], trace=trace))
            if traces is not None:
                traces.append(trace)
        outputs.append(level_out)

    return outputs[1:]


def level_feature(outputs: list, traj_conv: Optional[ConvParams], ted_off: bool = False) -> Tensor:
    """
    Feature of one pyramid level.

    The node outputs are concatenated along the channel axis and mapped back to C
    channels by a k x k conv followed by a leaky ReLU. With ted_off the outputs are
    summed instead, without any parameters or activation.
    """

    if len(outputs) == 0:
        raise ConfigError("A level needs at least one output")

    if ted_off:
        return ops.add_n(outputs)

    return ops.leaky_relu(traj_conv(ops.concat_channels(outputs)))


def aggregate(level_features: list, top_feature: Tensor, agg_fcs: Optional[list], alpha=None, trace: Optional[dict] = None) -> Tensor:
    """
    Weighted sum of the level features.

    The weights come from three fully connected layers with sigmoid activations
    applied to the flattened top feature, one weight per level in (0, 1).

    Parameters
    ----------
    level_features : list of Tensor
        Features of levels 1 .. T-1.
    top_feature : Tensor
        Feature of the top level, the input of the weight network.
    agg_fcs : list of ConvParams or None
        The three layers. None switches aggregation off and returns top_feature.
    alpha : ndarray, optional
        Forced weights of shape (T-1,) or (B, T-1). Bypasses the layers.
    trace : dict, optional
        Receives "alpha", the weights as a (B, T-1, 1, 1) tensor.

    Returns
    -------
    Tensor
        Aggregated feature with the dims of the level features.
    """

    if agg_fcs is None and alpha is None:
        return top_feature

    if alpha is not None:
        alpha = np.asarray(alpha, dtype=top_feature.dtype)
        alpha = np.broadcast_to(alpha.reshape(-1, alpha.shape[-1]), (top_feature.shape[0], alpha.shape[-1]))
        weights = Tensor(np.ascontiguousarray(alpha)[:, :, None, None])
    else:
        h = ops.flatten(top_feature)
        for fc in agg_fcs:
            h = ops.sigmoid(ops.fully_connected(h, fc.weight, fc.bias))
        weights = h

    if weights.shape[1] != len(level_features):
        raise ConfigError(f"There are {weights.shape[1]} aggregation weights for {len(level_features)} level features")
    if trace is not None:
        trace["alpha"] = weights

    return ops.add_n([ops.weight_by(f, weights, l) for l, f in enumerate(level_features)])


def decode(F: Tensor, view: ModelView) -> list:
    """
    Decode the aggregated feature into T_out poses.

    Every step has its own l_de SE blocks and 1x1 conv to one channel, and all of
    them read the same feature. Returns a list of T_out tensors of dims (B, 1, N_j, 3).
    """

    if F.shape[1:] != (view.hyper.C, view.hyper.N_j, 3):
        raise ShapeError(f"decode expects dims (B, {view.hyper.C}, {view.hyper.N_j}, 3), got {F.shape}")

    return [out(se_stack(F, stack)) for stack, out in view.decoders]


def forward(window, tensors: Mapping[str, Tensor], hyper: ModelHyper, schedule: Optional[LevelSchedule] = None, trace: Optional[dict] = None) -> Tensor:
    """
    Predict future poses from a window of past poses.

    The decoders give the displacement of every future pose from the last
    observed one, so a model whose decoders output zeros repeats the last pose.

    Parameters
    ----------
    window : ndarray or Tensor
        Past poses of shape (T, N_j, 3) or (B, T, N_j, 3).
    tensors : Mapping[str, Tensor]
        Model parameters, tracked or not.
    hyper : ModelHyper
        Architecture.
    schedule : LevelSchedule, optional
        Pairing plan, built from hyper.T if not given.
    trace : dict, optional
        Receives "levels" (pyramid outputs), "level_features" and "alpha".
        Levels left out with amg_off appear as None.

    Returns
    -------
    Tensor
        Predicted poses of dims (B, T_out, N_j, 3).
    """

    view = ModelView.from_tensors(tensors, hyper, schedule)
    frames = _window_tensor(window, hyper, tensors["encoder.input.weight"].dtype)
    with_feature = set(used_levels(hyper))

    encodings = [encode(_frame(frames, t), view) for t in range(hyper.T)]
    levels = run_pyramid(encodings, view.schedule, view)
    features = [
        level_feature(outs, conv, hyper.ted_off) if l in with_feature else None
        for l, (outs, conv) in enumerate(zip(levels, view.traj_convs), start=1)
    ]

    agg_trace = {} if trace is not None else None
    F = aggregate(features, features[-1], view.agg_fcs, trace=agg_trace)
    displacement = ops.concat_channels(decode(F, view))

    if trace is not None:
        trace.update(levels=levels, level_features=features, alpha=agg_trace.get("alpha"))

    last = np.repeat(frames.data[:, -1:], hyper.T_out, axis=1)
    return ops.add(displacement, Tensor(np.ascontiguousarray(last)))


def predict(params: ModelParams, window: np.ndarray) -> np.ndarray:
    """
    Forward pass without a tape, on plain arrays.

    Returns an array of shape (T_out, N_j, 3) for a single window or
    (B, T_out, N_j, 3) for a batch.
    """

    window = np.asarray(window)
    out = forward(window, params.constants(), params.hyper).data
    if window.ndim == 3:
        return out[0]
    return out


def _window_tensor(window, hyper: ModelHyper, dtype) -> Tensor:

    if isinstance(window, Tensor):
        frames = window
    else:
        data = np.asarray(window, dtype=dtype)
        if data.ndim == 3:
            data = data[None]
        frames = Tensor(np.ascontiguousarray(data))

    if frames.shape[1:] != (hyper.T, hyper.N_j, 3):
        raise ShapeError(f"Expected windows of shape (B, {hyper.T}, {hyper.N_j}, 3), got {frames.shape}")
    return frames


def _frame(frames: Tensor, t: int) -> Tensor:
    """Frame t of a (B, T, J, 3) window as a (B, 1, J, 3) constant."""
    return Tensor(np.ascontiguousarray(frames.data[:, t : t + 1]))
