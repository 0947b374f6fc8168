"""Spatial encoding (SE), reduced spatial encoding (RSE) and motion-sensitive encoding (BSME) blocks"""

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..errors import ConfigError, ShapeError

SHORTCUT_TAPS = ("prev", "cur", "extra")


def conv_specs(prefix: str, c_out: int, c_in: int, k: int) -> dict:
    """
    Parameter layout of one convolution.

    Returns
    -------
    dict
        name -> (shape, fan_in). Biases have fan_in None and start at zero.
    """
    return {
        f"{prefix}.weight": ((c_out, c_in, k, k), c_in * k * k),
        f"{prefix}.bias": ((1, c_out, 1, 1), None),
    }


def se_specs(prefix: str, c_in: int, c_out: int, k: int) -> dict:
    """Parameter layout of an SE block mapping c_in to c_out channels."""
    specs = {}
    specs.update(conv_specs(f"{prefix}.conv_a", c_out, c_in, k))
    specs.update(conv_specs(f"{prefix}.conv_b", c_out, c_out, k))
    specs.update(conv_specs(f"{prefix}.skip", c_out, c_in, 1))
    return specs


def rse_specs(prefix: str, c: int, k: int) -> dict:
    """Parameter layout of an RSE block at c channels, squeezing to c/2 inside."""
    if c % 2 != 0:
        raise ConfigError(f"RSE needs an even channel count, got {c}")
    half = c // 2
    specs = {}
    specs.update(se_specs(f"{prefix}.reduce", c, half, k))
    specs.update(se_specs(f"{prefix}.inner1", half, half, k))
    specs.update(se_specs(f"{prefix}.inner2", half, half, k))
    specs.update(se_specs(f"{prefix}.restore", half, c, k))
    return specs


def bsme_specs(prefix: str, c: int, k: int, n: int, rc_off: bool = False, ei_off: bool = False) -> dict:
    """
    Parameter layout of a BSME block.

    The previous-input pathway has n+1 SEs, the current-input and motion pathways n each.
    Three unactivated 1x1 shortcuts fuse the two spatial pathways and the extra interface,
    unless rc_off removes them. ei_off removes the extra interface shortcut only.
    """
    if n < 1:
        raise ConfigError(f"BSME stack length n must be at least 1, got {n}")
    specs = {}
    for i in range(n + 1):
        specs.update(se_specs(f"{prefix}.prev.se{i}", c, c, k))
    for i in range(n):
        specs.update(se_specs(f"{prefix}.cur.se{i}", c, c, k))
    for i in range(n):
        specs.update(se_specs(f"{prefix}.motion.se{i}", c, c, k))
    if not rc_off:
        for tap in SHORTCUT_TAPS[: 2 if ei_off else 3]:
            specs.update(conv_specs(f"{prefix}.shortcut_{tap}", c, c, 1))
    return specs


@dataclass
class ConvParams:
    weight: Tensor
    bias: Tensor

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, Tensor], prefix: str):
        return cls(tensors[f"{prefix}.weight"], tensors[f"{prefix}.bias"])

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias)

    @property
    def in_channels(self):
        return self.weight.shape[1]


@dataclass
class SEParams:
    """Two k x k convs and a 1x1 skip conv."""

    conv_a: ConvParams
    conv_b: ConvParams
    skip: ConvParams

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, Tensor], prefix: str):
        return cls(
            ConvParams.from_tensors(tensors, f"{prefix}.conv_a"),
            ConvParams.from_tensors(tensors, f"{prefix}.conv_b"),
            ConvParams.from_tensors(tensors, f"{prefix}.skip"),
        )


@dataclass
class RSEParams:
    reduce: SEParams
    inner1: SEParams
    inner2: SEParams
    restore: SEParams

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, Tensor], prefix: str):
        return cls(
            *(SEParams.from_tensors(tensors, f"{prefix}.{part}") for part in ("reduce", "inner1", "inner2", "restore"))
        )


@dataclass
class BSMEParams:
    """
    Parameters of one BSME block.

    Attributes
    ----------
    prev_stack : list of SEParams
        n+1 SEs applied to the previous input.
    cur_stack : list of SEParams
        n SEs applied to the current input.
    motion_stack : list of SEParams
        n SEs applied to the difference of the two spatial pathways.
    shortcut_prev, shortcut_cur, shortcut_extra : ConvParams or None
        Unactivated 1x1 convs. None when residual connections are switched off,
        shortcut_extra also when the extra interface is.
    """

    prev_stack: list
    cur_stack: list
    motion_stack: list
    shortcut_prev: Optional[ConvParams] = None
    shortcut_cur: Optional[ConvParams] = None
    shortcut_extra: Optional[ConvParams] = None

    @property
    def rc_off(self) -> bool:
        return self.shortcut_prev is None

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, Tensor], prefix: str):

        def stack(part):
            out = []
            i = 0
            while f"{prefix}.{part}.se{i}.conv_a.weight" in tensors:
                out.append(SEParams.from_tensors(tensors, f"{prefix}.{part}.se{i}"))
                i += 1
            return out

        shortcuts = [
            ConvParams.from_tensors(tensors, f"{prefix}.shortcut_{tap}") if f"{prefix}.shortcut_{tap}.weight" in tensors else None
            for tap in SHORTCUT_TAPS
        ]

        return cls(stack("prev"), stack("cur"), stack("motion"), *shortcuts)


def se_forward(x: Tensor, p: SEParams, slope: float = ops.LEAKY_SLOPE) -> Tensor:
    """
    Residual block without normalization.

    y = act(conv_b(act(conv_a(x)))) + skip(x), with act a leaky ReLU and no activation on the skip.

    Raises
    ------
    ShapeError
        If x does not have the input channel count of p.
    """

    if x.shape[1] != p.conv_a.in_channels:
        raise ShapeError(f"SE block expects {p.conv_a.in_channels} channels, got input of shape {x.shape}")

    h = ops.leaky_relu(p.conv_a(x), slope)
    h = ops.leaky_relu(p.conv_b(h), slope)
    return ops.add(h, p.skip(x))


def se_stack(x: Tensor, stack: list) -> Tensor:
    for p in stack:
        x = se_forward(x, p)
    return x


def rse_forward(x: Tensor, p: RSEParams, trace: Optional[dict] = None) -> Tensor:
    """
    SE stack that halves the channels, applies two SEs and restores the channels.

    Parameters
    ----------
    x : Tensor
        Input with C channels.
    p : RSEParams
        Block parameters.
    trace : dict, optional
        Receives the intermediate tensors "reduced", "inner1" and "inner2".
    """

    reduced = se_forward(x, p.reduce)
    inner1 = se_forward(reduced, p.inner1)
    inner2 = se_forward(inner1, p.inner2)
    if trace is not None:
        trace.update(reduced=reduced, inner1=inner1, inner2=inner2)
    return se_forward(inner2, p.restore)


def bsme_forward(f_prev: Tensor, f_cur: Tensor, x_extra: Tensor, p: BSMEParams, trace: Optional[dict] = None) -> Tensor:
    """
    Semi-decoupled motion-sensitive encoding of two adjacent inputs.

    Each input goes through its own spatial pathway. The difference of the two
    pathway outputs is encoded by the motion pathway, and the spatial features and
    the extra interface are added back through unactivated 1x1 convs.

    Parameters
    ----------
    f_prev : Tensor
        Earlier input, dims (B, C, J, K).
    f_cur : Tensor
        Later input, same dims.
    x_extra : Tensor
        Extra interface input, same dims.
    p : BSMEParams
        Block parameters.
    trace : dict, optional
        Receives "motion_input", the tensor entering the motion pathway.

    Returns
    -------
    Tensor
        Output of dims (B, C, J, K).
    """

    if not (f_prev.shape == f_cur.shape == x_extra.shape):
        raise ShapeError(
            f"BSME inputs must share dims, got {f_prev.shape}, {f_cur.shape} and {x_extra.shape}"
        )

    s_prev = se_stack(f_prev, p.prev_stack)
    s_cur = se_stack(f_cur, p.cur_stack)
    motion_input = ops.sub(s_prev, s_cur)
    if trace is not None:
        trace["motion_input"] = motion_input
    m = se_stack(motion_input, p.motion_stack)

    if p.rc_off:
        return m

    terms = [m, p.shortcut_prev(s_prev), p.shortcut_cur(s_cur)]
    if p.shortcut_extra is not None:
        terms.append(p.shortcut_extra(x_extra))
    return ops.add_n(terms)


def zeros_like(x: Tensor) -> Tensor:
    return Tensor(np.zeros(x.shape, dtype=x.dtype))
