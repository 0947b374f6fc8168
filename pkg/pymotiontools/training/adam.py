"""Adam optimizer"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, NumericError


@dataclass
class AdamState:
    """
    Moments and step counter of Adam.

    Attributes
    ----------
    learning_rate : float
        Step size.
    beta1, beta2 : float
        Decay rates of the first and second moments.
    eps : float
        Added to the square root of the second moment.
    step : int
        Number of updates done.
    m, v : dict
        First and second moments per parameter name, created on first use.
    """

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """
    Apply one bias-corrected Adam update in place.

    Parameters are visited in sorted name order and the moments keep the dtype
    of the parameters, so identical inputs give bit-identical updates.

    Parameters
    ----------
    params : dict
        name -> ndarray, modified in place.
    grads : dict
        name -> gradient with the shape of the parameter.
    state : AdamState
        Optimizer state, modified in place.

    Raises
    ------
    ContractError
        If a parameter has no gradient or a gradient of the wrong shape.
    NumericError
        If a gradient is not finite or a moment overflows. The message names the
        parameter and the step.
    """

    missing = [name for name in sorted(params) if name not in grads]
    if missing:
        raise ContractError(f"Missing gradient for {len(missing)} parameters, first is {missing[0]}")

    state.step += 1
    t = state.step

    for name in sorted(params):
        p = params[name]
        g = np.asarray(grads[name], dtype=p.dtype)
        if g.shape != p.shape:
            raise ContractError(f"Gradient of {name} has shape {g.shape}, the parameter has {p.shape}")

        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]

        if not np.all(np.isfinite(g)):
            raise NumericError(f"Gradient of {name} is not finite at step {t}")

        try:
            with np.errstate(over="raise", invalid="raise"):
                m *= p.dtype.type(state.beta1)
                m += p.dtype.type(1 - state.beta1) * g
                v *= p.dtype.type(state.beta2)
                v += p.dtype.type(1 - state.beta2) * g * g

                m_hat = m / p.dtype.type(1 - state.beta1**t)
                v_hat = v / p.dtype.type(1 - state.beta2**t)
                p -= p.dtype.type(state.learning_rate) * m_hat / (np.sqrt(v_hat) + p.dtype.type(state.eps))
        except FloatingPointError:
            raise NumericError(f"Adam moments of {name} overflow at step {t}") from None
