"""Central finite-difference check of the analytic gradients"""

from typing import Callable, Mapping, Optional

import numpy as np

from ..errors import ConfigError, NumericError
from .tensor import Tape, Tensor


def relative_error(analytic, numeric):
    """|a - n| / max(1, |a|, |n|), elementwise."""

    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return np.abs(analytic - numeric) / denom


def select_coordinates(size: int, max_coords: Optional[int], rng: np.random.Generator) -> np.ndarray:
    """Flat indices to perturb; all of them when max_coords is None or not smaller than size."""

    if max_coords is None or max_coords >= size:
        return np.arange(size)
    return np.sort(rng.choice(size, size=max_coords, replace=False))


def grad_check(
    f: Callable[[dict], Tensor],
    params: Mapping[str, np.ndarray],
    eps: float = 1e-3,
    max_coords_per_param: Optional[int] = None,
    seed: int = 0,
    report: Optional[dict] = None,
) -> float:
    """
    Compare tape gradients of a scalar function with central differences.

    Each checked coordinate is perturbed on its own and the numeric derivative is
    (f(p + eps) - f(p - eps)) / (2 eps). Everything is evaluated in float64.

    Parameters
    ----------
    f : callable
        Takes a dict of name -> Tensor and returns a (1, 1, 1, 1) Tensor.
        It must only combine its inputs through the differentiable operations.
    params : Mapping[str, ndarray]
        Values at which the gradient is checked. Not modified.
    eps : float
        Perturbation size, in [1e-4, 1e-2].
    max_coords_per_param : int, optional
        Check at most this many coordinates of every parameter, chosen
        deterministically from seed. None checks every coordinate.
    seed : int
        Seed of the coordinate selection.
    report : dict, optional
        If given, filled with the worst relative error per parameter name.

    Returns
    -------
    float
        Max over checked coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).

    Raises
    ------
    ConfigError
        If eps is out of range.
    NumericError
        If f or a gradient produces non-finite values.

    Examples
    --------
    >>> from pymotiontools.autodiff import ops
    >>> x = np.random.default_rng(0).uniform(-1, 1, (1, 1, 4, 3))
    >>> err = grad_check(lambda p: ops.sum_all(ops.mul(p["x"], p["x"])), {"x": x})
    """

    if not 1e-4 <= eps <= 1e-2:
        raise ConfigError(f"eps must be in [1e-4, 1e-2], got {eps}")

    values = {name: np.array(value, dtype=np.float64) for name, value in params.items()}

    tape = Tape()
    tracked = {name: tape.watch(value) for name, value in values.items()}
    loss = f(tracked)
    _check_finite(loss.data, "function value")
    grads = tape.backward(loss, tracked)

    rng = np.random.default_rng(seed)
    worst = 0.0

    for name in sorted(values):
        value = values[name]
        analytic = grads[name]
        _check_finite(analytic, f"gradient of {name}")

        flat = value.reshape(-1)
        coords = select_coordinates(flat.size, max_coords_per_param, rng)
        param_worst = 0.0

        for c in coords:
            original = flat[c]

            flat[c] = original + eps
            f_plus = _evaluate(f, values)
            flat[c] = original - eps
            f_minus = _evaluate(f, values)
            flat[c] = original

            numeric = (f_plus - f_minus) / (2 * eps)
            err = float(relative_error(analytic.reshape(-1)[c], numeric))
            param_worst = max(param_worst, err)

        if report is not None:
            report[name] = param_worst
        worst = max(worst, param_worst)

    return worst


def _evaluate(f, values):
    out = f({name: Tensor(value) for name, value in values.items()})
    _check_finite(out.data, "function value")
    return float(out.data.reshape(-1)[0])


def _check_finite(array, what):
    if not np.all(np.isfinite(array)):
        raise NumericError(f"Non-finite {what} during gradient check")
