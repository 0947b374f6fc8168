"""Finite-difference gradient checks of every network component"""

import numpy as np

from ..autodiff import ops
from ..autodiff.gradcheck import grad_check
from ..autodiff.tensor import Tensor
from ..metrics.losses import temporal_weights, tw_mpjpe_loss
from .blocks import BSMEParams, ConvParams, RSEParams, SEParams, bsme_forward, bsme_specs, conv_specs, rse_forward, rse_specs, se_forward, se_specs
from .network import ModelHyper, ModelView, aggregate, decode, encode, forward, init_arrays, level_feature, param_specs

GRAD_EPS = 1e-3
GRAD_TOL = 1e-3
SUITE_HYPER = {"T": 4, "T_out": 2, "N_j": 5, "C": 4, "k": 3}
DEFAULT_COORDS = 8


def _random_params(specs: dict, seed: int, rng: np.random.Generator) -> dict:
    """He-normal weights and small random biases, in float64."""

    arrays = init_arrays(specs, seed, dtype=np.float64)
    for name, (shape, fan_in) in specs.items():
        if fan_in is None:
            arrays[name] = rng.uniform(-0.1, 0.1, size=shape)
    return arrays


def _projected(out: Tensor, projection: np.ndarray) -> Tensor:
    """Scalar <out, projection>, so that every output element matters."""
    return ops.sum_all(ops.mul(out, Tensor(projection)))


def _component_cases(seed: int):
    """Yield (name, f, params) for every checked component."""

    rng = np.random.default_rng(seed)
    hyper = ModelHyper(**SUITE_HYPER)
    C, J, k = hyper.C, hyper.N_j, hyper.k
    B = 2
    feat = (B, C, J, 3)

    def uniform(shape):
        return rng.uniform(-1.0, 1.0, size=shape)

    # conv2d
    p = {"x": uniform((B, 3, J, 3))}
    p.update(_random_params(conv_specs("conv", C, 3, k), seed, rng))
    proj = uniform(feat)
    yield "conv2d", lambda t, proj=proj: _projected(ops.conv2d(t["x"], t["conv.weight"], t["conv.bias"]), proj), p

    # SE
    p = {"x": uniform(feat)}
    p.update(_random_params(se_specs("se", C, C, k), seed, rng))
    proj = uniform(feat)
    yield "se", lambda t, proj=proj: _projected(se_forward(t["x"], SEParams.from_tensors(t, "se")), proj), p

    # RSE
    p = {"x": uniform(feat)}
    p.update(_random_params(rse_specs("rse", C, k), seed, rng))
    proj = uniform(feat)
    yield "rse", lambda t, proj=proj: _projected(rse_forward(t["x"], RSEParams.from_tensors(t, "rse")), proj), p

    # BSME
    p = {"f_prev": uniform(feat), "f_cur": uniform(feat), "x_extra": uniform(feat)}
    p.update(_random_params(bsme_specs("bsme", C, k, hyper.n), seed, rng))
    proj = uniform(feat)

    def f_bsme(t, proj=proj):
        return _projected(bsme_forward(t["f_prev"], t["f_cur"], t["x_extra"], BSMEParams.from_tensors(t, "bsme")), proj)

    yield "bsme", f_bsme, p

    # Level feature of a 3-node level
    p = {f"o{i}": uniform(feat) for i in range(3)}
    p.update(_random_params(conv_specs("traj", C, 3 * C, k), seed, rng))
    proj = uniform(feat)

    def f_level(t, proj=proj):
        outs = [t[f"o{i}"] for i in range(3)]
        return _projected(level_feature(outs, ConvParams.from_tensors(t, "traj")), proj)

    yield "level_feature", f_level, p

    # Aggregation over T-1 levels, the top level also feeds the weights
    n_levels = hyper.T - 1
    specs = {name: spec for name, spec in param_specs(hyper).items() if name.startswith("agg.")}
    p = {f"F{i}": uniform(feat) for i in range(n_levels)}
    p.update(_random_params(specs, seed, rng))
    proj = uniform(feat)

    def f_agg(t, proj=proj):
        feats = [t[f"F{i}"] for i in range(n_levels)]
        fcs = [ConvParams.from_tensors(t, f"agg.fc{i}") for i in (1, 2, 3)]
        return _projected(aggregate(feats, feats[-1], fcs), proj)

    yield "aggregate", f_agg, p

    # Encoder and decoders, through the full model parameter layout
    full_specs = param_specs(hyper)
    full = _random_params(full_specs, seed, rng)

    enc_names = [n for n in full_specs if n.startswith("encoder.")]
    p = {"x": uniform((B, 1, J, 3))}
    p.update({n: full[n] for n in enc_names})
    proj = uniform(feat)

    def f_encode(t, proj=proj):
        view = ModelView.from_tensors({**_constants(full), **t}, hyper)
        return _projected(encode(t["x"], view), proj)

    yield "encode", f_encode, p

    dec_names = [n for n in full_specs if n.startswith("decoder.")]
    p = {"F": uniform(feat)}
    p.update({n: full[n] for n in dec_names})
    proj = uniform((B, hyper.T_out, J, 3))

    def f_decode(t, proj=proj):
        view = ModelView.from_tensors({**_constants(full), **t}, hyper)
        return _projected(ops.concat_channels(decode(t["F"], view)), proj)

    yield "decode", f_decode, p

    # Full model with the training loss on top
    window = uniform((B, hyper.T, J, 3))
    gt = uniform((B, hyper.T_out, J, 3))
    weights = temporal_weights(hyper.T_out, 0.3, "exp")
    yield "model", lambda t: tw_mpjpe_loss(forward(window, t, hyper), gt, weights), dict(full)

    # Loss alone, with respect to the prediction
    p = {"pred": uniform((B, hyper.T_out, J, 3))}
    yield "tw_mpjpe_loss", lambda t: tw_mpjpe_loss(t["pred"], gt, weights), p


def _constants(arrays: dict) -> dict:
    return {name: Tensor(a) for name, a in arrays.items()}


def run_gradient_suite(seed: int = 0, exhaustive: bool = False, max_coords: int = DEFAULT_COORDS) -> dict:
    """
    Gradient check of every component of the network.

    Parameters
    ----------
    seed : int
        Seed of the random inputs, parameters and coordinate selection.
    exhaustive : bool
        Check every coordinate instead of a deterministic subsample.
    max_coords : int
        Coordinates checked per parameter tensor when not exhaustive.

    Returns
    -------
    dict
        Component name -> worst relative error.
    """

    results = {}
    for name, f, params in _component_cases(seed):
        results[name] = grad_check(
            f,
            params,
            eps=GRAD_EPS,
            max_coords_per_param=None if exhaustive else max_coords,
            seed=seed,
        )
    return results
