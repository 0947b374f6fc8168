# Initialize MPI
from mpi4py import MPI
comm = MPI.COMM_WORLD

import numpy as np
import pytest

from pymotiontools.autodiff.gradcheck import grad_check
from pymotiontools.autodiff.tensor import Tensor
from pymotiontools.errors import ConfigError, ShapeError
from pymotiontools.model.blocks import (
    BSMEParams,
    RSEParams,
    SEParams,
    bsme_forward,
    bsme_specs,
    rse_forward,
    rse_specs,
    se_forward,
    se_specs,
)
from pymotiontools.model.network import init_arrays

C = 4
J = 5
K = 3


def zero_arrays(specs):
    return {name: np.zeros(shape) for name, (shape, _) in specs.items()}


def random_arrays(specs, seed):
    rng = np.random.default_rng(seed)
    arrays = init_arrays(specs, seed, dtype=np.float64)
    for name, (shape, fan_in) in specs.items():
        if fan_in is None:
            arrays[name] = rng.uniform(-0.1, 0.1, size=shape)
    return arrays


def constants(arrays):
    return {name: Tensor(a) for name, a in arrays.items()}


def features(seed, shape=(2, C, J, 3)):
    return np.random.default_rng(seed).uniform(-1, 1, size=shape)


def make_identity_se(arrays, prefix, c):
    """conv_a and conv_b zero, skip the identity: the block passes its input through."""
    for name in list(arrays):
        if name.startswith(prefix + "."):
            arrays[name] = np.zeros_like(arrays[name])
    arrays[f"{prefix}.skip.weight"] = np.eye(c).reshape(c, c, 1, 1)


def test_se_zero_and_skip_isolation():

    specs = se_specs("se", C, C, K)
    x = features(0)

    y0 = se_forward(Tensor(x), SEParams.from_tensors(constants(zero_arrays(specs)), "se"))

    arrays = zero_arrays(specs)
    make_identity_se(arrays, "se", C)
    y1 = se_forward(Tensor(x), SEParams.from_tensors(constants(arrays), "se"))

    t1 = np.all(y0.data == 0)
    t2 = np.array_equal(y1.data, x)
    t3 = y1.shape == x.shape

    passed = np.all([t1, t2, t3])

    assert passed


def test_se_channel_mismatch():

    specs = se_specs("se", C, C, K)
    p = SEParams.from_tensors(constants(zero_arrays(specs)), "se")
    with pytest.raises(ShapeError):
        se_forward(Tensor(np.zeros((1, C + 1, J, 3))), p)


def test_se_gradient():

    errors = []
    for seed in range(3):
        params = random_arrays(se_specs("se", C, C, K), seed)
        params["x"] = features(seed)
        proj = Tensor(features(seed + 100))

        def f(t):
            from pymotiontools.autodiff import ops
            return ops.sum_all(ops.mul(se_forward(t["x"], SEParams.from_tensors(t, "se")), proj))

        errors.append(grad_check(f, params, eps=1e-3, max_coords_per_param=10, seed=seed))

    assert np.max(errors) < 1e-3


def test_rse_bookkeeping():

    specs = rse_specs("rse", C, K)
    x = features(1)

    y0 = rse_forward(Tensor(x), RSEParams.from_tensors(constants(zero_arrays(specs)), "rse"))

    trace = {}
    y1 = rse_forward(Tensor(x), RSEParams.from_tensors(constants(random_arrays(specs, 0)), "rse"), trace=trace)

    t1 = np.all(y0.data == 0)
    t2 = trace["reduced"].shape[1] == C // 2
    t3 = trace["inner1"].shape[1] == C // 2 and trace["inner2"].shape[1] == C // 2
    t4 = y1.shape == x.shape

    passed = np.all([t1, t2, t3, t4])

    assert passed

    with pytest.raises(ConfigError):
        rse_specs("rse", 5, K)


def test_rse_gradient():

    from pymotiontools.autodiff import ops

    params = random_arrays(rse_specs("rse", C, K), 2)
    params["x"] = features(2)
    proj = Tensor(features(3))

    def f(t):
        return ops.sum_all(ops.mul(rse_forward(t["x"], RSEParams.from_tensors(t, "rse")), proj))

    assert grad_check(f, params, eps=1e-3, max_coords_per_param=10, seed=2) < 1e-3


def test_bsme_tied_stacks_give_zero_motion_input():

    n = 2
    arrays = random_arrays(bsme_specs("b", C, K, n), 4)
    # Tie the spatial pathways: same SEs, and the extra previous-pathway SE passes through
    for i in range(n):
        for suffix in ("conv_a.weight", "conv_a.bias", "conv_b.weight", "conv_b.bias", "skip.weight", "skip.bias"):
            arrays[f"b.prev.se{i}.{suffix}"] = arrays[f"b.cur.se{i}.{suffix}"]
    make_identity_se(arrays, f"b.prev.se{n}", C)

    f = features(5)
    trace = {}
    bsme_forward(Tensor(f), Tensor(f), Tensor(features(6)), BSMEParams.from_tensors(constants(arrays), "b"), trace=trace)

    assert np.all(trace["motion_input"].data == 0)


def test_bsme_zero_params_and_extra_interface():

    n = 2
    specs = bsme_specs("b", C, K, n)
    y0 = bsme_forward(
        Tensor(features(0)), Tensor(features(1)), Tensor(features(2)), BSMEParams.from_tensors(constants(zero_arrays(specs)), "b")
    )

    arrays = random_arrays(specs, 7)
    arrays["b.shortcut_extra.weight"] = np.zeros_like(arrays["b.shortcut_extra.weight"])
    p = BSMEParams.from_tensors(constants(arrays), "b")
    ya = bsme_forward(Tensor(features(0)), Tensor(features(1)), Tensor(features(2)), p)
    yb = bsme_forward(Tensor(features(0)), Tensor(features(1)), Tensor(features(3) * 10), p)

    t1 = np.all(y0.data == 0)
    t2 = np.array_equal(ya.data, yb.data)
    t3 = ya.shape == (2, C, J, 3)

    passed = np.all([t1, t2, t3])

    assert passed


def test_bsme_shape_mismatch():

    specs = bsme_specs("b", C, K, 1)
    p = BSMEParams.from_tensors(constants(zero_arrays(specs)), "b")
    with pytest.raises(ShapeError):
        bsme_forward(Tensor(np.zeros((1, C, J, 3))), Tensor(np.zeros((1, C, J, 3))), Tensor(np.zeros((1, C, J + 1, 3))), p)


def test_bsme_parameter_audit():

    n = 2
    specs = bsme_specs("b", C, K, n)
    arrays = init_arrays(specs, 0)
    p = BSMEParams.from_tensors(constants(arrays), "b")

    motion = [t.data for se in p.motion_stack for conv in (se.conv_a, se.conv_b, se.skip) for t in (conv.weight, conv.bias)]
    spatial = [t.data for se in p.prev_stack + p.cur_stack for conv in (se.conv_a, se.conv_b, se.skip) for t in (conv.weight, conv.bias)]
    shared = [np.shares_memory(a, b) for a in motion for b in spatial]

    t1 = len(p.prev_stack) == n + 1 and len(p.cur_stack) == n and len(p.motion_stack) == n
    t2 = not np.any(shared)
    t3 = not p.rc_off

    rc_specs = bsme_specs("b", C, K, n, rc_off=True)
    t4 = not any("shortcut" in name for name in rc_specs)

    # Without the extra interface there is no shortcut for it, and x_extra has no effect
    ei_specs = bsme_specs("b", C, K, n, ei_off=True)
    p_ei = BSMEParams.from_tensors(constants(random_arrays(ei_specs, 1)), "b")
    ya = bsme_forward(Tensor(features(0)), Tensor(features(1)), Tensor(features(2)), p_ei)
    yb = bsme_forward(Tensor(features(0)), Tensor(features(1)), Tensor(features(3)), p_ei)
    t5 = "b.shortcut_prev.weight" in ei_specs and not any("shortcut_extra" in name for name in ei_specs)
    t6 = p_ei.shortcut_extra is None and not p_ei.rc_off
    t7 = np.array_equal(ya.data, yb.data)

    passed = np.all([t1, t2, t3, t4, t5, t6, t7])

    assert passed

    with pytest.raises(ConfigError):
        bsme_specs("b", C, K, 0)


@pytest.mark.parametrize("rc_off", [False, True])
def test_bsme_gradient(rc_off):

    from pymotiontools.autodiff import ops

    params = random_arrays(bsme_specs("b", C, K, 2, rc_off=rc_off), 8)
    params.update(f_prev=features(10), f_cur=features(11), x_extra=features(12))
    proj = Tensor(features(13))

    def f(t):
        p = BSMEParams.from_tensors(t, "b")
        return ops.sum_all(ops.mul(bsme_forward(t["f_prev"], t["f_cur"], t["x_extra"], p), proj))

    err = grad_check(f, params, eps=1e-3, max_coords_per_param=6, seed=8)

    assert err < 1e-3
