# Initialize MPI
from mpi4py import MPI
comm = MPI.COMM_WORLD

import numpy as np
import pytest

from pymotiontools.autodiff.tensor import Tape, Tensor
from pymotiontools.errors import ConfigError, DataError, ShapeError
from pymotiontools.metrics.evaluation import check_horizons, evaluate_windows
from pymotiontools.metrics.losses import (
    available_horizons,
    constant_velocity_baseline,
    horizon_frame,
    mpjpe,
    mpjpe_curve,
    temporal_weights,
    tw_mpjpe,
    tw_mpjpe_loss,
    zero_velocity_baseline,
)
from pymotiontools.model.network import ModelHyper, ModelParams, predict


def test_temporal_weights():

    w25 = temporal_weights(25, alpha=0.3).w
    w2 = temporal_weights(2, alpha=0.3).w
    lin = temporal_weights(4, variant="linear").w
    uni = temporal_weights(5, variant="uniform").w
    flat = temporal_weights(3, alpha=0.0).w

    t1 = abs(np.sum(w25) - 1) < 1e-12 and np.all(w25 > 0)
    t2 = np.all(np.diff(w25) < 0)
    t3 = np.allclose(w25[1:] / w25[:-1], np.exp(-0.3))
    t4 = np.allclose(w2, [0.5744, 0.4256], atol=1e-4)
    t5 = np.allclose(lin, np.array([4, 3, 2, 1]) / 10)
    t6 = np.allclose(uni, 0.2) and np.allclose(flat, 1 / 3)

    passed = np.all([t1, t2, t3, t4, t5, t6])

    assert passed

    with pytest.raises(ConfigError):
        temporal_weights(0)
    with pytest.raises(ConfigError):
        temporal_weights(3, variant="quadratic")


def test_loss_oracles():

    weights = temporal_weights(2, alpha=0.3)
    gt = np.zeros((1, 2, 1, 3))

    pred = np.zeros((1, 2, 1, 3))
    pred[0, 0, 0] = [3.0, 4.0, 0.0]
    shifted = np.ones((2, 2, 3, 3))

    t1 = tw_mpjpe_loss(Tensor(gt), gt, weights).data.item() == 0.0
    t2 = np.isclose(tw_mpjpe_loss(Tensor(pred), gt, weights).data.item(), 25 * weights.w[0])
    t3 = np.isclose(tw_mpjpe(pred, gt, weights), 25 * weights.w[0])
    # Shifting every coordinate by 1 gives a squared distance of 3 for every joint
    t4 = np.isclose(tw_mpjpe_loss(Tensor(shifted), np.zeros_like(shifted), weights).data.item(), 3.0)
    t5 = tw_mpjpe_loss(Tensor(pred), gt, weights).shape == (1, 1, 1, 1)

    passed = np.all([t1, t2, t3, t4, t5])

    assert passed

    with pytest.raises(ShapeError):
        tw_mpjpe_loss(Tensor(np.zeros((1, 3, 1, 3))), np.zeros((1, 3, 1, 3)), weights)


def test_loss_gradient_matches_closed_form():

    rng = np.random.default_rng(0)
    weights = temporal_weights(3)
    pred = rng.uniform(-1, 1, (2, 3, 4, 3))
    gt = rng.uniform(-1, 1, (2, 3, 4, 3))

    tape = Tape()
    p = tape.watch(pred)
    (g,) = tape.backward(tw_mpjpe_loss(p, gt, weights), [p])

    expected = 2 * (pred - gt) * weights.w[None, :, None, None] / (2 * 4)

    assert np.allclose(g, expected)


def test_mpjpe():

    gt = np.zeros((1, 2, 2, 3))
    pred = np.zeros((1, 2, 2, 3))
    pred[0, 0, 0] = [3.0, 4.0, 0.0]

    single = np.zeros((3, 2, 3))
    single_pred = single + np.array([0.0, 0.0, 2.0])

    t1 = mpjpe(pred, gt, 1) == 2.5
    t2 = mpjpe(pred, gt, 2) == 0.0
    t3 = mpjpe_curve(pred, gt).shape == (1, 2)
    t4 = np.isclose(mpjpe(single_pred, single, 3), 2.0)

    passed = np.all([t1, t2, t3, t4])

    assert passed

    with pytest.raises(ConfigError):
        mpjpe(pred, gt, 3)
    with pytest.raises(ConfigError):
        mpjpe(pred, gt, 0)


def test_baselines():

    window = np.zeros((2, 3, 2, 3))
    window[:, 1] = 1.0
    window[:, 2] = 3.0

    zv = zero_velocity_baseline(window, 4)
    cv = constant_velocity_baseline(window, 4)
    single = constant_velocity_baseline(window[0], 2)

    t1 = zv.shape == (2, 4, 2, 3) and np.all(zv == 3.0)
    t2 = cv.shape == (2, 4, 2, 3)
    t3 = np.allclose(cv[:, :, 0, 0], [[5, 7, 9, 11]] * 2)
    t4 = single.shape == (2, 2, 3) and np.allclose(single[:, 0, 0], [5, 7])

    passed = np.all([t1, t2, t3, t4])

    assert passed

    with pytest.raises(ConfigError):
        constant_velocity_baseline(window[:, :1], 2)


def test_horizons():

    t1 = horizon_frame(80) == 2 and horizon_frame(1000) == 25
    t2 = available_horizons(10) == (80, 160, 320, 400)
    t3 = available_horizons(25) == (80, 160, 320, 400, 560, 1000)
    t4 = check_horizons([80, 400], 10) == [2, 10]

    passed = np.all([t1, t2, t3, t4])

    assert passed

    with pytest.raises(ConfigError):
        horizon_frame(50)
    with pytest.raises(ConfigError, match="400"):
        check_horizons([560], 10)


def test_evaluate_windows():

    hyper = ModelHyper(T=4, T_out=3, N_j=3, C=2)
    params = ModelParams.init(hyper, seed=0)
    rng = np.random.default_rng(1)
    inputs = rng.uniform(-1, 1, (5, 4, 3, 3)).astype(np.float32)
    targets = rng.uniform(-1, 1, (5, 3, 3, 3)).astype(np.float32)

    rows = evaluate_windows(comm, params, inputs, targets, [40, 120])

    model = mpjpe_curve(predict(params, inputs), targets).mean(axis=0)
    zv = mpjpe_curve(zero_velocity_baseline(inputs, 3), targets).mean(axis=0)
    cv = mpjpe_curve(constant_velocity_baseline(inputs, 3), targets).mean(axis=0)

    t1 = [r.ms for r in rows] == [40, 120] and [r.frame for r in rows] == [1, 3]
    t2 = np.allclose([r.model for r in rows], model[[0, 2]], rtol=1e-5)
    t3 = np.allclose([r.zero_velocity for r in rows], zv[[0, 2]])
    t4 = np.allclose([r.constant_velocity for r in rows], cv[[0, 2]])
    scaled = evaluate_windows(comm, params, inputs, targets, [40, 120], scale=250.0)
    t5 = np.allclose([r.model for r in scaled], 250.0 * np.array([r.model for r in rows]))

    passed = np.all([t1, t2, t3, t4, t5])

    assert passed

    with pytest.raises(DataError):
        evaluate_windows(comm, params, inputs[:0], targets[:0], [40])
