# Initialize MPI
from mpi4py import MPI
comm = MPI.COMM_WORLD

import zlib

import numpy as np
import pytest

from pymotiontools.datatypes.skeleton import apply_preprocess, preprocess_dataset, split_sequences, stack_windows, window
from pymotiontools.datatypes.synthetic import synth_generate
from pymotiontools.errors import CheckpointError, ConfigError, ContractError, HyperparameterError, NumericError
from pymotiontools.metrics.evaluation import evaluate_windows
from pymotiontools.model.network import ModelHyper, ModelParams
from pymotiontools.training.adam import AdamState, adam_step
from pymotiontools.training.checkpoint import MAGIC, checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint
from pymotiontools.training.trainer import TrainConfig, batch_indices, train, write_loss_history

TINY = dict(T=4, T_out=2, C=8, k=3)
SMALL = dict(T=10, T_out=10, C=16)
HORIZONS_MS = [40 * i for i in range(1, 11)]


def with_crc(body):
    return body + np.array([zlib.crc32(body)], dtype="<u4").tobytes()


def tiny_dataset(n_windows=1, n_joints=4, seed=0):
    rng = np.random.default_rng(seed)
    inputs = rng.uniform(-1, 1, (n_windows, TINY["T"], n_joints, 3)).astype(np.float32)
    targets = rng.uniform(-1, 1, (n_windows, TINY["T_out"], n_joints, 3)).astype(np.float32)
    return inputs, targets


def synthetic_windows(seqs, meta=None, stride=1):
    """Preprocessed windows of SMALL, fitting the preprocessing if meta is None."""
    if meta is None:
        seqs, meta = preprocess_dataset(seqs)
    else:
        seqs = [apply_preprocess(s, meta) for s in seqs]
    windows = [w for s in seqs for w in window(s, SMALL["T"], SMALL["T_out"], stride)]
    return stack_windows(windows), meta


def test_adam_first_step():

    params = {"w": np.zeros(3, dtype=np.float32), "z": np.ones(2, dtype=np.float32)}
    grads = {"w": np.array([1.0, -2.0, 0.5]), "z": np.zeros(2)}
    state = AdamState(learning_rate=1e-4)
    adam_step(params, grads, state)

    t1 = np.allclose(params["w"], [-1e-4, 1e-4, -1e-4], rtol=1e-3)
    t2 = np.array_equal(params["z"], np.ones(2, dtype=np.float32))
    t3 = state.step == 1 and params["w"].dtype == np.float32

    passed = np.all([t1, t2, t3])

    assert passed


def test_adam_contracts():

    params = {"a": np.zeros(2), "b": np.zeros(2)}
    with pytest.raises(ContractError):
        adam_step(params, {"a": np.ones(2)}, AdamState())
    with pytest.raises(ContractError):
        adam_step(params, {"a": np.ones(2), "b": np.ones(3)}, AdamState())


def test_adam_is_deterministic():

    rng = np.random.default_rng(0)
    grads = [{"w": rng.standard_normal((4, 4)).astype(np.float32)} for _ in range(5)]

    runs = []
    for _ in range(2):
        params = {"w": np.full((4, 4), 0.5, dtype=np.float32)}
        state = AdamState(learning_rate=1e-2)
        for g in grads:
            adam_step(params, g, state)
        runs.append(params["w"])

    assert runs[0].tobytes() == runs[1].tobytes()


@pytest.mark.parametrize("g, match", [(1e30, "overflow"), (np.nan, "not finite"), (np.inf, "not finite")])
def test_adam_rejects_non_finite_updates(g, match):

    params = {"w": np.ones(3, dtype=np.float32)}
    grads = {"w": np.array([0.0, g, 1.0])}

    with pytest.raises(NumericError, match=f"{match}.*step 1"):
        adam_step(params, grads, AdamState())


def test_batch_indices():

    batches = batch_indices(5, 2, 6, seed=0)
    epoch = np.concatenate(batches[:3])

    t1 = [len(b) for b in batches] == [2, 2, 1, 2, 2, 1]
    t2 = sorted(epoch.tolist()) == [0, 1, 2, 3, 4]
    t3 = all(np.array_equal(a, b) for a, b in zip(batches, batch_indices(5, 2, 6, seed=0)))

    passed = np.all([t1, t2, t3])

    assert passed


def test_train_zero_steps_returns_initialization():

    config = TrainConfig(steps=0, seed=3, **TINY)
    result = train(config, tiny_dataset(), comm=comm)
    init = ModelParams.init(config.model_hyper(4), seed=3)

    t1 = result.history == []
    t2 = all(np.array_equal(result.params.arrays[n], init.arrays[n]) for n in init.names())

    assert t1 and t2


def test_train_history_and_determinism():

    config = TrainConfig(steps=3, batch_size=2, seed=1, **TINY)
    data = tiny_dataset(n_windows=3)
    a = train(config, data, comm=comm)
    b = train(config, data, comm=comm)

    t1 = len(a.history) == 3 and all(np.isfinite(a.history))
    t2 = a.history == b.history
    t3 = all(a.params.arrays[n].tobytes() == b.params.arrays[n].tobytes() for n in a.params.names())

    passed = np.all([t1, t2, t3])

    assert passed


def test_train_overfits_one_window():

    config = TrainConfig(steps=200, batch_size=1, learning_rate=1e-2, seed=0, log_interval=0, **TINY)
    result = train(config, tiny_dataset(n_windows=1, seed=4), comm=comm)

    assert result.history[-1] < 0.05 * result.history[0]


def test_train_loss_settles_on_a_repeated_batch():

    config = TrainConfig(steps=300, batch_size=1, seed=0, log_interval=0, **TINY)
    history = np.array(train(config, tiny_dataset(n_windows=1, seed=5), comm=comm).history)

    after = history[100:]
    upticks = after[1:] / after[:-1]
    windows = after[50:] / after[:-50]

    t1 = np.all(upticks <= 1.05)
    t2 = np.all(windows <= 1.05)
    t3 = history[-1] < history[0]

    passed = np.all([t1, t2, t3])

    assert passed


def test_train_on_millimeter_data_stays_finite():

    # Raw synthetic poses, not preprocessed, hundreds of millimeters in size
    windows = [w for s in synth_generate(4, 20, 8, seed=1) for w in window(s, SMALL["T"], SMALL["T_out"])]
    inputs, targets = stack_windows(windows)
    config = TrainConfig(steps=5, batch_size=4, learning_rate=1e-3, seed=0, log_interval=0, **SMALL)

    result = train(config, (inputs, targets), comm=comm)

    t1 = len(result.history) == 5 and np.all(np.isfinite(result.history))
    t2 = all(np.all(np.isfinite(a)) for a in result.params.arrays.values())

    assert t1 and t2


@pytest.mark.parametrize(
    "variant",
    [
        {"ted_off": True},
        {"amg_off": True},
        {"rc_off": True},
        {"ei_off": True},
        {"loss": "linear"},
        {"loss": "uniform"},
    ],
)
def test_variants_train_with_finite_metrics(variant):

    (inputs, targets), meta = synthetic_windows(synth_generate(4, 24, 8, seed=2), stride=2)
    config = TrainConfig(steps=100, batch_size=4, learning_rate=1e-3, seed=0, log_interval=0, **{**SMALL, "C": 8, **variant})

    result = train(config, (inputs, targets), comm=comm)
    rows = evaluate_windows(comm, result.params, inputs, targets, HORIZONS_MS, scale=meta.scale)

    t1 = len(result.history) == 100 and np.all(np.isfinite(result.history))
    t2 = len(rows) == 10 and all(np.isfinite([r.model, r.zero_velocity, r.constant_velocity]).all() for r in rows)

    assert t1 and t2


@pytest.mark.slow
def test_overfit_eight_synthetic_windows():

    (inputs, targets), meta = synthetic_windows(synth_generate(8, 20, 8, seed=0))
    config = TrainConfig(steps=500, batch_size=8, learning_rate=1e-3, seed=0, log_interval=0, **SMALL)

    result = train(config, (inputs, targets), comm=comm)
    rows = evaluate_windows(comm, result.params, inputs, targets, HORIZONS_MS, scale=meta.scale)

    t1 = inputs.shape == (8, 10, 8, 3)
    t2 = result.history[-1] <= 0.1 * result.history[0]
    t3 = all(r.model < r.zero_velocity for r in rows)

    passed = np.all([t1, t2, t3])

    assert passed


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_generalizes_to_held_out_sequences(seed):

    train_seqs, _, test_seqs = split_sequences(synth_generate(64, 40, 8, seed=seed))
    (inputs, targets), meta = synthetic_windows(train_seqs)
    (test_in, test_gt), _ = synthetic_windows(test_seqs, meta=meta)
    config = TrainConfig(steps=2000, batch_size=16, learning_rate=1e-3, seed=seed, log_interval=0, **SMALL)

    result = train(config, (inputs, targets), comm=comm)
    row = evaluate_windows(comm, result.params, test_in, test_gt, [400], scale=meta.scale)[0]

    assert row.model <= 0.8 * row.zero_velocity


def test_train_rejects_non_finite_loss():

    inputs, targets = tiny_dataset()
    inputs[0, 0, 0, 0] = np.nan
    config = TrainConfig(steps=5, **TINY)

    with pytest.raises(NumericError, match="step 1"):
        train(config, (inputs, targets), comm=comm)


def test_train_config_validation():

    with pytest.raises(ConfigError):
        TrainConfig(loss="cubic")
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)
    with pytest.raises(ConfigError):
        TrainConfig(N_j=5, **TINY).model_hyper(4)
    with pytest.raises(ConfigError):
        train(TrainConfig(steps=1, T=5, T_out=2, C=8), tiny_dataset(), comm=comm)


def test_checkpoint_roundtrip(tmp_path):

    hyper = ModelHyper(T=5, T_out=3, N_j=4, C=4, amg_off=True, ei_off=True)
    params = ModelParams.init(hyper, seed=2)
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(path, params)

    loaded = load_checkpoint(path)
    again = str(tmp_path / "again.ckpt")
    save_checkpoint(again, loaded)

    with open(path, "rb") as f:
        first = f.read()
    with open(again, "rb") as f:
        second = f.read()

    t1 = first == second
    t2 = first.startswith(MAGIC)
    t3 = loaded.hyper.as_dict() == hyper.as_dict()
    t4 = all(np.array_equal(loaded.arrays[n], params.arrays[n]) for n in params.names())
    t5 = load_checkpoint(path, hyper=hyper).count() == params.count()

    passed = np.all([t1, t2, t3, t4, t5])

    assert passed


def test_checkpoint_rejections():

    hyper = ModelHyper(T=4, T_out=2, N_j=3, C=2)
    data = checkpoint_bytes(ModelParams.init(hyper, seed=0))
    body = data[:-4]

    corrupted = bytearray(data)
    corrupted[len(data) // 2] ^= 0xFF

    with pytest.raises(CheckpointError, match="checksum"):
        parse_checkpoint(bytes(corrupted))
    with pytest.raises(CheckpointError, match="magic"):
        parse_checkpoint(b"XXXXXX" + data[6:])
    with pytest.raises(CheckpointError, match="truncated"):
        parse_checkpoint(with_crc(body[:-10]))
    with pytest.raises(CheckpointError, match="trailing"):
        parse_checkpoint(with_crc(body + b"\x00\x00"))
    with pytest.raises(CheckpointError, match="Unknown parameter"):
        parse_checkpoint(with_crc(body.replace(b"encoder.input.bias", b"encoder.input.bixs", 1)))
    with pytest.raises(HyperparameterError):
        parse_checkpoint(data, hyper=ModelHyper(T=4, T_out=2, N_j=3, C=4))

    # A hyperparameter mismatch is still a checkpoint error
    assert issubclass(HyperparameterError, CheckpointError)


def test_train_writes_checkpoint(tmp_path):

    path = str(tmp_path / "run.ckpt")
    config = TrainConfig(steps=2, save_interval=1, **TINY)
    result = train(config, tiny_dataset(), comm=comm, checkpoint_path=path)
    loaded = load_checkpoint(path, hyper=config.model_hyper(4))

    assert all(np.array_equal(loaded.arrays[n], result.params.arrays[n]) for n in loaded.names())


def test_loss_history_file(tmp_path):

    path = str(tmp_path / "history.csv")
    write_loss_history(path, [2.5, 1.25])
    with open(path) as f:
        lines = f.read().splitlines()

    assert lines == ["step,loss", "1,2.5", "2,1.25"]
