# Import required modules
from mpi4py import MPI
import json

# Get mpi info
comm = MPI.COMM_WORLD

# Import the pymotiontools routines
from pymotiontools.datatypes.skeleton import apply_preprocess, preprocess_dataset, split_sequences, stack_windows, window
from pymotiontools.datatypes.synthetic import synth_generate
from pymotiontools.io.utils import atomic_write
from pymotiontools.metrics.evaluation import evaluate_windows
from pymotiontools.monitoring.logger import Logger
from pymotiontools.training.trainer import TrainConfig, train


def main():

    log = Logger(comm=comm, module_name="loss_weighting")

    # Read inputs
    with open("inputs.json", "r") as f:
        inputs = json.load(f)

    d = inputs["data"]
    t = inputs["training"]
    seqs = synth_generate(d["sequences"], d["frames"], d["joints"], d["seed"])
    train_seqs, _, test_seqs = split_sequences(seqs)
    train_seqs, meta = preprocess_dataset(train_seqs)
    test_seqs = [apply_preprocess(s, meta) for s in test_seqs]

    train_windows = [w for s in train_seqs for w in window(s, t["T"], t["T_out"])]
    test_in, test_gt = stack_windows([w for s in test_seqs for w in window(s, t["T"], t["T_out"])])

    horizons = inputs["horizons_ms"]
    lines = ["loss,alpha," + ",".join(f"{ms}ms" for ms in horizons)]

    for weighting in inputs["weightings"]:
        config = TrainConfig(log_interval=0, **t, **weighting)
        result = train(config, train_windows, comm=comm, logger=log)
        rows = evaluate_windows(comm, result.params, test_in, test_gt, horizons, scale=meta.scale)

        lines.append(f"{config.loss},{config.alpha}," + ",".join(f"{r.model:.3f}" for r in rows))
        log.write("info", f"{config.loss} alpha={config.alpha}: " + ", ".join(f"{r.ms} ms {r.model:.3f}" for r in rows))

    if comm.Get_rank() == 0:
        atomic_write(inputs["outputs"]["table"], "\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
