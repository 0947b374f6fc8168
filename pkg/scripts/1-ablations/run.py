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


def windows_of(seqs, T, T_out):
    out = []
    for seq in seqs:
        out.extend(window(seq, T, T_out))
    return out


def main():

    log = Logger(comm=comm, module_name="ablations")

    # Read inputs
    with open("inputs.json", "r") as f:
        inputs = json.load(f)

    d = inputs["data"]
    seqs = synth_generate(d["sequences"], d["frames"], d["joints"], d["seed"])
    train_seqs, _, test_seqs = split_sequences(seqs)
    train_seqs, meta = preprocess_dataset(train_seqs)
    test_seqs = [apply_preprocess(s, meta) for s in test_seqs]

    t = inputs["training"]
    train_windows = windows_of(train_seqs, t["T"], t["T_out"])
    test_in, test_gt = stack_windows(windows_of(test_seqs, t["T"], t["T_out"]))

    horizons = inputs["horizons_ms"]
    lines = ["variant," + ",".join(f"{ms}ms" for ms in horizons)]

    runs = [(variant, {} if variant == "full" else {f"{variant}_off": True}) for variant in inputs["variants"]]
    runs += [(f"n={n}", {"n": n}) for n in inputs["stack_lengths"]]

    for variant, flags in runs:
        config = TrainConfig(log_interval=0, **{**t, **flags})

        log.write("info", f"Training variant {variant}")
        result = train(config, train_windows, comm=comm, logger=log)
        rows = evaluate_windows(comm, result.params, test_in, test_gt, horizons, scale=meta.scale)

        lines.append(variant + "," + ",".join(f"{r.model:.3f}" for r in rows))
        log.write("info", f"{variant}: " + ", ".join(f"{r.ms} ms {r.model:.3f}" for r in rows))

    if comm.Get_rank() == 0:
        atomic_write(inputs["outputs"]["table"], "\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
