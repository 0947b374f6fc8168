#!/usr/bin/env python3

from mpi4py import MPI

from ..datatypes.skeleton import apply_preprocess, preprocess_dataset, split_sequences, stack_windows, window
from ..errors import DataError
from ..io.csv_io import load_dataset
from ..metrics.losses import LOSS_VARIANTS, temporal_weights
from ..monitoring.logger import Logger
from ..training.trainer import dataset_loss, train, write_loss_history
from .config import CliParser, RunConfig, run_guarded

ABLATIONS = ("ted", "amg", "rc", "ei")


def build_parser():
    parser = CliParser(prog="pymotiontools_train", description="Train a motion prediction model.")
    parser.add_argument("--config", type=str, default=None, help="key=value configuration file.")
    parser.add_argument("--data", type=str, required=True, help="Folder with the skeleton CSV files.")
    parser.add_argument("--out", type=str, required=True, help="Checkpoint to write.")
    parser.add_argument("--seed", type=int, default=None, help="Seed of initialization and batching.")
    parser.add_argument("--loss", type=str, choices=LOSS_VARIANTS, default=None, help="Step weighting of the loss.")
    parser.add_argument("--ablate", type=str, choices=ABLATIONS, action="append", default=[], help="Switch a component off. Repeatable.")
    parser.add_argument("--steps", type=int, default=None, help="Number of optimizer steps.")
    parser.add_argument("--learning-rate", type=float, default=None, help="Adam learning rate.")
    parser.add_argument("--batch-size", type=int, default=None, help="Windows per step.")
    parser.add_argument("--root", type=int, default=None, help="Index of the root joint.")
    parser.add_argument("--history", type=str, default=None, help="Loss history CSV, <out>.history.csv by default.")
    return parser


def windows_of(seqs, config):
    out = []
    for seq in seqs:
        out.extend(window(seq, config.T, config.T_out, config.stride))
    return out


def main(argv=None) -> int:
    comm = MPI.COMM_WORLD
    log = Logger(comm=comm, module_name="train")

    args = build_parser().parse_args(argv)

    def command():
        rc = RunConfig.from_file(args.config) if args.config else RunConfig()
        overrides = {
            "seed": args.seed,
            "loss": args.loss,
            "steps": args.steps,
            "learning_rate": args.learning_rate,
            "batch_size": args.batch_size,
            "root": args.root,
        }
        overrides.update({f"{name}_off": True for name in args.ablate})
        config = rc.merged(overrides).train_config()

        seqs = load_dataset(comm, args.data, logger=log)
        train_seqs, val_seqs, _ = split_sequences(seqs)
        train_seqs, meta = preprocess_dataset(train_seqs, root=config.root)
        val_seqs = [apply_preprocess(s, meta) for s in val_seqs]
        log.write("info", f"Kept {len(meta.kept)} of {meta.n_joints} joints, dropped {meta.dropped}, coordinate scale {meta.scale:.6g}")

        train_windows = windows_of(train_seqs, config)
        if len(train_windows) == 0:
            raise DataError(f"No training window of {config.T + config.T_out} frames could be cut from {args.data}")
        val_windows = windows_of(val_seqs, config)

        result = train(config, train_windows, comm=comm, checkpoint_path=args.out, logger=log)

        if comm.Get_rank() == 0:
            write_loss_history(args.history or f"{args.out}.history.csv", result.history)
            meta.save(f"{args.out}.prep.json")

        # Reported in the units of the data, the loss history stays in preprocessed units
        weights = temporal_weights(config.T_out, config.alpha, config.loss)
        train_loss = meta.scale * dataset_loss(result.params, *stack_windows(train_windows), weights)
        val_text = "n/a"
        if val_windows:
            val_text = f"{meta.scale * dataset_loss(result.params, *stack_windows(val_windows), weights):.6g}"

        if comm.Get_rank() == 0:
            print(f"train TW-MPJPE: {train_loss:.6g}")
            print(f"val TW-MPJPE: {val_text}")

    return run_guarded(command, log)


if __name__ == "__main__":
    raise SystemExit(main())
