#!/usr/bin/env python3

import io
import os

from mpi4py import MPI

from ..datatypes.skeleton import PreprocessMeta, apply_preprocess, preprocess_dataset, split_sequences, stack_windows, window
from ..errors import ConfigError, DataError
from ..io.csv_io import load_dataset
from ..io.utils import atomic_write
from ..metrics.evaluation import check_horizons, evaluate_windows
from ..monitoring.logger import Logger
from ..training.checkpoint import load_checkpoint
from .config import CliParser, run_guarded

SPLITS = ("all", "train", "val", "test")
COLUMNS = ("ms", "frame", "model_mpjpe", "zero_velocity_mpjpe", "constant_velocity_mpjpe")


def parse_horizons(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"Horizons must be a comma separated list of integers, got '{text}'") from None


def format_table(rows) -> str:
    """CSV text of the evaluation rows."""

    out = io.StringIO()
    out.write(",".join(COLUMNS) + "\n")
    for r in rows:
        out.write(f"{r.ms},{r.frame},{r.model:.6f},{r.zero_velocity:.6f},{r.constant_velocity:.6f}\n")
    return out.getvalue()


def build_parser():
    parser = CliParser(prog="pymotiontools_eval", description="MPJPE of a trained model and of the baselines.")
    parser.add_argument("--ckpt", type=str, required=True, help="Checkpoint to evaluate.")
    parser.add_argument("--data", type=str, required=True, help="Folder with the skeleton CSV files.")
    parser.add_argument("--horizons-ms", type=str, default="80,160,320,400", help="Comma separated horizons in ms.")
    parser.add_argument("--out", type=str, required=True, help="CSV table to write.")
    parser.add_argument("--split", type=str, choices=SPLITS, default="all", help="Which sequences to evaluate on.")
    parser.add_argument("--stride", type=int, default=1, help="Stride between evaluation windows.")
    parser.add_argument("--root", type=int, default=0, help="Root joint, used when there is no preprocessing file.")
    return parser


def main(argv=None) -> int:
    comm = MPI.COMM_WORLD
    log = Logger(comm=comm, module_name="eval")

    args = build_parser().parse_args(argv)

    def command():
        params = load_checkpoint(args.ckpt)
        hyper = params.hyper
        horizons = parse_horizons(args.horizons_ms)
        check_horizons(horizons, hyper.T_out)

        seqs = load_dataset(comm, args.data, logger=log)
        if args.split != "all":
            seqs = dict(zip(("train", "val", "test"), split_sequences(seqs)))[args.split]
        if len(seqs) == 0:
            raise DataError(f"The {args.split} split of {args.data} is empty")

        meta_path = f"{args.ckpt}.prep.json"
        if os.path.exists(meta_path):
            meta = PreprocessMeta.load(meta_path)
            seqs = [apply_preprocess(s, meta) for s in seqs]
        else:
            seqs, meta = preprocess_dataset(seqs, root=args.root)
        if len(meta.kept) != hyper.N_j:
            raise DataError(f"The data has {len(meta.kept)} joints after preprocessing, the model expects {hyper.N_j}")

        windows = []
        for seq in seqs:
            windows.extend(window(seq, hyper.T, hyper.T_out, args.stride, logger=log))
        if len(windows) == 0:
            raise DataError(f"No evaluation window of {hyper.T + hyper.T_out} frames could be cut")

        inputs, targets = stack_windows(windows)
        rows = evaluate_windows(comm, params, inputs, targets, horizons, scale=meta.scale)
        table = format_table(rows)

        if comm.Get_rank() == 0:
            atomic_write(args.out, table)
            print(table, end="")

    return run_guarded(command, log)


if __name__ == "__main__":
    raise SystemExit(main())
