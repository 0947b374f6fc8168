#!/usr/bin/env python3

import os

from mpi4py import MPI

from ..datatypes.skeleton import PreprocessMeta, apply_preprocess, preprocess, restore_joints
from ..errors import DataError
from ..io.csv_io import load_csv, save_csv
from ..model.network import predict
from ..monitoring.logger import Logger
from ..training.checkpoint import load_checkpoint
from .config import CliParser, run_guarded


def build_parser():
    parser = CliParser(prog="pymotiontools_predict", description="Predict future poses from a skeleton CSV file.")
    parser.add_argument("--ckpt", type=str, required=True, help="Trained checkpoint.")
    parser.add_argument("--input", type=str, required=True, help="CSV file with at least T frames.")
    parser.add_argument("--out", type=str, required=True, help="CSV file for the T_out predicted frames.")
    parser.add_argument("--root", type=int, default=0, help="Root joint, used when there is no preprocessing file.")
    return parser


def main(argv=None) -> int:
    comm = MPI.COMM_WORLD
    log = Logger(comm=comm, module_name="predict")

    args = build_parser().parse_args(argv)

    def command():
        params = load_checkpoint(args.ckpt)
        hyper = params.hyper

        seq = load_csv(args.input)
        if seq.n_frames < hyper.T:
            raise DataError(f"{args.input} has {seq.n_frames} frames, the model observes {hyper.T}")

        meta_path = f"{args.ckpt}.prep.json"
        if os.path.exists(meta_path):
            meta = PreprocessMeta.load(meta_path)
            processed = apply_preprocess(seq, meta)
        else:
            processed, meta = preprocess(seq, root=args.root)
        if len(meta.kept) != hyper.N_j:
            raise DataError(f"{args.input} has {len(meta.kept)} joints after preprocessing, the model expects {hyper.N_j}")

        poses = predict(params, processed.frames[-hyper.T :])
        poses = restore_joints(poses, meta)

        if comm.Get_rank() == 0:
            save_csv(poses, args.out)
        log.write("info", f"Wrote {poses.shape[0]} predicted frames to {args.out}")

    return run_guarded(command, log)


if __name__ == "__main__":
    raise SystemExit(main())
