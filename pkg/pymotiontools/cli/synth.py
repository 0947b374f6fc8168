#!/usr/bin/env python3

import os

from mpi4py import MPI

from ..comm.router import Router
from ..datatypes.synthetic import SynthParams, sequence_name, synth_manifest, synth_sequence, write_manifest
from ..io.csv_io import save_csv
from ..monitoring.logger import Logger
from .config import CliParser, run_guarded


def build_parser():
    parser = CliParser(prog="pymotiontools_synth", description="Write a synthetic skeleton motion dataset.")
    parser.add_argument("--out", type=str, required=True, help="Output folder.")
    parser.add_argument("--sequences", type=int, default=64, help="Number of sequences.")
    parser.add_argument("--frames", type=int, default=100, help="Frames per sequence.")
    parser.add_argument("--joints", type=int, default=8, help="Joints per pose.")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the generator.")
    parser.add_argument("--amplitude-mm", type=float, nargs=2, default=None, metavar=("MIN", "MAX"), help="Range of the oscillation amplitudes.")
    parser.add_argument("--period-frames", type=float, nargs=2, default=None, metavar=("MIN", "MAX"), help="Range of the oscillation periods.")
    parser.add_argument("--max-drift-mm", type=float, default=None, help="Largest drift per frame.")
    return parser


def main(argv=None) -> int:
    comm = MPI.COMM_WORLD
    log = Logger(comm=comm, module_name="synth")

    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("sequences", "frames", "joints"):
        if getattr(args, name) < 1:
            parser.error(f"--{name} must be positive")

    params = SynthParams()
    if args.amplitude_mm is not None:
        params.amplitude_mm = tuple(args.amplitude_mm)
    if args.period_frames is not None:
        params.period_frames = tuple(args.period_frames)
    if args.max_drift_mm is not None:
        params.max_drift_mm = args.max_drift_mm

    def command():
        os.makedirs(args.out, exist_ok=True)

        # Every rank writes its own share of the files
        rt = Router(comm)
        for i in rt.local_slice(list(range(args.sequences))):
            seq = synth_sequence(i, args.frames, args.joints, args.seed, params)
            save_csv(seq, os.path.join(args.out, f"{sequence_name(i)}.csv"))

        comm.Barrier()
        if comm.Get_rank() == 0:
            write_manifest(args.out, synth_manifest(args.sequences, args.frames, args.joints, args.seed, params))
        log.write("info", f"Wrote {args.sequences} sequences to {args.out}")

    return run_guarded(command, log)


if __name__ == "__main__":
    raise SystemExit(main())
