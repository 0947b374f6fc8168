#!/usr/bin/env python3

from mpi4py import MPI

from ..model.diagnostics import GRAD_TOL, run_gradient_suite
from ..monitoring.logger import Logger
from .config import EXIT_NUMERIC, EXIT_OK, CliParser, run_guarded


def build_parser():
    parser = CliParser(prog="pymotiontools_gradcheck", description="Check the analytic gradients against finite differences.")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the random inputs and parameters.")
    parser.add_argument("--full", action="store_true", default=False, help="Check every coordinate instead of a subsample.")
    return parser


def main(argv=None) -> int:
    comm = MPI.COMM_WORLD
    log = Logger(comm=comm, module_name="gradcheck")

    args = build_parser().parse_args(argv)
    results = {}

    def command():
        log.tic()
        results.update(run_gradient_suite(seed=args.seed, exhaustive=args.full))
        log.toc()

    code = run_guarded(command, log)
    if code != EXIT_OK:
        return code

    if comm.Get_rank() == 0:
        for name, err in results.items():
            status = "ok" if err < GRAD_TOL else "FAIL"
            print(f"{name:<14} {err:.3e} {status}")

    return EXIT_OK if all(err < GRAD_TOL for err in results.values()) else EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
