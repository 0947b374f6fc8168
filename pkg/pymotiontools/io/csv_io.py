"""Read and write skeleton sequences as CSV files"""

import csv
import glob
import io
import os
import re

import numpy as np

from ..comm.router import Router
from ..datatypes.skeleton import SkeletonSequence
from ..errors import DataError, ParseError
from ..monitoring.logger import Logger
from .utils import atomic_write

__all__ = ["load_csv", "save_csv", "load_dataset", "csv_header"]

HEADER_PATTERN = re.compile(r"^j(\d+)_([xyz])$")
AXES = ("x", "y", "z")


def csv_header(n_joints: int) -> list:
    """Column names j0_x, j0_y, j0_z, j1_x, ..."""
    return [f"j{j}_{axis}" for j in range(n_joints) for axis in AXES]


def load_csv(path: str) -> SkeletonSequence:
    """
    Read one sequence, one frame per row.

    Parameters
    ----------
    path : str
        CSV file with header j0_x,j0_y,j0_z,j1_x,... and decimal-point floats.

    Returns
    -------
    SkeletonSequence
        Named after the file stem. N_j is inferred from the header.

    Raises
    ------
    ParseError
        On text that is not UTF-8, a malformed header, a non-numeric or non-finite
        cell, or a ragged row. The message gives the 1-based row (the header is
        row 1) and column.
    """

    name = os.path.splitext(os.path.basename(path))[0]

    with open(path, "rb") as file:
        raw = file.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        line_start = raw.rfind(b"\n", 0, e.start) + 1
        raise ParseError(
            f"{path}: byte 0x{raw[e.start]:02x} is not valid UTF-8",
            row=raw.count(b"\n", 0, e.start) + 1,
            column=raw.count(b",", line_start, e.start) + 1,
        ) from None

    reader = csv.reader(io.StringIO(text, newline=""))

    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path}: empty file, a header is expected", row=1) from None

    header = [h.strip() for h in header]
    if len(header) == 0 or len(header) % 3 != 0:
        raise ParseError(f"{path}: header has {len(header)} columns, a multiple of 3 is expected", row=1)
    expected = csv_header(len(header) // 3)
    for col, (got, want) in enumerate(zip(header, expected), start=1):
        if not HEADER_PATTERN.match(got) or got != want:
            raise ParseError(f"{path}: header column '{got}' should be '{want}'", row=1, column=col)

    rows = []
    for row_number, row in enumerate(reader, start=2):
        if len(row) == 0:
            continue
        if len(row) != len(header):
            raise ParseError(
                f"{path}: row has {len(row)} columns, the header has {len(header)}",
                row=row_number,
                column=min(len(row), len(header)) + 1,
            )
        values = []
        for col, cell in enumerate(row, start=1):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"{path}: cell '{cell}' is not a number", row=row_number, column=col) from None
            if not np.isfinite(value):
                raise ParseError(f"{path}: cell '{cell}' is not finite", row=row_number, column=col)
            values.append(value)
        rows.append(values)

    frames = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(header) // 3, 3)
    return SkeletonSequence(frames, name=name)


def save_csv(seq: SkeletonSequence, path: str):
    """
    Write a sequence atomically, with 9 significant digits per value.

    Parameters
    ----------
    seq : SkeletonSequence or ndarray
        Sequence, or poses of shape (n_frames, N_j, 3).
    path : str
        Destination file.
    """

    frames = seq.frames if isinstance(seq, SkeletonSequence) else np.asarray(seq)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(csv_header(frames.shape[1]))
    for pose in frames.reshape(frames.shape[0], -1):
        writer.writerow([f"{v:.9g}" for v in pose])

    atomic_write(path, buffer.getvalue())


def load_dataset(comm, folder: str, logger: Logger = None) -> list:
    """
    Load every CSV file of a folder.

    Files are split among the ranks and gathered back, so every rank gets all
    sequences in lexicographic file order.

    Parameters
    ----------
    comm : MPI communicator
        Communicator.
    folder : str
        Directory with the *.csv files.

    Returns
    -------
    list of SkeletonSequence
        One per file.

    Raises
    ------
    DataError
        If the folder does not exist or has no CSV files.
    """

    log = logger if logger is not None else Logger(comm=comm, module_name=__name__)

    if not os.path.isdir(folder):
        raise DataError(f"Data folder {folder} does not exist")
    files = sorted(glob.glob(os.path.join(folder, "*.csv")))
    if len(files) == 0:
        raise DataError(f"There are no CSV files in {folder}")

    rt = Router(comm)
    local = [load_csv(f) for f in rt.local_slice(files)]
    seqs = rt.gather_objects(local)

    log.write("info", f"Loaded {len(seqs)} sequences from {folder}")
    return seqs
