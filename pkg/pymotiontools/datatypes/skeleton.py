""" Contains classes and functions for skeleton sequences and the windows taken from them"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, DataError
from ..io.utils import atomic_write
from ..monitoring.logger import Logger

FRAME_INTERVAL_MS = 40
CONSTANT_TOL = 1e-6

__all__ = [
    "SkeletonSequence",
    "SampleWindow",
    "PreprocessMeta",
    "preprocess",
    "preprocess_dataset",
    "apply_preprocess",
    "restore_joints",
    "window",
    "split_sequences",
    "stack_windows",
]


class SkeletonSequence:
    """
    Ordered poses of one recording.

    Parameters
    ----------
    frames : ndarray
        Array of shape (n_frames, N_j, 3), joint coordinates in millimeters.
    name : str, optional
        Identifier of the sequence, usually the file stem.
    frame_interval_ms : int, optional
        Time between frames. 40 ms by default.

    Attributes
    ----------
    frames : ndarray
        The poses.
    name : str
        Identifier.
    frame_interval_ms : int
        Time between frames.

    Examples
    --------
    >>> seq = SkeletonSequence(np.zeros((20, 8, 3)), name="seq_0000")
    >>> seq.n_frames, seq.n_joints
    (20, 8)
    """

    def __init__(self, frames: np.ndarray, name: str = "", frame_interval_ms: int = FRAME_INTERVAL_MS):

        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[2] != 3:
            raise DataError(f"Sequence {name}: frames must have shape (n_frames, N_j, 3), got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise DataError(f"Sequence {name}: frames contain non-finite values")

        self.frames = frames
        self.name = name
        self.frame_interval_ms = frame_interval_ms

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_joints(self) -> int:
        return self.frames.shape[1]

    def __len__(self):
        return self.n_frames

    def __repr__(self):
        return f"SkeletonSequence(name={self.name!r}, n_frames={self.n_frames}, n_joints={self.n_joints})"


@dataclass
class SampleWindow:
    """
    Observed poses and the poses that follow them.

    Attributes
    ----------
    input : ndarray
        T poses, shape (T, N_j, 3).
    target : ndarray
        T_out poses, shape (T_out, N_j, 3), immediately after the input.
    source : str
        Name of the sequence the window was cut from.
    offset : int
        0-based index of the first input frame in the source sequence.
    """

    input: np.ndarray
    target: np.ndarray
    source: str
    offset: int

    @property
    def target_offset(self) -> int:
        return self.offset + self.input.shape[0]


@dataclass
class PreprocessMeta:
    """
    What preprocessing removed, so that predictions can be mapped back.

    Attributes
    ----------
    root : int
        Index of the root joint in the raw data.
    n_joints : int
        Joint count of the raw data.
    kept : list
        Raw indices of the joints seen by the network, in order.
    dropped : list
        Raw indices of the joints that were constant after root centering.
    dropped_values : list
        Root-relative [x, y, z] of each dropped joint, in millimeters.
    scale : float
        Root mean square of the kept root-relative coordinates. Preprocessed
        coordinates are divided by it.
    """

    root: int
    n_joints: int
    kept: list = field(default_factory=list)
    dropped: list = field(default_factory=list)
    dropped_values: list = field(default_factory=list)
    scale: float = 1.0

    def save(self, path: str):
        atomic_write(path, json.dumps(asdict(self), indent=2))

    @classmethod
    def load(cls, path: str):
        """
        Read a file written by save.

        Raises
        ------
        DataError
            If the file is not valid JSON or does not describe a preprocessing.
        """

        with open(path, "r", encoding="utf-8") as f:
            try:
                data = json.load(f)
            except ValueError as e:
                raise DataError(f"{path} is not a valid preprocessing file: {e}") from None
        try:
            meta = cls(**data)
        except TypeError as e:
            raise DataError(f"{path} is not a valid preprocessing file: {e}") from None
        if not (isinstance(meta.scale, (int, float)) and meta.scale > 0):
            raise DataError(f"{path} has an invalid scale {meta.scale!r}")
        return meta


def _root_centered(seq: SkeletonSequence, root: int) -> np.ndarray:
    if not 0 <= root < seq.n_joints:
        raise ConfigError(f"Root joint {root} out of range for {seq.n_joints} joints")
    return seq.frames - seq.frames[:, root : root + 1, :]


def preprocess_dataset(seqs: list, root: int = 0, tol: float = CONSTANT_TOL):
    """
    Fit and apply root centering and constant joint removal over a set of sequences.

    The root joint is subtracted from every joint in every frame. Joints whose
    root-relative coordinates do not change by more than tol over all frames of all
    sequences are dropped. The root itself is kept. Global rotation is not removed.
    The kept coordinates are divided by their root mean square, so the network
    sees values of order one whatever the unit of the data.

    Parameters
    ----------
    seqs : list of SkeletonSequence
        Sequences sharing the same joint count.
    root : int, optional
        Index of the root joint.
    tol : float, optional
        Constant joint threshold, in millimeters.

    Returns
    -------
    list of SkeletonSequence
        Preprocessed sequences.
    PreprocessMeta
        What was removed.

    Raises
    ------
    DataError
        If a sequence has fewer than 2 frames or 2 joints, joint counts differ,
        or no joint other than the root changes over time.
    """

    if len(seqs) == 0:
        raise DataError("There are no sequences to preprocess")

    n_joints = seqs[0].n_joints
    for seq in seqs:
        if seq.n_frames < 2:
            raise DataError(f"Sequence {seq.name} has {seq.n_frames} frames, at least 2 are needed")
        if seq.n_joints != n_joints:
            raise DataError(f"Sequence {seq.name} has {seq.n_joints} joints, expected {n_joints}")
    if n_joints < 2:
        raise DataError(f"At least 2 joints are needed, got {n_joints}")

    centered = [_root_centered(seq, root) for seq in seqs]
    stacked = np.concatenate(centered, axis=0)
    spread = np.max(np.ptp(stacked, axis=0), axis=1)

    constant = spread <= tol
    constant[root] = False
    kept = [j for j in range(n_joints) if not constant[j]]
    dropped = [j for j in range(n_joints) if constant[j]]

    if kept == [root]:
        raise DataError("degenerate sequence: every joint is constant relative to the root")

    meta = PreprocessMeta(
        root=root,
        n_joints=n_joints,
        kept=kept,
        dropped=dropped,
        dropped_values=[stacked[0, j].tolist() for j in dropped],
        scale=float(np.sqrt(np.mean(stacked[:, kept] ** 2))),
    )

    out = [SkeletonSequence(c[:, kept] / meta.scale, name=s.name, frame_interval_ms=s.frame_interval_ms) for c, s in zip(centered, seqs)]
    return out, meta


def preprocess(seq: SkeletonSequence, root: int = 0, tol: float = CONSTANT_TOL):
    """Preprocess a single sequence, see preprocess_dataset."""

    out, meta = preprocess_dataset([seq], root=root, tol=tol)
    return out[0], meta


def apply_preprocess(seq: SkeletonSequence, meta: PreprocessMeta) -> SkeletonSequence:
    """Apply fitted preprocessing to a new sequence with the raw joint layout."""

    if seq.n_joints != meta.n_joints:
        raise DataError(f"Sequence {seq.name} has {seq.n_joints} joints, the preprocessing expects {meta.n_joints}")
    centered = _root_centered(seq, meta.root)
    return SkeletonSequence(centered[:, meta.kept] / meta.scale, name=seq.name, frame_interval_ms=seq.frame_interval_ms)


def restore_joints(poses: np.ndarray, meta: PreprocessMeta) -> np.ndarray:
    """
    Undo the scaling and put the dropped joints back at their constant root-relative positions.

    Parameters
    ----------
    poses : ndarray
        Shape (..., len(meta.kept), 3).

    Returns
    -------
    ndarray
        Shape (..., meta.n_joints, 3).
    """

    poses = np.asarray(poses)
    if poses.shape[-2] != len(meta.kept):
        raise DataError(f"Poses have {poses.shape[-2]} joints, the preprocessing kept {len(meta.kept)}")

    out = np.zeros(poses.shape[:-2] + (meta.n_joints, 3), dtype=poses.dtype)
    out[..., meta.kept, :] = poses * meta.scale
    for j, value in zip(meta.dropped, meta.dropped_values):
        out[..., j, :] = value
    return out


def window(seq: SkeletonSequence, T: int, T_out: int, stride: int = 1, logger: Logger = None) -> list:
    """
    Cut sliding windows of T observed and T_out future poses.

    There are floor((n_frames - T - T_out) / stride) + 1 windows. A sequence that
    is too short gives an empty list and a warning.
    """

    if T < 1 or T_out < 1:
        raise ConfigError(f"T and T_out must be positive, got {T} and {T_out}")
    if stride < 1:
        raise ConfigError(f"The window stride must be positive, got {stride}")

    span = T + T_out
    if seq.n_frames < span:
        log = logger if logger is not None else Logger(module_name=__name__)
        log.write("warning", f"Sequence {seq.name} has {seq.n_frames} frames, {span} are needed for a window")
        return []

    windows = []
    for start in range(0, seq.n_frames - span + 1, stride):
        windows.append(
            SampleWindow(
                input=seq.frames[start : start + T],
                target=seq.frames[start + T : start + span],
                source=seq.name,
                offset=start,
            )
        )
    return windows


def split_sequences(seqs: list):
    """
    Split by sequence index into train, validation and test sets.

    train gets floor(0.8 n) sequences (at least 1), validation floor(0.1 n) and test the rest.
    """

    n = len(seqs)
    n_train = max(1, int(np.floor(0.8 * n))) if n > 0 else 0
    n_val = min(int(np.floor(0.1 * n)), n - n_train)
    return seqs[:n_train], seqs[n_train : n_train + n_val], seqs[n_train + n_val :]


def stack_windows(windows: list, dtype=np.float32):
    """
    Batch windows into arrays.

    Returns
    -------
    inputs : ndarray
        Shape (B, T, N_j, 3).
    targets : ndarray
        Shape (B, T_out, N_j, 3).
    """

    if len(windows) == 0:
        raise DataError("There are no windows to stack")
    inputs = np.stack([w.input for w in windows]).astype(dtype)
    targets = np.stack([w.target for w in windows]).astype(dtype)
    return inputs, targets
