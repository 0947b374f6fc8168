"""Binary checkpoint format of trained models

Layout, little endian:

- magic ``SDMTL1``
- 8 x uint32: T, T_out, N_j, C, k, l_en, l_de, n
- uint8 flags: bit 0 ted_off, bit 1 amg_off, bit 2 rc_off, bit 3 ei_off
- uint32 number of parameter records
- per record, in sorted name order: uint16 name length, UTF-8 name, uint8 rank,
  rank x uint32 dims, float32 payload
- uint32 CRC-32 of every preceding byte
"""

import zlib

import numpy as np

from ..errors import CheckpointError, ConfigError, HyperparameterError
from ..io.utils import atomic_write
from ..model.network import ModelHyper, ModelParams, param_specs

MAGIC = b"SDMTL1"
HYPER_FIELDS = ("T", "T_out", "N_j", "C", "k", "l_en", "l_de", "n")
FLAG_FIELDS = ("ted_off", "amg_off", "rc_off", "ei_off")

u8 = np.dtype("<u1")
u16 = np.dtype("<u2")
u32 = np.dtype("<u4")
f32 = np.dtype("<f4")


def checkpoint_bytes(params: ModelParams) -> bytes:
    """Serialize a model to the checkpoint layout."""

    hyper = params.hyper
    parts = [MAGIC]
    parts.append(np.array([getattr(hyper, f) for f in HYPER_FIELDS], dtype=u32).tobytes())
    flags = sum(1 << i for i, f in enumerate(FLAG_FIELDS) if getattr(hyper, f))
    parts.append(np.array([flags], dtype=u8).tobytes())
    parts.append(np.array([len(params.arrays)], dtype=u32).tobytes())

    for name in params.names():
        array = params.arrays[name]
        encoded = name.encode("utf-8")
        parts.append(np.array([len(encoded)], dtype=u16).tobytes())
        parts.append(encoded)
        parts.append(np.array([array.ndim], dtype=u8).tobytes())
        parts.append(np.array(array.shape, dtype=u32).tobytes())
        parts.append(np.ascontiguousarray(array, dtype=f32).tobytes())

    body = b"".join(parts)
    return body + np.array([zlib.crc32(body)], dtype=u32).tobytes()


def save_checkpoint(path: str, params: ModelParams):
    """Write a checkpoint atomically."""
    atomic_write(path, checkpoint_bytes(params))


class _Reader:
    def __init__(self, buffer: bytes):
        self.buffer = buffer
        self.pos = 0

    def take(self, dtype, count=1):
        size = dtype.itemsize * count
        if self.pos + size > len(self.buffer):
            raise CheckpointError("Checkpoint is truncated")
        out = np.frombuffer(self.buffer, dtype=dtype, count=count, offset=self.pos)
        self.pos += size
        return out

    def raw(self, size):
        if self.pos + size > len(self.buffer):
            raise CheckpointError("Checkpoint is truncated")
        out = self.buffer[self.pos : self.pos + size]
        self.pos += size
        return out


def parse_checkpoint(buffer: bytes, hyper: ModelHyper = None) -> ModelParams:
    """
    Rebuild a model from checkpoint bytes.

    Parameters
    ----------
    buffer : bytes
        Checkpoint content.
    hyper : ModelHyper, optional
        Expected architecture. A checkpoint with different hyperparameters is rejected.

    Raises
    ------
    CheckpointError
        On bad magic, bad checksum, truncation, or unknown, duplicate, missing or
        mis-shaped parameters.
    HyperparameterError
        If hyper is given and does not match the stored hyperparameters.
    """

    if len(buffer) < len(MAGIC) + 4 or buffer[: len(MAGIC)] != MAGIC:
        raise CheckpointError("Not a checkpoint file, bad magic")

    body, stored_crc = buffer[:-4], int(np.frombuffer(buffer[-4:], dtype=u32)[0])
    if zlib.crc32(body) != stored_crc:
        raise CheckpointError("Checkpoint checksum does not match, the file is corrupted")

    reader = _Reader(body)
    reader.raw(len(MAGIC))
    values = dict(zip(HYPER_FIELDS, (int(v) for v in reader.take(u32, len(HYPER_FIELDS)))))
    flags = int(reader.take(u8)[0])
    values.update({f: bool(flags >> i & 1) for i, f in enumerate(FLAG_FIELDS)})

    try:
        stored = ModelHyper(**values)
    except ConfigError as e:
        raise CheckpointError(f"Checkpoint holds invalid hyperparameters: {e}") from None

    if hyper is not None and hyper.as_dict() != stored.as_dict():
        diff = [f"{k}: checkpoint {stored.as_dict()[k]}, requested {v}" for k, v in hyper.as_dict().items() if stored.as_dict()[k] != v]
        raise HyperparameterError("Checkpoint hyperparameters do not match the requested model, " + "; ".join(diff))

    specs = param_specs(stored)
    n_records = int(reader.take(u32)[0])
    arrays = {}
    for _ in range(n_records):
        name_len = int(reader.take(u16)[0])
        try:
            name = reader.raw(name_len).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError("Checkpoint has a parameter name that is not UTF-8") from None
        rank = int(reader.take(u8)[0])
        dims = tuple(int(d) for d in reader.take(u32, rank))
        count = int(np.prod(dims)) if rank > 0 else 1
        payload = reader.take(f32, count)

        if name not in specs:
            raise CheckpointError(f"Unknown parameter name {name} in checkpoint")
        if name in arrays:
            raise CheckpointError(f"Duplicate parameter name {name} in checkpoint")
        if dims != specs[name][0]:
            raise CheckpointError(f"Parameter {name} has dims {dims}, expected {specs[name][0]}")
        arrays[name] = payload.astype(np.float32).reshape(dims)

    if reader.pos != len(body):
        raise CheckpointError("Checkpoint has trailing bytes after the last parameter")
    missing = sorted(set(specs) - set(arrays))
    if missing:
        raise CheckpointError(f"Checkpoint misses {len(missing)} parameters, first is {missing[0]}")

    return ModelParams(stored, arrays)


def load_checkpoint(path: str, hyper: ModelHyper = None) -> ModelParams:
    """Read and validate a checkpoint file, see parse_checkpoint."""

    with open(path, "rb") as f:
        buffer = f.read()
    return parse_checkpoint(buffer, hyper)
