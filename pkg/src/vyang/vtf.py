"""Binary tensor file IO and the checkpoint container built on it.

A tensor blob is laid out as:

    magic   4 bytes  b"VTF1"
    dtype   1 byte   0 = float32, 1 = float64
    ndim    1 byte
    dims    ndim x uint32, little endian
    payload row-major values in the stated dtype, little endian

A checkpoint bundles many named blobs: a text index (blob count, then one
``name<TAB>offset<TAB>length`` line per blob, offsets relative to the end
of the index) followed by the concatenated blobs. Names are written in
sorted order so identical states serialize to identical bytes.
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Dict

import numpy as np

MAGIC = b"VTF1"
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}

CHECKPOINT_MAGIC = b"VYCK1\n"


class FormatError(ValueError):
    """Raised when bytes do not parse as a valid tensor file."""


def write_tensor(fh: BinaryIO, array: np.ndarray) -> None:
    array = np.asarray(array)  # tobytes() below serializes row-major regardless of layout
    code = _DTYPE_CODES.get(array.dtype)
    if code is None:
        raise FormatError(f"unsupported dtype {array.dtype}; use float32 or float64")
    if array.ndim > 255:
        raise FormatError(f"too many dimensions: {array.ndim}")
    fh.write(MAGIC)
    fh.write(struct.pack("<BB", code, array.ndim))
    for dim in array.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(array.astype(_DTYPES[code], copy=False).tobytes())


def read_tensor(fh: BinaryIO) -> np.ndarray:
    magic = fh.read(4)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    head = fh.read(2)
    if len(head) != 2:
        raise FormatError("truncated header")
    code, ndim = struct.unpack("<BB", head)
    if code not in _DTYPES:
        raise FormatError(f"unknown dtype code {code}")
    dims_raw = fh.read(4 * ndim)
    if len(dims_raw) != 4 * ndim:
        raise FormatError("truncated dimension list")
    shape = struct.unpack(f"<{ndim}I", dims_raw) if ndim else ()
    dtype = _DTYPES[code]
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    payload = fh.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise FormatError(
            f"payload holds {len(payload)} bytes, expected {count * dtype.itemsize} "
            f"for shape {shape}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def read_header(path) -> tuple:
    """Shape of the stored tensor, without reading its payload."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        head = fh.read(2)
        if len(head) != 2:
            raise FormatError("truncated header")
        code, ndim = struct.unpack("<BB", head)
        if code not in _DTYPES:
            raise FormatError(f"unknown dtype code {code}")
        dims_raw = fh.read(4 * ndim)
        if len(dims_raw) != 4 * ndim:
            raise FormatError("truncated dimension list")
        return struct.unpack(f"<{ndim}I", dims_raw) if ndim else ()


def save_tensor(path, array: np.ndarray) -> None:
    with open(path, "wb") as fh:
        write_tensor(fh, array)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor(fh)


def _blob_bytes(array: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    write_tensor(buf, array)
    return buf.getvalue()


def save_checkpoint(path, arrays: Dict[str, np.ndarray]) -> None:
    names = sorted(arrays)
    for name in names:
        if "\t" in name or "\n" in name:
            raise FormatError(f"checkpoint entry name {name!r} contains tab or newline")
    blobs = [_blob_bytes(np.asarray(arrays[name])) for name in names]
    index_lines = [CHECKPOINT_MAGIC.decode(), f"{len(names)}\n"]
    offset = 0
    for name, blob in zip(names, blobs):
        index_lines.append(f"{name}\t{offset}\t{len(blob)}\n")
        offset += len(blob)
    with open(path, "wb") as fh:
        fh.write("".join(index_lines).encode())
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> Dict[str, np.ndarray]:
    import io

    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise FormatError(f"not a checkpoint file: {path}")
    body = raw[len(CHECKPOINT_MAGIC):]
    newline = body.index(b"\n")
    count = int(body[:newline])
    pos = newline + 1
    entries = []
    for _ in range(count):
        end = body.index(b"\n", pos)
        name, offset, length = body[pos:end].decode().split("\t")
        entries.append((name, int(offset), int(length)))
        pos = end + 1
    blob_base = pos
    arrays: Dict[str, np.ndarray] = {}
    for name, offset, length in entries:
        chunk = body[blob_base + offset : blob_base + offset + length]
        if len(chunk) != length:
            raise FormatError(f"checkpoint entry {name!r} truncated")
        arrays[name] = read_tensor(io.BytesIO(chunk))
    return arrays
