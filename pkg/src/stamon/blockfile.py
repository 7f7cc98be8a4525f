"""Single-file array container: one JSON header line followed by raw blocks.

Snapshot batches and model checkpoints need lossless float64 storage and
byte-identical output for identical inputs (no timestamps, no compression
jitter).  The format is deliberately tiny:

    line 1   UTF-8 JSON object with keys "format", "version", "meta" and
             "arrays" (name, dtype, shape of every block, in file order),
             serialized with sorted keys, terminated by a newline
    rest     the raw C-order bytes of each array, concatenated
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

CONTAINER_VERSION = 1


class BlockFileError(ValueError):
    """The container is corrupt, truncated or of an unexpected format."""


def write_blockfile(path, format_name: str, meta: dict, arrays: list[tuple[str, np.ndarray]]) -> None:
    """Write named arrays plus a JSON-serializable ``meta`` dict to ``path``."""
    blocks = []
    descr = []
    for name, values in arrays:
        values = np.ascontiguousarray(values)
        blocks.append(values)
        descr.append({"name": name, "dtype": values.dtype.str, "shape": list(values.shape)})
    header = {
        "format": format_name,
        "version": CONTAINER_VERSION,
        "meta": meta,
        "arrays": descr,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for values in blocks:
            fh.write(values.tobytes())


def read_blockfile(path, expected_format: str | None = None) -> tuple[dict[str, np.ndarray], dict]:
    """Read a container written by :func:`write_blockfile`.

    Returns ``(arrays, meta)`` where ``arrays`` maps block name to a fresh
    (writable) ndarray.  Raises :class:`BlockFileError` on any structural
    problem, including a missing or unsupported version field.
    """
    path = Path(path)
    if not path.is_file():
        raise BlockFileError(f"container not found: {path}")
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BlockFileError(f"{path}: invalid container header: {exc}") from exc
        for key in ("format", "version", "arrays"):
            if key not in header:
                raise BlockFileError(f"{path}: container header missing '{key}' field")
        if header["version"] != CONTAINER_VERSION:
            raise BlockFileError(
                f"{path}: unsupported container version {header['version']!r}"
            )
        if expected_format is not None and header["format"] != expected_format:
            raise BlockFileError(
                f"{path}: expected format '{expected_format}', found '{header['format']}'"
            )
        arrays: dict[str, np.ndarray] = {}
        for entry in header["arrays"]:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(int(s) for s in entry["shape"])
            nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
            buf = fh.read(nbytes)
            if len(buf) != nbytes:
                raise BlockFileError(f"{path}: truncated block '{entry['name']}'")
            arrays[entry["name"]] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
        if fh.read(1) != b"":
            raise BlockFileError(f"{path}: trailing bytes after last block")
    return arrays, header.get("meta", {})
