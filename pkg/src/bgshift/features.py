"""Feature batch files: compact binary ``FBT1`` and a JSON form for tiny fixtures.

Binary layout (little-endian): magic ``b"FBT1"``, three ``uint32`` dims
``C, K, D``, then ``C*K*D`` ``float32`` values with ``c`` outermost and
``d`` innermost.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .ccloss import FeatureBatch

MAGIC = b"FBT1"
_HEADER = struct.Struct("<4sIII")


def dumps_fbt(values: np.ndarray) -> bytes:
    v = np.asarray(values)
    C, K, D = v.shape
    return _HEADER.pack(MAGIC, C, K, D) + v.astype("<f4").tobytes(order="C")


def loads_fbt(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise ValueError("truncated feature batch header")
    magic, C, K, D = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    expected = _HEADER.size + 4 * C * K * D
    if len(data) != expected:
        raise ValueError(f"feature batch has {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(C, K, D).astype(np.float64)


def read_features(path, modality: str = None) -> FeatureBatch:
    """Load a ``.fbt`` or ``.json`` feature batch."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        return FeatureBatch(np.array(doc["values"], dtype=np.float64),
                            modality or doc.get("modality", "image"))
    return FeatureBatch(loads_fbt(path.read_bytes()), modality or "image")


def write_features(path, fb: FeatureBatch) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps({"modality": fb.modality, "values": fb.values.tolist()}))
    else:
        path.write_bytes(dumps_fbt(fb.values))
