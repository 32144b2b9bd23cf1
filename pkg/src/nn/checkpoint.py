"""
Named-tensor checkpoint archive.

``weights.bin`` layout (all integers little-endian):

    magic  b"HMRLTNSR"
    u32    format version
    u32    tensor count
    per tensor, in manifest order:
        u32 name length, utf-8 name
        u32 ndim, u64 per dim
        float64 payload, little-endian, row-major

``manifest.json`` lists the parameter sets with their roles and tensor
names, plus free-form metadata (hyperparameters). Keys are sorted so that
saving the same state twice yields identical bytes.
"""
import json
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from src.exceptions import CheckpointError
from src.monitoring.logger import get_logger
from src.nn.params import ParameterSet, Role
from src.nn.tensor import parameter

logger = get_logger(__name__)

MAGIC = b"HMRLTNSR"
FORMAT_VERSION = 1
WEIGHTS_FILE = "weights.bin"
MANIFEST_FILE = "manifest.json"


def _encode(tensors: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(tensors))]
    for name, value in tensors.items():
        encoded = name.encode("utf-8")
        value = np.ascontiguousarray(value, dtype="<f8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}Q", *value.shape))
        chunks.append(value.tobytes(order="C"))
    return b"".join(chunks)


def _decode(payload: bytes) -> Dict[str, np.ndarray]:
    if payload[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint archive (bad magic)")
    try:
        pos = len(MAGIC)
        version, count = struct.unpack_from("<II", payload, pos)
        pos += 8
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format version {version}")
        tensors: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (length,) = struct.unpack_from("<I", payload, pos)
            pos += 4
            name = payload[pos:pos + length].decode("utf-8")
            pos += length
            (ndim,) = struct.unpack_from("<I", payload, pos)
            pos += 4
            shape = struct.unpack_from(f"<{ndim}Q", payload, pos)
            pos += 8 * ndim
            n_bytes = 8 * int(np.prod(shape, dtype=np.int64))
            if pos + n_bytes > len(payload):
                raise CheckpointError(f"truncated payload for tensor {name!r}")
            tensors[name] = np.frombuffer(payload, dtype="<f8", count=n_bytes // 8, offset=pos).reshape(shape).astype(np.float64)
            pos += n_bytes
    except struct.error as e:
        raise CheckpointError(f"truncated checkpoint archive: {e}") from e
    if pos != len(payload):
        raise CheckpointError(f"{len(payload) - pos} trailing bytes after the last tensor")
    return tensors


def save_checkpoint(
    directory: Union[str, Path],
    param_sets: Mapping[str, ParameterSet],
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    tensors: Dict[str, np.ndarray] = {}
    sets = {}
    for set_name, params in param_sets.items():
        sets[set_name] = {"role": params.role.value, "tensors": list(params.keys())}
        for name, tensor in params.items():
            tensors[f"{set_name}/{name}"] = tensor.data

    manifest = {
        "format_version": FORMAT_VERSION,
        "sets": sets,
        "metadata": metadata or {},
    }
    (directory / WEIGHTS_FILE).write_bytes(_encode(tensors))
    (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug("checkpoint_saved", directory=str(directory), tensors=len(tensors))
    return directory


def load_checkpoint(directory: Union[str, Path]) -> Tuple[Dict[str, ParameterSet], Dict[str, Any]]:
    """Return (parameter sets by name, metadata)."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / MANIFEST_FILE).read_text(encoding="utf-8"))
        tensors = _decode((directory / WEIGHTS_FILE).read_bytes())
    except json.JSONDecodeError as e:
        raise CheckpointError(f"invalid checkpoint manifest in {directory}: {e}") from e

    param_sets: Dict[str, ParameterSet] = {}
    try:
        for set_name, entry in manifest["sets"].items():
            param_sets[set_name] = ParameterSet(
                Role(entry["role"]),
                {name: parameter(tensors.pop(f"{set_name}/{name}")) for name in entry["tensors"]},
            )
    except (KeyError, ValueError) as e:
        raise CheckpointError(f"checkpoint manifest does not match its archive: {e}") from e
    if tensors:
        raise CheckpointError(f"archive holds tensors missing from the manifest: {sorted(tensors)}")
    return param_sets, manifest.get("metadata", {})
