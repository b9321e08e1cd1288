"""Model checkpoint serialization.

Layout: 8-byte magic, uint32 little-endian header length, UTF-8 JSON header,
then a raw array blob. The header records format_version, architecture
config, training metadata, a CRC-32 of the blob, and one descriptor (name,
dtype, shape, offset) per array. Parameters are stored as little-endian
float32 exactly as trained, so a round trip is bit-identical; the noise
schedule's per-step stay probabilities ride along as float64 and beta_bar
is recomputed on load from its closed form.

Distinct failure modes raise distinct errors: bad magic / truncation / CRC
mismatch -> CheckpointCorruptError, unsupported format_version ->
CheckpointVersionError, stored shapes disagreeing with the stored config ->
CheckpointShapeError.
"""

from __future__ import annotations

import json
import struct
import zlib
from typing import Dict

import numpy as np

from .diffusion import NoiseSchedule, _beta_bar_from_beta
from .errors import (
    CheckpointCorruptError,
    CheckpointShapeError,
    CheckpointVersionError,
    ContractError,
)
from .network import GnnConfig, Model, param_shapes

MAGIC = b"CSLVCKPT"
FORMAT_VERSION = 1


def save_model(model: Model, path) -> None:
    """Write the model to path. Output bytes are a pure function of the
    model contents (no timestamps), so identical models serialize
    identically."""
    arrays: Dict[str, np.ndarray] = {}
    for name, arr in model.params.items():
        arrays[name] = np.ascontiguousarray(arr, dtype="<f4")
    arrays["schedule.beta"] = np.ascontiguousarray(model.schedule.beta, dtype="<f8")

    blob_parts = []
    descriptors = []
    offset = 0
    for name, arr in arrays.items():
        raw = arr.tobytes()
        descriptors.append(
            {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape), "offset": offset}
        )
        blob_parts.append(raw)
        offset += len(raw)
    blob = b"".join(blob_parts)

    header = {
        "format_version": FORMAT_VERSION,
        "config": {
            "kind": model.config.kind,
            "n_layers": model.config.n_layers,
            "hidden_dim": model.config.hidden_dim,
            "time_dim": model.config.time_dim,
            "sinusoid_base": model.config.sinusoid_base,
            "norm": model.config.norm,
        },
        "meta": model.meta,
        "arrays": descriptors,
        "blob_nbytes": len(blob),
        "blob_crc32": zlib.crc32(blob),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)


def load_model(path) -> Model:
    """Read a checkpoint back into a Model, validating integrity."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointCorruptError(f"{path}: not a checkpoint (bad magic)")
    (header_len,) = struct.unpack("<I", data[len(MAGIC) : len(MAGIC) + 4])
    header_start = len(MAGIC) + 4
    if len(data) < header_start + header_len:
        raise CheckpointCorruptError(f"{path}: truncated header")
    try:
        header = json.loads(data[header_start : header_start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointCorruptError(f"{path}: unreadable header: {e}") from e

    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: format_version {version} unsupported (want {FORMAT_VERSION})")

    blob = data[header_start + header_len :]
    if len(blob) != header.get("blob_nbytes"):
        raise CheckpointCorruptError(
            f"{path}: blob is {len(blob)} bytes, header says {header.get('blob_nbytes')}"
        )
    if zlib.crc32(blob) != header.get("blob_crc32"):
        raise CheckpointCorruptError(f"{path}: blob CRC mismatch")

    try:
        cfg = GnnConfig(**header["config"])
    except (TypeError, KeyError, ContractError) as e:
        raise CheckpointCorruptError(f"{path}: bad config: {e}") from e

    stored: Dict[str, np.ndarray] = {}
    for desc in header["arrays"]:
        shape = tuple(desc["shape"])
        dt = np.dtype(desc["dtype"])
        nbytes = int(np.prod(shape)) * dt.itemsize if shape else dt.itemsize
        start = desc["offset"]
        if start < 0 or start + nbytes > len(blob):
            raise CheckpointCorruptError(f"{path}: array {desc['name']} overruns blob")
        stored[desc["name"]] = np.frombuffer(blob[start : start + nbytes], dtype=dt).reshape(shape)

    if "schedule.beta" not in stored:
        raise CheckpointCorruptError(f"{path}: missing schedule")
    beta = stored.pop("schedule.beta").astype(np.float64)
    schedule = NoiseSchedule(T=beta.shape[0], beta=beta, beta_bar=_beta_bar_from_beta(beta))

    expected = param_shapes(cfg)
    if set(stored) != set(expected):
        missing = sorted(set(expected) - set(stored))
        extra = sorted(set(stored) - set(expected))
        raise CheckpointShapeError(f"{path}: parameter set mismatch (missing {missing}, extra {extra})")
    params: Dict[str, np.ndarray] = {}
    for name, shape in expected.items():
        arr = stored[name]
        if arr.shape != shape:
            raise CheckpointShapeError(f"{path}: param {name} has shape {arr.shape}, expected {shape}")
        params[name] = arr.astype(np.float32).copy()

    return Model(cfg, params, schedule, meta=header.get("meta", {}))
