"""The .mcnc binary format for compressed models.

Layout (all integers little-endian):

    magic "MCNC" | version u16 | header_len u32 | header JSON (UTF-8,
    canonical key order) | payload | crc32 u32

Payload order: alpha matrix, beta vector (if present), values of
uncompressed layers (layer-table order), embedded theta0 buffers for
compressed layers (layer-table order, only when the base is not
seed-specified). All arrays are float32 little-endian; training arrays
are float64 in memory and truncate on save. The trailing CRC32 (IEEE,
reflected — zlib's crc32) covers every byte before it and is verified
before the payload is interpreted.
"""
import json
import os
import struct
import zlib

import numpy as np

from .errors import CrcMismatchError, FormatError, UnsupportedVersionError
from .generator import GeneratorConfig
from .reparam import CompressedModel, LayerInfo

MAGIC = b"MCNC"
VERSION = 1

_F32 = np.dtype("<f4")


def _f32_bytes(arr):
    return np.ascontiguousarray(arr, dtype=_F32).tobytes()


def save_compressed(cm, path):
    """Write ``cm`` to ``path``; returns the number of bytes written."""
    header = {
        "arrays": "f32-le",
        "base": {"seed": cm.base_seed} if cm.base_seed is not None else {"embedded": True},
        "chunk_scope": cm.scope,
        "generator": cm.generator_config.to_dict(),
        "has_betas": cm.betas is not None,
        "layers": [
            {"name": l.name, "shape": list(l.shape), "compressed": bool(l.compressed)} for l in cm.layers
        ],
        "model_meta": cm.model_meta,
        "n_chunks": int(cm.alphas.shape[0]),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()

    chunks = [MAGIC, struct.pack("<HI", VERSION, len(header_bytes)), header_bytes]
    chunks.append(_f32_bytes(cm.alphas))
    if cm.betas is not None:
        chunks.append(_f32_bytes(cm.betas))
    for layer in cm.layers:
        if not layer.compressed:
            chunks.append(_f32_bytes(cm.uncompressed_values[layer.name]))
    if cm.base_seed is None:
        for layer in cm.layers:
            if layer.compressed:
                chunks.append(_f32_bytes(cm.base_buffers[layer.name]))
    body = b"".join(chunks)
    blob = body + struct.pack("<I", zlib.crc32(body))
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as err:
        raise FormatError(f"cannot write {path}: {err}") from err
    return len(blob)


def load_compressed(path):
    """Read and validate a .mcnc file back into a CompressedModel."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as err:
        raise FormatError(f"cannot read {path}: {err}") from err

    if len(blob) < 14 or blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic (not an MCNC file)")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    actual_crc = zlib.crc32(blob[:-4])
    if stored_crc != actual_crc:
        raise CrcMismatchError(f"{path}: CRC mismatch (stored 0x{stored_crc:08x}, computed 0x{actual_crc:08x})")

    version, header_len = struct.unpack("<HI", blob[4:10])
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: format version {version} not supported (expected {VERSION})")
    header_end = 10 + header_len
    if header_end > len(blob) - 4:
        raise FormatError(f"{path}: header length {header_len} exceeds file size")
    try:
        header = json.loads(blob[10:header_end].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise FormatError(f"{path}: malformed header JSON: {err}") from err

    try:
        gen_config = GeneratorConfig.from_dict(header["generator"])
        layers = [
            LayerInfo(l["name"], tuple(int(s) for s in l["shape"]), bool(l["compressed"]))
            for l in header["layers"]
        ]
        n_chunks = int(header["n_chunks"])
        has_betas = bool(header["has_betas"])
        base = header["base"]
        scope = header["chunk_scope"]
        model_meta = header.get("model_meta", {})
        if header["arrays"] != "f32-le":
            raise FormatError(f"{path}: unknown array encoding {header['arrays']!r}")
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, FormatError):
            raise
        raise FormatError(f"{path}: incomplete header: {err}") from err

    payload = memoryview(blob)[header_end : len(blob) - 4]
    offset = 0

    def take(count, what):
        nonlocal offset
        nbytes = count * 4
        if offset + nbytes > len(payload):
            raise FormatError(f"{path}: payload too short while reading {what} at offset {header_end + offset}")
        arr = np.frombuffer(payload[offset : offset + nbytes], dtype=_F32).astype(np.float64)
        offset += nbytes
        return arr

    alphas = take(n_chunks * gen_config.k, "alphas").reshape(n_chunks, gen_config.k)
    betas = take(n_chunks, "betas") if has_betas else None
    uncompressed = {}
    for layer in layers:
        if not layer.compressed:
            uncompressed[layer.name] = take(layer.n_params, f"values of {layer.name}").reshape(layer.shape)
    base_buffers = None
    base_seed = None
    if "seed" in base:
        base_seed = int(base["seed"])
    else:
        base_buffers = {}
        for layer in layers:
            if layer.compressed:
                base_buffers[layer.name] = take(layer.n_params, f"theta0 of {layer.name}").reshape(layer.shape)
    if offset != len(payload):
        raise FormatError(f"{path}: {len(payload) - offset} unexpected trailing payload bytes")

    return CompressedModel(
        generator_config=gen_config,
        layers=layers,
        alphas=alphas,
        betas=betas,
        scope=scope,
        base_seed=base_seed,
        base_buffers=base_buffers,
        uncompressed_values=uncompressed,
        model_meta=model_meta,
    )


def file_size(path):
    return os.path.getsize(path)
