"""Binary instance serialization with content hashing.

Layout (all little-endian):

    magic     8 bytes  b"ROPTINST"
    version   u16
    type tag  u8       1 = graph, 2 = tensor, 3 = ksat
    flags     u8       bit 0: provenance present
    label_len u32      provenance label byte length
    seed      i64      provenance seed (0 when absent)
    param_len u32      length of the type-specific parameter block
    payld_len u64      length of the payload block
    label     UTF-8 bytes
    params    type-specific packed block
    payload   raw array bytes

The content hash of an instance is the SHA-256 of these bytes, so equal
parameters and seed give equal hashes across runs and machines.
"""

from __future__ import annotations

import hashlib
import json
import struct
from fractions import Fraction
from math import comb
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import (
    CorruptHeaderError,
    ParameterError,
    TruncatedPayloadError,
    TypeMismatchError,
    VersionMismatchError,
)
from .instances import ErGraph, GaussianTensor, KSatFormula, Provenance

MAGIC = b"ROPTINST"
VERSION = 1
_HEADER = struct.Struct("<8sHBBIqIQ")

_TAG_GRAPH, _TAG_TENSOR, _TAG_KSAT = 1, 2, 3
_TAG_NAMES = {_TAG_GRAPH: "graph", _TAG_TENSOR: "tensor", _TAG_KSAT: "ksat"}

Instance = Union[ErGraph, GaussianTensor, KSatFormula]


def _params_payload(inst: Instance) -> tuple[int, bytes, bytes]:
    if isinstance(inst, ErGraph):
        d = float("nan") if inst.mean_degree is None else float(inst.mean_degree)
        params = struct.pack(
            "<IqQd", inst.n, inst.edge_prob.numerator, inst.edge_prob.denominator, d
        )
        return _TAG_GRAPH, params, inst.bits.tobytes()
    if isinstance(inst, GaussianTensor):
        return _TAG_TENSOR, struct.pack("<II", inst.n, inst.p), inst.entries.tobytes()
    if isinstance(inst, KSatFormula):
        params = struct.pack("<III", inst.n, inst.m, inst.k)
        return _TAG_KSAT, params, np.ascontiguousarray(inst.clauses, dtype="<i4").tobytes()
    raise ParameterError(f"cannot serialize {type(inst).__name__}")


def serialize_instance(inst: Instance) -> bytes:
    tag, params, payload = _params_payload(inst)
    prov = inst.provenance
    label = (prov.label if prov else "").encode("utf-8")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        tag,
        1 if prov else 0,
        len(label),
        prov.seed if prov else 0,
        len(params),
        len(payload),
    )
    return header + label + params + payload


def _expected_payload_len(tag: int, params: bytes) -> int:
    try:
        if tag == _TAG_GRAPH:
            n, _num, _den, _d = struct.unpack("<IqQd", params)
            return (comb(n, 2) + 7) // 8
        if tag == _TAG_TENSOR:
            n, p = struct.unpack("<II", params)
            if p < 2 or n < p or comb(n, p) > 200_000_000:
                raise ValueError("implausible tensor shape")
            return comb(n, p) * 8
        if tag == _TAG_KSAT:
            n, m, k = struct.unpack("<III", params)
            return m * k * 4
    except (struct.error, ValueError) as exc:
        raise TypeMismatchError(f"parameter block does not decode as {_TAG_NAMES.get(tag)}: {exc}") from exc
    raise TypeMismatchError(f"unknown type tag {tag}")


def deserialize_instance(data: bytes, expect: Optional[str] = None) -> Instance:
    """Parse serialized bytes back into an instance.

    Raises CorruptHeaderError / VersionMismatchError / TypeMismatchError /
    TruncatedPayloadError for the distinct failure modes.
    """
    if len(data) < _HEADER.size:
        raise CorruptHeaderError(f"{len(data)} bytes is shorter than the fixed header")
    magic, version, tag, flags, label_len, seed, param_len, payload_len = _HEADER.unpack(
        data[: _HEADER.size]
    )
    if magic != MAGIC:
        raise CorruptHeaderError(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatchError(f"format version {version}, supported {VERSION}")
    if tag not in _TAG_NAMES:
        raise TypeMismatchError(f"unknown type tag {tag}")
    if expect is not None and _TAG_NAMES[tag] != expect:
        raise TypeMismatchError(f"expected a {expect} instance, found {_TAG_NAMES[tag]}")

    off = _HEADER.size
    if len(data) < off + label_len + param_len:
        raise TruncatedPayloadError("stream ends inside label/parameter block")
    label = data[off : off + label_len].decode("utf-8")
    off += label_len
    params = data[off : off + param_len]
    off += param_len

    want = _expected_payload_len(tag, params)
    if payload_len != want:
        raise TypeMismatchError(
            f"declared payload of {payload_len} bytes, a {_TAG_NAMES[tag]} with "
            f"these parameters needs {want}"
        )
    payload = data[off : off + payload_len]
    if len(payload) < payload_len:
        raise TruncatedPayloadError(
            f"payload truncated: have {len(payload)} of {payload_len} bytes"
        )

    prov = Provenance(seed, label) if flags & 1 else None
    try:
        if tag == _TAG_GRAPH:
            n, num, den, d = struct.unpack("<IqQd", params)
            return ErGraph(
                n=n,
                edge_prob=Fraction(num, den),
                bits=np.frombuffer(payload, dtype=np.uint8).copy(),
                mean_degree=None if np.isnan(d) else d,
                provenance=prov,
            )
        if tag == _TAG_TENSOR:
            n, p = struct.unpack("<II", params)
            entries = np.frombuffer(payload, dtype="<f8").copy()
            return GaussianTensor(n=n, p=p, entries=entries, provenance=prov)
        n, m, k = struct.unpack("<III", params)
        clauses = np.frombuffer(payload, dtype="<i4").reshape(m, k).copy()
        return KSatFormula(n=n, k=k, clauses=clauses, provenance=prov)
    except ParameterError as exc:
        raise TypeMismatchError(f"payload is not a valid {_TAG_NAMES[tag]}: {exc}") from exc


def content_hash(inst: Instance) -> str:
    """SHA-256 hex digest of the canonical serialization."""
    return hashlib.sha256(serialize_instance(inst)).hexdigest()


def save_instance(inst: Instance, path: Union[str, Path]) -> str:
    """Write binary file plus `<path>.json` sidecar. Returns the hash."""
    path = Path(path)
    blob = serialize_instance(inst)
    digest = hashlib.sha256(blob).hexdigest()
    path.write_bytes(blob)
    tag, _, _ = _params_payload(inst)
    meta = {
        "format": "randopt-instance",
        "version": VERSION,
        "type": _TAG_NAMES[tag],
        "params": _describe(inst),
        "seed": inst.provenance.seed if inst.provenance else None,
        "label": inst.provenance.label if inst.provenance else None,
        "sha256": digest,
    }
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return digest


def load_instance(path: Union[str, Path], expect: Optional[str] = None) -> Instance:
    return deserialize_instance(Path(path).read_bytes(), expect=expect)


def _describe(inst: Instance) -> dict:
    if isinstance(inst, ErGraph):
        return {
            "n": inst.n,
            "edge_prob": f"{inst.edge_prob.numerator}/{inst.edge_prob.denominator}",
            "mean_degree": inst.mean_degree,
        }
    if isinstance(inst, GaussianTensor):
        return {"n": inst.n, "p": inst.p}
    return {"n": inst.n, "m": inst.m, "k": inst.k}


def graph_to_edgelist(graph: ErGraph) -> str:
    """Plain text: one `i j` line per edge, preceded by a header line."""
    lines = [f"# n={graph.n} edges={graph.edge_count()}"]
    lines += [f"{i} {j}" for i, j in graph.edge_list()]
    return "\n".join(lines) + "\n"
