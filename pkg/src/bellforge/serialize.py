"""JSON encoding for arrays, truth tables, protocols, and reports.

Matrices and state vectors serialize as {"shape": [...], "data": [...]}
with the complex entries flattened row-major and interleaved as
real, imag pairs.  Floats are written in shortest-roundtrip decimal
text, so decoding reproduces every bit.  Canonical report text sorts
keys, indents by two spaces, and spells non-finite values as the strings
"Infinity" / "-Infinity"; NaN is rejected outright.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Any

import numpy as np

from .bell import BellReport, CorrelationTable, PortSchedule
from .protocols import CommProtocol, TruthTable
from .states import Povm

SCHEMA_VERSION = 1


def encode_array(a: np.ndarray) -> dict[str, Any]:
    """Row-major interleaved real/imag encoding of a numeric array."""
    arr = np.asarray(a, dtype=np.complex128)
    stacked = np.stack([arr.real.ravel(), arr.imag.ravel()], axis=1)
    return {"shape": list(arr.shape),
            "data": [float(v) for v in stacked.ravel()]}


def decode_array(obj: dict[str, Any]) -> np.ndarray:
    """Inverse of encode_array; returns a complex array."""
    shape = tuple(int(s) for s in obj["shape"])
    data = obj["data"]
    n = math.prod(shape)
    if len(data) != 2 * n:
        raise ValueError(f"array data length {len(data)} does not match "
                         f"2 * prod{shape}")
    flat = np.asarray(data, dtype=np.float64).reshape(n, 2)
    return np.ascontiguousarray(
        (flat[:, 0] + 1j * flat[:, 1]).reshape(shape))


def truth_to_dict(t: TruthTable) -> dict[str, Any]:
    return {"n": t.n,
            "f": t.f.astype(int).tolist(),
            "mu": t.mu.tolist()}


def truth_from_dict(d: dict[str, Any]) -> TruthTable:
    return TruthTable(n=int(d["n"]), f=np.asarray(d["f"]),
                      mu=np.asarray(d["mu"], dtype=np.float64))


def protocol_to_dict(p: CommProtocol) -> dict[str, Any]:
    size = p.truth.num_inputs
    return {
        "format": "bellforge-protocol",
        "schema_version": SCHEMA_VERSION,
        "truth": truth_to_dict(p.truth),
        "epsilon": p.epsilon,
        "rounds": p.rounds,
        "registers": {
            "a0_dim": p.a0_dim,
            "b0_dim": p.b0_dim,
            "m_out_dims": list(p.m_out_dims),
            "m_back_dims": list(p.m_back_dims),
            "a_dims": list(p.a_dims),
            "b_dims": list(p.b_dims),
            "anc_a_dims": list(p.anc_a_dims),
            "anc_b_dims": list(p.anc_b_dims),
        },
        "alice_ops": [[encode_array(ops[x]) for x in range(size)]
                      for ops in p.alice_ops],
        "bob_ops": [[encode_array(ops[x]) for x in range(size)]
                    for ops in p.bob_ops],
        "observables": [[encode_array(e) for e in p.observables[y].elements]
                        for y in range(size)],
    }


def protocol_from_dict(d: dict[str, Any]) -> CommProtocol:
    if d.get("format") != "bellforge-protocol":
        raise ValueError("not a protocol document (missing format tag)")
    if int(d.get("schema_version", 0)) > SCHEMA_VERSION:
        raise ValueError(f"protocol schema version {d['schema_version']} "
                         f"is newer than supported {SCHEMA_VERSION}")
    truth = truth_from_dict(d["truth"])
    size = truth.num_inputs
    regs = d["registers"]
    eps = d.get("epsilon")
    return CommProtocol(
        truth=truth,
        rounds=int(d["rounds"]),
        a0_dim=int(regs["a0_dim"]),
        b0_dim=int(regs["b0_dim"]),
        m_out_dims=tuple(int(v) for v in regs["m_out_dims"]),
        m_back_dims=tuple(int(v) for v in regs["m_back_dims"]),
        a_dims=tuple(int(v) for v in regs["a_dims"]),
        b_dims=tuple(int(v) for v in regs["b_dims"]),
        anc_a_dims=tuple(int(v) for v in regs["anc_a_dims"]),
        anc_b_dims=tuple(int(v) for v in regs["anc_b_dims"]),
        alice_ops=tuple({x: decode_array(m) for x, m in enumerate(ops)}
                        for ops in d["alice_ops"]),
        bob_ops=tuple({x: decode_array(m) for x, m in enumerate(ops)}
                      for ops in d["bob_ops"]),
        observables={y: Povm([decode_array(e) for e in els])
                     for y, els in enumerate(d["observables"])},
        epsilon=None if eps is None else float(eps),
    )


def load_protocol(path: str) -> CommProtocol:
    with open(path, "r", encoding="utf-8") as fh:
        return protocol_from_dict(json.load(fh))


def schedule_to_dict(s: PortSchedule | None) -> dict[str, Any] | None:
    if s is None:
        return None
    return {"port_counts": list(s.port_counts),
            "port_dims": list(s.port_dims)}


def table_to_dict(table: CorrelationTable) -> dict[str, Any]:
    return {
        "format": "bellforge-correlations",
        "schema_version": SCHEMA_VERSION,
        "truth": truth_to_dict(table.truth),
        "schedule": schedule_to_dict(table.schedule),
        "axes": list(table.axes),
        "mode": table.mode,
        "seed": table.seed,
        "trials": table.trials,
        "tables": {f"{x},{y}": encode_array(arr)
                   for (x, y), arr in sorted(table.tables.items())},
    }


def table_from_dict(d: dict[str, Any]) -> CorrelationTable:
    if d.get("format") != "bellforge-correlations":
        raise ValueError("not a correlation document (missing format tag)")
    sched = d["schedule"]
    s = None if sched is None else PortSchedule(
        tuple(int(v) for v in sched["port_counts"]),
        tuple(int(v) for v in sched["port_dims"]))
    tables = {}
    for key, enc in d["tables"].items():
        x, y = (int(v) for v in key.split(","))
        tables[(x, y)] = decode_array(enc).real
    return CorrelationTable(
        truth=truth_from_dict(d["truth"]), schedule=s,
        axes=tuple(int(v) for v in d["axes"]), tables=tables,
        mode=d["mode"], seed=d["seed"], trials=d["trials"])


def report_to_dict(rep: BellReport) -> dict[str, Any]:
    return {
        "bell_value": rep.bell_value,
        "shifted_value": rep.shifted_value,
        "classical_delta": rep.classical_delta,
        "classical_method": rep.classical_method,
        "ratio": rep.ratio,
        "schedule": schedule_to_dict(rep.schedule),
        "mode": rep.mode,
        "seed": rep.seed,
        "budget_bits": rep.budget_bits,
        "meta": rep.meta,
    }


def _sanitize(obj: Any) -> Any:
    """Convert to plain JSON types; stringify infinities, reject NaN."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode_array(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            raise ValueError("NaN is not representable in reports")
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__} in a report")


def dumps_canonical(obj: Any) -> str:
    """Deterministic report text: sorted keys, two-space indent, exact
    shortest-roundtrip floats, trailing newline."""
    return json.dumps(_sanitize(obj), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"


def atomic_write_text(path: str, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never observe
    a partial report."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bellforge-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
