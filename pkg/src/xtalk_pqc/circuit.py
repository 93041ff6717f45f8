"""Gate-level circuit IR: rx/ry/rz/cx/barrier, DAG layering, parameter binding, text and JSON forms.

Circuits carry an optional ``layout`` mapping circuit qubits onto device qubits so
that small circuits can be simulated on their own register while noise and
scheduling still look up calibration by physical edge.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ROTATIONS = ("rx", "ry", "rz")
GATE_NAMES = ROTATIONS + ("cx", "barrier")


class CircuitError(ValueError):
    """Malformed circuit or circuit text."""


@dataclass(frozen=True)
class GateInstance:
    name: str
    qubits: tuple[int, ...]
    # symbolic slot index (int) or bound angle (float); None for cx/barrier
    param: int | float | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.name not in GATE_NAMES:
            raise CircuitError(f"unknown gate {self.name!r}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"{self.name} acts on duplicate qubits {list(self.qubits)}")
        if self.name == "cx":
            if len(self.qubits) != 2:
                raise CircuitError("cx needs exactly 2 qubits")
            if self.param is not None:
                raise CircuitError("cx takes no parameter")
        elif self.name == "barrier":
            if not self.qubits:
                raise CircuitError("barrier needs at least one qubit")
            if self.param is not None:
                raise CircuitError("barrier takes no parameter")
        else:
            if len(self.qubits) != 1:
                raise CircuitError(f"{self.name} needs exactly 1 qubit")
            if self.param is None:
                raise CircuitError(f"{self.name} needs an angle or parameter slot")
        if isinstance(self.param, bool):
            raise CircuitError("boolean parameter")

    @property
    def is_symbolic(self) -> bool:
        return isinstance(self.param, (int, np.integer))

    @property
    def angle(self) -> float:
        if self.param is None or self.is_symbolic:
            raise CircuitError(f"{self.name} on {list(self.qubits)} has no bound angle")
        return float(self.param)


def rx(q: int, param) -> GateInstance:
    return GateInstance("rx", (q,), param)


def ry(q: int, param) -> GateInstance:
    return GateInstance("ry", (q,), param)


def rz(q: int, param) -> GateInstance:
    return GateInstance("rz", (q,), param)


def cx(c: int, t: int) -> GateInstance:
    return GateInstance("cx", (c, t))


def barrier(*qubits: int) -> GateInstance:
    return GateInstance("barrier", tuple(qubits))


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    ops: tuple[GateInstance, ...]
    num_params: int = 0
    layout: tuple[int, ...] | None = None
    metadata: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if self.layout is not None:
            object.__setattr__(self, "layout", tuple(int(q) for q in self.layout))
            if len(self.layout) != self.num_qubits or len(set(self.layout)) != self.num_qubits:
                raise CircuitError("layout must map every circuit qubit to a distinct device qubit")
        seen = set()
        for op in self.ops:
            for q in op.qubits:
                if not 0 <= q < self.num_qubits:
                    raise CircuitError(f"qubit {q} out of range for {self.num_qubits}-qubit circuit")
            if op.is_symbolic:
                seen.add(int(op.param))
        if seen != set(range(self.num_params)):
            raise CircuitError(
                f"symbolic slots {sorted(seen)} do not cover [0, {self.num_params})"
            )

    @classmethod
    def from_ops(cls, num_qubits: int, ops: Iterable[GateInstance], layout=None, **metadata) -> "Circuit":
        ops = tuple(ops)
        slots = {int(op.param) for op in ops if op.is_symbolic}
        return cls(num_qubits, ops, len(slots), layout, dict(metadata))

    def device_qubit(self, q: int) -> int:
        return q if self.layout is None else self.layout[q]

    def device_edge(self, op: GateInstance) -> tuple[int, int]:
        a, b = op.qubits
        return (self.device_qubit(a), self.device_qubit(b))

    def count(self, name: str) -> int:
        return sum(op.name == name for op in self.ops)

    def __len__(self):
        return len(self.ops)


def bind(c: Circuit, theta: Sequence[float]) -> Circuit:
    """Replace every symbolic slot with ``theta[slot]``."""
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape[0] != c.num_params:
        raise CircuitError(f"expected {c.num_params} parameters, got {theta.shape[0]}")
    if c.num_params == 0:
        return c
    ops = tuple(
        GateInstance(op.name, op.qubits, float(theta[int(op.param)])) if op.is_symbolic else op
        for op in c.ops
    )
    return Circuit(c.num_qubits, ops, 0, c.layout, dict(c.metadata))


@dataclass(frozen=True)
class DagLayering:
    layers: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)


def build_dag_layers(c: Circuit) -> DagLayering:
    """ASAP layering of op indices. Barriers occupy no layer but align their qubits."""
    level = [0] * c.num_qubits
    layers: list[list[int]] = []
    for i, op in enumerate(c.ops):
        k = max(level[q] for q in op.qubits)
        if op.name == "barrier":
            for q in op.qubits:
                level[q] = k
            continue
        if k == len(layers):
            layers.append([])
        layers[k].append(i)
        for q in op.qubits:
            level[q] = k + 1
    return DagLayering(tuple(tuple(layer) for layer in layers))


# -- text form ---------------------------------------------------------------

def _format_param(p) -> str:
    if isinstance(p, (int, np.integer)) and not isinstance(p, bool):
        return f"p{int(p)}"
    return repr(float(p))


def write_circuit(c: Circuit) -> str:
    lines = [f"qubits {c.num_qubits}"]
    if c.layout is not None:
        lines.append("layout " + " ".join(map(str, c.layout)))
    for op in c.ops:
        parts = [op.name, *map(str, op.qubits)]
        if op.param is not None:
            parts.append(_format_param(op.param))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


_PI_FORM = re.compile(r"^([+-]?)(?:(\d+(?:\.\d*)?)\*)?pi(?:/(\d+(?:\.\d*)?))?$")


def _parse_angle(tok: str) -> int | float:
    """``p<k>`` slot, a float, or a multiple of pi such as ``-pi/2`` or ``3*pi/4``."""
    if tok.startswith("p") and tok[1:].isdigit():
        return int(tok[1:])
    m = _PI_FORM.match(tok)
    if m:
        sign, num, den = m.groups()
        value = math.pi * float(num or 1) / float(den or 1)
        return -value if sign == "-" else value
    try:
        return float(tok)
    except ValueError:
        raise ValueError(f"bad angle {tok!r}") from None


def read_circuit(text: str) -> Circuit:
    num_qubits = None
    layout = None
    ops = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head = toks[0].lower()
        try:
            if head == "qubits":
                num_qubits = int(toks[1])
                continue
            if head == "layout":
                layout = tuple(int(t) for t in toks[1:])
                continue
            if head not in GATE_NAMES:
                raise CircuitError(f"unknown gate {toks[0]!r}")
            if head in ROTATIONS:
                if len(toks) != 3:
                    raise CircuitError(f"{head} expects '<qubit> <angle|p<k>>'")
                op = GateInstance(head, (int(toks[1]),), _parse_angle(toks[2]))
            else:
                op = GateInstance(head, tuple(int(t) for t in toks[1:]))
            if num_qubits is not None and max(op.qubits) >= num_qubits:
                raise CircuitError(f"qubit {max(op.qubits)} out of range")
            ops.append(op)
        except (CircuitError, ValueError, IndexError) as exc:
            raise CircuitError(f"line {lineno}: {exc}") from None
    if num_qubits is None:
        num_qubits = 1 + max((q for op in ops for q in op.qubits), default=-1)
    return Circuit.from_ops(num_qubits, ops, layout=layout)


# -- JSON mirror -------------------------------------------------------------

def circuit_to_dict(c: Circuit) -> dict:
    out = {
        "num_qubits": c.num_qubits,
        "ops": [
            {"name": op.name, "qubits": list(op.qubits)}
            | ({} if op.param is None else {"param": _format_param(op.param) if op.is_symbolic else float(op.param)})
            for op in c.ops
        ],
        "num_params": c.num_params,
    }
    if c.layout is not None:
        out["layout"] = list(c.layout)
    return out


def circuit_from_dict(d: dict) -> Circuit:
    ops = []
    for entry in d["ops"]:
        p = entry.get("param")
        if isinstance(p, str):
            p = _parse_angle(p)
        ops.append(GateInstance(entry["name"], tuple(entry["qubits"]), p))
    c = Circuit(int(d["num_qubits"]), tuple(ops), int(d.get("num_params", 0)), d.get("layout"))
    return c


def dumps_json(c: Circuit) -> str:
    return json.dumps(circuit_to_dict(c), indent=1)


def loads_json(s: str) -> Circuit:
    return circuit_from_dict(json.loads(s))
