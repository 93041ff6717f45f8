"""Device topology, calibration and the pairwise CNOT crosstalk table."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import networkx as nx

Edge = tuple[int, int]


class DeviceError(ValueError):
    """Invalid or incomplete device description."""


class MappingError(DeviceError):
    """A circuit does not fit the device topology."""


def norm_edge(e: Iterable[int]) -> Edge:
    a, b = e
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CouplingMap:
    num_qubits: int
    edges: frozenset[Edge]

    def __post_init__(self):
        edges = frozenset(norm_edge(e) for e in self.edges)
        for a, b in edges:
            if a == b:
                raise DeviceError(f"self-loop on qubit {a}")
            if not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise DeviceError(f"edge ({a},{b}) outside {self.num_qubits} qubits")
        object.__setattr__(self, "edges", edges)

    @cached_property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.num_qubits))
        g.add_edges_from(self.edges)
        return g

    def has_edge(self, a: int, b: int) -> bool:
        return norm_edge((a, b)) in self.edges

    def distance(self, a: int, b: int) -> int:
        return self._distances[a].get(b, 10**9)

    @cached_property
    def _distances(self) -> dict[int, dict[int, int]]:
        return dict(nx.all_pairs_shortest_path_length(self.graph))

    def find_path(self, n: int) -> list[int]:
        """First simple path of ``n`` qubits in DFS order from the lowest start qubit."""
        if n == 1:
            return [0]
        adj = {q: sorted(self.graph.neighbors(q)) for q in range(self.num_qubits)}

        def extend(path, used):
            if len(path) == n:
                return path
            for nb in adj[path[-1]]:
                if nb not in used:
                    used.add(nb)
                    found = extend(path + [nb], used)
                    if found:
                        return found
                    used.discard(nb)
            return None

        for start in range(self.num_qubits):
            found = extend([start], {start})
            if found:
                return found
        raise MappingError(f"no {n}-qubit line on this {self.num_qubits}-qubit device")


def one_hop_pairs(cmap: CouplingMap) -> list[tuple[Edge, Edge]]:
    """Ordered pairs of qubit-disjoint edges whose closest endpoints are adjacent."""
    edges = sorted(cmap.edges)
    out = []
    for e1 in edges:
        for e2 in edges:
            if e1 == e2 or set(e1) & set(e2):
                continue
            if min(cmap.distance(a, b) for a in e1 for b in e2) == 1:
                out.append((e1, e2))
    return out


@dataclass(frozen=True)
class QubitCal:
    t1: float  # us
    t2: float  # us

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise DeviceError(f"non-positive coherence time T1={self.t1} T2={self.t2}")

    @property
    def t_min(self) -> float:
        return min(self.t1, self.t2)


@dataclass(frozen=True)
class GateCal:
    gate: str
    qubits: tuple[int, ...]
    duration: float  # ns
    epc: float

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if not self.duration > 0:
            raise DeviceError(f"{self.gate}{list(self.qubits)}: duration must be positive")
        if not 0 <= self.epc < 1:
            raise DeviceError(f"{self.gate}{list(self.qubits)}: epc must lie in [0, 1)")


@dataclass(frozen=True)
class CrosstalkTable:
    """Conditional EPC E(g1|g2) keyed by ordered edge pairs, plus the independent rates."""

    conditional: Mapping[tuple[Edge, Edge], float] = field(default_factory=dict)
    independent: Mapping[Edge, float] = field(default_factory=dict)

    def __post_init__(self):
        cond = {(norm_edge(a), norm_edge(b)): float(v) for (a, b), v in self.conditional.items()}
        indep = {norm_edge(e): float(v) for e, v in self.independent.items()}
        for (a, b), v in cond.items():
            if set(a) & set(b):
                raise DeviceError(f"crosstalk entry {a}|{b} shares a qubit")
            if not v > 0:
                raise DeviceError(f"crosstalk entry {a}|{b} must be positive")
        object.__setattr__(self, "conditional", cond)
        object.__setattr__(self, "independent", indep)

    def multiplier(self, g1: Edge, g2: Edge) -> float:
        key = (norm_edge(g1), norm_edge(g2))
        if key not in self.conditional:
            return 1.0
        base = self.independent.get(key[0])
        if not base:
            return 1.0
        return self.conditional[key] / base

    def conditional_epc(self, g1: Edge, g2: Edge) -> float | None:
        return self.conditional.get((norm_edge(g1), norm_edge(g2)))

    def __len__(self):
        return len(self.conditional)


def multiplier(x: CrosstalkTable, g1_edge: Edge, g2_edge: Edge) -> float:
    return x.multiplier(g1_edge, g2_edge)


@dataclass(frozen=True)
class DeviceModel:
    coupling: CouplingMap
    qubit_cal: tuple[QubitCal, ...]
    gate_cal: tuple[GateCal, ...]
    xtalk: CrosstalkTable = field(default_factory=CrosstalkTable)
    name: str = "device"

    def __post_init__(self):
        object.__setattr__(self, "qubit_cal", tuple(self.qubit_cal))
        object.__setattr__(self, "gate_cal", tuple(self.gate_cal))
        if len(self.qubit_cal) != self.coupling.num_qubits:
            raise DeviceError(
                f"{len(self.qubit_cal)} qubit calibrations for {self.coupling.num_qubits} qubits"
            )
        cx_edges = set()
        for g in self.gate_cal:
            if g.gate == "cx":
                if not self.coupling.has_edge(*g.qubits):
                    raise DeviceError(f"cx calibration on non-edge {tuple(g.qubits)}")
                cx_edges.add(norm_edge(g.qubits))
        for e in sorted(self.coupling.edges):
            if e not in cx_edges:
                raise DeviceError(f"edge ({e[0]},{e[1]}) uncalibrated")
        # the table's independent rates always mirror the gate calibration
        indep = {e: self.cx_cal(e).epc for e in self.coupling.edges}
        if dict(self.xtalk.independent) != indep:
            object.__setattr__(self, "xtalk", CrosstalkTable(self.xtalk.conditional, indep))

    @property
    def num_qubits(self) -> int:
        return self.coupling.num_qubits

    @cached_property
    def _gate_index(self) -> dict:
        idx = {}
        for g in self.gate_cal:
            key = (g.gate, norm_edge(g.qubits) if g.gate == "cx" else tuple(g.qubits))
            idx[key] = g
        return idx

    def cx_cal(self, edge: Edge) -> GateCal:
        try:
            return self._gate_index[("cx", norm_edge(edge))]
        except KeyError:
            raise MappingError(f"cx on non-edge {tuple(edge)}") from None

    def gate(self, name: str, qubits: tuple[int, ...]) -> GateCal:
        if name == "cx":
            return self.cx_cal(tuple(qubits))
        try:
            return self._gate_index[(name, tuple(qubits))]
        except KeyError:
            raise DeviceError(f"gate {name}{list(qubits)} uncalibrated") from None

    def epc(self, edge: Edge) -> float:
        return self.cx_cal(edge).epc

    def multiplier(self, g1: Edge, g2: Edge) -> float:
        return self.xtalk.multiplier(g1, g2)

    def with_xtalk(self, table: CrosstalkTable | Mapping) -> "DeviceModel":
        if not isinstance(table, CrosstalkTable):
            table = CrosstalkTable(table)
        return replace(self, xtalk=table)

    def with_measured(self, table: CrosstalkTable) -> "DeviceModel":
        """Adopt a characterized table, including its independent cx rates."""
        gates = tuple(
            replace(g, epc=table.independent.get(norm_edge(g.qubits), g.epc)) if g.gate == "cx" else g
            for g in self.gate_cal
        )
        return replace(self, gate_cal=gates, xtalk=table)

    def with_multipliers(self, mult: Mapping[tuple[Edge, Edge], float]) -> "DeviceModel":
        """Crosstalk table given as conditional/independent ratios."""
        cond = {(norm_edge(a), norm_edge(b)): r * self.epc(a) for (a, b), r in mult.items()}
        return self.with_xtalk(CrosstalkTable(cond))

    def scaled_epc(self, k: float) -> "DeviceModel":
        gates = tuple(replace(g, epc=g.epc * k) for g in self.gate_cal)
        cond = {key: v * k for key, v in self.xtalk.conditional.items()}
        return replace(self, gate_cal=gates, xtalk=CrosstalkTable(cond))

    @cached_property
    def fingerprint(self) -> str:
        return hashlib.sha1(json.dumps(device_to_dict(self), sort_keys=True).encode()).hexdigest()[:16]

    def __hash__(self):
        return hash(self.fingerprint)


# -- JSON --------------------------------------------------------------------

def device_to_dict(d: DeviceModel) -> dict:
    return {
        "name": d.name,
        "num_qubits": d.num_qubits,
        "edges": [list(e) for e in sorted(d.coupling.edges)],
        "qubits": [{"t1_us": q.t1, "t2_us": q.t2} for q in d.qubit_cal],
        "gates": [
            {"name": g.gate, "qubits": list(g.qubits), "duration_ns": g.duration, "epc": g.epc}
            for g in d.gate_cal
        ],
        "xtalk": [
            {"g1": list(a), "g2": list(b), "conditional_epc": v}
            for (a, b), v in sorted(d.xtalk.conditional.items())
        ],
    }


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise DeviceError(f"{where}: missing field '{key}'")
    return d[key]


def device_from_dict(d: dict) -> DeviceModel:
    if not isinstance(d, dict):
        raise DeviceError("device JSON must be an object")
    n = int(_require(d, "num_qubits", "device"))
    edges = [tuple(e) for e in _require(d, "edges", "device")]
    for e in edges:
        if len(e) != 2:
            raise DeviceError(f"edge {list(e)} must have two endpoints")
    qubits = _require(d, "qubits", "device")
    if len(qubits) != n:
        raise DeviceError(f"{len(qubits)} qubit entries for num_qubits={n}")
    qcal = tuple(
        QubitCal(float(_require(q, "t1_us", f"qubit {i}")), float(_require(q, "t2_us", f"qubit {i}")))
        for i, q in enumerate(qubits)
    )
    gcal = tuple(
        GateCal(
            _require(g, "name", f"gate {i}"),
            tuple(_require(g, "qubits", f"gate {i}")),
            float(_require(g, "duration_ns", f"gate {i}")),
            float(_require(g, "epc", f"gate {i}")),
        )
        for i, g in enumerate(_require(d, "gates", "device"))
    )
    cond = {}
    for i, x in enumerate(d.get("xtalk", [])):
        cond[(tuple(_require(x, "g1", f"xtalk {i}")), tuple(_require(x, "g2", f"xtalk {i}")))] = float(
            _require(x, "conditional_epc", f"xtalk {i}")
        )
    return DeviceModel(CouplingMap(n, frozenset(edges)), qcal, gcal, CrosstalkTable(cond), d.get("name", "device"))


def load_device(path: str | Path) -> DeviceModel:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DeviceError(f"{path}: invalid JSON ({exc})") from None
    return device_from_dict(data)


def save_device(d: DeviceModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(device_to_dict(d), indent=1) + "\n")


def default_device() -> DeviceModel:
    """The shipped 16-qubit heavy-hex device with a representative crosstalk table."""
    text = resources.files("xtalk_pqc.data").joinpath("guadalupe.json").read_text()
    return device_from_dict(json.loads(text))


def uniform_device(
    cmap: CouplingMap,
    cx_epc: float = 1e-2,
    cx_duration: float = 300.0,
    t1: float = 100.0,
    t2: float = 100.0,
    sq_duration: float = 35.0,
    sq_epc: float = 3e-4,
    name: str = "uniform",
) -> DeviceModel:
    """Flat calibration on an arbitrary coupling map, no crosstalk entries."""
    gates = [GateCal("cx", e, cx_duration, cx_epc) for e in sorted(cmap.edges)]
    for q in range(cmap.num_qubits):
        gates += [GateCal(g, (q,), sq_duration, sq_epc) for g in ("rx", "ry", "rz")]
    qcal = [QubitCal(t1, t2)] * cmap.num_qubits
    return DeviceModel(cmap, tuple(qcal), tuple(gates), CrosstalkTable(), name)
