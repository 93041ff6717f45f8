"""Crosstalk-adaptive scheduling of one entangling layer.

A layer is a list of cx edges in program order. A schedule splits it into
ordered, barrier-delimited sub-layers of qubit-disjoint gates. Each schedule is
scored by

    omega * sum_g ln(eps_g) + (1 - omega) * sum_q t_q / T_q

and minimized exactly by branch and bound. ``eps_g`` is the largest admitted
conditional error among g's sub-layer partners, falling back to the
independent rate. ``t_q`` is the span from qubit q's first gate start to its
last gate finish.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .circuit import Circuit, GateInstance, barrier, cx
from .device import DeviceModel, Edge, MappingError, norm_edge

log = logging.getLogger(__name__)

MAX_EXACT_GATES = 12
EPS_FLOOR = 1e-12
OMEGA_PRESETS = {"high": 0.0, "medium": 0.5, "low": 1.0}


class ScheduleError(ValueError):
    pass


# -- ALA approximation -------------------------------------------------------

def _disjoint(a: Edge, b: Edge) -> bool:
    return not (set(a) & set(b))


def ala_groups(edges: Sequence[Edge], exact_limit: int = 12) -> list[list[int]]:
    """Split gate indices into the fewest qubit-disjoint groups (edge coloring).

    Exact search for up to ``exact_limit`` gates, greedy coloring in program
    order beyond that. Groups are ordered by their first gate.
    """
    n = len(edges)
    if n == 0:
        return []

    def greedy() -> list[list[int]]:
        groups: list[list[int]] = []
        for i, e in enumerate(edges):
            for g in groups:
                if all(_disjoint(e, edges[j]) for j in g):
                    g.append(i)
                    break
            else:
                groups.append([i])
        return groups

    best = greedy()
    if n <= exact_limit:
        degree = max(sum(q in e for e in edges) for q in {q for e in edges for q in e})
        for k in range(degree, len(best)):
            colors = [-1] * n

            def assign(i: int) -> bool:
                if i == n:
                    return True
                used = {colors[j] for j in range(i) if not _disjoint(edges[i], edges[j])}
                # symmetry break: a new color only one past the highest used
                top = max(colors[:i], default=-1)
                for c in range(min(k, top + 2)):
                    if c not in used:
                        colors[i] = c
                        if assign(i + 1):
                            return True
                colors[i] = -1
                return False

            if assign(0):
                best = [[i for i in range(n) if colors[i] == c] for c in range(k)]
                break
    return sorted((g for g in best if g), key=lambda g: g[0])


def _entangling_span(c: Circuit) -> tuple[int, int] | None:
    """[start, stop) of the first maximal run of cx/barrier ops containing a cx."""
    start = None
    for i, op in enumerate(c.ops):
        if op.name == "cx" and start is None:
            start = i
            while start > 0 and c.ops[start - 1].name == "barrier":
                start -= 1
        if start is not None and op.name not in ("cx", "barrier"):
            return start, i
    return None if start is None else (start, len(c.ops))


def first_entangling_layer(c: Circuit) -> list[GateInstance]:
    span = _entangling_span(c)
    if span is None:
        return []
    return [op for op in c.ops[span[0] : span[1]] if op.name == "cx"]


def _check_edges(c: Circuit, gates: Iterable[GateInstance], device: DeviceModel):
    for op in gates:
        a, b = c.device_edge(op)
        if not device.coupling.has_edge(a, b):
            raise MappingError(f"cx on non-edge ({a},{b})")


def approximate_to_ala(c: Circuit, device: DeviceModel) -> Circuit:
    """Re-emit the first entangling layer as barrier-separated disjoint groups."""
    span = _entangling_span(c)
    if span is None:
        return c
    gates = [op for op in c.ops[span[0] : span[1]] if op.name == "cx"]
    _check_edges(c, gates, device)
    groups = ala_groups([op.qubits for op in gates])
    touched = sorted({q for op in gates for q in op.qubits})
    block: list[GateInstance] = []
    for k, g in enumerate(groups):
        if k:
            block.append(barrier(*touched))
        block += [gates[i] for i in g]
    ops = c.ops[: span[0]] + tuple(block) + c.ops[span[1] :]
    return Circuit(c.num_qubits, ops, c.num_params, c.layout, dict(c.metadata))


# -- cost model --------------------------------------------------------------

def decoherence_error(lifetime_ns: float, t1_us: float, t2_us: float) -> float:
    if lifetime_ns < 0:
        raise ValueError("lifetime must be non-negative")
    return -math.expm1(-lifetime_ns * 1e-9 / (min(t1_us, t2_us) * 1e-6))


def admitted(device: DeviceModel, g: Edge, h: Edge, threshold: float = 1.0) -> bool:
    """True when E(g|h) is tabulated and its ratio to E(g) exceeds ``threshold``."""
    cond = device.xtalk.conditional_epc(g, h)
    return cond is not None and cond / device.epc(g) > threshold


def gate_error(g: Edge, concurrent: Iterable[Edge], device: DeviceModel, threshold: float = 1.0) -> float:
    """Max admitted conditional error of ``g`` given the concurrent gates, else E(g)."""
    rates = [
        device.xtalk.conditional_epc(g, h) for h in concurrent if norm_edge(h) != norm_edge(g) and admitted(device, g, h, threshold)
    ]
    return max(rates) if rates else device.epc(g)


LIFETIME_MODES = ("layer", "gates")


@dataclass(frozen=True)
class CostModel:
    """Knobs of the scheduling objective.

    ``lifetime="layer"``: every qubit of the layer lives from the layer start to
    its end, since rotation layers bracket the entangling layer in a PQC.
    ``lifetime="gates"``: a qubit lives from its first cx start to its last cx
    finish inside the layer. ``literal_sign`` subtracts the decoherence term.
    ``keep_order`` makes gates sharing any qubit keep their input order.
    """

    omega: float
    threshold: float = 1.0
    lifetime: str = "layer"
    literal_sign: bool = False
    keep_order: bool = False

    def __post_init__(self):
        if not 0 <= self.omega <= 1:
            raise ValueError("omega must lie in [0, 1]")
        if self.lifetime not in LIFETIME_MODES:
            raise ValueError(f"lifetime must be one of {LIFETIME_MODES}")


@dataclass(frozen=True)
class Schedule:
    gates: tuple[Edge, ...]
    sublayers: tuple[tuple[int, ...], ...]
    start: dict[int, float]
    objective_value: float
    cost: CostModel
    errors: dict[int, float] = field(default_factory=dict, compare=False)
    lifetimes: dict[int, float] = field(default_factory=dict, compare=False)
    exact: bool = True

    @property
    def omega(self) -> float:
        return self.cost.omega

    @property
    def threshold(self) -> float:
        return self.cost.threshold

    @property
    def R(self) -> int:
        return len(self.sublayers)

    def sublayer_edges(self) -> list[list[Edge]]:
        return [[self.gates[i] for i in s] for s in self.sublayers]

    def ops(self, qubits: Sequence[int] | None = None) -> list[GateInstance]:
        """cx gates with barriers between sub-layers (on ``qubits``, default the layer's qubits)."""
        wall = sorted(qubits if qubits is not None else {q for e in self.gates for q in e})
        out: list[GateInstance] = []
        for k, s in enumerate(self.sublayers):
            if k:
                out.append(barrier(*wall))
            out += [cx(*self.gates[i]) for i in s]
        return out

    def to_dict(self) -> dict:
        return {
            "gates": [list(e) for e in self.gates],
            "omega": self.omega,
            "threshold": self.threshold,
            "lifetime": self.cost.lifetime,
            "literal_sign": self.cost.literal_sign,
            "keep_order": self.cost.keep_order,
            "objective": self.objective_value,
            "R": self.R,
            "exact": self.exact,
            "sublayers": [[list(self.gates[i]) for i in s] for s in self.sublayers],
            "start_ns": [self.start[i] for i in range(len(self.gates))],
        }


def _timing(gates, parts, device):
    start, finish = {}, {}
    t = 0.0
    for part in parts:
        durs = [device.cx_cal(gates[i]).duration for i in part]
        for i, d in zip(part, durs):
            start[i] = t
            finish[i] = t + d
        t += max(durs)
    return start, finish


def _evaluate(gates, parts, device, cost: CostModel):
    start, finish = _timing(gates, parts, device)
    errors = {}
    for part in parts:
        for i in part:
            errors[i] = gate_error(gates[i], [gates[j] for j in part if j != i], device, cost.threshold)
    first: dict[int, float] = {}
    last: dict[int, float] = {}
    for i in sorted(start):
        for q in gates[i]:
            first[q] = min(first.get(q, math.inf), start[i])
            last[q] = max(last.get(q, -math.inf), finish[i])
    if cost.lifetime == "layer":
        end = max(finish.values(), default=0.0)
        lifetimes = {q: end for q in sorted(first)}
    else:
        lifetimes = {q: last[q] - first[q] for q in sorted(first)}
    terms = []
    for i in sorted(errors):
        eps = errors[i]
        if eps <= 0:
            log.warning("gate %s has zero error; clamping to %g", gates[i], EPS_FLOOR)
            eps = EPS_FLOOR
        terms.append(cost.omega * math.log(eps))
    sign = -1.0 if cost.literal_sign else 1.0
    for q, t in lifetimes.items():
        terms.append(sign * (1 - cost.omega) * t / (device.qubit_cal[q].t_min * 1e3))
    return math.fsum(terms), start, errors, lifetimes


def objective(s: Schedule, device: DeviceModel, omega: float | None = None) -> float:
    """Recompute the scheduling objective of ``s`` (to be minimized), optionally at another omega."""
    cost = s.cost if omega is None else replace(s.cost, omega=omega)
    return _evaluate(s.gates, s.sublayers, device, cost)[0]


# -- search ------------------------------------------------------------------

def _predecessors(gates: Sequence[Edge], keep_order: bool = False) -> list[frozenset[int]]:
    """Earlier gates each gate must follow: same qubit pair, or any shared qubit with ``keep_order``."""
    def dep(a, b):
        return not _disjoint(a, b) if keep_order else norm_edge(a) == norm_edge(b)

    return [frozenset(j for j in range(i) if dep(gates[i], gates[j])) for i in range(len(gates))]


def _valid_parts(gates, remaining: frozenset[int], placed: frozenset[int], preds):
    """Every nonempty qubit-disjoint subset of currently available gates."""
    avail = sorted(i for i in remaining if preds[i] <= placed)
    out = []

    def grow(k, chosen, qubits):
        if k == len(avail):
            if chosen:
                out.append(tuple(chosen))
            return
        i = avail[k]
        if not (set(gates[i]) & qubits):
            grow(k + 1, chosen + [i], qubits | set(gates[i]))
        grow(k + 1, chosen, qubits)

    grow(0, [], set())
    # larger sub-layers first finds good incumbents early
    out.sort(key=lambda p: (-len(p), p))
    return out


def _key(value: float, parts) -> tuple:
    return (value, len(parts), tuple(parts))


def _build(gates, parts, device, cost: CostModel, exact=True) -> Schedule:
    value, start, errors, lifetimes = _evaluate(gates, parts, device, cost)
    return Schedule(tuple(gates), tuple(tuple(p) for p in parts), start, value, cost, errors, lifetimes, exact)


def _normalize(layer: Sequence, device: DeviceModel) -> list[Edge]:
    gates = []
    for g in layer:
        e = tuple(g.qubits) if isinstance(g, GateInstance) else tuple(g)
        if not device.coupling.has_edge(*e):
            raise MappingError(f"cx on non-edge {e}")
        gates.append(e)
    return gates


def _as_cost(omega, cost: CostModel | None, kwargs) -> CostModel:
    if cost is not None:
        return cost
    return CostModel(omega, **kwargs)


def exhaustive_schedule(layer: Sequence, device: DeviceModel, omega: float = 0.0, cost: CostModel | None = None, **kwargs) -> Schedule:
    """Reference optimizer: score every valid ordered partition."""
    cost = _as_cost(omega, cost, kwargs)
    gates = _normalize(layer, device)
    if not gates:
        return Schedule((), (), {}, 0.0, cost)
    preds = _predecessors(gates, cost.keep_order)
    best = None

    def rec(remaining, placed, parts):
        nonlocal best
        if not remaining:
            k = _key(_evaluate(gates, parts, device, cost)[0], parts)
            if best is None or k < best:
                best = k
            return
        for p in _valid_parts(gates, remaining, placed, preds):
            rec(remaining - set(p), placed | set(p), parts + [p])

    rec(frozenset(range(len(gates))), frozenset(), [])
    return _build(gates, best[2], device, cost)


def _greedy_parts(gates, device, cost: CostModel):
    preds = _predecessors(gates, cost.keep_order)
    parts: list[list[int]] = []
    where: dict[int, int] = {}
    for i, e in enumerate(gates):
        lo = max((where[j] for j in preds[i]), default=-1) + 1
        options = []
        for k in range(lo, len(parts) + 1):
            if k < len(parts) and any(not _disjoint(e, gates[j]) for j in parts[k]):
                continue
            trial = [list(p) for p in parts]
            if k == len(parts):
                trial.append([i])
            else:
                trial[k].append(i)
            value = _evaluate(gates, [tuple(p) for p in trial], device, cost)[0]
            options.append((value, len(trial), k, trial))
        _, _, k, parts = min(options, key=lambda o: o[:3])
        where[i] = k
    return [tuple(p) for p in parts]


def xtalk_schedule(
    layer: Sequence,
    device: DeviceModel,
    omega: float = 0.0,
    cost: CostModel | None = None,
    greedy_fallback: bool = False,
    **kwargs,
) -> Schedule:
    """Optimal ordered split of ``layer`` (cx edges or GateInstances in program order).

    Objective settings come from ``cost`` or from ``omega`` plus CostModel
    keyword arguments. The layer is treated as a set: only repeated gates on
    one qubit pair keep their relative order unless ``keep_order`` is set.
    Ties go to fewer sub-layers, then to the lexicographically smallest
    sequence of sub-layers. Layers above ``MAX_EXACT_GATES`` gates need
    ``greedy_fallback=True`` and are then scheduled greedily.
    """
    cost = _as_cost(omega, cost, kwargs)
    gates = _normalize(layer, device)
    n = len(gates)
    if n == 0:
        return Schedule((), (), {}, 0.0, cost)
    if n > MAX_EXACT_GATES:
        if not greedy_fallback:
            raise ScheduleError(
                f"layer has {n} gates; exact scheduling supports at most {MAX_EXACT_GATES} (enable greedy fallback)"
            )
        return _build(gates, _greedy_parts(gates, device, cost), device, cost, exact=False)

    w = cost.omega
    preds = _predecessors(gates, cost.keep_order)
    dur = [device.cx_cal(e).duration for e in gates]
    inv_t = {q: 1.0 / (device.qubit_cal[q].t_min * 1e3) for e in gates for q in e}
    # cheapest error each gate could still get from any admissible partner
    best_log = []
    for e in gates:
        rates = [device.epc(e)] + [
            device.xtalk.conditional_epc(e, h)
            for h in gates
            if _disjoint(e, h) and admitted(device, e, h, cost.threshold)
        ]
        best_log.append(w * math.log(max(min(rates), EPS_FLOOR)))
    on_qubit = {q: [i for i, e in enumerate(gates) if q in e] for q in inv_t}
    sign = -1.0 if cost.literal_sign else 1.0
    seed_parts = _greedy_parts(gates, device, cost)
    incumbent = [_key(_evaluate(gates, seed_parts, device, cost)[0], seed_parts)]

    def bound(remaining, err_sum, t_now, first, last):
        lb = err_sum + sum(best_log[i] for i in remaining)
        rem_q = {q: sum(dur[i] for i in idx if i in remaining) for q, idx in on_qubit.items()}
        rem_total = sum(dur[i] for i in remaining)
        life = 0.0
        if cost.lifetime == "layer":
            end = t_now + (max(rem_q.values()) if sign > 0 else rem_total)
            life = end * sum(inv_t.values())
        else:
            for q, r in rem_q.items():
                if sign > 0:
                    span = r if q not in first else (t_now + r if r else last[q]) - first[q]
                else:
                    span = t_now + rem_total - first.get(q, t_now)
                life += span * inv_t[q]
        return lb + sign * (1 - w) * life

    def rec(remaining, placed, parts, err_sum, t_now, first, last):
        if not remaining:
            k = _key(_evaluate(gates, parts, device, cost)[0], parts)
            if k < incumbent[0]:
                incumbent[0] = k
            return
        best_value, best_r, best_parts = incumbent[0]
        lb = bound(remaining, err_sum, t_now, first, last)
        tol = 1e-12 * (1 + abs(best_value))
        if lb > best_value + tol:
            return
        if lb >= best_value - tol:
            # at best a tie: prune when the tie-break is already lost
            r_min = len(parts) + max(sum(i in remaining for i in idx) for idx in on_qubit.values())
            prefix = tuple(parts)
            if r_min > best_r or (r_min == best_r and prefix > best_parts[: len(prefix)]):
                return
        for p in _valid_parts(gates, remaining, placed, preds):
            errs = 0.0
            nf, nl = dict(first), dict(last)
            for i in p:
                eps = gate_error(gates[i], [gates[j] for j in p if j != i], device, cost.threshold)
                errs += w * math.log(max(eps, EPS_FLOOR))
                for q in gates[i]:
                    nf.setdefault(q, t_now)
                    nl[q] = t_now + dur[i]
            step = max(dur[i] for i in p)
            rec(remaining - set(p), placed | set(p), parts + [p], err_sum + errs, t_now + step, nf, nl)

    rec(frozenset(range(n)), frozenset(), [], 0.0, 0.0, {}, {})
    return _build(gates, incumbent[0][2], device, cost)


# -- sub-layer extraction ----------------------------------------------------

@dataclass(frozen=True)
class SubLayerSet:
    layers: tuple[tuple[Edge, ...], ...]

    @property
    def R(self) -> int:
        return len(self.layers)

    def gates(self) -> list[Edge]:
        return [e for layer in self.layers for e in layer]


def extract_sublayers(source: Schedule | Circuit | Sequence[GateInstance]) -> SubLayerSet:
    """Ordered cx groups between barriers (from a schedule, circuit or op list)."""
    if isinstance(source, Schedule):
        return SubLayerSet(tuple(tuple(layer) for layer in source.sublayer_edges()))
    ops = source.ops if isinstance(source, Circuit) else source
    layers: list[tuple[Edge, ...]] = []
    cur: list[Edge] = []
    for op in ops:
        if op.name == "barrier":
            if cur:
                layers.append(tuple(cur))
            cur = []
        elif op.name == "cx":
            cur.append(tuple(op.qubits))
    if cur:
        layers.append(tuple(cur))
    return SubLayerSet(tuple(layers))


def schedule_from_dict(d: dict, device: DeviceModel) -> Schedule:
    gates = [tuple(e) for e in d["gates"]]
    index = {e: i for i, e in enumerate(gates)}
    parts = [tuple(index[tuple(e)] for e in s) for s in d["sublayers"]]
    cost = CostModel(
        float(d["omega"]),
        float(d.get("threshold", 1.0)),
        d.get("lifetime", "layer"),
        bool(d.get("literal_sign", False)),
        bool(d.get("keep_order", False)),
    )
    return _build(gates, parts, device, cost, bool(d.get("exact", True)))
