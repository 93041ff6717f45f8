import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xtalk_pqc.circuit import (
    Circuit,
    CircuitError,
    GateInstance,
    barrier,
    bind,
    build_dag_layers,
    cx,
    dumps_json,
    loads_json,
    read_circuit,
    rx,
    ry,
    rz,
    write_circuit,
)
from xtalk_pqc.simulator import equal_up_to_phase, unitary


def layers(ops, n=4):
    return [list(layer) for layer in build_dag_layers(Circuit.from_ops(n, ops))]


def test_shared_qubit_sequences():
    assert layers([cx(0, 1), cx(1, 2)]) == [[0], [1]]


def test_disjoint_gates_share_a_layer():
    assert layers([cx(0, 1), cx(2, 3)]) == [[0, 1]]


def test_barrier_splits_layers():
    assert layers([cx(0, 1), barrier(0, 1, 2, 3), cx(2, 3)]) == [[0], [2]]


def test_barrier_only_affects_its_qubits():
    assert layers([cx(0, 1), barrier(0, 1), cx(2, 3)]) == [[0, 2]]


def test_bind_rotation():
    c = Circuit.from_ops(1, [rx(0, 0)])
    b = bind(c, [math.pi])
    assert b.ops[0] == GateInstance("rx", (0,), math.pi)
    assert b.num_params == 0


def test_bind_parameterless_is_identity():
    c = Circuit.from_ops(2, [cx(0, 1), rz(1, 0.3)])
    assert bind(c, []) == c


def test_bind_wrong_length():
    c = Circuit.from_ops(1, [rx(0, 0), ry(0, 1)])
    with pytest.raises(CircuitError):
        bind(c, [0.1, 0.2, 0.3])


def test_parse_examples():
    assert read_circuit("cx 0 1").ops == (GateInstance("cx", (0, 1)),)
    op = read_circuit("ry 2 p0").ops[0]
    assert op.qubits == (2,) and op.is_symbolic and op.param == 0
    with pytest.raises(CircuitError):
        read_circuit("cx 0 0")


def test_parse_pi_forms():
    c = read_circuit("rz 0 -pi/2\nrx 0 3*pi/4\nry 0 0.25")
    assert [op.param for op in c.ops] == pytest.approx([-math.pi / 2, 3 * math.pi / 4, 0.25])


def test_parse_reports_line():
    with pytest.raises(CircuitError, match="line 2"):
        read_circuit("cx 0 1\nfoo 1")


def test_slots_must_be_contiguous():
    with pytest.raises(CircuitError):
        Circuit(1, (rx(0, 1),), 1)


@st.composite
def circuits(draw, max_qubits=4, max_ops=12, symbolic=True):
    n = draw(st.integers(2, max_qubits))
    ops = []
    slot = 0
    for _ in range(draw(st.integers(0, max_ops))):
        kind = draw(st.sampled_from(["rx", "ry", "rz", "cx", "barrier"]))
        if kind == "cx":
            a, b = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
            ops.append(cx(a, b))
        elif kind == "barrier":
            qs = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n, unique=True))
            ops.append(barrier(*qs))
        else:
            q = draw(st.integers(0, n - 1))
            if symbolic and draw(st.booleans()):
                ops.append(GateInstance(kind, (q,), slot))
                slot += 1
            else:
                angle = draw(st.floats(-6.3, 6.3, allow_nan=False))
                ops.append(GateInstance(kind, (q,), angle))
    return Circuit.from_ops(n, ops)


@given(circuits())
def test_text_round_trip(c):
    again = read_circuit(write_circuit(c))
    assert again == c
    assert write_circuit(again) == write_circuit(c)


@given(circuits())
def test_json_round_trip(c):
    assert loads_json(dumps_json(c)) == c


@given(circuits())
def test_layering_is_a_partition_respecting_order(c):
    lay = build_dag_layers(c)
    flat = [i for layer in lay for i in layer]
    gates = [i for i, op in enumerate(c.ops) if op.name != "barrier"]
    assert sorted(flat) == gates
    where = {i: k for k, layer in enumerate(lay) for i in layer}
    for layer in lay:
        qubits = [q for i in layer for q in c.ops[i].qubits]
        assert len(qubits) == len(set(qubits))
    for i in gates:
        for j in gates:
            if i < j and set(c.ops[i].qubits) & set(c.ops[j].qubits):
                assert where[i] < where[j]


@given(circuits(symbolic=False))
def test_replaying_layers_preserves_unitary(c):
    lay = build_dag_layers(c)
    replay = Circuit.from_ops(c.num_qubits, [c.ops[i] for layer in lay for i in layer])
    assert equal_up_to_phase(unitary(c), unitary(replay))


def test_layering_deterministic():
    c = Circuit.from_ops(3, [cx(0, 1), ry(2, 0.1), cx(1, 2), rz(0, 0.2)])
    assert [list(x) for x in build_dag_layers(c)] == [list(x) for x in build_dag_layers(c)]
    assert np.allclose(unitary(c), unitary(c))
