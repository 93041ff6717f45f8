from collections import Counter

import numpy as np
import pytest

from xtalk_pqc.ansatz import PqcConfig, build, build_base1, build_base2, family_configs, layer_schedule
from xtalk_pqc.circuit import bind
from xtalk_pqc.device import MappingError, one_hop_pairs
from xtalk_pqc.scheduler import extract_sublayers
from xtalk_pqc.simulator import equal_up_to_phase, unitary


@pytest.fixture(scope="module")
def heavy(device):
    return device.with_multipliers({p: 1.5 for p in one_hop_pairs(device.coupling)})


def entangling_blocks(c):
    """cx gates of each repetition, split at rotation gates."""
    blocks, cur = [], []
    for op in c.ops:
        if op.name in ("rx", "ry", "rz"):
            if cur:
                blocks.append(cur)
            cur = []
        elif op.name == "cx":
            cur.append(op.qubits)
    return blocks + ([cur] if cur else [])


def test_base1_two_qubits(device):
    c = build_base1(2, 1, device)
    assert [op.name for op in c.ops] == ["ry", "rz", "ry", "rz", "cx", "ry", "rz", "ry", "rz"]
    assert c.num_params == 8


def test_base1_counts(device):
    assert build_base1(4, 1, device).count("cx") == 3
    c = build_base1(4, 0, device)
    assert c.count("cx") == 0 and c.num_params == 8
    assert build_base1(5, 3, device).num_params == 2 * 5 * 4


def test_base1_is_mapped_to_a_line(device):
    c = build_base1(6, 1, device)
    assert all(device.coupling.has_edge(*c.device_edge(op)) for op in c.ops if op.name == "cx")


def test_base2_groups(device):
    c = build_base2(4, 1, device)
    assert [list(x) for x in extract_sublayers(c).layers] == [[(0, 1), (2, 3)], [(1, 2)]]


def test_base2_two_qubits_is_base1(device):
    assert build_base2(2, 3, device).ops == build_base1(2, 3, device).ops


def test_low_serializes_under_crosstalk(heavy):
    for n in (4, 5, 6):
        s = layer_schedule(PqcConfig("xtalk", n, 3, heavy, "low", 0))
        hops = {frozenset(p) for p in one_hop_pairs(heavy.coupling)}
        for edges in s.sublayer_edges():
            assert not any(frozenset((tuple(a), tuple(b))) in hops for a in edges for b in edges if a != b)
        assert s.R == 3


def test_high_matches_base2_groups(device, heavy):
    for dev in (device, heavy):
        for n in (3, 5, 7):
            c = build(PqcConfig("xtalk", n, 2, dev, "high", 0))
            assert c.metadata["R"] == build_base2(n, 2, dev).metadata["R"] == 2


def test_m_equal_l_is_base1(device):
    assert build(PqcConfig("xtalk", 5, 3, device, "medium", 3)).ops == build_base1(5, 3, device).ops


def test_first_m_layers_are_chains(device):
    c = build(PqcConfig("xtalk", 5, 4, device, "high", 2))
    blocks = entangling_blocks(c)
    chain = [(i, i + 1) for i in range(4)]
    assert blocks[0] == blocks[1] == chain
    assert blocks[2] != chain


@pytest.mark.parametrize("n,L", [(3, 2), (5, 4), (7, 5)])
def test_families_share_parameters_and_cx_multiset(device, n, L):
    circuits = {k: build(cfg) for k, cfg in family_configs(n, L, device).items()}
    assert len({c.num_params for c in circuits.values()}) == 1
    ref = Counter(map(tuple, map(sorted, entangling_blocks(circuits["base1"]))))
    for name, c in circuits.items():
        blocks = entangling_blocks(c)
        assert len(blocks) == L
        assert Counter(map(tuple, map(sorted, blocks))) == ref, name


@pytest.mark.parametrize("n", [2, 3, 4])
def test_high_equals_base2_without_crosstalk(device, n):
    clean = device.with_xtalk({})
    hi = build(PqcConfig("xtalk", n, 2, clean, "high", 0))
    b2 = build_base2(n, 2, clean)
    theta = np.random.default_rng(n).uniform(0, 2 * np.pi, hi.num_params)
    assert equal_up_to_phase(unitary(bind(hi, theta)), unitary(bind(b2, theta)))


def test_config_validation(device):
    with pytest.raises(ValueError):
        PqcConfig("xtalk", 4, 8, device, "medium", 6)
    with pytest.raises(ValueError):
        PqcConfig("xtalk", 4, 2, device, "medium", 3)
    with pytest.raises(ValueError):
        PqcConfig("xtalk", 4, 2, device, "extreme")
    with pytest.raises(ValueError):
        PqcConfig("base3", 4, 2, device)
    with pytest.raises(MappingError):
        PqcConfig("base1", 17, 2, device)
    with pytest.raises(MappingError):
        build(PqcConfig("base1", 14, 1, device))


def test_names_and_presets(device):
    cfgs = family_configs(4, 3, device)
    assert list(cfgs) == ["base1", "base2", "high_xtalk", "medium_xtalk", "low_xtalk"]
    assert [cfgs[k].omega for k in ("high_xtalk", "medium_xtalk", "low_xtalk")] == [0.0, 0.5, 1.0]


def test_single_qubit_ansatz(device):
    for cfg in family_configs(1, 2, device).values():
        c = build(cfg)
        assert c.count("cx") == 0 and c.num_params == 6
