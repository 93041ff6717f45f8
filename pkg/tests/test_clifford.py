import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from xtalk_pqc.circuit import Circuit
from xtalk_pqc.clifford import Tableau, group_size, identity_element, random_clifford, realize, tableau_of_ops
from xtalk_pqc.simulator import equal_up_to_phase, unitary


def test_group_sizes():
    assert group_size(1) == 24
    assert group_size(2) == 11520


def test_single_qubit_sampling_uniform():
    rng = np.random.default_rng(0)
    keys = [random_clifford(1, rng).tableau for _ in range(100_000)]
    classes = {}
    for t in keys:
        classes[t] = classes.get(t, 0) + 1
    assert len(classes) == 24
    assert chisquare(list(classes.values())).pvalue > 1e-3


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2]))
def test_realized_ops_match_tableau(seed, n):
    c = random_clifford(n, np.random.default_rng(seed))
    assert tableau_of_ops(c.ops, n) == c.tableau
    assert c.tableau.is_symplectic()


@given(st.integers(0, 2**32 - 1))
def test_closure_and_inverse(seed):
    rng = np.random.default_rng(seed)
    a, b = random_clifford(2, rng), random_clifford(2, rng)
    ab = a.compose(b)
    assert ab.tableau.is_symplectic()
    assert a.compose(a.inverse()).tableau == Tableau.identity(2)
    assert realize(ab.tableau).tableau == ab.tableau


@given(st.integers(0, 2**32 - 1))
def test_tableau_agrees_with_unitary(seed):
    """Two routes to the same operator: tableau composition and matrix product."""
    rng = np.random.default_rng(seed)
    a, b = random_clifford(2, rng), random_clifford(2, rng)
    ab = a.compose(b)
    u_seq = unitary(Circuit.from_ops(2, list(a.ops) + list(b.ops)))
    u_ab = unitary(Circuit.from_ops(2, ab.ops))
    assert equal_up_to_phase(u_seq, u_ab, atol=1e-8)


def test_identity_element_is_empty():
    e = identity_element(2)
    assert e.ops == () and e.tableau == Tableau.identity(2)
