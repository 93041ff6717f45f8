import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xtalk_pqc.ansatz import PqcConfig, build_base1
from xtalk_pqc.circuit import Circuit, bind, cx, ry, rx, rz
from xtalk_pqc.simulator import NoiseSpec, ShotResult, run_ideal
from xtalk_pqc.vqa import (
    HamiltonianError,
    PauliHamiltonian,
    SpsaConfig,
    estimate_energy,
    expectation,
    ground_cost,
    load_hamiltonian,
    qwc_groups,
    reference_theta,
    run_vqe,
    save_hamiltonian,
    shipped_hamiltonian,
    spsa_minimize,
)

PAULIS = "IXYZ"


def fixed(n, ops):
    return Circuit.from_ops(n, ops)


# -- ground cost -------------------------------------------------------------

def test_ground_cost_examples():
    assert ground_cost(ShotResult({"000": 100}, 100), 3) == 0.0
    counts = ShotResult({"00": 600, "01": 400}, 1000)
    assert ground_cost(counts, 1) == 0.0
    assert ground_cost(counts, 2) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        ground_cost(counts, 3)


def test_ground_cost_fair_coin():
    from xtalk_pqc.simulator import sample_ideal

    res = sample_ideal(fixed(1, [ry(0, math.pi / 2)]), None, 10000, seed=1)
    assert ground_cost(res, 1) == pytest.approx(0.5, abs=4 * 0.005)


@given(st.dictionaries(st.text("01", min_size=3, max_size=3), st.integers(1, 50), min_size=1))
def test_ground_cost_monotone_in_prefix(counts):
    res = ShotResult(counts, sum(counts.values()))
    costs = [ground_cost(res, k) for k in (1, 2, 3)]
    assert costs[0] <= costs[1] <= costs[2]


# -- expectation -------------------------------------------------------------

def test_identity_term_is_exact():
    h = PauliHamiltonian(2, ((1.5, "II"),))
    c = fixed(2, [ry(0, 0.7), cx(0, 1)])
    assert expectation(h, c, None, shots=10) == 1.5


def test_zz_on_basis_states():
    h = PauliHamiltonian(2, ((1.0, "ZZ"),))
    assert expectation(h, fixed(2, [rz(0, 0.0)]), None, shots=100) == 1.0
    assert expectation(h, fixed(2, [rx(1, math.pi)]), None, shots=100) == -1.0


@pytest.mark.parametrize("pauli,prep", [("X", ry(0, math.pi / 2)), ("Y", rx(0, -math.pi / 2))])
def test_plus_state_expectation(pauli, prep):
    est = estimate_energy(PauliHamiltonian(1, ((1.0, pauli),)), fixed(1, [prep]), None, shots=10000, seed=2)
    assert abs(est.value - 1.0) <= 3 * max(est.stderr, 1 / 10000)


def test_dimension_mismatch():
    with pytest.raises(HamiltonianError):
        expectation(PauliHamiltonian(1, ((1.0, "Z"),)), fixed(2, [cx(0, 1)]), None)


def random_hamiltonian(n, rng, terms=5):
    return PauliHamiltonian(n, tuple((float(rng.normal()), "".join(rng.choice(list(PAULIS), n))) for _ in range(terms)))


@settings(max_examples=15)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1), st.floats(-3, 3))
def test_expectation_is_linear(n, seed, k):
    rng = np.random.default_rng(seed)
    h1, h2 = random_hamiltonian(n, rng), random_hamiltonian(n, rng)
    c = fixed(n, [ry(q, float(rng.uniform(0, 6))) for q in range(n)] + [cx(q, q + 1) for q in range(n - 1)])
    both = PauliHamiltonian(n, h1.terms + h2.scaled(k).terms)
    assert expectation(both, c, None, shots=None) == pytest.approx(
        expectation(h1, c, None, shots=None) + k * expectation(h2, c, None, shots=None), abs=1e-9
    )


@pytest.mark.parametrize("n", [2, 4, 6])
def test_sampled_expectation_matches_dense(device, n):
    rng = np.random.default_rng(n)
    h = random_hamiltonian(n, rng, terms=8)
    c = build_base1(n, 2, device)
    theta = rng.uniform(0, 2 * math.pi, c.num_params)
    psi = run_ideal(bind(c, theta)).amplitudes
    exact = float(np.real(psi.conj() @ h.matrix() @ psi))
    est = estimate_energy(h, c, theta, shots=8000, seed=n)
    assert est.value == pytest.approx(exact, abs=4 * est.stderr + 1e-9)
    assert expectation(h, c, theta, shots=None) == pytest.approx(exact, abs=1e-12)


def test_qwc_groups():
    assert qwc_groups(["ZZ", "ZI", "XX", "IX", "YY"]) == [[0, 1], [2, 3], [4]]


def test_noisy_expectation_is_damped(device):
    h = PauliHamiltonian(2, ((1.0, "ZZ"),))
    c = fixed(2, [cx(0, 1)] * 20)
    c = Circuit(2, c.ops, 0, (0, 1))
    noisy = expectation(h, c, None, NoiseSpec("standard", device), shots=20000, seed=3)
    assert 0.5 < noisy < 0.99


# -- SPSA --------------------------------------------------------------------

def test_spsa_quadratic():
    tr = spsa_minimize(lambda t, i: float(t @ t), 1, SpsaConfig(max_iter=100), [1.0])
    assert abs(tr.final_theta[0]) < 0.05


def test_spsa_constant_cost_does_not_move():
    tr = spsa_minimize(lambda t, i: 3.0, 4, SpsaConfig(max_iter=30), np.arange(4.0))
    assert np.array_equal(tr.final_theta, np.arange(4.0))
    assert tr.energies[0] == tr.energies[-1] == 3.0


def test_spsa_evaluation_count_and_determinism():
    calls = []

    def f(t, i):
        calls.append(i)
        return float(np.sum(np.sin(t)))

    a = spsa_minimize(f, 3, SpsaConfig(max_iter=100, seed=4))
    assert a.evaluations == 200 and calls == list(range(200))
    b = spsa_minimize(lambda t, i: float(np.sum(np.sin(t))), 3, SpsaConfig(max_iter=100, seed=4))
    assert np.array_equal(a.final_theta, b.final_theta)


def test_spsa_aborts_on_nan():
    tr = spsa_minimize(lambda t, i: math.nan if i >= 6 else 1.0, 2, SpsaConfig(max_iter=10))
    assert tr.aborted and len(tr.energies) == 3 and tr.evaluations == 8


def test_spsa_config_checks():
    with pytest.raises(ValueError):
        SpsaConfig(max_iter=0)
    with pytest.raises(ValueError):
        SpsaConfig(c=0.0)


# -- VQE ---------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(3))
def test_vqe_single_z(device, seed):
    h = PauliHamiltonian(1, ((1.0, "Z"),))
    tr = run_vqe(h, PqcConfig("base1", 1, 0, device), theta0="uniform", spsa=SpsaConfig(a=0.6, seed=seed))
    assert tr.exact_ground == -1.0
    assert tr.best_energy <= -0.98


def test_vqe_h2_base1(device):
    h = shipped_hamiltonian("h2_bk_4q")
    tr = run_vqe(h, PqcConfig("base1", 4, 5, device), shots=4000, spsa=SpsaConfig(seed=1))
    final = expectation(h, build_base1(4, 5, device), tr.final_theta, shots=None)
    assert tr.exact_ground == pytest.approx(h.ground_energy())
    assert abs(final - tr.exact_ground) < 0.05
    assert min(tr.energies) >= tr.exact_ground - 3 * 0.02


def test_reference_theta_prepares_reference_state(device):
    h = shipped_hamiltonian("h2_bk_4q")
    c = build_base1(4, 2, device)
    theta = reference_theta(h, c, jitter=0.0)
    psi = run_ideal(bind(c, theta)).amplitudes
    target = int(np.argmin(np.real(np.diag(h.matrix()))))
    assert abs(psi[target]) == pytest.approx(1.0)


def test_vqe_bad_start(device):
    h = PauliHamiltonian(1, ((1.0, "Z"),))
    with pytest.raises(ValueError):
        run_vqe(h, PqcConfig("base1", 1, 0, device), theta0="random")
    with pytest.raises(HamiltonianError):
        run_vqe(h, PqcConfig("base1", 2, 0, device))


# -- Hamiltonian I/O ---------------------------------------------------------

@pytest.mark.parametrize("name,n", [("h2_bk_4q", 4), ("lih_bk_6q", 6)])
def test_shipped_hamiltonians(name, n, tmp_path):
    h = shipped_hamiltonian(name)
    assert h.n == n
    assert np.allclose(h.matrix(), h.matrix().conj().T)
    save_hamiltonian(h, tmp_path / "h.json")
    assert load_hamiltonian(tmp_path / "h.json") == h


@pytest.mark.parametrize(
    "d",
    [{"n": 2, "terms": [{"coeff": 1, "pauli": "ZQ"}]}, {"n": 2, "terms": [{"coeff": 1, "pauli": "Z"}]},
     {"n": 1, "terms": [{"coeff": "nan", "pauli": "Z"}]}, {"terms": []}, {"n": 1, "terms": [{"pauli": "Z"}]}],
)
def test_bad_hamiltonians(d):
    with pytest.raises(HamiltonianError):
        PauliHamiltonian.from_dict(d)
