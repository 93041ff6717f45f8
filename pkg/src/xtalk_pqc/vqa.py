"""Pauli Hamiltonians, measured expectation values, SPSA and the VQE driver."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .ansatz import PqcConfig, build
from .circuit import Circuit, GateInstance, bind, rx, ry
from .simulator import NoiseSpec, ShotResult, run_ideal, run_noisy

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


class HamiltonianError(ValueError):
    pass


@dataclass(frozen=True)
class PauliHamiltonian:
    n: int
    terms: tuple[tuple[float, str], ...]

    def __post_init__(self):
        terms = []
        for coeff, pauli in self.terms:
            pauli = pauli.upper()
            if len(pauli) != self.n or set(pauli) - set(_PAULI):
                raise HamiltonianError(f"bad Pauli string {pauli!r} for {self.n} qubits")
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise HamiltonianError(f"non-finite coefficient on {pauli}")
            terms.append((coeff, pauli))
        object.__setattr__(self, "terms", tuple(terms))

    def matrix(self) -> np.ndarray:
        """Dense matrix; character k of a Pauli string acts on qubit k (most significant first)."""
        dim = 2**self.n
        out = np.zeros((dim, dim), dtype=complex)
        for coeff, pauli in self.terms:
            out += coeff * reduce(np.kron, (_PAULI[ch] for ch in pauli))
        return out

    def ground_energy(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix())[0])

    def scaled(self, k: float) -> "PauliHamiltonian":
        return PauliHamiltonian(self.n, tuple((k * c, p) for c, p in self.terms))

    def to_dict(self) -> dict:
        return {"n": self.n, "terms": [{"coeff": c, "pauli": p} for c, p in self.terms]}

    @classmethod
    def from_dict(cls, d: dict) -> "PauliHamiltonian":
        try:
            return cls(int(d["n"]), tuple((t["coeff"], t["pauli"]) for t in d["terms"]))
        except (KeyError, TypeError) as exc:
            raise HamiltonianError(f"malformed Hamiltonian JSON: missing {exc}") from None


def load_hamiltonian(path: str | Path) -> PauliHamiltonian:
    return PauliHamiltonian.from_dict(json.loads(Path(path).read_text()))


def save_hamiltonian(h: PauliHamiltonian, path: str | Path) -> None:
    Path(path).write_text(json.dumps(h.to_dict(), indent=1) + "\n")


def shipped_hamiltonian(name: str) -> PauliHamiltonian:
    """``h2_bk_4q`` or ``lih_bk_6q`` from the package data."""
    text = resources.files("xtalk_pqc.data").joinpath(f"{name}.json").read_text()
    return PauliHamiltonian.from_dict(json.loads(text))


# -- costs -------------------------------------------------------------------

def ground_cost(result: ShotResult, n_c: int) -> float:
    """1 - frequency of outcomes whose first ``n_c`` bits are all zero."""
    if not 1 <= n_c <= result.num_qubits:
        raise ValueError(f"n_c must lie in [1, {result.num_qubits}]")
    zero = "0" * n_c
    hits = sum(v for k, v in result.counts.items() if k[:n_c] == zero)
    return 1.0 - hits / result.shots


def qwc_groups(paulis: Sequence[str]) -> list[list[int]]:
    """Greedy grouping of Pauli strings into qubit-wise commuting sets."""
    groups: list[tuple[list[int], list[str]]] = []
    for i, p in enumerate(paulis):
        for members, basis in groups:
            if all(b == "I" or c == "I" or b == c for b, c in zip(basis, p)):
                members.append(i)
                for k, ch in enumerate(p):
                    if ch != "I":
                        basis[k] = ch
                break
        else:
            groups.append(([i], list(p)))
    return [members for members, _ in groups]


def basis_change(basis: str) -> list[GateInstance]:
    """Rotations mapping X and Y eigenbases onto Z before measurement."""
    ops = []
    for q, ch in enumerate(basis):
        if ch == "X":
            ops.append(ry(q, -math.pi / 2))
        elif ch == "Y":
            ops.append(rx(q, math.pi / 2))
    return ops


def _parity(counts: dict[str, int], support: Sequence[int]) -> tuple[float, int]:
    total = 0
    signed = 0
    for bits, v in counts.items():
        total += v
        signed += v if sum(bits[q] == "1" for q in support) % 2 == 0 else -v
    return signed / total, total


@dataclass(frozen=True)
class EnergyEstimate:
    value: float
    stderr: float


def estimate_energy(
    h: PauliHamiltonian, c: Circuit, theta, spec: NoiseSpec | None = None, shots: int | None = 4000, seed=0
) -> EnergyEstimate:
    """Energy and its standard error. ``shots=None`` with the ideal spec is exact."""
    if h.n != c.num_qubits:
        raise HamiltonianError(f"Hamiltonian has {h.n} qubits, circuit has {c.num_qubits}")
    spec = spec or NoiseSpec("ideal")
    bound = bind(c, np.asarray(theta if theta is not None else [], dtype=float))
    if shots is None:
        if spec.mode != "ideal":
            raise ValueError("exact expectation needs the ideal mode; pass a shot count")
        psi = run_ideal(bound).amplitudes
        return EnergyEstimate(float(np.real(psi.conj() @ h.matrix() @ psi)), 0.0)

    const = math.fsum(coeff for coeff, p in h.terms if set(p) == {"I"})
    active = [(coeff, p) for coeff, p in h.terms if set(p) != {"I"}]
    value, var = const, 0.0
    for g, members in enumerate(qwc_groups([p for _, p in active])):
        basis = ["I"] * h.n
        for i in members:
            for k, ch in enumerate(active[i][1]):
                if ch != "I":
                    basis[k] = ch
        circ = Circuit(bound.num_qubits, bound.ops + tuple(basis_change("".join(basis))), 0, bound.layout)
        res = run_noisy(circ, None, spec, shots, seed=[*np.atleast_1d(seed).tolist(), g])
        # covariance across terms of one setting is ignored in the error bar
        for i in members:
            coeff, p = active[i]
            mean, total = _parity(res.counts, [k for k, ch in enumerate(p) if ch != "I"])
            value += coeff * mean
            var += coeff**2 * (1 - mean**2) / total
    return EnergyEstimate(value, math.sqrt(var))


def expectation(h: PauliHamiltonian, c: Circuit, theta, spec: NoiseSpec | None = None, shots: int | None = 4000, seed=0) -> float:
    return estimate_energy(h, c, theta, spec, shots, seed).value


# -- SPSA --------------------------------------------------------------------

@dataclass(frozen=True)
class SpsaConfig:
    max_iter: int = 100
    a: float = 0.2
    c: float = 0.1
    A: float = 10.0
    alpha_gain: float = 0.602
    gamma_gain: float = 0.101
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.c > 0:
            raise ValueError("c must be positive")


@dataclass
class VqeTrace:
    thetas: list[np.ndarray] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    evaluations: int = 0
    aborted: str | None = None
    exact_ground: float | None = None
    final_theta: np.ndarray | None = None

    @property
    def best_energy(self) -> float:
        return min(self.energies) if self.energies else math.inf

    @property
    def best_theta(self) -> np.ndarray | None:
        if not self.energies:
            return None
        return self.thetas[int(np.argmin(self.energies))]


def spsa_minimize(
    f: Callable[[np.ndarray, int], float],
    p: int,
    cfg: SpsaConfig = SpsaConfig(),
    theta0: Sequence[float] | None = None,
) -> VqeTrace:
    """Minimize ``f(theta, eval_index)`` with two evaluations per iteration.

    The recorded energy of iteration k is the mean of the two perturbed
    evaluations around theta_k.
    """
    if p < 1:
        raise ValueError("need at least one parameter")
    rng = np.random.default_rng(cfg.seed)
    theta = np.zeros(p) if theta0 is None else np.array(theta0, dtype=float)
    trace = VqeTrace()
    for k in range(cfg.max_iter):
        ak = cfg.a / (cfg.A + k + 1) ** cfg.alpha_gain
        ck = cfg.c / (k + 1) ** cfg.gamma_gain
        delta = rng.choice((-1.0, 1.0), size=p)
        fp = f(theta + ck * delta, trace.evaluations)
        fm = f(theta - ck * delta, trace.evaluations + 1)
        trace.evaluations += 2
        if not (math.isfinite(fp) and math.isfinite(fm)):
            trace.aborted = f"non-finite cost at iteration {k}"
            break
        trace.thetas.append(theta.copy())
        trace.energies.append(0.5 * (fp + fm))
        theta = theta - ak * (fp - fm) / (2 * ck) * delta
    trace.final_theta = theta
    return trace


def reference_theta(h: PauliHamiltonian, c: Circuit, jitter: float = 0.1, seed=0) -> np.ndarray:
    """Angles preparing the lowest-diagonal-energy basis state, plus Gaussian jitter.

    All angles start at zero (every cx then acts on |0...0>) except the last
    ry on each qubit whose reference bit is 1, which gets pi.
    """
    bits = format(int(np.argmin(np.real(np.diag(h.matrix())))), f"0{h.n}b")
    theta = np.random.default_rng(seed).normal(0.0, jitter, c.num_params)
    last_ry: dict[int, int] = {}
    for op in c.ops:
        if op.name == "ry" and op.is_symbolic:
            last_ry[op.qubits[0]] = int(op.param)
    for q, b in enumerate(bits):
        if b == "1":
            if q not in last_ry:
                raise ValueError(f"no parameterized ry on qubit {q} to prepare the reference")
            theta[last_ry[q]] += math.pi
    return theta


def run_vqe(
    h: PauliHamiltonian,
    cfg: PqcConfig,
    spec: NoiseSpec | None = None,
    shots: int | None = 4000,
    spsa: SpsaConfig = SpsaConfig(),
    theta0: Sequence[float] | str = "reference",
    jitter: float = 0.1,
) -> VqeTrace:
    """SPSA-driven VQE. ``theta0`` is an array, "reference", "zeros" or "uniform"."""
    circ = build(cfg)
    if circ.num_qubits != h.n:
        raise HamiltonianError(f"ansatz has {circ.num_qubits} qubits, Hamiltonian {h.n}")
    if isinstance(theta0, str):
        if theta0 == "reference":
            theta0 = reference_theta(h, circ, jitter, seed=[spsa.seed, 1])
        elif theta0 == "zeros":
            theta0 = np.zeros(circ.num_params)
        elif theta0 == "uniform":
            theta0 = np.random.default_rng([spsa.seed, 2]).uniform(0, 2 * math.pi, circ.num_params)
        else:
            raise ValueError(f"unknown initial point {theta0!r}")

    def cost(theta, idx):
        return expectation(h, circ, theta, spec, shots, seed=[spsa.seed, idx])

    trace = spsa_minimize(cost, circ.num_params, spsa, theta0)
    if h.n <= 12:
        trace.exact_ground = h.ground_energy()
    return trace
