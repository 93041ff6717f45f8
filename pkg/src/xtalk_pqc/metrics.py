"""Ansatz quality metrics and circuit cost statistics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Circuit, build_dag_layers
from .device import DeviceModel
from .simulator import NoiseSpec, run_batch, run_noisy

TWO_PI = 2 * math.pi
SMOOTHING = 1e-9
HAAR_FLOOR = 1e-300


# -- expressibility ----------------------------------------------------------

@dataclass(frozen=True)
class ExprEstimate:
    kl: float
    samples: int
    bins: int


def haar_bin_masses(num_qubits: int, bins: int) -> np.ndarray:
    """Haar fidelity probability per equal-width bin on [0, 1].

    The fidelity CDF is 1 - (1 - F)**(d - 1) with d = 2**num_qubits.
    """
    d = 2**num_qubits
    edges = np.linspace(0.0, 1.0, bins + 1)
    tail = (1.0 - edges) ** (d - 1)
    return np.maximum(tail[:-1] - tail[1:], HAAR_FLOOR)


def kl_from_fidelities(fidelities: np.ndarray, num_qubits: int, bins: int = 75) -> float:
    counts, _ = np.histogram(np.clip(fidelities, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    p = counts / max(counts.sum(), 1) + SMOOTHING
    p /= p.sum()
    q = haar_bin_masses(num_qubits, bins)
    return max(float(np.sum(p * np.log(p / q))), 0.0)


def sample_states(c: Circuit, count: int, rng: np.random.Generator) -> np.ndarray:
    thetas = rng.uniform(0.0, TWO_PI, size=(count, c.num_params))
    return run_batch(c, thetas)


def expressibility(c: Circuit, n_pairs: int = 5000, bins: int = 75, seed=0) -> ExprEstimate:
    """KL divergence of the sampled pair-fidelity histogram from the Haar one."""
    if n_pairs < 10 * bins:
        warnings.warn(f"{n_pairs} fidelity pairs for {bins} bins gives a noisy histogram", stacklevel=2)
    rng = np.random.default_rng(seed)
    if c.num_params == 0:
        fids = np.ones(n_pairs)
    else:
        a = sample_states(c, n_pairs, rng)
        b = sample_states(c, n_pairs, rng)
        fids = np.abs(np.einsum("ij,ij->i", a.conj(), b)) ** 2
    return ExprEstimate(kl_from_fidelities(fids, c.num_qubits, bins), n_pairs, bins)


# -- gradients ---------------------------------------------------------------

def bootstrap_ci(values: Sequence[float], stat=np.var, n_boot: int = 2000, level: float = 0.95, seed=0) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, v.size, size=(n_boot, v.size))
    stats = np.array([stat(v[row]) for row in idx])
    lo, hi = np.quantile(stats, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


@dataclass
class GradVarEstimate:
    param_index: int
    variance: float
    n_samples: int
    cost_kind: str
    gradients: np.ndarray = field(repr=False)

    def ci(self, level: float = 0.95, n_boot: int = 2000, seed=0) -> tuple[float, float]:
        return bootstrap_ci(self.gradients, np.var, n_boot, level, seed)


def _cost_qubits(cost_kind, n: int) -> int:
    if cost_kind in ("global", None):
        return n
    n_c = int(cost_kind)
    if not 1 <= n_c <= n:
        raise ValueError(f"cost qubits must lie in [1, {n}]")
    return n_c


def exact_ground_cost(states: np.ndarray, n: int, n_c: int) -> np.ndarray:
    """1 - P(first n_c qubits all zero) for each row of ``states``."""
    probs = np.abs(states.reshape(states.shape[0], 2**n_c, -1)) ** 2
    return 1.0 - probs[:, 0, :].sum(axis=1)


def grad_variance(
    c: Circuit,
    cost_kind="global",
    i: int = 0,
    n_samples: int = 200,
    spec: NoiseSpec | None = None,
    shots: int | None = 4000,
    seed=0,
) -> GradVarEstimate:
    """Sample variance of the parameter-shift derivative of the ground-state cost.

    ``cost_kind`` is "global" or the number of leading cost qubits. With an
    ideal spec and ``shots=None`` the cost is evaluated exactly. The + and -
    shifted circuits of one draw share their noise and measurement seed.
    """
    from .vqa import ground_cost

    if not 0 <= i < c.num_params:
        raise ValueError(f"parameter index {i} out of range")
    spec = spec or NoiseSpec("ideal")
    n = c.num_qubits
    n_c = _cost_qubits(cost_kind, n)
    root = np.random.SeedSequence(seed)
    draws = root.spawn(n_samples)
    thetas = np.array([np.random.default_rng(s).uniform(0, TWO_PI, c.num_params) for s in draws])
    plus, minus = thetas.copy(), thetas.copy()
    plus[:, i] += math.pi / 2
    minus[:, i] -= math.pi / 2
    if shots is None:
        if spec.mode != "ideal":
            raise ValueError("exact costs need the ideal mode; pass a shot count")
        grads = (exact_ground_cost(run_batch(c, plus), n, n_c) - exact_ground_cost(run_batch(c, minus), n, n_c)) / 2
    else:
        grads = np.empty(n_samples)
        for j, s in enumerate(draws):
            shot_seed = [int(v) for v in s.generate_state(4)]
            cp = ground_cost(run_noisy(c, plus[j], spec, shots, seed=shot_seed), n_c)
            cm = ground_cost(run_noisy(c, minus[j], spec, shots, seed=shot_seed), n_c)
            grads[j] = (cp - cm) / 2
    kind = "global" if n_c == n else f"local({n_c})"
    return GradVarEstimate(i, float(np.var(grads)), n_samples, kind, grads)


# -- entanglement ------------------------------------------------------------

@dataclass(frozen=True)
class EntropyEstimate:
    mean_s: float
    std_s: float
    partition: tuple[int, ...]
    values: tuple[float, ...] = field(default=(), repr=False)


def default_partition(n: int) -> tuple[int, ...]:
    """floor((n-1)/2) lowest-index qubits (the default cost qubits, connected on the line)."""
    return tuple(range(max((n - 1) // 2, 1)))


def entropy_of_states(states: np.ndarray, partition: Sequence[int], n: int) -> np.ndarray:
    """Von Neumann entropy (bits) of the reduced state on ``partition`` for each row."""
    part = sorted(set(partition))
    if not part or len(part) >= n or min(part) < 0 or max(part) >= n:
        raise ValueError(f"partition must be a nonempty proper subset of range({n})")
    rest = [q for q in range(n) if q not in part]
    psi = states.reshape((states.shape[0],) + (2,) * n)
    psi = psi.transpose([0] + [q + 1 for q in part] + [q + 1 for q in rest])
    mat = psi.reshape(states.shape[0], 2 ** len(part), -1)
    lam = np.linalg.svd(mat, compute_uv=False) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 1e-12, -lam * np.log2(np.where(lam > 1e-12, lam, 1.0)), 0.0)
    return terms.sum(axis=1)


def entanglement_entropy(c: Circuit, partition: Sequence[int] | None = None, n_samples: int = 100, seed=0) -> EntropyEstimate:
    part = tuple(sorted(partition)) if partition is not None else default_partition(c.num_qubits)
    rng = np.random.default_rng(seed)
    states = sample_states(c, n_samples, rng)
    s = entropy_of_states(states, part, c.num_qubits)
    return EntropyEstimate(float(s.mean()), float(s.std()), part, tuple(float(v) for v in s))


# -- circuit cost ------------------------------------------------------------

@dataclass(frozen=True)
class CircuitStats:
    total_gates: int
    two_qubit_gates: int
    duration_ns: float
    depth: int


def circuit_stats(c: Circuit, device: DeviceModel) -> CircuitStats:
    """Gate counts (barriers excluded) and the ASAP critical path in ns."""
    t = [0.0] * c.num_qubits
    total = twoq = 0
    for op in c.ops:
        if op.name == "barrier":
            m = max(t[q] for q in op.qubits)
            for q in op.qubits:
                t[q] = m
            continue
        cal = device.gate(op.name, tuple(c.device_qubit(q) for q in op.qubits))
        end = max(t[q] for q in op.qubits) + cal.duration
        for q in op.qubits:
            t[q] = end
        total += 1
        twoq += op.name == "cx"
    return CircuitStats(total, twoq, max(t, default=0.0), len(build_dag_layers(c)))


def speedup(a: CircuitStats, b: CircuitStats) -> float:
    return a.duration_ns / b.duration_ns


def two_qubit_depth(c: Circuit) -> int:
    """Depth counting cx gates only, with barriers aligning their qubits."""
    level = [0] * c.num_qubits
    for op in c.ops:
        if op.name == "cx" or op.name == "barrier":
            k = max(level[q] for q in op.qubits)
            k += op.name == "cx"
            for q in op.qubits:
                level[q] = k
    return max(level, default=0)
