"""Statevector simulation with ideal, standard-noise and crosstalk-enabled execution.

Noise model: after every cx, with probability ``p = 4/3 * EPC`` a uniformly
random two-qubit Pauli (identity included) hits the gate's qubits, which is a
two-qubit depolarizing channel whose average infidelity equals the EPC. In
``xtalk_enabled`` mode the EPC of each cx is scaled by the crosstalk
multipliers of every other cx sharing its DAG layer.

Trajectories are simulated in batches: error patterns are drawn for every shot,
identical patterns are collapsed, each distinct pattern is evolved once, and
the shot outcomes are sampled from the resulting distributions. Clifford
circuits whose ideal output is a computational basis state (RB sequences) skip
the statevector entirely and propagate a Pauli frame per shot.

Bit order: qubit 0 is the leftmost character of every bitstring.
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, GateInstance, bind, build_dag_layers
from .device import DeviceModel, Edge, norm_edge

log = logging.getLogger(__name__)

MAX_QUBITS = 16
EPC_CAP = 0.75
MODES = ("ideal", "standard", "xtalk_enabled")
# amplitudes per batched evolution chunk
_CHUNK_AMPS = 1 << 22


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    @property
    def num_qubits(self) -> int:
        return int(round(math.log2(self.amplitudes.shape[-1])))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class NoiseSpec:
    mode: str = "ideal"
    device: DeviceModel | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown noise mode {self.mode!r}; expected one of {MODES}")
        if self.mode != "ideal" and self.device is None:
            raise ValueError(f"mode {self.mode!r} needs a device")

    def with_seed(self, seed) -> "NoiseSpec":
        return NoiseSpec(self.mode, self.device, seed)


@dataclass
class ShotResult:
    counts: dict[str, int]
    shots: int
    num_qubits: int = field(default=0)

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to shots")
        if not self.num_qubits and self.counts:
            self.num_qubits = len(next(iter(self.counts)))

    def probability(self, bitstring: str) -> float:
        return self.counts.get(bitstring, 0) / self.shots

    def to_json(self) -> str:
        return json.dumps({"shots": self.shots, "counts": self.counts}, sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "ShotResult":
        d = json.loads(s)
        return cls({k: int(v) for k, v in d["counts"].items()}, int(d["shots"]))


# -- gate kernels on batched states of shape (B, 2**n) ------------------------

def _rot_mats(name: str, theta: np.ndarray) -> np.ndarray:
    """Rotation matrices exp(-i theta P / 2), shape (B, 2, 2)."""
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    m = np.zeros(theta.shape + (2, 2), dtype=complex)
    if name == "rx":
        m[..., 0, 0] = c
        m[..., 1, 1] = c
        m[..., 0, 1] = -1j * s
        m[..., 1, 0] = -1j * s
    elif name == "ry":
        m[..., 0, 0] = c
        m[..., 1, 1] = c
        m[..., 0, 1] = -s
        m[..., 1, 0] = s
    else:
        m[..., 0, 0] = np.exp(-0.5j * theta)
        m[..., 1, 1] = np.exp(0.5j * theta)
    return m


def _apply_1q(state: np.ndarray, mats: np.ndarray, q: int, n: int) -> np.ndarray:
    b = state.shape[0]
    psi = state.reshape(b, 1 << q, 2, 1 << (n - q - 1))
    if mats.ndim == 2:
        out = np.einsum("ij,bajc->baic", mats, psi)
    else:
        out = np.einsum("bij,bajc->baic", mats, psi)
    return out.reshape(b, -1)


def _apply_cx(state: np.ndarray, c: int, t: int, n: int) -> np.ndarray:
    b = state.shape[0]
    psi = state.reshape((b,) + (2,) * n).copy()
    sel = [slice(None)] * (n + 1)
    sel[1 + c] = 1
    sel = tuple(sel)
    ax = 1 + t if t < c else t
    psi[sel] = np.take(psi[sel], [1, 0], axis=ax)
    return psi.reshape(b, -1)


def _apply_pauli_rows(state: np.ndarray, codes: np.ndarray, qubits: tuple[int, int], n: int) -> np.ndarray:
    """Apply a per-row two-qubit Pauli; code = 4*P(q0) + P(q1), P in {0:I,1:X,2:Y,3:Z}."""
    if not codes.any():
        return state
    b = state.shape[0]
    psi = state.reshape((b,) + (2,) * n)
    bshape = (b,) + (1,) * n
    for shift, q in ((2, qubits[0]), (0, qubits[1])):
        p = (codes >> shift) & 3
        xm = (p == 1) | (p == 2)
        zm = (p == 2) | (p == 3)
        if xm.any():
            psi = np.where(xm.reshape(bshape), np.take(psi, [1, 0], axis=1 + q), psi)
        if zm.any():
            idx = [slice(None)] * (n + 1)
            idx[1 + q] = 1
            psi = psi.copy()
            psi[tuple(idx)] *= np.where(zm, -1.0, 1.0).reshape((b,) + (1,) * (n - 1))
    return psi.reshape(b, -1)


def _check_size(n: int):
    if n > MAX_QUBITS:
        raise SimulationError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit statevector limit")


def evolve(
    c: Circuit,
    thetas: np.ndarray | None = None,
    paulis: Mapping[int, np.ndarray] | None = None,
    batch: int | None = None,
) -> np.ndarray:
    """Evolve a batch of trajectories from |0...0>.

    ``thetas`` has shape (B, num_params) (one row per trajectory) or is None for
    bound circuits. ``paulis`` maps an op index (a cx) to per-row Pauli codes
    applied right after that op. Returns amplitudes of shape (B, 2**n).
    """
    n = c.num_qubits
    _check_size(n)
    if thetas is not None:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if thetas.shape[1] != c.num_params:
            raise ValueError(f"expected {c.num_params} parameters, got {thetas.shape[1]}")
        b = thetas.shape[0]
    else:
        if c.num_params:
            raise ValueError("symbolic circuit needs parameter values")
        b = batch or 1
    if paulis:
        b = max(b, max(len(v) for v in paulis.values()))
    state = np.zeros((b, 1 << n), dtype=complex)
    state[:, 0] = 1.0
    for i, op in enumerate(c.ops):
        if op.name == "barrier":
            continue
        if op.name == "cx":
            state = _apply_cx(state, op.qubits[0], op.qubits[1], n)
            if paulis is not None and i in paulis:
                state = _apply_pauli_rows(state, paulis[i], op.qubits, n)
            continue
        if op.is_symbolic:
            mats = _rot_mats(op.name, thetas[:, int(op.param)])
            if thetas.shape[0] != b:
                mats = np.broadcast_to(mats, (b, 2, 2))
        else:
            mats = _rot_mats(op.name, np.asarray(op.angle))
        state = _apply_1q(state, mats, op.qubits[0], n)
    return state


def run_ideal(c: Circuit, theta: Sequence[float] | None = None) -> StateVector:
    if theta is None:
        theta = []
    bound = bind(c, theta) if c.num_params else c
    if len(theta) and not c.num_params:
        raise ValueError(f"expected 0 parameters, got {len(theta)}")
    return StateVector(evolve(bound)[0])


def run_batch(c: Circuit, thetas: np.ndarray) -> np.ndarray:
    """Ideal states for many parameter vectors at once, shape (B, 2**n)."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    per_chunk = max(1, _CHUNK_AMPS >> c.num_qubits)
    out = [evolve(c, thetas[i : i + per_chunk]) for i in range(0, thetas.shape[0], per_chunk)]
    return np.concatenate(out, axis=0)


# -- noise --------------------------------------------------------------------

def effective_layer_epc(layer: Sequence[Edge], device: DeviceModel) -> dict[Edge, float]:
    """EPC of each cx in a parallel layer: independent EPC times every pairwise multiplier."""
    edges = [norm_edge(e) for e in layer]
    out = {}
    for g in edges:
        epc = device.epc(g)
        for h in edges:
            if h != g:
                epc *= device.multiplier(g, h)
        out[g] = epc
    return out


def cx_error_rates(c: Circuit, spec: NoiseSpec) -> dict[int, float]:
    """EPC for every cx op index of a bound circuit under ``spec``."""
    cx_ops = [i for i, op in enumerate(c.ops) if op.name == "cx"]
    if spec.mode == "ideal":
        return {i: 0.0 for i in cx_ops}
    dev = spec.device
    if spec.mode == "standard":
        return {i: dev.epc(c.device_edge(c.ops[i])) for i in cx_ops}
    rates = {}
    for layer in build_dag_layers(c):
        idx = [i for i in layer if c.ops[i].name == "cx"]
        if not idx:
            continue
        eff = effective_layer_epc([c.device_edge(c.ops[i]) for i in idx], dev)
        for i in idx:
            rates[i] = eff[norm_edge(c.device_edge(c.ops[i]))]
    return rates


def depolarizing_probability(epc: float) -> float:
    """Two-qubit depolarizing parameter reproducing ``epc``; EPC is capped at 0.75."""
    if epc > EPC_CAP:
        log.warning("effective EPC %.4f exceeds %.2f; capping", epc, EPC_CAP)
        epc = EPC_CAP
    return epc * 4.0 / 3.0


def _rngs(seed) -> tuple[np.random.Generator, np.random.Generator]:
    err, meas = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(err), np.random.default_rng(meas)


def _format_counts(outcomes: np.ndarray, n: int) -> dict[str, int]:
    vals, cnt = np.unique(outcomes, return_counts=True)
    return {format(int(v), f"0{n}b"): int(k) for v, k in zip(vals, cnt)}


def _sample(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(probs)
    cum /= cum[-1]
    return np.minimum(np.searchsorted(cum, rng.random(shots), side="right"), probs.size - 1)


def _is_clifford_angle(theta: float) -> bool:
    k = theta / (math.pi / 2)
    return abs(k - round(k)) < 1e-9


def _frame_propagate(c: Circuit, patterns: np.ndarray, cx_index: dict[int, int]) -> np.ndarray:
    """Pauli frames (x bits) per shot at circuit end, shape (shots, n)."""
    shots = patterns.shape[0]
    n = c.num_qubits
    x = np.zeros((shots, n), dtype=bool)
    z = np.zeros((shots, n), dtype=bool)
    for i, op in enumerate(c.ops):
        if op.name == "barrier":
            continue
        if op.name == "cx":
            a, b = op.qubits
            x[:, b] ^= x[:, a]
            z[:, a] ^= z[:, b]
            col = cx_index.get(i)
            if col is not None:
                code = patterns[:, col]
                for shift, q in ((2, a), (0, b)):
                    p = (code >> shift) & 3
                    x[:, q] ^= (p == 1) | (p == 2)
                    z[:, q] ^= (p == 2) | (p == 3)
            continue
        k = int(round(op.angle / (math.pi / 2))) % 2
        if not k:
            continue
        q = op.qubits[0]
        if op.name == "rz":
            z[:, q] ^= x[:, q]
        elif op.name == "rx":
            x[:, q] ^= z[:, q]
        else:
            x[:, q], z[:, q] = z[:, q].copy(), x[:, q].copy()
    return x


def run_noisy(c: Circuit, theta, spec: NoiseSpec, shots: int, seed=None) -> ShotResult:
    """Sample ``shots`` terminal measurements of ``c`` under ``spec``.

    ``seed`` overrides ``spec.seed``. The error draws and the measurement draws
    use separate child streams of the seed, so a zero-EPC run reproduces the
    ideal-mode counts exactly.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    bound = bind(c, theta if theta is not None else [])
    n = bound.num_qubits
    _check_size(n)
    err_rng, meas_rng = _rngs(spec.seed if seed is None else seed)

    rates = cx_error_rates(bound, spec)
    cx_ops = sorted(rates)
    probs_err = np.array([depolarizing_probability(rates[i]) for i in cx_ops])
    hit = err_rng.random((shots, len(cx_ops))) < probs_err
    codes = err_rng.integers(0, 16, size=(shots, len(cx_ops)))
    patterns = np.where(hit, codes, 0).astype(np.int64)

    ideal = evolve(bound)[0]
    ideal_p = np.abs(ideal) ** 2
    top = int(np.argmax(ideal_p))
    clifford = all(op.name in ("cx", "barrier") or _is_clifford_angle(op.angle) for op in bound.ops)
    if clifford and ideal_p[top] > 1 - 1e-9:
        frames = _frame_propagate(bound, patterns, {op_i: col for col, op_i in enumerate(cx_ops)})
        weights = 1 << np.arange(n - 1, -1, -1)
        outcomes = top ^ (frames.astype(np.int64) @ weights)
        return ShotResult(_format_counts(outcomes, n), shots, n)

    if not patterns.any():
        outcomes = _sample(ideal_p, shots, meas_rng)
        return ShotResult(_format_counts(outcomes, n), shots, n)

    uniq, inverse = np.unique(patterns, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    r = meas_rng.random(shots)
    outcomes = np.empty(shots, dtype=np.int64)
    per_chunk = max(1, _CHUNK_AMPS >> n)
    for start in range(0, uniq.shape[0], per_chunk):
        block = uniq[start : start + per_chunk]
        paulis = {op_i: block[:, col] for col, op_i in enumerate(cx_ops)}
        states = evolve(bound, paulis=paulis, batch=block.shape[0])
        cum = np.cumsum(np.abs(states) ** 2, axis=1)
        cum /= cum[:, -1:]
        for j in range(block.shape[0]):
            rows = np.nonzero(inverse == start + j)[0]
            outcomes[rows] = np.minimum(np.searchsorted(cum[j], r[rows], side="right"), cum.shape[1] - 1)
    return ShotResult(_format_counts(outcomes, n), shots, n)


def sample_ideal(c: Circuit, theta, shots: int, seed=None) -> ShotResult:
    return run_noisy(c, theta, NoiseSpec("ideal"), shots, seed=seed)


def counts_to_probs(result: ShotResult) -> np.ndarray:
    p = np.zeros(1 << result.num_qubits)
    for k, v in result.counts.items():
        p[int(k, 2)] = v / result.shots
    return p


def unitary(c: Circuit) -> np.ndarray:
    """Full unitary of a bound circuit (columns are images of basis states); small n only."""
    n = c.num_qubits
    if n > 10:
        raise SimulationError("unitary extraction limited to 10 qubits")
    d = 1 << n
    state = np.eye(d, dtype=complex)
    for op in c.ops:
        if op.name == "barrier":
            continue
        if op.name == "cx":
            state = _apply_cx(state, op.qubits[0], op.qubits[1], n)
        else:
            state = _apply_1q(state, _rot_mats(op.name, np.asarray(op.angle)), op.qubits[0], n)
    return state.T


def equal_up_to_phase(u: np.ndarray, v: np.ndarray, atol: float = 1e-9) -> bool:
    k = np.argmax(np.abs(v.ravel()))
    if abs(v.ravel()[k]) < atol:
        return np.allclose(u, v, atol=atol)
    phase = u.ravel()[k] / v.ravel()[k]
    if abs(abs(phase) - 1) > 1e-6:
        return False
    return np.allclose(u, phase * v, atol=atol)


def outcome_counter(result: ShotResult) -> Counter:
    return Counter(result.counts)
