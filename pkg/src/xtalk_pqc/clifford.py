"""One- and two-qubit Clifford tableaux, uniform sampling and realization into rx/rz/cx.

A Clifford is stored by the images of the generators X_0..X_{n-1}, Z_0..Z_{n-1}.
Each image is a Pauli written as ``i**q * X**x Z**z`` (all X factors before all
Z factors), so multiplying two Paulis only needs the symplectic product for
the phase.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circuit import GateInstance, cx, rx, rz

HALF_PI = math.pi / 2


@dataclass(frozen=True)
class Pauli:
    x: tuple[int, ...]
    z: tuple[int, ...]
    q: int = 0  # phase exponent of i

    def __mul__(self, other: "Pauli") -> "Pauli":
        # X^x1 Z^z1 X^x2 Z^z2 = (-1)^{z1.x2} X^{x1+x2} Z^{z1+z2}
        sign = 2 * sum(a & b for a, b in zip(self.z, other.x))
        return Pauli(
            tuple(a ^ b for a, b in zip(self.x, other.x)),
            tuple(a ^ b for a, b in zip(self.z, other.z)),
            (self.q + other.q + sign) % 4,
        )

    def anticommutes(self, other: "Pauli") -> bool:
        s = sum(a & b for a, b in zip(self.x, other.z)) + sum(a & b for a, b in zip(self.z, other.x))
        return bool(s % 2)

    @classmethod
    def hermitian(cls, x, z) -> "Pauli":
        x = tuple(int(a) for a in x)
        z = tuple(int(b) for b in z)
        return cls(x, z, sum(a & b for a, b in zip(x, z)) % 4)


def _generators(n: int) -> list[Pauli]:
    out = []
    for k in range(2 * n):
        x = [0] * n
        z = [0] * n
        (x if k < n else z)[k % n] = 1
        out.append(Pauli(tuple(x), tuple(z)))
    return out


@dataclass(frozen=True)
class Tableau:
    n: int
    images: tuple[Pauli, ...]  # X_0..X_{n-1}, Z_0..Z_{n-1}

    @classmethod
    def identity(cls, n: int) -> "Tableau":
        return cls(n, tuple(_generators(n)))

    def apply(self, p: Pauli) -> Pauli:
        """Image of ``p`` under this Clifford (conjugation)."""
        out = Pauli((0,) * self.n, (0,) * self.n, p.q)
        for k in range(self.n):
            if p.x[k]:
                out = out * self.images[k]
        for k in range(self.n):
            if p.z[k]:
                out = out * self.images[self.n + k]
        return out

    def then(self, other: "Tableau") -> "Tableau":
        """Apply ``self`` first, then ``other``."""
        return Tableau(self.n, tuple(other.apply(img) for img in self.images))

    def symplectic(self) -> np.ndarray:
        """2n x 2n binary matrix; column k is the (x|z) vector of generator k's image."""
        return np.array([list(p.x) + list(p.z) for p in self.images], dtype=np.uint8).T

    @property
    def key(self) -> bytes:
        return self.symplectic().tobytes()

    def signs(self) -> tuple[int, ...]:
        """Sign bit of each image relative to its Hermitian canonical form."""
        out = []
        for p in self.images:
            h = Pauli.hermitian(p.x, p.z)
            out.append(((p.q - h.q) % 4) // 2)
        return tuple(out)

    def inverse(self) -> "Tableau":
        n = self.n
        s = self.symplectic()
        omega = np.block(
            [[np.zeros((n, n), np.uint8), np.eye(n, dtype=np.uint8)], [np.eye(n, dtype=np.uint8), np.zeros((n, n), np.uint8)]]
        )
        sinv = omega @ s.T @ omega % 2
        images = []
        gens = _generators(n)
        for k in range(2 * n):
            col = sinv[:, k]
            cand = Pauli.hermitian(tuple(col[:n]), tuple(col[n:]))
            back = self.apply(cand)
            if back.q != gens[k].q or back.x != gens[k].x or back.z != gens[k].z:
                cand = Pauli(cand.x, cand.z, (cand.q + 2) % 4)
            images.append(cand)
        return Tableau(n, tuple(images))

    def is_symplectic(self) -> bool:
        n = self.n
        s = self.symplectic().astype(int)
        omega = np.block([[np.zeros((n, n), int), np.eye(n, dtype=int)], [np.eye(n, dtype=int), np.zeros((n, n), int)]])
        return np.array_equal(s.T @ omega @ s % 2, omega)

    def __eq__(self, other):
        return isinstance(other, Tableau) and self.n == other.n and self.images == other.images

    def __hash__(self):
        return hash(self.images)


def tableau_of_gate(op: GateInstance, n: int) -> Tableau:
    """Tableau of one Clifford gate acting on an ``n``-qubit register."""
    images = list(_generators(n))
    if op.name == "cx":
        c, t = op.qubits
        images[c] = images[c] * images[t]  # X_c -> X_c X_t
        images[n + t] = images[n + c] * images[n + t]  # Z_t -> Z_c Z_t
        return Tableau(n, tuple(images))
    k = int(round(op.angle / HALF_PI)) % 4
    if abs(op.angle / HALF_PI - round(op.angle / HALF_PI)) > 1e-9:
        raise ValueError(f"{op.name}({op.angle}) is not a Clifford rotation")
    q = op.qubits[0]
    X, Zp = images[q], images[n + q]
    # single quarter turn, then repeat
    for _ in range(k):
        if op.name == "rz":
            # X -> Y, Z -> Z
            X = _quarter(X, Zp)
        elif op.name == "rx":
            # Z -> -Y, X -> X
            Zp = _neg(_quarter(X, Zp))
        else:
            # X -> -Z, Z -> X
            X, Zp = _neg(Zp), X
    images[q], images[n + q] = X, Zp
    return Tableau(n, tuple(images))


def _quarter(a: Pauli, b: Pauli) -> Pauli:
    """Hermitian product i*a*b (equals Y when a = X, b = Z)."""
    p = a * b
    return Pauli(p.x, p.z, (p.q + 1) % 4)


def _neg(p: Pauli) -> Pauli:
    return Pauli(p.x, p.z, (p.q + 2) % 4)


def tableau_of_ops(ops, n: int) -> Tableau:
    t = Tableau.identity(n)
    for op in ops:
        if op.name == "barrier":
            continue
        t = t.then(tableau_of_gate(op, n))
    return t


# -- group enumeration and realization ----------------------------------------

def _word_gates(n: int) -> list[tuple[GateInstance, int]]:
    """Generating gates with search costs (cx is expensive)."""
    gates = []
    for q in range(n):
        gates.append((rz(q, HALF_PI), 1))
        gates.append((rx(q, HALF_PI), 1))
    if n == 2:
        gates.append((cx(0, 1), 10))
        gates.append((cx(1, 0), 10))
    return gates


@lru_cache(maxsize=None)
def _symplectic_words(n: int) -> dict[bytes, tuple[GateInstance, ...]]:
    """Cheapest generator word (fewest cx, then fewest 1q gates) for every symplectic class."""
    gates = _word_gates(n)
    gate_tabs = [(g, tableau_of_gate(g, n), w) for g, w in gates]
    start = Tableau.identity(n)
    heap = [(0, 0, start.key)]
    dist = {start.key: 0}
    tabs = {start.key: start}
    counter = itertools.count(1)
    words = {start.key: ()}
    while heap:
        d, _, key = heapq.heappop(heap)
        if d > dist[key]:
            continue
        t = tabs[key]
        for g, gt, w in gate_tabs:
            nt = t.then(gt)
            nk = nt.key
            nd = d + w
            if nk not in dist or nd < dist[nk]:
                dist[nk] = nd
                tabs[nk] = nt
                words[nk] = words[key] + (g,)
                heapq.heappush(heap, (nd, next(counter), nk))
    return words


def group_size(n: int) -> int:
    return len(_symplectic_words(n)) * 4**n


def _pauli_ops(x, z) -> list[GateInstance]:
    ops = []
    for q, (a, b) in enumerate(zip(x, z)):
        if a:
            ops.append(rx(q, math.pi))
        if b:
            ops.append(rz(q, math.pi))
    return ops


@dataclass(frozen=True)
class CliffordElement:
    tableau: Tableau
    ops: tuple[GateInstance, ...]

    @property
    def n(self) -> int:
        return self.tableau.n

    def compose(self, other: "CliffordElement") -> "CliffordElement":
        """``self`` followed by ``other``."""
        return realize(self.tableau.then(other.tableau))

    def inverse(self) -> "CliffordElement":
        return realize(self.tableau.inverse())

    @property
    def num_cx(self) -> int:
        return sum(op.name == "cx" for op in self.ops)


def realize(t: Tableau) -> CliffordElement:
    """Gate sequence for a tableau: stored symplectic word plus a Pauli sign fix."""
    n = t.n
    word = _symplectic_words(n)[t.key]
    base = tableau_of_ops(word, n)
    diff = [a ^ b for a, b in zip(base.signs(), t.signs())]
    for bits in itertools.product((0, 1), repeat=2 * n):
        p = Pauli(bits[:n], bits[n:])
        # conjugating by P flips the sign of every image anticommuting with P
        if all(int(img.anticommutes(p)) == d for img, d in zip(base.images, diff)):
            ops = tuple(word) + tuple(_pauli_ops(p.x, p.z))
            return CliffordElement(t, ops)
    raise AssertionError("no Pauli correction found")  # unreachable for valid tableaux


@lru_cache(maxsize=None)
def _class_keys(n: int) -> tuple[bytes, ...]:
    return tuple(sorted(_symplectic_words(n)))


def random_clifford(n: int, rng: np.random.Generator) -> CliffordElement:
    """Uniform sample from the n-qubit Clifford group (n in {1, 2})."""
    if n not in (1, 2):
        raise ValueError("only 1- and 2-qubit Cliffords are supported")
    keys = _class_keys(n)
    key = keys[int(rng.integers(len(keys)))]
    word = _symplectic_words(n)[key]
    bits = [int(b) for b in rng.integers(0, 2, size=2 * n)]
    pauli = _pauli_ops(bits[:n], bits[n:])
    ops = tuple(word) + tuple(pauli)
    return CliffordElement(tableau_of_ops(ops, n), ops)


def identity_element(n: int) -> CliffordElement:
    return CliffordElement(Tableau.identity(n), ())
