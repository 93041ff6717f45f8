"""Regenerate the shipped qubit Hamiltonians (needs pyscf, not a package dependency).

H2 / STO-3G at 0.735 A gives 4 spin orbitals; LiH / STO-3G at 1.6 A is reduced
to a (2e, 3o) active space, 6 spin orbitals. Both are mapped with the
Bravyi-Kitaev encoding: the second-quantized Hamiltonian is built as a dense
Jordan-Wigner matrix, permuted into the BK basis (|n> -> |beta n mod 2>) and
expanded in Pauli strings. Character i of each Pauli string acts on qubit i.
"""
import itertools
import json
from functools import reduce
from pathlib import Path

import numpy as np
from pyscf import gto, mcscf, scf

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
LOWER = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|: occupied (1) -> empty (0)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

BK8 = np.array([
    [1, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 0],
    [0, 0, 0, 0, 1, 1, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 0],
    [1, 1, 1, 1, 1, 1, 1, 1],
])


def kron(*ops):
    return reduce(np.kron, ops)


def annihilator(j, n):
    return kron(*([Z] * j + [LOWER] + [I2] * (n - j - 1)))


def fermion_matrix(ecore, h1, h2):
    """Spin-orbital Hamiltonian from spatial integrals (chemist notation), interleaved spins."""
    norb = h1.shape[0]
    n = 2 * norb
    a = [annihilator(j, n) for j in range(n)]
    ad = [m.conj().T for m in a]
    H = ecore * np.eye(2**n, dtype=complex)
    for p, q in itertools.product(range(n), repeat=2):
        if p % 2 == q % 2:
            H += h1[p // 2, q // 2] * ad[p] @ a[q]
    for p, q, r, s in itertools.product(range(n), repeat=4):
        if p % 2 == q % 2 and r % 2 == s % 2:
            v = h2[p // 2, q // 2, r // 2, s // 2]
            if abs(v) > 1e-12:
                H += 0.5 * v * ad[p] @ ad[r] @ a[s] @ a[q]
    return H


def to_bravyi_kitaev(H, n):
    beta = BK8[:n, :n]
    perm = np.zeros((2**n, 2**n))
    for idx in range(2**n):
        occ = np.array([(idx >> (n - 1 - k)) & 1 for k in range(n)])
        bk = beta @ occ % 2
        perm[int("".join(map(str, bk)), 2), idx] = 1
    return perm @ H @ perm.T


def pauli_terms(H, n):
    terms = []
    for label in itertools.product("IXYZ", repeat=n):
        P = kron(*(PAULI[ch] for ch in label))
        c = np.trace(P @ H) / 2**n
        if abs(c) > 1e-10:
            assert abs(c.imag) < 1e-10
            terms.append({"coeff": round(float(c.real), 12), "pauli": "".join(label)})
    return terms


def h2():
    mol = gto.M(atom="H 0 0 0; H 0 0 0.735", basis="sto-3g", verbose=0)
    mf = scf.RHF(mol).run()
    C = mf.mo_coeff
    h1 = C.T @ mf.get_hcore() @ C
    h2 = mol.ao2mo(C, aosym=1).reshape([C.shape[1]] * 4)
    return mol.energy_nuc(), h1, h2, mf.e_tot


def lih():
    mol = gto.M(atom="Li 0 0 0; H 0 0 1.6", basis="sto-3g", verbose=0)
    mf = scf.RHF(mol).run()
    cas = mcscf.CASCI(mf, 3, 2)
    h1, ecore = cas.get_h1eff()
    h2 = cas.get_h2eff()
    from pyscf import ao2mo
    h2 = ao2mo.restore(1, h2, 3)
    return ecore, h1, h2, mf.e_tot


def main():
    out = Path(__file__).resolve().parents[1] / "src" / "xtalk_pqc" / "data"
    for name, fn in (("h2_bk_4q", h2), ("lih_bk_6q", lih)):
        ecore, h1, h2m, ehf = fn()
        n = 2 * h1.shape[0]
        H = to_bravyi_kitaev(fermion_matrix(ecore, h1, h2m), n)
        terms = pauli_terms(H, n)
        (out / f"{name}.json").write_text(json.dumps({"n": n, "terms": terms}, indent=1) + "\n")
        print(name, n, len(terms), "HF", ehf, "min eig", np.linalg.eigvalsh(H)[0])


if __name__ == "__main__":
    main()
