"""Brute-force dense references, written independently of the package internals."""

from functools import reduce
from itertools import product

import numpy as np

I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SDG = np.diag([1, -1j])
AXIS_U = {"Z": I2, "X": HAD, "Y": HAD @ SDG}


def dense_state(tensors):
    """Sum over all bit-strings of the matrix product; slow and obvious."""
    n = len(tensors)
    psi = np.zeros(2**n, dtype=complex)
    for idx, bits in enumerate(product((0, 1), repeat=n)):
        m = np.eye(1, dtype=complex)
        for t, b in zip(tensors, bits):
            m = m @ t[:, b, :]
        psi[idx] = m[0, 0]
    return psi


def kron_all(mats):
    return reduce(np.kron, mats, np.eye(1, dtype=complex))


def pauli_dense(label: dict, n: int) -> np.ndarray:
    return kron_all([PAULI[label.get(i, "I")] for i in range(n)])


def basis_unitary(basis: str) -> np.ndarray:
    return kron_all([AXIS_U[c] for c in basis])


def outcome_probabilities(psi, basis: str) -> np.ndarray:
    amp = basis_unitary(basis) @ psi
    return np.abs(amp) ** 2 / np.vdot(psi, psi).real


def partial_trace(psi, keep, n):
    """Reduced density matrix on ``keep`` (ascending) by explicit index sums."""
    keep = sorted(keep)
    rest = [i for i in range(n) if i not in keep]
    t = (psi / np.linalg.norm(psi)).reshape((2,) * n)
    t = np.transpose(t, keep + rest).reshape(2 ** len(keep), -1)
    return t @ t.conj().T


def schmidt(psi, cut, n):
    s = np.linalg.svd((psi / np.linalg.norm(psi)).reshape(2**cut, 2 ** (n - cut)), compute_uv=False)
    return s


def entropy(psi, cut, n):
    p = schmidt(psi, cut, n) ** 2
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def pauli_basis(n, letters="IXYZ"):
    for labels in product(letters, repeat=n):
        yield labels, kron_all([PAULI[c] for c in labels])


def channel_by_pauli_sum(op, n):
    """``sum_P tr(O P)/2^n * 2^{-k(P)} P`` over Y-free strings."""
    out = np.zeros_like(op, dtype=complex)
    for labels, p in pauli_basis(n, "IXZ"):
        k = sum(c != "I" for c in labels)
        out += np.trace(op @ p) / 2**n * 2.0 ** (-k) * p
    return out


def visible_projection(op, n):
    out = np.zeros_like(op, dtype=complex)
    for labels, p in pauli_basis(n, "IXZ"):
        out += np.trace(op @ p) / 2**n * p
    return out


def random_real_state(n, rng):
    v = rng.standard_normal(2**n)
    return v / np.linalg.norm(v)


def ruby_dense(lat, delta, h_bd, v):
    """Rydberg Hamiltonian as a direct sum over sites and pairs; |0> is the occupied state."""
    n = lat.n
    occ = 1 - (np.arange(2**n)[:, None] >> (n - 1 - np.arange(n))[None, :] & 1)
    diag = -delta * occ.sum(axis=1)
    for a, b, d in lat.neighbor_pairs:
        assert d <= 2.0 + 1e-9
        diag = diag + v * occ[:, a] * occ[:, b]
    diag = diag - h_bd * occ[:, list(lat.boundary_sites)].sum(axis=1)
    h = np.diag(diag).astype(complex)
    idx = np.arange(2**n)
    for i in range(n):
        h[idx ^ (1 << (n - 1 - i)), idx] += 0.5
    return h
