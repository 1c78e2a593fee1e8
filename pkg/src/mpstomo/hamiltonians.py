"""Hamiltonians as matrix product operators, stabilizer sets and reference states."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, ResourceLimitError
from .lattices import ruby_lattice, surface_code_lattice, surface_code_plaquettes
from .mps import MPSState, from_dense, inner_product, new_random_mps, normalize, to_dense
from .paulis import I2, PAULIS, X, Z, PauliString

MAX_DENSE_SITES = 12
RYDBERG_V = 47.0
DEFAULT_BOUNDARY_FIELD = -0.6
N_PROJ = np.diag([1.0, 0.0]).astype(complex)  # (1 + Z) / 2


@dataclass(frozen=True)
class Term:
    """``coefficient * prod_site ops[site]``; an empty ``ops`` is a constant."""

    coefficient: complex
    ops: dict

    @classmethod
    def pauli(cls, p: PauliString) -> "Term":
        return cls(p.coefficient, {s: PAULIS[q] for s, q in p.support.items()})


class MPO:
    """Chain of rank-4 tensors ``(left bond, bra, ket, right bond)``."""

    __slots__ = ("tensors",)

    def __init__(self, tensors: Iterable[np.ndarray]):
        ts = [np.asarray(t, dtype=complex) for t in tensors]
        if not ts:
            raise InvalidArgumentError("an MPO needs at least one site")
        for i, t in enumerate(ts):
            if t.ndim != 4 or t.shape[1:3] != (2, 2):
                raise InvalidArgumentError(f"MPO tensor {i} has shape {t.shape}")
        if ts[0].shape[0] != 1 or ts[-1].shape[3] != 1:
            raise InvalidArgumentError("MPO boundary bonds must be 1")
        for i in range(len(ts) - 1):
            if ts[i].shape[3] != ts[i + 1].shape[0]:
                raise InvalidArgumentError(f"MPO bond mismatch between sites {i} and {i + 1}")
        self.tensors = tuple(ts)

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        return (1,) + tuple(t.shape[3] for t in self.tensors)

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return self.tensors[i]

    def __iter__(self):
        return iter(self.tensors)

    def __repr__(self):
        return f"MPO(n={self.n}, bond_dims={self.bond_dims})"


def mpo_from_terms(n: int, terms: Sequence[Term], compress: bool = True, cutoff: float = 1e-13) -> MPO:
    """Finite-state-machine MPO for a sum of product terms, optionally SVD-compressed.

    Channel 0 carries "nothing placed yet", channel 1 "term finished", and
    every term spanning a bond gets its own channel across that bond.
    """
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    spans = []
    for term in terms:
        if any(not 0 <= s < n for s in term.ops):
            raise InvalidArgumentError(f"term support {sorted(term.ops)} outside [0, {n})")
        sites = sorted(term.ops)
        spans.append((sites[0], sites[-1]) if sites else (0, 0))
    # channel index of each open term on each bond b (between sites b-1 and b)
    channels = [dict() for _ in range(n + 1)]
    for k, (f, l) in enumerate(spans):
        for b in range(f + 1, l + 1):
            channels[b][k] = 2 + len(channels[b])
    dims = [2 + len(c) for c in channels]
    ws = [np.zeros((dims[i], 2, 2, dims[i + 1]), dtype=complex) for i in range(n)]
    for i in range(n):
        ws[i][0, :, :, 0] = I2
        ws[i][1, :, :, 1] = I2
    for k, (term, (f, l)) in enumerate(zip(terms, spans)):
        for i in range(f, l + 1):
            op = term.ops.get(i, I2) * (term.coefficient if i == f else 1.0)
            a = 0 if i == f else channels[i][k]
            b = 1 if i == l else channels[i + 1][k]
            ws[i][a, :, :, b] += op
    ws[0] = ws[0][:1]
    ws[-1] = ws[-1][..., 1:2]
    mpo = MPO(ws)
    return compress_mpo(mpo, cutoff) if compress else mpo


def compress_mpo(mpo: MPO, cutoff: float = 1e-13) -> MPO:
    """Reduce bond dimensions with a QR sweep followed by an SVD sweep."""
    ws = [t.copy() for t in mpo.tensors]
    n = len(ws)
    for i in range(n - 1):
        a, d1, d2, b = ws[i].shape
        q, r = np.linalg.qr(ws[i].reshape(a * d1 * d2, b))
        ws[i] = q.reshape(a, d1, d2, q.shape[1])
        ws[i + 1] = np.tensordot(r, ws[i + 1], axes=(1, 0))
    for i in range(n - 1, 0, -1):
        a, d1, d2, b = ws[i].shape
        u, s, vh = np.linalg.svd(ws[i].reshape(a, d1 * d2 * b), full_matrices=False)
        keep = max(1, int(np.sum(s > cutoff * s[0]))) if s[0] > 0 else 1
        ws[i] = vh[:keep].reshape(keep, d1, d2, b)
        ws[i - 1] = np.tensordot(ws[i - 1], u[:, :keep] * s[:keep], axes=(3, 0))
    return MPO(ws)


def dense_hamiltonian(mpo: MPO) -> np.ndarray:
    """Contract an MPO into a dense ``2**n x 2**n`` matrix (n <= 12)."""
    if mpo.n > MAX_DENSE_SITES:
        raise ResourceLimitError(f"dense operator on {mpo.n} sites exceeds {MAX_DENSE_SITES}")
    op = mpo.tensors[0][0]  # (row, col, bond)
    for w in mpo.tensors[1:]:
        r, c, _ = op.shape
        op = np.einsum("xyb,bstv->xsytv", op, w).reshape(r * 2, c * 2, w.shape[3])
    return op[..., 0]


def sparse_from_terms(n: int, terms: Sequence[Term]) -> sp.csr_matrix:
    """Term-by-term sparse construction; used as an independent check of the MPO route."""
    dim = 2**n
    out = sp.csr_matrix((dim, dim), dtype=complex)
    for term in terms:
        mat = sp.identity(1, dtype=complex, format="csr")
        for i in range(n):
            mat = sp.kron(mat, sp.csr_matrix(term.ops.get(i, I2)), format="csr")
        out = out + term.coefficient * mat
    return out


def identity_mpo(n: int) -> MPO:
    return MPO([I2.reshape(1, 2, 2, 1)] * n)


def pauli_mpo(n: int, p: PauliString) -> MPO:
    """Bond-dimension-1 MPO of a single Pauli string."""
    p.check_range(n)
    ops = p.local_ops()
    ts = [ops.get(i, I2).reshape(1, 2, 2, 1).copy() for i in range(n)]
    ts[0] = ts[0] * p.scale(n)
    return MPO(ts)


def operator_mpo(n: int, sites: Sequence[int], op: np.ndarray, cutoff: float = 1e-14) -> MPO:
    """MPO of a dense operator acting on ``sites`` (ascending order) and identity elsewhere.

    The operator is split across its sites by successive SVDs; sites between
    them inside the support pass the bond through unchanged.
    """
    sites = sorted(int(s) for s in sites)
    k = len(sites)
    if k == 0 or len(set(sites)) != k or sites[0] < 0 or sites[-1] >= n:
        raise InvalidArgumentError(f"invalid operator support {sites} for n={n}")
    op = np.asarray(op, dtype=complex)
    if op.shape != (2**k, 2**k):
        raise InvalidArgumentError(f"operator shape {op.shape} does not match {k} sites")
    # (out_1..out_k, in_1..in_k) -> (out_1, in_1, out_2, in_2, ...)
    t = op.reshape((2,) * (2 * k)).transpose([x for i in range(k) for x in (i, k + i)])
    pieces = []
    rest = t.reshape(1, -1)
    for _ in range(k - 1):
        bond = rest.shape[0]
        u, s, vh = np.linalg.svd(rest.reshape(bond * 4, -1), full_matrices=False)
        keep = max(1, int(np.sum(s > cutoff * s[0]))) if s[0] > 0 else 1
        pieces.append(u[:, :keep].reshape(bond, 2, 2, keep))
        rest = s[:keep, None] * vh[:keep]
    pieces.append(rest.reshape(rest.shape[0], 2, 2, 1))
    tensors = []
    it = iter(pieces)
    bond = 1
    for i in range(n):
        if i in sites:
            w = next(it)
            bond = w.shape[3]
        else:
            w = np.einsum("ab,st->astb", np.eye(bond), I2)
        tensors.append(w)
    return MPO(tensors)


# --- surface code --------------------------------------------------------------


def surface_code_stabilizers(lx: int, ly: int) -> list[PauliString]:
    """Z-type checks followed by X-type checks, in MPS site indices."""
    z_checks, x_checks = surface_code_plaquettes(lx, ly)
    return [PauliString.on_sites("Z", c) for c in z_checks] + [
        PauliString.on_sites("X", c) for c in x_checks
    ]


def surface_code_terms(lx: int, ly: int, h_z: float = 0.0) -> list[Term]:
    n = surface_code_lattice(lx, ly).n
    terms = [Term(-1.0, Term.pauli(s).ops) for s in surface_code_stabilizers(lx, ly)]
    if h_z != 0:
        terms += [Term(-h_z, {i: Z}) for i in range(n)]
    return terms


def surface_code_mpo(lx: int, ly: int, h_z: float = 0.0) -> MPO:
    """``H = -sum S_Z - sum S_X - h_z sum Z_i`` along the snake ordering."""
    n = surface_code_lattice(lx, ly).n
    return mpo_from_terms(n, surface_code_terms(lx, ly, h_z))


# --- Rydberg atoms on the ruby lattice ----------------------------------------------


def ruby_rydberg_terms(
    lx: int, ly: int, delta: float, h_bd: float = DEFAULT_BOUNDARY_FIELD, omega: float = 1.0
) -> list[Term]:
    """Terms of the truncated Rydberg Hamiltonian with boundary field.

    ``H = omega/2 sum X - delta sum n + V sum_{|r-r'|<=2a} n n' - h_bd sum_boundary n``
    with ``n = (1 + Z)/2`` and the step potential ``V = 47 omega``.
    """
    lat = ruby_lattice(lx, ly)
    terms = [Term(omega / 2, {i: X}) for i in range(lat.n)]
    terms += [Term(-delta, {i: N_PROJ}) for i in range(lat.n)]
    terms += [Term(RYDBERG_V * omega, {i: N_PROJ, j: N_PROJ}) for i, j, _ in lat.neighbor_pairs]
    if h_bd != 0:
        terms += [Term(-h_bd, {i: N_PROJ}) for i in lat.boundary_sites]
    return terms


def ruby_rydberg_mpo(lx: int, ly: int, delta: float, h_bd: float = DEFAULT_BOUNDARY_FIELD) -> MPO:
    lat = ruby_lattice(lx, ly)
    return mpo_from_terms(lat.n, ruby_rydberg_terms(lx, ly, delta, h_bd))


# --- reference states -----------------------------------------------------------


def ghz_state(n: int, sign: int = 1) -> MPSState:
    """``(|0...0> + sign |1...1>)/sqrt(2)`` as a bond-dimension-2 MPS."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if n == 1:
        return normalize(MPSState([np.array([1.0, sign]).reshape(1, 2, 1)]))
    first = np.zeros((1, 2, 2))
    first[0, 0, 0], first[0, 1, 1] = 1.0, float(sign)
    mid = np.zeros((2, 2, 2))
    mid[0, 0, 0] = mid[1, 1, 1] = 1.0
    last = np.zeros((2, 2, 1))
    last[0, 0, 0] = last[1, 1, 0] = 1.0
    return normalize(MPSState([first] + [mid] * (n - 2) + [last]))


def interpolation_endpoint(seed: int, n: int = 3) -> MPSState:
    """The seeded real bond-dimension-2 state, signed to have non-negative overlap with GHZ."""
    r = new_random_mps(n, 2, seed, real=True)
    if inner_product(ghz_state(n), r).real < 0:
        ts = list(r.tensors)
        ts[0] = -ts[0]
        r = MPSState(ts)
    return r


def interpolated_state(x: float, seed: int = 0, n: int = 3) -> MPSState:
    """Normalized ``sqrt(1-x)|GHZ> + sqrt(x)|psi_chi=2>`` compressed to an MPS."""
    if not 0.0 <= x <= 1.0:
        raise InvalidArgumentError(f"mixing weight must lie in [0, 1], got {x}")
    psi = np.sqrt(1 - x) * to_dense(ghz_state(n)) + np.sqrt(x) * to_dense(interpolation_endpoint(seed, n))
    psi = psi / np.linalg.norm(psi)
    return from_dense(psi, chi_max=4)
