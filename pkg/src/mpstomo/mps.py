"""Open-boundary matrix product states.

Tensors are stored with index order ``(left bond, physical, right bond)``
and physical dimension 2. Sites are 0-based; a bipartition ``cut`` counts
the number of sites on the left.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError, ResourceLimitError
from .paulis import ROTATIONS, PauliString, basis_codes, bits_array

PHYS_DIM = 2
MAX_RDM_SITES = 10


class MPSState:
    """A chain of complex rank-3 tensors.

    Instances are treated as immutable: operations return new states and
    the stored arrays are flagged read-only.
    """

    __slots__ = ("tensors", "canonical_center")

    def __init__(self, tensors: Iterable[np.ndarray], canonical_center: int | None = None):
        ts = []
        for t in tensors:
            t = np.array(t, dtype=np.complex128)
            t.flags.writeable = False
            ts.append(t)
        if not ts:
            raise InvalidArgumentError("an MPS needs at least one site")
        for i, t in enumerate(ts):
            if t.ndim != 3 or t.shape[1] != PHYS_DIM:
                raise InvalidArgumentError(f"tensor {i} has shape {t.shape}, expected (l, 2, r)")
        if ts[0].shape[0] != 1 or ts[-1].shape[2] != 1:
            raise InvalidArgumentError("boundary bond dimensions must be 1")
        for i in range(len(ts) - 1):
            if ts[i].shape[2] != ts[i + 1].shape[0]:
                raise InvalidArgumentError(f"bond mismatch between sites {i} and {i + 1}")
        if canonical_center is not None and not 0 <= canonical_center < len(ts):
            raise InvalidArgumentError(f"canonical center {canonical_center} out of range")
        self.tensors = tuple(ts)
        self.canonical_center = canonical_center

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        """Bond dimensions including the two trivial boundary bonds."""
        return (1,) + tuple(t.shape[2] for t in self.tensors)

    @property
    def chi(self) -> int:
        return max(self.bond_dims)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"MPSState(n={self.n}, bond_dims={self.bond_dims}, center={self.canonical_center})"


def bond_caps(n: int, chi: int) -> list[int]:
    """Maximal useful bond dimensions ``min(2**i, 2**(n-i), chi)``."""
    return [min(2 ** min(i, n - i), chi) for i in range(n + 1)]


def new_random_mps(n: int, chi: int, seed: int = 0, real: bool = False) -> MPSState:
    """Random normalized MPS with i.i.d. Gaussian entries (complex unless ``real``)."""
    if n < 1 or chi < 1:
        raise InvalidArgumentError(f"need n >= 1 and chi >= 1, got n={n}, chi={chi}")
    rng = np.random.default_rng(seed)
    dims = bond_caps(n, chi)
    tensors = []
    for i in range(n):
        shape = (dims[i], PHYS_DIM, dims[i + 1])
        t = rng.standard_normal(shape)
        if not real:
            t = t + 1j * rng.standard_normal(shape)
        tensors.append(t)
    return normalize(MPSState(tensors))


def product_state(local_states: Sequence) -> MPSState:
    """Product state from bits (``"0110"``) or a list of 2-vectors."""
    if isinstance(local_states, str):
        local_states = [np.eye(2)[int(b)] for b in local_states]
    tensors = [np.asarray(v, dtype=complex).reshape(1, 2, 1) for v in local_states]
    return normalize(MPSState(tensors))


def to_dense(mps: MPSState) -> np.ndarray:
    """Full state vector; site 0 is the most significant bit."""
    if mps.n > 24:
        raise ResourceLimitError(f"dense vector of {mps.n} qubits is too large")
    psi = mps.tensors[0].reshape(2, -1)
    for t in mps.tensors[1:]:
        psi = (psi @ t.reshape(t.shape[0], -1)).reshape(-1, t.shape[2])
    return psi.reshape(-1)


def from_dense(psi: np.ndarray, chi_max: int | None = None, cutoff: float = 1e-14) -> MPSState:
    """Exact (or truncated) MPS decomposition of a state vector by successive SVDs."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    n = int(round(np.log2(psi.size)))
    if 2**n != psi.size:
        raise InvalidArgumentError("state vector length must be a power of 2")
    tensors = []
    rest = psi.reshape(1, -1)
    for _ in range(n - 1):
        left = rest.shape[0]
        mat = rest.reshape(left * 2, -1)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep = _keep_count(s, chi_max, cutoff)
        tensors.append(u[:, :keep].reshape(left, 2, keep))
        rest = s[:keep, None] * vh[:keep]
    tensors.append(rest.reshape(rest.shape[0], 2, 1))
    return MPSState(tensors, canonical_center=n - 1)


def _keep_count(s: np.ndarray, chi_max: int | None, cutoff: float) -> int:
    if s.size == 0 or s[0] == 0:
        return 1
    keep = int(np.sum(s > cutoff * s[0]))
    keep = max(keep, 1)
    if chi_max is not None:
        keep = min(keep, chi_max)
    return keep


def norm_squared(mps: MPSState) -> float:
    env = np.ones((1, 1), dtype=complex)
    for t in mps.tensors:
        env = np.einsum("ab,asc,bsd->cd", env, t.conj(), t, optimize=True)
    return float(env[0, 0].real)


def normalize(mps: MPSState) -> MPSState:
    """Scale to unit norm, spreading the factor evenly over all tensors."""
    nrm2 = norm_squared(mps)
    if not np.isfinite(nrm2) or nrm2 <= 0:
        raise InvalidStateError("cannot normalize a zero-norm state")
    if mps.canonical_center is not None:
        c = mps.canonical_center
        ts = list(mps.tensors)
        ts[c] = ts[c] / np.sqrt(nrm2)
        return MPSState(ts, c)
    f = nrm2 ** (-0.5 / mps.n)
    return MPSState([t * f for t in mps.tensors])


def canonicalize(mps: MPSState, center: int) -> MPSState:
    """Mixed-canonical form with orthogonality center at ``center`` (QR sweeps)."""
    n = mps.n
    if not 0 <= center < n:
        raise InvalidArgumentError(f"center {center} out of range [0, {n})")
    ts = [t.copy() for t in mps.tensors]
    for i in range(center):
        l, d, r = ts[i].shape
        q, rr = np.linalg.qr(ts[i].reshape(l * d, r))
        ts[i] = q.reshape(l, d, q.shape[1])
        ts[i + 1] = np.tensordot(rr, ts[i + 1], axes=(1, 0))
    for i in range(n - 1, center, -1):
        l, d, r = ts[i].shape
        q, rr = np.linalg.qr(ts[i].reshape(l, d * r).T)
        ts[i] = q.T.reshape(q.shape[1], d, r)
        ts[i - 1] = np.tensordot(ts[i - 1], rr.T, axes=(2, 0))
    return MPSState(ts, center)


def isometry_residuals(mps: MPSState, center: int) -> list[float]:
    """Deviation of each non-center tensor from its isometry condition."""
    out = []
    for i, t in enumerate(mps.tensors):
        l, d, r = t.shape
        if i < center:
            m = t.reshape(l * d, r)
            out.append(float(np.abs(m.conj().T @ m - np.eye(r)).max()))
        elif i > center:
            m = t.reshape(l, d * r)
            out.append(float(np.abs(m @ m.conj().T - np.eye(l)).max()))
    return out


def rotated_tensors(t: np.ndarray) -> np.ndarray:
    """Stack ``(axis*2 + bit, l, r)`` of ``sum_s U^axis[bit, s] t[:, s, :]`` for all axes."""
    rot = np.einsum("abs,lsr->ablr", ROTATIONS, t)
    return rot.reshape(-1, t.shape[0], t.shape[2])


def amplitudes_batch(mps: MPSState, bases: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """``<b|U|psi>`` for each row of integer arrays ``bases`` and ``bits`` of shape (N, n)."""
    codes = 2 * np.asarray(bases, dtype=np.intp) + np.asarray(bits, dtype=np.intp)
    v = np.ones((codes.shape[0], 1), dtype=complex)
    for i, t in enumerate(mps.tensors):
        mats = rotated_tensors(t)[codes[:, i]]
        v = np.einsum("nl,nlr->nr", v, mats)
    return v[:, 0]


def amplitude(mps: MPSState, basis, bits) -> complex:
    """``<b|U|psi>`` where U rotates each qubit onto the requested axis."""
    codes = basis_codes(basis, mps.n)
    b = bits_array(bits, mps.n)
    return complex(amplitudes_batch(mps, codes[None], b[None])[0])


def inner_product(a: MPSState, b: MPSState) -> complex:
    """``<a|b>`` by a left-to-right transfer contraction."""
    if a.n != b.n:
        raise InvalidArgumentError(f"size mismatch: {a.n} vs {b.n}")
    env = np.ones((1, 1), dtype=complex)
    for ta, tb in zip(a.tensors, b.tensors):
        env = np.einsum("ab,asc,bsd->cd", env, ta.conj(), tb, optimize=True)
    return complex(env[0, 0])


def fidelity(a: MPSState, b: MPSState) -> float:
    """Phase-free overlap ``|<a|b>|`` of the normalized states."""
    na, nb = norm_squared(a), norm_squared(b)
    if na <= 0 or nb <= 0:
        raise InvalidStateError("fidelity of a zero-norm state is undefined")
    f = abs(inner_product(a, b)) / np.sqrt(na * nb)
    return float(min(f, 1.0))


def local_fidelity(a: MPSState, b: MPSState) -> float:
    return fidelity(a, b) ** (1.0 / a.n)


def sample_batch(mps: MPSState, bases: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Perfect sampling of outcome bits for a batch of measurement bases.

    ``uniforms`` (N, n) in [0, 1) drive the draws, so the result is a
    deterministic function of its inputs. Each qubit is drawn from its
    marginal conditioned on the bits already drawn to its left.
    """
    bases = np.asarray(bases, dtype=np.intp)
    psi = normalize(canonicalize(mps, 0))
    nrec = bases.shape[0]
    bits = np.zeros(bases.shape, dtype=np.uint8)
    v = np.ones((nrec, 1), dtype=complex)
    for i, t in enumerate(psi.tensors):
        rot = rotated_tensors(t)
        c0 = np.einsum("nl,nlr->nr", v, rot[2 * bases[:, i]])
        c1 = np.einsum("nl,nlr->nr", v, rot[2 * bases[:, i] + 1])
        w0 = np.einsum("nr,nr->n", c0.conj(), c0).real
        w1 = np.einsum("nr,nr->n", c1.conj(), c1).real
        p0 = w0 / (w0 + w1)
        one = uniforms[:, i] >= p0
        bits[:, i] = one
        chosen = np.where(one[:, None], c1, c0)
        v = chosen / np.sqrt(np.where(one, w1, w0))[:, None]
    return bits


def sample_bitstring(mps: MPSState, basis, rng: np.random.Generator) -> np.ndarray:
    codes = basis_codes(basis, mps.n)
    return sample_batch(mps, codes[None], rng.random((1, mps.n)))[0]


# --- operator sandwiches -----------------------------------------------------


def product_sandwich(mps: MPSState, ops: dict[int, np.ndarray]) -> complex:
    """``<psi| (x)_i O_i |psi>`` (unnormalized) for single-site operators."""
    env = np.ones((1, 1), dtype=complex)
    for i, t in enumerate(mps.tensors):
        op = ops.get(i)
        tk = t if op is None else np.einsum("st,ltr->lsr", op, t)
        env = np.einsum("ab,asc,bsd->cd", env, t.conj(), tk, optimize=True)
    return complex(env[0, 0])


def pauli_expectation(mps: MPSState, p: PauliString) -> float:
    """Normalized expectation value of a Hermitian Pauli string."""
    p.check_range(mps.n)
    val = product_sandwich(mps, p.local_ops()) / norm_squared(mps) * p.scale(mps.n)
    if abs(val.imag) > 1e-10 * max(1.0, abs(p.coefficient)):
        raise InvalidArgumentError(f"expectation of {p.label} has imaginary part {val.imag:.3g}")
    return float(val.real)


def mpo_environments(mps: MPSState, mpo: Sequence[np.ndarray]):
    """Left and right environments of ``<psi|W|psi>``.

    ``left[i]`` contracts sites ``< i`` and ``right[i]`` sites ``> i``; both
    have index order ``(bra bond, mpo bond, ket bond)``.
    """
    n = mps.n
    left = [None] * (n + 1)
    right = [None] * (n + 1)
    left[0] = np.ones((1, 1, 1), dtype=complex)
    for i, (t, w) in enumerate(zip(mps.tensors, mpo)):
        left[i + 1] = np.einsum("awb,asc,wstv,btd->cvd", left[i], t.conj(), w, t, optimize=True)
    right[n] = np.ones((1, 1, 1), dtype=complex)
    for i in range(n - 1, -1, -1):
        t, w = mps.tensors[i], mpo[i]
        right[i] = np.einsum("cvd,asc,wstv,btd->awb", right[i + 1], t.conj(), w, t, optimize=True)
    return left, right


def mpo_sandwich_grad(mps: MPSState, mpo: Sequence[np.ndarray]):
    """Value of ``<psi|W|psi>`` and its derivative with respect to conj(A)."""
    left, right = mpo_environments(mps, mpo)
    grads = []
    for i, (t, w) in enumerate(zip(mps.tensors, mpo)):
        g = np.einsum("awb,wstv,btd,cvd->asc", left[i], w, t, right[i + 1], optimize=True)
        grads.append(g)
    value = complex(left[-1][0, 0, 0])
    return value, grads


# --- bipartite and subsystem diagnostics --------------------------------------


def schmidt_values(mps: MPSState, cut: int) -> np.ndarray:
    """Descending Schmidt coefficients for the split after ``cut`` sites."""
    if not 1 <= cut <= mps.n - 1:
        raise InvalidArgumentError(f"cut {cut} out of range [1, {mps.n - 1}]")
    psi = canonicalize(mps, cut)
    t = psi.tensors[cut]
    s = np.linalg.svd(t.reshape(t.shape[0], -1), compute_uv=False)
    return s / np.linalg.norm(s)


def entanglement_entropy(mps: MPSState, cut: int) -> float:
    """Von Neumann entropy (natural log) of the bipartition."""
    p = schmidt_values(mps, cut) ** 2
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def reduced_density_matrix(mps: MPSState, sites: Iterable[int]) -> np.ndarray:
    """Dense reduced density matrix on ``sites`` (ascending order, first site most significant)."""
    sites = sorted(set(int(s) for s in sites))
    if not sites:
        raise InvalidArgumentError("empty subsystem")
    if len(sites) > MAX_RDM_SITES:
        raise ResourceLimitError(f"subsystem of {len(sites)} sites exceeds {MAX_RDM_SITES}")
    if sites[0] < 0 or sites[-1] >= mps.n:
        raise InvalidArgumentError(f"subsystem {sites} out of range [0, {mps.n})")
    psi = canonicalize(mps, sites[0])
    keep = set(sites)
    t0 = psi.tensors[sites[0]].shape[0]
    env = np.eye(t0, dtype=complex)[None, None]  # (D_bra, D_ket, chi_bra, chi_ket)
    for i in range(sites[0], sites[-1] + 1):
        t = psi.tensors[i]
        if i in keep:
            env = np.einsum("xyab,asc,btd->xsytcd", env, t.conj(), t, optimize=True)
            dx, _, dy = env.shape[:3]
            env = env.reshape(dx * 2, dy * 2, t.shape[2], t.shape[2])
        else:
            env = np.einsum("xyab,asc,bsd->xycd", env, t.conj(), t, optimize=True)
    rho = np.einsum("xycc->yx", env)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


# --- serialization -------------------------------------------------------------

_MAGIC = b"MPSTOMO\x00"
_VERSION = 1


def save_mps(mps: MPSState, path) -> None:
    """Binary container: magic, ``<u4`` version, n, bond dims, then ``<c16`` tensors."""
    dims = mps.bond_dims
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack(f"<II{len(dims)}I", _VERSION, mps.n, *dims))
        for t in mps.tensors:
            fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes(order="C"))


def load_mps(path) -> MPSState:
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise InvalidArgumentError(f"{path} is not an MPS file")
    version, n = struct.unpack_from("<II", data, 8)
    if version != _VERSION:
        raise InvalidArgumentError(f"unsupported MPS file version {version}")
    dims = struct.unpack_from(f"<{n + 1}I", data, 16)
    offset = 16 + 4 * (n + 1)
    tensors = []
    for i in range(n):
        shape = (dims[i], PHYS_DIM, dims[i + 1])
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<c16", count=count, offset=offset).reshape(shape)
        tensors.append(arr.astype(np.complex128))
        offset += 16 * count
    if offset != len(data):
        raise InvalidArgumentError(f"{path} has {len(data) - offset} trailing bytes")
    return MPSState(tensors)
