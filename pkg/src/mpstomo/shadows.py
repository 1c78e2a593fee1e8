"""Classical shadows for randomized X/Z measurements.

Under the random-XZ ensemble each qubit is measured along X or Z with equal
probability. The averaged measurement channel acts on every qubit as
``I -> I, X -> X/2, Z -> Z/2, Y -> 0``, so Pauli strings without Y are
eigenoperators with eigenvalue ``2**-k`` and strings containing Y are
invisible. Inverting the channel on its support gives the single-shot
factor ``2 U^dag |b><b| U - I/2`` per qubit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidOracleError, InvisibleObservableError, ResourceLimitError
from .measurement import GLOBAL_XZ, Dataset
from .paulis import AXIS_CODES, I2, PAULIS, ROTATIONS, PauliString

MAX_CHANNEL_SITES = 8
MAX_SHADOW_RDM_SITES = 8
MEASURED_AXES = (AXIS_CODES["Z"], AXIS_CODES["X"])


def shadow_norm(p: PauliString) -> float:
    """Single-shot second-moment bound ``2**k``; infinite for strings with Y."""
    if p.has_y():
        return math.inf
    return float(2**p.locality)


# --- channel ---------------------------------------------------------------------


def _projector(axis: int, bit: int) -> np.ndarray:
    u = ROTATIONS[axis]
    ket = u.conj().T[:, bit]
    return np.outer(ket, ket.conj())


@lru_cache(maxsize=None)
def _site_superoperators() -> tuple[np.ndarray, np.ndarray]:
    """Single-qubit channel and its pseudoinverse as 4x4 maps on row-major vec(rho)."""
    chan = np.zeros((4, 4), dtype=complex)
    for a in MEASURED_AXES:
        for b in (0, 1):
            proj = _projector(a, b)
            # rho -> P rho P summed over outcomes, averaged over axes
            chan += 0.5 * np.kron(proj, proj.T)
    return chan, np.linalg.pinv(chan, rcond=1e-10)


def _apply_local_map(op: np.ndarray, superop: np.ndarray) -> np.ndarray:
    dim = op.shape[0]
    n = int(round(np.log2(dim)))
    if 2**n != dim or op.shape != (dim, dim):
        raise InvalidArgumentError(f"operator of shape {op.shape} is not a multi-qubit operator")
    if n > MAX_CHANNEL_SITES:
        raise ResourceLimitError(f"dense channel on {n} qubits exceeds {MAX_CHANNEL_SITES}")
    sup = superop.reshape(2, 2, 2, 2)  # (out_row, out_col, in_row, in_col)
    t = np.asarray(op, dtype=complex).reshape((2,) * (2 * n))
    for i in range(n):
        t = np.tensordot(sup, t, axes=([2, 3], [i, n + i]))
        t = np.moveaxis(t, [0, 1], [i, n + i])
    return t.reshape(dim, dim)


def measurement_channel_apply(op: np.ndarray) -> np.ndarray:
    """Average over random-XZ measurements of ``sum_b <b|U O U^dag|b> U^dag|b><b|U``."""
    return _apply_local_map(op, _site_superoperators()[0])


def inverse_channel_apply(op: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse of :func:`measurement_channel_apply`."""
    return _apply_local_map(op, _site_superoperators()[1])


def project_visible(op: np.ndarray) -> np.ndarray:
    """Remove every Pauli component containing Y (orthogonal projection)."""
    chan, inv = _site_superoperators()
    return _apply_local_map(op, inv @ chan)


# --- single-shot shadows ------------------------------------------------------------


def shadow_factors() -> np.ndarray:
    """Array ``(3, 2, 2, 2)``: single-qubit factor for each (axis, bit)."""
    out = np.zeros((3, 2, 2, 2), dtype=complex)
    for a in range(3):
        for b in (0, 1):
            out[a, b] = 2 * _projector(a, b) - I2 / 2
    return out


def _single_shot_pauli(ds: Dataset, p: PauliString) -> np.ndarray:
    """``tr(P rho_hat)`` for every record: product of per-site ``2 (-1)^b`` or 0."""
    sites = np.asarray(p.sites, dtype=np.intp)
    want = np.array([AXIS_CODES[p.support[s]] for s in p.sites], dtype=np.uint8)
    hit = np.all(ds.bases[:, sites] == want, axis=1)
    signs = 1 - 2 * (ds.bits[:, sites].sum(axis=1) % 2).astype(np.int64)
    vals = np.where(hit, signs * float(2**p.locality), 0.0)
    return vals * np.real(p.coefficient)


def _check_estimable(ds: Dataset, p: PauliString) -> None:
    p.check_range(ds.n)
    if not p.is_hermitian():
        raise InvalidArgumentError(f"{p.label} has a complex coefficient")
    if p.has_y():
        raise InvisibleObservableError(f"{p.label} contains Y and is invisible to XZ measurements")
    if len(ds) == 0:
        raise InvalidArgumentError("empty dataset")


def pauli_samples(ds: Dataset, p: PauliString) -> np.ndarray:
    """Per-record unbiased estimates of ``<P>`` (only records that bear on P for global-XZ)."""
    _check_estimable(ds, p)
    if p.locality == 0:
        return np.full(len(ds), float(np.real(p.coefficient)))
    if ds.ensemble == GLOBAL_XZ:
        axes = set(p.support.values())
        if len(axes) != 1:
            raise InvisibleObservableError(f"{p.label} mixes X and Z; not measured in the global-XZ scheme")
        axis = AXIS_CODES[axes.pop()]
        rows = ds.bases[:, 0] == axis
        sites = np.asarray(p.sites, dtype=np.intp)
        signs = 1 - 2 * (ds.bits[rows][:, sites].sum(axis=1) % 2).astype(np.int64)
        return signs * float(np.real(p.coefficient))
    return _single_shot_pauli(ds, p)


def estimate_pauli(ds: Dataset, p: PauliString) -> tuple[float, int]:
    """Estimate of ``<P>`` and the number of records used."""
    vals = pauli_samples(ds, p)
    if vals.size == 0:
        raise InvalidArgumentError(f"no records measure {p.label}")
    return float(vals.mean()) * float(np.real(p.scale(ds.n) / p.coefficient)), int(vals.size)


def estimation_report(ds: Dataset, p: PauliString) -> dict:
    vals = pauli_samples(ds, p)
    if vals.size == 0:
        raise InvalidArgumentError(f"no records measure {p.label}")
    scale = float(np.real(p.scale(ds.n) / p.coefficient))
    stderr = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else math.inf
    return {
        "observable": p.label,
        "estimate": float(vals.mean()) * scale,
        "stderr": stderr * abs(scale),
        "shots_used": int(vals.size),
        "shadow_norm": shadow_norm(p),
    }


def estimate_subsystem_rdm_projected(ds: Dataset, sites: Sequence[int]) -> np.ndarray:
    """Shadow estimate of the visible part of the reduced density matrix on ``sites``.

    Qubits are ordered by ascending site index.
    """
    sites = sorted(int(s) for s in sites)
    if not sites:
        raise InvalidArgumentError("empty subsystem")
    if len(sites) > MAX_SHADOW_RDM_SITES:
        raise ResourceLimitError(f"shadow RDM on {len(sites)} sites exceeds {MAX_SHADOW_RDM_SITES}")
    if sites[0] < 0 or sites[-1] >= ds.n:
        raise InvalidArgumentError(f"subsystem {sites} outside [0, {ds.n})")
    if len(ds) == 0:
        raise InvalidArgumentError("empty dataset")
    codes = 2 * ds.bases[:, sites].astype(np.int64) + ds.bits[:, sites]
    keys = codes @ (6 ** np.arange(len(sites) - 1, -1, -1))
    uniq, first, counts = np.unique(keys, return_index=True, return_counts=True)
    factors = shadow_factors().reshape(6, 2, 2)
    dim = 2 ** len(sites)
    rho = np.zeros((dim, dim), dtype=complex)
    for row, c in zip(codes[first], counts):
        m = factors[row[0]]
        for code in row[1:]:
            m = np.kron(m, factors[code])
        rho += c * m
    rho /= len(ds)
    return 0.5 * (rho + rho.conj().T)


@dataclass
class ShadowAccumulator:
    """Running sums of single-shot Pauli estimates; shards can be merged."""

    observables: tuple
    count: np.ndarray = field(default=None)
    sums: np.ndarray = field(default=None)
    sumsq: np.ndarray = field(default=None)

    def __post_init__(self):
        self.observables = tuple(self.observables)
        k = len(self.observables)
        self.count = np.zeros(k, dtype=np.int64) if self.count is None else np.asarray(self.count, dtype=np.int64)
        self.sums = np.zeros(k) if self.sums is None else np.asarray(self.sums, dtype=float)
        self.sumsq = np.zeros(k) if self.sumsq is None else np.asarray(self.sumsq, dtype=float)

    def add(self, ds: Dataset) -> "ShadowAccumulator":
        for j, p in enumerate(self.observables):
            vals = pauli_samples(ds, p)
            self.count[j] += vals.size
            self.sums[j] += vals.sum()
            self.sumsq[j] += np.dot(vals, vals)
        return self

    def merge(self, other: "ShadowAccumulator") -> "ShadowAccumulator":
        if self.observables != other.observables:
            raise InvalidArgumentError("cannot merge accumulators over different observables")
        return ShadowAccumulator(
            self.observables, self.count + other.count, self.sums + other.sums, self.sumsq + other.sumsq
        )

    def estimates(self) -> np.ndarray:
        if np.any(self.count == 0):
            raise InvalidArgumentError("accumulator has observables without shots")
        return self.sums / self.count

    def stderrs(self) -> np.ndarray:
        mean = self.estimates()
        var = np.maximum(self.sumsq / self.count - mean**2, 0.0) * self.count / np.maximum(self.count - 1, 1)
        return np.sqrt(var / self.count)


# --- real pure states from exact XZ statistics ---------------------------------------


def exact_probability_oracle(psi: np.ndarray) -> Callable[[str, str], float]:
    """Probability oracle ``(basis, bits) -> |<b|U|psi>|^2`` for a dense state vector."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    n = int(round(np.log2(psi.size)))
    cache = {}

    def probs(basis: str) -> np.ndarray:
        if basis not in cache:
            t = psi.reshape((2,) * n)
            for i, c in enumerate(basis):
                t = np.moveaxis(np.tensordot(ROTATIONS[AXIS_CODES[c]], t, axes=(1, i)), 0, i)
            cache[basis] = np.abs(t.reshape(-1)) ** 2
        return cache[basis]

    def oracle(basis: str, bits: str) -> float:
        return float(probs(basis)[int(bits, 2)])

    return oracle


def reconstruct_real_pure_state(prob_oracle: Callable[[str, str], float], n: int, tol: float = 1e-12) -> np.ndarray:
    """Recover a real pure state (up to global sign) from exact X/Z measurement probabilities.

    Magnitudes come from the all-Z distribution. Signs are fixed qubit by
    qubit: the two halves split by a qubit are solved recursively, then
    joined through the nonzero pair ``(b0, b1)`` of smallest Hamming
    distance, using one product observable made of ``|+><+|`` on the split
    qubit, projectors on agreeing bits and X on disagreeing bits.
    """
    if not 1 <= n <= MAX_CHANNEL_SITES:
        raise InvalidArgumentError(f"reconstruction supports 1 <= n <= {MAX_CHANNEL_SITES}")
    dim = 2**n
    bitstrings = [format(i, f"0{n}b") for i in range(dim)]
    cache: dict[str, np.ndarray] = {}

    def distribution(basis: str) -> np.ndarray:
        if basis not in cache:
            p = np.array([prob_oracle(basis, b) for b in bitstrings], dtype=float)
            if not np.all(np.isfinite(p)) or p.min() < -1e-12 or abs(p.sum() - 1.0) > 1e-8:
                raise InvalidOracleError(f"oracle probabilities for basis {basis} are not a distribution")
            cache[basis] = np.clip(p, 0.0, None)
        return cache[basis]

    amps = np.sqrt(distribution("Z" * n))
    nonzero = amps > np.sqrt(tol)
    signs = np.ones(dim)
    index_bits = (np.arange(dim)[:, None] >> np.arange(n - 1, -1, -1)) & 1

    def expectation(factors: dict[int, str]) -> float:
        # factors: site -> '+', '0', '1' or 'X'; all other sites identity
        basis = "".join("X" if factors.get(i) in ("+", "X") else "Z" for i in range(n))
        p = distribution(basis)
        weight = np.ones(dim)
        for i, f in factors.items():
            b = index_bits[:, i]
            if f == "+":
                weight *= b == 0
            elif f == "X":
                weight *= 1 - 2 * b
            else:
                weight *= b == int(f)
        return float(weight @ p)

    def solve(members: np.ndarray, free: list[int]) -> None:
        # fix relative signs among basis states in ``members`` (which agree outside ``free``)
        live = members[nonzero[members]]
        if len(free) == 0 or len(live) <= 1:
            return
        k = free[-1]
        halves = [members[index_bits[members, k] == v] for v in (0, 1)]
        for h in halves:
            solve(h, free[:-1])
        live0 = halves[0][nonzero[halves[0]]]
        live1 = halves[1][nonzero[halves[1]]]
        if len(live0) == 0 or len(live1) == 0:
            return
        dist = (index_bits[live0][:, None, :] != index_bits[live1][None, :, :]).sum(axis=2)
        i0, i1 = np.unravel_index(np.argmin(dist), dist.shape)
        b0, b1 = live0[i0], live1[i1]
        factors = {}
        for i in range(n):
            if i == k:
                factors[i] = "+"
            elif index_bits[b0, i] == index_bits[b1, i]:
                factors[i] = str(index_bits[b0, i])
            else:
                factors[i] = "X"
        measured = expectation(factors)
        c0, c1 = signs[b0] * amps[b0], signs[b1] * amps[b1]
        if dist[i0, i1] == 1:
            baseline = 0.5 * (c0**2 + c1**2)
            same = 0.5 * (c0 + c1) ** 2
        else:
            baseline = 0.0
            same = c0 * c1
        if abs(same - baseline) < 1e-14:
            raise InvalidOracleError("sign observable carries no information")
        if (measured - baseline) * (same - baseline) < 0:
            signs[halves[1]] *= -1

    solve(np.arange(dim), list(range(n)))
    psi = signs * amps
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise InvalidOracleError("oracle assigns zero probability to every Z outcome")
    return psi / norm
