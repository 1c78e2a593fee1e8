"""Two-site DMRG for MPO Hamiltonians."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import InvalidArgumentError
from .hamiltonians import MPO
from .mps import MPSState, canonicalize, new_random_mps, normalize

log = logging.getLogger(__name__)

_DENSE_LOCAL_DIM = 1024


@dataclass(frozen=True)
class DmrgConfig:
    chi_max: int = 10
    n_sweeps: int = 20
    tolerance: float = 1e-10
    lanczos_maxiter: int = 300
    lanczos_tol: float = 1e-13
    svd_cutoff: float = 1e-14
    seed: int = 0

    def __post_init__(self):
        if self.chi_max < 1:
            raise InvalidArgumentError("chi_max must be >= 1")
        if self.tolerance <= 0:
            raise InvalidArgumentError("tolerance must be > 0")
        if self.n_sweeps < 1:
            raise InvalidArgumentError("n_sweeps must be >= 1")


@dataclass
class DmrgResult:
    state: MPSState
    energies: list = field(default_factory=list)  # energy after each full sweep
    converged: bool = False
    discarded_weight: float = 0.0
    config: DmrgConfig | None = None

    @property
    def energy(self) -> float:
        return self.energies[-1]

    @property
    def sweeps(self) -> int:
        return len(self.energies)

    def summary(self) -> dict:
        return {
            "energy": self.energy,
            "energies": list(self.energies),
            "sweeps": self.sweeps,
            "converged": self.converged,
            "discarded_weight": self.discarded_weight,
            "config": asdict(self.config) if self.config else None,
        }


def _left_step(env, t, w):
    return np.einsum("awb,asc,wstv,btd->cvd", env, t.conj(), w, t, optimize=True)


def _right_step(env, t, w):
    return np.einsum("cvd,asc,wstv,btd->awb", env, t.conj(), w, t, optimize=True)


def _local_ground_state(L, W1, W2, R, theta, cfg: DmrgConfig):
    shape = theta.shape
    dim = theta.size
    dtype = np.result_type(L, W1, W2, R, theta)

    def matvec(v):
        v = v.reshape(shape)
        tmp = np.tensordot(L, v, axes=(2, 0))  # a w x y d
        tmp = np.tensordot(tmp, W1, axes=([1, 2], [0, 2]))  # a y d s v
        tmp = np.tensordot(tmp, W2, axes=([1, 4], [2, 0]))  # a d s t u
        tmp = np.tensordot(tmp, R, axes=([1, 4], [2, 1]))  # a s t c
        return tmp.reshape(-1)

    if dim <= _DENSE_LOCAL_DIM:
        heff = np.einsum("awb,wsxv,vtyu,cud->astcbxyd", L, W1, W2, R, optimize=True).reshape(dim, dim)
        heff = 0.5 * (heff + heff.conj().T)
        vals, vecs = np.linalg.eigh(heff)
        return float(vals[0]), vecs[:, 0].reshape(shape)
    op = LinearOperator((dim, dim), matvec=matvec, dtype=dtype)
    v0 = theta.reshape(-1).astype(dtype)
    try:
        vals, vecs = eigsh(op, k=1, which="SA", v0=v0, tol=cfg.lanczos_tol, maxiter=cfg.lanczos_maxiter)
    except ArpackNoConvergence as exc:
        if len(exc.eigenvalues) == 0:
            raise
        vals, vecs = exc.eigenvalues, exc.eigenvectors
    return float(vals[0].real), vecs[:, 0].reshape(shape)


def _split(theta, chi_max, cutoff, absorb: str):
    l, d1, d2, r = theta.shape
    u, s, vh = np.linalg.svd(theta.reshape(l * d1, d2 * r), full_matrices=False)
    keep = int(np.sum(s > cutoff * s[0])) if s[0] > 0 else 1
    keep = max(1, min(keep, chi_max))
    discarded = float(np.sum(s[keep:] ** 2) / np.sum(s**2))
    s_kept = s[:keep] / np.linalg.norm(s[:keep])
    u, vh = u[:, :keep], vh[:keep]
    if absorb == "right":
        a, b = u, s_kept[:, None] * vh
    else:
        a, b = u * s_kept, vh
    return a.reshape(l, d1, keep), b.reshape(keep, d2, r), discarded


def dmrg_solve(mpo: MPO, config: DmrgConfig = DmrgConfig(), initial: MPSState | None = None) -> DmrgResult:
    """Variational ground state of ``mpo`` by alternating two-site sweeps.

    Runs until the energy change over a full sweep drops below
    ``config.tolerance`` or ``config.n_sweeps`` sweeps are done. A state
    that has not converged is still returned, with ``converged=False``.
    """
    n = mpo.n
    real = all(np.abs(w.imag).max() == 0 for w in mpo.tensors)
    if initial is None:
        initial = new_random_mps(n, config.chi_max, config.seed, real=real)
    psi = canonicalize(initial, 0)
    dtype = np.float64 if real and all(np.abs(t.imag).max() == 0 for t in psi.tensors) else np.complex128
    ts = [np.asarray(t.real if dtype == np.float64 else t, dtype=dtype) for t in psi.tensors]
    ws = [np.asarray(w.real if dtype == np.float64 else w, dtype=dtype) for w in mpo.tensors]
    if n == 1:
        h = ws[0][0, :, :, 0]
        vals, vecs = np.linalg.eigh(h)
        state = MPSState([vecs[:, 0].reshape(1, 2, 1)], 0)
        return DmrgResult(state, [float(vals[0])], True, 0.0, config)

    left = [None] * (n + 1)
    right = [None] * (n + 1)
    left[0] = np.ones((1, 1, 1), dtype=dtype)
    right[n] = np.ones((1, 1, 1), dtype=dtype)
    for i in range(n - 1, 0, -1):
        right[i] = _right_step(right[i + 1], ts[i], ws[i])

    energies: list[float] = []
    max_discarded = 0.0
    converged = False
    for sweep in range(config.n_sweeps):
        energy = None
        for i in range(n - 1):
            theta = np.einsum("lsm,mtr->lstr", ts[i], ts[i + 1])
            energy, theta = _local_ground_state(left[i], ws[i], ws[i + 1], right[i + 2], theta, config)
            ts[i], ts[i + 1], disc = _split(theta, config.chi_max, config.svd_cutoff, "right")
            max_discarded = max(max_discarded, disc)
            left[i + 1] = _left_step(left[i], ts[i], ws[i])
        for i in range(n - 2, -1, -1):
            theta = np.einsum("lsm,mtr->lstr", ts[i], ts[i + 1])
            energy, theta = _local_ground_state(left[i], ws[i], ws[i + 1], right[i + 2], theta, config)
            ts[i], ts[i + 1], disc = _split(theta, config.chi_max, config.svd_cutoff, "left")
            max_discarded = max(max_discarded, disc)
            right[i + 1] = _right_step(right[i + 2], ts[i + 1], ws[i + 1])
        energies.append(energy)
        log.debug("sweep %d: E = %.14f", sweep, energy)
        if len(energies) > 1 and abs(energies[-1] - energies[-2]) < config.tolerance:
            converged = True
            break
    state = normalize(MPSState(ts, 0))
    return DmrgResult(state, energies, converged, max_discarded, config)
