"""Maximum-likelihood training of MPS models on measurement records.

Gradients are taken with respect to the complex conjugate of the tensors,
``dL/dconj(A)``. For a real loss this is half the gradient with respect to
the real vector of interleaved (Re, Im) entries, so plain gradient descent
``A <- A - lr * dL/dconj(A)`` is real gradient descent with the factor 2
absorbed into the learning rate.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidArgumentError, TrainingFailedError
from .hamiltonians import operator_mpo
from .measurement import Dataset
from .mps import MPSState, fidelity, mpo_sandwich_grad, new_random_mps, normalize, reduced_density_matrix, rotated_tensors
from .paulis import I2, PAULIS, ROTATIONS, PauliString
from .shadows import project_visible

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


# --- low-level contractions on plain tensor lists --------------------------------


def _product_envs(ts, ops=None):
    """Left/right environments ``(bra, ket)`` of ``<psi| (x) O_i |psi>``."""
    ops = ops or {}
    kets = [t if i not in ops else np.tensordot(ops[i], t, axes=(1, 1)).transpose(1, 0, 2) for i, t in enumerate(ts)]
    n = len(ts)
    left = [np.ones((1, 1), dtype=complex)]
    for t, k in zip(ts, kets):
        tmp = np.tensordot(left[-1], k, axes=(1, 0))  # a s d
        left.append(np.tensordot(t.conj(), tmp, axes=([0, 1], [0, 1])))
    right = [None] * (n + 1)
    right[n] = np.ones((1, 1), dtype=complex)
    for i in range(n - 1, -1, -1):
        tmp = np.tensordot(kets[i], right[i + 1], axes=(2, 1))  # b s c
        right[i] = np.tensordot(ts[i].conj(), tmp, axes=([1, 2], [1, 2]))
    return kets, left, right


def _product_sandwich_grad(ts, ops=None):
    """``<psi|O|psi>`` for a product operator and its derivative with respect to conj(A)."""
    kets, left, right = _product_envs(ts, ops)
    value = complex(left[-1][0, 0])
    grads = [
        np.tensordot(np.tensordot(left[i], kets[i], axes=(1, 0)), right[i + 1], axes=(2, 1))
        for i in range(len(ts))
    ]
    return value, grads


def _stacked_sandwich_grads(ts, site_ops):
    """``<psi|O_k|psi>`` and their conj-gradients for K product operators at once.

    ``site_ops[i]`` has shape ``(K, 2, 2)`` and holds the factor of every
    operator on site ``i``.
    """
    n = len(ts)
    k = site_ops[0].shape[0]
    kets = [np.tensordot(ops, t, axes=(2, 1)).transpose(0, 2, 1, 3) for ops, t in zip(site_ops, ts)]  # K l s r
    left = [np.ones((k, 1, 1), dtype=complex)]
    for t, ket in zip(ts, kets):
        a, d, r = t.shape
        tmp = np.matmul(left[-1], ket.reshape(k, a, d * r)).reshape(k, a * d, r)
        left.append(np.matmul(t.conj().reshape(a * d, r).T[None], tmp))
    right = [None] * (n + 1)
    right[n] = np.ones((k, 1, 1), dtype=complex)
    for i in range(n - 1, -1, -1):
        a, d, r = ts[i].shape
        tmp = np.matmul(kets[i].reshape(k, a * d, r), right[i + 1].transpose(0, 2, 1)).reshape(k, a, d * r)
        right[i] = np.matmul(ts[i].conj().reshape(a, d * r)[None], tmp.transpose(0, 2, 1))
    values = left[-1][:, 0, 0]
    grads = []
    for i, t in enumerate(ts):
        a, d, r = t.shape
        tmp = np.matmul(left[i], kets[i].reshape(k, a, d * r)).reshape(k, a * d, r)
        grads.append(np.matmul(tmp, right[i + 1].transpose(0, 2, 1)).reshape(k, a, d, r))
    return values, grads


def _record_codes(ds: Dataset) -> np.ndarray:
    return 2 * ds.bases.astype(np.intp) + ds.bits.astype(np.intp)


def _nll_value_grad(ts, codes, weights, floor=PROB_FLOOR, want_grad=True):
    """Weighted NLL ``-sum_i w_i log max(p_i, floor)`` and its conjugate gradient."""
    n = len(ts)
    nrec = codes.shape[0]
    flat_index = (6 * np.arange(nrec)[None, :] + codes.T).copy()  # row of each record's slice
    rots = [rotated_tensors(t) for t in ts]  # (6, l, r)
    left = [np.ones((nrec, 1), dtype=complex)]
    for i, rot in enumerate(rots):
        # one GEMM against all six slices, then pick each record's slice
        allc = left[-1] @ rot.transpose(1, 0, 2).reshape(rot.shape[1], -1)
        left.append(np.take(allc.reshape(nrec * 6, -1), flat_index[i], axis=0))
    amps = left[-1][:, 0]
    if want_grad:
        norm_val, norm_grads = _product_sandwich_grad(ts)
    else:
        norm_val = complex(_product_envs(ts)[1][-1][0, 0])
    z = norm_val.real
    probs = np.abs(amps) ** 2 / z
    live = probs >= floor
    loss = -float(np.sum(weights * np.log(np.where(live, probs, floor))))
    if not want_grad:
        return loss, None
    right = [None] * (n + 1)
    right[n] = np.ones((nrec, 1), dtype=complex)
    for i in range(n - 1, -1, -1):
        rot = rots[i]
        allc = right[i + 1] @ rot.transpose(2, 0, 1).reshape(rot.shape[2], -1)
        right[i] = np.take(allc.reshape(nrec * 6, -1), flat_index[i], axis=0)
    safe = np.where(live, amps, 1.0)
    coef = np.where(live, -weights / safe.conj(), 0.0)
    live_weight = float(np.sum(weights[live]))
    row_table = ROTATIONS.reshape(6, 2).conj()  # conj of the row <b|U for each code
    grads = []
    for i in range(n):
        lhs = coef[:, None] * left[i].conj()
        outer = (lhs[:, :, None] * row_table[codes[:, i], None, :]).reshape(nrec, -1)
        g = (outer.T @ right[i + 1].conj()).reshape(ts[i].shape)
        grads.append(g + live_weight * norm_grads[i] / z)
    return loss, grads


def _compress_records(codes: np.ndarray, weights: np.ndarray):
    """Merge identical records, adding their weights."""
    uniq, inverse = np.unique(codes, axis=0, return_inverse=True)
    merged = np.bincount(inverse.reshape(-1), weights=weights, minlength=len(uniq))
    return uniq, merged


def _uniform_weights(count: int) -> np.ndarray:
    return np.full(count, 1.0 / count)


def _check_dataset(mps: MPSState, ds: Dataset, weights):
    if len(ds) == 0:
        raise InvalidArgumentError("empty dataset")
    if ds.n != mps.n:
        raise InvalidArgumentError(f"dataset on {ds.n} qubits, model on {mps.n}")
    if weights is None:
        return _uniform_weights(len(ds))
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(ds),):
        raise InvalidArgumentError("weights must have one entry per record")
    return weights


def nll_loss(mps: MPSState, ds: Dataset, weights=None) -> float:
    """Mean negative log-likelihood ``-(1/N) sum log(|<b|U|psi>|^2 / <psi|psi>)``.

    With ``weights`` the records are weighted instead (e.g. by exact
    probabilities). Probabilities below 1e-12 are clamped.
    """
    weights = _check_dataset(mps, ds, weights)
    return _nll_value_grad(list(mps.tensors), _record_codes(ds), weights, want_grad=False)[0]


def nll_gradient(mps: MPSState, ds: Dataset, weights=None) -> list[np.ndarray]:
    """``dL/dconj(A)`` of :func:`nll_loss`, one array per tensor.

    Clamped records contribute a constant, so they drop out of the gradient.
    """
    weights = _check_dataset(mps, ds, weights)
    return _nll_value_grad(list(mps.tensors), _record_codes(ds), weights)[1]


# --- regularizers ----------------------------------------------------------------


@dataclass
class StabilizerRegularizer:
    """``R = sum_S (estimate_S - <S>)^2`` over supplied Pauli observables."""

    stabilizers: list
    estimates: np.ndarray

    kind = "stabilizers"

    def __post_init__(self):
        self.stabilizers = [s if isinstance(s, PauliString) else PauliString.from_label(s) for s in self.stabilizers]
        self.estimates = np.asarray(self.estimates, dtype=float)
        if self.estimates.shape != (len(self.stabilizers),):
            raise InvalidArgumentError("need exactly one estimate per stabilizer")

    def value_grad(self, ts, want_grad=True):
        n = len(ts)
        for p in self.stabilizers:
            p.check_range(n)
        # slot 0 is the identity, giving the norm <psi|psi>
        site_ops = []
        for i in range(n):
            ops = np.empty((len(self.stabilizers) + 1, 2, 2), dtype=complex)
            ops[0] = I2
            for k, p in enumerate(self.stabilizers, start=1):
                ops[k] = PAULIS[p.support.get(i, "I")]
            site_ops.append(ops)
        values, sgrads = _stacked_sandwich_grads(ts, site_ops)
        z = values[0].real
        scales = np.array([p.scale(n).real for p in self.stabilizers])
        expvals = scales * values[1:].real / z
        diff = self.estimates - expvals
        value = float(np.sum(diff**2))
        if not want_grad:
            return value, None
        # dR = sum_k -2 diff_k scale_k (dS_k / z - S_k dz / z^2)
        w = -2 * diff * scales
        coeff = np.concatenate([[-np.dot(w, values[1:].real) / z**2], w / z])
        grads = [np.tensordot(coeff, g, axes=(0, 0)) for g in sgrads]
        return value, grads

    def to_dict(self):
        return {"kind": self.kind, "stabilizers": [p.label for p in self.stabilizers], "estimates": self.estimates.tolist()}


@dataclass
class RdmRegularizer:
    """``R = sum_B || rho_hat_B - P(rho_B) ||_F`` with P the projection onto Y-free Paulis."""

    blocks: list  # (sites, shadow estimate of the projected RDM)

    kind = "projected-rdm"

    def __post_init__(self):
        clean = []
        for sites, rho in self.blocks:
            sites = tuple(sorted(int(s) for s in sites))
            rho = np.asarray(rho, dtype=complex)
            if rho.shape != (2 ** len(sites),) * 2:
                raise InvalidArgumentError(f"RDM estimate on {sites} has shape {rho.shape}")
            clean.append((sites, rho))
        self.blocks = clean

    def value_grad(self, ts, want_grad=True):
        n = len(ts)
        psi = MPSState(ts)
        value = 0.0
        grads = [np.zeros_like(t) for t in ts] if want_grad else None
        z = zg = None
        for sites, rho_hat in self.blocks:
            if sites[-1] >= n or sites[0] < 0:
                raise InvalidArgumentError(f"subsystem {sites} outside [0, {n})")
            diff = rho_hat - project_visible(reduced_density_matrix(psi, sites))
            dist = float(np.linalg.norm(diff))
            value += dist
            if not want_grad or dist == 0.0:
                continue
            # d||D|| = Re tr(G d rho) with G = -P(D)/||D||; differentiate <psi|G|psi>/<psi|psi>
            op = -project_visible(diff) / dist
            op = 0.5 * (op + op.conj().T)
            s, sg = mpo_sandwich_grad(psi, operator_mpo(n, sites, op).tensors)
            if z is None:
                z, zg = _product_sandwich_grad(ts)
                z = z.real
            for g, a, b in zip(grads, sg, zg):
                g += a / z - s.real / z**2 * b
        return float(value), grads

    def to_dict(self):
        return {
            "kind": self.kind,
            "blocks": [
                {"sites": list(s), "real": r.real.tolist(), "imag": r.imag.tolist()} for s, r in self.blocks
            ],
        }


def stabilizer_regularizer(mps: MPSState, stabilizers: Sequence, estimates) -> tuple[float, list]:
    return StabilizerRegularizer(list(stabilizers), estimates).value_grad(list(mps.tensors))


def rdm_regularizer(mps: MPSState, shadow_rdms: Sequence) -> tuple[float, list]:
    return RdmRegularizer(list(shadow_rdms)).value_grad(list(mps.tensors))


def regularizer_from_dict(d: dict | None):
    if not d:
        return None
    kind = d.get("kind")
    if kind == StabilizerRegularizer.kind:
        return StabilizerRegularizer(d["stabilizers"], d["estimates"])
    if kind == RdmRegularizer.kind:
        return RdmRegularizer(
            [(b["sites"], np.asarray(b["real"]) + 1j * np.asarray(b["imag"])) for b in d["blocks"]]
        )
    raise InvalidArgumentError(f"unknown regularizer kind {kind!r}")


# --- configuration and history ---------------------------------------------------------


@dataclass
class SgdConfig:
    learning_rate: float = 0.05
    batch_size: int = 64
    epochs: int = 200
    decay: float = 0.0  # lr_epoch = lr / (1 + decay * epoch)


@dataclass
class LbfgsConfig:
    memory: int = 10
    max_iterations: int = 1000
    gtol: float = 1e-7
    ftol: float = 1e-10


@dataclass
class TrainConfig:
    chi: int = 4
    beta: float = 0.0
    regularizer: StabilizerRegularizer | RdmRegularizer | None = None
    sgd: SgdConfig = field(default_factory=SgdConfig)
    lbfgs: LbfgsConfig = field(default_factory=LbfgsConfig)
    seed: int = 0
    n_restarts: int = 10

    def __post_init__(self):
        if isinstance(self.sgd, dict):
            self.sgd = SgdConfig(**self.sgd)
        if isinstance(self.lbfgs, dict):
            self.lbfgs = LbfgsConfig(**self.lbfgs)
        if isinstance(self.regularizer, dict):
            self.regularizer = regularizer_from_dict(self.regularizer)
        if self.chi < 1:
            raise InvalidArgumentError("chi must be >= 1")
        if self.beta < 0:
            raise InvalidArgumentError("beta must be >= 0")
        if self.sgd.learning_rate <= 0:
            raise InvalidArgumentError("learning rate must be > 0")
        if self.sgd.batch_size < 1 or self.sgd.epochs < 0:
            raise InvalidArgumentError("batch size must be >= 1 and epochs >= 0")
        if self.n_restarts < 1:
            raise InvalidArgumentError("n_restarts must be >= 1")
        if self.lbfgs.memory < 1 or self.lbfgs.max_iterations < 0:
            raise InvalidArgumentError("invalid L-BFGS settings")

    def to_dict(self) -> dict:
        return {
            "chi": self.chi,
            "beta": self.beta,
            "regularizer": self.regularizer.to_dict() if self.regularizer else None,
            "sgd": asdict(self.sgd),
            "lbfgs": asdict(self.lbfgs),
            "seed": self.seed,
            "n_restarts": self.n_restarts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {"chi", "beta", "regularizer", "sgd", "lbfgs", "seed", "n_restarts"}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgumentError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


HISTORY_COLUMNS = ("iteration", "restart", "stage", "nll", "reg", "total", "fidelity")


@dataclass
class TrainHistory:
    rows: list = field(default_factory=list)
    restart: int = 0
    converged: bool = False
    stage_reached: str = "init"
    diverged: bool = False

    def record(self, stage, nll, reg, total, fid=None):
        self.rows.append(
            {
                "iteration": len(self.rows),
                "restart": self.restart,
                "stage": stage,
                "nll": nll,
                "reg": reg,
                "total": total,
                "fidelity": fid,
            }
        )

    @property
    def final_loss(self) -> float:
        return self.rows[-1]["total"] if self.rows else math.inf

    @property
    def final_nll(self) -> float:
        return self.rows[-1]["nll"] if self.rows else math.inf

    def column(self, name) -> np.ndarray:
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)

    def write_csv(self, path, mode="w", header=True) -> None:
        with open(path, mode, newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
            if header:
                w.writeheader()
            for r in self.rows:
                w.writerow({k: ("" if r[k] is None else r[k]) for k in HISTORY_COLUMNS})


def write_histories(histories: Sequence[TrainHistory], path) -> None:
    for k, h in enumerate(histories):
        h.write_csv(path, mode="w" if k == 0 else "a", header=k == 0)


# --- optimization ------------------------------------------------------------------


class _Objective:
    """Total loss ``NLL + beta * R`` on a fixed tensor layout."""

    def __init__(self, shapes, beta, regularizer):
        self.shapes = shapes
        self.sizes = [int(np.prod(s)) for s in shapes]
        self.beta = beta
        self.regularizer = regularizer if beta > 0 else None

    def evaluate(self, ts, codes, weights, want_grad=True):
        nll, g = _nll_value_grad(ts, codes, weights, want_grad=want_grad)
        reg = 0.0
        if self.regularizer is not None:
            reg, rg = self.regularizer.value_grad(ts, want_grad=want_grad)
            if want_grad:
                g = [a + self.beta * b for a, b in zip(g, rg)]
        return nll, reg, nll + self.beta * reg, g

    def pack(self, ts) -> np.ndarray:
        flat = np.concatenate([t.reshape(-1) for t in ts])
        out = np.empty(2 * flat.size)
        out[0::2], out[1::2] = flat.real, flat.imag
        return out

    def unpack(self, x) -> list[np.ndarray]:
        flat = x[0::2] + 1j * x[1::2]
        out, pos = [], 0
        for shape, size in zip(self.shapes, self.sizes):
            out.append(flat[pos : pos + size].reshape(shape))
            pos += size
        return out


def _rescale(ts):
    """Spread the norm evenly over the tensors; the loss is scale invariant."""
    norm = abs(_product_envs(ts)[1][-1][0, 0]) ** 0.5
    if not np.isfinite(norm) or norm == 0:
        return ts
    f = norm ** (-1.0 / len(ts))
    return [t * f for t in ts]


def _fid(ts, target):
    if target is None:
        return None
    return fidelity(MPSState(ts), target)


def _train_once(config: TrainConfig, ds: Dataset, restart: int, target=None):
    hist = TrainHistory(restart=restart)
    init = new_random_mps(ds.n, config.chi, seed=[config.seed, restart])
    ts = [np.array(t) for t in init.tensors]
    obj = _Objective([t.shape for t in ts], config.beta, config.regularizer)
    batch_codes = _record_codes(ds)
    codes, weights = _compress_records(batch_codes, _uniform_weights(len(ds)))
    rng = np.random.default_rng([config.seed, restart, 1])

    nll, reg, total, _ = obj.evaluate(ts, codes, weights, want_grad=False)
    hist.record("init", nll, reg, total, _fid(ts, target))

    sgd = config.sgd
    batch = min(sgd.batch_size, len(ds))
    for epoch in range(sgd.epochs):
        lr = sgd.learning_rate / (1.0 + sgd.decay * epoch)
        perm = rng.permutation(len(ds))
        for start in range(0, len(ds), batch):
            idx = perm[start : start + batch]
            _, _, _, g = obj.evaluate(ts, batch_codes[idx], _uniform_weights(len(idx)))
            ts = [t - lr * gi for t, gi in zip(ts, g)]
        ts = _rescale(ts)
        nll, reg, total, _ = obj.evaluate(ts, codes, weights, want_grad=False)
        if not np.isfinite(total) or not all(np.all(np.isfinite(t)) for t in ts):
            hist.diverged = True
            hist.stage_reached = "sgd"
            return None, hist
        hist.record("sgd", nll, reg, total, _fid(ts, target))
    hist.stage_reached = "sgd"

    cache = {}

    def fun(x):
        tsx = obj.unpack(x)
        nll, reg, total, g = obj.evaluate(tsx, codes, weights)
        if not np.isfinite(total):
            return np.inf, np.zeros_like(x)
        cache["last"] = (x.copy(), nll, reg, total)
        gx = np.empty_like(x)
        flat = np.concatenate([gi.reshape(-1) for gi in g])
        gx[0::2], gx[1::2] = 2 * flat.real, 2 * flat.imag
        return total, gx

    def callback(xk):
        last = cache.get("last")
        if last is not None and np.array_equal(last[0], xk):
            _, nll, reg, total = last
        else:
            nll, reg, total, _ = obj.evaluate(obj.unpack(xk), codes, weights, want_grad=False)
        hist.record("lbfgs", nll, reg, total, _fid(obj.unpack(xk), target))

    if config.lbfgs.max_iterations > 0:
        res = minimize(
            fun,
            obj.pack(ts),
            jac=True,
            method="L-BFGS-B",
            callback=callback,
            options={
                "maxcor": config.lbfgs.memory,
                "maxiter": config.lbfgs.max_iterations,
                "gtol": config.lbfgs.gtol,
                "ftol": config.lbfgs.ftol,
            },
        )
        ts = obj.unpack(res.x)
        hist.stage_reached = "lbfgs"
        hist.converged = bool(res.success)
        nll, reg, total, _ = obj.evaluate(ts, codes, weights, want_grad=False)
        if not np.isfinite(total):
            hist.diverged = True
            return None, hist
        if not hist.rows or hist.rows[-1]["total"] != total:
            hist.record("final", nll, reg, total, _fid(ts, target))
    else:
        hist.converged = True
    return normalize(MPSState(ts)), hist


def train(config: TrainConfig, train_ds: Dataset, target: MPSState | None = None):
    """Fit an MPS to ``train_ds``: minibatch SGD, then full-batch L-BFGS, over restarts.

    Returns the model of the restart with the lowest final training loss and
    the list of all restart histories. ``target`` only enables fidelity
    tracking in the histories.
    """
    if len(train_ds) == 0:
        raise InvalidArgumentError("empty training set")
    if target is not None and target.n != train_ds.n:
        raise InvalidArgumentError("target and dataset sizes differ")
    best, best_loss, histories = None, math.inf, []
    for r in range(config.n_restarts):
        model, hist = _train_once(config, train_ds, r, target)
        histories.append(hist)
        log.info("restart %d: loss %.6g, converged=%s", r, hist.final_loss, hist.converged)
        if model is not None and hist.final_loss < best_loss:
            best, best_loss = model, hist.final_loss
    if best is None:
        raise TrainingFailedError("all restarts diverged", histories)
    return best, histories


def best_history(histories: Sequence[TrainHistory]) -> TrainHistory:
    live = [h for h in histories if not h.diverged]
    return min(live, key=lambda h: h.final_loss)


def select_model(candidates, test_ds: Dataset, train_ds: Dataset | None = None) -> list[dict]:
    """Rank candidate models by test NLL (stable for ties).

    ``candidates`` holds models or ``(model, history)`` pairs. The training
    NLL comes from ``train_ds`` when given, else from the history.
    """
    if not candidates:
        raise InvalidArgumentError("no candidates")
    rows = []
    for k, cand in enumerate(candidates):
        model, hist = cand if isinstance(cand, tuple) else (cand, None)
        if train_ds is not None:
            train_nll = nll_loss(model, train_ds)
        elif hist is not None:
            train_nll = hist.final_nll
        else:
            train_nll = None
        rows.append({"index": k, "train_nll": train_nll, "test_nll": nll_loss(model, test_ds)})
    rows.sort(key=lambda r: r["test_nll"])
    for rank, r in enumerate(rows):
        r["rank"] = rank
    return rows
