"""Randomized XZ measurement ensembles and measurement datasets.

A dataset stores the measurement axis of every qubit as a small integer
code (see :data:`mpstomo.paulis.AXIS_CODES`) together with the observed
bits, in two ``(N, n)`` uint8 arrays.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .mps import MPSState, sample_batch
from .paulis import AXIS_CODES, basis_codes, basis_string, bits_array

GLOBAL_XZ = "global-xz"
RANDOM_XZ = "random-xz"
ENSEMBLE_KINDS = (GLOBAL_XZ, RANDOM_XZ)
RNG_BLOCK = 1024  # records per counter-based substream
FORMAT_VERSION = 1


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    n: int

    def __post_init__(self):
        kind = self.kind.lower().replace("_", "-")
        aliases = {"globalxz": GLOBAL_XZ, "randomxz": RANDOM_XZ}
        kind = aliases.get(kind.replace("-", ""), kind)
        if kind not in ENSEMBLE_KINDS:
            raise InvalidArgumentError(f"unknown ensemble {self.kind!r}; expected one of {ENSEMBLE_KINDS}")
        if self.n < 1:
            raise InvalidArgumentError("ensemble needs n >= 1")
        object.__setattr__(self, "kind", kind)


@dataclass(frozen=True)
class MeasurementRecord:
    basis: str
    bits: str

    def __post_init__(self):
        if len(self.basis) != len(self.bits):
            raise InvalidArgumentError(f"basis {self.basis!r} and bits {self.bits!r} differ in length")
        basis_codes(self.basis)
        bits_array(self.bits)


def draw_bases(spec: EnsembleSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` basis code rows drawn from the ensemble."""
    z, x = AXIS_CODES["Z"], AXIS_CODES["X"]
    if spec.kind == GLOBAL_XZ:
        pick = rng.integers(0, 2, size=count)
        return np.repeat(np.where(pick == 1, x, z)[:, None], spec.n, axis=1).astype(np.uint8)
    pick = rng.integers(0, 2, size=(count, spec.n))
    return np.where(pick == 1, x, z).astype(np.uint8)


def draw_basis(spec: EnsembleSpec, rng: np.random.Generator) -> str:
    return basis_string(draw_bases(spec, rng, 1)[0])


class Dataset:
    """Measurement records plus provenance; immutable after construction."""

    __slots__ = ("bases", "bits", "provenance")

    def __init__(self, bases, bits, provenance: dict | None = None):
        bases = np.array(bases, dtype=np.uint8, ndmin=2)
        bits = np.array(bits, dtype=np.uint8, ndmin=2)
        if bases.shape != bits.shape:
            raise InvalidArgumentError(f"bases {bases.shape} and bits {bits.shape} do not match")
        if bases.size and bases.max() > 2:
            raise InvalidArgumentError("invalid axis code in dataset")
        if bits.size and bits.max() > 1:
            raise InvalidArgumentError("invalid bit value in dataset")
        bases.flags.writeable = False
        bits.flags.writeable = False
        self.bases = bases
        self.bits = bits
        prov = dict(provenance or {})
        prov["N"] = len(bases)
        self.provenance = prov

    @classmethod
    def from_records(cls, records, provenance: dict | None = None) -> "Dataset":
        records = list(records)
        if not records:
            raise InvalidArgumentError("no records")
        n = len(records[0].basis)
        bases = np.stack([basis_codes(r.basis, n) for r in records])
        bits = np.stack([bits_array(r.bits, n) for r in records])
        return cls(bases, bits, provenance)

    @property
    def n(self) -> int:
        return self.bases.shape[1]

    def __len__(self) -> int:
        return self.bases.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return self.record(int(idx))
        return Dataset(self.bases[idx], self.bits[idx], self.provenance)

    def record(self, i: int) -> MeasurementRecord:
        return MeasurementRecord(basis_string(self.bases[i]), "".join(map(str, self.bits[i])))

    def records(self):
        return [self.record(i) for i in range(len(self))]

    @property
    def ensemble(self) -> str | None:
        return self.provenance.get("ensemble")

    def __repr__(self):
        return f"Dataset(N={len(self)}, n={self.n}, ensemble={self.ensemble})"


def state_hash(mps: MPSState) -> str:
    h = hashlib.sha256()
    for t in mps.tensors:
        h.update(np.asarray(t.shape, dtype="<u4").tobytes())
        h.update(np.ascontiguousarray(t, dtype="<c16").tobytes())
    return h.hexdigest()[:16]


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def generate_dataset(target: MPSState, spec: EnsembleSpec, n_samples: int, seed: int = 0) -> Dataset:
    """``n_samples`` i.i.d. measurement records of ``target``.

    Records are produced in blocks of :data:`RNG_BLOCK`, each with its own
    Philox stream keyed by ``(seed, block index)``, so any block can be
    regenerated on its own.
    """
    if n_samples < 1:
        raise InvalidArgumentError("number of samples must be >= 1")
    if spec.n != target.n:
        raise InvalidArgumentError(f"ensemble size {spec.n} does not match state size {target.n}")
    bases, bits = [], []
    for block, start in enumerate(range(0, n_samples, RNG_BLOCK)):
        count = min(RNG_BLOCK, n_samples - start)
        rng = _block_rng(seed, block)
        # draw a full block so a record's values do not depend on n_samples
        b = draw_bases(spec, rng, RNG_BLOCK)[:count]
        u = rng.random((RNG_BLOCK, spec.n))[:count]
        bases.append(b)
        bits.append(sample_batch(target, b, u))
    prov = {"target_hash": state_hash(target), "ensemble": spec.kind, "seed": int(seed), "n": spec.n}
    return Dataset(np.concatenate(bases), np.concatenate(bits), prov)


def split_dataset(ds: Dataset, train_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded shuffle into a training part of size ``ceil(f N)`` and a test part."""
    if not 0.0 < train_fraction < 1.0:
        raise InvalidArgumentError(f"train fraction must lie in (0, 1), got {train_fraction}")
    n_train = math.ceil(train_fraction * len(ds))
    if n_train == 0 or n_train == len(ds):
        raise InvalidArgumentError(f"split of {len(ds)} records at {train_fraction} leaves one side empty")
    perm = np.random.default_rng(seed).permutation(len(ds))
    parts = []
    for tag, idx in (("train", perm[:n_train]), ("test", perm[n_train:])):
        prov = dict(ds.provenance, split=tag, split_seed=int(seed), train_fraction=train_fraction)
        parts.append(Dataset(ds.bases[idx], ds.bits[idx], prov))
    return parts[0], parts[1]


# --- JSON-lines persistence ---------------------------------------------------------


def save_dataset(ds: Dataset, path) -> None:
    header = {"format": "mpstomo-dataset", "version": FORMAT_VERSION, "n": ds.n, **ds.provenance}
    lines = [json.dumps(header, sort_keys=True)]
    letters = np.frombuffer(b"ZXY", dtype=np.uint8)
    for b, x in zip(ds.bases, ds.bits):
        basis = letters[b].tobytes().decode()
        bits = (x + ord("0")).astype(np.uint8).tobytes().decode()
        lines.append(f'{{"basis":"{basis}","bits":"{bits}"}}')
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise InvalidArgumentError(f"{path}: missing header line")
        header = json.loads(header_line)
        n = header.get("n")
        bases, bits = [], []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            rec = json.loads(line)
            basis, b = rec.get("basis"), rec.get("bits")
            if not isinstance(basis, str) or not isinstance(b, str):
                raise InvalidArgumentError(f"{path}:{lineno}: record needs string 'basis' and 'bits'")
            if len(basis) != len(b) or (n is not None and len(basis) != n):
                raise InvalidArgumentError(f"{path}:{lineno}: length mismatch in record")
            bases.append(basis_codes(basis))
            bits.append(bits_array(b))
    if not bases:
        raise InvalidArgumentError(f"{path}: dataset has no records")
    prov = {k: v for k, v in header.items() if k not in ("format", "version")}
    if prov.get("N") not in (None, len(bases)):
        raise InvalidArgumentError(f"{path}: header N={prov['N']} but {len(bases)} records")
    return Dataset(np.stack(bases), np.stack(bits), prov)


# --- exact record distribution (used by tests and exact-loss checks) ----------------


def exact_distribution(target: MPSState, spec: EnsembleSpec) -> tuple[Dataset, np.ndarray]:
    """All (basis, bits) pairs of the ensemble and their probabilities ``P(U) |<b|U|psi>|^2``.

    Only intended for small ``n``.
    """
    from .mps import amplitudes_batch, norm_squared

    n = spec.n
    if n > 10:
        raise InvalidArgumentError("exact distribution only for n <= 10")
    z, x = AXIS_CODES["Z"], AXIS_CODES["X"]
    if spec.kind == GLOBAL_XZ:
        basis_rows = np.array([[z] * n, [x] * n], dtype=np.uint8)
    else:
        grid = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1
        basis_rows = np.where(grid == 1, x, z).astype(np.uint8)
    bit_rows = ((np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)
    bases = np.repeat(basis_rows, len(bit_rows), axis=0)
    bits = np.tile(bit_rows, (len(basis_rows), 1))
    probs = np.abs(amplitudes_batch(target, bases, bits)) ** 2 / norm_squared(target)
    weights = probs / len(basis_rows)
    return Dataset(bases, bits, {"ensemble": spec.kind, "n": n}), weights
