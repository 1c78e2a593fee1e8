"""Single-qubit matrices, measurement axes and sparse Pauli strings."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_DAG = np.diag([1, -1j]).astype(complex)

PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

# Axis codes used in datasets and batched contractions.
AXIS_CODES = {"Z": 0, "X": 1, "Y": 2}
AXIS_NAMES = "ZXY"

# U^alpha maps the eigenbasis of the Pauli along alpha onto the computational basis.
ROTATIONS = np.stack([I2, HADAMARD, HADAMARD @ S_DAG])


def basis_codes(basis, n: int | None = None) -> np.ndarray:
    """Convert a basis string such as ``"XZZX"`` into an array of axis codes."""
    if isinstance(basis, np.ndarray) and basis.dtype != object and basis.dtype.kind in "iu":
        codes = basis.astype(np.uint8)
        if codes.size and codes.max() > 2:
            raise InvalidArgumentError(f"invalid axis code in {basis!r}")
    else:
        try:
            codes = np.array([AXIS_CODES[c] for c in str("".join(basis)).upper()], dtype=np.uint8)
        except KeyError as exc:
            raise InvalidArgumentError(f"invalid measurement axis {exc.args[0]!r} in {basis!r}") from None
    if n is not None and codes.shape != (n,):
        raise InvalidArgumentError(f"basis length {codes.size} does not match system size {n}")
    return codes


def basis_string(codes) -> str:
    return "".join(AXIS_NAMES[int(c)] for c in codes)


def bits_array(bits, n: int | None = None) -> np.ndarray:
    """Convert ``"0101"`` or an integer sequence into a uint8 array."""
    if isinstance(bits, str):
        if not set(bits) <= {"0", "1"}:
            raise InvalidArgumentError(f"invalid bit-string {bits!r}")
        arr = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(bits, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() > 1):
            raise InvalidArgumentError(f"invalid bit-string {bits!r}")
        arr = arr.astype(np.uint8)
    if n is not None and arr.shape != (n,):
        raise InvalidArgumentError(f"bit-string length {arr.size} does not match system size {n}")
    return arr


_TOKEN = re.compile(r"([XYZ])(\d+)")


@dataclass(frozen=True)
class PauliString:
    """A product of single-site Paulis with a scalar coefficient.

    Sites are 0-based. With ``hs_normalized`` the dense matrix is scaled so
    that ``tr(P P^dagger) = 1`` on the full register; the default is the
    plain operator normalization where every factor squares to identity.
    """

    support: Mapping[int, str] = field(default_factory=dict)
    coefficient: complex = 1.0
    hs_normalized: bool = False

    def __post_init__(self):
        clean = {}
        for site, p in dict(self.support).items():
            p = str(p).upper()
            if p not in "XYZ" or len(p) != 1:
                raise InvalidArgumentError(f"invalid Pauli {p!r} on site {site}")
            if int(site) < 0:
                raise InvalidArgumentError(f"negative site index {site}")
            clean[int(site)] = p
        if self.coefficient == 0:
            raise InvalidArgumentError("Pauli string coefficient must be nonzero")
        object.__setattr__(self, "support", dict(sorted(clean.items())))

    @classmethod
    def from_label(cls, label: str, coefficient: complex = 1.0) -> "PauliString":
        """Parse labels like ``"Z0 Z1 X4"`` (spaces optional, ``"I"`` for identity)."""
        text = label.replace(" ", "").replace("*", "")
        if text in ("", "I"):
            return cls({}, coefficient)
        pos, support = 0, {}
        for m in _TOKEN.finditer(text):
            if m.start() != pos:
                break
            support[int(m.group(2))] = m.group(1)
            pos = m.end()
        if pos != len(text):
            raise InvalidArgumentError(f"cannot parse Pauli label {label!r}")
        return cls(support, coefficient)

    @classmethod
    def on_sites(cls, pauli: str, sites: Sequence[int], coefficient: complex = 1.0) -> "PauliString":
        return cls({s: pauli for s in sites}, coefficient)

    @property
    def label(self) -> str:
        return " ".join(f"{p}{s}" for s, p in self.support.items()) or "I"

    @property
    def locality(self) -> int:
        return len(self.support)

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(self.support)

    def has_y(self) -> bool:
        return "Y" in self.support.values()

    def is_hermitian(self) -> bool:
        return abs(np.imag(self.coefficient)) == 0

    def check_range(self, n: int) -> None:
        if any(s >= n for s in self.support):
            raise InvalidArgumentError(f"Pauli string {self.label} has support outside [0, {n})")

    def scale(self, n: int) -> complex:
        return self.coefficient * (2.0 ** (-n / 2) if self.hs_normalized else 1.0)

    def local_ops(self) -> dict[int, np.ndarray]:
        return {s: PAULIS[p] for s, p in self.support.items()}

    def to_dense(self, n: int) -> np.ndarray:
        self.check_range(n)
        mats = [PAULIS[self.support.get(i, "I")] for i in range(n)]
        return self.scale(n) * reduce(np.kron, mats, np.ones((1, 1), dtype=complex))

    def commutes_with(self, other: "PauliString") -> bool:
        anti = sum(
            1 for s, p in self.support.items() if s in other.support and other.support[s] != p
        )
        return anti % 2 == 0

    def __str__(self) -> str:
        return self.label
