"""Lattice geometries and their snake orderings.

Site indices in a :class:`LatticeSpec` are MPS positions, i.e. the order in
which the snake path visits the sites.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations

import numpy as np

from .errors import InvalidArgumentError

FIXTURE_VERSION = 1
RUBY_TRUNCATION = 2.0  # interaction range in units of the lattice spacing a
RUBY_ASPECT = np.sqrt(3.0)


@dataclass(frozen=True)
class LatticeSpec:
    geometry: str
    lx: int
    ly: int
    coords: np.ndarray  # (n, 2), row k = position of MPS site k
    labels: tuple  # per-site (cell_x, cell_y, sublattice)
    neighbor_pairs: tuple = ()  # (i, j, distance) with i < j
    boundary_sites: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.coords)

    def to_json(self) -> dict:
        return {
            "version": FIXTURE_VERSION,
            "geometry": self.geometry,
            "lx": self.lx,
            "ly": self.ly,
            "n": self.n,
            "sites": [
                {"index": k, "x": round(float(x), 12), "y": round(float(y), 12), "label": list(lab)}
                for k, ((x, y), lab) in enumerate(zip(self.coords, self.labels))
            ],
            "neighbor_pairs": [[i, j, round(float(d), 12)] for i, j, d in self.neighbor_pairs],
            "boundary_sites": list(self.boundary_sites),
            **self.extra,
        }


def _snake_order(columns: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Column-major serpentine order: ascending columns, alternating row direction."""
    order = []
    for k, col in enumerate(np.unique(columns)):
        idx = np.flatnonzero(columns == col)
        idx = idx[np.argsort(rows[idx], kind="stable")]
        order.extend(idx if k % 2 == 0 else idx[::-1])
    return np.asarray(order)


def surface_code_lattice(lx: int, ly: int) -> LatticeSpec:
    """Qubits on the vertices of an ``lx`` x ``ly`` grid (n = lx * ly)."""
    if lx < 2 or ly < 2:
        raise InvalidArgumentError(f"surface code needs lx, ly >= 2, got ({lx}, {ly})")
    xs, ys = np.meshgrid(np.arange(lx), np.arange(ly), indexing="ij")
    xs, ys = xs.ravel(), ys.ravel()
    order = _snake_order(xs, ys)
    coords = np.stack([xs[order], ys[order]], axis=1).astype(float)
    labels = tuple((int(x), int(y), 0) for x, y in coords)
    return LatticeSpec("surface-code", lx, ly, coords, labels)


def surface_code_plaquettes(lx: int, ly: int) -> tuple[list[tuple[int, ...]], list[tuple[int, ...]]]:
    """Sites of the Z-type and X-type checks in MPS order.

    Faces of the grid are colored like a checkerboard (Z when ``x + y`` is
    even). Weight-2 checks sit on the boundary: X-type along the top and
    bottom edges, Z-type along the left and right edges. For odd ``lx`` and
    ``ly`` this yields n - 1 independent commuting checks.
    """
    lat = surface_code_lattice(lx, ly)
    where = {(int(x), int(y)): k for k, (x, y) in enumerate(lat.coords)}

    def site(x, y):
        return where[(x, y)]

    z_checks, x_checks = [], []
    for x in range(lx - 1):
        for y in range(ly - 1):
            face = tuple(sorted(site(x + dx, y + dy) for dx in (0, 1) for dy in (0, 1)))
            (z_checks if (x + y) % 2 == 0 else x_checks).append(face)
    for x in range(lx - 1):
        # virtual faces above the top row and below the bottom row
        if (x + ly - 1) % 2 == 1:
            x_checks.append(tuple(sorted((site(x, ly - 1), site(x + 1, ly - 1)))))
        if (x - 1) % 2 == 1:
            x_checks.append(tuple(sorted((site(x, 0), site(x + 1, 0)))))
    for y in range(ly - 1):
        if (y - 1) % 2 == 0:
            z_checks.append(tuple(sorted((site(0, y), site(0, y + 1)))))
        if (lx - 1 + y) % 2 == 0:
            z_checks.append(tuple(sorted((site(lx - 1, y), site(lx - 1, y + 1)))))
    return z_checks, x_checks


# --- ruby lattice --------------------------------------------------------------

_A1 = np.array([4.0, 0.0])
_A2 = np.array([2.0, 2.0 * np.sqrt(3.0)])


def _ruby_basis() -> np.ndarray:
    # Hexagon of side sqrt(3) a: rectangles between neighbouring hexagons then
    # have sides a and sqrt(3) a, and triangles have side a.
    angles = np.deg2rad(30.0 + 60.0 * np.arange(6))
    return RUBY_ASPECT * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def _ruby_wrap(ly: int) -> np.ndarray:
    return ly * _A2 - (ly // 2) * _A1


def ruby_lattice(lx: int, ly: int, truncation: float = RUBY_TRUNCATION) -> LatticeSpec:
    """Ruby lattice on a cylinder: open along x, periodic along y, 6 atoms per cell.

    Cells are stacked in a brick pattern so that the periodic direction is
    vertical for even ``ly``. Interacting pairs are those within
    ``truncation`` lattice spacings (minimum image around the cylinder).
    Boundary sites are atoms whose interaction neighbourhood is smaller than
    in the bulk.
    """
    if lx < 1 or ly < 1:
        raise InvalidArgumentError(f"ruby cylinder needs lx, ly >= 1, got ({lx}, {ly})")
    basis = _ruby_basis()
    pos, labels = [], []
    for i in range(lx):
        for j in range(ly):
            origin = i * _A1 + j * _A2 - (j // 2) * _A1
            for k, b in enumerate(basis):
                pos.append(origin + b)
                labels.append((i, j, k))
    pos = np.asarray(pos)
    order = _snake_order(np.round(pos[:, 0], 9), pos[:, 1])
    pos = pos[order]
    labels = tuple(labels[k] for k in order)

    wrap = _ruby_wrap(ly)
    pairs = []
    for a, b in combinations(range(len(pos)), 2):
        d = _min_image(pos[a] - pos[b], wrap)
        if d <= truncation + 1e-9:
            pairs.append((a, b, float(d)))
    counts = np.zeros(len(pos), dtype=int)
    for a, b, _ in pairs:
        counts[a] += 1
        counts[b] += 1
    bulk = bulk_coordination(truncation)
    boundary = tuple(int(k) for k in np.flatnonzero(counts < bulk))
    extra = {"bulk_coordination": bulk, "truncation": truncation, "aspect_ratio": float(RUBY_ASPECT)}
    return LatticeSpec("ruby-cylinder", lx, ly, pos, labels, tuple(pairs), boundary, extra)


def _min_image(delta: np.ndarray, wrap: np.ndarray) -> float:
    return float(min(np.linalg.norm(delta + m * wrap) for m in range(-2, 3)))


def bulk_coordination(truncation: float = RUBY_TRUNCATION) -> int:
    """Number of atoms within ``truncation`` of an atom of the infinite ruby lattice."""
    basis = _ruby_basis()
    counts = set()
    for b in basis:
        c = 0
        for i in range(-3, 4):
            for j in range(-3, 4):
                for b2 in basis:
                    d = np.linalg.norm(i * _A1 + j * _A2 + b2 - b)
                    if 1e-9 < d <= truncation + 1e-9:
                        c += 1
        counts.add(c)
    if len(counts) != 1:
        raise RuntimeError("ruby sublattices have different coordination")
    return counts.pop()


def load_lattice_fixture(name: str) -> dict:
    """Load a packaged lattice fixture, e.g. ``"ruby_1x2"``."""
    text = resources.files("mpstomo").joinpath("data", f"{name}.json").read_text()
    return json.loads(text)
