import numpy as np
import pytest

from mpstomo.errors import InvalidArgumentError
from mpstomo.lattices import (
    bulk_coordination,
    load_lattice_fixture,
    ruby_lattice,
    surface_code_lattice,
    surface_code_plaquettes,
)


def test_surface_snake_is_a_serpentine_bijection():
    lat = surface_code_lattice(3, 3)
    assert lat.n == 9
    cells = {(int(x), int(y)) for x, y in lat.coords}
    assert cells == {(x, y) for x in range(3) for y in range(3)}
    # consecutive MPS sites are lattice neighbours
    steps = np.abs(np.diff(lat.coords, axis=0)).sum(axis=1)
    assert np.all(steps == 1)


def test_strip_size():
    assert surface_code_lattice(15, 3).n == 45


def test_surface_rejects_small_grids():
    with pytest.raises(InvalidArgumentError):
        surface_code_lattice(1, 3)


def test_surface_checks_are_pinned_by_fixture():
    fx = load_lattice_fixture("surface_3x3")
    z, x = surface_code_plaquettes(3, 3)
    assert [list(c) for c in z] == fx["z_checks"]
    assert [list(c) for c in x] == fx["x_checks"]
    assert surface_code_lattice(3, 3).to_json()["sites"] == fx["sites"]


@pytest.mark.parametrize("lx, ly", [(3, 3), (5, 3), (3, 5), (5, 5)])
def test_surface_has_n_minus_one_checks(lx, ly):
    z, x = surface_code_plaquettes(lx, ly)
    assert len(z) + len(x) == lx * ly - 1


@pytest.mark.parametrize("name, lx, ly", [("ruby_1x2", 1, 2), ("ruby_4x2", 4, 2)])
def test_ruby_matches_fixture(name, lx, ly):
    fx = load_lattice_fixture(name)
    lat = ruby_lattice(lx, ly).to_json()
    assert lat["n"] == 6 * lx * ly == fx["n"]
    assert lat["sites"] == fx["sites"]
    assert lat["neighbor_pairs"] == fx["neighbor_pairs"]
    assert lat["boundary_sites"] == fx["boundary_sites"]


def test_ruby_pairs_are_within_two_spacings():
    lat = ruby_lattice(4, 2)
    assert all(d <= 2.0 + 1e-9 for _, _, d in lat.neighbor_pairs)
    # the three shells of the ruby lattice at a, sqrt(3) a and 2 a
    shells = sorted({round(d, 6) for _, _, d in lat.neighbor_pairs})
    assert shells == [1.0, round(np.sqrt(3), 6), 2.0]


def test_ruby_interior_coordination_is_uniform():
    lat = ruby_lattice(4, 2)
    counts = np.zeros(lat.n, dtype=int)
    for a, b, _ in lat.neighbor_pairs:
        counts[a] += 1
        counts[b] += 1
    bulk = bulk_coordination()
    interior = [k for k in range(lat.n) if k not in lat.boundary_sites]
    assert interior and np.all(counts[interior] == bulk)
    assert np.all(counts[list(lat.boundary_sites)] < bulk)
    # boundary atoms sit in the two outermost columns of cells
    cells_x = {lat.labels[k][0] for k in lat.boundary_sites}
    assert cells_x == {0, 3}


def test_ruby_snake_is_a_bijection():
    lat = ruby_lattice(2, 2)
    assert len(set(lat.labels)) == lat.n == 24
