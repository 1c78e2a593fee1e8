import numpy as np
import pytest

from mpstomo.errors import InvalidArgumentError, ResourceLimitError
from mpstomo.hamiltonians import (
    RYDBERG_V,
    Term,
    dense_hamiltonian,
    ghz_state,
    identity_mpo,
    interpolated_state,
    interpolation_endpoint,
    mpo_from_terms,
    operator_mpo,
    pauli_mpo,
    ruby_rydberg_mpo,
    ruby_rydberg_terms,
    sparse_from_terms,
    surface_code_mpo,
    surface_code_stabilizers,
)
from mpstomo.lattices import ruby_lattice
from mpstomo.mps import entanglement_entropy, fidelity, to_dense
from mpstomo.paulis import PauliString

from oracles import PAULI, kron_all, pauli_dense, ruby_dense

N_OP = np.diag([1.0, 0.0])


def test_identity_and_single_z():
    assert np.allclose(dense_hamiltonian(identity_mpo(3)), np.eye(8))
    z = dense_hamiltonian(pauli_mpo(2, PauliString.from_label("Z0")))
    assert np.allclose(z, np.diag([1, 1, -1, -1]))


def test_dense_size_limit():
    with pytest.raises(ResourceLimitError):
        dense_hamiltonian(identity_mpo(13))


def test_terms_outside_register_are_rejected():
    with pytest.raises(InvalidArgumentError):
        mpo_from_terms(3, [Term(1.0, {3: PAULI["Z"]})])


def test_random_term_sum_matches_sparse_route():
    rng = np.random.default_rng(0)
    terms = []
    for _ in range(12):
        sites = rng.choice(6, size=rng.integers(1, 4), replace=False)
        terms.append(Term(rng.normal(), {int(s): PAULI["XYZ"[rng.integers(3)]] for s in sites}))
    ref = sparse_from_terms(6, terms).toarray()
    assert np.allclose(dense_hamiltonian(mpo_from_terms(6, terms)), ref, atol=1e-12)
    assert np.allclose(dense_hamiltonian(mpo_from_terms(6, terms, compress=False)), ref, atol=1e-12)


@pytest.mark.parametrize("sites", [[1, 3], [0, 2, 5], [4], [2, 3, 4]])
def test_operator_mpo_matches_embedding(sites):
    rng = np.random.default_rng(len(sites))
    k = len(sites)
    op = rng.normal(size=(2**k, 2**k)) + 1j * rng.normal(size=(2**k, 2**k))
    # embed by expanding in Pauli strings on the support
    ref = np.zeros((64, 64), dtype=complex)
    import itertools

    for letters in itertools.product("IXYZ", repeat=k):
        p = kron_all([PAULI[c] for c in letters])
        coeff = np.trace(p @ op) / 2**k
        ref += coeff * pauli_dense(dict(zip(sites, letters)), 6)
    assert np.allclose(dense_hamiltonian(operator_mpo(6, sites, op)), ref, atol=1e-12)


def test_operator_mpo_rejects_bad_support():
    with pytest.raises(InvalidArgumentError):
        operator_mpo(3, [1, 1], np.eye(4))
    with pytest.raises(InvalidArgumentError):
        operator_mpo(3, [0, 1], np.eye(2))


# --- surface code --------------------------------------------------------------------


def test_surface_code_stabilizer_set():
    stabs = surface_code_stabilizers(3, 3)
    assert len(stabs) == 8
    assert sum(set(s.support.values()) == {"Z"} for s in stabs) == 4
    assert sum(set(s.support.values()) == {"X"} for s in stabs) == 4
    for a in stabs:
        for b in stabs:
            assert a.commutes_with(b)


def test_surface_code_spectrum():
    h = dense_hamiltonian(surface_code_mpo(3, 3))
    assert np.allclose(h, h.conj().T)
    vals = np.linalg.eigvalsh(h)
    assert vals[0] == pytest.approx(-8.0, abs=1e-10)
    assert np.allclose(vals, np.round(vals), atol=1e-10)
    # two-fold ground space on the open square
    assert np.sum(np.abs(vals + 8) < 1e-9) == 2
    for s in surface_code_stabilizers(3, 3):
        m = s.to_dense(9)
        assert np.allclose(h @ m, m @ h)


def test_surface_code_field_term():
    diff = dense_hamiltonian(surface_code_mpo(3, 3, 0.1)) - dense_hamiltonian(surface_code_mpo(3, 3))
    zsum = sum(pauli_dense({i: "Z"}, 9) for i in range(9))
    assert np.allclose(diff, -0.1 * zsum)


def test_surface_code_rejects_small_lattice():
    with pytest.raises(InvalidArgumentError):
        surface_code_mpo(1, 3)


# --- Rydberg ruby ----------------------------------------------------------------------


def test_ruby_mpo_matches_dense_construction():
    h = dense_hamiltonian(ruby_rydberg_mpo(1, 2, 1.7))
    assert h.shape == (4096, 4096)
    assert np.abs(h - ruby_dense(ruby_lattice(1, 2), 1.7, -0.6, RYDBERG_V)).max() < 1e-10
    assert np.abs(h - h.conj().T).max() < 1e-10
    ref = sparse_from_terms(12, ruby_rydberg_terms(1, 2, 1.7)).toarray()
    assert np.abs(h - ref).max() < 1e-10


def test_ruby_detuning_is_linear():
    diff = dense_hamiltonian(ruby_rydberg_mpo(1, 2, 1.7)) - dense_hamiltonian(ruby_rydberg_mpo(1, 2, 0.5))
    occ = sum(np.kron(np.kron(np.eye(2**i), N_OP), np.eye(2 ** (11 - i))) for i in range(12))
    assert np.abs(diff - (-1.2) * occ).max() < 1e-10


# --- reference states --------------------------------------------------------------------


def test_ghz_state():
    psi = ghz_state(4)
    vec = to_dense(psi)
    assert vec[0] == pytest.approx(2**-0.5) and vec[-1] == pytest.approx(2**-0.5)
    assert entanglement_entropy(psi, 2) == pytest.approx(np.log(2))
    assert to_dense(ghz_state(3, sign=-1))[-1] == pytest.approx(-(2**-0.5))


def test_interpolation_endpoints():
    assert fidelity(interpolated_state(0.0, seed=3), ghz_state(3)) == pytest.approx(1.0)
    assert fidelity(interpolated_state(1.0, seed=3), interpolation_endpoint(3)) == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        interpolated_state(1.5)


def test_interpolation_fidelity_decreases_with_weight():
    grid = np.linspace(0, 1, 11)
    fids = [fidelity(interpolated_state(x, seed=1), ghz_state(3)) for x in grid]
    assert np.all(np.diff(fids) < 1e-12)
    assert np.max(np.abs(np.diff(fids))) < 0.3
