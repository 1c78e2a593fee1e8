import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpstomo.errors import DegenerateDiagnosticError, InvalidArgumentError
from mpstomo.evaluation import (
    ScalingCurve,
    bound_exceedance,
    error_bound_scale,
    evaluate_report,
    fit_power_law,
    read_scaling_csv,
    samples_to_threshold,
    scaling_rows,
    string_ratio,
    write_scaling_csv,
)
from mpstomo.hamiltonians import ghz_state, surface_code_stabilizers
from mpstomo.mps import new_random_mps, product_state, to_dense
from mpstomo.paulis import PauliString

from oracles import entropy

GRID = np.array([250, 500, 1000, 2000, 4000, 8000])


def test_exact_inverse_law():
    fit = fit_power_law(ScalingCurve(GRID, 10 / GRID))
    assert fit.alpha == pytest.approx(1.0, abs=1e-10)
    assert fit.c == pytest.approx(10.0, abs=1e-10)
    assert fit.r2 == pytest.approx(1.0)


def test_square_root_law():
    assert fit_power_law(ScalingCurve(GRID, 3 / np.sqrt(GRID))).alpha == pytest.approx(0.5, abs=1e-10)


@settings(max_examples=30)
@given(c=st.floats(1e-3, 1.0), alpha=st.floats(0.1, 2.0))
def test_fit_is_exact_on_synthetic_laws(c, alpha):
    ns = np.array([1e4, 2e4, 5e4, 1e5])
    fit = fit_power_law(ScalingCurve(ns, c * ns**-alpha))
    assert fit.alpha == pytest.approx(alpha, abs=1e-9)
    assert fit.c == pytest.approx(c, rel=1e-9)
    assert np.allclose(fit.predict(ns), c * ns**-alpha, rtol=1e-9)


def test_fit_needs_three_positive_points():
    with pytest.raises(InvalidArgumentError):
        fit_power_law(ScalingCurve([10, 20], [0.1, 0.05]))
    with pytest.warns(UserWarning):
        fit = fit_power_law(ScalingCurve([10, 20, 40, 80], [0.1, 0.05, 0.025, 0.0]))
    assert fit.n_points == 3


def test_curve_validation():
    with pytest.raises(InvalidArgumentError):
        ScalingCurve([20, 10], [0.1, 0.2])
    with pytest.raises(InvalidArgumentError):
        ScalingCurve([10, 20], [0.1, 1.2])


def test_curve_from_runs_takes_medians():
    runs = [(100, 0.3), (100, 0.1), (100, 0.2), (200, 0.05), (200, 0.15), (200, 0.1)]
    curve = ScalingCurve.from_runs(runs, {"beta": 0})
    assert list(curve.n_samples) == [100, 200]
    assert np.allclose(curve.infidelity, [0.2, 0.1])
    assert curve.metadata == {"beta": 0}


def test_threshold_on_inverse_law():
    curve = ScalingCurve(GRID, 1 / GRID)
    res = samples_to_threshold({9: curve}, 0.99)[9]
    assert res["N_star"] == math.ceil(1 / (1 - 0.99**9)) == 12
    assert res["extrapolated"] and not res["unreachable"]


def test_threshold_of_one_is_unreachable():
    res = samples_to_threshold({9: ScalingCurve(GRID, 1 / GRID)}, 1.0)[9]
    assert res["unreachable"] and res["extrapolated"] and res["N_star"] == math.inf


def test_threshold_inside_range():
    res = samples_to_threshold({2: ScalingCurve(GRID, 40 / GRID)}, 0.99)[2]
    assert res["N_star"] == math.ceil(40 / (1 - 0.99**2))
    assert not res["extrapolated"]


# --- diagnostics --------------------------------------------------------------------


def test_string_ratio_trivial_cases():
    identity = PauliString({})
    psi = new_random_mps(4, 2, seed=0)
    assert string_ratio(psi, identity, identity) == pytest.approx(1.0)
    zs = PauliString.on_sites("Z", range(4))
    assert string_ratio(product_state("0000"), PauliString.on_sites("Z", [1, 2]), zs) == pytest.approx(1.0)


def test_string_ratio_uses_square_root_of_loop(surface_ground_state):
    # on the code state a product of two Z checks is a closed loop with <.> = 1
    stabs = surface_code_stabilizers(3, 3)
    loop = PauliString({**stabs[0].support, **stabs[2].support})
    assert string_ratio(surface_ground_state, stabs[1], loop) == pytest.approx(1.0, abs=1e-6)
    ghz = ghz_state(4)
    # <Z0 Z1> = 1, and the "loop" X0..X3 has <.> = 1
    assert string_ratio(ghz, PauliString.from_label("Z0 Z1"), PauliString.on_sites("X", range(4))) == pytest.approx(1.0)


def test_string_ratio_rejects_vanishing_loop():
    with pytest.raises(DegenerateDiagnosticError):
        string_ratio(ghz_state(3), PauliString.from_label("Z0"), PauliString.from_label("X0"))


def test_report_for_identical_and_orthogonal_states():
    psi = new_random_mps(5, 2, seed=1)
    obs = [PauliString.from_label("Z0 X3"), PauliString.from_label("X1")]
    rep = evaluate_report(psi, psi, obs, cuts=[2])
    assert rep["fidelity"] == pytest.approx(1.0) and rep["local_fidelity"] == pytest.approx(1.0)
    assert all(o["abs_error"] < 1e-12 for o in rep["observables"])
    assert rep["cuts"][0]["model_entropy"] == pytest.approx(rep["cuts"][0]["target_entropy"])
    assert evaluate_report(product_state("01"), product_state("10"))["fidelity"] == 0.0
    with pytest.raises(InvalidArgumentError):
        evaluate_report(product_state("0"), product_state("00"))


def test_report_entropies_match_dense():
    a, b = new_random_mps(8, 4, seed=2), new_random_mps(8, 4, seed=3)
    rep = evaluate_report(a, b, cuts=range(1, 8))
    for entry in rep["cuts"]:
        assert entry["model_entropy"] == pytest.approx(entropy(to_dense(a), entry["cut"], 8), abs=1e-8)
        assert entry["target_entropy"] == pytest.approx(entropy(to_dense(b), entry["cut"], 8), abs=1e-8)


# --- tables ----------------------------------------------------------------------------------


def test_scaling_rows_skip_unconverged(tmp_path):
    recs = [
        {"n": 9, "N": 500, "infidelity": 0.1, "converged": True},
        {"n": 9, "N": 500, "infidelity": 0.3, "converged": True},
        {"n": 9, "N": 500, "infidelity": 0.9, "converged": False},
        {"n": 9, "N": 250, "infidelity": 0.2},
    ]
    rows, excluded = scaling_rows(recs)
    assert excluded == 1
    assert [(r["N"], r["median_infidelity"]) for r in rows] == [(250, 0.2), (500, pytest.approx(0.2))]
    write_scaling_csv(rows, tmp_path / "s.csv")
    assert read_scaling_csv(tmp_path / "s.csv") == rows
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "n,N,median_infidelity,q25,q75"


# --- bound check -------------------------------------------------------------------------------


def test_bound_scale():
    assert error_bound_scale(4, 2, 160, 0.1) == pytest.approx(1.0)


def test_bound_exceedance_on_synthetic_tail():
    rng = np.random.default_rng(0)
    runs = []
    for N in (100, 1000, 10_000):
        # infidelities exactly following the bound shape with lognormal scatter
        scale = error_bound_scale(4, 2, N, 0.1)
        runs += [(N, 0.01 * scale * rng.lognormal(0, 0.3)) for _ in range(200)]
    res = bound_exceedance(runs, n=4, chi_max=2)
    assert res["exceedance_fraction"] <= 0.15
    assert res["calibration_N"] == 100 and res["test_N"] == 10_000
    with pytest.raises(InvalidArgumentError):
        bound_exceedance([(10, 0.1)], 4, 2)
