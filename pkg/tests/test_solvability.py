import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import shift_pair_eps, sin_squared_pair, symmetric_pair, sign_changing_pair, loglog_delay
from oracles import bisect, characteristic
from fdeosc.problem import build_problem
from fdeosc.solvability import (
    AdvancedTermPresent,
    CharacteristicSpec,
    find_characteristic_roots,
    majorant_closed_form,
    method_of_steps_solve,
    picard_solve,
    picard_trajectory,
    residual,
    theorem_2_1_check,
    count_zeros,
    zero_locations,
    write_trajectory_csv,
)


def constant_shift(terms, t0=0.0):
    return build_problem({"p": "1", "t0": t0, "form": "ConstantShift", "terms": terms})


# --- characteristic roots -------------------------------------------------


@pytest.mark.parametrize("builder, neg_bracket, pos_bracket", [
    (symmetric_pair, (-1.5, 0.0), (0.0, 1.5)),
    (shift_pair_eps, (-1.5, 0.0), (0.0, 1.5)),
    (sin_squared_pair, (-2.0, 0.0), (0.0, 2.0)),
])
def test_roots_match_bisection(builder, neg_bracket, pos_bracket):
    spec = CharacteristicSpec.from_problem(builder())
    roots = find_characteristic_roots(spec)
    g = characteristic(spec.a0, spec.h)
    assert roots.both
    assert roots.neg_root == pytest.approx(bisect(g, *neg_bracket), abs=1e-10)
    assert roots.pos_root == pytest.approx(bisect(g, *pos_bracket), abs=1e-10)
    assert abs(roots.residual_neg) < 1e-12 and abs(roots.residual_pos) < 1e-12


def test_symmetric_pair_roots():
    # 0.66236 is the frozen bisection value for the symmetric pair with a0 = 1/7, h = +-3/2
    roots = find_characteristic_roots(CharacteristicSpec.from_problem(symmetric_pair()))
    assert roots.pos_root == pytest.approx(0.66236, abs=1e-5)
    assert roots.neg_root == pytest.approx(-roots.pos_root, abs=1e-12)


def test_unit_bound_without_shift():
    roots = find_characteristic_roots(CharacteristicSpec((1.0,), (0.0,)))
    assert roots.neg_root == pytest.approx(-1.0, abs=1e-12)
    assert roots.pos_root == pytest.approx(1.0, abs=1e-12)


def test_missing_negative_root():
    # lambda^2 = exp(-10 lambda) has no solution with lambda < 0
    roots = find_characteristic_roots(CharacteristicSpec((1.0,), (-10.0,)))
    assert roots.neg_root is None and roots.pos_root is not None
    assert not roots.both


def test_spec_validation():
    with pytest.raises(ValueError):
        CharacteristicSpec((1.0, 2.0), (0.0,))
    with pytest.raises(ValueError):
        CharacteristicSpec((-1.0,), (0.0,))


# --- Picard series --------------------------------------------------------


def test_cosh_reproduced():
    prob = constant_shift([{"q": "-1", "h": 0, "a0": 1}])
    sol = picard_solve(prob, 1.0, 0.0, 3.0, 1e-12, 80, 1e-3)
    assert sol.converged
    assert np.max(np.abs(sol.values - np.cosh(sol.grid))) < 1e-6


def test_zero_coefficient_exact_after_one_term():
    prob = constant_shift([{"q": "0", "h": 1, "a0": 1}])
    sol = picard_solve(prob, 2.0, 0.0, 2.0, 1e-12, 60, 1e-2)
    assert sol.converged and sol.iterations == 1
    assert np.all(sol.values == 2.0)


def test_initial_data_held():
    sol = picard_solve(symmetric_pair(), 1.5, 0.0, 2.0, 1e-10, 60, 1e-3)
    assert sol(0.0) == pytest.approx(1.5, abs=1e-12)
    assert abs(sol.derivative(0.0)) < 1e-8


@pytest.mark.parametrize("builder", [symmetric_pair, shift_pair_eps, sin_squared_pair])
def test_globally_solvable_examples(builder):
    res = theorem_2_1_check(builder(), 1.0, 0.0, 3.0, 1e-10)
    assert res.verdict == "GloballySolvable"
    assert res.residual < 1e-5


def test_sign_changing_example_on_short_window():
    res = theorem_2_1_check(sign_changing_pair(), 1.0, 0.0, 1.0, 1e-10)
    assert res.verdict == "GloballySolvable" and res.residual < 1e-5


def test_bound_violation_reported():
    prob = constant_shift([{"q": "2*sin(t)", "h": 1, "a0": 1}])
    res = theorem_2_1_check(prob, 1.0, 0.0, 2.0)
    assert res.verdict == "HypothesisFails"
    assert res.witness["k"] == 1 and res.witness["value"] > 1


def test_missing_root_fails_hypothesis():
    prob = constant_shift([{"q": "1", "h": -10, "a0": 1}])
    res = theorem_2_1_check(prob, 1.0, 0.0, 2.0)
    assert res.verdict == "HypothesisFails" and "negative" in res.reason


def test_variable_coeff_lacks_bounds():
    res = theorem_2_1_check(loglog_delay(), 1.0, 3.0, 1.0)
    assert res.verdict == "HypothesisFails"


def test_as_dict_fields():
    d = theorem_2_1_check(symmetric_pair(), 1.0, 0.0, 1.0).as_dict()
    assert set(d) >= {"verdict", "roots", "residual", "solution", "reason"}
    assert d["solution"]["converged"]


amplitudes = st.floats(0.01, 0.3)
shifts = st.sampled_from([-1.0, -0.5, 0.25, 0.5, 1.0])


@settings(max_examples=15, deadline=None)
@given(a1=amplitudes, a2=amplitudes, h1=shifts, h2=shifts, gamma0=st.floats(-2, 2))
def test_majorant_dominates_partial_sums(a1, a2, h1, h2, gamma0):
    prob = constant_shift([
        {"q": f"{a1}*cos(t)", "h": h1, "a0": a1},
        {"q": f"{a2}/(1+t^2)", "h": h2, "a0": a2},
    ])
    sol = picard_solve(prob, gamma0, 0.0, 1.5, 1e-10, 40, 5e-3)
    tol = 1e-9 * (1 + abs(gamma0))
    for F, Fbar in zip(sol.partial_sums, sol.majorant_partial_sums):
        assert np.all(np.abs(F - gamma0) <= Fbar - abs(gamma0) + tol)
    for lo, hi in zip(sol.majorant_partial_sums, sol.majorant_partial_sums[1:]):
        assert np.all(hi >= lo - tol)
    roots = find_characteristic_roots(CharacteristicSpec((a1, a2), (h1, h2)))
    chi = majorant_closed_form(roots, gamma0, 0.0)
    assert np.all(sol.majorant <= chi(sol.grid) + tol)


@settings(max_examples=10, deadline=None)
@given(a=st.floats(0.05, 0.5), h=shifts, gamma0=st.floats(0.1, 2))
def test_converged_series_is_fixed_point(a, h, gamma0):
    prob = constant_shift([{"q": f"{a}*sin(t)", "h": h, "a0": a}])
    tol = 1e-10
    sol = picard_solve(prob, gamma0, 0.0, 1.5, tol, 60, 5e-3)
    assert sol.converged
    # one more application changes the sum by less than twice the stopping tolerance
    last, prev = sol.partial_sums[-1], sol.partial_sums[-2]
    assert np.max(np.abs(last - prev)) < 2 * tol * max(1.0, np.max(np.abs(last)))
    assert residual(sol, prob) < 1e-5


def test_closed_form_majorant_initial_data():
    roots = find_characteristic_roots(CharacteristicSpec.from_problem(shift_pair_eps()))
    chi = majorant_closed_form(roots, -2.0, 1.0)
    assert chi(1.0) == pytest.approx(2.0)
    d = (chi(1.0 + 1e-6) - chi(1.0 - 1e-6)) / 2e-6
    assert abs(d) < 1e-6


# --- trajectories ---------------------------------------------------------


def test_method_of_steps_cos():
    prob = build_problem({"p": "1", "t0": 0, "terms": [{"q": "1", "alpha": "t"}]})
    traj = method_of_steps_solve(prob, 1.0, 10.0, 1e-10)
    zs = zero_locations(traj, (0.0, 10.0))
    assert len(zs) == 3
    assert np.allclose(zs, [math.pi / 2, 3 * math.pi / 2, 5 * math.pi / 2], atol=1e-7)
    ts = np.linspace(0, 10, 41)
    assert np.max(np.abs(traj(ts) - np.cos(ts))) < 1e-7


def test_method_of_steps_delay_matches_step_solution():
    # phi'' = -phi(t-1), phi = 1 on [-1, 0]: phi = 1 - t^2/2 on [0, 1]
    prob = build_problem({"p": "1", "t0": 0, "terms": [{"q": "1", "alpha": "t-1"}]})
    traj = method_of_steps_solve(prob, 1.0, 1.0, 1e-10)
    ts = np.linspace(0, 1, 11)
    assert np.max(np.abs(traj(ts) - (1 - ts**2 / 2))) < 1e-8


def test_loglog_example_counts_nondecreasing():
    traj = method_of_steps_solve(loglog_delay(), 1.0, 1000.0, 1e-8)
    counts = [count_zeros(traj, (3.0, b)) for b in (10.0, 100.0, 1000.0)]
    assert counts == sorted(counts)


def test_advanced_term_rejected():
    with pytest.raises(AdvancedTermPresent):
        method_of_steps_solve(sin_squared_pair(), 1.0, 5.0)


def test_count_zeros_cases():
    prob = build_problem({"p": "1", "t0": 0, "terms": [{"q": "1", "alpha": "t"}]})
    assert count_zeros(method_of_steps_solve(prob, 1.0, 10.0, 1e-10), (0, 10)) == 3
    flat = build_problem({"p": "1", "t0": 0, "terms": [{"q": "0", "alpha": "t"}]})
    assert count_zeros(method_of_steps_solve(flat, 1.0, 10.0), (0, 10)) == 0
    sol = picard_solve(sign_changing_pair(), 1.0, 2 * math.pi, 1.0, 1e-10, 60, 1e-3)
    assert count_zeros(picard_trajectory(sol), sol.window) >= 1


def test_trajectory_csv(tmp_path):
    prob = build_problem({"p": "1", "t0": 0, "terms": [{"q": "1", "alpha": "t"}]})
    traj = method_of_steps_solve(prob, 1.0, 2.0)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, traj)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "phi", "dphi"]
    assert len(rows) == traj.grid.size + 1
    assert float(rows[1][1]) == 1.0
