import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PI, shift_pair_eps, sin_squared_pair, symmetric_pair, sign_changing_pair, loglog_delay, segment_endpoints, single
from fdeosc.criteria import (
    EmptyOmegaSet,
    OrderingViolated,
    WeightOutOfRange,
    corollary_2_1,
    interval_data,
    potential_advanced_weighted,
    potential_base,
    potential_mixed,
    remark_2_1_scan,
    theorem_2_2,
    theorem_2_3,
    theorem_2_4,
    theorem_2_5,
    theorem_2_6,
)
from fdeosc.problem import build_problem, classify_terms

E = math.e


def classes(problem, horizon=None):
    return classify_terms(problem, horizon or problem.t0 + 200.0, 0.01)


def mixed_pair():
    return build_problem({"p": "1", "t0": 0, "terms": [{"q": "1", "alpha": "t+1"}, {"q": "1", "alpha": "t-1"}]})


# --- comparison potentials -------------------------------------------------


def test_base_potentials_of_shift_example():
    prob = sin_squared_pair()
    cl = classes(prob)
    minus = potential_base(prob, cl, "minus")
    plus = potential_base(prob, cl, "plus")
    for t in (0.5, 2.0, 11.0):
        assert minus.Q(t) == pytest.approx(E * math.sin(t) ** 2 / (1 + E * E), rel=1e-14)
        assert plus.Q(t) == pytest.approx(1 / (4 * (1 + t * t)), rel=1e-14)
    assert minus.label == "retarded-plain" and plus.label == "advanced-plain"
    with pytest.raises(ValueError):
        potential_base(prob, cl, "both")


def test_empty_set_raises():
    prob = single("1/t^2", "t+1", 1.0)
    with pytest.raises(EmptyOmegaSet):
        potential_base(prob, classes(prob), "minus")


def test_retarded_ratio_is_one_half():
    # alpha = t - 3/2 at t = t1 + 3 sits halfway between t1 and t
    prob = symmetric_pair()
    cl = classes(prob)
    t1 = 4.0
    mixed = potential_mixed(prob, cl, t1)
    adv = potential_advanced_weighted(prob, cl)
    t = t1 + 3.0
    retarded = mixed.Q(t) - adv.Q(t)
    assert retarded == pytest.approx(0.5 / (7 * (1 + t * t)), rel=1e-9)
    assert mixed.label == "mixed" and mixed.domain_start >= t1 + 1.0


def test_cached_tail_matches_direct():
    prob = shift_pair_eps()
    cl = classes(prob)
    cached = potential_advanced_weighted(prob, cl)
    direct = potential_advanced_weighted(prob, cl, cached=False)
    for t in (0.0, 0.5):
        assert cached.Q(t) == pytest.approx(direct.Q(t), abs=1e-6)


def test_ratio_clamp_warns():
    prob = symmetric_pair()
    ode = potential_mixed(prob, classes(prob), 1.0)
    assert any("ratio is set to 0" in w for w in ode.notes)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(0.05, 2.0), h=st.floats(0.1, 2.0), t=st.floats(1.0, 30.0))
def test_weighted_advanced_dominates_plain(c, h, t):
    prob = build_problem({"p": "1", "t0": 0, "terms": [{"q": f"{c}/(1+t^2)", "alpha": f"t+{h}"}]})
    cl = classes(prob, 60.0)
    plain = potential_base(prob, cl, "plus").Q(t)
    weighted = potential_advanced_weighted(prob, cl).Q(t)
    assert weighted >= plain * (1 - 1e-12)


@settings(max_examples=20, deadline=None)
@given(l1=st.floats(0.05, 0.95), l2=st.floats(0.05, 0.95), t=st.floats(1.0, 40.0))
def test_weights_monotone_and_bounded(l1, l2, t):
    lo, hi = sorted((l1, l2))
    prob = build_problem({"p": "1", "t0": 0, "terms": [{"q": "1/(1+t)", "alpha": "t/2"}]})
    cl = classes(prob, 60.0)
    q_lo = potential_mixed(prob, cl, prob.t0, lo).Q(t)
    q_hi = potential_mixed(prob, cl, prob.t0, hi).Q(t)
    assert q_lo <= q_hi + 1e-15
    # the ratio never exceeds one, so the weighted potential stays below l times the plain one
    assert q_hi <= hi * potential_base(prob, cl, "minus").Q(t) + 1e-15
    assert q_hi == pytest.approx(hi * 0.5 / (1 + t), rel=1e-9)


# --- criteria at infinity --------------------------------------------------


def test_two_plain_equations_small_eps():
    prob = shift_pair_eps(0.01)
    v = theorem_2_2(prob, classes(prob))
    assert v.oscillatory
    assert [name for name, _ in v.sub_verdicts] == ["advanced-plain", "retarded-plain"]


def test_two_plain_equations_need_nonnegative_coefficients():
    prob = sign_changing_pair()
    v = theorem_2_2(prob, classes(prob))
    assert v.conclusion == "CriterionNotApplicable"
    assert v.failed["hypothesis"] == "A" and v.failed["witness"]["q"] < 0


def test_two_plain_equations_zero_coefficient():
    prob = single("0", "t-1")
    v = theorem_2_2(prob, classes(prob))
    assert v.conclusion == "CriterionNotApplicable"


def test_tail_weighted_needs_converging_tail():
    prob = mixed_pair()
    v = theorem_2_3(prob, classes(prob))
    assert v.conclusion == "CriterionNotApplicable" and v.failed["hypothesis"] == "D"


def test_tail_weighted_needs_retarded_term():
    prob = single("1/t^2", "t+1", 1.0)
    v = theorem_2_3(prob, classes(prob))
    assert v.conclusion == "CriterionNotApplicable"
    assert v.failed["hypothesis"] == "omega_minus nonempty"


def test_tail_weighted_on_sin_squared_pair_not_applicable():
    # the weighted advanced equation is non-oscillatory (Euler bound), so no conclusion
    prob = sin_squared_pair()
    v = theorem_2_3(prob, classes(prob))
    assert v.conclusion == "CriterionNotApplicable"


def test_divergence_criterion_sin_squared_pair():
    prob = sin_squared_pair()
    v = theorem_2_4(prob, classes(prob))
    assert v.oscillatory
    assert v.hypotheses == ("A", "B", "C", "E")


def test_divergence_criterion_c_prime_variant():
    prob = sin_squared_pair()
    v = theorem_2_4(prob, classes(prob), use_c_prime=True)
    assert v.oscillatory
    assert "C'" in v.hypotheses and v.parameters["variant"]
    assert v.sub_verdicts[0][0] == "retarded-plain"


def test_divergence_criterion_needs_divergence():
    prob = single("1/t^2", "t-1", 1.0)
    v = theorem_2_4(prob, classes(prob))
    assert v.conclusion == "CriterionNotApplicable" and v.failed["hypothesis"] == "E"


def test_divergence_criterion_loglog_delay():
    prob = loglog_delay(1.0)
    v = theorem_2_4(prob, classes(prob, 1e4))
    assert v.oscillatory


def test_mixed_sweep_symmetric_pair():
    prob = symmetric_pair()
    v = theorem_2_5(prob, classes(prob))
    assert v.oscillatory
    assert v.parameters["t1_samples"] == [1.0, 5.0, 25.0]
    assert len(v.sub_verdicts) == 3


def test_mixed_sweep_unclassified_only():
    prob = single("1/t", "t+sin(t)", 1.0)
    cl = classes(prob)
    assert cl.unclassified == (0,)
    v = theorem_2_5(prob, cl)
    assert v.conclusion == "CriterionNotApplicable"
    assert any("unclassified" in w for w in v.warnings)


def test_corollary_weights():
    prob = symmetric_pair()
    cl = classes(prob)
    v = corollary_2_1(prob, cl, 0.9)
    assert v.oscillatory and v.parameters["weights"] == {"1": 0.9}
    with pytest.raises(WeightOutOfRange):
        corollary_2_1(prob, cl, 1.0)
    with pytest.raises(WeightOutOfRange):
        corollary_2_1(prob, cl, 0.0)


def test_verdict_dict_shape():
    prob = sin_squared_pair()
    d = theorem_2_4(prob, classes(prob)).as_dict()
    assert d["conclusion"] == "OscillatoryByCriterion"
    assert d["statement"].startswith("criterion hypotheses verified numerically")
    assert d["conditions"] == {"A": "Holds", "B": "Holds", "C": "Holds", "E": "Holds"}


@pytest.mark.parametrize("make, fn", [
    (sin_squared_pair, theorem_2_2),
    (sin_squared_pair, theorem_2_4),
    (sign_changing_pair, theorem_2_2),
    (mixed_pair, theorem_2_3),
    (symmetric_pair, theorem_2_5),
])
def test_structural_consistency(make, fn):
    prob = make()
    v = fn(prob, classes(prob))
    if v.oscillatory:
        assert v.failed is None
        assert all(sub.oscillatory for _, sub in v.sub_verdicts)
    elif v.conclusion == "CriterionNotApplicable":
        assert v.failed is not None
    else:
        assert v.conclusion == "Inconclusive"


# --- criterion on a segment ------------------------------------------------


def test_interval_data_sign_changing_window():
    d = interval_data(sign_changing_pair(), *segment_endpoints(1)["t"])
    assert d.T1 == pytest.approx((2 + 1 / 6) * PI - 1 / 16, abs=1e-12)
    assert d.T2 == pytest.approx((2 + 5 / 6) * PI + 1 / 16, abs=1e-12)
    assert d.t2_plus == pytest.approx(2.5 * PI, abs=1e-12)
    assert d.t3_minus == pytest.approx(2.5 * PI, abs=1e-12)
    assert d.omega_plus_w == (1,) and d.omega_2_minus == (0,) and d.omega_1_minus == ()


def test_interval_data_refines_extrema():
    # t - sin t is increasing and below t on [0.5, 2.5]
    prob = single("1", "t-sin(t)")
    d = interval_data(prob, 0.5, 1.0, 1.5, 2.5)
    assert d.T1 == pytest.approx(0.5 - math.sin(0.5), abs=1e-12)
    assert d.T2 == pytest.approx(2.5 - math.sin(2.5), abs=1e-12)
    assert d.t3_minus == pytest.approx(1.5 - math.sin(1.5), abs=1e-12)
    # alpha dips below t1 at the left end, so the term is not admissible on [t1, t2]
    assert d.omega_2_minus == (0,) and d.omega_1_minus == ()


def test_interval_ordering():
    with pytest.raises(OrderingViolated):
        interval_data(sign_changing_pair(), 1.0, 3.0, 2.0, 4.0)


def test_segment_criterion_window():
    v = theorem_2_6(sign_changing_pair(), *segment_endpoints(1)["t"])
    assert v.oscillatory
    assert [name for name, _ in v.sub_verdicts][-1] == "segment-retarded"


def test_segment_criterion_rejects_overlap():
    t1, t2, _, t4 = segment_endpoints(1)["t"]
    v = theorem_2_6(sign_changing_pair(), t1, t2, t2 + 0.05, t4)
    assert v.conclusion == "CriterionNotApplicable" and v.failed["hypothesis"] == "b"


def test_segment_criterion_negative_coefficient_witness():
    t = [x + PI for x in segment_endpoints(1)["t"]]
    v = theorem_2_6(sign_changing_pair(), *t)
    assert v.failed["hypothesis"] == "a"
    assert v.failed["witness"]["q"] < 0


def test_scan_windows():
    windows = [segment_endpoints(m) for m in (1, 2)]
    v = remark_2_1_scan(sign_changing_pair(), windows)
    assert v.oscillatory
    for rec in v.parameters["windows"]:
        assert rec["inside_window"]


def test_scan_failing_window_is_inconclusive():
    # the second window squeezes t3 against t2, which breaks the ordering of t2+ and t3-
    bad = segment_endpoints(2)
    t1, t2, _, t4 = bad["t"]
    bad = {"L": bad["L"], "t": (t1, t2, t2 + 0.05, t4)}
    v = remark_2_1_scan(sign_changing_pair(), [segment_endpoints(1), bad])
    assert v.conclusion == "Inconclusive" and v.failed["windows"] == [2]


def test_scan_empty_and_unordered():
    assert remark_2_1_scan(sign_changing_pair(), []).conclusion == "Inconclusive"
    w = [segment_endpoints(2), segment_endpoints(1)]
    assert remark_2_1_scan(sign_changing_pair(), w).conclusion == "Inconclusive"
