from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mortstat.errors import InvalidInputError, SchemaError
from mortstat.survival import (
    Cohort,
    Step,
    Subject,
    SurvivalCurve,
    curve_to_csv,
    greenwood_variance,
    kaplan_meier,
    read_cohort_csv,
)


def cohort(*pairs):
    return Cohort(tuple(Subject(str(i), t, e) for i, (t, e) in enumerate(pairs)))


def product_limit_oracle(pairs, t):
    """Direct evaluation of the product over death times <= t, in exact fractions."""
    value = Fraction(1)
    for ti in sorted({time for time, e in pairs if e}):
        if ti > t:
            break
        d = sum(1 for time, e in pairs if e and time == ti)
        n = sum(1 for time, _ in pairs if time >= ti)
        value *= 1 - Fraction(d, n)
    return value


def test_no_deaths_gives_flat_curve():
    curve = kaplan_meier(cohort((1, False), (2, False), (3, False)))
    assert curve.steps == ()
    assert curve.at(0) == curve.at(100) == 1.0


def test_worked_example():
    curve = kaplan_meier(cohort((1, True), (2, False), (3, True)))
    assert [(s.time, s.deaths, s.at_risk) for s in curve.steps] == [(1.0, 1, 3), (3.0, 1, 1)]
    assert curve.steps[0].estimate == pytest.approx(2 / 3, abs=1e-15)
    assert curve.steps[1].estimate == 0.0
    assert curve.at(0.5) == 1.0
    assert curve.at(2.5) == pytest.approx(2 / 3)


def test_tied_deaths_form_one_step():
    curve = kaplan_meier(cohort((2, True), (2, True), (5, True), (7, False)))
    assert [(s.time, s.deaths, s.at_risk) for s in curve.steps] == [(2.0, 2, 4), (5.0, 1, 2)]
    assert curve.steps[0].estimate == 0.5


def test_censored_at_death_time_remains_at_risk():
    curve = kaplan_meier(cohort((1, True), (1, False), (2, True)))
    assert curve.steps[0].at_risk == 3
    assert curve.steps[0].estimate == pytest.approx(2 / 3)


def test_censoring_after_last_death_leaves_estimates_unchanged():
    base = [(1, True), (3, True), (4, False), (6, True)]
    for later in (6.5, 10.0, 1e6):
        a = kaplan_meier(cohort(*base, (7, False)))
        b = kaplan_meier(cohort(*base, (later, False)))
        assert [s.estimate for s in a.steps] == [s.estimate for s in b.steps]


@pytest.mark.parametrize("bad", [[], [(-1.0, True)], [(float("nan"), True)], [(float("inf"), False)]])
def test_invalid_input(bad):
    with pytest.raises(InvalidInputError):
        kaplan_meier(cohort(*bad))


def test_mismatched_covariates_rejected():
    with pytest.raises(InvalidInputError):
        Cohort((Subject("a", 1, True, (1.0,)), Subject("b", 2, True, ())))


def test_no_censoring_small_exhaustive():
    # full n <= 6 sweep lives in the acceptance suite; this is the quick version
    for n in range(1, 5):
        for times in product(range(n), repeat=n):
            pairs = [(t, True) for t in times]
            curve = kaplan_meier(cohort(*pairs))
            for t in range(-1, n + 1):
                assert curve.at(t) == sum(1 for x in times if x > t) / n


def test_greenwood_single_step():
    curve = greenwood_variance(SurvivalCurve((Step(1.0, 1, 4, 0.75),)))
    assert curve.steps[0].variance == pytest.approx(3 / 64, rel=1e-15)
    assert curve.degenerate_steps == ()


def test_greenwood_empty_curve():
    assert greenwood_variance(SurvivalCurve()).steps == ()


def test_greenwood_all_at_risk_die_flags_step():
    curve = kaplan_meier(cohort((1, True), (2, True)))
    last = curve.steps[-1]
    assert last.deaths == last.at_risk
    assert last.variance == 0.0
    assert curve.degenerate_steps == (1,)


def test_greenwood_matches_hand_sum():
    pairs = [(1, True), (2, True), (2, False), (3, True), (5, False), (6, True), (6, True), (8, False)]
    curve = kaplan_meier(cohort(*pairs))
    total = Fraction(0)
    for s in curve.steps:
        total += Fraction(s.deaths, s.at_risk * (s.at_risk - s.deaths))
        expected = product_limit_oracle(pairs, s.time) ** 2 * total
        assert s.variance == pytest.approx(float(expected), rel=1e-12)


subjects = st.lists(
    st.tuples(st.integers(0, 8).map(float), st.booleans()), min_size=1, max_size=25
)


@settings(max_examples=300, deadline=None)
@given(subjects)
def test_matches_product_limit_oracle(pairs):
    curve = kaplan_meier(cohort(*pairs))
    for t in [x / 2 for x in range(-1, 19)]:
        assert curve.at(t) == pytest.approx(float(product_limit_oracle(pairs, t)), abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(subjects)
def test_curve_invariants(pairs):
    curve = kaplan_meier(cohort(*pairs))
    times = [s.time for s in curve.steps]
    assert times == sorted(set(times))
    est = [1.0] + [s.estimate for s in curve.steps]
    assert all(0.0 <= e <= 1.0 for e in est)
    assert all(a >= b for a, b in zip(est, est[1:]))
    at_risk = [s.at_risk for s in curve.steps]
    assert all(a > b for a, b in zip(at_risk, at_risk[1:]))
    assert all(1 <= s.deaths <= s.at_risk for s in curve.steps)
    assert all(s.variance >= 0 for s in curve.steps)
    if curve.steps and curve.steps[0].time > 0:
        assert curve.at(0) == 1.0
    assert curve.variance_at(-1) == 0.0


@settings(max_examples=200, deadline=None)
@given(subjects)
def test_greenwood_sum_non_decreasing(pairs):
    curve = kaplan_meier(cohort(*pairs))
    sums = [s.variance / s.estimate**2 for s in curve.steps if s.estimate > 0]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(sums, sums[1:]))


def test_read_cohort_csv(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("id,time,event,x1,x2\na,1.5,1,0,2\nb,2,0,1,3\n")
    c, names = read_cohort_csv(path)
    assert names == ["x1", "x2"]
    assert c.subjects[0] == Subject("a", 1.5, True, (0.0, 2.0))
    assert not c.subjects[1].event


@pytest.mark.parametrize(
    "text, row",
    [
        ("id,time\na,1\n", 1),
        ("id,time,event\na,1,2\n", 2),
        ("id,time,event\na,1,1\nb,-3,1\n", 3),
        ("id,time,event,x1\na,1,1,zz\n", 2),
        ("id,time,event\na,1\n", 2),
    ],
)
def test_read_cohort_csv_errors(tmp_path, text, row):
    path = tmp_path / "c.csv"
    path.write_text(text)
    with pytest.raises(SchemaError) as err:
        read_cohort_csv(path)
    assert err.value.row == row


def test_curve_csv_format():
    text = curve_to_csv(kaplan_meier(cohort((1, True), (2, False), (3, True))))
    lines = text.splitlines()
    assert lines[0] == "t,d,n,s,var"
    assert lines[1].startswith("1.0,1,3,0.666")
