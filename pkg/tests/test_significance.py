import math

import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate, special, stats

from interprompt.significance import (
    SampleVector,
    betainc_regularized,
    pairwise_matrix,
    render_matrix,
    t_critical,
    t_test,
    t_two_sided_p,
)

A = SampleVector("a", [1, 2, 3, 4, 5])
B = SampleVector("b", [2, 3, 4, 5, 6])


def test_pooled_example():
    res = t_test(A, B, "two_sample_pooled")
    assert res.t_statistic == pytest.approx(-1.0, abs=1e-6)
    assert res.p_value == pytest.approx(0.3466, abs=1e-3)
    assert res.degrees_of_freedom == 8
    ref = stats.ttest_ind(A.values, B.values, equal_var=True)
    assert res.p_value == pytest.approx(ref.pvalue, abs=1e-12)


def test_identical_vectors():
    for flavor in ("paired", "welch", "two_sample_pooled"):
        res = t_test(A, SampleVector("a2", A.values), flavor)
        assert (res.t_statistic, res.p_value) == (0.0, 1.0)


def test_zero_variance_unequal_means():
    res = t_test(SampleVector("x", [1, 1, 1]), SampleVector("y", [2, 2, 2]), "two_sample_pooled")
    assert res.t_statistic == -math.inf and res.p_value == 0.0


def test_paired_requires_equal_length():
    with pytest.raises(ValueError):
        t_test(A, SampleVector("c", [1, 2, 3]), "paired")


def test_sample_vector_invariants():
    with pytest.raises(ValueError):
        SampleVector("x", [1.0])
    with pytest.raises(ValueError):
        SampleVector("x", [1.0, float("nan")])


def test_unknown_flavor():
    with pytest.raises(ValueError):
        t_test(A, B, "z")


def test_critical_values_against_table():
    assert t_critical(0.05, 8) == pytest.approx(2.306, abs=1e-3)
    for df in (1, 2, 5, 8, 30, 120):
        assert t_critical(0.05, df) == pytest.approx(stats.t.ppf(0.975, df), abs=1e-9)


def test_threshold_equivalence():
    crit = t_critical(0.05, 8)
    for t in (crit - 1e-3, crit + 1e-3, 1.0, 3.0):
        assert (abs(t) >= crit) == (t_two_sided_p(t, 8) <= 0.05)


@pytest.mark.parametrize("a, b, x", [(0.5, 0.5, 0.3), (2, 3, 0.4), (4, 0.5, 0.9), (10, 10, 0.5), (0.5, 30, 0.01)])
def test_incomplete_beta_against_quadrature(a, b, x):
    integrand = lambda u: u ** (a - 1) * (1 - u) ** (b - 1)  # noqa: E731
    num, _ = integrate.quad(integrand, 0, x, limit=200)
    total = math.exp(special.betaln(a, b))
    assert betainc_regularized(a, b, x) == pytest.approx(num / total, abs=1e-8)
    assert betainc_regularized(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-12)


def test_incomplete_beta_edges():
    assert betainc_regularized(2, 3, 0.0) == 0.0
    assert betainc_regularized(2, 3, 1.0) == 1.0
    with pytest.raises(ValueError):
        betainc_regularized(2, 3, 1.5)


floats = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
vec = st.lists(floats, min_size=2, max_size=12)
flavors = st.sampled_from(["two_sample_pooled", "welch", "paired"])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@settings(deadline=None)
@given(vec, vec, st.sampled_from(["two_sample_pooled", "welch"]))
def test_matches_scipy(a, b, flavor):
    res = t_test(SampleVector("a", a), SampleVector("b", b), flavor)
    ref = stats.ttest_ind(a, b, equal_var=flavor == "two_sample_pooled")
    assume(math.isfinite(ref.statistic) and abs(ref.statistic) < 1e8)
    assert res.t_statistic == pytest.approx(ref.statistic, rel=1e-6, abs=1e-9)
    assert res.p_value == pytest.approx(ref.pvalue, abs=1e-9)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@settings(deadline=None)
@given(st.lists(st.tuples(floats, floats), min_size=2, max_size=12))
def test_paired_matches_scipy(pairs):
    a, b = [x for x, _ in pairs], [y for _, y in pairs]
    ref = stats.ttest_rel(a, b)
    assume(math.isfinite(ref.statistic) and abs(ref.statistic) < 1e8)
    res = t_test(SampleVector("a", a), SampleVector("b", b), "paired")
    assert res.t_statistic == pytest.approx(ref.statistic, rel=1e-6, abs=1e-9)
    assert res.p_value == pytest.approx(ref.pvalue, abs=1e-9)


@given(st.lists(st.integers(-50, 50), min_size=3, max_size=10), st.lists(st.integers(-50, 50), min_size=3, max_size=10), flavors)
def test_antisymmetry(a, b, flavor):
    if flavor == "paired":
        n = min(len(a), len(b))
        a, b = a[:n], b[:n]
    ab = t_test(SampleVector("a", a), SampleVector("b", b), flavor)
    ba = t_test(SampleVector("b", b), SampleVector("a", a), flavor)
    assert ab.t_statistic == pytest.approx(-ba.t_statistic)
    assert ab.p_value == pytest.approx(ba.p_value)


@given(st.lists(st.integers(-50, 50), min_size=3, max_size=10), st.lists(st.integers(-50, 50), min_size=3, max_size=10),
       st.integers(-1000, 1000))
def test_location_invariance(a, b, c):
    base = t_test(SampleVector("a", a), SampleVector("b", b))
    shifted = t_test(SampleVector("a", [x + c for x in a]), SampleVector("b", [y + c for y in b]))
    assert shifted.t_statistic == pytest.approx(base.t_statistic, rel=1e-9, abs=1e-9)
    assert shifted.p_value == pytest.approx(base.p_value, rel=1e-9, abs=1e-12)


@given(st.lists(st.integers(-20, 20), min_size=3, max_size=10).filter(lambda v: len(set(v)) > 1),
       st.floats(0.5, 5.0), st.floats(1.1, 3.0))
def test_monotone_in_gap(values, gap, factor):
    a = SampleVector("a", values)
    near = t_test(a, SampleVector("b", [v + gap for v in values]))
    far = t_test(a, SampleVector("b", [v + gap * factor for v in values]))
    assert abs(far.t_statistic) > abs(near.t_statistic)
    assert far.p_value <= near.p_value


def test_pairwise_matrix_four_variants():
    vectors = [SampleVector(name, [i + k * 0.5 for i in range(5)]) for k, name in enumerate("ABCD")]
    results = pairwise_matrix(vectors, "two_sample_pooled")
    assert len(results) == 6
    for (x, y), res in results.items():
        vx = next(v for v in vectors if v.label == x)
        vy = next(v for v in vectors if v.label == y)
        assert res == t_test(vx, vy, "two_sample_pooled")
    table = render_matrix(vectors, results)
    assert table.count("\n") == 2 + 3
    assert table.splitlines()[1].count("---") == 7


def test_pairwise_identical():
    vectors = [SampleVector(n, [1, 2, 3]) for n in "xyz"]
    assert all((r.t_statistic, r.p_value) == (0.0, 1.0) for r in pairwise_matrix(vectors).values())
    with pytest.raises(ValueError):
        pairwise_matrix(vectors[:1])
