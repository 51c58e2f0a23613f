import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sbtrees.errors import (
    DivergentIntegrand,
    Empty,
    InvalidParams,
    InvalidTheta,
    NegativeEntry,
    NotSorted,
    NZero,
    OutOfRange,
    SigmaZero,
    SumMismatch,
)
from sbtrees.params import (
    DegreeSequence,
    ensemble_stats,
    expected_mu_bar,
    expected_mu_discrete,
    expected_mu_theta,
    expected_mu_tilde,
    inverse_expected_measure,
    omega_embed,
    parse_params,
    tail_integral,
    tail_integral_theta,
    threshold_t,
    validate_degree_sequence,
    validate_pparams,
    validate_theta,
)

from .conftest import FIG1_DEGREES, degree_lists
from .oracles import tuple_count

D6 = validate_degree_sequence((2, 2, 1, 0, 0, 0))


def binary(n):
    return validate_degree_sequence([2] * n + [0] * (n + 1))


# ---------------------------------------------------------------------------
# validation


def test_unsorted_rejected_then_canonicalized():
    with pytest.raises(NotSorted):
        validate_degree_sequence(FIG1_DEGREES)
    d = validate_degree_sequence(FIG1_DEGREES, canonicalize=True)
    assert d.degrees == (3, 3, 2, 1, 1, 0, 0, 0, 0, 0, 0)
    assert [FIG1_DEGREES[i] for i in d.permutation] == list(d.degrees)


def test_allow_unsorted_keeps_labelling():
    d = validate_degree_sequence(FIG1_DEGREES, allow_unsorted=True)
    assert d.degrees == FIG1_DEGREES and not d.is_sorted


@pytest.mark.parametrize("raw, s", [((0,), 1), ((2, 1, 0, 0), 4)])
def test_valid_sequences(raw, s):
    assert validate_degree_sequence(raw).s == s


@pytest.mark.parametrize(
    "raw, err",
    [((), Empty), ((1, 1), SumMismatch), ((2, 0, 0, 0), SumMismatch), ((3, -1, 0), NegativeEntry)],
)
def test_invalid_sequences(raw, err):
    with pytest.raises(err):
        validate_degree_sequence(raw)


def test_errors_carry_codes():
    with pytest.raises(SumMismatch) as info:
        validate_degree_sequence((1, 1))
    rec = info.value.to_record()
    assert rec["error"] == "SumMismatch" and rec["message"]


def test_pparams():
    p = validate_pparams([0.5, 0.25])
    assert p.p_inf == pytest.approx(0.25)
    assert p.sigma == pytest.approx(math.sqrt(0.3125))
    with pytest.raises(InvalidParams):
        validate_pparams([0.7, 0.5])
    with pytest.raises(NotSorted):
        validate_pparams([0.2, 0.5])
    with pytest.raises(InvalidParams):
        validate_pparams([0.5, 0.2], p_inf=0.1)
    with pytest.raises(InvalidParams):
        validate_pparams([], p_inf=1.0)


def test_theta():
    th = validate_theta([0.8, 0.6])
    assert th.theta0sq == 0.0
    assert validate_theta([0.0]).theta0sq == 1.0
    assert validate_theta([]).theta0 == 1.0
    with pytest.raises(InvalidTheta):
        validate_theta([0.9, 0.9])
    with pytest.raises(InvalidTheta):
        validate_theta([0.1, 0.2])


def test_parse_params_forms():
    assert isinstance(parse_params({"degrees": [1, 0]}), DegreeSequence)
    assert parse_params({"p": [0.5], "p_inf": 0.5}).p_inf == 0.5
    assert parse_params({"theta": [0.5]}).theta == (0.5,)
    with pytest.raises(InvalidParams):
        parse_params({"foo": 1})


# ---------------------------------------------------------------------------
# statistics


def test_stats_examples():
    st1 = ensemble_stats(validate_degree_sequence(FIG1_DEGREES, canonicalize=True))
    assert st1.sigma**2 == pytest.approx(14) and st1.big_n == 5 and st1.leaf_count == 6
    st0 = ensemble_stats(validate_degree_sequence((0,)))
    assert (st0.sigma, st0.big_n, st0.leaf_count) == (0.0, 0, 1)
    st2 = D6.stats()
    assert (st2.sigma, st2.big_n, st2.s1, st2.s_ge2) == (2.0, 2, 1, 2)


@given(degree_lists())
def test_leafcount_is_n_plus_one(raw):
    d = validate_degree_sequence(raw)
    st_ = d.stats()
    assert st_.leaf_count == st_.big_n + 1
    assert (st_.sigma == 0) == all(x <= 1 for x in raw)


# ---------------------------------------------------------------------------
# expected-measure calculus


def test_mu_tilde_examples():
    assert expected_mu_tilde(D6, 2.0) == pytest.approx(1 - math.exp(-2), abs=1e-15)
    assert expected_mu_tilde(D6, 0.0) == 0.0
    with pytest.raises(SigmaZero):
        expected_mu_tilde(validate_degree_sequence((1, 1, 0)), 1.0)


def test_mu_bar_examples():
    assert expected_mu_bar(D6, 0.1) == 0.0
    # floor(6 * (1/3) / 2) = 1: each d = 2 vertex seen w.p. 2/5, mass (2 - 1)/2
    assert expected_mu_bar(D6, 1 / 3) == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(OutOfRange):
        expected_mu_bar(D6, 2.0)
    assert expected_mu_bar(D6, 2.0, clamp=True) == pytest.approx(D6.big_n / D6.sigma)


def _brute_mu_discrete(d, k):
    total = Fraction(0)
    count = 0
    labels = [i for i, x in enumerate(d.degrees) for _ in range(x)]
    for a in set(itertools.permutations(labels)):
        seen = set(a[:k])
        total += sum(d.degrees[v] - 1 for v in seen)
        count += 1
    return total / count


@pytest.mark.parametrize("raw", [(2, 2, 1, 0, 0, 0), (3, 1, 1, 0, 0, 0), (2, 1, 0, 0)])
def test_mu_discrete_matches_enumeration(raw):
    d = validate_degree_sequence(raw)
    for k in range(d.s):
        assert expected_mu_discrete(d, k) == pytest.approx(float(_brute_mu_discrete(d, k)), abs=1e-12)


@given(degree_lists(min_s=3, max_s=60), st.floats(0, 20))
def test_lemma_inequalities(raw, x):
    d = validate_degree_sequence(raw)
    if d.sigma == 0:
        return
    e = expected_mu_tilde(d, x)
    assert e <= x + 1e-12
    if x >= 0.5:
        assert e >= 1 / 6 - 1e-12
    if math.floor(d.s * x / d.sigma * (1 + 1e-12)) < d.s:
        assert expected_mu_bar(d, x) <= 2 * e + 1e-9


@given(degree_lists(min_s=3, max_s=60))
def test_mu_tilde_increasing(raw):
    d = validate_degree_sequence(raw)
    if d.big_n == 0:
        return
    xs = np.linspace(0, 10, 200)
    assert np.all(np.diff(expected_mu_tilde(d, xs)) > 0)


def test_threshold_examples():
    with pytest.raises(NZero):
        threshold_t(validate_degree_sequence((1, 0)))
    for raw in [(2, 1, 0, 0), (2, 2, 1, 0, 0, 0)]:
        d = validate_degree_sequence(raw)
        t = threshold_t(d)
        assert expected_mu_discrete(d, t) >= d.big_n / 2 > expected_mu_discrete(d, t - 1)


def test_threshold_binary_self_verifying():
    d = binary(2000)
    t = threshold_t(d)
    assert expected_mu_discrete(d, t) >= d.big_n / 2 > expected_mu_discrete(d, t - 1)


def test_inverse_examples():
    assert inverse_expected_measure(D6, 0.0) == 0.0
    assert inverse_expected_measure(D6, 1 - math.exp(-2)) == pytest.approx(2.0, rel=1e-9)
    with pytest.raises(OutOfRange):
        inverse_expected_measure(D6, D6.big_n / D6.sigma)


@given(degree_lists(min_s=3, max_s=60), st.floats(0.0, 0.999))
def test_inverse_roundtrip(raw, frac):
    d = validate_degree_sequence(raw)
    if d.big_n == 0:
        return
    m = frac * d.big_n / d.sigma
    l = inverse_expected_measure(d, m)
    assert l >= m - 1e-12
    assert abs(expected_mu_tilde(d, l) - m) <= 1e-9 * max(1.0, m)


def _midpoint_tail(d, a, b, n=100_000):
    edges = np.linspace(a, b, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    vals = expected_mu_bar(d, mid, clamp=True)
    return float(np.sum((b - a) / n / (mid * vals)))


def test_tail_integral_vs_midpoint_oracle():
    d = binary(5000)
    t = threshold_t(d)
    b = d.sigma * t / d.s
    exact = tail_integral(d, 1.0, b)
    assert math.isfinite(exact)
    assert exact == pytest.approx(_midpoint_tail(d, 1.0, b), rel=1e-4)


def test_tail_integral_additive_and_errors():
    d = binary(300)
    assert tail_integral(d, 2.0, 2.0) == 0.0
    whole = tail_integral(d, 0.5, 3.0)
    assert whole == pytest.approx(tail_integral(d, 0.5, 1.3) + tail_integral(d, 1.3, 3.0), abs=1e-12)
    with pytest.raises(DivergentIntegrand):
        tail_integral(d, 1e-6, 1.0)


def test_theta_measure_and_integral():
    br = validate_theta([])
    assert expected_mu_theta(br, 3.0) == 3.0
    # 1/l^2 integrates to 1/a
    assert tail_integral_theta(br, 2.0) == pytest.approx(0.5, rel=1e-6)
    assert tail_integral_theta(br, 1.0, 4.0) == pytest.approx(0.75, rel=1e-8)


def test_omega_embed():
    pt = omega_embed(D6)
    assert pt.m == pytest.approx(1 / 3)
    assert pt.theta == (1.0, 1.0, 0.5, 0.0, 0.0, 0.0)
    th = validate_theta([0.5])
    assert omega_embed(th).m == 0 and omega_embed(th).big_n == math.inf
    p = validate_pparams([0.5, 0.25])
    assert omega_embed(p).m == pytest.approx(p.sigma)


def test_omega_embed_binary_converges():
    ms, th1 = [], []
    for n in (100, 1000, 10_000):
        pt = omega_embed(binary(n))
        ms.append(pt.m)
        th1.append(pt.theta[0])
    assert ms[0] > ms[1] > ms[2] and th1[0] > th1[1] > th1[2] and th1[2] < 0.02


def test_tuple_count_formula():
    assert tuple_count((1, 1, 0)) == 2
