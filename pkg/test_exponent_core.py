"""Tests for exponent_core: graded ratios, matchings and the k/l/r solvers"""

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import exponents, rational_exponents
from exponent_core import (
    Exponent,
    ExtRatio,
    HopcroftKarp,
    exponent,
    exponent_vec,
    ext_ratio,
    format_exponent,
    format_exponent_vec,
    int_diff_value,
    invert_perm,
    compose_perm,
    apply_perm,
    is_int_diff,
    is_nat,
    parse_exponent,
    parse_exponent_vec,
    perm_matchings,
    r_conditions_hold,
    r_period,
    sigma_group,
    solve_kl,
    solve_r,
)
from hartogs_errors import ParseError


def E(text):
    return parse_exponent(text)


class TestParsing:
    @pytest.mark.parametrize("text,expected", [
        ("2", Exponent(Fraction(2))),
        ("3/2", Exponent(Fraction(3, 2))),
        ("3/2*L", Exponent(Fraction(3, 2), 1)),
        ("L", Exponent(Fraction(1), 1)),
        (" 4 / 6 ", Exponent(Fraction(2, 3))),
    ])
    def test_parse(self, text, expected):
        assert parse_exponent(text) == expected

    @pytest.mark.parametrize("text", ["0", "1/0", "1.5", "-2", "abc", "2*M", ""])
    def test_parse_rejects(self, text):
        with pytest.raises(ParseError):
            parse_exponent(text)

    def test_floats_are_rejected(self):
        with pytest.raises(ParseError):
            exponent(1.5)
        with pytest.raises(ParseError):
            exponent(True)

    def test_format(self):
        assert format_exponent(E("6/4")) == "3/2"
        assert format_exponent(E("3/2*L")) == "3/2*L"
        assert format_exponent_vec(parse_exponent_vec("1,2,1/3*L")) == ["1", "2", "1/3*L"]

    def test_vector_forms_agree(self):
        assert parse_exponent_vec(["2", "3"]) == parse_exponent_vec("2,3") == exponent_vec([2, 3])

    def test_empty_vector(self):
        with pytest.raises(ParseError):
            parse_exponent_vec([])


class TestRatios:
    def test_ext_ratio_examples(self):
        assert ext_ratio(E("3"), E("2")) == ExtRatio(Fraction(3, 2), 0)
        assert ext_ratio(E("3*L"), E("2")) == ExtRatio(Fraction(3, 2), 1)
        assert ext_ratio(E("5*L"), E("5*L")) == ExtRatio(Fraction(1), 0)

    def test_is_nat(self):
        assert is_nat(ExtRatio(Fraction(4)))
        assert not is_nat(ExtRatio(Fraction(3, 2)))
        assert not is_nat(ExtRatio(Fraction(2), 1))

    def test_int_diff_examples(self):
        five_halves, three_halves = ExtRatio(Fraction(5, 2)), ExtRatio(Fraction(3, 2))
        assert int_diff_value([(3, five_halves), (-3, three_halves)]) == 3
        lam = ExtRatio(Fraction(3, 2), 1)
        assert int_diff_value([(1, lam), (-1, lam)]) == 0
        assert not is_int_diff([(1, five_halves)])
        assert not is_int_diff([(1, lam), (-1, three_halves)])

    @given(exponents, exponents)
    def test_ratio_times_inverse_is_one(self, a, b):
        assert ext_ratio(a, b) * ext_ratio(b, a) == ExtRatio(Fraction(1), 0)

    @given(st.lists(st.tuples(st.integers(-5, 5), exponents, exponents), min_size=1, max_size=4),
           st.integers(-5, 5), st.integers(1, 6))
    def test_int_diff_invariances(self, raw, c, integer):
        terms = [(k, ext_ratio(a, b)) for k, a, b in raw]
        value = is_int_diff(terms)
        assert is_int_diff(list(reversed(terms))) == value
        assert is_int_diff(terms + [(c, ExtRatio(Fraction(integer)))]) == value


class TestMatchings:
    def test_examples(self):
        assert perm_matchings(parse_exponent_vec("4,6"), parse_exponent_vec("2,3")).as_set() == {(0, 1)}
        assert perm_matchings(parse_exponent_vec("2,2"), parse_exponent_vec("2,2")).as_set() == {(0, 1), (1, 0)}
        assert not perm_matchings(parse_exponent_vec("2,2"), parse_exponent_vec("3,3"))

    @settings(max_examples=150, deadline=None)
    @given(st.integers(1, 5).flatmap(lambda n: st.tuples(st.lists(exponents, min_size=n, max_size=n),
                                                         st.lists(exponents, min_size=n, max_size=n))))
    def test_agrees_with_brute_force(self, vectors):
        a, b = map(tuple, vectors)
        brute = sorted(
            sigma for sigma in itertools.permutations(range(len(a)))
            if all(is_nat(ext_ratio(a[i], b[j])) for j, i in enumerate(sigma))
        )
        matchings = perm_matchings(a, b)
        assert list(matchings) == brute
        assert matchings.count == len(brute)
        assert matchings.first() == (brute[0] if brute else None)
        if brute:
            # necessary condition: each b_j divides some a_i
            assert all(any(is_nat(ext_ratio(ai, bj)) for ai in a) for bj in b)

    def test_large_families_stay_lazy(self):
        p = exponent_vec(["2"] * 8)
        matchings = perm_matchings(p, p)
        assert matchings.count == 40320
        assert matchings.is_lazy
        assert matchings.first() == tuple(range(8))
        assert (7, 6, 5, 4, 3, 2, 1, 0) in matchings
        with pytest.raises(ValueError):
            matchings.as_set()

    def test_large_sparse_instance(self):
        # twelve slots, two exponent classes: never a factorial scan
        p = exponent_vec(["2"] * 6 + ["3"] * 6)
        matchings = perm_matchings(p, p)
        assert matchings.count == 720 * 720
        assert matchings.is_lazy
        first = next(iter(matchings))
        assert first == tuple(range(12))

    def test_sigma_group(self):
        group = sigma_group(parse_exponent_vec("2,2,3*L"))
        assert group.as_set() == {(0, 1, 2), (1, 0, 2)}

    def test_hopcroft_karp(self):
        assert HopcroftKarp([[0, 1], [0], [2]]).has_perfect_matching()
        assert not HopcroftKarp([[0], [0], [1, 2]]).has_perfect_matching()
        assert len(HopcroftKarp([[0, 1], [0, 1], [0, 1]]).maximum_matching()) == 2

    def test_permutation_helpers(self):
        sigma, tau = (1, 2, 0), (2, 0, 1)
        vec = ("a", "b", "c")
        assert apply_perm(apply_perm(vec, sigma), tau) == apply_perm(vec, compose_perm(sigma, tau))
        assert apply_perm(apply_perm(vec, sigma), invert_perm(sigma)) == vec


def _brute_kl(qp, qp_target, bound=12):
    for l in range(1, bound + 1):
        for k in range(1, bound + 1):
            if is_int_diff([(l, qp_target), (-k, qp)]):
                return k, l
    return None


class TestSolveKL:
    def test_examples(self):
        assert solve_kl(ExtRatio(Fraction(3, 2)), ExtRatio(Fraction(5, 2))) == (1, 1)
        assert solve_kl(ExtRatio(Fraction(1)), ExtRatio(Fraction(1))) == (1, 1)
        assert solve_kl(ExtRatio(Fraction(1), 1), ExtRatio(Fraction(1))) is None

    def test_equal_lambda_degree(self):
        k, l = solve_kl(ExtRatio(Fraction(3, 2), 1), ExtRatio(Fraction(1, 2), 1))
        assert (k, l) == (1, 3)
        assert int_diff_value([(l, ExtRatio(Fraction(1, 2), 1)), (-k, ExtRatio(Fraction(3, 2), 1))]) == 0

    @given(rational_exponents, rational_exponents, rational_exponents, rational_exponents)
    def test_rational_ratios_always_solvable(self, p, q, p_t, q_t):
        qp, qp_target = ext_ratio(q, p), ext_ratio(q_t, p_t)
        assert solve_kl(qp, qp_target) == _brute_kl(qp, qp_target, bound=16)

    @given(exponents, exponents, exponents, exponents)
    def test_witness_is_self_consistent(self, p, q, p_t, q_t):
        qp, qp_target = ext_ratio(q, p), ext_ratio(q_t, p_t)
        result = solve_kl(qp, qp_target)
        if result is None:
            assert qp.lambda_deg != qp_target.lambda_deg
        else:
            k, l = result
            assert is_int_diff([(l, qp_target), (-k, qp)])


class TestSolveR:
    def test_examples(self):
        assert solve_r(E("3"), E("2"), parse_exponent_vec("1,2")) is None
        assert solve_r(E("1"), E("2"), parse_exponent_vec("1/2,3")) == 2
        assert solve_r(E("5/3"), E("5/3"), parse_exponent_vec("7/2,1/3*L")) == 1

    def test_period_for_worked_example(self):
        assert r_period(E("3"), E("2"), parse_exponent_vec("1,2")) == 1

    def test_degree_mismatch(self):
        assert r_period(E("L"), E("2"), parse_exponent_vec("1")) is None
        assert solve_r(E("L"), E("2"), parse_exponent_vec("1")) is None

    def test_forced_value(self):
        # q̃/p̃_1 has λ-degree 1, so r = q/q̃ is the only candidate
        assert solve_r(E("4*L"), E("2*L"), parse_exponent_vec("1,L")) == 2
        assert solve_r(E("4*L"), E("2*L"), parse_exponent_vec("1,L"), start=3) is None

    def test_start(self):
        assert solve_r(E("1"), E("1"), parse_exponent_vec("1/2,1/3"), start=2) == 2
        assert solve_r(E("2"), E("2"), parse_exponent_vec("3"), start=2) == 4

    @settings(max_examples=100)
    @given(rational_exponents, rational_exponents, st.lists(rational_exponents, min_size=1, max_size=3),
           st.integers(1, 50))
    def test_predicate_is_periodic(self, q, q_t, p_t, r):
        period = r_period(q, q_t, tuple(p_t))
        assert r_conditions_hold(r, q, q_t, tuple(p_t)) == r_conditions_hold(r + period, q, q_t, tuple(p_t))

    @settings(max_examples=100)
    @given(exponents, exponents, st.lists(exponents, min_size=1, max_size=3))
    def test_agrees_with_scan(self, q, q_t, p_t):
        p_t = tuple(p_t)
        scan = next((r for r in range(1, 1001) if r_conditions_hold(r, q, q_t, p_t)), None)
        assert solve_r(q, q_t, p_t) == scan
