import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fhdyn.arithmetic import (
    check_cd,
    continued_fraction,
    is_prime,
    prime_denominator_approximants,
    torus_norm,
    value_from_quotients,
)
from fhdyn.errors import SearchExhausted

from conftest import GOLDEN


class TestTorusNorm:
    def test_half(self):
        assert torus_norm(0.5) == 0.5

    def test_above_integer(self):
        assert torus_norm(3.25) == 0.25

    def test_negative(self):
        assert torus_norm(-0.1) == pytest.approx(0.1, abs=1e-15)

    def test_fraction_exact(self):
        assert torus_norm(Fraction(7, 3)) == Fraction(1, 3)

    @given(st.integers(min_value=-(2**40), max_value=2**40))
    @settings(max_examples=100, deadline=None)
    def test_symmetries(self, k):
        x = k / 2.0**20  # exactly representable, and x + 1 is exact too
        assert torus_norm(x) == torus_norm(-x)
        assert torus_norm(x) == torus_norm(x + 1.0)

    def test_range(self):
        xs = np.linspace(-3, 3, 101)
        norms = torus_norm(xs)
        assert np.all(norms >= 0) and np.all(norms <= 0.5)


def brute_force_cd(alpha, beta, tau, R):
    """Independent double loop, plain Python arithmetic."""
    best = math.inf
    witness = None
    for j in range(0, R + 1):
        for n in range(-(R - j), R - j + 1):
            if j == 0 and n == 0:
                continue
            if abs(n) + j < 1:
                continue
            x = n * alpha - j * beta
            frac = x - math.floor(x)
            norm = min(frac, 1.0 - frac)
            margin = norm * (abs(n) + j) ** (2.0 + tau)
            if margin < best:
                best = margin
                witness = ((n,), j)
    return best, witness


class TestCheckCd:
    def test_rational_alpha_fails_with_zero_margin(self):
        rep = check_cd([0.5], 0.3, 1e-6, 0.5, 10)
        assert not rep.passed
        assert rep.min_margin == 0.0
        n, j = rep.witness
        # the witness reproduces its margin exactly
        assert torus_norm(n[0] * 0.5 - j * 0.3) * (abs(n[0]) + j) ** 2.5 == 0.0

    def test_consistency_pair(self):
        rep = check_cd([GOLDEN], np.sqrt(2) - 1, 1e-12, 0.5, 60)
        margin = rep.min_margin
        assert check_cd([GOLDEN], np.sqrt(2) - 1, margin * 0.5, 0.5, 60).passed
        assert not check_cd([GOLDEN], np.sqrt(2) - 1, margin * 2.0, 0.5, 60).passed

    def test_matches_brute_force(self):
        rng = np.random.default_rng(31)
        for _ in range(4):
            alpha = float(rng.random())
            beta = float(rng.random())
            tau = float(rng.random())
            rep = check_cd([alpha], beta, 1e-9, tau, 120)
            best, witness = brute_force_cd(alpha, beta, tau, 120)
            assert rep.min_margin == pytest.approx(best, rel=1e-12)
            assert rep.witness == witness

    def test_monotone_in_c_and_range(self):
        rep = check_cd([GOLDEN], np.sqrt(2) - 1, 1e-9, 0.5, 40)
        assert rep.passed
        # pass at c implies pass at smaller c
        assert check_cd([GOLDEN], np.sqrt(2) - 1, 1e-12, 0.5, 40).passed
        # pass at R implies pass at smaller R
        assert check_cd([GOLDEN], np.sqrt(2) - 1, 1e-9, 0.5, 20).passed

    def test_two_dimensional_base(self):
        rep = check_cd([GOLDEN, np.sqrt(2) - 1], 0.3183, 1e-12, 1.0, 8)
        n, j = rep.witness
        assert len(n) == 2
        assert rep.min_margin > 0


class TestContinuedFraction:
    def test_golden_quotients_fibonacci(self):
        cf = continued_fraction(GOLDEN, 12)
        assert cf.quotients == (1,) * 12
        fib = [1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233]
        assert list(cf.denominators) == fib
        assert not cf.rational_input

    def test_rational_terminates_with_flag(self):
        cf = continued_fraction(0.25, 10)
        assert cf.rational_input
        assert cf.convergents[-1] == (1, 4)

    def test_liouville_sum_factorial_gaps(self):
        x = Fraction(10) ** -1 + Fraction(10) ** -2 + Fraction(10) ** -6
        cf = continued_fraction(x, 12)
        # independent expansion oracle via exact Euclid on the fraction
        p, q = x.numerator, x.denominator
        quotients = []
        a, b = q, p
        while b:
            quotients.append(a // b)
            a, b = b, a % b
        assert list(cf.quotients) == quotients[: len(cf.quotients)]
        assert 1000000 in cf.denominators

    def test_convergent_quality(self):
        cf = continued_fraction(GOLDEN, 14)
        for k in range(len(cf.convergents) - 1):
            p, q = cf.convergents[k]
            q_next = cf.convergents[k + 1][1]
            assert abs(GOLDEN - p / q) < 1.0 / (q * q_next)

    def test_best_approximation_up_to_200(self):
        cf = continued_fraction(GOLDEN, 12)
        convergents = [pq for pq in cf.convergents if pq[1] <= 200]
        for p, q in convergents[1:]:
            err = abs(GOLDEN - p / q)
            for qq in range(1, q):
                pp = round(GOLDEN * qq)
                assert abs(GOLDEN - pp / qq) > err

    def test_input_domain(self):
        with pytest.raises(ValueError):
            continued_fraction(1.5, 5)


class TestPrimeApproximants:
    def test_golden_three_terms(self):
        seq = prime_denominator_approximants([GOLDEN], 4, 3)
        qs = list(seq.denominators)
        assert len(qs) == len(set(qs)) == 3
        errors = []
        for entry in seq.entries:
            p, q, err = entry[0]
            assert q > 4 and is_prime(q)
            assert err < 1.0 / q
            assert err == pytest.approx(abs(GOLDEN - p / q))
            errors.append(err)
        assert errors == sorted(errors, reverse=True)

    def test_choices_are_greedy_valid(self):
        # oracle: each chosen denominator is the first unused prime beating
        # the previous error
        seq = prime_denominator_approximants([GOLDEN], 4, 3)
        prev = math.inf
        last_q = 4
        for entry in seq.entries:
            p, q, err = entry[0]
            for cand in range(last_q + 1, q):
                if not is_prime(cand):
                    continue
                cand_err = abs(GOLDEN - round(GOLDEN * cand) / cand)
                assert not (cand_err < 1.0 / cand and cand_err < prev)
            prev = err
            last_q = q

    def test_cap_exhaustion(self):
        with pytest.raises(SearchExhausted):
            prime_denominator_approximants([GOLDEN], 1000, 1, cap=100)

    def test_two_dimensional(self):
        seq = prime_denominator_approximants([GOLDEN, np.sqrt(2) - 1], 8, 2)
        qs = list(seq.denominators)
        assert len(qs) == len(set(qs)) == 4
        assert all(is_prime(q) and q > 8 for q in qs)

    def test_certificates(self):
        seq = prime_denominator_approximants([GOLDEN], 4, 2)
        for entry in seq.certificates():
            for cert in entry:
                assert cert["prime"]
                assert cert["exceeds_degree_bound"]
                assert cert["error_below_1_over_q"]


class TestQuotientValues:
    def test_golden_prefix(self):
        x = value_from_quotients([1] * 40)
        assert abs(float(x) - GOLDEN) < 1e-15

    def test_matches_convergent(self):
        x = value_from_quotients([4, 4, 6])
        cf = continued_fraction(x, 3)
        assert cf.convergents[-1] == (x.numerator, x.denominator)
