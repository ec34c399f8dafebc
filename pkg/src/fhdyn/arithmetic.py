"""Diophantine toolbox: torus norm, joint arithmetic-condition checker,
continued fractions, and prime-denominator rational approximants.

All checkers are finite-range: they report measured margins and witnesses,
never membership claims about the underlying infinite conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import SearchExhausted


def torus_norm(x):
    """Distance from ``x`` to the nearest integer, in [0, 1/2].

    Computed as ``|x - round(x)|`` so that ``torus_norm(-x)`` agrees
    bit-exactly.  Accepts floats, numpy arrays and
    :class:`fractions.Fraction`; Fractions are handled exactly and return a
    Fraction.
    """
    if isinstance(x, Fraction):
        frac = x - math.floor(x)
        return min(frac, 1 - frac)
    arr = np.asarray(x, dtype=float)
    out = np.abs(arr - np.round(arr))
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


@dataclass(frozen=True)
class DiophantineReport:
    """Finite-range margin scan for the joint condition on ``(alpha, beta)``.

    ``min_margin`` is the minimum of ``||n.alpha - j*beta|| * (|n| + j)^(2+tau)``
    over the tested range, attained at ``witness = (n, j)``.
    """

    alpha: tuple
    beta: float
    c: float
    tau: float
    range_r: int
    min_margin: float
    witness: tuple
    passed: bool

    def to_obj(self):
        n, j = self.witness
        return {
            "alpha": list(self.alpha),
            "beta": self.beta,
            "c": self.c,
            "tau": self.tau,
            "range": self.range_r,
            "min_margin": self.min_margin,
            "witness": {"n": list(n), "j": j},
            "verdict": "pass" if self.passed else "fail",
        }


def _margin(alpha, beta, n, j, tau):
    height = max(abs(v) for v in n) + j
    return torus_norm(float(np.dot(n, alpha)) - j * beta) * height ** (2.0 + tau)


def check_cd(alpha, beta, c, tau, R):
    """Exhaustive margin scan over ``1 <= |n| + j <= R`` with ``j >= 0``.

    The pair ``(n, j) = (0, 0)`` is excluded (its norm vanishes identically);
    iteration order is ``j`` ascending, then ``n`` lexicographic, and ties
    keep the earliest witness.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = float(beta)
    R = int(R)
    if R < 1:
        raise ValueError("range must be >= 1")
    d = alpha.shape[0]
    best = math.inf
    witness = None
    for j in range(0, R + 1):
        box = R - j
        if d == 1:
            ns = np.arange(-box, box + 1)
            if j == 0:
                ns = ns[ns != 0]
            if not ns.size:
                continue
            heights = np.abs(ns) + j
            margins = torus_norm(ns * alpha[0] - j * beta) * heights ** (2.0 + tau)
            kept = heights >= 1
            if not np.any(kept):
                continue
            idx = int(np.argmin(np.where(kept, margins, np.inf)))
            if margins[idx] < best:
                best = float(margins[idx])
                witness = ((int(ns[idx]),), j)
        else:
            for n in _lattice_box(d, box):
                if j == 0 and all(v == 0 for v in n):
                    continue
                if max(abs(v) for v in n) + j < 1:
                    continue
                m = _margin(alpha, beta, n, j, tau)
                if m < best:
                    best = m
                    witness = (n, j)
    return DiophantineReport(
        alpha=tuple(float(a) for a in alpha),
        beta=beta,
        c=float(c),
        tau=float(tau),
        range_r=R,
        min_margin=best,
        witness=witness,
        passed=best > c,
    )


def _lattice_box(d, box):
    rng = range(-box, box + 1)
    for flat in np.ndindex(*([2 * box + 1] * d)):
        yield tuple(rng[v] for v in flat)


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients and convergents of a number in (0, 1)."""

    value: float
    quotients: tuple
    convergents: tuple  # ((p, q), ...)
    rational_input: bool

    @property
    def denominators(self):
        return tuple(q for _, q in self.convergents)

    def to_obj(self):
        return {
            "value": self.value,
            "quotients": list(self.quotients),
            "convergents": [[p, q] for p, q in self.convergents],
            "rational_input": self.rational_input,
        }


def continued_fraction(x, K, *, eps=1e-12):
    """Standard expansion of ``x`` in (0, 1) with up to ``K`` quotients.

    Fractions expand exactly; floats stop once the remainder is numerically
    indistinguishable from rational (flagged, not fatal).  Convergents obey
    ``|x - p_k/q_k| < 1/(q_k q_{k+1})``.
    """
    exact = isinstance(x, Fraction)
    x0 = x
    xf = float(x)
    if not 0.0 < xf < 1.0:
        raise ValueError("x must lie in (0, 1)")
    quotients = []
    convergents = []
    p_prev, q_prev = 1, 0
    p_cur, q_cur = 0, 1
    rational = False
    rem = x0
    for _ in range(int(K)):
        inv = (Fraction(1, 1) / rem) if exact else 1.0 / rem
        a = int(inv) if exact else int(math.floor(inv))
        frac = inv - a
        quotients.append(a)
        p_prev, p_cur = p_cur, a * p_cur + p_prev
        q_prev, q_cur = q_cur, a * q_cur + q_prev
        convergents.append((p_cur, q_cur))
        if exact:
            if frac == 0:
                rational = True
                break
        else:
            if frac < eps:
                rational = True
                break
            # below the float resolution of x further quotients are noise
            if q_cur > 1.0 / math.sqrt(eps):
                break
        rem = frac
    return ContinuedFraction(
        value=xf,
        quotients=tuple(quotients),
        convergents=tuple(convergents),
        rational_input=rational,
    )


def value_from_quotients(quotients):
    """Exact value of the continued fraction ``[0; a1, a2, ...]``."""
    acc = Fraction(0)
    for a in reversed([int(a) for a in quotients]):
        acc = Fraction(1, 1) / (a + acc)
    return acc


@dataclass(frozen=True)
class ApproximantSequence:
    """Rational approximant vectors with certified prime denominators."""

    alpha: tuple
    degree_bound: int
    entries: tuple  # per entry: tuple over components of (p, q, error)

    @property
    def denominators(self):
        return tuple(q for entry in self.entries for _, q, _ in entry)

    def vectors(self):
        return [
            tuple(Fraction(p, q) for p, q, _ in entry) for entry in self.entries
        ]

    def to_rows(self):
        rows = []
        for k, entry in enumerate(self.entries):
            for p, q, err in entry:
                rows.append((k, p, q, float(err)))
        return rows

    def certificates(self):
        """Per-entry primality (trial division) and degree-bound witnesses."""
        out = []
        for entry in self.entries:
            out.append(
                tuple(
                    {
                        "q": q,
                        "prime": is_prime(q),
                        "exceeds_degree_bound": q > self.degree_bound,
                        "error_below_1_over_q": err < 1.0 / q,
                    }
                    for _, q, err in entry
                )
            )
        return out


def _sieve(limit):
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, int(limit**0.5) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return np.flatnonzero(flags)


def is_prime(q):
    if q < 2:
        return False
    for p in range(2, int(q**0.5) + 1):
        if q % p == 0:
            return False
    return True


def prime_denominator_approximants(alpha, degree_bound, count, *, cap=1_000_000):
    """Rational vectors ``p/q`` with distinct prime ``q > degree_bound``.

    Componentwise errors are below ``1/q`` and strictly decrease along the
    sequence.  Raises ``SearchExhausted`` when no prime denominator below
    ``cap`` can meet the accuracy requirement.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    d = alpha.shape[0]
    degree_bound = int(degree_bound)
    for comp in alpha:
        cf = continued_fraction(float(np.mod(comp, 1.0)), 40)
        if cf.rational_input and cf.denominators and cf.denominators[-1] <= degree_bound:
            raise ValueError("alpha component is rational at floating tolerance")
    primes = _sieve(cap)
    primes = primes[primes > degree_bound]
    if not primes.size:
        raise SearchExhausted(
            f"no prime above degree bound {degree_bound} within cap {cap}"
        )
    used = set()
    prev_err = [math.inf] * d
    entries = []
    cursor = 0
    for _ in range(int(count)):
        entry = []
        for comp_idx in range(d):
            target = alpha[comp_idx]
            found = None
            for q in primes[cursor:]:
                q = int(q)
                if q in used:
                    continue
                p = int(round(target * q))
                err = abs(target - p / q)
                if err < 1.0 / q and err < prev_err[comp_idx]:
                    found = (p, q, err)
                    break
            if found is None:
                raise SearchExhausted(
                    f"no prime denominator below {cap} beats error "
                    f"{prev_err[comp_idx]:.3e} for component {comp_idx}"
                )
            used.add(found[1])
            prev_err[comp_idx] = found[2]
            entry.append(found)
        entries.append(tuple(entry))
    return ApproximantSequence(
        alpha=tuple(float(a) for a in alpha),
        degree_bound=degree_bound,
        entries=tuple(entries),
    )
