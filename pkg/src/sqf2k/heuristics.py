"""A-priori exponent probabilities at certified high precision.

Model: for odd n, the events "n - 2^k is squarefree" across k are treated
as independent across prime-square moduli. The joint density that a given
set of back-offsets n - 2^(a_1), ..., n - 2^(a_s) are all squarefree
depends only on s and on how many residues the a_i occupy mod 6 (powers
of two repeat mod 9 with period 6, which couples the p = 3 factor). All
products over primes are truncated at a limit m and carry the proven
multiplicative error certificate |1 - f| < k^3*m^-5/5 for the dropped tail.

Everything is computed in MPFR at >= 40 significant digits; the binary
precision includes guard bits so accumulated rounding over the ~6*10^5
prime factors at m = 10^7 stays far below the last reported digit.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass

import gmpy2
import numpy as np
from gmpy2 import mpfr

from sqf2k.primes import PrimeTable, generate_primes

DEFAULT_PRIME_LIMIT = 10**7
DEFAULT_DIGITS = 40
MIN_DIGITS = 40
GUARD_BITS = 32

# The exclusion step of the model is valid only up to l = 20: the residues
# 2^1..2^l mod 6 drive the p = 3 correction, and the first l where a new
# kind of prime-square collision appears among 2^l - 1 is 20. Larger l is
# a hard error, never an extrapolation.
L_MAX = 20
# The p = 3 factor of the full density is 1 - l/9, positive only for l <= 8.
D_FULL_MAX = 8


def _bits(digits: int) -> int:
    return math.ceil(digits * math.log2(10)) + GUARD_BITS


@contextmanager
def working_precision(digits: int):
    """Temporarily raise the MPFR context precision to cover `digits`."""
    ctx = gmpy2.get_context()
    saved = ctx.precision
    ctx.precision = _bits(digits)
    try:
        yield
    finally:
        ctx.precision = saved


def _check_args(m: int, digits: int) -> None:
    if m <= 5:
        raise ValueError(f"prime limit m must exceed 5, got {m}")
    if digits < MIN_DIGITS:
        raise ValueError(f"need at least {MIN_DIGITS} significant digits, got {digits}")


def _odd_prime_range(m: int, primes: PrimeTable | None) -> list[int]:
    """Primes 5 <= p <= m as Python ints."""
    if primes is None or not primes.covers(m):
        primes = generate_primes(m)
    arr = primes.primes
    lo = int(np.searchsorted(arr, 5))
    hi = int(np.searchsorted(arr, m, side="right"))
    return [int(p) for p in arr[lo:hi]]


@dataclass(frozen=True)
class CertifiedValue:
    """A value with a multiplicative error certificate:
    the true quantity is value*f for some f with |1 - f| < rel_bound."""

    value: mpfr
    rel_bound: mpfr


@dataclass(frozen=True)
class HeuristicConstants:
    """The constants of the probability model at one (m, digits) setting.

    d_prime[k]: joint density of k back-offsets in distinct residue
    classes mod 6, k = 1..l_max (d_prime[1] is closed-form).
    d[l]: the same with the p = 3 exclusion factor 1 - l/9, l <= 8.
    c[l]: probability that at least one of the first l back-offsets is
    squarefree; c[0] = 0.
    """

    prime_limit: int
    digits: int
    l_max: int
    d_prime: dict[int, mpfr]
    d: dict[int, mpfr]
    c: dict[int, mpfr]
    error_bound: mpfr  # worst per-product certificate: l_max^3 * m^-5 / 5


def euler_partial_product(
    a: int, m: int, primes: PrimeTable | None = None, digits: int = DEFAULT_DIGITS
) -> mpfr:
    """Inverse-form truncated Euler product over 5 <= p <= m:
    the product of (1 - p^-a)^(-1), for a in {2, 4}."""
    if a not in (2, 4):
        raise ValueError(f"exponent a must be 2 or 4, got {a}")
    if m < 5:
        raise ValueError(f"prime limit m must be at least 5, got {m}")
    _check_args(max(m, 6), digits)
    ps = _odd_prime_range(m, primes)
    with working_precision(digits):
        one = mpfr(1)
        acc = mpfr(1)
        for p in ps:
            inv = one / mpfr(p * p)
            acc *= one - (inv if a == 2 else inv * inv)
        return one / acc


def _truncated_products(
    m: int, ks: list[int], primes: PrimeTable | None
) -> tuple[mpfr, mpfr, dict[int, mpfr]]:
    """One pass over primes 5 <= p <= m collecting P_2, P_4 (inverse form)
    and the joint tails prod(1 - k/p^2) for each requested k.

    Caller must hold the working precision.
    """
    ps = _odd_prime_range(m, primes)
    one = mpfr(1)
    p2 = mpfr(1)
    p4 = mpfr(1)
    tails = {k: mpfr(1) for k in ks}
    for p in ps:
        inv = one / mpfr(p * p)
        p2 *= one - inv
        p4 *= one - inv * inv
        for k in ks:
            tails[k] *= one - k * inv
    return one / p2, one / p4, tails


def _d_prime_from_products(k: int, p2: mpfr, p4: mpfr, tail: mpfr) -> mpfr:
    pi2 = gmpy2.const_pi() ** 2
    pairs = math.comb(k, 2)
    base = 9 / pi2
    pair_factor = mpfr(486) / (5 * pi2 * pi2)
    return base**k * pair_factor**pairs * p2**k * p4**pairs * tail


def d_prime(
    k: int, m: int = DEFAULT_PRIME_LIMIT, primes: PrimeTable | None = None,
    digits: int = DEFAULT_DIGITS,
) -> CertifiedValue:
    """Joint density of k back-offsets in distinct residue classes mod 6,
    truncated at prime limit m, with certificate |1 - f| < k^3*m^-5/5.

    The dropped factor per prime p > m is
    (1 - k/p^2) / ((1 - 1/p^2)^k (1 - 1/p^4)^C(k,2)); with x = 1/p^2 its
    log is sum_{j>=3} a_j x^j where |a_j| <= k^j/3 (the x and x^2 terms
    cancel exactly), so |log f| < sum_{p>m} (k/p^2)^3 / (3 (1 - k/m^2))
    <= 0.15 k^3 m^-5 for k <= 20 and m >= 6, whence |1 - f| < k^3 m^-5/5.
    The bound must grow like k^3: a flat constant would be violated from
    k = 4 on, observably so when comparing runs at different m.

    k = 1 is excluded here: d_prime[1] = 9/pi^2 is closed-form and exact.
    """
    if not 2 <= k <= L_MAX:
        raise ValueError(f"k must be in 2..{L_MAX}, got {k}")
    _check_args(m, digits)
    with working_precision(digits):
        p2, p4, tails = _truncated_products(m, [k], primes)
        value = _d_prime_from_products(k, p2, p4, tails[k])
        return CertifiedValue(value, mpfr(k) ** 3 / (5 * mpfr(m) ** 5))


def d_full(l: int, d_prime_values: dict[int, mpfr], digits: int = DEFAULT_DIGITS) -> mpfr:
    """Full density including the p = 3 exclusion factor: (1 - l/9)*d'_l.

    Defined only for l <= 8; the factor is <= 0 beyond that.
    """
    if not 1 <= l <= D_FULL_MAX:
        raise ValueError(f"l must be in 1..{D_FULL_MAX}, got {l}")
    with working_precision(digits):
        return (1 - mpfr(l) / 9) * d_prime_values[l]


def subset_profile(l: int) -> dict[tuple[int, int], int]:
    """Counts of nonempty subsets I of {1..l} by (|I|, |I mod 6|).

    Dynamic programming over the six residue classes: class j holds the
    i in 1..l with i == j (mod 6); choosing a_j elements from each class
    contributes size sum(a_j) and occupies r = #{j : a_j >= 1} classes.
    """
    if not 1 <= l <= L_MAX:
        raise ValueError(f"l must be in 1..{L_MAX}, got {l}")
    sizes = [0] * 6
    for i in range(1, l + 1):
        sizes[i % 6] += 1
    profile: dict[tuple[int, int], int] = {(0, 0): 1}
    for class_size in sizes:
        nxt: dict[tuple[int, int], int] = {}
        for (s, r), count in profile.items():
            for a in range(class_size + 1):
                key = (s + a, r + (1 if a else 0))
                nxt[key] = nxt.get(key, 0) + count * math.comb(class_size, a)
        profile = nxt
    profile.pop((0, 0))
    return profile


def c_small(l: int, d_values: dict[int, mpfr], digits: int = DEFAULT_DIGITS) -> mpfr:
    """Probability of at least one squarefree back-offset among the first
    l, via the alternating binomial sum over the full densities d_j.

    Valid only while all residues mod 6 are distinct, i.e. l <= 6.
    """
    if not 1 <= l <= 6:
        raise ValueError(f"l must be in 1..6, got {l}")
    with working_precision(digits):
        acc = mpfr(0)
        for j in range(1, l + 1):
            term = math.comb(l, j) * d_values[j]
            acc += term if j % 2 else -term
        return acc


def c_large(
    l: int, d_prime_values: dict[int, mpfr], digits: int = DEFAULT_DIGITS
) -> mpfr:
    """Probability of at least one squarefree back-offset among the first
    l, for any l <= 20: inclusion-exclusion over the subset profile, with
    each (s, r) cell weighted by (1 - r/9)*d'_s."""
    if not 1 <= l <= L_MAX:
        raise ValueError(f"l must be in 1..{L_MAX}, got {l}")
    with working_precision(digits):
        one = mpfr(1)
        acc = mpfr(0)
        for (s, r), count in sorted(subset_profile(l).items()):
            term = count * (one - mpfr(r) / 9) * d_prime_values[s]
            acc += term if s % 2 else -term
        return acc


def compute_constants(
    l_max: int = L_MAX,
    m: int = DEFAULT_PRIME_LIMIT,
    digits: int = DEFAULT_DIGITS,
    primes: PrimeTable | None = None,
) -> HeuristicConstants:
    """Compute d', d, and c for 1..l_max in a single pass over the primes."""
    if not 1 <= l_max <= L_MAX:
        raise ValueError(f"l_max must be in 1..{L_MAX}, got {l_max}")
    _check_args(m, digits)
    with working_precision(digits):
        pi2 = gmpy2.const_pi() ** 2
        dp: dict[int, mpfr] = {1: 9 / pi2}
        if l_max >= 2:
            p2, p4, tails = _truncated_products(m, list(range(2, l_max + 1)), primes)
            for k in range(2, l_max + 1):
                dp[k] = _d_prime_from_products(k, p2, p4, tails[k])
        d = {l: (1 - mpfr(l) / 9) * dp[l] for l in range(1, min(D_FULL_MAX, l_max) + 1)}
        c = {0: mpfr(0)}
        for l in range(1, l_max + 1):
            c[l] = c_large(l, dp, digits)
        return HeuristicConstants(
            prime_limit=m,
            digits=digits,
            l_max=l_max,
            d_prime=dp,
            d=d,
            c=c,
            error_bound=mpfr(max(l_max, 2)) ** 3 / (5 * mpfr(m) ** 5),
        )


def expected_exponent(constants: HeuristicConstants) -> mpfr:
    """Mean of the smallest exponent under the model, truncated so that
    everything unresolved past l_max resolves at l_max + 1."""
    c = constants.c
    top = constants.l_max
    with working_precision(constants.digits):
        acc = mpfr(0)
        for k in range(1, top + 1):
            acc += k * (c[k] - c[k - 1])
        return acc + (top + 1) * (1 - c[top])


def exponent_sd(constants: HeuristicConstants) -> mpfr:
    """Standard deviation of the smallest exponent in a single instance."""
    c = constants.c
    top = constants.l_max
    with working_precision(constants.digits):
        mean = expected_exponent(constants)
        acc = mpfr(0)
        for k in range(1, top + 1):
            acc += k * k * (c[k] - c[k - 1])
        acc += (top + 1) ** 2 * (1 - c[top])
        return gmpy2.sqrt(acc - mean * mean)


def _sample_count(upper: int, convention: str) -> int:
    # number of odd n with 1 < n < upper: "half" approximates it by
    # upper/2 (reproduces the reference figures); "exact" counts exactly
    if convention == "half":
        return upper // 2
    if convention == "exact":
        return (upper - 2) // 2
    raise ValueError(f"unknown convention {convention!r}")


def expected_sum(
    upper: int, constants: HeuristicConstants, convention: str = "half"
) -> mpfr:
    """Expected sum of smallest exponents over all odd 1 < n < upper."""
    if upper < 2:
        raise ValueError(f"upper must be at least 2, got {upper}")
    with working_precision(constants.digits):
        return expected_exponent(constants) * _sample_count(upper, convention)


def sigma_sum(
    upper: int, constants: HeuristicConstants, convention: str = "half"
) -> mpfr:
    """Standard deviation of that sum (independent instances)."""
    if upper < 2:
        raise ValueError(f"upper must be at least 2, got {upper}")
    with working_precision(constants.digits):
        return exponent_sd(constants) * gmpy2.sqrt(_sample_count(upper, convention))


# -- decimal formatting -------------------------------------------------------


def format_sig(x, digits: int) -> str:
    """Normalized scientific notation with `digits` significant digits,
    correctly rounded from the MPFR value (float formatting would lose
    digits past 17)."""
    if digits < 1:
        raise ValueError("need at least one digit")
    # mpfr(x) under the ambient context would re-round a higher-precision
    # value; convert only non-mpfr inputs, at a precision that keeps them
    # exact.
    if isinstance(x, int):
        x = mpfr(x, precision=max(x.bit_length() + 1, 53))
    elif not isinstance(x, mpfr):
        x = mpfr(x, precision=53)
    if gmpy2.is_zero(x):
        return "0." + "0" * (digits - 1) + "e+00"
    mantissa, exp10, _ = gmpy2.digits(x, 10, digits)
    sign = ""
    if mantissa.startswith("-"):
        sign, mantissa = "-", mantissa[1:]
    # gmpy2 returns value = 0.mantissa * 10^exp10
    e = exp10 - 1
    body = mantissa[0] + ("." + mantissa[1:] if digits > 1 else "")
    return f"{sign}{body}e{e:+03d}"


def format_fixed(x, decimals: int) -> str:
    """Fixed-point with `decimals` places; adequate for display columns."""
    return f"{float(mpfr(x)):.{decimals}f}"


def render_tables(constants: HeuristicConstants, fmt: str = "text") -> str:
    """The density table (l <= 6) and, when l_max > 6, the distribution
    table, with a footer stating m, precision, and the certificate."""
    k = constants
    one = mpfr(1)
    footer = (
        f"m = {k.prime_limit}, {k.digits} significant digits, "
        f"certificate |1-f| < l^3*m^-5/5 <= {format_sig(k.error_bound, 3)}"
    )
    with working_precision(k.digits):
        if fmt == "csv":
            lines = ["l,d_l,c_l,one_minus_c_l"]
            for l in range(1, min(6, k.l_max) + 1):
                lines.append(
                    f"{l},{format_sig(k.d[l], 40)},{format_sig(k.c[l], 40)},"
                    f"{format_sig(one - k.c[l], 40)}"
                )
            if k.l_max > 6:
                lines.append("")
                lines.append("l,one_minus_c_l,c_l_minus_c_prev")
                for l in range(1, k.l_max + 1):
                    lines.append(
                        f"{l},{format_sig(one - k.c[l], 40)},"
                        f"{format_sig(k.c[l] - k.c[l - 1], 40)}"
                    )
            lines.append("")
            lines.append(f"# {footer}")
            return "\n".join(lines) + "\n"
        if fmt != "text":
            raise ValueError(f"unknown format {fmt!r}")
        lines = ["  l  d_l       c_l       1-c_l"]
        for l in range(1, min(6, k.l_max) + 1):
            lines.append(
                f"{l:>3}  {format_fixed(k.d[l], 6)}  {format_fixed(k.c[l], 6)}"
                f"  {format_sig(one - k.c[l], 5)}"
            )
        if k.l_max > 6:
            lines.append("")
            lines.append("  l  1-c_l         c_l - c_(l-1)")
            for l in range(1, k.l_max + 1):
                lines.append(
                    f"{l:>3}  {format_sig(one - k.c[l], 5)}"
                    f"  {format_sig(k.c[l] - k.c[l - 1], 5)}"
                )
        lines.append("")
        lines.append(footer)
        return "\n".join(lines) + "\n"
