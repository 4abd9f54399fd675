"""Degree-bound calculators.

Every formula is asymptotic with unknown absolute constants; here those
constants default to 1 and results are shapes for comparison, not levels that
are guaranteed to suffice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

from .errors import InvalidParameter
from .poly import MultiPoly

CONSTANT_FREE = "constant-free shape"


@dataclass(frozen=True)
class BoundInputs:
    n: int = 1
    r: int = 1
    d_g: int = 1
    d_f: int = 1
    epsilon_f: float = 1.0
    L: float = 1.0
    c: float = 1.0
    norm_f: float = 1.0
    t: int = 1
    epsilon: float = 1.0
    ell: float = 1.0

    def validate(self) -> "BoundInputs":
        checks = [
            (self.n >= 1, "n >= 1"),
            (self.r >= 1, "r >= 1"),
            (self.d_g >= 1, "d_g >= 1"),
            (self.d_f >= 1, "d_f >= 1"),
            (0 < self.epsilon_f <= 1, "0 < epsilon_f <= 1"),
            (self.L >= 1, "L >= 1"),
            (self.c >= 1, "c >= 1"),
            (self.norm_f > 0, "norm_f > 0"),
            (self.t >= 1, "t >= 1"),
            (self.epsilon > 0, "epsilon > 0"),
            (self.ell > 0, "ell > 0"),
        ]
        bad = [msg for ok, msg in checks if not ok]
        if bad:
            raise InvalidParameter("invalid bound inputs: " + ", ".join(bad))
        return self

    def with_(self, **changes) -> "BoundInputs":
        return replace(self, **changes)


def _exponent(inp: BoundInputs) -> float:
    """The recurring exponent 2.5 n L."""
    return 2.5 * inp.n * inp.L


def gamma(inp: BoundInputs, const: float = 1.0) -> float:
    """Prefactor n^3 2^(5nL) r^n c^(2n) d_g^n shared by the simplified bounds."""
    inp.validate()
    n, L = inp.n, inp.L
    return const * n ** 3 * 2.0 ** (5 * n * L) * inp.r ** n * inp.c ** (2 * n) * inp.d_g ** n


def gamma_prime(inp: BoundInputs, const: float = 1.0) -> float:
    return 3.0 ** _exponent(inp) * gamma(inp, const)


def gamma_double_prime(inp: BoundInputs, const: float = 1.0) -> float:
    return gamma_prime(inp, const) ** (1.0 / _exponent(inp))


def putinar_bound_simplified(inp: BoundInputs, const: float = 1.0) -> float:
    inp.validate()
    n, L = inp.n, inp.L
    return gamma(inp, const) * inp.d_f ** (3.5 * n * L) * inp.epsilon_f ** (-_exponent(inp))


def sharp_epsilon_exponent(n: int, L: float) -> float:
    return ((4 * L + 1) * n + 11 * L + 5) / 6.0


def putinar_bound_sharp(inp: BoundInputs, const: float = 1.0) -> float:
    inp.validate()
    n, L = inp.n, inp.L
    return (
        const
        * n ** 2.5
        * 2.0 ** ((4 * n + 11) * L / 2)
        * inp.r ** ((n + 5) / 6)
        * inp.c ** ((4 * n + 11) / 6)
        * inp.d_g ** ((n + 2) / 2)
        * inp.d_f ** ((4 * n + 11) * L / 3)
        * inp.epsilon_f ** (-sharp_epsilon_exponent(n, L))
    )


def weierstrass_bound(inp: BoundInputs, const: float = 1.0) -> float:
    """Level at which f - f* + epsilon lies in the truncated quadratic module."""
    inp.validate()
    if inp.epsilon > inp.norm_f:
        raise InvalidParameter("epsilon must not exceed norm_f")
    e = _exponent(inp)
    return gamma_prime(inp, const) * inp.d_f ** (3.5 * inp.n * inp.L) * (inp.norm_f / inp.epsilon) ** e


def lasserre_gap_bound(inp: BoundInputs, const: float = 1.0) -> float:
    """Bound on f* minus the level-ell relaxation value."""
    inp.validate()
    return gamma_double_prime(inp, const) * inp.norm_f * inp.d_f ** 1.4 * inp.ell ** (-1.0 / _exponent(inp))


@dataclass(frozen=True)
class MomentBound:
    ell: float
    min_level: int  # side condition ell >= 2t + ell0


def moment_bound(inp: BoundInputs, ell0: int = 2, const: float = 1.0) -> MomentBound:
    inp.validate()
    n, L, t = inp.n, inp.L, inp.t
    e = _exponent(inp)
    value = (
        gamma(inp, const)
        * 6.0 ** e
        * t ** (6 * n * L)
        * math.comb(n + t, t) ** e
        * inp.epsilon ** (-e)
    )
    return MomentBound(value, 2 * t + ell0)


def moment_epsilon_for_level(inp: BoundInputs, const: float = 1.0) -> float:
    """Accuracy guaranteed by the moment bound at level ``inp.ell`` (its inverse in epsilon)."""
    base = moment_bound(inp.with_(epsilon=1.0), const=const).ell
    return (base / inp.ell) ** (1.0 / _exponent(inp))


def tube_epsilon_for_level(inp: BoundInputs, const: float = 1.0) -> float:
    """Tube width for which truncated pseudo-moments of level ell are epsilon-close to nonnegative functionals."""
    inp.validate()
    n, L, t = inp.n, inp.L, inp.t
    e = _exponent(inp)
    base = gamma_prime(inp, const) * t ** (3.5 * n * L) * math.comb(n + t, t) ** (1.25 * n * L)
    return (base / inp.ell) ** (1.0 / e)


def laurent_slot_constant(n: int, d: int) -> float:
    return 2.0 * math.pi ** 2 * d ** 2 * (d + 1) ** n * n ** 3


def laurent_slot_bound(n: int, d: int, p_min: float, p_max: float) -> float:
    if n < 1 or d < 1:
        raise InvalidParameter("n and d must be >= 1")
    if p_min <= 0 or p_max < p_min:
        raise InvalidParameter("need 0 < p_min <= p_max")
    first = math.pi * d * math.sqrt(2 * n)
    second = math.sqrt(laurent_slot_constant(n, d) * (p_max - p_min) / p_min)
    return max(first, second)


def weighted_coefficient_norm(p: MultiPoly) -> float:
    """max |b_alpha| where p = sum b_alpha (|alpha|!/alpha!) X^alpha."""
    best = 0.0
    for alpha, c in p.items():
        multinom = math.factorial(sum(alpha))
        for a in alpha:
            multinom //= math.factorial(a)
        best = max(best, abs(c) / multinom)
    return best


def _comparison_ratio(inp: BoundInputs, norm_x: float, f_star: float) -> float:
    if f_star <= 0:
        raise InvalidParameter("f_star must be positive")
    return inp.d_f ** 2 * inp.n ** inp.d_f * norm_x / f_star


def nie_bound(inp: BoundInputs, norm_x: float, f_star: float, c_free: float = 1.0) -> float:
    return c_free * math.exp(_comparison_ratio(inp, norm_x, f_star) ** c_free)


def schweighofer_bound(inp: BoundInputs, norm_x: float, f_star: float, c_free: float = 1.0) -> float:
    return c_free * inp.d_f ** 2 * (1 + _comparison_ratio(inp, norm_x, f_star) ** c_free)


def loja_worst_case(n: int, r: int, d_g: int) -> float:
    if n < 1 or r < 1 or d_g < 1:
        raise InvalidParameter("n, r, d_g must be >= 1")
    return float(d_g * (6 * d_g - 3) ** (n + r - 1))


def perturbation_norm_order(inp: BoundInputs) -> float:
    """Growth order of the perturbed polynomial's max norm."""
    inp.validate()
    L = inp.L
    return inp.norm_f * 2.0 ** (3 * L) * inp.r * inp.c * inp.d_f ** (2 * L) * inp.epsilon_f ** (-L)


def perturbation_degree_order(inp: BoundInputs) -> float:
    """Growth order of the perturbed polynomial's degree."""
    inp.validate()
    L = inp.L
    return (
        2.0 ** (4 * L)
        * inp.r ** (1 / 3)
        * inp.c ** (4 / 3)
        * inp.d_g
        * inp.d_f ** (8 * L / 3)
        * inp.epsilon_f ** (-(4 * L + 1) / 3)
    )


def delta_from_lojasiewicz(epsilon_f: float, d_f: int, L: float, c: float) -> float:
    """Lower bound on the algebraic distance over the sublevel set."""
    return (1.0 / c) * (epsilon_f / (8.0 * d_f ** 2)) ** L


def distance_lower_bound(epsilon_f: float, d_f: int) -> float:
    return epsilon_f / (8.0 * d_f ** 2)


FORMULAS: dict[str, tuple[Callable[[BoundInputs], float], str]] = {
    "putinar_simplified": (
        putinar_bound_simplified,
        "n^3 2^(5nL) r^n c^(2n) d_g^n d_f^(3.5nL) eps_f^(-2.5nL)",
    ),
    "putinar_sharp": (
        putinar_bound_sharp,
        "n^2.5 2^((4n+11)L/2) r^((n+5)/6) c^((4n+11)/6) d_g^((n+2)/2) d_f^((4n+11)L/3) eps_f^(-((4L+1)n+11L+5)/6)",
    ),
    "weierstrass": (weierstrass_bound, "3^(2.5nL) gamma d_f^(3.5nL) norm_f^(2.5nL) eps^(-2.5nL)"),
    "lasserre_gap": (lasserre_gap_bound, "gamma'' norm_f d_f^1.4 ell^(-1/(2.5nL))"),
    "moment": (lambda inp: moment_bound(inp).ell, "gamma 6^(2.5nL) t^(6nL) C(n+t,t)^(2.5nL) eps^(-2.5nL)"),
    "perturbation_norm": (perturbation_norm_order, "norm_f 2^(3L) r c d_f^(2L) eps_f^(-L)"),
    "perturbation_degree": (
        perturbation_degree_order,
        "2^(4L) r^(1/3) c^(4/3) d_g d_f^(8L/3) eps_f^(-(4L+1)/3)",
    ),
}
