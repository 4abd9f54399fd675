"""Sparse multivariate and univariate polynomials, evaluation and box max-norms."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .errors import DegreeOverflow, DimensionMismatch, InvalidParameter

TERM_CAP = 10_000_000
GRID_BUDGET = 20_000_000

Exponent = tuple[int, ...]


def monomials_upto(nvars: int, degree: int) -> list[Exponent]:
    """All exponent vectors of total degree <= degree in graded-lex order."""
    if degree < 0:
        return []
    out: list[Exponent] = []
    for total in range(degree + 1):
        out.extend(_monomials_of_degree(nvars, total))
    return out


def _monomials_of_degree(nvars: int, total: int) -> list[Exponent]:
    if nvars == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        for rest in _monomials_of_degree(nvars - 1, total - first):
            out.append((first,) + rest)
    return out


def grlex_key(alpha: Exponent):
    return (sum(alpha), tuple(-a for a in alpha))


class MultiPoly:
    """Real polynomial in ``nvars`` variables stored as {exponent: coefficient}."""

    __slots__ = ("_terms", "nvars", "_arrays")

    def __init__(self, terms: Mapping[Sequence[int], float] | None = None, nvars: int | None = None):
        clean: dict[Exponent, float] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if any(a < 0 for a in alpha):
                raise InvalidParameter(f"negative exponent {alpha}")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        clean = {a: c for a, c in clean.items() if c != 0.0}
        if nvars is None:
            if not clean:
                raise InvalidParameter("nvars is required for the zero polynomial")
            nvars = len(next(iter(clean)))
        for alpha in clean:
            if len(alpha) != nvars:
                raise DimensionMismatch(f"exponent {alpha} does not have length {nvars}")
        self._terms = clean
        self.nvars = int(nvars)
        self._arrays = None

    # construction helpers
    @classmethod
    def const(cls, value: float, nvars: int) -> "MultiPoly":
        return cls({(0,) * nvars: value}, nvars)

    @classmethod
    def var(cls, index: int, nvars: int) -> "MultiPoly":
        alpha = [0] * nvars
        alpha[index] = 1
        return cls({tuple(alpha): 1.0}, nvars)

    @classmethod
    def monomial(cls, alpha: Sequence[int], coef: float = 1.0) -> "MultiPoly":
        return cls({tuple(alpha): coef}, len(alpha))

    @classmethod
    def variables(cls, nvars: int) -> list["MultiPoly"]:
        return [cls.var(i, nvars) for i in range(nvars)]

    @classmethod
    def _raw(cls, terms: dict[Exponent, float], nvars: int) -> "MultiPoly":
        p = cls.__new__(cls)
        p._terms = {a: c for a, c in terms.items() if c != 0.0}
        p.nvars = nvars
        p._arrays = None
        return p

    # basic accessors
    @property
    def terms(self) -> dict[Exponent, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coefficient(self, alpha: Sequence[int]) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    @property
    def degree(self) -> int:
        if not self._terms:
            return 0
        return max(sum(a) for a in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def coeff_norm(self, ord: float = np.inf) -> float:
        if not self._terms:
            return 0.0
        return float(np.linalg.norm(np.fromiter(self._terms.values(), float), ord))

    # arithmetic
    def _check(self, other: "MultiPoly"):
        if other.nvars != self.nvars:
            raise DimensionMismatch(f"{self.nvars} vs {other.nvars} variables")

    def _lift(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer, Fraction)):
            return MultiPoly.const(float(other), self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for a, c in other._terms.items():
            out[a] = out.get(a, 0.0) + c
        return MultiPoly._raw(out, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly._raw({a: -c for a, c in self._terms.items()}, self.nvars)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer, Fraction)):
            s = float(other)
            return MultiPoly._raw({a: c * s for a, c in self._terms.items()}, self.nvars)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        self._check(other)
        if len(self._terms) * len(other._terms) > TERM_CAP:
            raise DegreeOverflow("product exceeds the term cap")
        out: dict[Exponent, float] = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                key = tuple(x + y for x, y in zip(a, b))
                out[key] = out.get(key, 0.0) + ca * cb
        return MultiPoly._raw(out, self.nvars)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / float(other))

    def __pow__(self, power: int):
        if power < 0 or int(power) != power:
            raise InvalidParameter("only nonnegative integer powers")
        result = MultiPoly.const(1.0, self.nvars)
        base = self
        power = int(power)
        while power:
            if power & 1:
                result = result * base
            power >>= 1
            if power:
                base = base * base
        return result

    def __eq__(self, other):
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self._terms.items())))

    def allclose(self, other: "MultiPoly", atol: float = 1e-12) -> bool:
        return (self - other).coeff_norm() <= atol

    def diff(self, index: int) -> "MultiPoly":
        out = {}
        for a, c in self._terms.items():
            if a[index]:
                b = list(a)
                b[index] -= 1
                out[tuple(b)] = c * a[index]
        return MultiPoly._raw(out, self.nvars)

    def scale_variables(self, factor: float) -> "MultiPoly":
        """Return p(factor * X)."""
        return MultiPoly._raw({a: c * factor ** sum(a) for a, c in self._terms.items()}, self.nvars)

    def sorted_terms(self) -> list[tuple[Exponent, float]]:
        return sorted(self._terms.items(), key=lambda t: grlex_key(t[0]))

    # evaluation
    def _exp_arrays(self):
        if self._arrays is None:
            if self._terms:
                exps = np.array(list(self._terms.keys()), dtype=np.int64)
                coefs = np.array(list(self._terms.values()), dtype=float)
            else:
                exps = np.zeros((0, self.nvars), dtype=np.int64)
                coefs = np.zeros(0)
            self._arrays = (exps, coefs)
        return self._arrays

    def __call__(self, x):
        return evaluate(self, x)

    # serialization
    def to_dict(self) -> dict:
        return {
            "nvars": self.nvars,
            "terms": [{"exp": list(a), "coef": c} for a, c in self.sorted_terms()],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MultiPoly":
        try:
            nvars = int(data["nvars"])
            terms: dict[Exponent, float] = {}
            for t in data["terms"]:
                alpha = tuple(int(e) for e in t["exp"])
                terms[alpha] = terms.get(alpha, 0.0) + float(t["coef"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParameter(f"malformed polynomial JSON: {exc}") from exc
        return cls(terms, nvars)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MultiPoly":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for a, c in self.sorted_terms():
            mono = "*".join(
                f"X{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(a) if e
            )
            parts.append(f"{c:+.6g}" + (f"*{mono}" if mono else ""))
        return " ".join(parts)


def evaluate(p: MultiPoly, x) -> float | np.ndarray:
    """Evaluate p at a point (shape (n,)) or at a batch of points (shape (N, n))."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    pts = arr.reshape(1, -1) if single else arr
    if arr.ndim == 0 or pts.shape[1] != p.nvars:
        raise DimensionMismatch(f"point of dimension {pts.shape[-1] if arr.ndim else 0} for {p.nvars} variables")
    exps, coefs = p._exp_arrays()
    out = np.zeros(len(pts))
    if len(coefs):
        chunk = max(1, 2_000_000 // max(1, len(coefs)))
        for start in range(0, len(pts), chunk):
            block = pts[start:start + chunk]
            vals = np.ones((len(block), len(coefs)))
            for j in range(p.nvars):
                ej = exps[:, j]
                top = int(ej.max())
                if top:
                    # power table by repeated multiplication, then gather
                    table = np.empty((len(block), top + 1))
                    table[:, 0] = 1.0
                    for e in range(1, top + 1):
                        table[:, e] = table[:, e - 1] * block[:, j]
                    vals *= table[:, ej]
            out[start:start + chunk] = vals @ coefs
    return float(out[0]) if single else out


def gradient(p: MultiPoly) -> tuple[MultiPoly, ...]:
    return tuple(p.diff(i) for i in range(p.nvars))


# univariate polynomials

@lru_cache(maxsize=None)
def _chebyshev_table(degree: int) -> tuple[tuple[int, ...], ...]:
    """Integer monomial coefficients of T_0..T_degree."""
    rows = [(1,), (0, 1)]
    for j in range(2, degree + 1):
        prev, prev2 = rows[-1], rows[-2]
        row = [0] * (j + 1)
        for i, c in enumerate(prev):
            row[i + 1] += 2 * c
        for i, c in enumerate(prev2):
            row[i] -= c
        rows.append(tuple(row))
    return tuple(rows[: degree + 1])


def _as_fraction(c) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(float(c))


class UniPoly:
    """Univariate polynomial tagged with its basis ("monomial" or "chebyshev").

    Basis conversions are carried out in exact rational arithmetic on the
    stored coefficients, so a round trip returns the input unchanged.
    """

    __slots__ = ("coeffs", "basis")

    def __init__(self, coeffs: Iterable, basis: str = "monomial"):
        if basis not in ("monomial", "chebyshev"):
            raise InvalidParameter(f"unknown basis {basis!r}")
        cs = list(coeffs)
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        self.coeffs = tuple(cs) if cs else (0.0,)
        self.basis = basis

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def float_coeffs(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs])

    def __call__(self, t):
        c = self.float_coeffs()
        if self.basis == "chebyshev":
            return npcheb.chebval(t, c)
        return np.polynomial.polynomial.polyval(t, c)

    def to_monomial(self) -> "UniPoly":
        if self.basis == "monomial":
            return self
        table = _chebyshev_table(self.degree)
        out = [Fraction(0)] * (self.degree + 1)
        for j, c in enumerate(self.coeffs):
            c = _as_fraction(c)
            if c:
                for i, t in enumerate(table[j]):
                    if t:
                        out[i] += c * t
        return UniPoly(out, "monomial")

    def to_chebyshev(self) -> "UniPoly":
        if self.basis == "chebyshev":
            return self
        d = self.degree
        out = [Fraction(0)] * (d + 1)
        for i, a in enumerate(self.coeffs):
            a = _as_fraction(a)
            if not a:
                continue
            # X^i = 2^(1-i) * sum_k binom(i,k) T_{i-2k}, middle term halved
            scale = Fraction(1, 2 ** (i - 1)) if i else Fraction(1)
            for k in range(i // 2 + 1):
                w = Fraction(math.comb(i, k))
                if i and 2 * k == i:
                    w /= 2
                out[i - 2 * k] += a * scale * w if i else a
        return UniPoly(out, "chebyshev")

    def as_multipoly(self, nvars: int = 1, index: int = 0) -> MultiPoly:
        mono = self.to_monomial()
        terms = {}
        for i, c in enumerate(mono.coeffs):
            alpha = [0] * nvars
            alpha[index] = i
            terms[tuple(alpha)] = float(c)
        return MultiPoly(terms, nvars)

    def __repr__(self):
        return f"UniPoly({[float(c) for c in self.coeffs]}, basis={self.basis!r})"


def _expanded_term_bound(nvars: int, degree: int) -> int:
    return math.comb(nvars + degree, nvars)


def compose_univariate(h: UniPoly, g: MultiPoly, term_cap: int = TERM_CAP) -> MultiPoly:
    """Expand h(g). Chebyshev-basis inputs use a Clenshaw recurrence in polynomial arithmetic."""
    target_degree = h.degree * g.degree
    if _expanded_term_bound(g.nvars, target_degree) > term_cap:
        raise DegreeOverflow(
            f"h(g) of degree {target_degree} in {g.nvars} variables exceeds the {term_cap} term cap"
        )
    one = MultiPoly.const(1.0, g.nvars)
    c = h.float_coeffs()
    if h.basis == "monomial":
        acc = MultiPoly.const(c[-1], g.nvars)
        for a in c[-2::-1]:
            acc = acc * g + a
        return acc
    # Clenshaw: b_k = c_k + 2 g b_{k+1} - b_{k+2}; result = c_0 + g b_1 - b_2
    b1 = MultiPoly.const(0.0, g.nvars)
    b2 = MultiPoly.const(0.0, g.nvars)
    for a in c[:0:-1]:
        b1, b2 = g * b1 * 2.0 - b2 + a * one, b1
    return g * b1 - b2 + c[0]


# max norm on the box

@dataclass(frozen=True)
class BoxNormEstimate:
    lower: float
    upper: float
    grid_resolution: int


def chebyshev_lobatto_nodes(resolution: int) -> np.ndarray:
    """Nodes cos(pi j/(N-1)) sorted ascending, exactly symmetric with 0 for odd N."""
    if resolution < 2:
        raise InvalidParameter("resolution must be >= 2")
    j = np.arange(resolution)
    nodes = -np.cos(np.pi * j / (resolution - 1))
    nodes = 0.5 * (nodes - nodes[::-1])
    if resolution % 2:
        nodes[resolution // 2] = 0.0
    nodes[0], nodes[-1] = -1.0, 1.0
    return nodes


def default_resolution(nvars: int) -> int:
    return {1: 65537, 2: 513, 3: 65, 4: 25}.get(nvars, 9)


def box_grid(nvars: int, resolution: int, budget: int = GRID_BUDGET) -> np.ndarray:
    if nvars * resolution ** nvars > budget:
        raise DegreeOverflow(
            f"grid with {resolution}^{nvars} points exceeds the evaluation budget {budget}"
        )
    nodes = chebyshev_lobatto_nodes(resolution)
    mesh = np.meshgrid(*([nodes] * nvars), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def grid_covering_radius(nvars: int, resolution: int) -> float:
    nodes = chebyshev_lobatto_nodes(resolution)
    return 0.5 * math.sqrt(nvars) * float(np.max(np.diff(nodes)))


def markov_constant(degree: int) -> int:
    return 2 * degree * degree - degree


def max_norm_box(p: MultiPoly, resolution: int | None = None, budget: int = GRID_BUDGET) -> BoxNormEstimate:
    """Grid lower bound and Markov-certified upper bound of max |p| on [-1,1]^n."""
    resolution = resolution or default_resolution(p.nvars)
    grid = box_grid(p.nvars, resolution, budget)
    lower = float(np.max(np.abs(evaluate(p, grid)))) if len(p) else 0.0
    d = p.degree
    if d == 0:
        return BoxNormEstimate(lower, lower, resolution)
    slack = markov_constant(d) * grid_covering_radius(p.nvars, resolution)
    upper = lower / (1.0 - slack) if slack < 1.0 else math.inf
    # the sum of absolute coefficients is always a valid bound on the box
    upper = min(upper, p.coeff_norm(1))
    return BoxNormEstimate(lower, max(upper, lower), resolution)


@dataclass(frozen=True)
class MarkovReport:
    lhs: float
    rhs: float
    rhs_upper: float
    holds: bool


def markov_gradient_check(p: MultiPoly, resolution: int | None = None) -> MarkovReport:
    """Compare the grid max of |grad p| with (2d^2-d) times the grid max of |p|.

    Both sides are evaluated on the same grid, so the right side uses the
    lower norm estimate, which makes the comparison strictly harder to pass.
    """
    if p.degree < 1:
        raise InvalidParameter("markov_gradient_check needs deg p >= 1")
    resolution = resolution or default_resolution(p.nvars)
    grid = box_grid(p.nvars, resolution)
    grads = np.stack([evaluate(q, grid) for q in gradient(p)], axis=1)
    lhs = float(np.max(np.linalg.norm(grads, axis=1)))
    est = max_norm_box(p, resolution)
    k = markov_constant(p.degree)
    rhs = k * est.lower
    return MarkovReport(lhs, rhs, k * est.upper, lhs <= rhs * (1 + 1e-9))
