"""Constructive certificates: perturbation, univariate decomposition, lifting, and verification."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .echelon import EchelonPoly, build_echelon, echelon_degree
from .errors import (
    CertificateAssemblyMismatch,
    DegreeOverflow,
    InfeasibleAtLevel,
    InvalidParameter,
    MinCheckFailed,
    NonPositiveMinimum,
    NotNonnegative,
    UnsupportedGeneratorForm,
)
from .gram import (
    PSD_REL_TOL,
    Certificate,
    CertificatePart,
    GramCertificatePart,
    compose_gram,
    gram_product,
    gram_times_square,
    merge_parts,
)
from .poly import MultiPoly, UniPoly, box_grid, compose_univariate, default_resolution, evaluate, grid_covering_radius, markov_constant, max_norm_box
from .semialgebraic import MinimumEstimate, Problem, f_star_and_epsilon, find_ball_constraint, sublevel_delta
from .sos import sos_feasibility

__all__ = [
    "Certificate",
    "PerturbationParams",
    "perturbation_params",
    "build_perturbation",
    "fekete_lukacs",
    "fekete_lukacs_roots",
    "box_to_ball",
    "lift_echelon_term",
    "certify",
    "verify_certificate",
]

MAX_LEVEL = 30
DEGREE_CAP = 40


# perturbation parameters and the perturbed polynomial

@dataclass(frozen=True)
class PerturbationParams:
    delta: float
    s: float
    k: float
    m: int
    margin: float

    def satisfies(self, norm_f: float, f_star: float, r: int) -> dict[str, bool]:
        """Strict inequalities on s and k (the margin makes them strict when positive)."""
        return {
            "s": self.s > 6 * norm_f / self.delta or self.margin == 0 and math.isclose(self.s, 6 * norm_f / self.delta),
            "k_count": self.k > (2 * r - 2) / self.delta + 1 or self.margin == 0,
            "k_scale": self.k > 4 * r * self.s / f_star or self.margin == 0 and math.isclose(self.k, 4 * r * self.s / f_star),
        }


def perturbation_params_from_values(
    norm_f: float, f_star: float, r: int, delta: float, margin: float = 0.01
) -> PerturbationParams:
    if delta <= 0 or not math.isfinite(delta):
        raise InvalidParameter("delta must be positive and finite")
    if f_star <= 0:
        raise InvalidParameter("f_star must be positive")
    if margin < 0:
        raise InvalidParameter("margin must be nonnegative")
    s = (1 + margin) * 6 * norm_f / delta
    k = (1 + margin) * max((2 * r - 2) / delta + 1, 4 * r * s / f_star)
    m = echelon_degree(min(delta, 1.0), k) if k > 1 else 0
    return PerturbationParams(float(delta), float(s), float(k), int(m), float(margin))


def perturbation_params(
    prob: Problem, delta: float, margin: float = 0.01, minimum: MinimumEstimate | None = None
) -> PerturbationParams:
    minimum = minimum or f_star_and_epsilon(prob)
    if minimum.nonpositive:
        raise NonPositiveMinimum(f"f* = {minimum.f_star} is not positive")
    return perturbation_params_from_values(minimum.norm_f, minimum.f_star, prob.r, delta, margin)


@dataclass
class Perturbation:
    params: PerturbationParams
    echelon: EchelonPoly | None
    p: MultiPoly | None
    sampled_min: float
    certified_min: float
    f_star: float
    degree: int
    prob: Problem = field(repr=False)

    def evaluate(self, x) -> np.ndarray:
        return perturbed_values(self.prob, self.params.s, self.echelon, x)


def perturbed_values(prob: Problem, s: float, echelon: EchelonPoly | None, x) -> np.ndarray:
    """f(x) - s sum_i h(g_i(x)) g_i(x) evaluated with the Chebyshev recurrence."""
    pts = np.atleast_2d(np.asarray(x, float))
    out = evaluate(prob.f, pts)
    if s == 0 or echelon is None:
        return out
    for gi in prob.g:
        gv = evaluate(gi, pts)
        out = out - s * echelon(gv) * gv
    return out


def build_perturbation(
    prob: Problem,
    params: PerturbationParams,
    f_star: float | None = None,
    expand: bool = True,
    degree_cap: int = DEGREE_CAP,
    resolution: int | None = None,
) -> Perturbation:
    if f_star is None:
        f_star = f_star_and_epsilon(prob).f_star
    if params.s == 0:
        echelon, degree = None, prob.f.degree
    else:
        echelon = build_echelon(min(params.delta, 1.0), params.k, params.m)
        degree = max(prob.f.degree, prob.degree_g * (params.m + 1))
    resolution = resolution or min(default_resolution(prob.nvars), {1: 4097, 2: 257}.get(prob.nvars, 33))
    grid = box_grid(prob.nvars, resolution)
    values = perturbed_values(prob, params.s, echelon, grid)
    sampled_min = float(np.min(values))
    # Markov certification of the grid minimum (usually very loose at high degree)
    norm_bound = max_norm_box(prob.f).upper + params.s * prob.r * 0.5 * (1 + (1 / params.k if params.k else 0))
    certified_min = sampled_min - markov_constant(degree) * norm_bound * grid_covering_radius(prob.nvars, resolution)
    if sampled_min < 0.5 * f_star * (1 - 1e-6):
        raise MinCheckFailed(
            f"perturbed polynomial reaches {sampled_min:.6g} < f*/2 = {0.5 * f_star:.6g}", sampled_min
        )
    p = None
    if expand:
        if degree > degree_cap:
            raise DegreeOverflow(f"perturbed polynomial has degree {degree} > cap {degree_cap} (m = {params.m})")
        p = prob.f
        if echelon is not None:
            for gi in prob.g:
                p = p - compose_univariate(echelon.h, gi) * gi * params.s
    return Perturbation(params, echelon, p, sampled_min, certified_min, f_star, degree, prob)


# univariate decomposition on [-1, 1]

@dataclass
class FLDecomposition:
    """h = s0 + s_minus (1 - T) + s_plus (1 + T) with sums of squares s0, s_minus, s_plus."""

    s0: GramCertificatePart
    s_minus: GramCertificatePart
    s_plus: GramCertificatePart
    residual: float

    @property
    def s1(self):
        return self.s_minus

    @property
    def s2(self):
        return self.s_plus

    def reconstruct(self) -> MultiPoly:
        T = MultiPoly.var(0, 1)
        return self.s0.polynomial() + self.s_minus.polynomial() * (1 - T) + self.s_plus.polynomial() * (1 + T)


def _as_univariate_multipoly(h) -> MultiPoly:
    if isinstance(h, EchelonPoly):
        h = h.h
    if isinstance(h, UniPoly):
        return h.as_multipoly(1)
    if isinstance(h, MultiPoly) and h.nvars == 1:
        return h
    raise InvalidParameter("expected a univariate polynomial")


def _check_nonnegative(hm: MultiPoly):
    t = np.linspace(-1, 1, 10_001)
    vals = evaluate(hm, t[:, None])
    scale = max(1e-300, float(np.max(np.abs(vals))))
    if float(np.min(vals)) < -1e-10 * scale:
        raise NotNonnegative(f"sampled minimum {np.min(vals):.3g} on [-1, 1]")


def fekete_lukacs(h) -> FLDecomposition:
    """Decompose a polynomial nonnegative on [-1, 1] by a degree-(d+1) SDP search."""
    hm = _as_univariate_multipoly(h)
    _check_nonnegative(hm)
    T = MultiPoly.var(0, 1)
    level = hm.degree + 1
    cert = sos_feasibility(hm, [1 - T, 1 + T], level)
    parts = {p.generator_index: p.gram for p in cert.compacted().parts}
    empty = GramCertificatePart(((0,),), np.zeros((1, 1)))
    fl = FLDecomposition(parts.get(None, empty), parts.get(0, empty), parts.get(1, empty), 0.0)
    fl.residual = (fl.reconstruct() - hm).coeff_norm() / max(1e-300, hm.coeff_norm())
    return fl


@dataclass
class SquaresDecomposition:
    """Explicit square lists: h = sum a^2 + (1-T) sum b^2 + (1+T) sum c^2 (monomial coefficient arrays)."""

    s0: list[np.ndarray]
    s_minus: list[np.ndarray]
    s_plus: list[np.ndarray]

    def _sum(self, squares) -> np.ndarray:
        out = np.zeros(1)
        for q in squares:
            out = npoly.polyadd(out, npoly.polymul(q, q))
        return out

    def reconstruct(self) -> MultiPoly:
        total = npoly.polyadd(self._sum(self.s0), npoly.polymul(self._sum(self.s_minus), [1.0, -1.0]))
        total = npoly.polyadd(total, npoly.polymul(self._sum(self.s_plus), [1.0, 1.0]))
        return UniPoly(total.tolist()).as_multipoly(1)


_ONE, _MINUS, _PLUS, _BOTH = "1", "1-T", "1+T", "1-T^2"
_PRODUCT_RULE = {
    # (key a, key b) -> (resulting key, extra square factor)
    (_ONE, _ONE): (_ONE, None),
    (_ONE, _MINUS): (_MINUS, None),
    (_ONE, _PLUS): (_PLUS, None),
    (_ONE, _BOTH): (_BOTH, None),
    (_MINUS, _MINUS): (_ONE, [1.0, -1.0]),
    (_PLUS, _PLUS): (_ONE, [1.0, 1.0]),
    (_MINUS, _PLUS): (_BOTH, None),
    (_MINUS, _BOTH): (_PLUS, [1.0, -1.0]),
    (_PLUS, _BOTH): (_MINUS, [1.0, 1.0]),
    (_BOTH, _BOTH): (_ONE, [1.0, 0.0, -1.0]),
}


def _multiply_elements(a: dict, b: dict) -> dict:
    out: dict[str, list[np.ndarray]] = {}
    for ka, sa in a.items():
        for kb, sb in b.items():
            key = (ka, kb) if (ka, kb) in _PRODUCT_RULE else (kb, ka)
            target, extra = _PRODUCT_RULE[key]
            for qa in sa:
                for qb in sb:
                    q = npoly.polymul(qa, qb)
                    if extra is not None:
                        q = npoly.polymul(q, extra)
                    out.setdefault(target, []).append(q)
    return out


def fekete_lukacs_roots(h, imag_tol: float = 1e-9, snap_tol: float = 1e-7) -> SquaresDecomposition:
    """Root-pairing construction: complex pairs give squares, outer real roots give boundary factors."""
    hm = _as_univariate_multipoly(h)
    _check_nonnegative(hm)
    coeffs = np.zeros(hm.degree + 1)
    for (a,), c in hm.items():
        coeffs[a] = c
    if hm.degree == 0:
        return SquaresDecomposition([np.array([math.sqrt(coeffs[0])])] if coeffs[0] > 0 else [], [], [])
    lead = coeffs[-1]
    roots = npoly.polyroots(coeffs)
    sign = 1.0
    factors: list[dict] = []
    complex_roots = [z for z in roots if abs(z.imag) > imag_tol]
    real_roots = sorted(float(z.real) for z in roots if abs(z.imag) <= imag_tol)
    for z in complex_roots:
        if z.imag > 0:
            factors.append({_ONE: [np.array([-z.real, 1.0]), np.array([z.imag])]})
    # roots within snap_tol of +-1 are boundary roots pushed inside by rounding
    real_roots = [math.copysign(1.0, r) if abs(abs(r) - 1) <= snap_tol else r for r in real_roots]
    interior = [r for r in real_roots if -1 < r < 1]
    outer = [r for r in real_roots if not -1 < r < 1]
    if len(interior) % 2:
        # an odd interior count means a boundary root drifted inside
        edge = min(interior, key=lambda r: 1 - abs(r))
        interior.remove(edge)
        outer.append(1.0 if edge > 0 else -1.0)
    for r in outer:
        if r >= 1:
            sign = -sign  # T - r = -(r - T)
            factors.append({_ONE: [np.array([math.sqrt(r - 1)])], _MINUS: [np.array([1.0])]})
        else:
            factors.append({_ONE: [np.array([math.sqrt(-1 - r)])], _PLUS: [np.array([1.0])]})
    for r1, r2 in zip(interior[::2], interior[1::2]):
        factors.append({_ONE: [np.array([-(r1 + r2) / 2, 1.0])]})
    const = lead * sign
    if const <= 0:
        raise NotNonnegative("leading constant has the wrong sign for a nonnegative polynomial")
    element: dict = {_ONE: [np.array([math.sqrt(const)])]}
    for fac in factors:
        element = _multiply_elements(element, fac)
    s0 = list(element.get(_ONE, []))
    s_minus = list(element.get(_MINUS, []))
    s_plus = list(element.get(_PLUS, []))
    half = math.sqrt(0.5)
    for q in element.get(_BOTH, []):
        # 1 - T^2 = ((1+T)^2 (1-T) + (1-T)^2 (1+T)) / 2
        s_minus.append(half * npoly.polymul(q, [1.0, 1.0]))
        s_plus.append(half * npoly.polymul(q, [1.0, -1.0]))
    return SquaresDecomposition(s0, s_minus, s_plus)


# box-to-ball

def box_factor_polys(nvars: int) -> dict[tuple[int, int], MultiPoly]:
    X = MultiPoly.variables(nvars)
    return {(i, s): 1 + s * X[i] for i in range(nvars) for s in (1, -1)}


def box_preordering(nvars: int, max_degree: int) -> list[tuple[tuple[tuple[int, int], ...], MultiPoly]]:
    """Products of distinct box factors 1 +- X_i, up to the given number of factors."""
    facs = box_factor_polys(nvars)
    keys = sorted(facs, key=lambda k: (k[0], -k[1]))
    out = []
    for size in range(1, min(max_degree, len(keys)) + 1):
        for combo in itertools.combinations(keys, size):
            poly = MultiPoly.const(1.0, nvars)
            for k in combo:
                poly = poly * facs[k]
            out.append((combo, poly))
    return out


def _recognize_box_generator(g: MultiPoly) -> tuple[tuple[int, int], ...]:
    facs = box_factor_polys(g.nvars)
    keys = sorted(facs, key=lambda k: (k[0], -k[1]))
    for combo in itertools.combinations(keys, g.degree):
        poly = MultiPoly.const(1.0, g.nvars)
        for k in combo:
            poly = poly * facs[k]
        if poly.allclose(g, 1e-12):
            return combo
    raise UnsupportedGeneratorForm(f"generator {g!r} is not a product of distinct factors 1 +- X_i")


def _sos_product(lists: Sequence[list[MultiPoly]], nvars: int) -> list[MultiPoly]:
    out = [MultiPoly.const(1.0, nvars)]
    for lst in lists:
        out = [a * b for a in out for b in lst]
    return out


def box_to_ball(cert: Certificate, factors: Sequence[tuple[tuple[int, int], ...]] | None = None) -> Certificate:
    """Rewrite a certificate over products of 1 +- X_i as one over the single generator 1 - |X|^2."""
    n = cert.nvars
    X = MultiPoly.variables(n)
    ball = 1 - sum((x * x for x in X), MultiPoly.const(0.0, n))
    if factors is None:
        factors = [_recognize_box_generator(g) for g in cert.generators]
    sos_parts: list[GramCertificatePart] = []
    ball_parts: list[GramCertificatePart] = []
    for part in cert.parts:
        if part.generator_index is None:
            sos_parts.append(part.gram)
            continue
        signs: dict[int, set[int]] = {}
        for i, s in factors[part.generator_index]:
            signs.setdefault(i, set()).add(s)
        options = []
        for i, ss in sorted(signs.items()):
            others = [X[j] for j in range(n) if j != i]
            if len(ss) == 2:
                # (1 - X_i)(1 + X_i) = B + sum_{j != i} X_j^2
                opts = [(1.0, 1, None)]
                if others:
                    opts.append((1.0, 0, others))
            else:
                (s,) = ss
                # 1 + s X_i = B/2 + (sum_{j != i} X_j^2 + (1 + s X_i)^2)/2
                opts = [(0.5, 1, None), (0.5, 0, others + [1 + s * X[i]])]
            options.append(opts)
        for combo in itertools.product(*options):
            coef = math.prod(c for c, _, _ in combo)
            power = sum(a for _, a, _ in combo)
            squares = _sos_product([lst for _, _, lst in combo if lst is not None], n)
            lift = ball ** (power // 2)
            target = ball_parts if power % 2 else sos_parts
            for q in squares:
                target.append(gram_times_square(part.gram, lift * q).scaled(coef))
    parts = []
    if sos_parts:
        parts.append(CertificatePart(None, merge_parts(sos_parts), "ball-embedding"))
    if ball_parts:
        parts.append(CertificatePart(0, merge_parts(ball_parts), "ball-embedding"))
    out = Certificate(cert.target, (ball,), parts, cert.level + n, provenance="ball-embedding")
    out.residual = (cert.target - out.assembled()).coeff_norm()
    out.metadata["input_level"] = cert.level
    return out


def chain_through(cert: Certificate, index: int, inner: Certificate, new_generators: Sequence[MultiPoly]) -> list[CertificatePart]:
    """Replace generator ``index`` of cert by the representation ``inner`` (over new_generators)."""
    out = []
    for part in cert.parts:
        if part.generator_index != index:
            out.append(part)
            continue
        for ip in inner.parts:
            out.append(CertificatePart(ip.generator_index, gram_product(part.gram, ip.gram), part.kind))
    return out


# lifting of one echelon term

def lift_echelon_term(
    h,
    index: int,
    generators: Sequence[MultiPoly],
    one_minus_cert: Certificate,
    ell0: int,
    fl: FLDecomposition | None = None,
    res_tol: float = 1e-7,
) -> Certificate:
    """Certificate for h(g_i) g_i in the quadratic module of the generators."""
    gens = tuple(generators)
    g = gens[index]
    n = g.nvars
    hm = _as_univariate_multipoly(h)
    m = hm.degree
    fl = fl or fekete_lukacs(hm)
    parts: list[CertificatePart] = []
    tag = "perturbation-lift"
    s0 = compose_gram(fl.s0, g)
    s_plus = compose_gram(fl.s_plus, g)
    s_minus = compose_gram(fl.s_minus, g)
    # s0(g) g
    parts.append(CertificatePart(index, s0, tag))
    # s_plus(g) (1 + g) g = s_plus(g) g + s_plus(g) g^2
    parts.append(CertificatePart(index, s_plus, tag))
    parts.append(CertificatePart(None, gram_times_square(s_plus, g), tag))
    # s_minus(g) (1 - g) g = s_minus(g) (1 - g)^2 g + s_minus(g) g^2 (1 - g)
    parts.append(CertificatePart(index, gram_times_square(s_minus, 1 - g), tag))
    base = gram_times_square(s_minus, g)
    for ip in one_minus_cert.parts:
        parts.append(CertificatePart(ip.generator_index, gram_product(base, ip.gram), tag))
    target = compose_univariate(_uni(hm), g) * g
    formula_level = g.degree * m + ell0 + 2
    cert = Certificate(target, gens, parts, formula_level, provenance=tag).compacted()
    achieved = max(cert.part_degrees(), default=0)
    cert.level = max(formula_level, achieved)
    cert.metadata.update(formula_level=formula_level, achieved_degree=achieved, ell0=ell0, echelon_degree=m)
    cert.residual = (target - cert.assembled()).coeff_norm()
    if cert.residual > res_tol * (1 + target.coeff_norm()):
        raise CertificateAssemblyMismatch(f"lifted term residual {cert.residual:.3e}", cert.residual)
    return cert


def _uni(hm: MultiPoly) -> UniPoly:
    coeffs = [0.0] * (hm.degree + 1)
    for (a,), c in hm.items():
        coeffs[a] = c
    return UniPoly(coeffs)


# end-to-end certification

def sweep_levels(
    target: MultiPoly,
    generators: Sequence[MultiPoly],
    start: int | None = None,
    max_level: int = MAX_LEVEL,
    generator_factory=None,
) -> Certificate:
    """sos_feasibility at levels start, start+2, ... until a certificate is found."""
    level = 2 * math.ceil(target.degree / 2) if start is None else start
    last = None
    while level <= max_level:
        gens = generator_factory(level) if generator_factory else generators
        try:
            return sos_feasibility(target, gens, level)
        except InfeasibleAtLevel as exc:
            last = exc
        except InvalidParameter as exc:
            # dimension cap reached
            raise InfeasibleAtLevel(f"stopped at level {level}: {exc}", level) from exc
        level += 2
    raise InfeasibleAtLevel(f"no certificate up to level {max_level} ({last})", max_level)


def one_minus_generator_certificates(prob: Problem, max_level: int = MAX_LEVEL) -> tuple[list[Certificate], int]:
    certs = [sweep_levels(1 - gi, prob.g, max_level=max_level) for gi in prob.g]
    return certs, max((c.level for c in certs), default=0)


def _box_route(target: MultiPoly, prob: Problem, max_level: int) -> Certificate:
    """Box preordering representation, ball embedding, then the ball inside Q(g)."""
    n = prob.nvars
    level = 2 * math.ceil(target.degree / 2)
    last = None
    box_cert = None
    while level <= max_level:
        gens = box_preordering(n, level)
        try:
            box_cert = sos_feasibility(target, [p for _, p in gens], level)
            factors = [f for f, _ in gens]
            break
        except InfeasibleAtLevel as exc:
            last = exc
        except InvalidParameter as exc:
            raise InfeasibleAtLevel(f"box representation stopped at level {level}: {exc}", level) from exc
        level += 2
    if box_cert is None:
        raise InfeasibleAtLevel(f"no box representation up to level {max_level} ({last})", max_level)
    for part in box_cert.parts:
        part.kind = "box-representation"
    ball_cert = box_to_ball(box_cert, factors)
    ball = ball_cert.generators[0]
    found = find_ball_constraint(prob)
    if found is not None:
        j, rho = found
        scale = -prob.g[j].coefficient((2,) + (0,) * (n - 1)) if n else 1.0
        if abs(rho - 1.0) <= 1e-12:
            inner = Certificate(ball, prob.g, [CertificatePart(j, GramCertificatePart(((0,) * n,), np.array([[1.0 / scale]])), "ball-embedding")], prob.g[j].degree)
        else:
            inner = sweep_levels(ball, prob.g, max_level=max_level)
    else:
        inner = sweep_levels(ball, prob.g, max_level=max_level)
    parts = chain_through(ball_cert, 0, inner, prob.g)
    cert = Certificate(target, prob.g, parts, 0, provenance="ball-embedding").compacted()
    cert.level = max(cert.part_degrees(), default=0)
    cert.residual = (target - cert.assembled()).coeff_norm()
    cert.metadata.update(box_level=box_cert.level, ball_level=ball_cert.level, ball_in_q_level=inner.level)
    return cert


def certify(
    prob: Problem,
    strategy: str = "direct",
    max_level: int = MAX_LEVEL,
    degree_cap: int = DEGREE_CAP,
    budget: int = 4096,
    seed: int = 0,
    res_tol: float = 1e-6,
    params: PerturbationParams | None = None,
) -> Certificate:
    """Find f = sigma_0 + sum sigma_i g_i with one of the strategies direct, perturbation, boxchain.

    ``params`` overrides the sufficient sizing of s, k, m; the identity f = (f - p) + p
    holds for any choice, so the result is valid whenever p passes its min check.
    """
    if strategy not in ("direct", "perturbation", "boxchain"):
        raise InvalidParameter(f"unknown strategy {strategy!r}")
    minimum = f_star_and_epsilon(prob, budget, seed)
    if minimum.nonpositive:
        raise NonPositiveMinimum(f"f* = {minimum.f_star:.6g} is not positive")
    route = "direct" if strategy in ("direct", "perturbation") else "boxchain"

    def represent(target: MultiPoly) -> Certificate:
        if route == "boxchain":
            return _box_route(target, prob, max_level)
        return sweep_levels(target, prob.g, max_level=max_level)

    meta: dict = {"strategy": strategy, "f_star_estimate": minimum.f_star, "norm_f_upper": minimum.norm_f}
    if strategy == "direct":
        cert = represent(prob.f)
    else:
        if params is None:
            sub = sublevel_delta(prob, budget, seed, minimum=minimum)
            meta.update(delta_emp=sub.delta_emp, delta_loja=sub.delta_loja, sublevel_empty=sub.a_empty)
            skip = sub.a_empty
        else:
            meta["params_override"] = True
            skip = False
        if skip:
            # f >= 3 f*/4 on the whole box: the perturbation is unnecessary (p = f)
            meta["perturbation_skipped"] = True
            cert = represent(prob.f)
        else:
            if params is None:
                params = perturbation_params_from_values(minimum.norm_f, minimum.f_star, prob.r, sub.delta_emp)
            meta.update(s=params.s, k=params.k, m=params.m)
            degree = max(prob.f.degree, prob.degree_g * (params.m + 1))
            if degree > degree_cap:
                raise DegreeOverflow(
                    f"perturbation needs echelon degree m = {params.m} (polynomial degree {degree} > cap {degree_cap})"
                )
            pert = build_perturbation(prob, params, minimum.f_star, expand=True, degree_cap=degree_cap)
            ones, ell0 = one_minus_generator_certificates(prob, max_level)
            parts: list[CertificatePart] = []
            for i in range(prob.r):
                lift = lift_echelon_term(pert.echelon, i, prob.g, ones[i], ones[i].level)
                parts.extend(CertificatePart(p.generator_index, p.gram.scaled(params.s), p.kind) for p in lift.parts)
            p_cert = represent(pert.p)
            parts.extend(p_cert.parts)
            cert = Certificate(prob.f, prob.g, parts, 0, provenance="perturbation-lift").compacted()
            cert.level = max(cert.part_degrees(), default=0)
            meta.update(ell0_witness=ell0, p_level=p_cert.level, sampled_min_p=pert.sampled_min)
    if cert.target is not prob.f:
        cert = Certificate(prob.f, cert.generators, cert.parts, cert.level, provenance=cert.provenance, metadata=cert.metadata)
    cert.residual = (prob.f - cert.assembled()).coeff_norm()
    cert.metadata.update(meta)
    report = verify_certificate(cert, prob.f, prob.g, res_tol=res_tol)
    if not report.verdict:
        raise CertificateAssemblyMismatch(f"assembled certificate fails verification: {report.detail}", report.residual)
    return cert


# independent verification

def _expand_gram_dict(basis, gram) -> dict:
    out: dict = {}
    size = len(basis)
    for i in range(size):
        for j in range(size):
            c = float(gram[i][j])
            if c:
                key = tuple(a + b for a, b in zip(basis[i], basis[j]))
                out[key] = out.get(key, 0.0) + c
    return out


def _multiply_dicts(d1: dict, d2: dict) -> dict:
    out: dict = {}
    for a, ca in d1.items():
        for b, cb in d2.items():
            key = tuple(x + y for x, y in zip(a, b))
            out[key] = out.get(key, 0.0) + ca * cb
    return out


@dataclass
class VerificationReport:
    residual: float
    relative_residual: float
    min_eigenvalues: list[float]
    psd_ok: bool
    level_ok: bool
    max_degree: int
    verdict: bool
    detail: str


def verify_certificate(
    cert: Certificate,
    f: MultiPoly,
    g: Sequence[MultiPoly],
    res_tol: float = 1e-6,
    psd_tol: float = PSD_REL_TOL,
) -> VerificationReport:
    """Re-expand every part from raw data and compare with f; check PSD and degree compliance."""
    gen_terms = [dict(gi.items()) for gi in g]
    total: dict = {}
    min_eigs = []
    psd_ok = True
    max_degree = 0
    problems = []
    for k, part in enumerate(cert.parts):
        basis = [tuple(b) for b in part.gram.basis]
        G = np.array(part.gram.gram, float)
        lam = np.linalg.eigvalsh(0.5 * (G + G.T)) if G.size else np.zeros(1)
        min_eigs.append(float(lam[0]))
        if lam[0] < -psd_tol * max(1.0, float(np.max(np.abs(lam)))):
            psd_ok = False
            problems.append(f"part {k} min eigenvalue {lam[0]:.3e}")
        sigma = _expand_gram_dict(basis, G)
        deg = 2 * max((sum(b) for b in basis), default=0)
        if part.generator_index is not None:
            if not 0 <= part.generator_index < len(gen_terms):
                problems.append(f"part {k} refers to missing generator {part.generator_index}")
                psd_ok = False
                continue
            gt = gen_terms[part.generator_index]
            sigma = _multiply_dicts(sigma, gt)
            deg += max((sum(a) for a in gt), default=0)
        max_degree = max(max_degree, deg)
        for a, c in sigma.items():
            total[a] = total.get(a, 0.0) + c
    for a, c in f.items():
        total[a] = total.get(a, 0.0) - c
    residual = max((abs(c) for c in total.values()), default=0.0)
    fnorm = max((abs(c) for _, c in f.items()), default=0.0)
    rel = residual / (1 + fnorm)
    level_ok = max_degree <= cert.level
    if not level_ok:
        problems.append(f"degree {max_degree} exceeds level {cert.level}")
    if rel > res_tol:
        problems.append(f"residual {residual:.3e} exceeds {res_tol:.1e} (1 + |f|)")
    verdict = psd_ok and level_ok and rel <= res_tol
    return VerificationReport(residual, rel, min_eigs, psd_ok, level_ok, max_degree, verdict, "; ".join(problems) or "ok")


def map_certificate_to_raw(cert: Certificate, raw: Problem, normalized: Problem) -> Certificate:
    """Express a certificate for the normalized problem in the raw variables and constraints."""
    rec = normalized.normalization
    if rec is None:
        return cert
    inv = 1.0 / rec.scale
    parts = []
    for part in cert.parts:
        D = np.array([inv ** sum(b) for b in part.gram.basis])
        G = part.gram.gram * np.outer(D, D)
        if part.generator_index is not None:
            G = G / rec.divisors[part.generator_index]
        parts.append(CertificatePart(part.generator_index, GramCertificatePart(part.gram.basis, G), part.kind))
    out = Certificate(raw.f, raw.g, parts, cert.level, provenance=cert.provenance, metadata=dict(cert.metadata))
    out.residual = (raw.f - out.assembled()).coeff_norm()
    return out
