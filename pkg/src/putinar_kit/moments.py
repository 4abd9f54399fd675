"""Truncated pseudo-moment sequences, moment matrices and moment-cone experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import nnls

from .errors import DimensionMismatch, InvalidParameter
from .poly import Exponent, MultiPoly, max_norm_box, monomials_upto


class PseudoMomentSeq:
    """Linear functional on polynomials of degree <= degree, stored as L_alpha."""

    __slots__ = ("nvars", "degree", "monomials", "values")

    def __init__(self, nvars: int, degree: int, values: Mapping[Exponent, float] | Sequence[float]):
        self.nvars = nvars
        self.degree = degree
        self.monomials = tuple(monomials_upto(nvars, degree))
        if isinstance(values, Mapping):
            vec = np.array([float(values.get(a, 0.0)) for a in self.monomials])
        else:
            vec = np.asarray(values, float)
            if vec.shape != (len(self.monomials),):
                raise DimensionMismatch("value vector does not match the monomial count")
        self.values = vec

    def __getitem__(self, alpha: Sequence[int]) -> float:
        return float(self.values[self.monomials.index(tuple(alpha))])

    def as_dict(self) -> dict[Exponent, float]:
        return dict(zip(self.monomials, self.values.tolist()))

    @property
    def mass(self) -> float:
        return float(self.values[0])

    def norm2(self) -> float:
        return float(np.linalg.norm(self.values))

    def pair(self, p: MultiPoly) -> float:
        if p.degree > self.degree:
            raise InvalidParameter("polynomial degree exceeds the truncation degree")
        lookup = self.as_dict()
        return float(sum(c * lookup[a] for a, c in p.items()))

    def truncate(self, t: int) -> "PseudoMomentSeq":
        return truncate(self, t)

    def scaled(self, factor: float) -> "PseudoMomentSeq":
        return PseudoMomentSeq(self.nvars, self.degree, self.values * factor)

    def __repr__(self):
        return f"PseudoMomentSeq(n={self.nvars}, t={self.degree}, values={np.round(self.values, 8).tolist()})"


def truncate(L: PseudoMomentSeq, t: int) -> PseudoMomentSeq:
    if t > L.degree or t < 0:
        raise InvalidParameter(f"cannot truncate degree {L.degree} to {t}")
    count = math.comb(L.nvars + t, t)
    return PseudoMomentSeq(L.nvars, t, L.values[:count].copy())


def dirac_moments(x: Sequence[float], t: int) -> PseudoMomentSeq:
    x = np.asarray(x, float)
    mons = monomials_upto(len(x), t)
    vals = [float(np.prod(x ** np.array(a))) for a in mons]
    return PseudoMomentSeq(len(x), t, vals)


def dirac_matrix(points: np.ndarray, t: int) -> np.ndarray:
    """Columns are the moment vectors (x^alpha)_{|alpha|<=t} of the given points."""
    pts = np.atleast_2d(np.asarray(points, float))
    exps = np.array(monomials_upto(pts.shape[1], t))
    return np.prod(pts[None, :, :] ** exps[:, None, :], axis=2)


@dataclass(frozen=True)
class MomentMatrix:
    order: int
    basis: tuple[Exponent, ...]
    matrix: np.ndarray


def moment_matrix(L: PseudoMomentSeq, k: int) -> MomentMatrix:
    if 2 * k > L.degree:
        raise InvalidParameter(f"moment matrix of order {k} needs degree {2 * k}, have {L.degree}")
    basis = tuple(monomials_upto(L.nvars, k))
    lookup = L.as_dict()
    H = np.array([[lookup[tuple(x + y for x, y in zip(a, b))] for b in basis] for a in basis])
    return MomentMatrix(k, basis, H)


def localizing_matrix(L: PseudoMomentSeq, g: MultiPoly, k: int) -> np.ndarray:
    """Matrix (L(g X^{a+b}))_{|a|,|b| <= k}."""
    if 2 * k + g.degree > L.degree:
        raise InvalidParameter("localizing matrix exceeds the truncation degree")
    basis = monomials_upto(L.nvars, k)
    lookup = L.as_dict()
    out = np.zeros((len(basis), len(basis)))
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            out[i, j] = sum(c * lookup[tuple(x + y + z for x, y, z in zip(a, b, d))] for d, c in g.items())
    return out


def dual_cone_violation(L: PseudoMomentSeq, generators: Sequence[MultiPoly], level: int) -> float:
    """Most negative eigenvalue (0 when none) among the moment and localizing matrices of the level."""
    worst = min(0.0, float(np.linalg.eigvalsh(moment_matrix(L, level // 2).matrix)[0]))
    for g in generators:
        if level - g.degree >= 0:
            M = localizing_matrix(L, g, (level - g.degree) // 2)
            worst = min(worst, float(np.linalg.eigvalsh(M)[0]))
    return worst


@dataclass(frozen=True)
class TraceBoundReport:
    trace: float
    bound: float
    norm2: float
    norm_bound: float
    holds: bool


def trace_bound_check(L: PseudoMomentSeq, t: int, r_ball: float = 1.0, slack: float = 1e-9) -> TraceBoundReport:
    """trace of the order-t moment matrix and |L^[2t]|_2 against their ball-radius bounds."""
    H = moment_matrix(L, t).matrix
    geometric = sum(r_ball ** (2 * k) for k in range(t + 1)) * L.mass
    trace = float(np.trace(H))
    norm2 = truncate(L, 2 * t).norm2()
    norm_bound = math.sqrt(math.comb(L.nvars + t, t)) * geometric
    holds = trace <= geometric * (1 + slack) + slack and norm2 <= norm_bound * (1 + slack) + slack
    return TraceBoundReport(trace, geometric, norm2, norm_bound, holds)


def generating_section_check(
    L: PseudoMomentSeq,
    ell: int,
    mass_tol: float = 1e-9,
    section_tol: float = 1e-6,
) -> bool:
    """A (near) massless cone member must vanish on polynomials of degree <= ell/2."""
    total = L.norm2()
    if total == 0.0 or abs(L.mass) > mass_tol * total:
        return True
    return truncate(L, ell // 2).norm2() <= section_tol * total


@dataclass(frozen=True)
class NormComparison:
    max_norm: float
    bound: float
    holds: bool


def norm_comparison_check(f: MultiPoly, t: int | None = None, slack: float = 1e-9) -> NormComparison:
    """Box max-norm against sqrt(C(n+t, t)) times the coefficient 2-norm."""
    t = f.degree if t is None else t
    if t < f.degree:
        raise InvalidParameter("t must be at least deg f")
    lower = max_norm_box(f).lower
    bound = math.sqrt(math.comb(f.nvars + t, t)) * f.coeff_norm(2)
    return NormComparison(lower, bound, lower <= bound * (1 + slack))


# convex-hull distances

def hull_distance(points_matrix: np.ndarray, target: np.ndarray, normalized: bool = True, weight: float = 1e4) -> tuple[float, np.ndarray]:
    """Euclidean distance from target to conv(columns) (or to their cone if not normalized)."""
    V = np.asarray(points_matrix, float)
    b = np.asarray(target, float)
    if normalized:
        A = np.vstack([V, weight * np.ones((1, V.shape[1]))])
        rhs = np.append(b, weight)
        w, _ = nnls(A, rhs, maxiter=50 * V.shape[1])
        if w.sum() > 0:
            w = w / w.sum()
    else:
        w, _ = nnls(V, b, maxiter=50 * V.shape[1])
    return float(np.linalg.norm(V @ w - b)), w


@dataclass
class HausdorffEstimate:
    level: int
    t: int
    dist_lower: float
    dist_lower_cone: float
    outer_count: int
    inner_count: int
    diagnostics: dict = field(default_factory=dict)


def hausdorff_estimate(
    prob,
    t: int,
    ell: int,
    sample_budget: int = 2048,
    objectives: int = 16,
    seed: int = 0,
) -> HausdorffEstimate:
    """Sampled one-sided distance from degree-2t truncations of the level-ell dual cone to Dirac hulls on S."""
    from .semialgebraic import _Geometry
    from .sos import moment_sdp

    if ell < 2 * t:
        raise InvalidParameter("level must be at least 2t")
    rng = np.random.default_rng(seed)
    geo = _Geometry(prob, sample_budget, seed)
    mons = monomials_upto(prob.nvars, 2 * t)
    outer = []
    max_violation = 0.0
    for _ in range(objectives):
        c = rng.standard_normal(len(mons))
        c /= np.linalg.norm(c)
        L, _ = moment_sdp(prob, ell, dict(zip(mons, c)))
        max_violation = min(max_violation, dual_cone_violation(L, prob.g, ell))
        outer.append(truncate(L, 2 * t))
    inner_pts = [geo.feasible, geo.boundary_points(32, rng)]
    # Diracs at the projections of the outer first moments enrich the hull where it matters
    firsts = [L.values[1 : 1 + prob.nvars] for L in outer]
    proj = []
    for x in firsts:
        if len(geo.feasible):
            _, j = geo.tree.query(x)
            y = geo.project(x, geo.feasible[j])
            if y is not None:
                proj.append(y)
    if proj:
        inner_pts.append(np.array(proj))
    pts = np.vstack(inner_pts)
    V = dirac_matrix(pts, 2 * t)
    dists = [hull_distance(V, L.values)[0] for L in outer]
    cone = [hull_distance(V, L.values, normalized=False)[0] for L in outer]
    return HausdorffEstimate(
        ell,
        t,
        float(max(dists)),
        float(max(cone)),
        len(outer),
        V.shape[1],
        {"dual_cone_min_eig": max_violation},
    )


@dataclass(frozen=True)
class TubeReport:
    holds: bool
    min_value: float
    samples: int


def sample_nonnegative_polys(prob, t: int, count: int, seed: int = 0) -> list[MultiPoly]:
    """Random unit-2-norm polynomials of degree <= t that are nonnegative on S (squares times generators)."""
    rng = np.random.default_rng(seed)
    n = prob.nvars
    out = []
    gens = [MultiPoly.const(1.0, n)] + [g for g in prob.g if g.degree <= t]
    while len(out) < count:
        g = gens[rng.integers(len(gens))]
        half = (t - g.degree) // 2
        if half < 0:
            continue
        basis = monomials_upto(n, half)
        q = MultiPoly(dict(zip(basis, rng.standard_normal(len(basis)))), n)
        p = q * q * g
        norm = p.coeff_norm(2)
        if norm > 0:
            out.append(p / norm)
    return out


def tube_membership(L: PseudoMomentSeq, prob, t: int, epsilon: float, count: int = 200, seed: int = 0) -> TubeReport:
    """Check <L, f> >= -epsilon over sampled unit-norm polynomials nonnegative on S."""
    polys = sample_nonnegative_polys(prob, t, count, seed)
    values = [L.pair(p) for p in polys]
    low = float(min(values))
    return TubeReport(low >= -epsilon, low, len(values))


def halfspace_tube_distance(vertices: np.ndarray, directions: int, epsilon: float) -> float:
    """Hausdorff distance between a planar convex polygon C and the set C(epsilon).

    C(epsilon) relaxes every supporting half-plane u.x <= h_C(u) (``directions``
    unit normals) by epsilon; the distance is measured from the vertices of
    the relaxed polygon to C.
    """
    from scipy.spatial import HalfspaceIntersection

    verts = np.asarray(vertices, float)
    theta = 2 * np.pi * np.arange(directions) / directions
    U = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    support = np.max(U @ verts.T, axis=1)
    halfspaces = np.hstack([U, -(support + epsilon)[:, None]])
    relaxed = HalfspaceIntersection(halfspaces, verts.mean(axis=0)).intersections
    V = np.vstack([verts.T])
    return max(hull_distance(V, p, weight=1e6)[0] for p in relaxed)
