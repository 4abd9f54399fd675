"""Semialgebraic sets S(g): problems, normalization, distances and Lojasiewicz data."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .errors import (
    DimensionMismatch,
    EmptySetSuspected,
    InvalidConstraint,
    InvalidParameter,
    NonArchimedeanDeclared,
    NonPositiveMinimum,
)
from .poly import MultiPoly, box_grid, evaluate, gradient, max_norm_box

FEAS_TOL = 1e-10
DEFAULT_BUDGET = 4096


@dataclass(frozen=True)
class NormalizationRecord:
    """Normalized problem = raw problem with X -> scale * X and g_i divided by divisors[i]."""

    scale: float
    divisors: tuple[float, ...]


@dataclass(frozen=True)
class Problem:
    f: MultiPoly
    g: tuple[MultiPoly, ...]
    name: str = ""
    r_ball: float | None = None
    normalization: NormalizationRecord | None = None
    ball_certificate_level: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(self.g))
        for gi in self.g:
            if gi.nvars != self.f.nvars:
                raise DimensionMismatch("all polynomials must share the number of variables")

    @property
    def nvars(self) -> int:
        return self.f.nvars

    @property
    def r(self) -> int:
        return len(self.g)

    @property
    def degree_g(self) -> int:
        return max((gi.degree for gi in self.g), default=0)

    def constraint_values(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, float))
        if pts.shape[1] != self.nvars:
            raise DimensionMismatch(f"points of dimension {pts.shape[1]} for {self.nvars} variables")
        if not self.g:
            return np.zeros((len(pts), 0))
        return np.stack([evaluate(gi, pts) for gi in self.g], axis=1)

    def to_dict(self) -> dict:
        out = {"f": self.f.to_dict(), "g": [gi.to_dict() for gi in self.g]}
        if self.r_ball is not None:
            out["r_ball"] = self.r_ball
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Problem":
        try:
            f = MultiPoly.from_dict(data["f"])
            g = tuple(MultiPoly.from_dict(gi) for gi in data.get("g", []))
        except (KeyError, TypeError) as exc:
            raise InvalidParameter(f"malformed problem JSON: {exc}") from exc
        r_ball = data.get("r_ball")
        return cls(f, g, str(data.get("name", "")), None if r_ball is None else float(r_ball))


def load_problem(path: str | Path) -> Problem:
    return Problem.from_dict(json.loads(Path(path).read_text()))


def save_problem(prob: Problem, path: str | Path):
    Path(path).write_text(json.dumps(prob.to_dict(), indent=2))


# normalization

def ball_radius(g: MultiPoly) -> float | None:
    """rho if g = c (rho^2 - |X|^2) with c > 0, else None."""
    n = g.nvars
    const = g.coefficient((0,) * n)
    squares = []
    for i in range(n):
        alpha = [0] * n
        alpha[i] = 2
        squares.append(g.coefficient(alpha))
    if len(g) != n + 1 or const <= 0 or any(s >= 0 for s in squares):
        return None
    if max(squares) - min(squares) > 1e-12 * abs(squares[0]):
        return None
    return math.sqrt(const / -squares[0])


def find_ball_constraint(prob: Problem) -> tuple[int, float] | None:
    for i, gi in enumerate(prob.g):
        rho = ball_radius(gi)
        if rho is not None:
            return i, rho
    return None


def normalize(raw: Problem, r_ball: float | None = None, resolution: int | None = None) -> Problem:
    """Scale variables into the unit ball and constraints to box max-norm at most 1/2.

    A constraint is divided by twice its upper norm estimate only when that
    estimate exceeds 1/2, so normalizing twice changes nothing.
    """
    if any(gi.is_zero() for gi in raw.g):
        raise InvalidConstraint("constraint list contains the zero polynomial")
    if r_ball is None:
        r_ball = raw.r_ball
    if r_ball is None:
        found = find_ball_constraint(raw)
        if found is None:
            raise NonArchimedeanDeclared("no ball radius given and no ball constraint among g")
        r_ball = found[1]
    if r_ball <= 0:
        raise InvalidParameter("ball radius must be positive")
    scale = float(r_ball)
    f = raw.f.scale_variables(scale) if scale != 1.0 else raw.f
    g_new, divisors = [], []
    for gi in raw.g:
        gs = gi.scale_variables(scale) if scale != 1.0 else gi
        upper = max_norm_box(gs, resolution).upper
        divisor = 2.0 * upper if upper > 0.5 + 1e-9 else 1.0
        g_new.append(gs / divisor if divisor != 1.0 else gs)
        divisors.append(divisor)
    prev = raw.normalization
    if prev is not None:
        scale *= prev.scale
        divisors = [d * p for d, p in zip(divisors, prev.divisors)]
    return replace(
        raw,
        f=f,
        g=tuple(g_new),
        r_ball=1.0,
        normalization=NormalizationRecord(scale, tuple(divisors)),
    )


# distances

def algebraic_distance(prob: Problem, x):
    """G(x) = |min(g_1(x), ..., g_r(x), 0)| for a point or a batch."""
    arr = np.asarray(x, float)
    vals = prob.constraint_values(arr)
    G = np.abs(np.minimum(0.0, vals.min(axis=1) if vals.shape[1] else np.zeros(len(vals))))
    return float(G[0]) if arr.ndim <= 1 else G


def box_samples(nvars: int, budget: int, seed: int) -> np.ndarray:
    """Scrambled Sobol points in [-1,1]^n together with a Chebyshev tensor grid containing 0 and the corners."""
    m = max(1, math.ceil(math.log2(max(budget, 2))))
    sob = qmc.Sobol(nvars, scramble=True, seed=seed).random_base2(m)
    res = max(3, int(round(budget ** (1.0 / nvars))))
    res += 1 - res % 2
    while res ** nvars > 4 * budget and res > 3:
        res -= 2
    return np.vstack([2.0 * sob - 1.0, box_grid(nvars, res)])


class _Geometry:
    """Feasible samples of S with a KD-tree and a projection routine."""

    def __init__(self, prob: Problem, budget: int = DEFAULT_BUDGET, seed: int = 0):
        self.prob = prob
        self.seed = seed
        self.grads = [gradient(gi) for gi in prob.g]
        pts = box_samples(prob.nvars, budget, seed)
        G = algebraic_distance(prob, pts)
        feas = pts[G <= 0.0]
        if len(feas) == 0:
            # try to reach S from the least infeasible samples
            order = np.argsort(G)[:10]
            found = [y for y in (self.project(pts[i], None) for i in order) if y is not None]
            if not found:
                raise EmptySetSuspected("no feasible point of S found within the sampling budget")
            feas = np.array(found)
        self.infeasible = pts[G > 0.0]
        self.feasible = feas
        self.tree = cKDTree(feas)

    def _constraints(self):
        cons = []
        for gi, gr in zip(self.prob.g, self.grads):
            cons.append(
                {
                    "type": "ineq",
                    "fun": (lambda y, gi=gi: evaluate(gi, y)),
                    "jac": (lambda y, gr=gr: np.array([evaluate(q, y) for q in gr])),
                }
            )
        return cons

    def project(self, x: np.ndarray, start: np.ndarray | None) -> np.ndarray | None:
        """Local Euclidean projection of x onto S; None when the solver does not land in S."""
        x = np.asarray(x, float)
        y0 = x.copy() if start is None else np.asarray(start, float)
        res = minimize(
            lambda y: 0.5 * float(np.dot(y - x, y - x)),
            y0,
            jac=lambda y: y - x,
            constraints=self._constraints(),
            method="SLSQP",
            options={"ftol": 1e-15, "maxiter": 200},
        )
        y = res.x
        if not np.all(np.isfinite(y)):
            return None
        if algebraic_distance(self.prob, y) > 0.0:
            if start is None or algebraic_distance(self.prob, y0) > 0.0:
                return None if algebraic_distance(self.prob, y) > FEAS_TOL else y
            y = self._pull_back(y0, y)
        return y

    def _pull_back(self, inside: np.ndarray, outside: np.ndarray) -> np.ndarray:
        """Last feasible point on the segment from a point of S towards a nearly feasible one."""
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if algebraic_distance(self.prob, inside + mid * (outside - inside)) > 0.0:
                hi = mid
            else:
                lo = mid
        return inside + lo * (outside - inside)

    def distance(self, x: np.ndarray, refine: bool = True) -> tuple[float, bool]:
        x = np.asarray(x, float)
        if algebraic_distance(self.prob, x) == 0.0:
            return 0.0, False
        d_sample, idx = self.tree.query(x)
        best, refined = float(d_sample), False
        if refine:
            y = self.project(x, self.feasible[idx])
            if y is not None:
                d_proj = float(np.linalg.norm(x - y))
                if d_proj < best:
                    best, refined = d_proj, True
        return best, refined

    def boundary_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Points of S on or near its boundary: projections of outside samples plus low-slack samples."""
        pts = []
        if len(self.infeasible):
            pick = rng.choice(len(self.infeasible), size=min(count, len(self.infeasible)), replace=False)
            for i in pick:
                _, j = self.tree.query(self.infeasible[i])
                y = self.project(self.infeasible[i], self.feasible[j])
                if y is not None:
                    pts.append(y)
        vals = self.prob.constraint_values(self.feasible)
        slack = vals.min(axis=1) if vals.shape[1] else np.zeros(len(self.feasible))
        for i in np.argsort(slack)[:count]:
            pts.append(self.feasible[i])
        return np.array(pts)


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    refined: bool


def euclidean_distance(prob: Problem, x, budget: int = DEFAULT_BUDGET, seed: int = 0) -> DistanceEstimate:
    """Upper estimate of dist(x, S) from feasible samples and a local projection."""
    x = np.asarray(x, float)
    if x.shape != (prob.nvars,):
        raise DimensionMismatch("point dimension does not match the problem")
    geo = _Geometry(prob, budget, seed)
    value, refined = geo.distance(x)
    return DistanceEstimate(value, refined)


# Lojasiewicz data

@dataclass(frozen=True)
class LojaEstimate:
    c_hat: float
    L_hat: float
    sample_count: int
    fit_residual: float
    L_unclamped: float
    max_ratio: float
    diagnostics: dict = field(default_factory=dict, compare=False)


def _loja_samples(geo: _Geometry, sample_count: int, rng: np.random.Generator):
    prob = geo.prob
    n = prob.nvars
    anchors = geo.boundary_points(16, rng)
    radii = np.logspace(-3, -1, 9)
    pts = []
    for z in anchors:
        for r in radii:
            if n == 1:
                dirs = np.array([[1.0], [-1.0]])
            else:
                dirs = rng.standard_normal((4, n))
                dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            pts.extend(z + r * dirs)
    uniform = 2.0 * qmc.Sobol(n, scramble=True, seed=int(rng.integers(2 ** 31))).random(sample_count) - 1.0
    pts = np.vstack([np.array(pts).reshape(-1, n), uniform])
    G = algebraic_distance(prob, pts)
    outside = pts[G > 0]
    Gout = G[G > 0]
    D = np.array([geo.distance(x)[0] for x in outside])
    ok = D > 0
    return D[ok], Gout[ok]


def estimate_lojasiewicz(prob: Problem, sample_count: int = 512, seed: int = 0, budget: int = DEFAULT_BUDGET) -> LojaEstimate:
    """Fit D^L <= c G from uniform and near-S shell samples (lower envelope log-log slope)."""
    if sample_count < 100:
        raise InvalidParameter("sample_count must be at least 100")
    rng = np.random.default_rng(seed)
    geo = _Geometry(prob, budget, seed)
    D, G = _loja_samples(geo, sample_count, rng)
    if len(D) == 0:
        return LojaEstimate(1.0, 1.0, 0, 0.0, 1.0, 0.0, {"note": "no samples outside S"})
    logD, logG = np.log10(D), np.log10(G)
    edges = np.arange(-3.5, -0.99, 0.25)
    xs, ys = [], []
    for lo, hi in zip(edges, edges[1:]):
        mask = (logD >= lo) & (logD < hi)
        if np.any(mask):
            i = np.argmin(np.where(mask, logG, np.inf))
            xs.append(logD[i])
            ys.append(logG[i])
    if len(xs) >= 2:
        slope, intercept = np.polyfit(xs, ys, 1)
        fit_residual = float(np.sqrt(np.mean((np.polyval([slope, intercept], xs) - ys) ** 2)))
    else:
        slope, fit_residual = 1.0, math.nan
    L_hat = max(1.0, float(slope))
    ratios = D ** L_hat / G
    max_ratio = float(np.max(ratios))
    c_hat = max(1.0, 1.05 * max_ratio)
    return LojaEstimate(
        c_hat,
        L_hat,
        int(len(D)),
        fit_residual,
        float(slope),
        max_ratio,
        {"envelope_points": len(xs), "clamped": bool(slope < 1.0)},
    )


def lojasiewicz_violation(prob: Problem, est: LojaEstimate, sample_count: int = 512, seed: int = 1) -> float:
    """max over a fresh sample of D^L / (c G); at most 1 (+1e-6) when the estimate holds."""
    rng = np.random.default_rng(seed)
    geo = _Geometry(prob, DEFAULT_BUDGET, seed)
    D, G = _loja_samples(geo, sample_count, rng)
    if len(D) == 0:
        return 0.0
    return float(np.max(D ** est.L_hat / (est.c_hat * G)))


@dataclass(frozen=True)
class CqcReport:
    holds: bool
    witnesses: list
    checked: int
    rank_tol: float


def check_cqc(
    prob: Problem,
    active_tol: float = 1e-6,
    rank_tol: float | None = None,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
) -> CqcReport:
    """Linear independence of active constraint gradients at sampled points of S."""
    rng = np.random.default_rng(seed)
    geo = _Geometry(prob, budget, seed)
    pts = np.vstack([geo.feasible, geo.boundary_points(32, rng)])
    vals = prob.constraint_values(pts)
    grads = np.stack([np.stack([evaluate(q, pts) for q in gr], axis=1) for gr in geo.grads], axis=1)
    if rank_tol is None:
        rank_tol = 1e-8 * float(np.max(np.linalg.norm(grads, axis=2))) if grads.size else 0.0
    witnesses = []
    for z, v, J in zip(pts, vals, grads):
        active = np.abs(v) <= active_tol
        if not np.any(active):
            continue
        Ja = J[active]
        if Ja.shape[0] > Ja.shape[1]:
            smin = 0.0
        else:
            smin = float(np.linalg.svd(Ja, compute_uv=False)[-1])
        if not smin > rank_tol:
            witnesses.append({"point": z.tolist(), "active": np.flatnonzero(active).tolist(), "sigma_min": smin})
    return CqcReport(not witnesses, witnesses, len(pts), rank_tol)


# minimum, sublevel set and separation

@dataclass(frozen=True)
class MinimumEstimate:
    f_star: float
    norm_f: float
    epsilon_f: float
    nonpositive: bool
    argmin: tuple[float, ...]


def _local_min_on_set(prob: Problem, geo: _Geometry, starts: np.ndarray) -> list[np.ndarray]:
    fgrad = gradient(prob.f)
    out = []
    for x0 in starts:
        res = minimize(
            lambda y: evaluate(prob.f, y),
            x0,
            jac=lambda y: np.array([evaluate(q, y) for q in fgrad]),
            constraints=geo._constraints(),
            method="SLSQP",
            options={"ftol": 1e-15, "maxiter": 300},
        )
        if np.all(np.isfinite(res.x)) and algebraic_distance(prob, res.x) == 0.0:
            out.append(res.x)
    return out


def f_star_and_epsilon(prob: Problem, budget: int = DEFAULT_BUDGET, seed: int = 0) -> MinimumEstimate:
    geo = _Geometry(prob, budget, seed)
    fv = evaluate(prob.f, geo.feasible)
    order = np.argsort(fv)
    best_x = geo.feasible[order[0]]
    best = float(fv[order[0]])
    for y in _local_min_on_set(prob, geo, geo.feasible[order[:5]]):
        val = evaluate(prob.f, y)
        if val < best:
            best, best_x = val, y
    norm_f = max_norm_box(prob.f).upper
    eps = best / norm_f if norm_f > 0 else math.inf
    return MinimumEstimate(best, norm_f, eps, best <= 0, tuple(float(v) for v in best_x))


@dataclass(frozen=True)
class SublevelDelta:
    delta_emp: float
    delta_loja: float
    a_empty: bool
    consistent: bool
    f_star: float


def _sublevel_points(prob: Problem, threshold: float, budget: int, seed: int) -> np.ndarray:
    pts = box_samples(prob.nvars, budget, seed)
    vals = evaluate(prob.f, pts)
    A = pts[vals <= threshold]
    if len(A):
        return A
    # refine the box minimum of f before declaring A empty
    fgrad = gradient(prob.f)
    found = []
    for x0 in pts[np.argsort(vals)[:5]]:
        res = minimize(
            lambda y: evaluate(prob.f, y),
            x0,
            jac=lambda y: np.array([evaluate(q, y) for q in fgrad]),
            bounds=[(-1.0, 1.0)] * prob.nvars,
            method="L-BFGS-B",
        )
        if res.fun <= threshold:
            found.append(res.x)
    return np.array(found).reshape(-1, prob.nvars)


def sublevel_delta(
    prob: Problem,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    loja: LojaEstimate | None = None,
    minimum: MinimumEstimate | None = None,
) -> SublevelDelta:
    """Smallest algebraic distance over A = {x in box : f(x) <= 3 f*/4}, sampled and refined."""
    minimum = minimum or f_star_and_epsilon(prob, budget, seed)
    if minimum.nonpositive:
        raise NonPositiveMinimum(f"f* = {minimum.f_star} is not positive")
    threshold = 0.75 * minimum.f_star
    loja = loja or estimate_lojasiewicz(prob, seed=seed, budget=budget)
    d = max(1, prob.f.degree)
    delta_loja = (1.0 / loja.c_hat) * (minimum.epsilon_f / (8.0 * d * d)) ** loja.L_hat
    A = _sublevel_points(prob, threshold, budget, seed)
    if len(A) == 0:
        return SublevelDelta(math.inf, delta_loja, True, True, minimum.f_star)
    G = algebraic_distance(prob, A)
    best = float(np.min(G))
    fgrad = gradient(prob.f)
    n = prob.nvars
    cons = [
        {
            "type": "ineq",
            "fun": (lambda z: threshold - evaluate(prob.f, z[:n])),
            "jac": (lambda z: np.append(-np.array([evaluate(q, z[:n]) for q in fgrad]), 0.0)),
        }
    ]
    for gi in prob.g:
        grad_i = gradient(gi)
        cons.append(
            {
                "type": "ineq",
                "fun": (lambda z, gi=gi: z[n] + evaluate(gi, z[:n])),
                "jac": (lambda z, gr=grad_i: np.append([evaluate(q, z[:n]) for q in gr], 1.0)),
            }
        )
    for i in np.argsort(G)[:5]:
        z0 = np.append(A[i], G[i])
        res = minimize(
            lambda z: z[n],
            z0,
            jac=lambda z: np.append(np.zeros(n), 1.0),
            constraints=cons,
            bounds=[(-1.0, 1.0)] * n + [(0.0, None)],
            method="SLSQP",
            options={"ftol": 1e-15, "maxiter": 300},
        )
        x = res.x[:n]
        if np.all(np.abs(x) <= 1.0) and evaluate(prob.f, x) <= threshold + 1e-12:
            best = min(best, algebraic_distance(prob, x))
    return SublevelDelta(best, delta_loja, False, best >= delta_loja, minimum.f_star)


@dataclass(frozen=True)
class DistanceBoundReport:
    hdist_emp: float
    bound: float
    holds: bool
    vacuous: bool


def distance_bound_check(
    prob: Problem,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    minimum: MinimumEstimate | None = None,
) -> DistanceBoundReport:
    """Separation between A and S compared with eps(f)/(8 d^2).

    An empty sublevel set makes the bound vacuous and the check passes.
    """
    minimum = minimum or f_star_and_epsilon(prob, budget, seed)
    if minimum.nonpositive:
        raise NonPositiveMinimum(f"f* = {minimum.f_star} is not positive")
    d = max(1, prob.f.degree)
    bound = minimum.epsilon_f / (8.0 * d * d)
    threshold = 0.75 * minimum.f_star
    A = _sublevel_points(prob, threshold, budget, seed)
    if len(A) == 0:
        return DistanceBoundReport(math.inf, bound, True, True)
    geo = _Geometry(prob, budget, seed)
    dists, idx = geo.tree.query(A)
    best = float(np.min(dists))
    n = prob.nvars
    fgrad = gradient(prob.f)
    cons = [
        {
            "type": "ineq",
            "fun": (lambda z: threshold - evaluate(prob.f, z[:n])),
            "jac": (lambda z: np.concatenate([-np.array([evaluate(q, z[:n]) for q in fgrad]), np.zeros(n)])),
        }
    ]
    for gi, gr in zip(prob.g, geo.grads):
        cons.append(
            {
                "type": "ineq",
                "fun": (lambda z, gi=gi: evaluate(gi, z[n:])),
                "jac": (lambda z, gr=gr: np.concatenate([np.zeros(n), [evaluate(q, z[n:]) for q in gr]])),
            }
        )
    for i in np.argsort(dists)[:5]:
        z0 = np.concatenate([A[i], geo.feasible[idx[i]]])
        res = minimize(
            lambda z: float(np.dot(z[:n] - z[n:], z[:n] - z[n:])),
            z0,
            jac=lambda z: np.concatenate([2 * (z[:n] - z[n:]), -2 * (z[:n] - z[n:])]),
            constraints=cons,
            bounds=[(-1.0, 1.0)] * n + [(None, None)] * n,
            method="SLSQP",
            options={"ftol": 1e-15, "maxiter": 300},
        )
        a, s = res.x[:n], res.x[n:]
        if evaluate(prob.f, a) <= threshold + 1e-12 and algebraic_distance(prob, s) <= FEAS_TOL:
            best = min(best, float(np.linalg.norm(a - s)))
    return DistanceBoundReport(best, bound, best >= bound * (1 - 1e-6), False)
