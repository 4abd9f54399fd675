"""Dense primal-dual interior-point solver for block-diagonal SDPs.

Primal:  min <C, X>  s.t. <A_i, X> = b_i,  X psd
Dual:    max b.y     s.t. Z = C - sum_i y_i A_i psd

Infeasible-start path following with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import InvalidParameter, NumericalFailure

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
SLOW = "SlowProgress"

DIMENSION_CAP = 400


@dataclass(frozen=True)
class SdpProblem:
    blocks: tuple[int, ...]
    A: tuple[np.ndarray, ...]  # per block, shape (m, n_k, n_k)
    b: np.ndarray
    C: tuple[np.ndarray, ...]

    @property
    def num_constraints(self) -> int:
        return len(self.b)

    @property
    def total_dimension(self) -> int:
        return int(sum(self.blocks))

    def validate(self, dimension_cap: int = DIMENSION_CAP):
        m = len(self.b)
        if not (len(self.blocks) == len(self.A) == len(self.C)):
            raise InvalidParameter("blocks, A and C must have matching lengths")
        for nk, Ak, Ck in zip(self.blocks, self.A, self.C):
            if Ak.shape != (m, nk, nk) or Ck.shape != (nk, nk):
                raise InvalidParameter("constraint or cost block has the wrong shape")
            if not np.allclose(Ak, Ak.transpose(0, 2, 1)) or not np.allclose(Ck, Ck.T):
                raise InvalidParameter("constraint and cost blocks must be symmetric")
        if self.total_dimension > dimension_cap:
            raise InvalidParameter(
                f"total PSD dimension {self.total_dimension} exceeds the cap {dimension_cap}"
            )

    def apply(self, X: Sequence[np.ndarray]) -> np.ndarray:
        """Vector (<A_i, X>)_i."""
        out = np.zeros(len(self.b))
        for Ak, Xk in zip(self.A, X):
            out += Ak.reshape(len(self.b), -1) @ Xk.ravel()
        return out

    def adjoint(self, y: np.ndarray) -> list[np.ndarray]:
        return [np.tensordot(y, Ak, axes=1) for Ak in self.A]

    def objective(self, X: Sequence[np.ndarray]) -> float:
        return float(sum(np.vdot(Ck, Xk) for Ck, Xk in zip(self.C, X)))


@dataclass
class SdpResult:
    status: str
    X: list[np.ndarray]
    y: np.ndarray
    Z: list[np.ndarray]
    primal_value: float
    dual_value: float
    gap: float
    primal_infeasibility: float
    dual_infeasibility: float
    iterations: int
    trace: list[dict] = field(default_factory=list)


def _inner(U: Sequence[np.ndarray], V: Sequence[np.ndarray]) -> float:
    return float(sum(np.vdot(u, v) for u, v in zip(U, V)))


def _fro(U: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.vdot(u, u)) for u in U))


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha dX psd (X positive definite)."""
    if X.shape[0] == 0:
        return math.inf
    L = np.linalg.cholesky(X)
    T = sla.solve_triangular(L, dX, lower=True)
    T = sla.solve_triangular(L, T.T, lower=True)
    lam = np.linalg.eigvalsh(_sym(T))[0]
    return -1.0 / lam if lam < 0 else math.inf


def _nt_scaling(X: np.ndarray, Z: np.ndarray):
    """G with G^T Z G = G^{-1} X G^{-T} = diag(d); W = G G^T."""
    Lx = np.linalg.cholesky(X)
    Lz = np.linalg.cholesky(Z)
    U, s, Vt = np.linalg.svd(Lz.T @ Lx)
    G = Lx @ Vt.T / np.sqrt(s)[None, :]
    return G, s


@dataclass
class _Reduced:
    problem: SdpProblem
    keep: np.ndarray
    scale: np.ndarray


def _preprocess(p: SdpProblem) -> tuple[_Reduced | None, str | None]:
    """Drop empty and dependent constraints, check their consistency, normalize rows."""
    m = p.num_constraints
    flat = np.concatenate([Ak.reshape(m, -1) for Ak in p.A], axis=1) if m else np.zeros((0, 0))
    norms = np.linalg.norm(flat, axis=1) if m else np.zeros(0)
    bscale = 1.0 + float(np.linalg.norm(p.b))
    empty = norms <= 1e-14 * max(1.0, norms.max() if m else 1.0)
    if np.any(np.abs(p.b[empty]) > 1e-12 * bscale):
        return None, INFEASIBLE
    candidates = np.flatnonzero(~empty)
    keep = candidates
    if len(candidates):
        sub = flat[candidates] / norms[candidates, None]
        _, R, piv = sla.qr(sub.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > 1e-10 * diag[0])) if len(diag) else 0
        if rank < len(candidates):
            keep = np.sort(candidates[piv[:rank]])
            rows = flat[candidates]
            sol, *_ = np.linalg.lstsq(rows, p.b[candidates], rcond=None)
            if np.linalg.norm(rows @ sol - p.b[candidates]) > 1e-9 * bscale:
                return None, INFEASIBLE
    scale = norms[keep]
    A = tuple(Ak[keep] / scale[:, None, None] for Ak in p.A)
    reduced = SdpProblem(p.blocks, A, p.b[keep] / scale, p.C)
    return _Reduced(reduced, keep, scale), None


def solve_sdp(
    p: SdpProblem,
    tol: float = 1e-8,
    feas_tol: float = 1e-9,
    max_iter: int = 100,
    dimension_cap: int = DIMENSION_CAP,
    infeasibility_ratio: float = 1e8,
) -> SdpResult:
    p.validate(dimension_cap)
    full_m = p.num_constraints
    reduced, early = _preprocess(p)
    if early is not None:
        zeros = [np.zeros((nk, nk)) for nk in p.blocks]
        return SdpResult(early, zeros, np.zeros(full_m), zeros, math.nan, math.nan, math.inf, math.inf, math.inf, 0)

    q = reduced.problem
    m = q.num_constraints
    nk_all = q.blocks
    N = float(sum(nk_all))
    b = q.b
    C = [np.array(c, float) for c in q.C]
    normb = float(np.linalg.norm(b))
    normC = _fro(C)
    flat_A = [Ak.reshape(m, -1) for Ak in q.A]

    X, Z = [], []
    for k, nk in enumerate(nk_all):
        fro_k = np.linalg.norm(flat_A[k], axis=1) if m else np.zeros(0)
        xi = max(10.0, math.sqrt(nk), nk * float(np.max((1 + np.abs(b)) / (1 + fro_k))) if m else 0.0)
        eta = max(10.0, math.sqrt(nk), float(np.max(fro_k)) if m else 0.0, float(np.linalg.norm(C[k])))
        X.append(xi * np.eye(nk))
        Z.append(eta * np.eye(nk))
    y = np.zeros(m)

    trace: list[dict] = []
    status = SLOW
    tiny_steps = 0
    it = 0
    for it in range(max_iter + 1):
        AX = q.apply(X)
        rp = b - AX
        ATy = q.adjoint(y)
        Rd = [Ck - Zk - Ak for Ck, Zk, Ak in zip(C, Z, ATy)]
        pobj = _inner(C, X)
        dobj = float(b @ y)
        mu = _inner(X, Z) / N
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        pinf = float(np.linalg.norm(rp)) / (1 + normb)
        dinf = _fro(Rd) / (1 + normC)
        trace.append(dict(iteration=it, primal=pobj, dual=dobj, gap=relgap, pinf=pinf, dinf=dinf, mu=mu))
        if relgap <= tol and pinf <= feas_tol and dinf <= feas_tol:
            status = OPTIMAL
            break
        if dobj > 0:
            cert = _fro([Ck - R for Ck, R in zip(C, Rd)])
            if cert * infeasibility_ratio < dobj and dobj >= 1e-6 * float(np.linalg.norm(y)):
                status = INFEASIBLE
                break
        if pobj < 0:
            if float(np.linalg.norm(AX)) * infeasibility_ratio < -pobj and -pobj >= 1e-6 * _fro(X):
                status = UNBOUNDED
                break
        if it == max_iter or tiny_steps >= 5:
            status = SLOW
            break

        near_optimal = relgap <= 1e-6 and pinf <= 1e-6 and dinf <= 1e-6
        try:
            scalings = [_nt_scaling(Xk, Zk) for Xk, Zk in zip(X, Z)]
        except np.linalg.LinAlgError as exc:
            if near_optimal:
                # the requested accuracy is beyond double precision; keep the last iterate
                status = SLOW
                break
            raise NumericalFailure(f"lost positive definiteness: {exc}", trace) from exc
        Ws = [G @ G.T for G, _ in scalings]
        M = np.zeros((m, m))
        for k in range(len(nk_all)):
            W = Ws[k]
            T = np.matmul(np.matmul(W[None], q.A[k]), W[None])
            M += T.reshape(m, -1) @ flat_A[k].T
        M = _sym(M)
        try:
            factor = sla.cho_factor(M)
        except np.linalg.LinAlgError:
            M += (1e-14 * max(1.0, float(np.max(np.abs(np.diag(M)))))) * np.eye(m)
            try:
                factor = sla.cho_factor(M)
            except np.linalg.LinAlgError as exc:
                if near_optimal:
                    status = SLOW
                    break
                raise NumericalFailure("Schur complement is not positive definite", trace) from exc

        WRdW = [W @ R @ W for W, R in zip(Ws, Rd)]

        def direction(target_scaled):
            # target_scaled[k] is the right side of d o (dX~ + dZ~) = target in NT coordinates
            rhs_mats = []
            for (G, d), T in zip(scalings, target_scaled):
                S = 2.0 * T / (d[:, None] + d[None, :])
                rhs_mats.append(G @ S @ G.T)
            rhs = rp - q.apply(rhs_mats) + q.apply(WRdW)
            dy = sla.cho_solve(factor, rhs)
            ATdy = q.adjoint(dy)
            dZ = [R - A for R, A in zip(Rd, ATdy)]
            dX = [_sym(Rm - W @ dz @ W) for Rm, W, dz in zip(rhs_mats, Ws, dZ)]
            return dX, dy, dZ

        def steps(dX, dZ, fraction):
            ap = min([1.0] + [fraction * _max_step(Xk, d) for Xk, d in zip(X, dX)])
            ad = min([1.0] + [fraction * _max_step(Zk, d) for Zk, d in zip(Z, dZ)])
            return ap, ad

        # predictor
        target = [-np.diag(d ** 2) for _, d in scalings]
        dXa, dya, dZa = direction(target)
        ap, ad = steps(dXa, dZa, 1.0)
        mu_aff = _inner([Xk + ap * d for Xk, d in zip(X, dXa)], [Zk + ad * d for Zk, d in zip(Z, dZa)]) / N
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector
        target = []
        for (G, d), dx, dz in zip(scalings, dXa, dZa):
            Ginv = np.linalg.inv(G)
            dxs = Ginv @ dx @ Ginv.T
            dzs = G.T @ dz @ G
            target.append(sigma * mu * np.eye(len(d)) - np.diag(d ** 2) - _sym(dxs @ dzs))
        dX, dy, dZ = direction(target)
        fraction = 0.98 if it > 0 else 0.9
        ap, ad = steps(dX, dZ, fraction)
        X = [Xk + ap * d for Xk, d in zip(X, dX)]
        y = y + ad * dy
        Z = [Zk + ad * d for Zk, d in zip(Z, dZ)]
        tiny_steps = tiny_steps + 1 if max(ap, ad) < 1e-8 else 0
        if not all(np.all(np.isfinite(Xk)) for Xk in X) or not np.all(np.isfinite(y)):
            raise NumericalFailure("non-finite iterate", trace)

    full_y = np.zeros(full_m)
    full_y[reduced.keep] = y / reduced.scale
    AX = p.apply(X)
    ATy = p.adjoint(full_y)
    Rd_full = [np.array(Ck, float) - Zk - Ak for Ck, Zk, Ak in zip(p.C, Z, ATy)]
    return SdpResult(
        status,
        X,
        full_y,
        Z,
        p.objective(X),
        float(p.b @ full_y),
        trace[-1]["gap"],
        float(np.linalg.norm(p.b - AX)) / (1 + float(np.linalg.norm(p.b))),
        _fro(Rd_full) / (1 + _fro(p.C)),
        it,
        trace,
    )


def project_affine(p: SdpProblem, X: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Least-Frobenius-norm symmetric correction so that <A_i, X> = b_i exactly (up to rounding)."""
    m = p.num_constraints
    flat = np.concatenate([Ak.reshape(m, -1) for Ak in p.A], axis=1)
    residual = p.b - p.apply(X)
    coef, *_ = np.linalg.lstsq(flat @ flat.T, residual, rcond=None)
    correction = p.adjoint(coef)
    return [Xk + dk for Xk, dk in zip(X, correction)]
