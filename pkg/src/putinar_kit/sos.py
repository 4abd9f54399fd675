"""Quadratic-module SDPs: certificate search and the Lasserre SoS/moment relaxations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InfeasibleAtLevel, InvalidParameter, NumericalFailure
from .gram import RES_REL_TOL, Certificate, CertificatePart, GramCertificatePart
from .moments import PseudoMomentSeq, localizing_matrix, moment_matrix
from .poly import Exponent, MultiPoly, monomials_upto
from .sdp import INFEASIBLE, OPTIMAL, SLOW, UNBOUNDED, SdpProblem, SdpResult, project_affine, solve_sdp
from .semialgebraic import Problem

PSD_REL_TOL = 1e-8


class QuadraticModuleSdp:
    """Gram blocks for sigma_0 + sum sigma_i g_i with every term of degree <= level.

    ``B[k][a]`` is the matrix with <B[k][a], X_k> = coefficient of X^a in the
    polynomial represented by block k.
    """

    def __init__(self, nvars: int, generators: Sequence[MultiPoly], level: int):
        if level < 0:
            raise InvalidParameter("level must be nonnegative")
        self.nvars = nvars
        self.generators = tuple(generators)
        self.level = level
        self.monomials = monomials_upto(nvars, level)
        self.index = {a: i for i, a in enumerate(self.monomials)}
        self.blocks: list[tuple[int | None, tuple[Exponent, ...]]] = [(None, tuple(monomials_upto(nvars, level // 2)))]
        for i, g in enumerate(self.generators):
            half = (level - g.degree) // 2
            if level - g.degree >= 0:
                self.blocks.append((i, tuple(monomials_upto(nvars, half))))
        M = len(self.monomials)
        self.B: list[np.ndarray] = []
        for gen, basis in self.blocks:
            nk = len(basis)
            Bk = np.zeros((M, nk, nk))
            weights = [((0,) * nvars, 1.0)] if gen is None else list(self.generators[gen].items())
            for i, a in enumerate(basis):
                for j, b in enumerate(basis):
                    ab = tuple(x + y for x, y in zip(a, b))
                    for d, c in weights:
                        Bk[self.index[tuple(x + y for x, y in zip(ab, d))], i, j] += c
            self.B.append(Bk)

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for _, b in self.blocks)

    def coefficient_vector(self, p: MultiPoly) -> np.ndarray:
        v = np.zeros(len(self.monomials))
        for a, c in p.items():
            if a not in self.index:
                raise InvalidParameter(f"monomial {a} exceeds the level {self.level}")
            v[self.index[a]] = c
        return v

    def problem(self, rows: Sequence[int], b: np.ndarray, cost_row: int | None) -> SdpProblem:
        A = tuple(Bk[list(rows)] for Bk in self.B)
        if cost_row is None:
            C = tuple(np.zeros((nk, nk)) for nk in self.block_sizes)
        else:
            C = tuple(Bk[cost_row] for Bk in self.B)
        return SdpProblem(self.block_sizes, A, np.asarray(b, float), C)

    def parts(self, X: Sequence[np.ndarray], kind: str = "sos") -> list[CertificatePart]:
        return [
            CertificatePart(gen, GramCertificatePart(basis, Xk), kind)
            for (gen, basis), Xk in zip(self.blocks, X)
        ]


def clean_gram_blocks(sdp: SdpProblem, X: Sequence[np.ndarray], rounds: int = 8) -> tuple[list[np.ndarray], float]:
    """Alternate affine projection and eigenvalue clipping; returns blocks and worst relative min eigenvalue."""
    X = [0.5 * (Xk + Xk.T) for Xk in X]

    def worst(Xs):
        out = 0.0
        for Xk in Xs:
            if Xk.size:
                lam = np.linalg.eigvalsh(Xk)
                out = min(out, lam[0] / max(1.0, float(np.max(np.abs(lam)))))
        return out

    X = project_affine(sdp, X)
    for _ in range(rounds):
        if worst(X) >= -PSD_REL_TOL:
            break
        clipped = []
        for Xk in X:
            lam, vec = np.linalg.eigh(0.5 * (Xk + Xk.T))
            clipped.append((vec * np.maximum(lam, 0.0)) @ vec.T)
        X = project_affine(sdp, clipped)
    X = [0.5 * (Xk + Xk.T) for Xk in X]
    return X, worst(X)


def _acceptable(res: SdpResult, slow_tol: float = 1e-6) -> bool:
    if res.status == OPTIMAL:
        return True
    return (
        res.status == SLOW
        and res.primal_infeasibility <= slow_tol
        and res.dual_infeasibility <= slow_tol
        and res.gap <= slow_tol
    )


def sos_feasibility(
    target: MultiPoly,
    generators: Sequence[MultiPoly],
    ell: int,
    res_tol: float = RES_REL_TOL,
    tol: float = 1e-10,
) -> Certificate:
    """Search for target = sigma_0 + sum sigma_i g_i with every term of degree <= ell."""
    if target.degree > ell:
        raise InvalidParameter(f"level {ell} is below the target degree {target.degree}")
    qm = QuadraticModuleSdp(target.nvars, generators, ell)
    b = qm.coefficient_vector(target)
    sdp = qm.problem(range(len(qm.monomials)), b, None)
    res = solve_sdp(sdp, tol=tol)
    if res.status in (INFEASIBLE, UNBOUNDED) or not _acceptable(res, 1e-5):
        raise InfeasibleAtLevel(f"no representation found at level {ell} ({res.status})", ell)
    X, worst = clean_gram_blocks(sdp, res.X)
    cert = Certificate(target, tuple(generators), qm.parts(X), ell, provenance="direct-sdp")
    cert.residual = (target - cert.assembled()).coeff_norm()
    cert.metadata.update(sdp_status=res.status, iterations=res.iterations, min_eig_rel=worst)
    if worst < -PSD_REL_TOL or cert.residual > res_tol * (1 + target.coeff_norm()):
        raise InfeasibleAtLevel(
            f"solver point at level {ell} does not clean up to a certificate "
            f"(residual {cert.residual:.2e}, min eigenvalue {worst:.2e})",
            ell,
        )
    return cert


@dataclass
class LasserreResult:
    order: int
    sos_value: float
    mom_value: float
    status: str
    certificate: Certificate | None
    moments: PseudoMomentSeq | None
    moment_min_eig: float
    iterations: int
    diagnostics: dict = field(default_factory=dict)


def _check_order(prob: Problem, ell: int):
    if 2 * ell < prob.f.degree:
        raise InvalidParameter(f"order {ell} is below ceil(deg f / 2) = {math.ceil(prob.f.degree / 2)}")


def lasserre(prob: Problem, ell: int, tol: float = 1e-12) -> LasserreResult:
    """Solve the order-ell relaxation pair over the quadratic module truncated at degree 2 ell."""
    _check_order(prob, ell)
    qm = QuadraticModuleSdp(prob.nvars, prob.g, 2 * ell)
    fvec = qm.coefficient_vector(prob.f)
    rows = list(range(1, len(qm.monomials)))
    sdp = qm.problem(rows, fvec[1:], 0)
    res = solve_sdp(sdp, tol=tol)
    if res.status == INFEASIBLE:
        raise InfeasibleAtLevel(f"f - lambda has no representation at order {ell}", ell)
    if res.status == UNBOUNDED:
        raise InfeasibleAtLevel(f"moment side infeasible at order {ell}: S may be empty", ell)
    if not _acceptable(res):
        raise NumericalFailure(f"relaxation at order {ell} ended with {res.status}", res.trace)

    X, worst = clean_gram_blocks(sdp, res.X)
    const = fvec[0]
    sos_value = const - sdp.objective(X)
    target = prob.f - sos_value
    cert = Certificate(target, prob.g, qm.parts(X), 2 * ell, provenance="lasserre-sos")
    cert.residual = (target - cert.assembled()).coeff_norm()
    cert.metadata.update(sdp_status=res.status, min_eig_rel=worst)

    values = {qm.monomials[0]: 1.0}
    for row, yv in zip(rows, res.y):
        values[qm.monomials[row]] = -float(yv)
    L = PseudoMomentSeq(prob.nvars, 2 * ell, values)
    mom_value = L.pair(prob.f)
    mats = [moment_matrix(L, ell).matrix]
    for gen, basis in qm.blocks[1:]:
        mats.append(localizing_matrix(L, prob.g[gen], len(basis) and max(sum(b) for b in basis)))
    min_eig = min(float(np.linalg.eigvalsh(Mk)[0]) for Mk in mats if Mk.size)
    return LasserreResult(
        ell,
        float(sos_value),
        float(mom_value),
        res.status,
        cert,
        L,
        min_eig,
        res.iterations,
        {"relative_gap": res.gap, "sos_min_eig_rel": worst, "residual": cert.residual},
    )


def lasserre_sos(prob: Problem, ell: int, tol: float = 1e-12) -> LasserreResult:
    return lasserre(prob, ell, tol)


def lasserre_mom(prob: Problem, ell: int, tol: float = 1e-12) -> LasserreResult:
    return lasserre(prob, ell, tol)


def moment_sdp(
    prob: Problem,
    level: int,
    objective: dict[Exponent, float],
) -> tuple[PseudoMomentSeq, SdpResult]:
    """Minimize sum_a objective[a] L_a over normalized L in the dual cone of the level-truncated module."""
    qm = QuadraticModuleSdp(prob.nvars, prob.g, level)
    cvec = np.zeros(len(qm.monomials))
    for a, c in objective.items():
        cvec[qm.index[a]] = c
    rows = list(range(1, len(qm.monomials)))
    sdp = qm.problem(rows, cvec[1:], 0)
    res = solve_sdp(sdp, tol=1e-9)
    if not _acceptable(res):
        raise NumericalFailure(f"moment problem at level {level} ended with {res.status}", res.trace)
    values = {qm.monomials[0]: 1.0}
    for row, yv in zip(rows, res.y):
        values[qm.monomials[row]] = -float(yv)
    return PseudoMomentSeq(prob.nvars, level, values), res
