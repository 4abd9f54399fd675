"""Gram-matrix representations of sums of squares and quadratic-module certificates."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidParameter, NotPsd
from .poly import Exponent, MultiPoly, grlex_key

PSD_REL_TOL = 1e-8
RES_REL_TOL = 1e-7


def jsonable(value):
    """Plain JSON types; non-finite floats become the strings "inf", "-inf", "nan"."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if np.isfinite(v) else str(v)
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    return value


@dataclass
class GramCertificatePart:
    """The sum of squares v(X)^T G v(X) for a monomial basis v."""

    basis: tuple[Exponent, ...]
    gram: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        self.basis = tuple(tuple(int(e) for e in b) for b in self.basis)
        self.gram = np.asarray(self.gram, float)
        if self.gram.shape != (len(self.basis), len(self.basis)):
            raise InvalidParameter("Gram matrix does not match the basis size")
        self.gram = 0.5 * (self.gram + self.gram.T)

    @property
    def nvars(self) -> int:
        return len(self.basis[0]) if self.basis else 0

    @property
    def degree(self) -> int:
        return 2 * max((sum(b) for b in self.basis), default=0)

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.gram)[0]) if len(self.basis) else 0.0

    def psd_tolerance(self) -> float:
        return PSD_REL_TOL * max(1.0, float(np.max(np.abs(np.linalg.eigvalsh(self.gram))))) if len(self.basis) else 0.0

    def is_psd(self) -> bool:
        return self.min_eigenvalue >= -self.psd_tolerance()

    def polynomial(self) -> MultiPoly:
        out: dict[Exponent, float] = {}
        for i, a in enumerate(self.basis):
            for j, b in enumerate(self.basis):
                c = self.gram[i, j]
                if c != 0.0:
                    key = tuple(x + y for x, y in zip(a, b))
                    out[key] = out.get(key, 0.0) + c
        return MultiPoly(out, self.nvars)

    def scaled(self, factor: float) -> "GramCertificatePart":
        return GramCertificatePart(self.basis, self.gram * factor, self.residual)

    def to_dict(self) -> dict:
        return {"basis": [list(b) for b in self.basis], "gram": self.gram.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "GramCertificatePart":
        return cls(tuple(tuple(b) for b in data["basis"]), np.array(data["gram"], float).reshape(len(data["basis"]), -1))


def coefficient_matrix(polys: Sequence[MultiPoly]) -> tuple[tuple[Exponent, ...], np.ndarray]:
    """Union monomial basis (grlex) and the matrix Q with polys[i] = sum_j Q[i, j] basis[j]."""
    keys: set[Exponent] = set()
    for p in polys:
        keys.update(a for a, _ in p.items())
    basis = tuple(sorted(keys, key=grlex_key))
    index = {a: j for j, a in enumerate(basis)}
    Q = np.zeros((len(polys), len(basis)))
    for i, p in enumerate(polys):
        for a, c in p.items():
            Q[i, index[a]] = c
    return basis, Q


def gram_over_polys(polys: Sequence[MultiPoly], G: np.ndarray) -> GramCertificatePart:
    """Rewrite w^T G w, with w a vector of polynomials, over a monomial basis."""
    basis, Q = coefficient_matrix(polys)
    if not basis:
        nvars = polys[0].nvars
        return GramCertificatePart(((0,) * nvars,), np.zeros((1, 1)))
    return GramCertificatePart(basis, Q.T @ G @ Q)


def basis_polys(part: GramCertificatePart) -> list[MultiPoly]:
    return [MultiPoly.monomial(b) for b in part.basis]


def gram_times_square(part: GramCertificatePart, q: MultiPoly) -> GramCertificatePart:
    """Gram part of q^2 times the part."""
    return gram_over_polys([v * q for v in basis_polys(part)], part.gram)


def gram_times_squares(part: GramCertificatePart, squares: Sequence[tuple[float, MultiPoly]]) -> list[GramCertificatePart]:
    """Parts for sum_j w_j q_j^2 times the part (w_j >= 0)."""
    return [gram_times_square(part, q).scaled(w) for w, q in squares if w != 0.0]


def gram_product(p1: GramCertificatePart, p2: GramCertificatePart) -> GramCertificatePart:
    """Gram part of the product of two sums of squares (Kronecker product of the Gram matrices)."""
    polys = [MultiPoly.monomial(tuple(x + y for x, y in zip(a, b))) for a in p1.basis for b in p2.basis]
    return gram_over_polys(polys, np.kron(p1.gram, p2.gram))


def compose_gram(part: GramCertificatePart, g: MultiPoly) -> GramCertificatePart:
    """Substitute the univariate basis T^a -> g^a into a univariate Gram part."""
    if part.nvars != 1:
        raise InvalidParameter("composition needs a univariate Gram part")
    powers = {}
    polys = []
    for (a,) in part.basis:
        if a not in powers:
            powers[a] = g ** a
        polys.append(powers[a])
    return gram_over_polys(polys, part.gram)


def merge_parts(parts: Sequence[GramCertificatePart]) -> GramCertificatePart:
    """Sum several Gram parts over the union of their bases."""
    keys: set[Exponent] = set()
    for p in parts:
        keys.update(p.basis)
    basis = tuple(sorted(keys, key=grlex_key))
    index = {a: j for j, a in enumerate(basis)}
    G = np.zeros((len(basis), len(basis)))
    for p in parts:
        idx = [index[b] for b in p.basis]
        G[np.ix_(idx, idx)] += p.gram
    return GramCertificatePart(basis, G, sum(p.residual for p in parts))


def gram_to_sos(part: GramCertificatePart, psd_tol: float | None = None) -> tuple[list[MultiPoly], float]:
    """Explicit squares q_j with sum q_j^2 close to the Gram polynomial, and the coefficient residual."""
    vals, vecs = np.linalg.eigh(part.gram)
    tol = part.psd_tolerance() if psd_tol is None else psd_tol
    if len(vals) and vals[0] < -tol:
        raise NotPsd(f"Gram matrix has eigenvalue {vals[0]:.3g} below -{tol:.3g}")
    squares = []
    for lam, v in zip(vals, vecs.T):
        if lam <= 0:
            continue
        terms = {b: float(np.sqrt(lam) * c) for b, c in zip(part.basis, v) if c != 0.0}
        q = MultiPoly(terms, part.nvars)
        if not q.is_zero():
            squares.append(q)
    total = MultiPoly.const(0.0, part.nvars)
    for q in squares:
        total = total + q * q
    residual = (total - part.polynomial()).coeff_norm()
    return squares, residual


@dataclass
class CertificatePart:
    generator_index: int | None  # None for the pure sum of squares
    gram: GramCertificatePart
    kind: str = "sos"


@dataclass
class Certificate:
    """target = sum_j sigma_j * generators[j] (+ sigma_0) with each sigma a Gram part."""

    target: MultiPoly
    generators: tuple[MultiPoly, ...]
    parts: list[CertificatePart]
    level: int
    residual: float = 0.0
    provenance: str = "direct-sdp"
    metadata: dict = field(default_factory=dict)

    @property
    def nvars(self) -> int:
        return self.target.nvars

    def assembled(self) -> MultiPoly:
        total = MultiPoly.const(0.0, self.nvars)
        for part in self.parts:
            sigma = part.gram.polynomial()
            if part.generator_index is None:
                total = total + sigma
            else:
                total = total + sigma * self.generators[part.generator_index]
        return total

    def part_degrees(self) -> list[int]:
        out = []
        for part in self.parts:
            d = part.gram.degree
            if part.generator_index is not None:
                d += self.generators[part.generator_index].degree
            out.append(d)
        return out

    def min_eigenvalue(self) -> float:
        return min((p.gram.min_eigenvalue for p in self.parts), default=0.0)

    def compacted(self) -> "Certificate":
        """Merge parts that share a generator."""
        groups: dict = {}
        for part in self.parts:
            groups.setdefault(part.generator_index, []).append(part)
        order = sorted(groups, key=lambda k: -1 if k is None else k)
        parts = [
            CertificatePart(k, merge_parts([p.gram for p in groups[k]]), groups[k][0].kind if len(groups[k]) == 1 else "merged")
            for k in order
        ]
        return Certificate(self.target, self.generators, parts, self.level, self.residual, self.provenance, dict(self.metadata))

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "nvars": self.nvars,
            "provenance": self.provenance,
            "residual": self.residual,
            "target": self.target.to_dict(),
            "generators": [g.to_dict() for g in self.generators],
            "parts": [
                {"kind": p.kind, "generator_index": p.generator_index, **p.gram.to_dict()} for p in self.parts
            ],
            "metadata": jsonable(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Certificate":
        try:
            target = MultiPoly.from_dict(data["target"])
            gens = tuple(MultiPoly.from_dict(g) for g in data.get("generators", []))
            parts = [
                CertificatePart(p.get("generator_index"), GramCertificatePart.from_dict(p), p.get("kind", "sos"))
                for p in data["parts"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParameter(f"malformed certificate JSON: {exc}") from exc
        return cls(
            target,
            gens,
            parts,
            int(data["level"]),
            float(data.get("residual", 0.0)),
            data.get("provenance", "direct-sdp"),
            dict(data.get("metadata", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        return cls.from_dict(json.loads(text))
