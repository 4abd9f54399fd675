"""C^2 cubic-spline step function and its Chebyshev approximation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from numpy.polynomial import chebyshev as npcheb
from scipy.fft import dct

from .errors import ApproximationFailure, InvalidParameter
from .poly import UniPoly

SAMPLE_POINTS = 10_000


def _validate(delta: float, k: float):
    if not (0.0 < delta <= 1.0):
        raise InvalidParameter(f"delta must lie in (0, 1], got {delta}")
    if not k > 1.0:
        raise InvalidParameter(f"k must exceed 1, got {k}")


@dataclass(frozen=True)
class SplineEchelon:
    """Step from 1 (left of -delta) down to 1/k (right of 0), cubic in between."""

    delta: float
    k: float
    breakpoints: tuple[float, ...] = field(init=False)
    pieces: tuple[tuple[float, float, float, float], ...] = field(init=False)

    def __post_init__(self):
        d, k = self.delta, self.k
        q = (k - 1) / k
        pieces = (
            (1.0, 0.0, 0.0, 0.0),
            (-(7 * k - 9) / (2 * k), -27 * q / (2 * d), -27 * q / (2 * d ** 2), -9 * q / (2 * d ** 3)),
            ((k + 1) / (2 * k), 9 * q / (2 * d), 27 * q / (2 * d ** 2), 9 * q / d ** 3),
            (1.0 / k, 0.0, 0.0, -9 * q / (2 * d ** 3)),
            (1.0 / k, 0.0, 0.0, 0.0),
        )
        object.__setattr__(self, "breakpoints", (-1.0, -d, -2 * d / 3, -d / 3, 0.0, 1.0))
        object.__setattr__(self, "pieces", pieces)

    def piece_index(self, t) -> np.ndarray:
        inner = np.asarray(self.breakpoints[1:-1])
        return np.searchsorted(inner, np.asarray(t, float), side="left")

    def evaluate_piece(self, index: int, t, derivative: int = 0):
        c = np.polynomial.polynomial.polyder(self.pieces[index], derivative) if derivative else self.pieces[index]
        return np.polynomial.polynomial.polyval(t, c)

    def __call__(self, t, derivative: int = 0):
        t = np.asarray(t, float)
        idx = self.piece_index(t)
        out = np.zeros_like(t)
        for i in range(5):
            mask = idx == i
            if np.any(mask):
                out[mask] = self.evaluate_piece(i, t[mask], derivative)
        return float(out) if out.ndim == 0 else out

    def continuity_jumps(self) -> list[tuple[float, int, float]]:
        """(breakpoint, derivative order, |left - right|) for each interior breakpoint."""
        out = []
        for i, b in enumerate(self.breakpoints[1:-1]):
            for order in range(3):
                left = self.evaluate_piece(i, b, order)
                right = self.evaluate_piece(i + 1, b, order)
                out.append((b, order, abs(float(left) - float(right))))
        return out


def build_spline(delta: float, k: float) -> SplineEchelon:
    _validate(delta, k)
    return SplineEchelon(float(delta), float(k))


def total_variation(s: SplineEchelon) -> float:
    """Total variation of the third derivative of the spline."""
    return 216.0 * (s.k - 1) / (s.delta ** 3 * s.k)


def third_derivative_variation(s: SplineEchelon) -> float:
    """Same quantity measured from the jumps of the piecewise-constant H'''."""
    thirds = [6.0 * p[3] for p in s.pieces]
    return float(sum(abs(b - a) for a, b in zip(thirds, thirds[1:])))


def echelon_degree(delta: float, k: float) -> int:
    _validate(delta, k)
    with mpmath.workdps(50):
        d = mpmath.mpf(delta)
        kk = mpmath.mpf(k)
        value = (6 / d) * mpmath.cbrt(4 * (kk - 1) / (3 * mpmath.pi)) + 3
        return int(mpmath.ceil(value))


@dataclass(frozen=True)
class EchelonPoly:
    h: UniPoly
    k: float
    m: int
    delta: float
    sup_error_estimate: float

    def __call__(self, t):
        return npcheb.chebval(t, self.h.float_coeffs())

    @property
    def spline(self) -> SplineEchelon:
        return SplineEchelon(self.delta, self.k)


def chebyshev_projection(func, degree: int, nodes: int | None = None) -> np.ndarray:
    """Chebyshev coefficients c_0..c_degree by Clenshaw-Curtis quadrature on ``nodes`` intervals."""
    nodes = nodes or 8 * max(degree, 1)
    theta = np.pi * np.arange(nodes + 1) / nodes
    values = func(np.cos(theta))
    coefs = dct(values, type=1) / nodes
    coefs[0] /= 2
    return coefs[: degree + 1]


def echelon_properties(ech: EchelonPoly, points: int = SAMPLE_POINTS) -> dict[str, float | bool]:
    t = np.linspace(-1.0, 1.0, points)
    h = ech(t)
    err = float(np.max(np.abs(ech.spline(t) - h)))
    inv_k = 1.0 / ech.k
    left = h[t <= -ech.delta]
    right = h[t >= 0]
    return {
        "sup_error": err,
        "error_ok": err <= inv_k,
        "range_ok": bool(np.all(h >= 0) and np.all(h <= 1 + inv_k)),
        "left_ok": bool(np.all(left >= 1 - inv_k)),
        "right_ok": bool(np.all(right <= 2 * inv_k)),
    }


def build_echelon(delta: float, k: float, m: int | None = None) -> EchelonPoly:
    """Chebyshev projection of the spline step at the guaranteed degree (or a given m)."""
    spline = build_spline(delta, k)
    m = echelon_degree(delta, k) if m is None else int(m)
    if m < 0:
        raise InvalidParameter("degree must be nonnegative")
    coefs = chebyshev_projection(spline, m, 8 * max(m, 1))
    ech = EchelonPoly(UniPoly(coefs.tolist(), "chebyshev"), spline.k, m, spline.delta, math.nan)
    props = echelon_properties(ech)
    ech = EchelonPoly(ech.h, ech.k, m, ech.delta, props["sup_error"])
    failed = [name for name in ("error_ok", "range_ok", "left_ok", "right_ok") if not props[name]]
    if failed:
        raise ApproximationFailure(
            f"echelon (delta={delta}, k={k}, m={m}) fails {failed}; sup error {props['sup_error']:.3g}"
        )
    return ech
