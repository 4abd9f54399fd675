"""Desk-scale benchmark problems used by the tests, the acceptance run and the CLI."""
from __future__ import annotations

from dataclasses import dataclass

from .certificate import PerturbationParams
from .poly import MultiPoly
from .semialgebraic import Problem, normalize


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    raw: Problem
    r_ball: float = 1.0
    f_star: float | None = None  # exact minimum on S when known
    small_params: PerturbationParams | None = None  # perturbation sizing that passes the min check

    def problem(self) -> Problem:
        return normalize(self.raw, r_ball=self.r_ball)


def _x(n: int):
    return MultiPoly.variables(n)


def _ball(n: int, rho2: float = 1.0) -> MultiPoly:
    X = _x(n)
    return rho2 - sum((x * x for x in X), MultiPoly.const(0.0, n))


def suite_entries() -> list[SuiteEntry]:
    (X,) = _x(1)
    Y = _x(2)
    Z = _x(3)
    small = PerturbationParams(1.0, 0.5, 2.0, 8, 0.0)
    return [
        SuiteEntry("interval_linear", Problem(X + 2, (1 - X * X,), "interval_linear"), f_star=1.0),
        SuiteEntry("interval_shift", Problem(X + 1.5, (1 - X * X,), "interval_shift"), f_star=0.5),
        SuiteEntry("shifted_square", Problem((X - 2) ** 2, (0.25 - X * X,), "shifted_square"), f_star=2.25),
        SuiteEntry(
            "inverted_parabola",
            Problem(1 - 0.3 * X * X, (0.04 - X * X,), "inverted_parabola"),
            f_star=0.988,
            small_params=small,
        ),
        SuiteEntry(
            "disk_quadratic",
            Problem((Y[0] - 0.3) ** 2 + (Y[1] + 0.2) ** 2 + 0.1, (_ball(2),), "disk_quadratic"),
            f_star=0.1,
        ),
        SuiteEntry(
            "half_disk",
            Problem(Y[0] + Y[1] + 2, (_ball(2), Y[0]), "half_disk"),
            f_star=1.0,
        ),
        SuiteEntry(
            "ball3_cubic",
            Problem(Z[0] * Z[1] * Z[2] + 1, (_ball(3),), "ball3_cubic"),
            f_star=1 - 3 ** -1.5,
        ),
    ]


def suite_problems() -> dict[str, Problem]:
    return {e.name: e.problem() for e in suite_entries()}


def lasserre_cases() -> dict[str, tuple[Problem, float]]:
    """Problems with known minima (possibly nonpositive) for the relaxation checks."""
    (X,) = _x(1)
    Y = _x(2)
    disk = Problem((Y[0] - 0.3) ** 2 + (Y[1] + 0.2) ** 2, (_ball(2),), "disk_shifted_center")
    return {
        "interval_identity": (Problem(X, (1 - X * X,), "interval_identity"), -1.0),
        "interval_square": (Problem(X * X, (1 - X * X,), "interval_square"), 0.0),
        "disk_shifted_center": (disk, 0.0),
    }
