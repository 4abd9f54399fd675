"""Command-line front end: certificates, relaxations, bound calculators and experiments."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

from . import bounds
from .certificate import certify, map_certificate_to_raw, verify_certificate
from .echelon import build_echelon, echelon_properties
from .errors import (
    ApproximationFailure,
    CertificateAssemblyMismatch,
    ConfigError,
    DegreeOverflow,
    EmptySetSuspected,
    InfeasibleAtLevel,
    IoError,
    MinCheckFailed,
    NumericalFailure,
    PutinarKitError,
)
from .gram import Certificate, jsonable
from .semialgebraic import Problem, check_cqc, estimate_lojasiewicz, f_star_and_epsilon, normalize

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (NumericalFailure, InfeasibleAtLevel, DegreeOverflow, MinCheckFailed, ApproximationFailure, EmptySetSuspected)


@dataclass
class RunConfig:
    command: str
    problem: Path | None = None
    cert: Path | None = None
    strategy: str = "direct"
    level: int | None = None
    levels: list[int] = field(default_factory=list)
    t: int = 1
    seed: int = 0
    tol: float = 1e-12
    out: Path | None = None
    formula: str | None = None
    json_path: Path | None = None
    delta: float | None = None
    k: float | None = None
    mode: str = "sos"
    timing: bool = False
    sweep: bool = False

    def validate(self) -> "RunConfig":
        if self.tol <= 0:
            raise ConfigError("--tol must be positive")
        if self.command in ("certify", "verify", "lasserre", "loja", "moments") and self.problem is None:
            raise ConfigError(f"{self.command} needs --problem")
        if self.command == "verify" and self.cert is None:
            raise ConfigError("verify needs --cert")
        if self.command == "lasserre" and not self.sweep and self.level is None:
            raise ConfigError("lasserre needs --level or --levels for a sweep")
        if (self.sweep or self.command == "moments") and self.command != "bound" and not self.levels:
            raise ConfigError("level range is empty")
        if self.command == "echelon" and (self.delta is None or self.k is None):
            raise ConfigError("echelon needs --delta and --k")
        if self.command == "bound" and (self.formula is None or self.json_path is None):
            raise ConfigError("bound needs --formula and --json")
        return self


def parse_levels(text: str | None) -> list[int]:
    """Accepts "a..b", "a..b:step" or a comma list."""
    if not text:
        return []
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            lo, hi = (int(v) for v in span.split(".."))
            return list(range(lo, hi + 1, int(step) if step else 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse level range {text!r}") from exc


def thread_cap() -> int:
    raw = os.environ.get("PUTINAR_KIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"PUTINAR_KIT_THREADS must be an integer, got {raw!r}") from exc


def ordered_map(fn: Callable, items: Sequence) -> list:
    """Map with at most PUTINAR_KIT_THREADS workers; results keep the input order."""
    workers = min(thread_cap(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def read_json(path: Path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def load_raw_problem(path: Path) -> Problem:
    return Problem.from_dict(read_json(path))


def emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    try:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {out}: {exc.strerror or exc}") from exc


def dumps(data) -> str:
    return json.dumps(jsonable(data), indent=2, sort_keys=True)


def fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def csv_text(header: Sequence[str], rows: Sequence[Sequence], comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def timestamp() -> str:
    return "generated " + datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def bound_inputs_for(prob: Problem, **extra) -> bounds.BoundInputs:
    est = f_star_and_epsilon(prob)
    return bounds.BoundInputs(
        n=prob.nvars,
        r=max(1, prob.r),
        d_g=max(1, prob.degree_g),
        d_f=max(1, prob.f.degree),
        epsilon_f=min(1.0, max(est.epsilon_f, 1e-12)),
        norm_f=max(est.norm_f, 1e-300),
        **extra,
    )


# commands

def cmd_certify(cfg: RunConfig) -> int:
    raw = load_raw_problem(cfg.problem)
    prob = normalize(raw)
    cert = certify(prob, cfg.strategy, max_level=cfg.level or 30, seed=cfg.seed)
    out = map_certificate_to_raw(cert, raw, prob)
    report = verify_certificate(out, raw.f, raw.g)
    out.metadata["verified_relative_residual"] = report.relative_residual
    emit(json.dumps(out.to_dict(), indent=1, sort_keys=True), cfg.out)
    if cfg.out is not None:
        print(f"level {out.level}, residual {out.residual:.3e}, verdict {'pass' if report.verdict else 'fail'}")
    return EXIT_OK if report.verdict else EXIT_VERIFY


def cmd_verify(cfg: RunConfig) -> int:
    raw = load_raw_problem(cfg.problem)
    try:
        cert = Certificate.from_dict(read_json(cfg.cert))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed certificate: {exc}") from exc
    report = verify_certificate(cert, raw.f, raw.g)
    emit(
        dumps(
            {
                "residual": report.residual,
                "relative_residual": report.relative_residual,
                "psd_report": {"ok": report.psd_ok, "min_eigenvalues": report.min_eigenvalues},
                "level_report": {"ok": report.level_ok, "level": cert.level, "max_degree": report.max_degree},
                "verdict": "pass" if report.verdict else "fail",
                "detail": report.detail,
            }
        ),
        cfg.out,
    )
    return EXIT_OK if report.verdict else EXIT_VERIFY


def cmd_lasserre(cfg: RunConfig) -> int:
    from .sos import lasserre

    prob = normalize(load_raw_problem(cfg.problem))
    if not cfg.sweep:
        res = lasserre(prob, cfg.level, tol=cfg.tol)
        data = {
            "order": res.order,
            "mode": cfg.mode,
            "value": res.sos_value if cfg.mode == "sos" else res.mom_value,
            "sos_value": res.sos_value,
            "mom_value": res.mom_value,
            "status": res.status,
            "residuals": {"certificate": res.diagnostics["residual"], "moment_min_eig": res.moment_min_eig},
        }
        if cfg.mode == "sos":
            data["certificate"] = res.certificate.to_dict()
        else:
            data["moments"] = {"exponents": [list(a) for a in res.moments.monomials], "values": res.moments.values.tolist()}
        emit(dumps(data), cfg.out)
        return EXIT_OK
    est = f_star_and_epsilon(prob, seed=cfg.seed)
    inputs = bound_inputs_for(prob)

    def run_level(ell: int):
        start = time.perf_counter()
        res = lasserre(prob, ell, tol=cfg.tol)
        elapsed = (time.perf_counter() - start) * 1000.0
        shape = bounds.lasserre_gap_bound(inputs.with_(ell=float(ell)))
        return (ell, res.sos_value, res.mom_value, est.f_star - res.sos_value, shape, round(elapsed, 3) if cfg.timing else None)

    rows = ordered_map(run_level, cfg.levels)
    emit(csv_text(("ell", "f_sos", "f_mom", "gap", "bound_shape", "runtime_ms"), rows, timestamp()), cfg.out)
    return EXIT_OK


def cmd_bound(cfg: RunConfig) -> int:
    if cfg.formula not in bounds.FORMULAS:
        raise ConfigError(f"unknown formula {cfg.formula!r}; choose from {', '.join(sorted(bounds.FORMULAS))}")
    fn, shape = bounds.FORMULAS[cfg.formula]
    data = read_json(cfg.json_path)
    if not isinstance(data, dict):
        raise ConfigError("bound inputs must be a JSON object")
    grid = data.pop("sweep", None)
    try:
        base = bounds.BoundInputs(**data)
    except TypeError as exc:
        raise ConfigError(f"unknown bound input: {exc}") from exc
    if not cfg.sweep:
        emit(dumps({"formula": cfg.formula, "value": fn(base), "shape": shape, "label": bounds.CONSTANT_FREE}), cfg.out)
        return EXIT_OK
    if not isinstance(grid, dict) or len(grid) != 1:
        raise ConfigError('--sweep needs a "sweep": {"<input>": [values...]} entry in the JSON inputs')
    (param, values), = grid.items()
    if not values:
        raise ConfigError("sweep value list is empty")
    rows = [(v, fn(base.with_(**{param: v}))) for v in values]
    emit(csv_text((param, cfg.formula), rows, f"{bounds.CONSTANT_FREE}: {shape}"), cfg.out)
    return EXIT_OK


def cmd_loja(cfg: RunConfig) -> int:
    prob = normalize(load_raw_problem(cfg.problem))
    est = estimate_lojasiewicz(prob, seed=cfg.seed)
    cqc = check_cqc(prob)
    emit(
        dumps(
            {
                "c_hat": est.c_hat,
                "L_hat": est.L_hat,
                "L_unclamped": est.L_unclamped,
                "sample_count": est.sample_count,
                "fit_residual": est.fit_residual,
                "cqc": {"holds": cqc.holds, "checked": cqc.checked, "witnesses": cqc.witnesses},
            }
        ),
        cfg.out,
    )
    return EXIT_OK


def cmd_moments(cfg: RunConfig) -> int:
    from .moments import hausdorff_estimate

    prob = normalize(load_raw_problem(cfg.problem))
    inputs = bound_inputs_for(prob, t=cfg.t)
    if any(ell < 2 * cfg.t for ell in cfg.levels):
        raise ConfigError("every level must be at least 2t")

    def run_level(ell: int):
        est = hausdorff_estimate(prob, cfg.t, ell, seed=cfg.seed)
        return (ell, est.dist_lower, bounds.tube_epsilon_for_level(inputs.with_(ell=float(ell))))

    rows = ordered_map(run_level, cfg.levels)
    emit(csv_text(("ell", "dist_lower", "theorem_bound_shape"), rows, timestamp()), cfg.out)
    return EXIT_OK


def cmd_echelon(cfg: RunConfig) -> int:
    import numpy as np

    ech = build_echelon(cfg.delta, cfg.k)
    props = echelon_properties(ech)
    emit(
        dumps(
            {
                "delta": ech.delta,
                "k": ech.k,
                "m": ech.m,
                "chebyshev_coefficients": ech.h.float_coeffs().tolist(),
                "report": props,
            }
        ),
        None,
    )
    if cfg.out is not None:
        t = np.linspace(-1.0, 1.0, 401)
        rows = zip(t.tolist(), ech.spline(t).tolist(), ech(t).tolist())
        emit(csv_text(("t", "H", "h"), list(rows)), cfg.out)
    return EXIT_OK


COMMANDS = {
    "certify": cmd_certify,
    "verify": cmd_verify,
    "lasserre": cmd_lasserre,
    "bound": cmd_bound,
    "loja": cmd_loja,
    "moments": cmd_moments,
    "echelon": cmd_echelon,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="putinar-kit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, *flags):
        p = sub.add_parser(name, help=help_text)
        for flag in flags:
            flag(p)
        return p

    problem = lambda p: p.add_argument("--problem", type=Path, help="problem JSON file")
    out = lambda p: p.add_argument("--out", type=Path, help="output file (default: stdout)")
    seed = lambda p: p.add_argument("--seed", type=int, default=0)
    tol = lambda p: p.add_argument("--tol", type=float, default=1e-12, help="relative duality-gap tolerance")
    timing = lambda p: p.add_argument("--timing", action="store_true", help="fill the runtime_ms column")

    c = add("certify", "find a quadratic-module certificate", problem, out, seed)
    c.add_argument("--strategy", choices=("direct", "perturbation", "boxchain"), default="direct")
    c.add_argument("--level", type=int, help="largest level tried (default 30)")
    v = add("verify", "re-check a certificate against a problem", problem, out)
    v.add_argument("--cert", type=Path)
    las = add("lasserre", "solve one relaxation or sweep over levels", problem, out, seed, tol, timing)
    las.add_argument("--level", type=int, help="relaxation order ell (level 2 ell)")
    las.add_argument("--mode", choices=("sos", "mom"), default="sos")
    las.add_argument("--sweep", "--levels", dest="levels_text", metavar="LMIN..LMAX", help="sweep orders")
    b = add("bound", "evaluate a degree-bound formula", out)
    b.add_argument("--formula")
    b.add_argument("--json", dest="json_path", type=Path, help="BoundInputs as JSON")
    b.add_argument("--sweep", action="store_true", help='CSV over the "sweep" entry of the inputs')
    add("loja", "fit the Lojasiewicz exponent and check CQC", problem, out, seed)
    mo = add("moments", "Hausdorff experiment over levels", problem, out, seed)
    mo.add_argument("--t", type=int, default=1)
    mo.add_argument("--levels", dest="levels_text", help="levels, e.g. 2,4,6")
    e = add("echelon", "build the echelon polynomial", out)
    e.add_argument("--delta", type=float)
    e.add_argument("--k", type=float)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    levels_text = getattr(ns, "levels_text", None)
    levels = parse_levels(levels_text)
    sweep = bool(getattr(ns, "sweep", False)) if ns.command == "bound" else levels_text is not None
    return RunConfig(
        command=ns.command,
        problem=getattr(ns, "problem", None),
        cert=getattr(ns, "cert", None),
        strategy=getattr(ns, "strategy", "direct"),
        level=getattr(ns, "level", None),
        levels=levels,
        t=getattr(ns, "t", 1),
        seed=getattr(ns, "seed", 0),
        tol=getattr(ns, "tol", 1e-12),
        out=getattr(ns, "out", None),
        formula=getattr(ns, "formula", None),
        json_path=getattr(ns, "json_path", None),
        delta=getattr(ns, "delta", None),
        k=getattr(ns, "k", None),
        mode=getattr(ns, "mode", "sos"),
        timing=getattr(ns, "timing", False),
        sweep=sweep,
    ).validate()


def run(cfg: RunConfig) -> int:
    return COMMANDS[cfg.command](cfg)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return run(config_from_args(ns))
    except CertificateAssemblyMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except NUMERIC_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PutinarKitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
