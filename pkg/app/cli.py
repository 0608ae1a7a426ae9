"""Command-line front end.

Each invocation parses one ``RunConfig``, dispatches to the numerical modules,
writes the full report atomically (JSON or plot-ready CSV), prints a one-line
JSON summary on stdout and records the run in the ledger. Exit status is 0 on
certified success, 2 when a result carries an uncertified flag (tail, aliasing,
failed check) and 1 on error. Nothing is written when the arguments do not parse.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator
from sqlalchemy.exc import SQLAlchemyError

from .config import Settings, get_settings
from .corpus import (
    ALGEBRA_CORPUS,
    canonical_function_id,
    fourier_decay_fit,
    gevrey_bump_density,
    gevrey_order,
    make_corpus,
    make_function,
    parse_function_id,
)
from .decomposition import Grid, Partition, SampledFunction, forward_transform, inverse_transform, partition_report
from .errors import ModspaceError, SpecParseError
from .inequality_lab import (
    DEFAULT_LAMBDAS,
    ConstantsReport,
    SubalgebraParams,
    Variant,
    algebra_ratio,
    algebra_report,
    choose_variant,
    constants_table,
    exp_map_continuity,
    holder_exponent,
    inverse_incomplete_gamma,
    measure_condition_check,
    subalgebra_constant,
    superposition_growth,
)
from .ledger import RunLedger
from .logs import configure_logging
from .mod_norm import NormParams, embedding_check, modulation_norm, window_equivalence
from .reports import Report, write_csv, write_json_report
from .weight_class import (
    B_CONSTANT,
    GridSpec1D,
    SubadditivityCertificate,
    SubadditivityFailure,
    SubadditivityViolation,
    XTilde,
    check_conditions,
    compute_x_tilde,
    doubling_trend,
    find_doubling_D,
    find_subadditivity_s,
    verify_subadditivity,
)
from .weight_core import canonical_weight_spec, make_weight, parse_weight_spec
from .weight_sequence import associated_sequence, check_log_convexity

logger = structlog.get_logger(__name__)

Command = Literal[
    "validate-weight",
    "assoc-seq",
    "find-s",
    "norm",
    "algebra",
    "superposition",
    "constants",
    "decay",
    "report-all",
]
COMMANDS: Tuple[str, ...] = (
    "validate-weight",
    "assoc-seq",
    "find-s",
    "norm",
    "algebra",
    "superposition",
    "constants",
    "decay",
    "report-all",
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNCERTIFIED = 2

DEFAULT_FUNCTION = {
    "norm": "gaussian:sigma=1",
    "decay": "gevrey:mu=-1",
    "superposition": "gevrey:mu=-2",
}
NEEDS_FREQUENCY_RANGE = ("norm", "algebra", "superposition")

# field name -> flag; integer fields are parsed with int
_FLAGS: Dict[str, str] = {
    "p": "--p",
    "q": "--q",
    "p1": "--p1",
    "p2": "--p2",
    "grid_n": "--grid-n",
    "grid_L": "--grid-L",
    "grid_N": "--grid-N",
    "k_max": "--k-max",
    "tail_tol": "--tail-tol",
    "theta": "--theta",
    "N": "--N",
    "alpha": "--alpha",
    "s": "--s",
    "c": "--c",
    "delta": "--delta",
    "p_max": "--p-max",
    "X": "--X",
    "h": "--h",
    "probe_max": "--probe-max",
}
_INT_FIELDS = {"grid_n", "grid_N", "k_max", "N", "p_max"}
_VARIANTS: Dict[str, Variant] = {"rv_a": "RV_a", "rv_b": "RV_b", "sv": "SV"}


def _fmt(value: float) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}") from exc


class RunConfig(BaseModel):
    """One fully resolved command line."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    command: Command
    weight_spec: str = "gevrey:s=2"
    function_ids: List[str] = []
    p: float = 2.0
    q: float = 1.0
    p1: float = 2.0
    p2: float = 2.0
    grid_n: int = 1
    grid_L: float = 32.0
    grid_N: int = 4096
    k_max: int = 48
    tail_tol: float = 1e-8
    theta: float = 2.0
    lambdas: List[float] = list(DEFAULT_LAMBDAS)
    radii: List[float] = [2.0, 4.0, 8.0, 16.0]
    variant: Variant = "RV_a"
    N: int = 3
    alpha: float = 0.5
    s: float = 1.0
    c: float = 1.0
    delta: float = 0.0
    p_max: int = 20
    X: float = 200.0
    h: float = 0.25
    probe_max: float = 1e6
    output: Optional[Path] = None
    format: Literal["json", "csv"] = "json"

    @field_validator("weight_spec")
    @classmethod
    def _canonical_weight(cls, value: str) -> str:
        spec = parse_weight_spec(value)
        make_weight(spec)
        return canonical_weight_spec(spec)

    @field_validator("function_ids")
    @classmethod
    def _canonical_functions(cls, value: List[str]) -> List[str]:
        return [canonical_function_id(parse_function_id(item)) for item in value]

    @model_validator(mode="after")
    def _check_combination(self) -> "RunConfig":
        if self.p < 1 or self.q < 1 or self.p1 < 1 or self.p2 < 1:
            raise ValueError("exponents must be at least 1")
        grid = self.grid()
        if self.command in NEEDS_FREQUENCY_RANGE and self.k_max + 1 > grid.xi_max:
            raise ValueError(f"k_max={self.k_max} exceeds the grid frequency range {grid.xi_max:.2f}")
        if self.command == "algebra":
            expected = holder_exponent(self.p1, self.p2)
            inv_p = 0.0 if math.isinf(self.p) else 1.0 / self.p
            inv_expected = 0.0 if math.isinf(expected) else 1.0 / expected
            if abs(inv_p - inv_expected) > 1e-12:
                raise ValueError(f"1/p = {inv_p} differs from 1/p1 + 1/p2 = {inv_expected}")
        if self.command in ("norm", "decay", "superposition") and len(self.function_ids) > 1:
            raise ValueError(f"{self.command} takes a single function")
        return self

    def grid(self) -> Grid:
        return Grid(n=self.grid_n, L=self.grid_L, N=self.grid_N)

    def to_argv(self) -> List[str]:
        """Canonical command line; parsing it yields an equal config."""

        argv = [self.command, "--weight", self.weight_spec]
        for function_id in self.function_ids:
            argv += ["--function", function_id]
        for name, flag in _FLAGS.items():
            argv += [flag, _fmt(getattr(self, name))]
        argv += ["--lambdas", ",".join(_fmt(v) for v in self.lambdas)]
        argv += ["--R", ",".join(_fmt(v) for v in self.radii)]
        argv += ["--variant", self.variant.lower()]
        if self.output is not None:
            argv += ["--output", str(self.output)]
        argv += ["--format", self.format]
        return argv


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise SpecParseError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--weight", dest="weight_spec", help="weight mini-language, e.g. gevrey:s=2")
    common.add_argument("--function", dest="function_ids", action="append", help="corpus id (repeatable)")
    for name, flag in _FLAGS.items():
        common.add_argument(flag, dest=name, type=int if name in _INT_FIELDS else float)
    common.add_argument("--lambdas", type=_float_list)
    common.add_argument("--R", dest="radii", type=_float_list)
    common.add_argument("--variant", type=str.lower, choices=sorted(_VARIANTS))
    common.add_argument("--output", type=Path)
    common.add_argument("--format", choices=("json", "csv"))

    parser = _ArgumentParser(prog="modspace", description="Weighted modulation space toolkit", allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    for command in COMMANDS:
        sub.add_parser(command, parents=[common], allow_abbrev=False)
    return parser


def parse_config(argv: Sequence[str], settings: Optional[Settings] = None) -> RunConfig:
    """Parse a command line; unspecified defaults come from settings."""

    settings = settings or get_settings()
    args = vars(build_parser().parse_args(list(argv)))
    values: Dict[str, Any] = {
        "p": settings.p,
        "q": settings.q,
        "grid_n": settings.grid_n,
        "grid_L": settings.grid_L,
        "grid_N": settings.grid_N,
        "k_max": settings.k_max,
        "tail_tol": settings.tail_tol,
        "theta": settings.theta,
        "probe_max": settings.probe_max,
    }
    values.update({key: value for key, value in args.items() if value is not None})
    if args.get("variant"):
        values["variant"] = _VARIANTS[args["variant"]]
    command = values["command"]
    if command == "algebra" and args.get("p") is None:
        try:
            values["p"] = holder_exponent(values.get("p1", 2.0), values.get("p2", 2.0))
        except ModspaceError as exc:
            raise SpecParseError(str(exc)) from exc
    if command in DEFAULT_FUNCTION and not values.get("function_ids"):
        values["function_ids"] = [DEFAULT_FUNCTION[command]]
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        messages = "; ".join(error["msg"] for error in exc.errors())
        raise SpecParseError(messages) from exc


# --------------------------------------------------------------------------
# Command handlers


@dataclass
class Outcome:
    report: Report
    header: Sequence[str]
    rows: List[Sequence[Any]]
    exit_code: int
    summary: Dict[str, Any]


def _scalar_rows(report: Report) -> Tuple[Sequence[str], List[Sequence[Any]]]:
    payload = report.to_payload()
    return ("field", "value"), [(k, v) for k, v in payload.items() if not isinstance(v, (list, dict))]


def _code(certified: bool) -> int:
    return EXIT_OK if certified else EXIT_UNCERTIFIED


def _validate_weight(config: RunConfig, settings: Settings) -> Outcome:
    report = check_conditions(make_weight(config.weight_spec), GridSpec1D(x_max=config.probe_max))
    rows = [(name, v.status, v.witness, v.detail) for name, v in sorted(report.verdicts.items())]
    return Outcome(
        report,
        ("condition", "status", "witness", "detail"),
        rows,
        _code(report.passed),
        {"subclass": report.subclass, "alpha": report.alpha_estimate},
    )


def _assoc_seq(config: RunConfig, settings: Settings) -> Outcome:
    seq = associated_sequence(make_weight(config.weight_spec), config.p_max, workers=settings.threads)
    violations = check_log_convexity(seq) if seq.p_max >= 2 else []
    rows = [
        (p, seq.log_values[p], seq.values[p], seq.argmax_r[p], seq.capped[p]) for p in range(seq.p_max + 1)
    ]
    return Outcome(
        seq,
        ("p", "log_M", "M", "argmax_r", "capped"),
        rows,
        _code(not any(seq.capped)),
        {"H": seq.H, "log_convexity_violations": len(violations)},
    )


class SubadditivitySearch(Report):
    weight_spec: str
    thresholds: XTilde
    certificate: Optional[SubadditivityCertificate] = None
    failure: Optional[SubadditivityFailure] = None
    recheck_step: Optional[float] = None
    recheck_violations: List[SubadditivityViolation] = []


def _find_s(config: RunConfig, settings: Settings) -> Outcome:
    w = make_weight(config.weight_spec)
    probes = GridSpec1D(x_max=config.probe_max)
    thresholds = compute_x_tilde(w, probes)
    result = find_subadditivity_s(w, thresholds.x_tilde, config.X, config.h, settings.threads, probes)
    if isinstance(result, SubadditivityFailure):
        report = SubadditivitySearch(weight_spec=w.spec_string, thresholds=thresholds, failure=result)
        violations = result.violations
    else:
        step = config.h / 2.0
        violations = verify_subadditivity(w, result, config.X, step, settings.threads)
        report = SubadditivitySearch(
            weight_spec=w.spec_string,
            thresholds=thresholds,
            certificate=result,
            recheck_step=step,
            recheck_violations=violations,
        )
    rows = [(v.x, v.y, v.margin) for v in violations]
    s = report.certificate.s if report.certificate else None
    return Outcome(report, ("x", "y", "margin"), rows, _code(s is not None and not violations), {"s": s})


def _norm(config: RunConfig, settings: Settings) -> Outcome:
    w = make_weight(config.weight_spec)
    f = make_function(config.function_ids[0], config.grid())
    params = NormParams(config.p, config.q, w, config.k_max, config.tail_tol)
    result = modulation_norm(f, params, settings.threads)
    header = [f"k{i + 1}" for i in range(config.grid_n)] + ["contribution"]
    rows = [tuple(k) + (value,) for k, value in result.contributions]
    return Outcome(
        result, header, rows, _code(result.certified), {"value": result.value, "certified": result.certified}
    )


def _algebra(config: RunConfig, settings: Settings) -> Outcome:
    ids = config.function_ids or list(ALGEBRA_CORPUS)
    functions = make_corpus(ids, config.grid())
    report = algebra_report(
        functions, config.p1, config.p2, config.q, make_weight(config.weight_spec), config.k_max, settings.threads
    )
    rows = [(e.f_id, e.g_id, e.ratio, e.zero_input, e.uncertified) for e in report.entries]
    certified = report.bounded and not any(e.uncertified for e in report.entries)
    return Outcome(
        report,
        ("f_id", "g_id", "ratio", "zero_input", "uncertified"),
        rows,
        _code(certified),
        {"max_ratio": report.max_ratio, "median_ratio": report.median_ratio, "bounded": report.bounded},
    )


def unit_sup(f: SampledFunction) -> SampledFunction:
    peak = float(np.abs(f.values).max())
    return f if peak == 0.0 else f.scaled(1.0 / peak)


def _superposition(config: RunConfig, settings: Settings) -> Outcome:
    u_id = config.function_ids[0]
    u = unit_sup(make_function(u_id, config.grid()))
    report = superposition_growth(
        u,
        make_weight(config.weight_spec),
        config.lambdas,
        config.p,
        config.q,
        config.k_max,
        u_id=u_id,
        theta=config.theta,
        N=config.N,
        workers=settings.threads,
    )
    rows = list(zip(report.lambdas, report.norms, report.aliased))
    return Outcome(
        report,
        ("lambda", "norm", "aliased"),
        rows,
        _code(not any(report.aliased)),
        {"fitted_exponent": report.fitted_exponent, "aliasing_cap": report.aliasing_cap},
    )


class ConstantsTable(Report):
    params: SubalgebraParams
    rows: List[ConstantsReport]


def _constants(config: RunConfig, settings: Settings) -> Outcome:
    params = SubalgebraParams(
        variant=config.variant,
        n=config.grid_n,
        q=config.q,
        alpha=config.alpha,
        s=config.s,
        c=config.c,
        delta=config.delta,
        N=config.N,
    )
    table = ConstantsTable(params=params, rows=constants_table(params, config.radii))
    rows = [(r.R, r.constant, r.integral_value, r.M) for r in table.rows]
    return Outcome(
        table, ("R", "constant", "integral_value", "M"), rows, EXIT_OK, {"variant": config.variant, "rows": len(rows)}
    )


def _decay(config: RunConfig, settings: Settings) -> Outcome:
    spec = parse_function_id(config.function_ids[0])
    model = 1.0 / gevrey_order(spec.mu) if spec.kind == "gevrey_bump" else None
    fit = fourier_decay_fit(make_function(spec, config.grid()), model)
    header, rows = _scalar_rows(fit)
    return Outcome(fit, header, rows, EXIT_OK, {"fitted_exponent": fit.fitted_exponent, "model": model})


# --------------------------------------------------------------------------
# Acceptance bundle

CheckStatus = Literal["pass", "fail", "error"]


class CheckResult(Report):
    name: str
    status: CheckStatus
    metrics: Dict[str, Any] = {}
    detail: str = ""


class AcceptanceBundle(Report):
    weight_spec: str
    checks: List[CheckResult]
    passed: int
    failed: int
    errors: int


def _check(name: str, passed: bool, detail: str = "", **metrics: Any) -> CheckResult:
    return CheckResult(name=name, status="pass" if passed else "fail", metrics=metrics, detail=detail)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def check_partition(config: RunConfig) -> CheckResult:
    part = Partition()
    reports = [partition_report(part, Grid(n=1)), partition_report(part, Grid(n=2, N=1024))]
    passed = all(
        r.sum_deviation <= 1e-12
        and r.support_ok
        and r.min_value >= 0.0
        and r.max_value <= 1.0 + 1e-15
        and r.lower_bound_C > 0.0
        and all(math.isfinite(b) for b in r.derivative_bounds)
        for r in reports
    )
    return _check(
        "partition_of_unity",
        passed,
        sum_deviation=max(r.sum_deviation for r in reports),
        lower_bound_C=min(r.lower_bound_C for r in reports),
    )


def check_transform(config: RunConfig) -> CheckResult:
    grid = Grid()
    f = make_function("gaussian:sigma=1", grid)
    F = forward_transform(f)
    xi = grid.xi_axis()
    near = np.abs(xi) <= 10.0
    duality = float(np.max(np.abs(F.values[near] - np.exp(-(xi[near] ** 2) / 2.0))))
    roundtrip = float(np.max(np.abs(inverse_transform(F).values - f.values)))
    return _check("transform_fidelity", duality <= 1e-10 and roundtrip <= 1e-12, duality=duality, roundtrip=roundtrip)


def check_weight_class(config: RunConfig) -> CheckResult:
    target = check_conditions(make_weight(config.weight_spec))
    gevrey2 = check_conditions(make_weight("gevrey:s=2"))
    gevrey4 = check_conditions(make_weight("gevrey:s=4"))
    loglog = check_conditions(make_weight("loglog"))
    control = check_conditions(make_weight("bracket:a=1"))
    passed = (
        target.passed
        and gevrey2.passed
        and gevrey2.subclass == "W1"
        and gevrey4.passed
        and loglog.passed
        and loglog.subclass == "W0"
        and control.verdicts["A1"].status == "fail"
    )
    failing = [k for k, v in target.verdicts.items() if v.status != "pass"]
    return _check(
        "weight_class",
        passed,
        detail=f"{target.weight_spec} failing: {','.join(failing)}" if failing else "",
        target_verdicts={k: v.status for k, v in target.verdicts.items()},
        target_alpha=target.alpha_estimate,
        subclasses={"gevrey:s=2": gevrey2.subclass, "gevrey:s=4": gevrey4.subclass, "loglog": loglog.subclass},
        control_A1=control.verdicts["A1"].status,
    )


def check_subadditivity(config: RunConfig) -> CheckResult:
    w = make_weight("gevrey:s=2")
    thresholds = compute_x_tilde(w)
    result = find_subadditivity_s(w, thresholds.x_tilde, 200.0, 0.25)
    certified = isinstance(result, SubadditivityCertificate)
    violations = verify_subadditivity(w, result, 200.0, 0.125) if certified else []
    control = find_subadditivity_s(make_weight("linear"), B_CONSTANT, 200.0, 0.25)
    passed = certified and not violations and isinstance(control, SubadditivityFailure)
    return _check(
        "subadditivity",
        passed,
        s=result.s if certified else None,
        x_tilde=thresholds.x_tilde,
        recheck_violations=len(violations),
        control_failed=isinstance(control, SubadditivityFailure),
    )


def check_sequence(config: RunConfig) -> CheckResult:
    exact = associated_sequence(make_weight("power:a=0.5"), 20)
    errors = [
        abs(math.expm1(exact.log_values[p] - (2 * p * math.log(2 * p) - 2 * p))) for p in range(1, 21)
    ]
    seq = associated_sequence(make_weight("gevrey:s=2"), 50)
    violations = check_log_convexity(seq)
    band = [math.exp((seq.log_values[p] - 2.0 * math.lgamma(p + 1)) / p) for p in range(10, 51)]
    spread = max(band) / min(band)
    passed = max(errors) <= 1e-6 and not violations and spread <= 4.0
    return _check(
        "associated_sequence",
        passed,
        max_relative_error=max(errors),
        log_convexity_violations=len(violations),
        band_spread=spread,
    )


def check_doubling(config: RunConfig) -> CheckResult:
    D = find_doubling_D(make_weight("gevrey:s=2"), 1e4)
    trend = doubling_trend(make_weight("loglog"))
    return _check(
        "doubling",
        D is not None and trend.verdict == "none_trend",
        D=D,
        loglog_D=trend.D,
        loglog_growth=trend.growth,
    )


def check_algebra(config: RunConfig) -> CheckResult:
    w = make_weight(config.weight_spec)
    grid = Grid()
    functions = make_corpus(ALGEBRA_CORPUS, grid)
    report = algebra_report(functions, 2.0, 2.0, 1.0, w, config.k_max)
    f, g = functions[ALGEBRA_CORPUS[0]], functions[ALGEBRA_CORPUS[3]]
    base = algebra_ratio(f, g, 2.0, 2.0, 1.0, w, config.k_max)
    scaled = algebra_ratio(f.scaled(3.7), g.scaled(0.25), 2.0, 2.0, 1.0, w, config.k_max)
    drift = _rel(scaled.ratio, base.ratio)
    return _check(
        "algebra",
        report.bounded and drift <= 1e-12,
        max_ratio=report.max_ratio,
        median_ratio=report.median_ratio,
        amplitude_drift=drift,
        uncertified=sum(e.uncertified for e in report.entries),
    )


def check_constants(config: RunConfig) -> CheckResult:
    params = SubalgebraParams(variant="RV_a", n=1, q=2.0, alpha=0.5, s=1.0, c=1.0)
    rows = constants_table(params, (2.0, 4.0, 8.0, 16.0, 32.0))
    integrals = [r.integral_value for r in rows]
    decreasing = all(b < a for a, b in zip(integrals, integrals[1:]))
    at_two = abs(integrals[0] - math.gamma(params.n / params.alpha))
    sv = SubalgebraParams(variant="SV", n=1, q=2.0, N=3)
    ratio = subalgebra_constant(sv, 10.0).constant / subalgebra_constant(sv, 20.0).constant
    passed = decreasing and at_two <= 1e-10 and abs(ratio - 8.0) <= 1e-12
    return _check("subalgebra_constants", passed, integral_at_2_error=at_two, sv_ratio=ratio)


def check_inverse_gamma(config: RunConfig) -> CheckResult:
    exact = max(abs(inverse_incomplete_gamma(1.0, u) - math.log(1.0 / u)) for u in (1e-2, 1e-4, 1e-8))
    gaps = [abs(inverse_incomplete_gamma(2.0, u) / math.log(1.0 / u) - 1.0) for u in (1e-4, 1e-6, 1e-8)]
    far = abs(inverse_incomplete_gamma(2.0, 1e-50) / math.log(1e50) - 1.0)
    passed = exact <= 1e-10 and all(b < a for a, b in zip(gaps, gaps[1:])) and far <= 0.05
    return _check("inverse_incomplete_gamma", passed, beta1_error=exact, beta2_gaps=gaps, gap_at_1e_50=far)


def check_superposition(config: RunConfig) -> CheckResult:
    w = make_weight(config.weight_spec)
    u = unit_sup(make_function("gevrey:mu=-2", Grid(n=1, L=16.0, N=16384)))
    report = superposition_growth(u, w, (1e-4, 1e-3, 1.0, 2.0, 4.0, 8.0, 16.0), 2.0, 1.0, 256, u_id="gevrey:mu=-2")
    linear = report.norms[1] / (10.0 * report.norms[0]) if report.norms[0] > 0 else math.inf
    bound = report.bound_exponent + 0.1
    exponent = report.fitted_exponent
    passed = (
        exponent is not None and exponent <= bound and abs(linear - 1.0) <= 0.1 and not any(report.aliased)
    )
    return _check(
        "superposition_growth",
        passed,
        fitted_exponent=exponent,
        bound=bound,
        linear_ratio=linear,
        aliasing_cap=report.aliasing_cap,
    )


def check_continuity(config: RunConfig) -> CheckResult:
    u = make_function("gaussian:sigma=1", Grid())
    deltas = [0.1 / 2**i for i in range(5)]
    report = exp_map_continuity(u, make_weight(config.weight_spec), 1.0, deltas, k_max=config.k_max)
    return _check(
        "exp_map_continuity",
        report.monotone and report.stable,
        moduli=report.moduli,
        first_order_constants=report.first_order_constants,
        identity_residual=report.identity_residual,
    )


def check_gevrey_density(config: RunConfig) -> CheckResult:
    fine = Grid(n=1, L=32.0, N=16384)
    fit = fourier_decay_fit(make_function("gevrey:mu=-1", fine), 0.5)
    w = make_weight("gevrey:s=4")
    report = measure_condition_check(gevrey_bump_density(-1.0, fine), w, choose_variant(w), 1e4)
    passed = abs(fit.fitted_exponent - 0.5) <= 0.05 and report.limit_trend == "to_zero" and report.integral_zero
    return _check(
        "gevrey_density",
        passed,
        fitted_exponent=fit.fitted_exponent,
        limit_trend=report.limit_trend,
        integral=report.integral,
    )


EMBEDDING_PAIRS = (((1.0, 1.0), (2.0, 1.0)), ((1.0, 1.0), (1.0, 2.0)), ((2.0, 1.0), (2.0, 2.0)), ((2.0, 1.0), (2.0, math.inf)))


def check_embeddings(config: RunConfig) -> CheckResult:
    w = make_weight(config.weight_spec)
    ids = ("gaussian:sigma=1", "gevrey:mu=-2", "window")
    coarse, fine = Grid(N=4096), Grid(N=8192)
    q_ok, p_ratios, drift = True, [], 0.0
    for function_id in ids:
        a = embedding_check(make_function(function_id, coarse), w, EMBEDDING_PAIRS, config.k_max)
        b = embedding_check(make_function(function_id, fine), w, EMBEDDING_PAIRS, config.k_max)
        for row, other in zip(a.rows, b.rows):
            if row.p0 == row.p:
                q_ok = q_ok and row.ratio <= 1.0 + 1e-12
            else:
                p_ratios.append(row.ratio)
            drift = max(drift, _rel(other.ratio, row.ratio))
    constant = max(p_ratios)
    passed = q_ok and math.isfinite(constant) and drift <= 1e-3
    return _check("embeddings", passed, p_constant=constant, refinement_drift=drift, q_monotone=q_ok)


def check_window_independence(config: RunConfig) -> CheckResult:
    w = make_weight(config.weight_spec)
    functions = list(make_corpus(ALGEBRA_CORPUS, Grid()).values())
    report = window_equivalence(functions, w, k_max=config.k_max)
    pair = window_equivalence([functions[0], functions[0].scaled(3.0)], w, k_max=config.k_max)
    drift = _rel(pair.ratios[1], pair.ratios[0])
    return _check(
        "window_independence",
        report.equivalent and drift <= 1e-12,
        lower=report.lower,
        upper=report.upper,
        amplitude_drift=drift,
    )


ACCEPTANCE_CHECKS: Tuple[Callable[[RunConfig], CheckResult], ...] = (
    check_partition,
    check_transform,
    check_weight_class,
    check_subadditivity,
    check_sequence,
    check_doubling,
    check_algebra,
    check_constants,
    check_inverse_gamma,
    check_superposition,
    check_continuity,
    check_gevrey_density,
    check_embeddings,
    check_window_independence,
)


def report_all(config: RunConfig) -> AcceptanceBundle:
    """Run every acceptance check; a check that raises is recorded as an error."""

    results = []
    for check in ACCEPTANCE_CHECKS:
        name = check.__name__.removeprefix("check_")
        try:
            result = check(config)
        except ModspaceError as exc:
            logger.warning("acceptance_check_error", check=name, error=str(exc))
            result = CheckResult(name=name, status="error", detail=str(exc))
        logger.info("acceptance_check", check=result.name, status=result.status)
        results.append(result)
    return AcceptanceBundle(
        weight_spec=config.weight_spec,
        checks=results,
        passed=sum(r.status == "pass" for r in results),
        failed=sum(r.status == "fail" for r in results),
        errors=sum(r.status == "error" for r in results),
    )


def _report_all(config: RunConfig, settings: Settings) -> Outcome:
    bundle = report_all(config)
    if bundle.errors:
        code = EXIT_ERROR
    elif bundle.failed:
        code = EXIT_UNCERTIFIED
    else:
        code = EXIT_OK
    rows = [(c.name, c.status, c.detail) for c in bundle.checks]
    return Outcome(
        bundle,
        ("check", "status", "detail"),
        rows,
        code,
        {"passed": bundle.passed, "failed": bundle.failed, "errors": bundle.errors},
    )


HANDLERS: Dict[str, Callable[[RunConfig, Settings], Outcome]] = {
    "validate-weight": _validate_weight,
    "assoc-seq": _assoc_seq,
    "find-s": _find_s,
    "norm": _norm,
    "algebra": _algebra,
    "superposition": _superposition,
    "constants": _constants,
    "decay": _decay,
    "report-all": _report_all,
}


# --------------------------------------------------------------------------
# Running


def output_path(config: RunConfig, settings: Settings) -> Path:
    return config.output or settings.reports_dir / f"{config.command}.{config.format}"


def status_label(code: int) -> str:
    return {EXIT_OK: "certified", EXIT_UNCERTIFIED: "uncertified"}.get(code, "error")


def _record(settings: Settings, command: str, code: int, summary: Dict[str, Any]) -> None:
    if not settings.record_runs:
        return
    try:
        RunLedger().save(command, status_label(code), code, summary)
    except SQLAlchemyError as exc:
        logger.warning("run_not_recorded", command=command, error=str(exc))


def _emit(command: str, code: int, summary: Dict[str, Any]) -> None:
    line = {"command": command, "status": status_label(code), "exit_code": code, **summary}
    print(json.dumps(line, sort_keys=True, default=str))


def run(config: RunConfig, settings: Optional[Settings] = None) -> int:
    """Dispatch one command, write its report and return the exit status."""

    settings = settings or get_settings()
    structlog.contextvars.bind_contextvars(command=config.command)
    try:
        outcome = HANDLERS[config.command](config, settings)
        path = output_path(config, settings)
        if config.format == "json":
            write_json_report(path, outcome.report, " ".join(config.to_argv()))
        else:
            write_csv(path, outcome.header, outcome.rows)
    except ModspaceError as exc:
        logger.error("command_failed", error=str(exc), error_type=type(exc).__name__)
        summary = {"error": str(exc)}
        _record(settings, config.command, EXIT_ERROR, summary)
        _emit(config.command, EXIT_ERROR, summary)
        return EXIT_ERROR
    finally:
        structlog.contextvars.unbind_contextvars("command")

    summary = {"output": str(path), **outcome.summary}
    _record(settings, config.command, outcome.exit_code, summary)
    _emit(config.command, outcome.exit_code, summary)
    return outcome.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = get_settings()
    configure_logging(settings)
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv, settings)
    except SpecParseError as exc:
        logger.error("invalid_arguments", error=str(exc))
        print(f"modspace: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return run(config, settings)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
