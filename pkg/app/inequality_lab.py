"""Numerical checks of the multiplication and superposition inequalities.

Incomplete gamma tails, the subalgebra constants, algebra ratios over a corpus,
growth of ``e^{i lambda u} - 1`` in the modulation norm, continuity of the
exponential map and the decay conditions on Fourier densities.
"""

from __future__ import annotations

import math
import statistics
import sys
from dataclasses import dataclass
from typing import Callable, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel
from scipy import integrate, optimize

from .decomposition import Partition, SampledFunction, forward_transform, inverse_transform, make_window
from .errors import DomainError, ModspaceError
from .mod_norm import NormParams, NormResult, modulation_norm, spectral_derivative
from .parallel import ordered_map
from .reports import Report
from .weight_core import WeightFunction, slowly_varying_decreasing, slowly_varying_part

logger = structlog.get_logger(__name__)

Variant = Literal["RV_a", "RV_b", "SV"]

SHAPE_NOTE = "unspecified prefactor C excluded; only the R-dependence is certified"
ALIASING_LIMIT = 0.5
DEFAULT_LAMBDAS = (0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)

_EPS = sys.float_info.epsilon
_TINY = sys.float_info.min / _EPS


# --------------------------------------------------------------------------
# Incomplete gamma


def _log_lower_series(beta: float, t: float, accuracy: float = 1e-16, max_iteration: int = 10000) -> float:
    term = 1.0 / beta
    total = term
    ap = beta
    for _ in range(max_iteration):
        ap += 1.0
        term *= t / ap
        total += term
        if abs(term) < abs(total) * accuracy:
            return math.log(total) - t + beta * math.log(t)
    raise ModspaceError(f"incomplete gamma series did not converge (beta={beta}, t={t})")


def _log_upper_fraction(beta: float, t: float, accuracy: float = 1e-16, max_iteration: int = 10000) -> float:
    # modified Lentz evaluation of the continued fraction
    b = t + 1.0 - beta
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, max_iteration + 1):
        an = -i * (i - beta)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < accuracy:
            return math.log(h) - t + beta * math.log(t)
    raise ModspaceError(f"incomplete gamma continued fraction did not converge (beta={beta}, t={t})")


def log_incomplete_gamma_upper(beta: float, t: float) -> float:
    """log of int_t^inf y^{beta-1} e^{-y} dy."""

    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    if t == 0:
        return math.lgamma(beta)
    if t < beta + 1.0:
        lower = math.exp(_log_lower_series(beta, t) - math.lgamma(beta))
        return math.lgamma(beta) + math.log1p(-lower)
    return _log_upper_fraction(beta, t)


def incomplete_gamma_upper(beta: float, t: float) -> float:
    return math.exp(log_incomplete_gamma_upper(beta, t))


def incomplete_gamma_lower(beta: float, t: float) -> float:
    if not beta > 0 or t < 0:
        raise DomainError("incomplete gamma needs beta > 0 and t >= 0")
    if t == 0:
        return 0.0
    if t < beta + 1.0:
        return math.exp(_log_lower_series(beta, t))
    return math.gamma(beta) - incomplete_gamma_upper(beta, t)


def inverse_incomplete_gamma(beta: float, u: float, tol: float = 1e-12) -> float:
    """The t >= 0 with incomplete_gamma_upper(beta, t) = u, by bisection."""

    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    log_total = math.lgamma(beta)
    if not u > 0 or math.log(u) > log_total + 1e-15:
        raise DomainError(f"u must lie in (0, Gamma({beta})], got {u}")
    target = math.log(u)
    if target >= log_total:
        return 0.0
    lo, hi = 0.0, max(1.0, beta)
    while log_incomplete_gamma_upper(beta, hi) > target:
        lo, hi = hi, 2.0 * hi
    for _ in range(2000):
        if hi - lo <= tol * hi:
            break
        mid = 0.5 * (lo + hi)
        if log_incomplete_gamma_upper(beta, mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# Subalgebra constants


class SubalgebraParams(BaseModel):
    variant: Variant = "RV_a"
    n: int = 1
    q: float = 2.0
    alpha: float = 0.5
    s: float = 1.0
    c: float = 1.0
    delta: float = 0.0
    N: int = 3

    @property
    def q_prime(self) -> float:
        return math.inf if self.q == 1 else self.q / (self.q - 1.0)


class ConstantsReport(Report):
    variant: Variant
    R: float
    q_prime: float
    alpha: float
    s: float
    c_or_delta: float
    n: int
    N: Optional[int] = None
    M: Optional[int] = None
    integral_value: float
    constant: float
    note: str = SHAPE_NOTE


def _sv_order(n: int, q_prime: float, N: int) -> int:
    share = 0.0 if math.isinf(q_prime) else n / q_prime
    return max(0, math.ceil(N + share - 1e-12))


def subalgebra_constant(params: SubalgebraParams, R: float) -> ConstantsReport:
    if R < 2:
        raise DomainError(f"R must be at least 2, got {R}")
    if params.q < 1:
        raise DomainError(f"q must be at least 1, got {params.q}")
    qp = params.q_prime
    base = dict(variant=params.variant, R=R, q_prime=qp, alpha=params.alpha, s=params.s, n=params.n)

    if params.variant == "SV":
        M = _sv_order(params.n, qp, params.N)
        share = 0.0 if math.isinf(qp) else params.n / qp
        integral = (R - 1.0) ** (share - M)
        constant = 2.0**params.N * R ** (-params.N)
        return ConstantsReport(**base, c_or_delta=0.0, N=params.N, M=M, integral_value=integral, constant=constant)

    if not 0 < params.alpha < 1:
        raise DomainError(f"regularly varying constants need 0 < alpha < 1, got {params.alpha}")
    if params.variant == "RV_a":
        exponent, scale, extra = params.alpha, params.c, params.c
    else:
        exponent = params.alpha - params.delta
        if not exponent > 0:
            raise DomainError("RV_b needs alpha - delta > 0")
        scale, extra = 1.0, params.delta

    if math.isinf(qp):
        constant = math.exp(-params.s * scale * (R - 2.0) ** exponent)
        integral = constant
    else:
        lower = params.s * qp * scale * (R - 2.0) ** exponent
        log_integral = log_incomplete_gamma_upper(params.n / exponent, lower)
        integral = math.exp(log_integral)
        constant = math.exp(log_integral / qp)
    return ConstantsReport(**base, c_or_delta=extra, integral_value=integral, constant=constant)


def constants_table(params: SubalgebraParams, radii: Sequence[float]) -> List[ConstantsReport]:
    rows = [subalgebra_constant(params, R) for R in sorted(radii)]
    decreasing = all(b.constant < a.constant for a, b in zip(rows, rows[1:]))
    if not decreasing:
        logger.warning("constants_not_decreasing", variant=params.variant)
    return rows


# --------------------------------------------------------------------------
# Algebra


class AlgebraEntry(BaseModel):
    f_id: str
    g_id: str
    ratio: float
    zero_input: bool = False
    uncertified: bool = False


class AlgebraReport(Report):
    corpus_ids: List[str]
    p1: float
    p2: float
    p: float
    q: float
    weight_spec: str
    entries: List[AlgebraEntry]
    ratios: List[float]
    max_ratio: float
    median_ratio: float
    bounded: bool


def holder_exponent(p1: float, p2: float) -> float:
    inv = (0.0 if math.isinf(p1) else 1.0 / p1) + (0.0 if math.isinf(p2) else 1.0 / p2)
    if inv > 1.0 + 1e-12:
        raise DomainError(f"1/p1 + 1/p2 = {inv} exceeds 1")
    return math.inf if inv == 0 else 1.0 / inv


def _ratio(top: NormResult, left: NormResult, right: NormResult, f_id: str, g_id: str) -> AlgebraEntry:
    bottom = left.value * right.value
    uncertified = not (top.certified and left.certified and right.certified)
    if bottom == 0.0:
        return AlgebraEntry(f_id=f_id, g_id=g_id, ratio=0.0, zero_input=True, uncertified=uncertified)
    return AlgebraEntry(f_id=f_id, g_id=g_id, ratio=top.value / bottom, uncertified=uncertified)


def algebra_ratio(
    f: SampledFunction,
    g: SampledFunction,
    p1: float,
    p2: float,
    q: float,
    w: WeightFunction,
    k_max: int = 48,
    f_id: str = "f",
    g_id: str = "g",
) -> AlgebraEntry:
    """||fg||_{p,q} / (||f||_{p1,q} ||g||_{p2,q}) with 1/p = 1/p1 + 1/p2."""

    p = holder_exponent(p1, p2)
    top = modulation_norm(f * g, NormParams(p, q, w, k_max))
    left = modulation_norm(f, NormParams(p1, q, w, k_max))
    right = modulation_norm(g, NormParams(p2, q, w, k_max))
    entry = _ratio(top, left, right, f_id, g_id)
    if entry.uncertified:
        logger.warning("algebra_norm_uncertified", f=f_id, g=g_id)
    return entry


def algebra_report(
    functions: Mapping[str, SampledFunction],
    p1: float,
    p2: float,
    q: float,
    w: WeightFunction,
    k_max: int = 48,
    workers: Optional[int] = None,
) -> AlgebraReport:
    """Algebra ratios over all unordered pairs of a corpus."""

    p = holder_exponent(p1, p2)
    ids = list(functions)
    left = {i: modulation_norm(functions[i], NormParams(p1, q, w, k_max)) for i in ids}
    right = left if p2 == p1 else {i: modulation_norm(functions[i], NormParams(p2, q, w, k_max)) for i in ids}
    pairs = [(a, b) for i, a in enumerate(ids) for b in ids[i:]]

    def run(pair: Tuple[str, str]) -> AlgebraEntry:
        a, b = pair
        top = modulation_norm(functions[a] * functions[b], NormParams(p, q, w, k_max), workers=1)
        return _ratio(top, left[a], right[b], a, b)

    entries = ordered_map(run, pairs, workers)
    ratios = [e.ratio for e in entries]
    finite = [r for r in ratios if r > 0]
    median = statistics.median(finite) if finite else 0.0
    max_ratio = max(ratios) if ratios else 0.0
    report = AlgebraReport(
        corpus_ids=ids,
        p1=p1,
        p2=p2,
        p=p,
        q=q,
        weight_spec=w.spec_string,
        entries=entries,
        ratios=ratios,
        max_ratio=max_ratio,
        median_ratio=median,
        bounded=bool(all(math.isfinite(r) for r in ratios) and max_ratio < 10.0 * median),
    )
    logger.info("algebra_report", pairs=len(entries), max_ratio=max_ratio, median=median)
    return report


def sector_restriction(f: SampledFunction, R: float, part: Optional[Partition] = None) -> SampledFunction:
    """Keep the spectrum carried by sigma_k with all k_j >= 1 and max_j k_j >= R + 1."""

    part = part or make_window()
    F = forward_transform(f)
    xi = f.grid.xi_axis()
    top = int(math.floor(f.grid.xi_max)) - 1
    inner = int(math.floor(R))
    positive = sum(part.sigma_1d(k, xi) for k in range(1, top + 1))
    cube = sum(part.sigma_1d(k, xi) for k in range(1, inner + 1))
    all_positive, all_cube = positive, cube
    for _ in range(f.grid.n - 1):
        all_positive = np.multiply.outer(all_positive, positive)
        all_cube = np.multiply.outer(all_cube, cube)
    mask = all_positive - all_cube
    return inverse_transform(SampledFunction(f.grid, mask * F.values, "frequency"))


class SubalgebraReport(Report):
    weight_spec: str
    radii: List[float]
    ratios: List[float]
    shape_constants: List[float]
    nonincreasing: bool


def subalgebra_ratio(
    f: SampledFunction,
    g: SampledFunction,
    radii: Sequence[float],
    w: WeightFunction,
    p1: float = 2.0,
    p2: float = 2.0,
    q: float = 1.0,
    k_max: int = 48,
    shape: Optional[SubalgebraParams] = None,
    slack: float = 0.05,
) -> SubalgebraReport:
    """Algebra ratios for f, g restricted to the sector outside the cube of radius R."""

    radii = sorted(radii)
    ratios = []
    for R in radii:
        entry = algebra_ratio(sector_restriction(f, R), sector_restriction(g, R), p1, p2, q, w, k_max)
        ratios.append(entry.ratio)
    shape = shape or SubalgebraParams(alpha=max(w.index_alpha, 1e-3), q=q)
    constants = [subalgebra_constant(shape, R).constant for R in radii] if shape.alpha < 1 else []
    nonincreasing = all(b <= a * (1.0 + slack) for a, b in zip(ratios, ratios[1:]))
    return SubalgebraReport(
        weight_spec=w.spec_string,
        radii=list(radii),
        ratios=ratios,
        shape_constants=constants,
        nonincreasing=nonincreasing,
    )


# --------------------------------------------------------------------------
# Superposition


class SuperpositionReport(Report):
    u_id: str
    weight_spec: str
    variant: Variant
    p: float
    q: float
    u_norm: float
    lambdas: List[float]
    norms: List[float]
    aliased: List[bool]
    aliasing_cap: float
    linear_constants: List[float]
    fit_log_c: Optional[float] = None
    fit_b: Optional[float] = None
    fitted_exponent: Optional[float] = None
    bound_exponent: float
    monotone: bool


def _require_real(u: SampledFunction) -> None:
    values = u.values
    scale = float(np.abs(values).max()) or 1.0
    if float(np.abs(values.imag).max()) > 1e-12 * scale:
        raise DomainError("superposition experiments need a real-valued u")


def aliasing_cap(u: SampledFunction) -> float:
    """Largest lambda with lambda * max|u'| * dx <= 0.5."""

    slope = float(np.abs(spectral_derivative(u, 1).values).max())
    if slope == 0.0:
        return math.inf
    return ALIASING_LIMIT / (slope * u.grid.dx)


def choose_variant(w: WeightFunction) -> Variant:
    """SV for index 0, RV_b when the slowly varying part decreases, else RV_a."""

    if w.index_alpha == 0:
        return "SV"
    return "RV_b" if slowly_varying_decreasing(w) else "RV_a"


def _growth_factor(w: WeightFunction, variant: Variant, z: np.ndarray) -> np.ndarray:
    alpha = w.index_alpha
    base = z**alpha * np.log(z)
    if variant == "RV_b":
        base = base * slowly_varying_part(w, z * np.log(z) ** (1.0 / alpha))
    return base


def _fit(
    w: WeightFunction, variant: Variant, z: np.ndarray, y: np.ndarray, theta: float, N: int
) -> Tuple[float, float]:
    """Fit y = log c + b * shape(z) (RV) or y = log c + theta * w(b z^{1+1/N}) (SV)."""

    if variant != "SV":
        design = np.column_stack([np.ones_like(z), _growth_factor(w, variant, z)])
        (log_c, b), *_ = np.linalg.lstsq(design, y, rcond=None)
        return float(log_c), float(b)

    def residual(log_b: float) -> float:
        shape = theta * w.values(math.exp(log_b) * z ** (1.0 + 1.0 / N))
        return float(np.sum((y - shape - np.mean(y - shape)) ** 2))

    res = optimize.minimize_scalar(residual, bounds=(-20.0, 5.0), method="bounded")
    b = math.exp(float(res.x))
    shape = theta * w.values(b * z ** (1.0 + 1.0 / N))
    return float(np.mean(y - shape)), b


def superposition_growth(
    u: SampledFunction,
    w: WeightFunction,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    p: float = 2.0,
    q: float = 1.0,
    k_max: int = 48,
    u_id: str = "u",
    theta: float = 2.0,
    N: int = 1,
    workers: Optional[int] = None,
) -> SuperpositionReport:
    """Norms of e^{i lambda u} - 1 and a fit of their growth in lambda."""

    _require_real(u)
    if not 1 < p < math.inf:
        raise DomainError(f"superposition bounds need 1 < p < inf, got {p}")
    params = NormParams(p, q, w, k_max)
    u_norm = modulation_norm(u, params, workers).value
    cap = aliasing_cap(u)
    lambdas = sorted(float(v) for v in lambdas)
    aliased = [lam > cap for lam in lambdas]
    if any(aliased):
        logger.warning("aliasing_cap_applied", cap=cap, dropped=[l for l, a in zip(lambdas, aliased) if a])

    real_u = u.values.real

    def norm_for(lam: float) -> float:
        if lam == 0.0:
            return 0.0
        v = u.with_values(np.exp(1j * lam * real_u) - 1.0)
        return modulation_norm(v, params, workers=1).value

    norms = ordered_map(norm_for, lambdas, workers)
    variant = choose_variant(w)

    linear = [n / (lam * u_norm) for lam, n in zip(lambdas, norms) if lam > 0 and lam * u_norm <= 1.0]
    usable = [
        (lam, n)
        for lam, n, bad in zip(lambdas, norms, aliased)
        if not bad and lam * u_norm > 1.0 and n > 0
    ]
    fit_log_c = fit_b = fitted = None
    if len(usable) >= 2:
        lam = np.array([a for a, _ in usable])
        vals = np.array([b for _, b in usable])
        z = lam * u_norm
        fit_log_c, fit_b = _fit(w, variant, z, np.log(vals) - np.log(z), theta, N)
        growth = np.log(vals)
        keep = (lam >= 1.0) & (growth > 0)
        if np.count_nonzero(keep) >= 2:
            fitted = float(np.polyfit(np.log(lam[keep]), np.log(growth[keep]), 1)[0])

    big = [(lam, n) for lam, n, bad in zip(lambdas, norms, aliased) if lam >= 1.0 and not bad]
    monotone = all(b[1] >= a[1] * 0.95 for a, b in zip(big, big[1:]))
    report = SuperpositionReport(
        u_id=u_id,
        weight_spec=w.spec_string,
        variant=variant,
        p=p,
        q=q,
        u_norm=u_norm,
        lambdas=lambdas,
        norms=norms,
        aliased=aliased,
        aliasing_cap=cap,
        linear_constants=linear,
        fit_log_c=fit_log_c,
        fit_b=fit_b,
        fitted_exponent=fitted,
        bound_exponent=w.index_alpha,
        monotone=monotone,
    )
    logger.info("superposition_growth", u=u_id, exponent=fitted, cap=cap)
    return report


class ContinuityReport(Report):
    weight_spec: str
    xi0: float
    deltas: List[float]
    moduli: List[float]
    first_order_constants: List[float]
    monotone: bool
    stable: bool
    identity_residual: float
    aliased: bool


def exp_map_continuity(
    u: SampledFunction,
    w: WeightFunction,
    xi0: float,
    deltas: Sequence[float],
    p: float = 2.0,
    q: float = 1.0,
    k_max: int = 48,
    workers: Optional[int] = None,
) -> ContinuityReport:
    """||g(xi0 + delta) - g(xi0)|| for g(xi) = e^{i u xi} - 1, deltas sorted decreasing."""

    _require_real(u)
    if not 1 < p < math.inf:
        raise DomainError(f"continuity check needs 1 < p < inf, got {p}")
    params = NormParams(p, q, w, k_max)
    real_u = u.values.real
    deltas = sorted((float(d) for d in deltas), reverse=True)
    base = np.exp(1j * xi0 * real_u)
    residual = 0.0

    def modulus(delta: float) -> float:
        if delta == 0.0:
            return 0.0
        diff = base * (np.exp(1j * delta * real_u) - 1.0)
        return modulation_norm(u.with_values(diff), params, workers=1).value

    for delta in deltas:
        lhs = np.exp(1j * (xi0 + delta) * real_u) - base
        step = np.exp(1j * delta * real_u) - 1.0
        rhs = (base - 1.0) * step + step
        residual = max(residual, float(np.abs(lhs - rhs).max()))

    moduli = ordered_map(modulus, deltas, workers)
    constants = [m / d for m, d in zip(moduli, deltas) if d > 0]
    positive = [m for m, d in zip(moduli, deltas) if d > 0]
    monotone = all(b < a for a, b in zip(positive, positive[1:]))
    stable = len(constants) >= 2 and abs(constants[-1] / constants[-2] - 1.0) <= 0.2
    aliased = (abs(xi0) + max(deltas, default=0.0)) > aliasing_cap(u)
    if aliased:
        logger.warning("aliasing_cap_applied", xi0=xi0)
    return ContinuityReport(
        weight_spec=w.spec_string,
        xi0=xi0,
        deltas=deltas,
        moduli=moduli,
        first_order_constants=constants,
        monotone=monotone,
        stable=stable,
        identity_residual=residual,
        aliased=aliased,
    )


# --------------------------------------------------------------------------
# Measure conditions


@dataclass(frozen=True)
class Density:
    """A decaying density g on R with log|g| available beyond double range."""

    label: str
    value: Callable[[np.ndarray], np.ndarray]
    log_abs: Callable[[np.ndarray], np.ndarray]
    sampled: Optional[SampledFunction] = None
    envelope: Optional[Callable[[np.ndarray], np.ndarray]] = None


class MeasureConditionReport(Report):
    density: str
    weight_spec: str
    variant: Variant
    xi: List[float]
    ratios: List[float]
    trend_slope: float
    limit_trend: Literal["to_zero", "not_to_zero"]
    integral: float
    integral_zero: bool
    L_integral: float
    L_tail: float
    L_certified: bool


def _condition_numerator(w: WeightFunction, variant: Variant, xi: np.ndarray, eps: float) -> np.ndarray:
    if variant == "SV":
        return w.values(xi ** (1.0 + eps))
    return _growth_factor(w, variant, xi)


def _simpson_panels(fn: Callable[[np.ndarray], np.ndarray], edges: np.ndarray, points: int = 33) -> np.ndarray:
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        x = np.linspace(a, b, points)
        out.append(integrate.simpson(fn(x), x=x))
    return np.array(out)


def measure_condition_check(
    density: Density,
    w: WeightFunction,
    variant: Variant,
    xi_max: float,
    lam: float = 1.0,
    eps: float = 0.1,
    panels_per_decade: int = 8,
) -> MeasureConditionReport:
    """Trend of the corollary ratio towards 0, zero mean of g, and the L-integral."""

    if xi_max < 1e3:
        raise DomainError(f"xi_max must be at least 1e3, got {xi_max}")
    if variant != "SV" and w.index_alpha == 0:
        raise DomainError("regularly varying conditions need a weight with positive index")
    far = density.log_abs(np.array([xi_max / 10.0, xi_max]))
    if not far[1] < far[0]:
        raise DomainError(f"density {density.label} does not decay")

    xi = np.logspace(1.0, math.log10(xi_max), 61)
    ratios = np.abs(_condition_numerator(w, variant, xi, eps) / density.log_abs(xi))
    tail = xi >= xi_max / 100.0
    slope = float(np.polyfit(np.log(xi[tail]), np.log(ratios[tail]), 1)[0])
    decreasing = bool(np.all(np.diff(ratios[tail]) < 0))
    to_zero = decreasing and slope < 0

    if density.sampled is not None:
        integral = float(np.sum(density.sampled.values).real * density.sampled.grid.dxi**density.sampled.grid.n)
    else:
        edges = np.concatenate([[0.0], np.logspace(-3.0, math.log10(xi_max), 1 + panels_per_decade * int(3 + math.log10(xi_max)))])
        integral = float(np.sum(_simpson_panels(lambda x: density.value(x) + density.value(-x), edges)))

    def integrand(x: np.ndarray) -> np.ndarray:
        safe = np.maximum(np.abs(x), 1.0)
        exponent = lam * _condition_numerator(w, variant, safe, eps)
        exponent = np.where(np.abs(x) > 1.0, exponent, 0.0)
        return 2.0 * np.exp(exponent + density.log_abs(np.abs(x)))

    edges = np.concatenate([[0.0], np.logspace(0.0, math.log10(xi_max), 1 + panels_per_decade * int(math.ceil(math.log10(xi_max))))])
    pieces = _simpson_panels(integrand, edges)
    total = float(np.sum(pieces))
    r = pieces[-1] / pieces[-2] if pieces[-2] > 0 else math.inf
    L_tail = pieces[-1] * r / (1.0 - r) if r < 1 else math.inf
    certified = bool(L_tail <= 1e-8 * max(total, 1.0))

    report = MeasureConditionReport(
        density=density.label,
        weight_spec=w.spec_string,
        variant=variant,
        xi=xi.tolist(),
        ratios=ratios.tolist(),
        trend_slope=slope,
        limit_trend="to_zero" if to_zero else "not_to_zero",
        integral=integral,
        integral_zero=bool(abs(integral) <= 1e-10),
        L_integral=total,
        L_tail=float(L_tail),
        L_certified=certified,
    )
    logger.info("measure_condition", density=density.label, trend=report.limit_trend, slope=slope)
    return report


class BoundShapeReport(Report):
    weight_spec: str
    theta: float
    N: int
    z: List[float]
    rv_shape: List[float]
    sv_shape: List[float]
    threshold: Optional[float]


def compare_bound_shapes(
    w: WeightFunction, theta: float = 2.0, N: int = 1, z: Optional[Sequence[float]] = None
) -> BoundShapeReport:
    """Exponents of the regularly and slowly varying superposition bounds on a z-grid;
    ``threshold`` is the first z beyond which the slowly varying shape dominates."""

    if w.index_alpha <= 0:
        raise DomainError("bound shape comparison needs a weight with positive index")
    grid = np.asarray(z if z is not None else np.logspace(0.1, 4.0, 80), dtype=float)
    rv = _growth_factor(w, "RV_a", grid)
    sv = theta * w.values(grid ** (1.0 + 1.0 / N))
    below = np.nonzero(sv < rv)[0]
    if below.size == 0:
        threshold: Optional[float] = float(grid[0])
    elif below[-1] == grid.size - 1:
        threshold = None
    else:
        threshold = float(grid[below[-1] + 1])
    return BoundShapeReport(
        weight_spec=w.spec_string,
        theta=theta,
        N=N,
        z=grid.tolist(),
        rv_shape=rv.tolist(),
        sv_shape=sv.tolist(),
        threshold=threshold,
    )
