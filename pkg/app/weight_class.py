"""Class membership checks for weights, the thresholds x0/x1/tau/x~, the
subadditivity constant s and the doubling constant D."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel
from scipy import optimize

from .errors import CertificationError, DomainError
from .parallel import ordered_map
from .reports import Report
from .weight_core import WeightFunction

logger = structlog.get_logger(__name__)

VerdictStatus = Literal["pass", "fail", "inconclusive"]

ALPHA_MARGIN = 0.01
W1_THRESHOLD = 0.05
X0_MARGIN = 1e-3
B_CONSTANT = 1.0
S_RESOLUTION = 1e-3
TIE_TOLERANCE = 1e-12
MAX_VIOLATIONS = 50
UNBOUNDED_NOTE = "conditions involving x -> infinity are verified on probes up to probe_max only"


@dataclass(frozen=True)
class GridSpec1D:
    """Probe grid: a linear head on [0, 1] followed by log-spaced probes to ``x_max``."""

    x_max: float = 1e6
    per_decade: int = 40
    head_points: int = 41

    def points(self) -> np.ndarray:
        if self.x_max < 10:
            raise DomainError(f"probe grid needs x_max >= 10, got {self.x_max}")
        head = np.linspace(0.0, 1.0, self.head_points)
        decades = math.log10(self.x_max)
        tail = np.logspace(0.0, decades, int(math.ceil(decades * self.per_decade)) + 1)
        return np.unique(np.concatenate([head, tail]))


class Verdict(BaseModel):
    status: VerdictStatus
    witness: Optional[float] = None
    detail: str = ""


class IndexEstimate(BaseModel):
    alpha: float
    spread: float


class XTilde(BaseModel):
    tau: float
    x0: float
    x1: float
    x_tilde: float


class ClassReport(Report):
    weight_spec: str
    verdicts: Dict[str, Verdict]
    alpha_estimate: float
    alpha_spread: float
    tau: float
    x0: Optional[float] = None
    x1: Optional[float] = None
    x_tilde: Optional[float] = None
    subclass: Optional[Literal["W0", "W1"]] = None
    a4_witnesses: Dict[str, float] = {}
    probe_max: float
    note: str = UNBOUNDED_NOTE

    @property
    def passed(self) -> bool:
        return all(v.status == "pass" for v in self.verdicts.values())


class SubadditivityCertificate(Report):
    weight_spec: str
    s: float
    x_tilde: float
    domain_bound: float
    grid_step: float
    worst_margin: float
    points_checked: int
    tail_probe_max: float


class SubadditivityViolation(BaseModel):
    x: float
    y: float
    margin: float


class SubadditivityFailure(Report):
    weight_spec: str
    x_tilde: float
    domain_bound: float
    grid_step: float
    s_tried: float = S_RESOLUTION
    violations: List[SubadditivityViolation]


class DoublingTrend(Report):
    weight_spec: str
    t_max: List[float]
    D: List[Optional[float]]
    growth: List[Optional[float]]
    verdict: Literal["finite", "none_trend"]


class SeriesReport(Report):
    weight_spec: str
    s: float
    q_prime: float
    n: int
    shell_sums: List[float]
    partial_sums: List[float]
    stabilized: bool


# --------------------------------------------------------------------------
# Index and thresholds


def _index_ratio(w: WeightFunction, x: np.ndarray) -> np.ndarray:
    values = w.values(x)
    out = np.zeros_like(x)
    positive = x > 0
    out[positive] = x[positive] * w.derivative_values(x[positive], 1) / values[positive]
    return out


def estimate_index(w: WeightFunction, t_max: float) -> IndexEstimate:
    """Extrapolate x*w'/w to infinity from the last two decades below ``t_max``.

    The ratio is fitted on ``{1, 1/l, 1/(l log l)}`` with ``l = log x``; the
    intercept is the index and the change against a two-term fit is the spread.
    """

    if t_max < 1e3:
        raise DomainError(f"estimate_index needs t_max >= 1e3, got {t_max}")
    x = np.logspace(math.log10(t_max) - 2.0, math.log10(t_max), 41)
    rho = _index_ratio(w, x)
    ell = np.log(x)
    basis3 = np.column_stack([np.ones_like(ell), 1.0 / ell, 1.0 / (ell * np.log(ell))])
    coef3, *_ = np.linalg.lstsq(basis3, rho, rcond=None)
    coef2, *_ = np.linalg.lstsq(basis3[:, :2], rho, rcond=None)
    alpha = float(coef3[0])
    spread = float(abs(coef3[0] - coef2[0]))
    return IndexEstimate(alpha=alpha, spread=spread)


def _sign_change_root(w: WeightFunction, a: float, b: float) -> float:
    def second(x: float) -> float:
        return float(w.derivative_values(np.array([x]), 2)[0])

    try:
        return float(optimize.brentq(second, a, b, xtol=1e-12))
    except ValueError:
        return b


def _sign_changes(w: WeightFunction, x: np.ndarray) -> Tuple[List[float], np.ndarray]:
    positive = x[x > 0]
    second = w.derivative_values(positive, 2)
    signs = np.sign(second)
    keep = signs != 0
    xs, signs = positive[keep], signs[keep]
    changes = np.nonzero(signs[1:] != signs[:-1])[0]
    roots = [_sign_change_root(w, float(xs[i]), float(xs[i + 1])) for i in changes]
    return roots, second


def compute_x_tilde(w: WeightFunction, probe_grid: Optional[GridSpec1D] = None) -> XTilde:
    grid = probe_grid or GridSpec1D()
    x = grid.points()
    roots, _ = _sign_changes(w, x)
    tau = roots[-1] if roots else 0.0

    rho = np.abs(_index_ratio(w, x))
    bad = np.nonzero(rho > 1.0 - X0_MARGIN)[0]
    if bad.size and bad[-1] == x.size - 1:
        raise CertificationError(
            f"x*w'/w stays above {1.0 - X0_MARGIN} up to {x[-1]:g}; no x0 below t_max"
        )
    i0 = int(bad[-1]) + 1 if bad.size else 0
    x0 = float(x[i0])

    ratio = x / w.values(x)
    steps = np.diff(ratio)
    flat = np.nonzero(steps[i0:] <= 0)[0]
    start = i0 + (int(flat[-1]) + 1 if flat.size else 0)
    prefix_max = np.maximum.accumulate(ratio)
    candidates = np.nonzero(ratio[start:] >= prefix_max[start:])[0]
    if not candidates.size:
        raise CertificationError("x/w*(x) never dominates its earlier values on the probes")
    x1 = float(x[start + int(candidates[0])])

    x_tilde = max(tau, 2.0 * x0, 2.0 * x1, B_CONSTANT)
    return XTilde(tau=tau, x0=x0, x1=x1, x_tilde=x_tilde)


# --------------------------------------------------------------------------
# Conditions


def _check_a4(w: WeightFunction, x: np.ndarray) -> Tuple[Verdict, Dict[str, float]]:
    x_max = float(x[-1])
    tail = x[x >= x_max / 10.0]
    if tail.size < 5:
        return Verdict(status="inconclusive", witness=x_max, detail="tail window too short"), {}
    values = w.values(tail)
    witnesses = {
        str(M): float((values[-1] - M * math.log(tail[-1])) - (values[0] - M * math.log(tail[0])))
        for M in (1, 10, 100)
    }
    growth = tail * w.derivative_values(tail, 1)
    steps = np.diff(growth)
    if np.any(steps <= 0):
        witness = float(tail[int(np.nonzero(steps <= 0)[0][0]) + 1])
        return Verdict(status="fail", witness=witness, detail="t*w'(t) not increasing"), witnesses
    if growth[-1] < growth[0] * (1.0 + 1e-3):
        return (
            Verdict(status="inconclusive", witness=x_max, detail="t*w'(t) growth below resolution"),
            witnesses,
        )
    return Verdict(status="pass", witness=x_max), witnesses


def _check_a5(w: WeightFunction) -> Verdict:
    h = 10.0 ** -np.arange(2, 9)
    with np.errstate(invalid="ignore", divide="ignore"):
        slopes = np.abs(w.derivative_values(h, 1))
    if not np.all(np.isfinite(slopes)):
        return Verdict(status="inconclusive", witness=float(h[-1]), detail="derivative not finite near 0")
    if np.any(np.diff(slopes) > 0):
        witness = float(h[int(np.nonzero(np.diff(slopes) > 0)[0][0]) + 1])
        return Verdict(status="fail", witness=witness, detail="|w'(h)| grows as h decreases")
    if slopes[-1] >= 1e-6:
        return Verdict(status="fail", witness=float(h[-1]), detail=f"|w'(1e-8)| = {slopes[-1]:.3g}")
    return Verdict(status="pass", witness=float(h[-1]))


def check_conditions(w: WeightFunction, probe_grid: Optional[GridSpec1D] = None) -> ClassReport:
    grid = probe_grid or GridSpec1D()
    x = grid.points()
    x_max = float(x[-1])
    if x_max < 1e4:
        raise DomainError(f"probe grid must reach at least 1e4, got {x_max:g}")
    values = w.values(x)
    verdicts: Dict[str, Verdict] = {}

    index = estimate_index(w, x_max)
    if index.alpha > 1.0 - ALPHA_MARGIN:
        verdicts["A1"] = Verdict(status="fail", witness=x_max, detail=f"index estimate {index.alpha:.4f}")
    else:
        verdicts["A1"] = Verdict(status="pass", witness=x_max, detail=f"index estimate {index.alpha:.4f}")

    low = int(np.argmin(values))
    verdicts["A2"] = Verdict(
        status="pass" if values[low] >= 1.0 else "fail", witness=float(x[low]), detail=f"min {values[low]:.6g}"
    )

    steps = np.diff(values)
    if np.all(steps > 0):
        verdicts["A3"] = Verdict(status="pass")
    else:
        verdicts["A3"] = Verdict(status="fail", witness=float(x[int(np.nonzero(steps <= 0)[0][0]) + 1]))

    verdicts["A4"], a4_witnesses = _check_a4(w, x)
    verdicts["A5"] = _check_a5(w)

    roots, _ = _sign_changes(w, x)
    tau = roots[-1] if roots else 0.0
    if roots and tau >= x_max / 10.0:
        verdicts["A6"] = Verdict(status="inconclusive", witness=tau, detail="sign change in the last decade")
    else:
        verdicts["A6"] = Verdict(status="pass", witness=tau, detail=f"{len(roots)} sign changes")

    thresholds: Optional[XTilde] = None
    try:
        thresholds = compute_x_tilde(w, grid)
    except CertificationError as exc:
        logger.info("x_tilde_uncertified", spec=w.spec_string, reason=str(exc))

    subclass = None
    if not any(v.status == "fail" for v in verdicts.values()):
        subclass = "W1" if index.alpha > W1_THRESHOLD else "W0"

    report = ClassReport(
        weight_spec=w.spec_string,
        verdicts=verdicts,
        alpha_estimate=index.alpha,
        alpha_spread=index.spread,
        tau=tau,
        x0=thresholds.x0 if thresholds else None,
        x1=thresholds.x1 if thresholds else None,
        x_tilde=thresholds.x_tilde if thresholds else None,
        subclass=subclass,
        a4_witnesses=a4_witnesses,
        probe_max=x_max,
    )
    logger.info(
        "weight_class_checked",
        spec=report.weight_spec,
        verdicts={k: v.status for k, v in verdicts.items()},
        subclass=subclass,
    )
    return report


# --------------------------------------------------------------------------
# Subadditivity


def _admissible(x: np.ndarray, y: np.ndarray, x_tilde: float) -> np.ndarray:
    return ~((y <= x) & (x < 2.0 * x_tilde))


def _margins(w: WeightFunction, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``A = w(y) + w(|x-y|) - w(x)`` and ``m = min(w(y), w(|x-y|))``."""

    wy = w.values(y)
    wd = w.values(np.abs(x - y))
    return wy + wd - w.values(x), np.minimum(wy, wd)


def _boundary_points(x_tilde: float, X: float, h: float) -> Tuple[np.ndarray, np.ndarray]:
    t = np.arange(0.0, X + 0.25 * h, 0.25 * h)
    xs = [t, t, np.zeros_like(t) + min(2.0 * x_tilde, X), t]
    ys = [t, 0.5 * t, t, np.zeros_like(t)]
    return np.concatenate(xs), np.concatenate(ys)


def _tiles(X: float, h: float, rows: int = 64) -> List[np.ndarray]:
    axis = np.arange(0.0, X + 0.5 * h, h)
    return [axis[i : i + rows] for i in range(0, axis.size, rows)]


def _tile_points(xs: np.ndarray, X: float, h: float) -> Tuple[np.ndarray, np.ndarray]:
    ys = np.arange(0.0, X + 0.5 * h, h)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return gx.ravel(), gy.ravel()


def _collect(
    w: WeightFunction, x_tilde: float, X: float, h: float, workers: Optional[int]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    def tile(xs: np.ndarray) -> Tuple[np.ndarray, ...]:
        if xs.size == 0:
            px, py = _boundary_points(x_tilde, X, h)
        else:
            px, py = _tile_points(xs, X, h)
        keep = _admissible(px, py, x_tilde)
        px, py = px[keep], py[keep]
        A, m = _margins(w, px, py)
        return px, py, A, m

    parts = ordered_map(tile, _tiles(X, h) + [np.empty(0)], workers)
    return tuple(np.concatenate([part[i] for part in parts]) for i in range(4))  # type: ignore[return-value]


def _worst(px: np.ndarray, py: np.ndarray, margin: np.ndarray) -> List[SubadditivityViolation]:
    bad = np.nonzero(margin < -TIE_TOLERANCE)[0]
    order = bad[np.lexsort((py[bad], px[bad], margin[bad]))][:MAX_VIOLATIONS]
    return [SubadditivityViolation(x=float(px[i]), y=float(py[i]), margin=float(margin[i])) for i in order]


def _tail_pairs(w: WeightFunction, X: float, probe_grid: GridSpec1D) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = probe_grid.points()
    x = np.concatenate([[X], x[x > X]])
    A, m = _margins(w, x, 0.5 * x)
    return x, A, m


def find_subadditivity_s(
    w: WeightFunction,
    x_tilde: float,
    X: float,
    h: float,
    workers: Optional[int] = None,
    probe_grid: Optional[GridSpec1D] = None,
) -> Union[SubadditivityCertificate, SubadditivityFailure]:
    """Largest s on the 1e-3 grid with w(x) <= w(y) + w(x-y) - s*min(w(y), w(x-y)).

    The box search is capped by the pairs (x, x/2) for x beyond the box, probed
    out to ``probe_grid.x_max``, so the certificate survives larger boxes.
    """

    if X < 4.0 * x_tilde:
        raise DomainError(f"search box X={X} must be at least 4*x_tilde={4.0 * x_tilde}")
    if not 0 < h <= 0.5:
        raise DomainError(f"grid step must lie in (0, 0.5], got {h}")

    px, py, A, m = _collect(w, x_tilde, X, h, workers)
    tx, tA, tm = _tail_pairs(w, X, probe_grid or GridSpec1D())
    k_cap = int(math.floor((float(np.min(tA / tm)) + TIE_TOLERANCE) / S_RESOLUTION))

    def holds(k: int) -> bool:
        return bool(np.all(A - (k * S_RESOLUTION) * m >= -TIE_TOLERANCE))

    top = int(round(1.0 / S_RESOLUTION))
    if not holds(1) or k_cap < 1:
        violations = _worst(px, py, A - S_RESOLUTION * m) or _worst(tx, 0.5 * tx, tA - S_RESOLUTION * tm)
        failure = SubadditivityFailure(
            weight_spec=w.spec_string,
            x_tilde=x_tilde,
            domain_bound=X,
            grid_step=h,
            violations=violations,
        )
        logger.warning("subadditivity_failed", spec=w.spec_string, violations=len(failure.violations))
        return failure

    lo, hi = 1, top
    if holds(top):
        lo = top
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if holds(mid):
            lo = mid
        else:
            hi = mid
    if lo > k_cap:
        logger.info("subadditivity_tail_cap", spec=w.spec_string, box_s=lo * S_RESOLUTION, cap=k_cap * S_RESOLUTION)
        lo = k_cap
    s = lo * S_RESOLUTION
    cert = SubadditivityCertificate(
        weight_spec=w.spec_string,
        s=s,
        x_tilde=x_tilde,
        domain_bound=X,
        grid_step=h,
        worst_margin=float(np.min(A - s * m)),
        points_checked=int(px.size),
        tail_probe_max=float(tx[-1]),
    )
    logger.info("subadditivity_certified", spec=w.spec_string, s=s, points=cert.points_checked)
    return cert


def verify_subadditivity(
    w: WeightFunction,
    cert: SubadditivityCertificate,
    X2: float,
    h: Optional[float] = None,
    workers: Optional[int] = None,
) -> List[SubadditivityViolation]:
    """Recheck a certificate on a larger and/or finer grid; empty list on success."""

    if X2 < cert.domain_bound:
        raise DomainError(f"X2={X2} is smaller than the certified box {cert.domain_bound}")
    if h is None:
        h = cert.grid_step / 2.0 if X2 > cert.domain_bound else cert.grid_step

    def tile(xs: np.ndarray) -> List[SubadditivityViolation]:
        if xs.size == 0:
            px, py = _boundary_points(cert.x_tilde, X2, h)
        else:
            px, py = _tile_points(xs, X2, h)
        keep = _admissible(px, py, cert.x_tilde)
        px, py = px[keep], py[keep]
        A, m = _margins(w, px, py)
        return _worst(px, py, A - cert.s * m)

    found = [v for part in ordered_map(tile, _tiles(X2, h) + [np.empty(0)], workers) for v in part]
    found.sort(key=lambda v: (v.margin, v.x, v.y))
    if found:
        logger.warning("subadditivity_violations", spec=cert.weight_spec, count=len(found))
    return found[:MAX_VIOLATIONS]


# --------------------------------------------------------------------------
# Doubling constant and series proxy


def _doubling_probes(t_max: float) -> np.ndarray:
    return GridSpec1D(x_max=t_max).points()


def _minimal_doubling_D(w: WeightFunction, t_max: float) -> Optional[float]:
    t = _doubling_probes(t_max)
    lhs = 2.0 * w.values(t)

    def works(D: float) -> bool:
        return bool(np.all(lhs <= w.values(D * t) + D + TIE_TOLERANCE))

    hi = None
    for power in range(21):
        if works(2.0**power):
            hi = 2.0**power
            break
    if hi is None:
        return None
    if hi == 1.0:
        return 1.0
    lo = hi / 2.0
    while hi - lo > 1e-2:
        mid = 0.5 * (lo + hi)
        if works(mid):
            hi = mid
        else:
            lo = mid
    return hi


def find_doubling_D(w: WeightFunction, t_max: float) -> Optional[float]:
    """Smallest D with 2w(t) <= w(Dt) + D on all probes in [0, t_max], or None."""

    if t_max < 1e4:
        raise DomainError(f"find_doubling_D needs t_max >= 1e4, got {t_max}")
    return _minimal_doubling_D(w, t_max)


def doubling_trend(w: WeightFunction, t_maxes: Sequence[float] = (1e3, 1e4, 1e5)) -> DoublingTrend:
    """Minimal D per t_max; a growth of at least 25% per decade is reported as ``none_trend``."""

    ds = [_minimal_doubling_D(w, t) for t in t_maxes]
    growth: List[Optional[float]] = [None]
    for prev, cur in zip(ds, ds[1:]):
        growth.append(None if prev is None or cur is None else cur / prev - 1.0)
    grows = any(d is None for d in ds) or all(g is not None and g >= 0.25 for g in growth[1:])
    return DoublingTrend(
        weight_spec=w.spec_string,
        t_max=[float(t) for t in t_maxes],
        D=ds,
        growth=growth,
        verdict="none_trend" if grows else "finite",
    )


def series_partial_sums(
    w: WeightFunction, s: float, q_prime: float, n: int = 1, K: int = 200, tol: float = 1e-8
) -> SeriesReport:
    """Partial sums of sum_m exp(-s q' w(|m|)) over shells |m|_inf = j."""

    if n not in (1, 2):
        raise DomainError(f"dimension must be 1 or 2, got {n}")
    if math.isinf(q_prime):
        raise DomainError("q' = inf has no series to sum")
    axis = np.arange(-K, K + 1)
    if n == 1:
        shell = np.abs(axis)
        radius = np.abs(axis).astype(float)
    else:
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        shell = np.maximum(np.abs(gx), np.abs(gy)).ravel()
        radius = np.hypot(gx, gy).ravel()
    terms = np.exp(-s * q_prime * w.values(radius))
    shell_sums = np.bincount(shell, weights=terms, minlength=K + 1)
    partial = np.cumsum(shell_sums)
    stabilized = bool(shell_sums[-1] <= tol * partial[-1])
    return SeriesReport(
        weight_spec=w.spec_string,
        s=s,
        q_prime=q_prime,
        n=n,
        shell_sums=shell_sums.tolist(),
        partial_sums=partial.tolist(),
        stabilized=stabilized,
    )
