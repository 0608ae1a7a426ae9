"""Associated weight sequence M_p = sup_r r^p e^{-w*(r)} and its certificates."""

from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel
from scipy import optimize

from .errors import DomainError
from .parallel import ordered_map
from .reports import Report
from .weight_core import WeightFunction

logger = structlog.get_logger(__name__)

R_CAP = 1e12
LOG_REPRESENTABLE = 700.0
ETA_GRID = tuple(round(0.05 * i, 2) for i in range(1, 10))
H_GRID = np.logspace(-6.0, 0.0, 61)


class WeightSequence(Report):
    weight_spec: Optional[str] = None
    log_values: List[float]
    values: List[Optional[float]]
    n0: Optional[float] = None
    log_n0: float = 0.0
    argmax_r: List[float] = []
    capped: List[bool] = []
    r_cap: Optional[float] = None
    H: Optional[float] = None
    slowly_varying_warning: bool = False

    @property
    def p_max(self) -> int:
        return len(self.log_values) - 1

    @classmethod
    def from_log_values(cls, log_values: Sequence[float], **extra) -> "WeightSequence":
        logs = [float(v) for v in log_values]
        values = [math.exp(v) if v <= LOG_REPRESENTABLE else None for v in logs]
        seq = cls(log_values=logs, values=values, **extra)
        return seq.model_copy(update={"H": find_H(seq)}) if len(logs) >= 2 else seq

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "WeightSequence":
        return cls.from_log_values([math.log(v) for v in values])


class LogConvexityViolation(BaseModel):
    p: int
    excess: float


class LowerBound(BaseModel):
    eta: float
    h: float
    margin: float
    eta_tail: float


def _log_sup(w: WeightFunction, p: int, r_cap: float) -> Tuple[float, float, bool]:
    """Return (log N_p, argmax r, capped) for p >= 1."""

    y = np.linspace(-20.0, math.log(r_cap), 2001)
    phi = p * y - w.values(np.exp(y))
    i = int(np.argmax(phi))
    if i == y.size - 1:
        return float(phi[-1]), r_cap, True
    a, b = float(y[max(i - 1, 0)]), float(y[i + 1])

    def objective(t: float) -> float:
        return p * t - float(w.values(np.array([math.exp(t)]))[0])

    best_t, best = float(y[i]), float(phi[i])
    t_star: Optional[float] = None
    if w.has_analytic_derivatives:

        def stationarity(t: float) -> float:
            r = math.exp(t)
            return p - r * float(w.derivative_values(np.array([r]), 1)[0])

        try:
            t_star = float(optimize.brentq(stationarity, a, b, xtol=1e-14))
        except ValueError:
            t_star = None
    if t_star is None:
        res = optimize.minimize_scalar(
            lambda t: -objective(t), bracket=(a, float(y[i]), b), method="golden", tol=1e-12
        )
        t_star = float(res.x)
    value = objective(t_star)
    if value >= best:
        best_t, best = t_star, value
    return best, math.exp(best_t), False


def associated_sequence(
    w: WeightFunction, p_max: int, r_cap: float = R_CAP, workers: Optional[int] = None
) -> WeightSequence:
    if p_max < 0:
        raise DomainError(f"p_max must be nonnegative, got {p_max}")
    log_n0 = -float(w.values(np.array([0.0]))[0])
    sups = ordered_map(lambda p: _log_sup(w, p, r_cap), range(1, p_max + 1), workers)

    log_values = [0.0] + [value - log_n0 for value, _, _ in sups]
    argmax = [0.0] + [r for _, r, _ in sups]
    capped = [False] + [flag for _, _, flag in sups]
    warning = w.index_alpha == 0
    if warning:
        logger.warning("sequence_for_slowly_varying_weight", spec=w.spec_string)
    if any(capped):
        logger.warning("sequence_sup_capped", spec=w.spec_string, first_p=capped.index(True), r_cap=r_cap)

    seq = WeightSequence.from_log_values(
        log_values,
        weight_spec=w.spec_string,
        n0=math.exp(log_n0),
        log_n0=log_n0,
        argmax_r=argmax,
        capped=capped,
        r_cap=r_cap,
        slowly_varying_warning=warning,
    )
    logger.info("sequence_computed", spec=w.spec_string, p_max=p_max, H=seq.H)
    return seq


def check_log_convexity(seq: WeightSequence) -> List[LogConvexityViolation]:
    """Indices p with M_p^2 > M_{p-1} M_{p+1}, checked on log M_p."""

    logs = np.asarray(seq.log_values)
    if logs.size < 3:
        raise DomainError("log-convexity needs at least three terms")
    excess = 2.0 * logs[1:-1] - logs[:-2] - logs[2:]
    tol = 1e-12 * np.maximum(1.0, np.abs(logs[1:-1]))
    return [
        LogConvexityViolation(p=int(i) + 1, excess=float(excess[i]))
        for i in np.nonzero(excess > tol)[0]
    ]


def find_H(seq: WeightSequence) -> float:
    """Smallest H with M_{p+q} <= H^{p+q} M_p M_q for p + q <= p_max."""

    logs = np.asarray(seq.log_values)
    if logs.size < 2:
        raise DomainError("find_H needs at least two terms")
    best = 0.0
    for total in range(1, logs.size):
        p = np.arange(0, total + 1)
        ratio = (logs[total] - logs[p] - logs[total - p]) / total
        best = max(best, float(np.max(ratio)))
    return max(1.0, math.exp(best))


def _tail_growth(logs: np.ndarray) -> float:
    """Slope of log M_{p+1} - log M_p against log p over the upper half of p."""

    p = np.arange(1, logs.size - 1)
    upper = p >= (logs.size - 1) / 2.0
    if np.count_nonzero(upper) < 3:
        return math.inf
    steps = (logs[2:] - logs[1:-1])[upper]
    slope, _ = np.polyfit(np.log(p[upper]), steps, 1)
    return float(slope)


def check_lower_bound(seq: WeightSequence) -> Optional[LowerBound]:
    """Find (eta, h) with M_p >= h^p p^{p eta}, eta in (0, 1/2), or None."""

    logs = np.asarray(seq.log_values)
    p = np.arange(1, logs.size, dtype=float)
    if p.size == 0:
        return None
    eta_tail = _tail_growth(logs)
    for eta in sorted(ETA_GRID, reverse=True):
        if eta > eta_tail:
            continue
        for h in H_GRID[::-1]:
            margin = logs[1:] - p * math.log(h) - eta * p * np.log(p)
            if np.all(margin >= 0):
                return LowerBound(eta=eta, h=float(h), margin=float(np.min(margin)), eta_tail=eta_tail)
    return None
