"""Weighted modulation norms and the checks built on them."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel

from .decomposition import (
    Partition,
    SampledFunction,
    boundary_ratio,
    forward_transform,
    inverse_transform,
    make_window,
)
from .errors import DomainError, GridRangeError
from .parallel import ordered_map
from .reports import Report
from .weight_core import WeightFunction
from .weight_sequence import WeightSequence

logger = structlog.get_logger(__name__)

NOISE_FLOOR = 1e-14
DERIVATIVE_WARN = 1e-8

Index = Tuple[int, ...]


@dataclass(frozen=True)
class NormParams:
    p: float
    q: float
    weight: WeightFunction
    k_max: int = 48
    tail_tol: float = 1e-8
    partition: Partition = field(default_factory=make_window)

    def __post_init__(self) -> None:
        if not (self.p >= 1 and self.q >= 1):
            raise DomainError(f"exponents must satisfy p, q >= 1, got p={self.p}, q={self.q}")
        if self.k_max < 2:
            raise DomainError("k_max must be at least 2 to extrapolate the tail")


class NormResult(Report):
    value: float
    p: float
    q: float
    weight_spec: str
    k_max: int
    tail_estimate: float
    certified: bool
    boundary_warning: bool = False
    contributions: List[Tuple[List[int], float]]

    def contribution_values(self) -> np.ndarray:
        return np.array([value for _, value in self.contributions])


def lp_norm(f: SampledFunction, p: float) -> float:
    values = np.abs(f.values)
    if math.isinf(p):
        return float(values.max()) if values.size else 0.0
    if p < 1:
        raise DomainError(f"p must be at least 1, got {p}")
    return float((np.sum(values**p) * f.grid.dx**f.grid.n) ** (1.0 / p))


def aggregate(values: Sequence[float], q: float) -> float:
    """l^q norm of a nonnegative vector in the given order."""

    if len(values) == 0:
        return 0.0
    if math.isinf(q):
        return float(max(values))
    peak = max(values)
    if peak == 0.0:
        return 0.0
    return float(peak * math.fsum((v / peak) ** q for v in values) ** (1.0 / q))


def frequency_indices(n: int, k_max: int) -> List[Index]:
    """All k with |k|_inf <= k_max in lexicographic order."""

    return list(itertools.product(range(-k_max, k_max + 1), repeat=n))


def _local_norm(F: SampledFunction, part: Partition, k: Index, p: float) -> float:
    grid = F.grid
    xi = grid.xi_axis()
    idx = [np.nonzero(np.abs(xi - ki) < 1.0)[0] for ki in k]
    if any(i.size == 0 for i in idx):
        return 0.0
    sigma = part.sigma_1d(k[0], xi[idx[0]])
    for ki, ii in zip(k[1:], idx[1:]):
        sigma = np.multiply.outer(sigma, part.sigma_1d(ki, xi[ii]))
    piece = sigma * F.values[np.ix_(*idx)]
    if p == 2:
        return float(math.sqrt(np.sum(np.abs(piece) ** 2) * grid.dxi**grid.n))
    full = np.zeros(grid.shape, dtype=complex)
    full[np.ix_(*idx)] = piece
    return lp_norm(inverse_transform(SampledFunction(grid, full, "frequency")), p)


def local_norms(
    f: SampledFunction,
    p: float,
    k_max: int,
    part: Optional[Partition] = None,
    workers: Optional[int] = None,
) -> Tuple[List[Index], np.ndarray, bool]:
    """||box_k f||_{L^p} for |k|_inf <= k_max with round-off below the floor zeroed."""

    if f.domain_tag != "space":
        raise DomainError("norms are computed from space-domain samples")
    if k_max + 1 > f.grid.xi_max:
        raise GridRangeError(f"k_max={k_max} exceeds the grid frequency range {f.grid.xi_max:.2f}")
    part = part or make_window()
    F = forward_transform(f)
    ks = frequency_indices(f.grid.n, k_max)
    norms = np.array(ordered_map(lambda k: _local_norm(F, part, k, p), ks, workers))
    if norms.size and norms.max() > 0:
        norms[norms < NOISE_FLOOR * norms.max()] = 0.0
    return ks, norms, F.boundary_warning


def _weighted(w: WeightFunction, ks: Sequence[Index], norms: np.ndarray) -> np.ndarray:
    radius = np.array([math.sqrt(sum(v * v for v in k)) for k in ks])
    out = np.zeros_like(norms)
    positive = norms > 0
    out[positive] = np.exp(w.values(radius[positive]) + np.log(norms[positive]))
    return out


def _tail(ks: Sequence[Index], weighted: np.ndarray, k_max: int, q: float) -> float:
    shells = np.array([max(abs(v) for v in k) for k in ks])
    S = [aggregate(weighted[shells == j].tolist(), q) for j in (k_max - 2, k_max - 1, k_max)]
    if S[2] == 0.0:
        return 0.0
    if S[0] == 0.0 or S[1] == 0.0:
        return math.inf
    r = max(S[2] / S[1], S[1] / S[0])
    if r >= 1.0:
        return math.inf
    if math.isinf(q):
        return S[2] * r
    return S[2] * r * (1.0 / (1.0 - r**q)) ** (1.0 / q)


def _result(
    ks: Sequence[Index], norms: np.ndarray, params: NormParams, boundary_warning: bool, p: float, q: float
) -> NormResult:
    weighted = _weighted(params.weight, ks, norms)
    value = aggregate(weighted.tolist(), q)
    tail = _tail(ks, weighted, params.k_max, q)
    certified = tail <= params.tail_tol
    result = NormResult(
        value=value,
        p=p,
        q=q,
        weight_spec=params.weight.spec_string,
        k_max=params.k_max,
        tail_estimate=tail,
        certified=certified,
        boundary_warning=boundary_warning,
        contributions=[(list(k), float(c)) for k, c in zip(ks, weighted)],
    )
    if not certified:
        logger.warning("norm_uncertified", spec=result.weight_spec, k_max=params.k_max, tail=tail)
    return result


def modulation_norm(f: SampledFunction, params: NormParams, workers: Optional[int] = None) -> NormResult:
    """(sum_k e^{q w(|k|)} ||box_k f||_p^q)^{1/q} over |k|_inf <= k_max with a tail bound."""

    ks, norms, warn = local_norms(f, params.p, params.k_max, params.partition, workers)
    return _result(ks, norms, params, warn, params.p, params.q)


def contribution_decay_slope(result: NormResult, w: WeightFunction) -> float:
    """Least-squares slope of log contribution against w(|k|) over nonzero k."""

    ks = [k for k, _ in result.contributions]
    values = result.contribution_values()
    radius = np.array([math.sqrt(sum(v * v for v in k)) for k in ks])
    keep = (values > 0) & (radius >= 1)
    if np.count_nonzero(keep) < 2:
        raise DomainError("need at least two nonzero contributions beyond k = 0")
    slope, _ = np.polyfit(w.values(radius[keep]), np.log(values[keep]), 1)
    return float(slope)


# --------------------------------------------------------------------------
# Embeddings, window independence, Fatou


class EmbeddingRow(BaseModel):
    p0: float
    q0: float
    p: float
    q: float
    ratio: float


class EmbeddingReport(Report):
    weight_spec: str
    rows: List[EmbeddingRow]
    max_ratio: float


def embedding_check(
    f: SampledFunction,
    w: WeightFunction,
    pairs: Sequence[Tuple[Tuple[float, float], Tuple[float, float]]],
    k_max: int = 48,
    workers: Optional[int] = None,
) -> EmbeddingReport:
    """||f||_{p,q} / ||f||_{p0,q0} for each pair with p0 <= p and q0 <= q."""

    cache: Dict[float, Tuple[List[Index], np.ndarray]] = {}

    def norm(p: float, q: float) -> float:
        if p not in cache:
            ks, local, _ = local_norms(f, p, k_max, workers=workers)
            cache[p] = (ks, _weighted(w, ks, local))
        return aggregate(cache[p][1].tolist(), q)

    rows = []
    for (p0, q0), (p, q) in pairs:
        if p0 > p or q0 > q:
            raise DomainError(f"embedding pair ({p0},{q0}) -> ({p},{q}) is not ordered")
        bottom = norm(p0, q0)
        ratio = 0.0 if bottom == 0.0 else norm(p, q) / bottom
        rows.append(EmbeddingRow(p0=p0, q0=q0, p=p, q=q, ratio=ratio))
    return EmbeddingReport(
        weight_spec=w.spec_string, rows=rows, max_ratio=max((r.ratio for r in rows), default=0.0)
    )


class WindowEquivalenceReport(Report):
    weight_spec: str
    plateaus: Tuple[float, float]
    ratios: List[float]
    lower: float
    upper: float
    equivalent: bool


def window_equivalence(
    functions: Sequence[SampledFunction],
    w: WeightFunction,
    p: float = 2.0,
    q: float = 1.0,
    k_max: int = 48,
    plateaus: Tuple[float, float] = (0.5, 0.4),
    bound: float = 10.0,
    workers: Optional[int] = None,
) -> WindowEquivalenceReport:
    """Two-sided comparison of norms taken with two admissible windows."""

    first, second = (NormParams(p, q, w, k_max, partition=Partition(a)) for a in plateaus)
    ratios = []
    for f in functions:
        top = modulation_norm(f, first, workers).value
        bottom = modulation_norm(f, second, workers).value
        ratios.append(0.0 if bottom == 0.0 else top / bottom)
    lower, upper = min(ratios), max(ratios)
    return WindowEquivalenceReport(
        weight_spec=w.spec_string,
        plateaus=plateaus,
        ratios=ratios,
        lower=lower,
        upper=upper,
        equivalent=bool(lower >= 1.0 / bound and upper <= bound),
    )


class FatouReport(Report):
    weight_spec: str
    cutoffs: List[float]
    truncated_norms: List[float]
    full_norm: float
    holds: bool


def spectral_truncation(f: SampledFunction, cutoff: float) -> SampledFunction:
    """Sharp truncation of the spectrum to |xi|_inf <= cutoff."""

    F = forward_transform(f)
    mask = np.ones(f.grid.shape, dtype=bool)
    for axis in F.grid.frequency_points():
        mask &= np.abs(axis) <= cutoff
    return inverse_transform(SampledFunction(f.grid, np.where(mask, F.values, 0.0), "frequency"))


def fatou_check(
    f: SampledFunction,
    params: NormParams,
    cutoffs: Sequence[float] = (1.0, 2.0, 4.0, 8.0, 16.0),
    workers: Optional[int] = None,
) -> FatouReport:
    """Compare ||f|| with sup_m ||f_m|| for spectral truncations f_m -> f."""

    cutoffs = sorted(cutoffs) + [f.grid.xi_max]
    norms = [modulation_norm(spectral_truncation(f, c), params, workers).value for c in cutoffs]
    full = modulation_norm(f, params, workers).value
    return FatouReport(
        weight_spec=params.weight.spec_string,
        cutoffs=list(cutoffs),
        truncated_norms=norms,
        full_norm=full,
        holds=bool(full <= max(norms) + 1e-10),
    )


# --------------------------------------------------------------------------
# Derivative growth


def _as_multi_index(alpha: Union[int, Sequence[int]], n: int) -> Index:
    if isinstance(alpha, int):
        alpha = (alpha,) + (0,) * (n - 1)
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != n or any(a < 0 for a in alpha):
        raise DomainError(f"invalid multi-index {alpha} for dimension {n}")
    return alpha


def spectral_derivative(f: SampledFunction, alpha: Union[int, Sequence[int]]) -> SampledFunction:
    """D^alpha f = i^{-|alpha|} d^alpha f, i.e. multiplication of the spectrum by xi^alpha.

    Spectral samples below NOISE_FLOOR relative to the peak are dropped first.
    """

    alpha = _as_multi_index(alpha, f.grid.n)
    F = forward_transform(f)
    spectrum = np.array(F.values)
    peak = np.abs(spectrum).max()
    spectrum[np.abs(spectrum) < NOISE_FLOOR * peak] = 0.0
    for axis, order in zip(F.grid.frequency_points(), alpha):
        if order:
            spectrum = spectrum * axis**order
    return inverse_transform(SampledFunction(f.grid, spectrum, "frequency"))


class DerivativeGrowthReport(Report):
    weight_spec: Optional[str]
    a_max: int
    C_star: float
    per_order: List[float]
    amplification_warning: bool


def derivative_growth_check(
    f: SampledFunction, w: WeightFunction, seq: WeightSequence, a_max: int
) -> DerivativeGrowthReport:
    """C* = max_{|alpha| <= a_max} (max|D^alpha f| / M_{|alpha|})^{1/(|alpha|+1)}."""

    if not 0 <= a_max <= 12:
        raise DomainError(f"a_max must lie in [0, 12], got {a_max}")
    if seq.p_max < a_max:
        raise DomainError(f"sequence has p_max={seq.p_max} < a_max={a_max}")
    if w.index_alpha == 0:
        raise DomainError(f"derivative growth bounds need a weight with positive index, got {w.spec_string}")
    per_order = [0.0] * (a_max + 1)
    warn = False
    for alpha in itertools.product(range(a_max + 1), repeat=f.grid.n):
        order = sum(alpha)
        if order > a_max:
            continue
        derivative = spectral_derivative(f, alpha)
        peak = float(np.abs(derivative.values).max())
        if order and boundary_ratio(derivative) > DERIVATIVE_WARN:
            warn = True
        if peak > 0:
            ratio = math.exp((math.log(peak) - seq.log_values[order]) / (order + 1))
            per_order[order] = max(per_order[order], ratio)
    if warn:
        logger.warning("derivative_amplification", spec=w.spec_string, a_max=a_max)
    return DerivativeGrowthReport(
        weight_spec=seq.weight_spec or w.spec_string,
        a_max=a_max,
        C_star=max(per_order),
        per_order=per_order,
        amplification_warning=warn,
    )
