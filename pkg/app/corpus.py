"""Test functions addressable by string id and Fourier-decay measurement."""

from __future__ import annotations

import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel
from scipy import optimize

from .decomposition import Grid, Partition, SampledFunction, forward_transform, require_boundary_decay
from .errors import DomainError, SpecParseError
from .inequality_lab import Density
from .reports import Report

logger = structlog.get_logger(__name__)

FunctionKind = Literal["gaussian", "modulated_gaussian", "gevrey_bump", "psi_mu", "window"]

UNDERFLOW = 1e-300
FIT_WINDOW = (1e-13, 1e-2)

ALGEBRA_CORPUS: Tuple[str, ...] = (
    "gaussian:sigma=1",
    "gaussian:sigma=0.5,c=0.5",
    "gaussian:sigma=1,m=3",
    "gevrey:mu=-1",
    "gevrey:mu=-2",
    "window",
)


class FunctionSpec(BaseModel):
    kind: FunctionKind
    center: float = 0.0
    sigma: float = 1.0
    modulation: float = 0.0
    amp: float = 1.0
    mu: Optional[float] = None
    width: float = 1.0
    plateau: float = 0.5


# --------------------------------------------------------------------------
# Building blocks


def psi_mu(t: np.ndarray, mu: float) -> np.ndarray:
    """psi_mu(t) = exp(-t^mu) for t > 0 and 0 otherwise."""

    if not mu < 0:
        raise DomainError(f"mu must be negative, got {mu}")
    t = np.asarray(t, dtype=float)
    positive = t > 0
    with np.errstate(over="ignore", under="ignore"):
        safe = np.where(positive, t, 1.0)
        values = np.where(positive, np.exp(-(safe**mu)), 0.0)
    return np.where(values < UNDERFLOW, 0.0, values)


def phi_mu(t: np.ndarray, mu: float) -> np.ndarray:
    """phi_mu(t) = psi_mu(1 - t) psi_mu(t), supported in [0, 1]."""

    values = psi_mu(1.0 - np.asarray(t, dtype=float), mu) * psi_mu(t, mu)
    return np.where(values < UNDERFLOW, 0.0, values)


def _tensor(grid: Grid, profile) -> np.ndarray:
    axes = [profile(x) for x in [grid.x_axis()] * grid.n]
    out = axes[0]
    for axis in axes[1:]:
        out = np.multiply.outer(out, axis)
    return out


def gaussian(
    grid: Grid,
    center: float = 0.0,
    sigma: float = 1.0,
    modulation: float = 0.0,
    amp: float = 1.0,
) -> SampledFunction:
    """amp * e^{i m.x} e^{-|x - c|^2 / (2 sigma^2)}."""

    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")

    def profile(x: np.ndarray) -> np.ndarray:
        return np.exp(1j * modulation * x) * np.exp(-((x - center) ** 2) / (2.0 * sigma**2))

    f = SampledFunction(grid, amp * _tensor(grid, profile), "space")
    require_boundary_decay(f, "gaussian")
    return f


def gevrey_bump(mu: float, grid: Grid, amp: float = 1.0, width: float = 1.0) -> SampledFunction:
    if not mu < 0:
        raise DomainError(f"gevrey bump needs mu < 0, got {mu}")
    if not width > 0:
        raise DomainError(f"width must be positive, got {width}")
    f = SampledFunction(grid, amp * _tensor(grid, lambda x: phi_mu(x / width, mu)), "space")
    require_boundary_decay(f, "gevrey bump")
    return f


def window_function(grid: Grid, plateau: float = 0.5, amp: float = 1.0, width: float = 1.0) -> SampledFunction:
    part = Partition(plateau=plateau)
    return SampledFunction(grid, amp * _tensor(grid, lambda x: part.window(x / width)), "space")


def gevrey_order(mu: float) -> float:
    """s = 1 - 1/mu, the Gevrey order of phi_mu."""

    return 1.0 - 1.0 / mu


# --------------------------------------------------------------------------
# String ids


def parse_function_id(text: str) -> FunctionSpec:
    """Parse ``gaussian:sigma=,m=,c=,amp=``, ``gevrey:mu=[,width=,amp=]``,
    ``psi:mu=`` or ``window[:plateau=,width=,amp=]``."""

    kind, _, body = text.strip().partition(":")
    params: Dict[str, float] = {}
    for token in filter(None, (item.strip() for item in body.split(","))):
        key, sep, value = token.partition("=")
        if not sep:
            raise SpecParseError(f"malformed parameter {token!r} in {text!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError as exc:
            raise SpecParseError(f"invalid number {value!r} in {text!r}") from exc

    def take(allowed: Sequence[str]) -> Dict[str, float]:
        unknown = set(params) - set(allowed)
        if unknown:
            raise SpecParseError(f"unknown parameters for {kind}: {', '.join(sorted(unknown))}")
        return params

    if kind == "gaussian":
        p = take(("sigma", "m", "c", "amp"))
        m = p.get("m", 0.0)
        return FunctionSpec(
            kind="modulated_gaussian" if m else "gaussian",
            sigma=p.get("sigma", 1.0),
            modulation=m,
            center=p.get("c", 0.0),
            amp=p.get("amp", 1.0),
        )
    if kind in ("gevrey", "psi"):
        p = take(("mu", "width", "amp"))
        if "mu" not in p:
            raise SpecParseError(f"{kind} needs mu")
        if not p["mu"] < 0:
            raise SpecParseError(f"mu must be negative, got {p['mu']}")
        return FunctionSpec(
            kind="gevrey_bump" if kind == "gevrey" else "psi_mu",
            mu=p["mu"],
            width=p.get("width", 1.0),
            amp=p.get("amp", 1.0),
        )
    if kind == "window":
        p = take(("plateau", "width", "amp"))
        return FunctionSpec(
            kind="window", plateau=p.get("plateau", 0.5), width=p.get("width", 1.0), amp=p.get("amp", 1.0)
        )
    raise SpecParseError(f"unknown function id {text!r}")


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def canonical_function_id(spec: FunctionSpec) -> str:
    extras: List[str] = []
    if spec.kind in ("gaussian", "modulated_gaussian"):
        extras.append(f"sigma={_fmt(spec.sigma)}")
        if spec.modulation:
            extras.append(f"m={_fmt(spec.modulation)}")
        if spec.center:
            extras.append(f"c={_fmt(spec.center)}")
        head = "gaussian"
    elif spec.kind == "window":
        head = "window"
        if spec.plateau != 0.5:
            extras.append(f"plateau={_fmt(spec.plateau)}")
    else:
        head = "gevrey" if spec.kind == "gevrey_bump" else "psi"
        extras.append(f"mu={_fmt(spec.mu)}")
    if spec.kind not in ("gaussian", "modulated_gaussian") and spec.width != 1.0:
        extras.append(f"width={_fmt(spec.width)}")
    if spec.amp != 1.0:
        extras.append(f"amp={_fmt(spec.amp)}")
    return head + (":" + ",".join(extras) if extras else "")


def make_function(function_id: str | FunctionSpec, grid: Grid) -> SampledFunction:
    spec = parse_function_id(function_id) if isinstance(function_id, str) else function_id
    if spec.kind in ("gaussian", "modulated_gaussian"):
        return gaussian(grid, spec.center, spec.sigma, spec.modulation, spec.amp)
    if spec.kind == "gevrey_bump":
        return gevrey_bump(spec.mu, grid, spec.amp, spec.width)
    if spec.kind == "window":
        return window_function(grid, spec.plateau, spec.amp, spec.width)
    f = SampledFunction(grid, spec.amp * _tensor(grid, lambda x: psi_mu(x / spec.width, spec.mu)), "space")
    require_boundary_decay(f, "psi_mu")
    return f


def make_corpus(ids: Sequence[str], grid: Grid) -> Dict[str, SampledFunction]:
    return {function_id: make_function(function_id, grid) for function_id in ids}


# --------------------------------------------------------------------------
# Fourier decay


class DecayFit(Report):
    c: float
    eps: float
    fitted_exponent: float
    beta: float
    model_exponent: Optional[float] = None
    relative_error: Optional[float] = None
    xi_range: Tuple[float, float]
    points: int
    used_local_maxima: bool


def _fit_range(grid: Grid, F: np.ndarray) -> Tuple[np.ndarray, np.ndarray, bool]:
    xi = grid.xi_axis()
    half = grid.xi_max / 2.0
    positive = (xi > 0) & (xi <= half)
    order = np.argsort(xi[positive])
    xs, amps = xi[positive][order], np.abs(F[positive])[order]
    inside = (amps >= FIT_WINDOW[0]) & (amps <= FIT_WINDOW[1])
    peaks = np.zeros_like(inside)
    peaks[1:-1] = (amps[1:-1] >= amps[:-2]) & (amps[1:-1] >= amps[2:])
    if np.count_nonzero(peaks & inside) >= 6:
        return xs[peaks & inside], amps[peaks & inside], True
    return xs[inside], amps[inside], False


def _linear_fit(kappa: float, xs: np.ndarray, logs: np.ndarray) -> Tuple[np.ndarray, float]:
    design = np.column_stack([np.ones_like(xs), np.log(xs), -(xs**kappa)])
    coef, *_ = np.linalg.lstsq(design, logs, rcond=None)
    residual = float(np.sum((design @ coef - logs) ** 2))
    return coef, residual


def fourier_decay_fit(f: SampledFunction, model_exponent: Optional[float] = None) -> DecayFit:
    """Fit log|Ff(xi)| ~ log c + beta log xi - eps xi^kappa where 1e-13 <= |Ff| <= 1e-2."""

    if f.grid.n != 1:
        raise DomainError("fourier_decay_fit handles one-dimensional functions")
    F = forward_transform(f).values
    xs, amps, used_peaks = _fit_range(f.grid, F)
    if xs.size < 6:
        raise DomainError(f"insufficient dynamic range for a decay fit ({xs.size} usable samples)")
    logs = np.log(amps)
    res = optimize.minimize_scalar(
        lambda kappa: _linear_fit(kappa, xs, logs)[1], bounds=(0.05, 3.0), method="bounded", options={"xatol": 1e-6}
    )
    kappa = float(res.x)
    (log_c, beta, eps), _ = _linear_fit(kappa, xs, logs)
    rel = None if model_exponent is None else abs(kappa - model_exponent) / model_exponent
    fit = DecayFit(
        c=math.exp(log_c),
        eps=float(eps),
        fitted_exponent=kappa,
        beta=float(beta),
        model_exponent=model_exponent,
        relative_error=rel,
        xi_range=(float(xs[0]), float(xs[-1])),
        points=int(xs.size),
        used_local_maxima=used_peaks,
    )
    logger.info("fourier_decay_fit", kappa=kappa, model=model_exponent, points=fit.points)
    return fit


# --------------------------------------------------------------------------
# Densities


def gevrey_envelope_constant(mu: float) -> float:
    """c_mu in log|F phi_mu(xi)| ~ -c_mu |xi|^{1/s} from a stationary-phase estimate."""

    nu = -mu
    s = gevrey_order(mu)
    return (1.0 + nu) * nu ** (-1.0 / s) * math.cos(math.pi / (2.0 * s))


def sampled_peaks(grid: Grid, F: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Positive local maxima of |F| above the noise floor, as (xi, log|F|)."""

    xi = grid.xi_axis()
    positive = (xi > 0) & (xi <= grid.xi_max / 2.0)
    order = np.argsort(xi[positive])
    xs, amps = xi[positive][order], np.abs(F[positive])[order]
    peaks = np.zeros(xs.size, dtype=bool)
    peaks[1:-1] = (amps[1:-1] >= amps[:-2]) & (amps[1:-1] >= amps[2:])
    usable = peaks & (amps >= FIT_WINDOW[0])
    last = np.nonzero(amps >= FIT_WINDOW[0])[0]
    if last.size:
        usable &= xs <= xs[last[-1]]
    return xs[usable], np.log(amps[usable])


def gevrey_bump_density(mu: float, grid: Optional[Grid] = None) -> Density:
    """Density F phi_mu sampled on ``grid``.

    log|F phi_mu| follows the sampled peaks while they stay above the FFT noise
    floor and the stationary-phase envelope beyond the last usable peak.
    """

    grid = grid or Grid(n=1, L=32.0, N=16384)
    bump = gevrey_bump(mu, grid)
    spectrum = forward_transform(bump)
    xi = grid.xi_axis()
    order = np.argsort(xi)
    xs, values = xi[order], spectrum.values[order]
    nu = -mu
    s = gevrey_order(mu)
    c_mu = gevrey_envelope_constant(mu)
    power = (nu + 2.0) / (2.0 * nu + 2.0)

    def shape(x: np.ndarray) -> np.ndarray:
        return -power * np.log(x) - c_mu * x ** (1.0 / s)

    peak_x, peak_log = sampled_peaks(grid, spectrum.values)
    if peak_x.size < 2:
        raise DomainError(f"grid too coarse to resolve the spectrum of gevrey:mu={_fmt(mu)}")
    tail = peak_x >= 0.5 * peak_x[-1]
    log_A = float(np.median(peak_log[tail] - shape(peak_x[tail])))

    def value(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.interp(x, xs, values.real, left=0.0, right=0.0)

    def log_abs(x: np.ndarray) -> np.ndarray:
        x = np.abs(np.asarray(x, dtype=float))
        near = np.log(np.maximum(np.abs(np.interp(x, xs, np.abs(values))), UNDERFLOW))
        sampled = np.interp(x, peak_x, peak_log)
        far = peak_log[-1] + shape(np.maximum(x, peak_x[-1])) - shape(peak_x[-1])
        return np.where(x < peak_x[0], near, np.where(x <= peak_x[-1], sampled, far))

    def envelope(x: np.ndarray) -> np.ndarray:
        return log_A + shape(np.maximum(np.abs(np.asarray(x, dtype=float)), 1.0))

    return Density(
        label=f"F gevrey:mu={_fmt(mu)}", value=value, log_abs=log_abs, sampled=spectrum, envelope=envelope
    )


def stretched_exp_density(kappa: float) -> Density:
    """g(xi) = exp(-|xi|^kappa)."""

    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")

    def value(x: np.ndarray) -> np.ndarray:
        return np.exp(-np.abs(np.asarray(x, dtype=float)) ** kappa)

    def log_abs(x: np.ndarray) -> np.ndarray:
        return -np.abs(np.asarray(x, dtype=float)) ** kappa

    return Density(label=f"stretched_exp:kappa={_fmt(kappa)}", value=value, log_abs=log_abs)


def odd_density(kappa: float = 0.5) -> Density:
    """g(xi) = xi exp(-|xi|^kappa), odd with zero mean."""

    def value(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x * np.exp(-np.abs(x) ** kappa)

    def log_abs(x: np.ndarray) -> np.ndarray:
        x = np.abs(np.asarray(x, dtype=float))
        return np.log(np.maximum(x, UNDERFLOW)) - x**kappa

    return Density(label=f"odd_stretched_exp:kappa={_fmt(kappa)}", value=value, log_abs=log_abs)
