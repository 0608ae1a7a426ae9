"""Evaluable weight functions w*, their derivatives and the weight mini-language.

A builtin weight is ``w*(x) = <x>^{1/s} * prod_j (l_j <x>_*)^{r_j}`` where
``<x> = (1 + x^2)^{1/2}``, ``<x>_* = (star^2 + x^2)^{1/2}`` and ``l_j`` is the
j-fold iterated logarithm.  ``s = inf`` drops the algebraic factor and gives the
slowly varying subfamily.  Weights are functions of ``x >= 0`` and are
evaluated at ``|k|`` for integer frequencies ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np
import structlog

from .errors import DomainError, SpecParseError

logger = structlog.get_logger(__name__)

ArrayLike = Union[float, np.ndarray]
Evaluator = Callable[[np.ndarray], np.ndarray]

MAX_LOG_DEPTH = 3


def tower(height: int) -> float:
    """Return e↑↑height (1, e, e^e, e^{e^e})."""

    value = 1.0
    for _ in range(height):
        value = math.exp(value)
    return value


@dataclass(frozen=True)
class BuiltinWeightSpec:
    """Parameters of the builtin family."""

    s: float
    r: Tuple[float, ...] = ()
    shift_star: Optional[float] = None

    @property
    def depth(self) -> int:
        """Index of the last nonzero log exponent."""

        depth = 0
        for j, exponent in enumerate(self.r, start=1):
            if exponent != 0:
                depth = j
        return depth

    @property
    def star(self) -> float:
        if self.shift_star is not None:
            return float(self.shift_star)
        return tower(max(self.depth, 1))


@dataclass(frozen=True)
class PowerWeightSpec:
    """Control evaluators ``x^a`` (kind ``power``) and ``<x>^a`` (kind ``bracket``)."""

    kind: str
    a: float


@dataclass(frozen=True)
class CustomWeightSpec:
    """Opaque evaluator triple supplied by the caller."""

    label: str
    w: Evaluator = field(compare=False)
    dw: Optional[Evaluator] = field(default=None, compare=False)
    d2w: Optional[Evaluator] = field(default=None, compare=False)


FamilySpec = Union[BuiltinWeightSpec, PowerWeightSpec, CustomWeightSpec]


@dataclass(frozen=True)
class WeightFunction:
    """Immutable weight with vectorised value and derivative evaluators."""

    family_spec: FamilySpec
    index_alpha: float
    has_analytic_derivatives: bool
    _w: Evaluator = field(repr=False, compare=False)
    _dw: Optional[Evaluator] = field(default=None, repr=False, compare=False)
    _d2w: Optional[Evaluator] = field(default=None, repr=False, compare=False)

    @property
    def spec_string(self) -> str:
        return canonical_weight_spec(self.family_spec)

    def values(self, x: ArrayLike) -> np.ndarray:
        """Evaluate on an array without domain checks."""

        return self._w(np.asarray(x, dtype=float))

    def derivative_values(self, x: ArrayLike, order: int, numeric: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        analytic = self._dw if order == 1 else self._d2w
        if analytic is not None and not numeric:
            return analytic(x)
        return _finite_difference(self._w, x, order)

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return eval_weight(self, x)


def _finite_difference(fn: Evaluator, x: np.ndarray, order: int) -> np.ndarray:
    if order == 1:
        h = np.maximum(1e-6, 1e-6 * x)
        return (fn(x + h) - fn(x - h)) / (2.0 * h)
    # wider step for the 3-point stencil keeps round-off at O(eps/h^2) small
    h = np.maximum(1e-4, 1e-4 * x)
    return (fn(x + h) - 2.0 * fn(x) + fn(x - h)) / (h * h)


def _builtin_evaluators(spec: BuiltinWeightSpec) -> Tuple[Evaluator, Evaluator, Evaluator]:
    inv_s = 0.0 if math.isinf(spec.s) else 1.0 / spec.s
    exponents = spec.r[: spec.depth]
    star2 = spec.star**2

    def logs(x: np.ndarray) -> list[np.ndarray]:
        u = np.sqrt(star2 + x * x)
        levels = [np.log(u)]
        for _ in range(1, len(exponents)):
            levels.append(np.log(levels[-1]))
        return levels

    def w(x: np.ndarray) -> np.ndarray:
        value = (1.0 + x * x) ** (0.5 * inv_s)
        for level, exponent in zip(logs(x), exponents):
            if exponent != 0:
                value = value * level**exponent
        return value

    def log_derivatives(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        # g = (log w)' and its derivative g'
        g = inv_s * x / (1.0 + x * x)
        dg = inv_s * (1.0 - x * x) / (1.0 + x * x) ** 2
        u2 = star2 + x * x
        a = x / u2
        da = (star2 - x * x) / (u2 * u2)
        for level, exponent in zip(logs(x), exponents):
            a_next = a / level
            da_next = (da * level - a * a) / (level * level)
            a, da = a_next, da_next
            g = g + exponent * a
            dg = dg + exponent * da
        return g, dg

    def dw(x: np.ndarray) -> np.ndarray:
        g, _ = log_derivatives(x)
        return w(x) * g

    def d2w(x: np.ndarray) -> np.ndarray:
        g, dg = log_derivatives(x)
        return w(x) * (g * g + dg)

    return w, dw, d2w


def _validate_builtin(spec: BuiltinWeightSpec) -> None:
    if math.isnan(spec.s) or spec.s <= 1:
        raise DomainError(f"Gevrey parameter s must lie in (1, inf], got {spec.s}")
    if spec.depth > MAX_LOG_DEPTH:
        raise DomainError(f"at most {MAX_LOG_DEPTH} iterated logarithms are supported")
    if math.isinf(spec.s):
        r = list(spec.r)
        if not r or r[0] < 1:
            raise DomainError("slowly varying weights need r_1 > 1 or r_1 = 1")
        if r[0] == 1:
            rest = [value for value in r[1:] if value != 0]
            if not rest or rest[0] < 0:
                raise DomainError("with r_1 = 1 the first nonzero of r_2..r_m must be positive")
    if spec.shift_star is not None:
        if spec.shift_star < math.e:
            raise DomainError(f"shift_star must be at least e, got {spec.shift_star}")
        if spec.shift_star < tower(spec.depth) * (1 - 1e-12):
            raise DomainError(
                f"shift_star={spec.shift_star} makes l_{spec.depth}<x>_* smaller than 1 near 0"
            )


def make_builtin_weight(spec: BuiltinWeightSpec) -> WeightFunction:
    _validate_builtin(spec)
    w, dw, d2w = _builtin_evaluators(spec)
    alpha = 0.0 if math.isinf(spec.s) else 1.0 / spec.s
    return WeightFunction(spec, alpha, True, w, dw, d2w)


def make_power_weight(spec: PowerWeightSpec) -> WeightFunction:
    """Build ``x^a`` or ``<x>^a``; these serve as analytic oracles and controls."""

    a = spec.a
    if not a > 0:
        raise DomainError(f"exponent must be positive, got {a}")
    if spec.kind == "power":

        def w(x: np.ndarray) -> np.ndarray:
            return x**a

        def dw(x: np.ndarray) -> np.ndarray:
            return a * x ** (a - 1.0)

        def d2w(x: np.ndarray) -> np.ndarray:
            return a * (a - 1.0) * x ** (a - 2.0)

    elif spec.kind == "bracket":

        def w(x: np.ndarray) -> np.ndarray:
            return (1.0 + x * x) ** (0.5 * a)

        def dw(x: np.ndarray) -> np.ndarray:
            return a * x * (1.0 + x * x) ** (0.5 * a - 1.0)

        def d2w(x: np.ndarray) -> np.ndarray:
            b = 1.0 + x * x
            return a * b ** (0.5 * a - 2.0) * (1.0 + (a - 1.0) * x * x)

    else:
        raise SpecParseError(f"unknown power weight kind: {spec.kind}")
    return WeightFunction(spec, a, True, w, dw, d2w)


def make_custom_weight(
    w: Evaluator,
    dw: Optional[Evaluator] = None,
    d2w: Optional[Evaluator] = None,
    index_alpha: float = 0.0,
    label: str = "custom",
) -> WeightFunction:
    if not 0 <= index_alpha < 1:
        raise DomainError(f"index_alpha must lie in [0, 1), got {index_alpha}")
    spec = CustomWeightSpec(label, w, dw, d2w)
    analytic = dw is not None and d2w is not None

    def values(x: np.ndarray) -> np.ndarray:
        return np.asarray(w(x), dtype=float)

    return WeightFunction(spec, float(index_alpha), analytic, values, dw, d2w)


def eval_weight(w: WeightFunction, x: ArrayLike) -> ArrayLike:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("weights are evaluated at finite arguments only")
    if np.any(arr < 0):
        raise DomainError("weights are functions of |k|; negative argument given")
    out = w.values(arr)
    return float(out) if np.ndim(x) == 0 else out


def eval_derivative(w: WeightFunction, x: ArrayLike, order: int = 1, numeric: bool = False) -> ArrayLike:
    """First or second derivative; ``numeric`` forces the finite-difference path."""

    if order not in (1, 2):
        raise DomainError(f"derivative order must be 1 or 2, got {order}")
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("derivatives are evaluated at x > 0")
    out = w.derivative_values(arr, order, numeric=numeric)
    return float(out) if np.ndim(x) == 0 else out


def slowly_varying_part(w: WeightFunction, x: ArrayLike) -> ArrayLike:
    """Return w*(x)/x^alpha."""

    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("the slowly varying part is evaluated at x > 0")
    values = w.values(arr)
    if w.index_alpha > 0:
        values = values / arr**w.index_alpha
    return float(values) if np.ndim(x) == 0 else values


def liminf_slowly_varying(w: WeightFunction, t_max: float = 1e12) -> float:
    """Estimate C0 = liminf w~*(x) from the upper half (in log scale) of [1, t_max]."""

    probes = np.logspace(0.5 * math.log10(t_max), math.log10(t_max), 41)
    return float(np.min(slowly_varying_part(w, probes)))


def slowly_varying_decreasing(w: WeightFunction, t_max: float = 1e12, tol: float = 1e-3) -> bool:
    """True when w~* drops by more than ``tol`` across the upper half of [1, t_max]."""

    lo, hi = slowly_varying_part(w, np.array([math.sqrt(t_max), t_max]))
    return bool(hi < lo * (1.0 - tol))


# --------------------------------------------------------------------------
# Mini-language


def _fmt(value: float) -> str:
    if math.isinf(value):
        return "inf"
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _parse_float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise SpecParseError(f"invalid number for {key}: {text!r}") from exc


def _parse_params(body: str) -> dict[str, list[str]]:
    params: dict[str, list[str]] = {}
    current: Optional[str] = None
    for token in (item.strip() for item in body.split(",")):
        if not token:
            continue
        if "=" in token:
            key, _, value = token.partition("=")
            current = key.strip()
            if current in params:
                raise SpecParseError(f"duplicate parameter {current!r}")
            params[current] = [value.strip()]
        elif current is not None:
            params[current].append(token)
        else:
            raise SpecParseError(f"value {token!r} has no parameter name")
    return params


def _single(params: dict[str, list[str]], key: str) -> float:
    values = params.get(key)
    if values is None:
        raise SpecParseError(f"missing parameter {key!r}")
    if len(values) != 1:
        raise SpecParseError(f"parameter {key!r} takes one value")
    return _parse_float(values[0], key)


def _require_keys(params: dict[str, list[str]], allowed: set[str]) -> None:
    unknown = set(params) - allowed
    if unknown:
        raise SpecParseError(f"unknown parameters: {', '.join(sorted(unknown))}")


def parse_weight_spec(text: str) -> FamilySpec:
    """Parse ``gevrey:s=``, ``loglog``, ``family:s=,r=,star=``, ``power:a=``,
    ``bracket:a=``, ``linear`` or ``log:gamma=``."""

    if not text or not text.strip():
        raise SpecParseError("empty weight specification")
    kind, _, body = text.strip().partition(":")
    kind = kind.strip().lower()
    params = _parse_params(body)

    if kind == "loglog":
        _require_keys(params, set())
        return BuiltinWeightSpec(math.inf, (1.0, 1.0))
    if kind == "linear":
        _require_keys(params, set())
        return PowerWeightSpec("power", 1.0)
    if kind == "gevrey":
        _require_keys(params, {"s"})
        return BuiltinWeightSpec(_single(params, "s"))
    if kind in ("power", "bracket"):
        _require_keys(params, {"a"})
        return PowerWeightSpec(kind, _single(params, "a"))
    if kind == "log":
        _require_keys(params, {"gamma"})
        return BuiltinWeightSpec(math.inf, (_single(params, "gamma"),))
    if kind == "family":
        _require_keys(params, {"s", "r", "star"})
        s = _single(params, "s")
        r = tuple(_parse_float(value, "r") for value in params.get("r", []) if value)
        star = _single(params, "star") if "star" in params else None
        return BuiltinWeightSpec(s, r, star)
    raise SpecParseError(f"unknown weight kind: {kind!r}")


def canonical_weight_spec(spec: FamilySpec) -> str:
    if isinstance(spec, CustomWeightSpec):
        return f"custom:{spec.label}"
    if isinstance(spec, PowerWeightSpec):
        if spec.kind == "power" and spec.a == 1.0:
            return "linear"
        return f"{spec.kind}:a={_fmt(spec.a)}"
    r = tuple(spec.r[: spec.depth])
    if spec.shift_star is None:
        if not r and not math.isinf(spec.s):
            return f"gevrey:s={_fmt(spec.s)}"
        if math.isinf(spec.s) and r == (1.0, 1.0):
            return "loglog"
    parts = [f"s={_fmt(spec.s)}"]
    if r:
        parts.append("r=" + ",".join(_fmt(value) for value in r))
    if spec.shift_star is not None:
        parts.append(f"star={_fmt(spec.shift_star)}")
    return "family:" + ",".join(parts)


def make_weight(spec: FamilySpec | str) -> WeightFunction:
    """Build a weight from a spec object or a mini-language string."""

    if isinstance(spec, str):
        spec = parse_weight_spec(spec)
    if isinstance(spec, BuiltinWeightSpec):
        weight = make_builtin_weight(spec)
    elif isinstance(spec, PowerWeightSpec):
        weight = make_power_weight(spec)
    else:
        weight = make_custom_weight(spec.w, spec.dw, spec.d2w, label=spec.label)
    logger.debug("weight_built", spec=weight.spec_string, alpha=weight.index_alpha)
    return weight
