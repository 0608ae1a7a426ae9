"""Frequency-uniform decomposition: window, partition of unity sigma_k,
the unitary Fourier transform on a uniform grid and the box operators."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
import structlog

from .errors import BoundaryDecayError, DomainError, GridRangeError
from .reports import Report, atomic_write_bytes, write_csv

logger = structlog.get_logger(__name__)

DomainTag = Literal["space", "frequency"]

BOUNDARY_TOL = 1e-12
BINARY_MAGIC = b"MSF1"
BINARY_HEADER = struct.Struct("<4sIdIB")
_TAG_CODES = {"space": 0, "frequency": 1}


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [-L, L)^n with N samples per axis."""

    n: int = 1
    L: float = 32.0
    N: int = 4096

    def __post_init__(self) -> None:
        if self.n not in (1, 2):
            raise GridRangeError(f"dimension must be 1 or 2, got {self.n}")
        if self.N < 2 or self.N & (self.N - 1):
            raise GridRangeError(f"N must be a power of two, got {self.N}")
        if self.dxi > 0.25 + 1e-15:
            raise GridRangeError(f"frequency spacing pi/L={self.dxi:.4f} exceeds 0.25; enlarge L")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def dxi(self) -> float:
        return math.pi / self.L

    @property
    def xi_max(self) -> float:
        return math.pi / self.dx

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.N,) * self.n

    def x_axis(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.N)

    def xi_axis(self) -> np.ndarray:
        return 2.0 * math.pi * np.fft.fftfreq(self.N, d=self.dx)

    def mesh(self, axis: np.ndarray) -> List[np.ndarray]:
        return list(np.meshgrid(*([axis] * self.n), indexing="ij"))

    def space_points(self) -> List[np.ndarray]:
        return self.mesh(self.x_axis())

    def frequency_points(self) -> List[np.ndarray]:
        return self.mesh(self.xi_axis())

    def check_index(self, k: Sequence[int]) -> Tuple[int, ...]:
        k = tuple(int(v) for v in k)
        if len(k) != self.n:
            raise GridRangeError(f"frequency index {k} does not have dimension {self.n}")
        if any(abs(v) + 1 > self.xi_max for v in k):
            raise GridRangeError(f"frequency index {k} exceeds the grid range |k_i| + 1 <= {self.xi_max:.3f}")
        return k


@dataclass(frozen=True)
class SampledFunction:
    """Complex samples on a grid, in space or in frequency."""

    grid: Grid
    values: np.ndarray = field(repr=False)
    domain_tag: DomainTag = "space"
    boundary_warning: bool = False

    def __post_init__(self) -> None:
        data = np.array(self.values, dtype=complex)
        if data.shape != self.grid.shape:
            raise GridRangeError(f"values of shape {data.shape} do not match grid {self.grid.shape}")
        if not np.all(np.isfinite(data)):
            raise DomainError("sampled values must be finite")
        data.flags.writeable = False
        object.__setattr__(self, "values", data)

    @classmethod
    def zeros(cls, grid: Grid) -> "SampledFunction":
        return cls(grid, np.zeros(grid.shape), "space")

    def with_values(self, values: np.ndarray) -> "SampledFunction":
        return SampledFunction(self.grid, values, self.domain_tag)

    def scaled(self, factor: complex) -> "SampledFunction":
        return self.with_values(factor * self.values)

    def __add__(self, other: "SampledFunction") -> "SampledFunction":
        _same_domain(self, other)
        return self.with_values(self.values + other.values)

    def __mul__(self, other: "SampledFunction") -> "SampledFunction":
        _same_domain(self, other)
        return self.with_values(self.values * other.values)


def _same_domain(a: SampledFunction, b: SampledFunction) -> None:
    if a.grid != b.grid or a.domain_tag != b.domain_tag:
        raise GridRangeError("functions live on different grids or domains")


def boundary_ratio(f: SampledFunction) -> float:
    """Largest boundary sample relative to the sup norm."""

    values = np.abs(f.values)
    peak = float(values.max()) if values.size else 0.0
    if peak == 0.0:
        return 0.0
    edge = 0.0
    for axis in range(f.grid.n):
        edge = max(edge, float(np.take(values, 0, axis=axis).max()), float(np.take(values, -1, axis=axis).max()))
    return edge / peak


def require_boundary_decay(f: SampledFunction, label: str = "function") -> None:
    ratio = boundary_ratio(f)
    if ratio > BOUNDARY_TOL:
        raise BoundaryDecayError(f"{label} does not decay at the box boundary (ratio {ratio:.3g})")


# --------------------------------------------------------------------------
# Transforms


def _phase(grid: Grid) -> np.ndarray:
    # (-1)^m from the shift x_0 = -L; N is even so index parity equals m parity
    signs = np.where(np.arange(grid.N) % 2 == 0, 1.0, -1.0)
    out = signs
    for _ in range(grid.n - 1):
        out = np.multiply.outer(out, signs)
    return out


def forward_transform(f: SampledFunction) -> SampledFunction:
    """(2 pi)^{-n/2} * Riemann sum of f(x) e^{-i x.xi} on the frequency grid."""

    if f.domain_tag != "space":
        raise DomainError("forward_transform expects a space-domain function")
    grid = f.grid
    warn = boundary_ratio(f) > BOUNDARY_TOL
    if warn:
        logger.warning("boundary_decay_violation", ratio=boundary_ratio(f))
    scale = (2.0 * math.pi) ** (-grid.n / 2.0) * grid.dx**grid.n
    spectrum = scale * _phase(grid) * np.fft.fftn(f.values)
    return SampledFunction(grid, spectrum, "frequency", boundary_warning=warn)


def inverse_transform(F: SampledFunction) -> SampledFunction:
    if F.domain_tag != "frequency":
        raise DomainError("inverse_transform expects a frequency-domain function")
    grid = F.grid
    scale = (2.0 * math.pi) ** (-grid.n / 2.0) * grid.dxi**grid.n * grid.N**grid.n
    values = scale * np.fft.ifftn(_phase(grid) * F.values)
    return SampledFunction(grid, values, "space", boundary_warning=F.boundary_warning)


def evaluate_inverse_at(F: SampledFunction, x: np.ndarray) -> np.ndarray:
    """Direct evaluation of the discrete inverse transform at arbitrary 1-D points."""

    if F.grid.n != 1 or F.domain_tag != "frequency":
        raise DomainError("evaluate_inverse_at handles 1-D frequency-domain data")
    xi = F.grid.xi_axis()
    kernel = np.exp(1j * np.multiply.outer(np.asarray(x, dtype=float), xi))
    return (2.0 * math.pi) ** -0.5 * F.grid.dxi * kernel @ F.values


# --------------------------------------------------------------------------
# Window and partition


def _mollifier(u: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(u > 0.0, np.exp(-1.0 / np.where(u > 0.0, u, 1.0)), 0.0)


@dataclass(frozen=True)
class Partition:
    """Window rho(xi) = prod_i g(xi_i) and its normalised translates sigma_k."""

    plateau: float = 0.5
    support_radius: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.plateau < 1.0:
            raise DomainError(f"window plateau must lie in (0, 1), got {self.plateau}")

    def window(self, t: np.ndarray) -> np.ndarray:
        t = np.abs(np.asarray(t, dtype=float))
        u = np.clip((t - self.plateau) / (1.0 - self.plateau), 0.0, 1.0)
        up, down = _mollifier(1.0 - u), _mollifier(u)
        with np.errstate(invalid="ignore"):
            ramp = up / (up + down)
        return np.where(t <= self.plateau, 1.0, np.where(t >= 1.0, 0.0, ramp))

    def sigma_1d(self, k: int, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.window(t - k) / self.normaliser_1d(t)

    def normaliser_1d(self, t: np.ndarray) -> np.ndarray:
        centre = np.rint(t)
        return sum(self.window(t - (centre + j)) for j in (-1, 0, 1))


def make_window(plateau: float = 0.5) -> Partition:
    return Partition(plateau=plateau)


def partition_sigma(part: Partition, k: Sequence[int], xi: Sequence[float]) -> float:
    if len(k) != len(xi):
        raise DomainError("k and xi must have the same dimension")
    value = 1.0
    for ki, ti in zip(k, xi):
        value *= float(part.sigma_1d(int(ki), np.array([ti]))[0])
    return value


def sigma_on_grid(part: Partition, grid: Grid, k: Sequence[int]) -> np.ndarray:
    """sigma_k sampled on the frequency grid (FFT ordering)."""

    xi = grid.xi_axis()
    factors = [part.sigma_1d(int(ki), xi) for ki in k]
    out = factors[0]
    for factor in factors[1:]:
        out = np.multiply.outer(out, factor)
    return out


def box_spectrum(F: SampledFunction, k: Sequence[int], part: Partition) -> SampledFunction:
    k = F.grid.check_index(k)
    return SampledFunction(F.grid, sigma_on_grid(part, F.grid, k) * F.values, "frequency")


def box_operator(f: SampledFunction, k: Sequence[int], part: Optional[Partition] = None) -> SampledFunction:
    """F^{-1}(sigma_k F f)."""

    part = part or make_window()
    f.grid.check_index(k)
    return inverse_transform(box_spectrum(forward_transform(f), k, part))


def verify_partition(part: Partition, grid: Grid) -> float:
    """max over the frequency grid of |sum_k sigma_k(xi) - 1|."""

    xi = grid.xi_axis()
    ks = np.arange(math.floor(xi.min()) - 1, math.ceil(xi.max()) + 2)
    axis_sum = np.zeros_like(xi)
    for k in ks:
        axis_sum += part.sigma_1d(int(k), xi)
    total = axis_sum
    for _ in range(grid.n - 1):
        total = np.multiply.outer(total, axis_sum)
    return float(np.max(np.abs(total - 1.0)))


class PartitionReport(Report):
    plateau: float
    n: int
    min_value: float
    max_value: float
    support_ok: bool
    sum_deviation: float
    lower_bound_C: float
    derivative_bounds: List[float]
    derivative_spread: float


def partition_report(part: Partition, grid: Grid, k_range: int = 20, step: float = 1e-3) -> PartitionReport:
    """Pointwise check of range, support, sum, half-cube lower bound and
    uniform derivative bounds for k in [-k_range, k_range]^n."""

    local = np.arange(-1.25, 1.25 + step / 2, step)
    mins, maxs, supports, lowers = [], [], [], []
    first, second = [], []
    for k in range(-k_range, k_range + 1):
        t = k + local
        values = part.sigma_1d(k, t)
        mins.append(values.min())
        maxs.append(values.max())
        supports.append(bool(np.all(values[np.abs(local) >= 1.0] == 0.0)))
        lowers.append(values[np.abs(local) <= 0.5].min())
        first.append(np.max(np.abs(np.diff(values))) / step)
        second.append(np.max(np.abs(np.diff(values, 2))) / step**2)
    first_bound, second_bound = float(max(first)), float(max(second))
    spread = float(max(max(first) - min(first), max(second) - min(second)) / max(second_bound, 1.0))
    return PartitionReport(
        plateau=part.plateau,
        n=grid.n,
        min_value=float(min(mins)),
        max_value=float(max(maxs)),
        support_ok=all(supports),
        sum_deviation=verify_partition(part, grid),
        lower_bound_C=float(min(lowers)) ** grid.n,
        derivative_bounds=[first_bound, second_bound],
        derivative_spread=spread,
    )


# --------------------------------------------------------------------------
# Import / export


def write_sampled_binary(f: SampledFunction, path: Path) -> Path:
    header = BINARY_HEADER.pack(BINARY_MAGIC, f.grid.n, f.grid.L, f.grid.N, _TAG_CODES[f.domain_tag])
    payload = np.empty(f.values.size * 2, dtype="<f8")
    flat = f.values.ravel()
    payload[0::2] = flat.real
    payload[1::2] = flat.imag
    return atomic_write_bytes(path, header + payload.tobytes())


def read_sampled_binary(path: Path) -> SampledFunction:
    data = Path(path).read_bytes()
    magic, n, L, N, code = BINARY_HEADER.unpack_from(data)
    if magic != BINARY_MAGIC:
        raise DomainError(f"{path} is not a sampled-function container")
    tag = {v: k for k, v in _TAG_CODES.items()}[code]
    payload = np.frombuffer(data, dtype="<f8", offset=BINARY_HEADER.size)
    grid = Grid(n=n, L=L, N=N)
    values = (payload[0::2] + 1j * payload[1::2]).reshape(grid.shape)
    return SampledFunction(grid, values, tag)


def write_sampled_csv(f: SampledFunction, path: Path) -> Path:
    flat = f.values.ravel()
    rows: Iterable[Tuple[int, float, float]] = (
        (i, float(v.real), float(v.imag)) for i, v in enumerate(flat)
    )
    return write_csv(path, ("index", "re", "im"), rows)
