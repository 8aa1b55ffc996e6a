"""Grids, complex fields in real 2-vector form, discrete norms and the power nonlinearity.

A complex field ``u`` is identified with the real pair ``(Re u, Im u)``.
The nonlinearity is ``f(z) = -|z|^(p-1) z`` so that the equation reads
``du/dt = J(-Lap u + f(u))`` with ``J = [[0, 1], [-1, 0]]``.
Multiplying a complex number by ``-i`` is the same as applying ``J``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import DomainError, ShapeError, SubcriticalityError

__all__ = [
    "NonlinearitySpec",
    "Grid",
    "Field",
    "apply_J",
    "df_entries",
    "discrete_norms",
    "eval_Df",
    "eval_f",
    "eval_remainder_h",
    "gradient",
    "inner",
    "laplacian",
]


@dataclass(frozen=True)
class NonlinearitySpec:
    """Power nonlinearity ``g(s) = s^((p-1)/2)`` in ``N`` space dimensions."""

    p: float
    dimension: int

    def __post_init__(self):
        if not math.isfinite(self.p) or self.p <= 1:
            raise DomainError(f"exponent p must satisfy p > 1, got {self.p}")
        if self.dimension < 1:
            raise DomainError(f"dimension must be positive, got {self.dimension}")

    @property
    def critical_exponent(self) -> float:
        """Upper bound ``2* - 1``; ``inf`` for N <= 2."""
        n = self.dimension
        return math.inf if n <= 2 else (n + 2) / (n - 2)

    @property
    def subcritical_ok(self) -> bool:
        return self.p < self.critical_exponent

    @property
    def r(self) -> float:
        return self.p + 1.0

    @property
    def q(self) -> float:
        # 2/q = N (1/2 - 1/r)
        inv = self.dimension * (0.5 - 1.0 / self.r) / 2.0
        return math.inf if inv == 0 else 1.0 / inv

    @property
    def alpha(self) -> float:
        return min(1.0, self.r - 2.0)

    @property
    def l2_critical_exponent(self) -> float:
        """``1 + 4/N``: ground states are stable below, unstable above."""
        return 1.0 + 4.0 / self.dimension

    def require_subcritical(self):
        if not self.subcritical_ok:
            raise SubcriticalityError(
                f"p={self.p} violates the subcriticality bound p < 2*-1 = "
                f"{self.critical_exponent:g} for N={self.dimension}"
            )

    def g(self, s):
        return np.power(s, (self.p - 1.0) / 2.0)

    def G(self, s):
        """Primitive ``G(s) = int_0^s g``, used in the energy."""
        return 2.0 * np.power(s, (self.p + 1.0) / 2.0) / (self.p + 1.0)

    def to_dict(self) -> dict:
        return {"p": self.p, "dimension": self.dimension}


@dataclass(frozen=True)
class Grid:
    """Uniform grid, identical extent ``L`` and point count ``n`` on every axis.

    ``periodic`` boxes cover ``[-L, L)^N`` with spacing ``2L/n``; ``radial`` lines
    cover ``r in [0, L]`` with ``n`` intervals (``n + 1`` samples).
    """

    dimension: int
    L: float
    n: int
    mode: str = "periodic"

    def __post_init__(self):
        if self.mode not in ("periodic", "radial"):
            raise DomainError(f"unknown grid mode {self.mode!r}")
        if self.dimension not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise DomainError(f"extent must be positive, got {self.L}")
        if self.n < 2:
            raise DomainError(f"need at least 2 points, got {self.n}")
        if self.mode == "periodic" and self.n & (self.n - 1):
            raise DomainError(f"periodic axes need a power-of-two point count, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n if self.mode == "periodic" else self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        if self.mode == "radial":
            return (self.n + 1,)
        return (self.n,) * self.dimension

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.h**self.dimension

    @cached_property
    def axis(self) -> np.ndarray:
        if self.mode == "radial":
            return self.h * np.arange(self.n + 1)
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        if self.mode == "radial":
            return (self.axis,)
        return tuple(np.meshgrid(*([self.axis] * self.dimension), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        if self.mode == "radial":
            return self.axis
        return np.sqrt(sum(c**2 for c in self.coords))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Per-axis wavenumbers broadcastable against the field shape."""
        self._require_periodic()
        k = 2.0 * np.pi * sfft.fftfreq(self.n, d=self.h)
        out = []
        for j in range(self.dimension):
            shape = [1] * self.dimension
            shape[j] = self.n
            out.append(k.reshape(shape))
        return tuple(out)

    @cached_property
    def derivative_wavenumbers(self) -> tuple[np.ndarray, ...]:
        # Nyquist mode zeroed so first derivatives of real fields stay real
        k = 2.0 * np.pi * sfft.fftfreq(self.n, d=self.h)
        k[self.n // 2] = 0.0
        out = []
        for j in range(self.dimension):
            shape = [1] * self.dimension
            shape[j] = self.n
            out.append(k.reshape(shape))
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers)

    def boundary_mask(self) -> np.ndarray:
        """Points on the outer faces of the box (or the last radial sample)."""
        mask = np.zeros(self.shape, dtype=bool)
        if self.mode == "radial":
            mask[-1] = True
            return mask
        for j in range(self.dimension):
            idx = [slice(None)] * self.dimension
            idx[j] = 0
            mask[tuple(idx)] = True
        return mask

    def _require_periodic(self):
        if self.mode != "periodic":
            raise DomainError("operation requires a periodic grid")

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "L": self.L, "n": self.n, "mode": self.mode}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(int(d["dimension"]), float(d["L"]), int(d["n"]), d.get("mode", "periodic"))


@dataclass(frozen=True, eq=False)
class Field:
    """Complex field stored as its real and imaginary parts on a grid."""

    grid: Grid
    re: np.ndarray
    im: np.ndarray = field(default=None)

    def __post_init__(self):
        re = np.array(self.re, dtype=float)
        im = np.zeros_like(re) if self.im is None else np.array(self.im, dtype=float)
        if re.shape != self.grid.shape or im.shape != self.grid.shape:
            raise ShapeError(
                f"field arrays {re.shape}/{im.shape} do not match grid shape {self.grid.shape}"
            )
        re.setflags(write=False)
        im.setflags(write=False)
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @classmethod
    def from_complex(cls, grid: Grid, z) -> "Field":
        z = np.asarray(z)
        return cls(grid, z.real, z.imag)

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @property
    def z(self) -> np.ndarray:
        return self.re + 1j * self.im

    def stacked(self) -> np.ndarray:
        """Real 2-vector layout ``(2, *grid.shape)``."""
        return np.stack([self.re, self.im])

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise ShapeError("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.re + other.re, self.im + other.im)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.re - other.re, self.im - other.im)

    def __mul__(self, c) -> "Field":
        if isinstance(c, complex):
            return Field.from_complex(self.grid, self.z * c)
        return Field(self.grid, self.re * c, self.im * c)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.re, -self.im)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "re": self.re.ravel().tolist(),
            "im": self.im.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Field":
        grid = Grid.from_dict(d["grid"])
        return cls(
            grid,
            np.asarray(d["re"], dtype=float).reshape(grid.shape),
            np.asarray(d["im"], dtype=float).reshape(grid.shape),
        )


def apply_J(w: np.ndarray) -> np.ndarray:
    """``J`` on a stacked 2-vector array: ``(w1, w2) -> (w2, -w1)``."""
    return np.stack([w[1], -w[0]])


# ---------------------------------------------------------------------------
# nonlinearity


def eval_f(z, spec: NonlinearitySpec):
    """``f(z) = -|z|^(p-1) z`` on complex arrays."""
    return -np.power(np.abs(z), spec.p - 1.0) * z


def df_entries(a, b, spec: NonlinearitySpec):
    """Entries ``(D11, D12, D22)`` of ``Df`` at ``z = a + ib``, vectorised.

    Written with ``cos^2``-type ratios so that ``|z| = 0`` yields the
    continuous limit ``O`` for every ``p > 1``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = a * a + b * b
    gs = np.power(s, (spec.p - 1.0) / 2.0)
    safe = np.where(s > 0, s, 1.0)
    ca = np.where(s > 0, a * a / safe, 0.0)
    cb = np.where(s > 0, b * b / safe, 0.0)
    cab = np.where(s > 0, a * b / safe, 0.0)
    # 2 g'(s) a^2 = (p-1) s^((p-1)/2) a^2/s
    k = (spec.p - 1.0) * gs
    return -(k * ca + gs), -(k * cab), -(k * cb + gs)


def eval_Df(z, spec: NonlinearitySpec) -> np.ndarray:
    """Jacobian of ``f`` at a single point ``z = (Re z, Im z)`` as a symmetric 2x2 matrix."""
    z = np.asarray(z, dtype=float).reshape(2)
    if not np.all(np.isfinite(z)):
        raise DomainError(f"Df requires a finite point, got {z}")
    d11, d12, d22 = (float(x) for x in df_entries(z[0], z[1], spec))
    return np.array([[d11, d12], [d12, d22]])


def eval_remainder_h(v: Field, phi: Field, spec: NonlinearitySpec) -> Field:
    """Quadratic remainder ``h(v) = J[f(phi + v) - f(phi) - Df(phi) v]``."""
    if v.grid != phi.grid:
        raise ShapeError("v and phi must share a grid")
    d11, d12, d22 = df_entries(phi.re, phi.im, spec)
    lin = (d11 * v.re + d12 * v.im) + 1j * (d12 * v.re + d22 * v.im)
    w = eval_f(phi.z + v.z, spec) - eval_f(phi.z, spec) - lin
    return Field.from_complex(v.grid, -1j * w)


# ---------------------------------------------------------------------------
# derivatives and norms


def laplacian(z: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral Laplacian on a periodic grid (works on real or complex arrays)."""
    grid._require_periodic()
    axes = tuple(range(-grid.dimension, 0))
    out = sfft.ifftn(-grid.k2 * sfft.fftn(z, axes=axes), axes=axes)
    return out.real if np.isrealobj(z) else out


def gradient(z: np.ndarray, grid: Grid) -> list[np.ndarray]:
    """Spectral first derivatives along each axis."""
    grid._require_periodic()
    axes = tuple(range(-grid.dimension, 0))
    zh = sfft.fftn(z, axes=axes)
    out = []
    for k in grid.derivative_wavenumbers:
        d = sfft.ifftn(1j * k * zh, axes=axes)
        out.append(d.real if np.isrealobj(z) else d)
    return out


def _radial_weights(grid: Grid) -> np.ndarray:
    n = grid.dimension
    area = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    w = np.full(grid.shape, grid.h)
    w[0] = w[-1] = grid.h / 2
    return area * grid.axis ** (n - 1) * w


def inner(u: Field, w: Field) -> float:
    """Real L2 inner product of two 2-vector fields."""
    if u.grid != w.grid:
        raise ShapeError("fields live on different grids")
    prod = u.re * w.re + u.im * w.im
    if u.grid.mode == "radial":
        return float(np.sum(_radial_weights(u.grid) * prod))
    return float(u.grid.cell_volume * np.sum(prod))


def _radial_derivatives(z: np.ndarray, grid: Grid):
    h = grid.h
    n = grid.dimension
    r = grid.axis
    d1 = np.gradient(z, h, edge_order=2)
    d2 = np.empty_like(z)
    d2[1:-1] = (z[2:] - 2 * z[1:-1] + z[:-2]) / h**2
    d2[0] = 2 * (z[1] - z[0]) / h**2
    d2[-1] = d2[-2]
    lap = d2.copy()
    lap[1:] += (n - 1) / r[1:] * d1[1:]
    lap[0] = n * d2[0]
    return d1, lap


def discrete_norms(u: Field) -> dict[str, float]:
    """Discrete L2, H1, H2 and sup norms.

    Periodic grids use Fourier multipliers ``(1 + |k|^2)^s``; radial lines
    use the weighted trapezoid rule with second-order differences.
    """
    grid = u.grid
    z = u.z
    linf = float(np.max(np.abs(z))) if z.size else 0.0
    if grid.mode == "periodic":
        axes = tuple(range(grid.dimension))
        zh = sfft.fftn(z, axes=axes)
        p = np.abs(zh) ** 2 * grid.cell_volume / grid.size
        k2 = grid.k2
        l2 = float(np.sum(p))
        h1 = float(np.sum((1 + k2) * p))
        h2 = float(np.sum((1 + k2) ** 2 * p))
    else:
        w = _radial_weights(grid)
        d1, lap = _radial_derivatives(z, grid)
        l2 = float(np.sum(w * np.abs(z) ** 2))
        g2 = float(np.sum(w * np.abs(d1) ** 2))
        h1 = l2 + g2
        h2 = l2 + 2 * g2 + float(np.sum(w * np.abs(lap) ** 2))
    return {"L2": math.sqrt(l2), "H1": math.sqrt(h1), "H2": math.sqrt(h2), "Linf": linf}
