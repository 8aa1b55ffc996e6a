"""Instability experiments: orbital distance, seeded runs, escape-time laws, growth bounds.

A run seeds ``u(0) = phi + delta * Re chi`` (or ``Im chi`` when ``Re chi`` lies
in the symmetry kernel), evolves the full equation, and records in the gauge
frame ``v(t) = e^{-i omega t} u(t) - phi``:

* ``d(t)``, the L2 distance to the orbit ``{e^{i theta} phi(. + y)}``;
* ``|v(t)|`` and the witness ``<v(t), (Re chi)^perp>``;
* the first time ``d`` reaches ``epsilon0`` (log-interpolated between samples).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.integrate import trapezoid
from scipy.stats import linregress

from .errors import DegenerateEigenfunctionError, DomainError, PreconditionError
from .field import Field, Grid, NonlinearitySpec, gradient, inner
from .propagate import evolve_linear, evolve_nls

log = logging.getLogger(__name__)

__all__ = [
    "GrowthBoundResult",
    "InstabilityRunResult",
    "OrbitalFit",
    "SweepResult",
    "WeightedNormSpec",
    "default_dt",
    "orbital_distance",
    "project_perp_chi",
    "run_instability",
    "sweep_delta",
    "verify_growth_bound",
    "weighted_norm",
]

#: reference spacing for the default time step (a 40-wide box on 512 points)
H_REF = 80.0 / 1024
PERP_FLOOR = 1e-8


def default_dt(grid: Grid, potential_sup: float) -> float:
    """``1e-3 (h/h_ref)^2``, capped so that ``dt * sup|V| <= 1.5e-3``.

    The splitting does not keep ``phi`` exactly stationary; its O(dt^2)
    defect seeds the unstable mode with an amplitude of about
    ``(dt sup|V|)^2 / 30``, which the cap keeps below 1e-7.
    """
    dt = 1e-3 * (grid.h / H_REF) ** 2
    if potential_sup > 0:
        dt = min(dt, 1.5e-3 / potential_sup)
    # round down to two significant digits so run horizons stay tidy
    e = math.floor(math.log10(dt))
    return math.floor(dt / 10**e * 10) / 10 * 10**e


# ---------------------------------------------------------------------------
# orbital distance


@dataclass(frozen=True)
class OrbitalFit:
    distance: float
    theta: float
    y: tuple[float, ...]


def _correlation_coefficients(u: np.ndarray, phi: np.ndarray, grid: Grid) -> np.ndarray:
    # C(y) = int u conj(phi(. + y)) = sum_k a_k e^{-i k.y}
    return (grid.cell_volume / grid.size) * sfft.fftn(u) * np.conj(sfft.fftn(phi))


def _refine_translation(a: np.ndarray, grid: Grid, y0: np.ndarray, maxiter: int = 20):
    """Newton ascent of ``|C(y)|^2`` for the trigonometric polynomial ``C``.

    The Nyquist mode is held fixed, matching the convention of ``_shift``.
    """
    ks = np.meshgrid(*grid.derivative_wavenumbers, indexing="ij")
    nd = grid.dimension
    y = y0.astype(float).copy()
    for _ in range(maxiter):
        e = a * np.exp(-1j * sum(k * yy for k, yy in zip(ks, y)))
        C = e.sum()
        dC = np.array([np.sum(-1j * k * e) for k in ks])
        d2C = np.array([[np.sum(-ki * kj * e) for kj in ks] for ki in ks])
        grad = 2.0 * np.real(np.conj(C) * dC)
        hess = 2.0 * np.real(np.outer(np.conj(dC), dC) + np.conj(C) * d2C)
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.any(np.linalg.eigvalsh(0.5 * (hess + hess.T)) >= 0):
            break
        norm = np.linalg.norm(step)
        if norm > grid.h:
            step *= grid.h / norm
        y += step
        if norm < 1e-13 * max(1.0, grid.L):
            break
    e = a * np.exp(-1j * sum(k * yy for k, yy in zip(ks, y)))
    return y[:nd], e.sum()


def _shift(phi: np.ndarray, grid: Grid, y) -> np.ndarray:
    """``phi(. + y)`` by a Fourier phase (Nyquist mode dropped)."""
    ks = np.meshgrid(*grid.derivative_wavenumbers, indexing="ij")
    return sfft.ifftn(sfft.fftn(phi) * np.exp(1j * sum(k * yy for k, yy in zip(ks, y))))


def _wrap(y: np.ndarray, L: float) -> np.ndarray:
    return (y + L) % (2.0 * L) - L


def orbital_distance(u: Field, wave) -> OrbitalFit:
    """``inf_{theta, y} |u - e^{i theta} phi(. + y)|_{L2}`` with its minimiser.

    The lattice maximiser of ``|<u, phi(. + y)>|`` comes from one FFT
    cross-correlation; a Newton ascent on the exact trigonometric interpolant
    then refines ``y`` off the lattice, and ``theta = arg <u, phi(. + y)>``.
    """
    phi = wave.embedded if hasattr(wave, "embedded") else wave
    if phi is None:
        raise PreconditionError("standing wave has no grid embedding")
    grid = u.grid
    if phi.grid != grid:
        raise DomainError("field and standing wave live on different grids")
    grid._require_periodic()
    uz, pz = u.z, phi.z
    a = _correlation_coefficients(uz, pz, grid)
    c = sfft.ifftn(a) * grid.size  # lattice values C(j h) = sum_k a_k e^{-i k j h}
    # ifftn uses e^{+i}, so index j corresponds to y = -j h
    j = np.unravel_index(int(np.argmax(np.abs(c))), c.shape)
    y0 = np.array([-jj * grid.h for jj in j])
    y, C = _refine_translation(a, grid, _wrap(y0, grid.L))
    y = _wrap(y, grid.L)
    theta = float(np.angle(C)) if abs(C) > 0 else 0.0
    cand = np.exp(1j * theta) * _shift(pz, grid, y)
    dist = math.sqrt(grid.cell_volume * float(np.sum(np.abs(uz - cand) ** 2)))
    return OrbitalFit(dist, theta, tuple(float(v) for v in y))


# ---------------------------------------------------------------------------
# symmetry-kernel projection


def _kernel_basis(phi: Field) -> list[Field]:
    z = phi.z
    out = [Field(phi.grid, -z.imag, z.real)]
    for dz in gradient(z, phi.grid):
        out.append(Field(phi.grid, dz.real, dz.imag))
    return out


def _gram_schmidt_out(x: Field, basis: list[Field]) -> Field:
    ortho: list[Field] = []
    for b in basis:
        for o in ortho:
            b = b - o * inner(b, o)
        nb = math.sqrt(max(inner(b, b), 0.0))
        if nb > 1e-14:
            ortho.append(b * (1.0 / nb))
    for _ in range(2):  # twice is enough
        for o in ortho:
            x = x - o * inner(x, o)
    return x


def _split_chi(chi):
    if isinstance(chi, Field):
        return chi, Field.zeros(chi.grid)
    re, im = chi
    return re, im


def _perp_with_part(chi, wave) -> tuple[str, Field, Field]:
    phi = wave.embedded if hasattr(wave, "embedded") else wave
    re, im = _split_chi(chi)
    total = math.sqrt(inner(re, re) + inner(im, im))
    if abs(total - 1.0) > 1e-6:
        raise PreconditionError(f"chi must have unit norm, got {total:.6g}")
    basis = _kernel_basis(phi)
    for name, part in (("re", re), ("im", im)):
        perp = _gram_schmidt_out(part, basis)
        if math.sqrt(max(inner(perp, perp), 0.0)) >= PERP_FLOOR:
            return name, part, perp
        log.info("%s chi lies in the symmetry kernel; trying the other part", name)
    raise DegenerateEigenfunctionError("both Re chi and Im chi lie in span{i phi, grad phi}")


def project_perp_chi(chi, wave) -> Field:
    """Component of ``Re chi`` orthogonal to ``i phi`` and ``d_j phi`` in real L2.

    ``chi`` is a ``(Re chi, Im chi)`` pair of fields (or a single real field)
    with unit total norm.  When ``Re chi`` is numerically inside the kernel
    span the same projection of ``Im chi`` is returned instead.
    """
    return _perp_with_part(chi, wave)[2]


# ---------------------------------------------------------------------------
# seeded runs


def _k_factor(lam: complex) -> float:
    if abs(lam.imag) <= 1e-8 * max(1.0, abs(lam)):
        return 1.0
    return math.exp(2.0 * math.pi * lam.real / abs(lam.imag))


def _fit_window(delta: float, eps0: float) -> tuple[float, float]:
    """``[10 delta, eps0 / 10]``, or the middle half (in log scale) if that is under one e-fold."""
    lo, hi = 10.0 * delta, eps0 / 10.0
    if hi / lo >= math.e:
        return lo, hi
    ratio = eps0 / delta
    return delta * ratio**0.25, delta * ratio**0.75


def _envelope(times, values, period):
    """Maxima of ``values`` over consecutive windows of length ``period``."""
    if period <= 0 or len(times) < 2:
        return times, values
    bins = np.floor((times - times[0]) / period).astype(int)
    ts, vs = [], []
    for b in np.unique(bins):
        sel = np.flatnonzero(bins == b)
        i = sel[np.argmax(values[sel])]
        ts.append(times[i])
        vs.append(values[i])
    return np.array(ts), np.array(vs)


def _fit_rate(times, vnorm, window, lam):
    lo, hi = window
    t, v = np.asarray(times), np.asarray(vnorm)
    if lam is not None and abs(lam.imag) > 1e-8 * max(1.0, abs(lam)):
        t, v = _envelope(t, v, 2.0 * math.pi / abs(lam.imag))
    sel = (v >= lo) & (v <= hi)
    n = int(np.count_nonzero(sel))
    if n < 3:
        return None, None, n
    fit = linregress(t[sel], np.log(v[sel]))
    return float(fit.slope), float(fit.rvalue**2), n


def _escape_time(times, dist, eps0):
    idx = np.flatnonzero(dist >= eps0)
    if len(idx) == 0:
        return None, None
    i = int(idx[0])
    if i == 0:
        return float(times[0]), 0
    d0, d1 = dist[i - 1], dist[i]
    t0, t1 = times[i - 1], times[i]
    if d0 > 0 and d1 > d0:
        s = (math.log(eps0) - math.log(d0)) / (math.log(d1) - math.log(d0))
    else:
        s = 1.0
    return float(t0 + s * (t1 - t0)), i


@dataclass(eq=False)
class InstabilityRunResult:
    """Series and derived quantities of one seeded run."""

    delta: float
    epsilon0: float
    times: np.ndarray
    distance: np.ndarray
    v_norm: np.ndarray
    witness: np.ndarray
    dt: float
    t_max: float
    lambda_star: complex | None
    seed_part: str
    perp_norm: float
    k_factor: float
    fit_window: tuple[float, float]
    fitted_rate: float | None = None
    fit_r2: float | None = None
    fit_samples: int = 0
    raw_rate: float | None = None
    escape_time: float | None = None
    escaped: bool = False
    blew_up: bool = False
    witness_at_escape: float | None = None
    witness_bound: float | None = None
    witness_ok: bool | None = None
    td_bracket: tuple[float, float] | None = None
    td_ok: bool | None = None
    candidate_bound_violation: float = 0.0
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        ls = self.lambda_star
        return {
            "delta": self.delta,
            "epsilon0": self.epsilon0,
            "times": [float(x) for x in self.times],
            "distance": [float(x) for x in self.distance],
            "v_norm": [float(x) for x in self.v_norm],
            "witness": [float(x) for x in self.witness],
            "dt": self.dt,
            "t_max": self.t_max,
            "lambda_star": None if ls is None else [ls.real, ls.imag],
            "seed_part": self.seed_part,
            "perp_norm": self.perp_norm,
            "k_factor": self.k_factor,
            "fit_window": list(self.fit_window),
            "fitted_rate": self.fitted_rate,
            "fit_r2": self.fit_r2,
            "fit_samples": self.fit_samples,
            "raw_rate": self.raw_rate,
            "escape_time": self.escape_time,
            "escaped": self.escaped,
            "blew_up": self.blew_up,
            "witness_at_escape": self.witness_at_escape,
            "witness_bound": self.witness_bound,
            "witness_ok": self.witness_ok,
            "td_bracket": None if self.td_bracket is None else list(self.td_bracket),
            "td_ok": self.td_ok,
            "candidate_bound_violation": self.candidate_bound_violation,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InstabilityRunResult":
        d = dict(d)
        for key in ("times", "distance", "v_norm", "witness"):
            d[key] = np.array(d[key], dtype=float)
        ls = d.get("lambda_star")
        d["lambda_star"] = None if ls is None else complex(ls[0], ls[1])
        d["fit_window"] = tuple(d["fit_window"])
        if d.get("td_bracket") is not None:
            d["td_bracket"] = tuple(d["td_bracket"])
        return cls(**d)


def run_instability(
    wave,
    spec_report,
    delta: float,
    epsilon0: float,
    dt: float | None = None,
    t_max: float | None = None,
    perturbation: Field | None = None,
    sample_every: float | None = None,
    eps0_regime: float = 0.1,
    slack: float = 1.0,
) -> InstabilityRunResult:
    """Seed ``phi + delta * chi_part`` (or ``delta * perturbation``) and evolve until escape.

    Parameters
    ----------
    wave : StandingWave
        Embedded standing wave; its grid is the simulation grid.
    spec_report : SpectrumReport
        Supplies ``lambda*`` and ``chi``.  Without an unstable pair the run
        needs both ``perturbation`` and ``t_max``.
    delta, epsilon0 : float
        Seed amplitude and escape threshold, ``delta <= epsilon0 / 100`` and
        ``epsilon0 <= eps0_regime * |phi|``.
    dt : float, optional
        Time step; :func:`default_dt` when omitted.
    t_max : float, optional
        Horizon; ``(log(epsilon0/delta) + 5) / Re lambda*`` by default.
    perturbation : Field, optional
        Explicit seed direction (normalised to unit L2 norm).
    sample_every : float, optional
        Measurement cadence; about 25 samples per e-fold by default.
    slack : float
        E-folds of slack for the escape-time bracket and witness checks.
    """
    phi = wave.embedded
    if phi is None:
        raise PreconditionError("standing wave must be embedded on a periodic grid")
    grid = phi.grid
    spec: NonlinearitySpec = wave.spec
    omega = float(wave.omega)
    if not (delta > 0 and epsilon0 > 0):
        raise PreconditionError("delta and epsilon0 must be positive")
    if delta > epsilon0 / 100.0 * (1 + 1e-12):
        raise PreconditionError(f"need delta <= epsilon0/100, got delta={delta:g}, epsilon0={epsilon0:g}")
    phi_norm = math.sqrt(inner(phi, phi))
    if epsilon0 > eps0_regime * phi_norm * (1 + 1e-12):
        raise PreconditionError(
            f"epsilon0={epsilon0:g} exceeds the small-amplitude regime {eps0_regime:g}*|phi| = {eps0_regime * phi_norm:.4g}"
        )
    lam = None if spec_report is None else spec_report.lambda_star
    if lam is not None:
        part, direction, perp = _perp_with_part(spec_report.chi, wave)
        k = _k_factor(lam)
    else:
        part, direction, perp, k = "none", None, None, 1.0
    if perturbation is not None:
        pn = math.sqrt(inner(perturbation, perturbation))
        if pn == 0:
            raise PreconditionError("perturbation is zero")
        direction = perturbation * (1.0 / pn)
        part = "custom"
    if direction is None:
        raise PreconditionError("no unstable eigenpair: supply a perturbation and t_max")
    if t_max is None:
        if lam is None:
            raise PreconditionError("stable case requires an explicit t_max")
        t_max = (math.log(epsilon0 / delta) + 5.0) / lam.real
    if dt is None:
        from .spectrum import LinearizedOperator

        dt = default_dt(grid, LinearizedOperator.from_field(phi, omega, spec).potential_sup)
    if sample_every is None:
        sample_every = 0.1 if lam is None else 1.0 / (25.0 * lam.real)
    every = max(1, int(round(sample_every / dt)))
    nsteps = int(math.ceil(t_max / dt - 1e-9))
    t_max = nsteps * dt

    perp_norm = 0.0 if perp is None else math.sqrt(inner(perp, perp))
    u0 = phi + direction * delta
    times, dist, vnorm, wit = [], [], [], []
    pz = phi.z

    def observe(t, z):
        v = np.exp(-1j * omega * t) * z - pz
        vf = Field.from_complex(grid, v)
        times.append(t)
        vnorm.append(math.sqrt(inner(vf, vf)))
        wit.append(inner(vf, perp) if perp is not None else float("nan"))
        dist.append(orbital_distance(Field.from_complex(grid, z), phi).distance)
        return dist[-1] >= epsilon0

    trace = evolve_nls(u0, t_max, dt, spec, checkpoint_every=every * dt, observer=observe)
    times_a, dist_a = np.array(times), np.array(dist)
    vnorm_a, wit_a = np.array(vnorm), np.array(wit)

    esc, i_esc = _escape_time(times_a, dist_a, epsilon0)
    escaped = esc is not None
    if trace.blew_up and not escaped:
        escaped, esc = True, float(trace.last_finite_time)
    window = _fit_window(delta, epsilon0)
    upto = len(times_a) if i_esc is None else i_esc + 1
    rate, r2, nfit = _fit_rate(times_a[:upto], vnorm_a[:upto], window, lam)
    fitted = rate if (rate is not None and nfit >= 10 and r2 >= 0.99) else None

    result = InstabilityRunResult(
        delta=delta,
        epsilon0=epsilon0,
        times=times_a,
        distance=dist_a,
        v_norm=vnorm_a,
        witness=wit_a,
        dt=dt,
        t_max=t_max,
        lambda_star=lam,
        seed_part=part,
        perp_norm=perp_norm,
        k_factor=k,
        fit_window=window,
        fitted_rate=fitted,
        fit_r2=r2,
        fit_samples=nfit,
        raw_rate=rate,
        escape_time=esc,
        escaped=escaped,
        blew_up=trace.blew_up,
        candidate_bound_violation=float(np.max(dist_a - vnorm_a, initial=0.0)),
        provenance={
            "grid": grid.to_dict(),
            "omega": omega,
            "spec": spec.to_dict(),
            "dt": dt,
            "sample_every": every * dt,
            "fixtures": {
                "lambda_star": None if lam is None else [lam.real, lam.imag],
                "perp_norm": perp_norm,
            },
        },
    )
    if lam is not None and escaped:
        lo = math.log(epsilon0 / (k * delta)) - slack
        hi = math.log(epsilon0 / delta) + slack
        result.td_bracket = (lo, hi)
        result.td_ok = bool(lo <= lam.real * esc <= hi)
        if i_esc is not None and perp is not None:
            if i_esc > 0:
                s = (esc - times_a[i_esc - 1]) / (times_a[i_esc] - times_a[i_esc - 1])
                w = (1 - s) * wit_a[i_esc - 1] + s * wit_a[i_esc]
            else:
                w = wit_a[0]
            result.witness_at_escape = float(w)
            result.witness_bound = epsilon0 / (4.0 * k) * perp_norm**2
            result.witness_ok = bool(w >= result.witness_bound * math.exp(-slack))
    elif lam is not None:
        log.warning("no escape by t_max=%g for a certified-unstable wave (delta=%g)", t_max, delta)
    return result


@dataclass(eq=False)
class SweepResult:
    deltas: list[float]
    runs: list[InstabilityRunResult]
    slope: float | None
    intercept: float | None
    r2: float | None
    target_slope: float | None
    flags: list[str]

    @property
    def partial(self) -> bool:
        return bool(self.flags)

    @property
    def slope_rel_error(self) -> float | None:
        if self.slope is None or self.target_slope is None:
            return None
        return abs(self.slope - self.target_slope) / abs(self.target_slope)

    def rows(self) -> list[dict]:
        return [
            {
                "delta": r.delta,
                "escape_time": r.escape_time,
                "fitted_rate": r.fitted_rate,
                "witness_at_escape": r.witness_at_escape,
            }
            for r in self.runs
        ]

    def to_dict(self) -> dict:
        return {
            "deltas": self.deltas,
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "target_slope": self.target_slope,
            "flags": self.flags,
            "runs": [r.to_dict() for r in self.runs],
        }


def sweep_delta(wave, spec_report, deltas, epsilon0: float, **run_kwargs) -> SweepResult:
    """Escape time against ``log(1/delta)``; the slope should approach ``1/Re lambda*``."""
    deltas = sorted(float(d) for d in deltas)
    if len(deltas) < 3:
        raise PreconditionError("a sweep needs at least three deltas")
    if deltas[-1] / deltas[0] < 100.0 * (1 - 1e-9):
        raise PreconditionError("deltas must span at least two decades")
    runs = [run_instability(wave, spec_report, d, epsilon0, **run_kwargs) for d in deltas]
    flags = [f"delta={r.delta:g}: no escape" for r in runs if not r.escaped]
    lam = spec_report.lambda_star if spec_report is not None else None
    target = None if lam is None else 1.0 / lam.real
    esc = [(r.delta, r.escape_time) for r in runs if r.escaped]
    slope = intercept = r2 = None
    if len(esc) >= 3:
        x = np.log([1.0 / d for d, _ in esc])
        y = np.array([t for _, t in esc])
        fit = linregress(x, y)
        slope, intercept, r2 = float(fit.slope), float(fit.intercept), float(fit.rvalue**2)
    return SweepResult(deltas, runs, slope, intercept, r2, target, flags)


# ---------------------------------------------------------------------------
# weighted norms and growth bounds


@dataclass(frozen=True)
class WeightedNormSpec:
    """Rates ``0 < lam < Re lambda* < nu < mu < (1 + alpha) lam`` and the admissible pair."""

    lam: float
    mu: float
    nu: float
    q: float
    r: float
    T: float
    re_lambda_star: float
    alpha: float

    def __post_init__(self):
        chain = [0.0, self.lam, self.re_lambda_star, self.nu, self.mu, (1.0 + self.alpha) * self.lam]
        if not all(a < b for a, b in itertools.pairwise(chain)):
            raise PreconditionError(
                "rates must satisfy 0 < lam < Re lambda* < nu < mu < (1+alpha) lam, got "
                f"lam={self.lam:g}, Re lambda*={self.re_lambda_star:g}, nu={self.nu:g}, "
                f"mu={self.mu:g}, (1+alpha) lam={(1 + self.alpha) * self.lam:g}"
            )
        if not self.T > 0:
            raise PreconditionError("horizon T must be positive")

    @classmethod
    def default(cls, re_lambda_star: float, spec: NonlinearitySpec, T: float) -> "WeightedNormSpec":
        """``lam = 0.9 Re lambda*``, ``mu = min(1.05 Re lambda*, 0.99 (1+alpha) lam)``, ``nu`` halfway."""
        a = spec.alpha
        lam = 0.9 * re_lambda_star
        mu = min(1.05 * re_lambda_star, 0.99 * (1.0 + a) * lam)
        nu = 0.5 * (re_lambda_star + mu)
        return cls(lam, mu, nu, spec.q, spec.r, T, re_lambda_star, a)


def weighted_norm(times, values, lam: float, q: float, T: float | None = None) -> float:
    """``e^{lam T} (int_0^T (e^{-lam t} |f(t)|)^q dt)^{1/q}`` by the trapezoid rule."""
    t = np.asarray(times, dtype=float)
    f = np.abs(np.asarray(values, dtype=float))
    T = t[-1] if T is None else T
    sel = t <= T + 1e-12
    t, f = t[sel], f[sel]
    # e^{lam (T - t)} keeps the integrand bounded for large lam T
    g = (np.exp(lam * (T - t)) * f) ** q
    return float(trapezoid(g, t) ** (1.0 / q))


@dataclass(eq=False)
class GrowthBoundResult:
    times: np.ndarray
    max_norms: np.ndarray
    observed_nu: float
    nu: float
    C: float
    window: tuple[float, float] | None
    window_ok: bool | None
    late_violation: float


def _random_smooth(grid: Grid, rng, width: float = 2.0) -> np.ndarray:
    """Unit-norm smooth random 2-vector field (Gaussian-damped Fourier coefficients)."""
    shape = (2,) + grid.shape
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    coef *= np.exp(-0.5 * grid.k2 / width**2)
    axes = tuple(range(1, grid.dimension + 1))
    w = sfft.ifftn(coef, axes=axes).real
    return w / math.sqrt(grid.cell_volume * float(np.sum(w**2)))


def verify_growth_bound(
    op,
    wspec: WeightedNormSpec | None = None,
    trials: int = 4,
    T: float | None = None,
    dt: float = 5e-3,
    seed: int = 0,
    scheme: str = "ifrk4",
    sample_every: float = 0.05,
) -> GrowthBoundResult:
    """Worst-case ``|e^{tA} v0|`` over random unit ``v0`` against ``C e^{nu t}``.

    ``observed_nu`` is the log-slope over the second half of the horizon.
    ``C`` is the smallest constant with ``|e^{tA} v0| <= C e^{nu t}`` on the
    first half; ``window_ok`` says whether that bound, with ``nu`` inside
    ``(Re lambda*, (1+alpha) Re lambda*)``, still holds on the second half.
    """
    if T is None:
        T = wspec.T if wspec is not None else 5.0
    rng = np.random.default_rng(seed)
    worst = None
    times = None
    for _ in range(trials):
        v0 = _random_smooth(op.grid, rng)
        tr = evolve_linear(v0, T, dt, op, scheme=scheme, sample_every=sample_every)
        times = tr.times
        worst = tr.norms if worst is None else np.maximum(worst, tr.norms)
    half = times >= 0.5 * T
    observed = float(linregress(times[half], np.log(worst[half])).slope)
    if wspec is not None:
        window = (wspec.re_lambda_star, (1.0 + wspec.alpha) * wspec.re_lambda_star)
        nu = wspec.nu
    else:
        window = None
        nu = max(observed, 0.0)
    early = ~half
    C = float(np.max(worst[early] * np.exp(-nu * times[early])))
    late = float(np.max(worst[half] / (C * np.exp(nu * times[half]))))
    ok = None if window is None else bool(window[0] < nu < window[1] and late <= 1.0 + 1e-9)
    return GrowthBoundResult(times, worst, observed, nu, C, window, ok, late)
