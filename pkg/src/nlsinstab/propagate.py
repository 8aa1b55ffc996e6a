"""Time evolution: split-step flow of the full equation and the linear semigroup ``e^{tA}``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import BlowUpError, DomainError, StabilityError
from .field import Field, Grid, NonlinearitySpec

__all__ = [
    "EvolutionTrace",
    "LinearStepper",
    "LinearTrace",
    "SplitStepper",
    "energy",
    "evolve_linear",
    "evolve_nls",
    "mass",
    "step_nls",
]


def mass(z: np.ndarray, grid: Grid) -> float:
    return float(grid.cell_volume * np.sum(np.abs(z) ** 2))


def energy(z: np.ndarray, grid: Grid, spec: NonlinearitySpec) -> float:
    """``E = int |grad u|^2 - G(|u|^2)`` with spectral gradients."""
    zh = sfft.fftn(z)
    kinetic = float(np.sum(grid.k2 * np.abs(zh) ** 2)) * grid.cell_volume / grid.size
    return kinetic - float(grid.cell_volume * np.sum(spec.G(np.abs(z) ** 2)))


class SplitStepper:
    """Strang splitting: half nonlinear phase, exact linear step, half nonlinear phase.

    Owns its transform buffers; one instance per trajectory.
    """

    order = 2

    def __init__(self, grid: Grid, dt: float, spec: NonlinearitySpec):
        grid._require_periodic()
        if not dt > 0:
            raise DomainError(f"time step must be positive, got {dt}")
        self.grid = grid
        self.dt = float(dt)
        self.spec = spec
        self._lin = np.exp(-1j * self.dt * grid.k2)
        self._half = (spec.p - 1.0) / 2.0

    def _phase(self, z, tau):
        s = z.real**2 + z.imag**2
        return z * np.exp(1j * tau * np.power(s, self._half))

    def step(self, z: np.ndarray) -> np.ndarray:
        z = self._phase(z, 0.5 * self.dt)
        z = sfft.ifftn(self._lin * sfft.fftn(z))
        return self._phase(z, 0.5 * self.dt)

    def advance(self, z: np.ndarray, nsteps: int) -> np.ndarray:
        """``nsteps`` Strang steps, fusing adjacent half nonlinear phases."""
        if nsteps <= 0:
            return z
        dt = self.dt
        z = self._phase(z, 0.5 * dt)
        for i in range(nsteps):
            z = sfft.ifftn(self._lin * sfft.fftn(z))
            z = self._phase(z, dt if i < nsteps - 1 else 0.5 * dt)
        return z


def step_nls(u: Field, dt: float, spec: NonlinearitySpec) -> Field:
    """One Strang step of ``i u_t + Lap u + |u|^(p-1) u = 0``."""
    z = SplitStepper(u.grid, dt, spec).step(u.z)
    if not np.all(np.isfinite(z)):
        raise BlowUpError("field became non-finite", last_time=0.0)
    return Field.from_complex(u.grid, z)


@dataclass(eq=False)
class EvolutionTrace:
    times: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    snapshots: list[tuple[float, Field]]
    dt: float
    scheme: str = "strang"
    order: int = 2
    blew_up: bool = False
    last_finite_time: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def final(self) -> Field:
        return self.snapshots[-1][1]


def evolve_nls(
    u0: Field,
    T: float,
    dt: float,
    spec: NonlinearitySpec,
    checkpoint_every: float | None = None,
    snapshot_every: float | None = None,
    observer=None,
) -> EvolutionTrace:
    """Evolve ``u0`` to time ``T``; sample mass and energy every ``checkpoint_every``.

    ``observer(t, z)`` is called at each checkpoint and may return ``True``
    to stop early.  Snapshots are kept at ``snapshot_every`` (default: only
    the initial and final states).  Non-finite values stop the run with
    ``blew_up`` set and the partial trace returned.
    """
    grid = u0.grid
    stepper = SplitStepper(grid, dt, spec)
    nsteps = int(round(T / dt))
    if nsteps and abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise DomainError(f"T={T} is not a whole number of steps dt={dt}")
    every = nsteps if checkpoint_every is None else max(1, int(round(checkpoint_every / dt)))
    snap_every = None if snapshot_every is None else max(1, int(round(snapshot_every / dt)))
    z = u0.z.copy()
    times, masses, energies = [0.0], [mass(z, grid)], [energy(z, grid, spec)]
    snaps = [(0.0, u0)]
    stop = observer(0.0, z) if observer else False
    done = 0
    blew = False
    last_t = 0.0
    while done < nsteps and not stop:
        chunk = min(every, nsteps - done)
        if snap_every:
            chunk = min(chunk, snap_every - done % snap_every)
        z_new = stepper.advance(z, chunk)
        if not np.all(np.isfinite(z_new)):
            blew = True
            break
        z = z_new
        done += chunk
        t = done * dt
        last_t = t
        if done % every == 0 or done == nsteps:
            times.append(t)
            masses.append(mass(z, grid))
            energies.append(energy(z, grid, spec))
            if observer:
                stop = bool(observer(t, z))
        if snap_every and done % snap_every == 0:
            snaps.append((t, Field.from_complex(grid, z)))
    if not snaps or snaps[-1][0] != last_t:
        snaps.append((last_t, Field.from_complex(grid, z)))
    return EvolutionTrace(
        times=np.array(times),
        mass=np.array(masses),
        energy=np.array(energies),
        snapshots=snaps,
        dt=dt,
        blew_up=blew,
        last_finite_time=last_t,
    )


# ---------------------------------------------------------------------------
# linear semigroup


class LinearStepper:
    """Stepper for ``dv/dt = A v`` with ``A = A0 + JV``.

    ``A0 = J(-Lap + omega)`` is propagated exactly in Fourier space (a rotation
    of each mode by angle ``(|k|^2 + omega) t``).  ``scheme="ifrk4"`` treats
    ``JV`` with integrating-factor RK4 (order 4); ``scheme="strang"`` uses the
    exact pointwise 2x2 exponential of ``JV`` (order 2).
    """

    def __init__(self, op, dt: float, scheme: str = "ifrk4"):
        if scheme not in ("ifrk4", "strang"):
            raise DomainError(f"unknown linear scheme {scheme!r}")
        self.op = op
        self.dt = float(dt)
        self.scheme = scheme
        self.order = 4 if scheme == "ifrk4" else 2
        g = op.grid
        self._axes = tuple(range(1, g.dimension + 1))
        theta = (g.k2 + op.omega) * (0.5 * self.dt)
        self._half = (np.cos(theta), np.sin(theta))
        self._full = (np.cos(2.0 * theta), np.sin(2.0 * theta))
        if scheme == "strang":
            self._pointwise = self._potential_exponential(0.5 * self.dt)

    def _rotate(self, w, full=False):
        # exp(tau A0) acts on (w1, w2)^ as [[c, s], [-s, c]]
        c, s = self._full if full else self._half
        wh = sfft.fftn(w, axes=self._axes)
        a = c * wh[0] + s * wh[1]
        b = -s * wh[0] + c * wh[1]
        out = sfft.ifftn(np.stack([a, b]), axes=self._axes)
        return out.real if np.isrealobj(w) else out

    def _potential_exponential(self, tau):
        op = self.op
        # M = JV = [[v12, v22], [-v11, -v12]] is traceless, M^2 = (v12^2 - v11 v22) I
        s = op.v12**2 - op.v11 * op.v22
        root = np.sqrt(s.astype(complex))
        x = tau * root
        c = np.cosh(x).real
        with np.errstate(invalid="ignore", divide="ignore"):
            sh = np.where(np.abs(root) > 1e-300, np.sinh(x) / np.where(root == 0, 1, root), tau).real
        return c, sh

    def _apply_pointwise(self, w):
        c, sh = self._pointwise
        jv = self.op.apply_potential(w)
        return c * w + sh * jv

    def step(self, w):
        if self.scheme == "strang":
            w = self._apply_pointwise(w)
            w = self._rotate(w, full=True)
            return self._apply_pointwise(w)
        dt = self.dt
        B = self.op.apply_potential
        E = self._rotate
        k1 = B(w)
        a = E(w + 0.5 * dt * k1)
        k2 = B(a)
        Ew = E(w)
        b = Ew + 0.5 * dt * k2
        k3 = B(b)
        c = E(Ew) + dt * E(k3)
        k4 = B(c)
        return E(E(w + dt / 6.0 * k1) + dt / 3.0 * (k2 + k3)) + dt / 6.0 * k4


@dataclass(eq=False)
class LinearTrace:
    times: np.ndarray
    norms: np.ndarray
    snapshots: list[tuple[float, np.ndarray]]
    dt: float
    scheme: str
    order: int


def evolve_linear(
    v0,
    T: float,
    dt: float,
    op,
    scheme: str = "ifrk4",
    sample_every: float | None = None,
    keep_snapshots: bool = False,
    rate_bound: float | None = None,
) -> LinearTrace:
    """Integrate ``dv/dt = A v`` from ``v0`` (Field or stacked array) to ``T``.

    The run is aborted with ``StabilityError`` if the norm outgrows
    ``e^{(rate_bound + 1) t}``; by default ``rate_bound = sup|V|``, which
    bounds the true growth since ``A0`` is skew.
    """
    w = v0.stacked() if isinstance(v0, Field) else np.asarray(v0).reshape((2,) + op.grid.shape)
    stepper = LinearStepper(op, dt, scheme)
    nsteps = int(round(T / dt))
    every = nsteps if sample_every is None else max(1, int(round(sample_every / dt)))
    rate = op.potential_sup if rate_bound is None else rate_bound
    n0 = op.norm(w)
    times, norms = [0.0], [n0]
    snaps = [(0.0, w.copy())] if keep_snapshots else []
    for i in range(1, nsteps + 1):
        w = stepper.step(w)
        if i % every == 0 or i == nsteps:
            t = i * dt
            nw = op.norm(w)
            if not math.isfinite(nw) or nw > 10.0 * n0 * math.exp((rate + 1.0) * t):
                raise StabilityError(
                    f"linear flow norm {nw:.3e} at t={t:g} exceeds the admissible growth; reduce dt"
                )
            times.append(t)
            norms.append(nw)
            if keep_snapshots:
                snaps.append((t, w.copy()))
    if not keep_snapshots:
        snaps = [(times[-1], w)]
    return LinearTrace(np.array(times), np.array(norms), snaps, dt, scheme, stepper.order)
