"""Linearization ``A = J(-Lap + omega + Df(phi))`` around a standing wave and its spectrum.

Vectors are real 2-vector fields laid out as ``(2, *grid.shape)`` arrays (or
flattened to length ``2 * grid.size``); complex dtype is allowed for
eigenvectors.  The Laplacian is the Fourier-spectral one on the periodic box.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs, gmres
from scipy.spatial import cKDTree
from scipy.spatial.distance import directed_hausdorff

from .errors import ConvergenceError, DomainError, PreconditionError, TruncationError
from .field import Field, Grid, NonlinearitySpec, df_entries, gradient

log = logging.getLogger(__name__)

__all__ = [
    "LinearizedOperator",
    "SpectrumReport",
    "assemble",
    "compute_spectrum",
    "hausdorff",
    "kernel_check",
    "verify_spectral_mapping",
]

DENSE_LIMIT = 4096
CLUSTER_TOL = 1e-7
PREPASS_STEP = 1.0


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    """Discretised ``A = J H`` with ``H = (-Lap + omega) I + V`` and ``V = Df(phi)``."""

    grid: Grid
    omega: float
    spec: NonlinearitySpec
    phi: Field
    v11: np.ndarray
    v12: np.ndarray
    v22: np.ndarray

    @classmethod
    def from_field(cls, phi: Field, omega: float, spec: NonlinearitySpec) -> "LinearizedOperator":
        """Build the operator from any profile, without residual or decay checks."""
        phi.grid._require_periodic()
        v11, v12, v22 = df_entries(phi.re, phi.im, spec)
        return cls(phi.grid, float(omega), spec, phi, v11, v12, v22)

    @classmethod
    def free(cls, grid: Grid, omega: float, spec: NonlinearitySpec) -> "LinearizedOperator":
        """Zero potential: ``A = J(-Lap + omega)``."""
        return cls.from_field(Field.zeros(grid), omega, spec)

    @property
    def unknowns(self) -> int:
        return 2 * self.grid.size

    @property
    def potential_sup(self) -> float:
        return float(np.max(np.abs(np.stack([self.v11, self.v12, self.v22]))))

    def _as_stacked(self, w):
        if isinstance(w, Field):
            return w.stacked()
        w = np.asarray(w)
        return w.reshape((2,) + self.grid.shape)

    def apply_H(self, w):
        w = self._as_stacked(w)
        axes = tuple(range(1, self.grid.dimension + 1))
        d = sfft.ifftn((self.grid.k2 + self.omega) * sfft.fftn(w, axes=axes), axes=axes)
        if np.isrealobj(w):
            d = d.real
        return np.stack(
            [
                d[0] + self.v11 * w[0] + self.v12 * w[1],
                d[1] + self.v12 * w[0] + self.v22 * w[1],
            ]
        )

    def apply(self, w):
        """``A w`` on a stacked or flat 2-vector array (real or complex), or a Field."""
        flat = not isinstance(w, Field) and np.ndim(w) == 1
        hw = self.apply_H(w)
        out = np.stack([hw[1], -hw[0]])
        return out.ravel() if flat else out

    def apply_potential(self, w):
        """``J V w`` (the bounded part) on a stacked array."""
        a = self.v11 * w[0] + self.v12 * w[1]
        b = self.v12 * w[0] + self.v22 * w[1]
        return np.stack([b, -a])

    def linear_operator(self, dtype=complex) -> LinearOperator:
        n = self.unknowns
        return LinearOperator((n, n), matvec=lambda x: self.apply(np.asarray(x).ravel()), dtype=dtype)

    def dense(self) -> np.ndarray:
        """Dense matrix of ``A`` (only for ``2 * grid.size <= 4096``)."""
        if self.unknowns > DENSE_LIMIT:
            raise DomainError(
                f"dense assembly limited to {DENSE_LIMIT} unknowns, grid needs {self.unknowns}"
            )
        g = self.grid
        n = g.n
        k2 = (2.0 * np.pi * sfft.fftfreq(n, d=g.h)) ** 2
        second = sfft.ifft(-k2[:, None] * sfft.fft(np.eye(n), axis=0), axis=0).real
        lap = np.zeros((g.size, g.size))
        eye = np.eye(n)
        for j in range(g.dimension):
            term = np.ones((1, 1))
            for i in range(g.dimension):
                term = np.kron(term, second if i == j else eye)
            lap += term
        D = -lap + self.omega * np.eye(g.size)
        V11 = np.diag(self.v11.ravel())
        V12 = np.diag(self.v12.ravel())
        V22 = np.diag(self.v22.ravel())
        return np.block([[V12, D + V22], [-(D + V11), -V12]])

    def norm(self, w) -> float:
        """Discrete L2 norm of a stacked (possibly complex) 2-vector array."""
        w = self._as_stacked(w)
        return math.sqrt(self.grid.cell_volume * float(np.sum(np.abs(w) ** 2)))


def assemble(wave, decay_warn: float = 1e-8, decay_error: float = 1e-6, residual_tol: float = 1e-6):
    """Linearize around an embedded standing wave.

    Raises ``TruncationError`` if ``|V|`` on the box boundary exceeds
    ``decay_error`` and warns above ``decay_warn``.
    """
    if wave.embedded is None:
        raise PreconditionError("wave has no embedded field; call wave.on_grid(grid) first")
    if wave.residual is None or wave.residual > residual_tol:
        raise PreconditionError(f"wave residual {wave.residual} exceeds {residual_tol:g}")
    op = LinearizedOperator.from_field(wave.embedded, wave.omega, wave.spec)
    mask = op.grid.boundary_mask()
    edge = float(np.max(np.abs(np.stack([op.v11[mask], op.v12[mask], op.v22[mask]]))))
    if edge > decay_error:
        raise TruncationError(f"potential is {edge:.2e} on the box boundary; enlarge the box")
    if edge > decay_warn:
        warnings.warn(f"potential is {edge:.2e} on the box boundary", RuntimeWarning, stacklevel=2)
    return op


# ---------------------------------------------------------------------------
# spectrum


@dataclass(eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    lambda_star: complex | None
    chi: tuple[Field, Field] | None
    kernel_residuals: dict
    quartet_symmetry_defect: dict | None
    eigen_residual: float | None = None
    multiplicity: int = 0
    mode: str = "dense"
    diagnostics: dict = field(default_factory=dict)

    @property
    def unstable(self) -> bool:
        return self.lambda_star is not None

    def chi_stacked(self) -> np.ndarray:
        """Complex eigenfunction as a ``(2, *shape)`` array."""
        re, im = self.chi
        return re.stacked() + 1j * im.stacked()

    def to_dict(self) -> dict:
        ls = self.lambda_star
        return {
            "mode": self.mode,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "lambda_star": None if ls is None else [float(ls.real), float(ls.imag)],
            "chi_re": None if self.chi is None else self.chi[0].to_dict(),
            "chi_im": None if self.chi is None else self.chi[1].to_dict(),
            "kernel_residuals": self.kernel_residuals,
            "quartet_symmetry_defect": self.quartet_symmetry_defect,
            "eigen_residual": self.eigen_residual,
            "multiplicity": self.multiplicity,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectrumReport":
        ls = d.get("lambda_star")
        chi = None
        if d.get("chi_re") is not None:
            chi = (Field.from_dict(d["chi_re"]), Field.from_dict(d["chi_im"]))
        return cls(
            eigenvalues=np.array([complex(a, b) for a, b in d["eigenvalues"]]),
            lambda_star=None if ls is None else complex(ls[0], ls[1]),
            chi=chi,
            kernel_residuals=d.get("kernel_residuals", {}),
            quartet_symmetry_defect=d.get("quartet_symmetry_defect"),
            eigen_residual=d.get("eigen_residual"),
            multiplicity=int(d.get("multiplicity", 0)),
            mode=d.get("mode", "dense"),
            diagnostics=d.get("diagnostics", {}),
        )


def _directed_mismatch(a: np.ndarray, b: np.ndarray) -> float:
    """``max_i min_j |a_i - b_j|`` via a k-d tree."""
    if len(a) == 0 or len(b) == 0:
        return 0.0
    tree = cKDTree(np.column_stack([b.real, b.imag]))
    dist, _ = tree.query(np.column_stack([a.real, a.imag]))
    return float(np.max(dist))


def hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance between two finite sets of complex numbers."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    pa = np.column_stack([a.real, a.imag])
    pb = np.column_stack([b.real, b.imag])
    return float(max(directed_hausdorff(pa, pb)[0], directed_hausdorff(pb, pa)[0]))


def quartet_defect(eigs_: np.ndarray) -> dict:
    """Mismatch of the spectrum against its negation and its conjugate."""
    return {
        "negation": hausdorff(eigs_, -eigs_),
        "conjugation": hausdorff(eigs_, np.conj(eigs_)),
    }


def _normalize_chi(op: LinearizedOperator, vec: np.ndarray, lam: complex) -> np.ndarray:
    """Unit L2 norm; phase chosen to make ``Re chi`` as large as possible.

    For real ``lam`` this makes ``chi`` real.
    """
    w = vec.reshape((2,) + op.grid.shape).astype(complex)
    w = w / op.norm(w)
    # maximise |Re(e^{i a} w)|^2 = (|w|^2 + Re(e^{2ia} sum w^2)) / 2
    s = np.sum(w * w)
    if abs(s) > 0:
        w = w * np.exp(-0.5j * np.angle(s))
    big = np.unravel_index(np.argmax(np.abs(w)), w.shape)
    if w[big].real < 0:
        w = -w
    return w


def _chi_fields(op, w):
    return (
        Field(op.grid, w[0].real, w[1].real),
        Field(op.grid, w[0].imag, w[1].imag),
    )


def kernel_check(op: LinearizedOperator, wave=None) -> dict:
    """Relative residuals ``|A(i phi)|/|phi|`` and ``|A(d_j phi)|/|d_j phi|``.

    Zero profiles give zero residuals.
    """
    phi = op.phi if wave is None else wave.embedded
    z = phi.z
    out = {}
    nphi = op.norm(phi.stacked())
    iphi = np.stack([-z.imag, z.real])
    out["gauge"] = 0.0 if nphi == 0 else op.norm(op.apply(iphi)) / nphi
    for j, dz in enumerate(gradient(z, op.grid)):
        w = np.stack([dz.real, dz.imag])
        nw = op.norm(w)
        out[f"translation_{j}"] = 0.0 if nw == 0 else op.norm(op.apply(w)) / nw
    return out


def _pick_lambda_star(vals, tol):
    """Index of the maximal-real-part eigenvalue (``Im >= 0`` among conjugate ties)."""
    order = np.lexsort((-vals.imag, -np.round(vals.real, 12)))
    i = order[0]
    if vals[i].real <= tol:
        return None
    return i


def _dense_spectrum(op, tol):
    M = op.dense()
    vals, vecs = sla.eig(M)
    order = np.argsort(-vals.real, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    return vals, vecs


def _shift_invert_operator(op: LinearizedOperator, sigma: complex, history: list):
    """``(A - sigma)^-1`` by GMRES, right-preconditioned with the free resolvent."""
    g = op.grid
    axes = tuple(range(1, g.dimension + 1))
    d = g.k2 + op.omega
    det = sigma**2 + d**2
    n = op.unknowns
    shape = (2,) + g.shape

    def prec(x):
        w = sfft.fftn(np.asarray(x).reshape(shape), axes=axes)
        # (A0 - sigma)^-1 in each Fourier block [[-s, d], [-d, -s]]
        a = (-sigma * w[0] - d * w[1]) / det
        b = (d * w[0] - sigma * w[1]) / det
        return sfft.ifftn(np.stack([a, b]), axes=axes).ravel()

    A = LinearOperator((n, n), matvec=lambda x: op.apply(np.asarray(x).ravel()) - sigma * np.asarray(x).ravel(), dtype=complex)
    M = LinearOperator((n, n), matvec=prec, dtype=complex)

    def solve(b):
        b = np.asarray(b, dtype=complex).ravel()
        x, info = gmres(A, b, M=M, rtol=1e-12, atol=0.0, restart=100, maxiter=20)
        res = np.linalg.norm(A.matvec(x) - b) / max(np.linalg.norm(b), 1e-300)
        history.append(float(res))
        if info != 0 and res > 1e-8:
            raise ConvergenceError(
                f"shift-invert GMRES stalled (relative residual {res:.2e})", residual=res, history=history
            )
        return x

    return LinearOperator((n, n), matvec=solve, dtype=complex)


def _exponential_prepass(op: LinearizedOperator, count: int, tau: float, seed: int, tol: float, maxiter: int = 8):
    """Shift candidates from Arnoldi on the time-``tau`` map ``e^{tau A}``.

    Unstable eigenvalues dominate in modulus ``e^{tau Re lambda}`` while the
    neutral spectrum stays on the unit circle, so largest-modulus Arnoldi on a
    cheap second-order propagator isolates them.  Only used to place shifts.
    """
    from .propagate import LinearStepper

    dt = min(0.02 / op.omega, PREPASS_STEP / max(op.potential_sup, 1e-12))
    nsteps = max(1, int(math.ceil(tau / dt)))
    stepper = LinearStepper(op, tau / nsteps, "strang")
    shape = (2,) + op.grid.shape

    def flow(x):
        w = np.asarray(x, dtype=float).reshape(shape)
        for _ in range(nsteps):
            w = stepper.step(w)
        return w.ravel()

    n = op.unknowns
    k = min(count, n - 2)
    v0 = np.random.default_rng(seed).standard_normal(n)
    # the neutral cluster on the unit circle never converges; keep what did
    try:
        mu, vecs = eigs(LinearOperator((n, n), matvec=flow, dtype=float), k=k, which="LM", v0=v0,
                        ncv=min(n - 1, 2 * k + 1), tol=1e-6, maxiter=maxiter)
    except ArpackNoConvergence as exc:
        mu, vecs = np.asarray(exc.eigenvalues), np.asarray(exc.eigenvectors)
    growth = np.log(np.abs(mu)) / tau
    # log(mu) / tau is ambiguous in Im by 2 pi / tau; the Rayleigh quotient of
    # the Ritz vector with the exact operator is not
    lam = np.array([np.vdot(x, op.apply(x)) / np.vdot(x, x) for x in vecs.T], dtype=complex)
    order = np.argsort(-growth, kind="stable")
    growth, lam = growth[order], lam[order]
    # keep candidates whose modulus clearly leaves the unit circle
    cands = lam[growth > max(10.0 * tol, 1e-3 / tau)]
    return cands, {
        "tau": tau,
        "dt": tau / nsteps,
        "growth": [float(g) for g in growth],
        "estimates": [[float(z.real), float(z.imag)] for z in lam],
    }


def compute_spectrum(
    op: LinearizedOperator,
    mode: str = "dense",
    count: int = 6,
    shift: complex | None = None,
    tol: float = 1e-6,
    seed: int = 0,
    prepass_tau: float = 1.0,
) -> SpectrumReport:
    """Eigenvalues of ``A`` sorted by decreasing real part and the unstable pair ``(lambda*, chi)``.

    ``dense`` diagonalises the assembled matrix.  ``iterative`` runs
    shift-invert Arnoldi (ARPACK) around ``shift``; without a shift one is
    placed at the unstable eigenvalues of ``e^{tau A}`` (``tau = prepass_tau / omega``)
    estimated with a second-order propagator.  Eigenvalues with
    ``Re < tol`` are treated as neutral.
    """
    diagnostics: dict = {}
    if mode == "dense":
        vals, vecs = _dense_spectrum(op, tol)
        defect = quartet_defect(vals)
    elif mode == "iterative":
        history: list = []
        shifts = [shift] if shift is not None else []
        if shift is None:
            cands, info = _exponential_prepass(op, count, prepass_tau / op.omega, seed, tol)
            diagnostics["prepass"] = info
            shifts = []
            for z in cands:
                z = complex(z.real, abs(z.imag))
                if all(abs(z - t) > 1e-2 * max(1.0, abs(t)) for t in shifts):
                    shifts.append(z)
            shifts = shifts[:3]
        found_vals, found_vecs = [], []
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(op.unknowns) + 0j
        for s in shifts:
            # offset keeps the shifted operator away from exact singularity
            sigma = complex(s) + 1e-3 * max(1.0, abs(s))
            OPinv = _shift_invert_operator(op, sigma, history)
            try:
                w, v = eigs(
                    op.linear_operator(complex), k=1, sigma=sigma,
                    OPinv=OPinv, which="LM", v0=v0, tol=1e-12, maxiter=500,
                )
            except ArpackNoConvergence as exc:
                raise ConvergenceError(
                    f"ARPACK did not converge around shift {s}", history=history
                ) from exc
            found_vals.append(w)
            found_vecs.append(v)
        diagnostics["shifts"] = [[float(np.real(s)), float(np.imag(s))] for s in shifts]
        diagnostics["gmres_residuals_max"] = max(history) if history else None
        diagnostics["gmres_solves"] = len(history)
        if found_vals:
            vals = np.concatenate(found_vals)
            vecs = np.concatenate(found_vecs, axis=1)
            # different shifts may converge to the same eigenvalue
            keep = []
            for i, z in enumerate(vals):
                if all(abs(z - vals[j]) > 1e-8 * max(1.0, abs(z)) for j in keep):
                    keep.append(i)
            vals, vecs = vals[keep], vecs[:, keep]
            order = np.argsort(-vals.real, kind="stable")
            vals, vecs = vals[order], vecs[:, order]
        else:
            vals = np.zeros(0, dtype=complex)
            vecs = np.zeros((op.unknowns, 0), dtype=complex)
        defect = None
    else:
        raise PreconditionError(f"unknown spectrum mode {mode!r}")

    idx = _pick_lambda_star(vals, tol) if len(vals) else None
    lam = chi = res = None
    mult = 0
    if idx is not None:
        lam = complex(vals[idx])
        w = _normalize_chi(op, vecs[:, idx], lam)
        chi = _chi_fields(op, w)
        res = op.norm(op.apply(w) - lam * w)
        mult = int(np.count_nonzero(np.abs(vals - lam) < CLUSTER_TOL))
        if mult > 1:
            log.warning("lambda* = %s has multiplicity %d; first eigenvector kept", lam, mult)
    report = SpectrumReport(
        eigenvalues=vals,
        lambda_star=lam,
        chi=chi,
        kernel_residuals=kernel_check(op),
        quartet_symmetry_defect=defect,
        eigen_residual=res,
        multiplicity=mult,
        mode=mode,
        diagnostics=diagnostics,
    )
    return report


def verify_spectral_mapping(op_or_matrix, t: float = 1.0) -> float:
    """Hausdorff distance between ``eig(exp(tA))`` and ``exp(t eig(A))`` (dense only)."""
    if isinstance(op_or_matrix, LinearizedOperator):
        M = op_or_matrix.dense()
    else:
        M = np.asarray(op_or_matrix)
        if M.shape[0] > DENSE_LIMIT:
            raise DomainError(f"dense spectral mapping limited to {DENSE_LIMIT} unknowns")
    lhs = sla.eigvals(sla.expm(t * M))
    rhs = np.exp(t * sla.eigvals(M))
    return hausdorff(lhs, rhs)
