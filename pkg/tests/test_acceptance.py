"""Acceptance suite: one test per criterion, with the measured numbers attached.

Run ``pytest tests/test_acceptance.py -rA`` and read the "acceptance criteria"
section of the summary for one PASS/FAIL line per criterion.
"""

import math
import time

import numpy as np
import pytest

from fixtures import (
    LAMBDA_2D_128,
    LAMBDA_P7,
    ORACLE_LAMBDA_P7,
    REMAINDER_C,
)
from nlsinstab import (
    Field,
    Grid,
    NonlinearitySpec,
    assemble,
    compute_spectrum,
    discrete_norms,
    eval_remainder_h,
    evolve_nls,
    run_instability,
    solve_radial,
    solve_vortex,
    verify_spectral_mapping,
)
from nlsinstab.instability import _random_smooth
from nlsinstab.spectrum import LinearizedOperator, kernel_check
from oracles import soliton_1d

criterion = pytest.mark.criterion


def remainder_constant(n: int, p: float, seed: int = 0) -> float:
    """Largest ratio ``|h(v)| / ((|v| + |v|^(r-2)) |v|)`` over 100 random small ``v`` (H2 norm)."""
    spec = NonlinearitySpec(p, 1)
    g = Grid(1, 40.0, n)
    phi = solve_radial(spec, 1.0).on_grid(g).embedded
    rng = np.random.default_rng(seed)
    x = g.coords[0]
    modes = [np.exp(-(x**2) / (2 * (1 + j))) * np.cos(j * x) for j in range(6)]
    best = 0.0
    for _ in range(100):
        c = rng.standard_normal((2, 6))
        amp = 10 ** rng.uniform(-4, -1)
        v = Field(g, c[0] @ modes, c[1] @ modes)
        v = v * (amp / discrete_norms(v)["H2"])
        nv = discrete_norms(v)["H2"]
        nh = discrete_norms(eval_remainder_h(v, phi, spec))["L2"]
        best = max(best, nh / ((nv + nv ** (spec.r - 2)) * nv))
    return best


@criterion(1, "soliton exactness")
def test_soliton_exactness(record_property):
    t0 = time.perf_counter()
    wave = solve_radial(NonlinearitySpec(3.0, 1), 1.0)
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(wave.profile - soliton_1d(wave.r, 3.0))))
    record_property("max_error", f"{err:.2e}")
    record_property("residual", f"{wave.residual_radial:.2e}")
    record_property("seconds", f"{elapsed:.2f}")
    assert err < 1e-6
    assert wave.residual_radial < 1e-8
    assert elapsed < 1.0


@criterion(2, "stable side: no unstable eigenvalue, perturbed run stays within 10 delta")
def test_stable_side(wave3, record_property):
    t0 = time.perf_counter()
    rep = compute_spectrum(assemble(wave3), mode="dense")
    g = wave3.embedded.grid
    pert = Field(g, *_random_smooth(g, np.random.default_rng(0)))
    delta = 1e-3
    run = run_instability(wave3, rep, delta, 0.1, dt=1e-3, t_max=50.0, perturbation=pert, sample_every=0.5)
    elapsed = time.perf_counter() - t0
    max_re = float(np.max(rep.eigenvalues.real))
    max_d = float(np.max(run.distance))
    record_property("grid", f"n={g.n},L={g.L:g}")
    record_property("max_Re_lambda", f"{max_re:.1e}")
    record_property("max_distance", f"{max_d:.3e}")
    record_property("seconds", f"{elapsed:.1f}")
    assert rep.lambda_star is None and max_re <= 1e-6
    assert (g.n, g.L) == (512, 40.0)
    assert run.times[-1] == pytest.approx(50.0)
    assert max_d < 10 * delta
    assert elapsed < 60.0


@criterion(3, "instability detection for p = 7")
def test_instability_detection(report7, record_property):
    lam = report7.lambda_star
    record_property("lambda_star", f"{lam.real:.9f}{lam.imag:+.1e}i")
    record_property("fixture", LAMBDA_P7)
    record_property("residual", f"{report7.eigen_residual:.1e}")
    assert lam.real > 0
    assert lam.real == pytest.approx(LAMBDA_P7, abs=1e-6)
    assert lam.real == pytest.approx(ORACLE_LAMBDA_P7, abs=1e-6)
    assert report7.eigen_residual < 1e-6


@criterion(4, "linear to nonlinear rate match")
def test_rate_match(wave7, report7, record_property):
    t0 = time.perf_counter()
    run = run_instability(wave7, report7, 1e-4, 1e-2)
    elapsed = time.perf_counter() - t0
    rel = abs(run.fitted_rate - LAMBDA_P7) / LAMBDA_P7
    record_property("fitted_rate", f"{run.fitted_rate:.5f}")
    record_property("rel_error", f"{rel:.2e}")
    record_property("R2", f"{run.fit_r2:.6f}")
    record_property("seconds", f"{elapsed:.1f}")
    assert run.escaped
    assert rel < 0.1
    assert run.fit_r2 >= 0.99
    assert elapsed < 120.0


@criterion(5, "escape-time law")
def test_escape_time_law(sweep7, record_property):
    record_property("slope", f"{sweep7.slope:.5f}")
    record_property("target", f"{sweep7.target_slope:.5f}")
    record_property("R2", f"{sweep7.r2:.7f}")
    assert sorted(r.delta for r in sweep7.runs) == [1e-5, 1e-4, 1e-3]
    assert abs(sweep7.slope - 1 / LAMBDA_P7) / (1 / LAMBDA_P7) < 0.1
    assert sweep7.r2 >= 0.99


@criterion(6, "witness lower bound for every sweep member")
def test_witness_bound(sweep7, record_property):
    for r in sweep7.runs:
        record_property(f"delta={r.delta:g}", f"{r.witness_at_escape:.4f}>={r.witness_bound * math.exp(-1):.4f}")
    for r in sweep7.runs:
        assert r.escaped
        assert r.witness_at_escape >= r.epsilon0 / (4 * r.k_factor) * r.perp_norm**2 * math.exp(-1.0)


@criterion(7, "spectral mapping at desk scale")
def test_spectral_mapping(record_property):
    g = Grid(1, 8.0, 32)
    phi = Field(g, soliton_1d(g.coords[0], 7.0))
    op = LinearizedOperator.from_field(phi, 1.0, NonlinearitySpec(7.0, 1))
    d = verify_spectral_mapping(op)
    record_property("hausdorff", f"{d:.2e}")
    assert op.unknowns == 64
    assert d < 1e-8


@criterion(8, "kernel directions on converged grids")
@pytest.mark.parametrize("which", ["op3", "wave7_fine"])
def test_kernel_directions(which, request, record_property):
    obj = request.getfixturevalue(which)
    op = obj if isinstance(obj, LinearizedOperator) else assemble(obj)
    k = kernel_check(op)
    record_property(f"{which}.gauge", f"{k['gauge']:.1e}")
    record_property(f"{which}.translation", f"{k['translation_0']:.1e}")
    assert k["gauge"] < 1e-6
    assert k["translation_0"] < 1e-4


@criterion(9, "conservation: mass per 1000 steps, energy drift quarters")
def test_conservation(wave3, spec3, record_property):
    tr = evolve_nls(wave3.embedded * 1.1, 1.0, 1e-3, spec3)
    mass_drift = abs(tr.mass[-1] - tr.mass[0]) / tr.mass[0]
    drifts = []
    for dt in (2e-2, 1e-2, 5e-3):
        t = evolve_nls(wave3.embedded * 1.2, 5.0, dt, spec3, checkpoint_every=0.1)
        drifts.append(float(np.max(np.abs(t.energy - t.energy[0])) / abs(t.energy[0])))
    ratios = [a / b for a, b in zip(drifts, drifts[1:])]
    record_property("mass_drift_1000", f"{mass_drift:.1e}")
    record_property("energy_ratios", ",".join(f"{r:.3f}" for r in ratios))
    assert mass_drift < 1e-12
    for r in ratios:
        assert r == pytest.approx(4.0, rel=0.1)


@criterion(10, "quadratic remainder constant stable under grid doubling")
@pytest.mark.parametrize("p", [3.0, 7.0])
def test_remainder_constant(p, record_property):
    c = {n: remainder_constant(n, p) for n in (256, 512, 1024)}
    record_property(f"p={p:g}.C", ",".join(f"{n}:{v:.5f}" for n, v in c.items()))
    for n, v in c.items():
        assert v == pytest.approx(REMAINDER_C[p][n], rel=1e-4)
    for a, b in ((256, 512), (512, 1024)):
        assert abs(c[b] / c[a] - 1) <= 0.2


@criterion(11, "2-D radial instability on 128^2")
def test_two_dimensional(record_property):
    t0 = time.perf_counter()
    spec = NonlinearitySpec(5.0, 2)
    wave = solve_radial(spec, 1.0).on_grid(Grid(2, 24.0, 128))
    rep = compute_spectrum(assemble(wave), mode="iterative")
    run = run_instability(wave, rep, 1e-4, 1e-2)
    elapsed = time.perf_counter() - t0
    lam = rep.lambda_star
    rel = abs(run.fitted_rate - LAMBDA_2D_128) / LAMBDA_2D_128
    record_property("lambda_star", f"{lam.real:.5f}")
    record_property("fitted_rate", f"{run.fitted_rate:.5f}")
    record_property("rel_error", f"{rel:.2e}")
    record_property("seconds", f"{elapsed:.1f}")
    assert lam.real > 0
    assert lam.real == pytest.approx(LAMBDA_2D_128, rel=1e-4)
    assert run.escaped
    assert rel < 0.15
    assert elapsed < 600.0


@pytest.mark.slow
@criterion(12, "vortex m = 1: unstable eigenvalue and escape")
def test_vortex(record_property):
    spec = NonlinearitySpec(5.0, 2)
    wave = solve_vortex(spec, 1.0, 1).on_grid(Grid(2, 24.0, 128))
    rep = compute_spectrum(assemble(wave), mode="iterative")
    lam = rep.lambda_star
    assert lam is not None and lam.real > 0
    run = run_instability(wave, rep, 1e-4, 1e-2)
    record_property("lambda_star", f"{lam.real:.4f}{lam.imag:+.4f}i")
    record_property("escape_time", run.escape_time)
    assert run.escaped
