"""Acceptance criteria, one test per criterion.

Each test prints a single pass/fail line (visible with ``pytest -s``) and
asserts the stated tolerance; criteria with runtime budgets measure them.
"""

import math
import time

import numpy as np

from fhdyn.arithmetic import check_cd, value_from_quotients
from fhdyn.birkhoff import (
    FurstenbergSchedule,
    birkhoff_trace,
    furstenberg_example,
    stability_probe,
)
from fhdyn.continua import ContinuumSchedule, continuum_approx, hausdorff_distance
from fhdyn.errors import SmallDivisorError
from fhdyn.fourier import TrigPoly, grid_points, solve_cohomological, stable_grid_mean
from fhdyn.linearize import (
    conjugacy_residual,
    koenigs_linearize,
    siegel_formal_linearize,
)
from fhdyn.maps import FiberedMap, conjugate_scaling, fit_refit

from conftest import GOLDEN, random_complex, random_real_zero_mean


def _criterion(num, name, ok, detail):
    line = f"ACCEPTANCE {num:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    assert ok, line


def test_criterion_01_multiplier():
    t0 = time.perf_counter()
    F1 = FiberedMap([GOLDEN], [TrigPoly.constant(0.5)], 0.5)
    err_const = abs(F1.multiplier() - 0.5)
    t = np.arange(2048) / 2048
    c1 = TrigPoly.fit_grid(0.5 * np.exp(np.cos(2 * np.pi * t)))
    F2 = FiberedMap([GOLDEN], [c1], 0.1)
    err_osc = abs(F2.multiplier() - 0.5)
    elapsed = time.perf_counter() - t0
    ok = err_const < 1e-12 and err_osc < 1e-9 and elapsed < 1.0
    _criterion(
        1,
        "multiplier correctness",
        ok,
        f"|k-0.5|: const {err_const:.2e}, oscillating {err_osc:.2e}, "
        f"{elapsed:.2f}s",
    )


def test_criterion_02_cohomological_residual():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        deg = int(rng.integers(1, 17))
        g = random_real_zero_mean(rng, deg)
        u, rep = solve_cohomological(g, GOLDEN)
        worst = max(worst, rep.residual / (1e-10 * u.mass()))
    elapsed = time.perf_counter() - t0
    ok = worst < 1.0 and elapsed < 1.0
    _criterion(
        2,
        "cohomological residual",
        ok,
        f"worst residual at {worst:.3f} of budget, {elapsed:.2f}s",
    )


def test_criterion_03_conjugacy_invariance():
    rng = np.random.default_rng(203)
    t = np.arange(1024) / 1024
    c1 = TrigPoly.fit_grid(
        np.exp(2j * np.pi * (0.15 + 0.1 * np.cos(2 * np.pi * t))), realflag=False
    )
    F = FiberedMap([GOLDEN], [c1, TrigPoly.constant(0.2)], 0.3)
    kappa = F.multiplier()
    _, rho = F.rotation_number()
    worst_k = worst_r = 0.0
    for _ in range(20):
        v = random_complex(rng, 3, scale=0.03)
        G = conjugate_scaling(F, v)
        worst_k = max(worst_k, abs(G.multiplier() - kappa))
        degree, rho_g = G.rotation_number()
        assert degree == (0,)
        worst_r = max(worst_r, abs((rho_g - rho + 0.5) % 1.0 - 0.5))
    ok = worst_k < 1e-9 and worst_r < 1e-9
    _criterion(
        3,
        "conjugacy invariance",
        ok,
        f"max multiplier drift {worst_k:.2e}, rotation drift {worst_r:.2e} "
        f"over 20 rescalings",
    )


def test_criterion_04_koenigs():
    t0 = time.perf_counter()
    F = FiberedMap([GOLDEN], [TrigPoly.constant(0.5), TrigPoly.constant(1.0)], 0.2)
    conj = koenigs_linearize(F, 0.1, tol=1e-10, max_n=256,
                             theta_nodes=256, z_nodes=64)
    residual = conjugacy_residual(F, conj, grid=(256, 64))
    elapsed = time.perf_counter() - t0
    ok = residual < 1e-8 and conj.step_residual_max < 1e-10 and elapsed < 30.0
    _criterion(
        4,
        "weak linearization",
        ok,
        f"residual {residual:.2e}, per-step {conj.step_residual_max:.2e}, "
        f"{elapsed:.1f}s",
    )


def test_criterion_05_formal_siegel():
    t0 = time.perf_counter()
    lam = np.exp(2j * np.pi * GOLDEN)
    F = FiberedMap([GOLDEN], [TrigPoly.constant(lam), TrigPoly.constant(1.0)], 0.3)
    conj = siegel_formal_linearize(F, 10)
    oracle = {1: 1.0 + 0j}
    for k in range(2, 11):
        s = sum(oracle[i] * oracle[k - i] for i in range(1, k))
        oracle[k] = s / (lam**k - lam)
    worst = max(
        abs(conj.coeffs[k].mean - oracle[k]) / abs(oracle[k]) for k in range(2, 11)
    )
    lam3 = np.exp(2j * np.pi / 3.0)
    F3 = FiberedMap([GOLDEN], [TrigPoly.constant(lam3), TrigPoly.constant(1.0)], 0.3)
    try:
        siegel_formal_linearize(F3, 10)
        resonance_ok = False
    except SmallDivisorError as err:
        resonance_ok = err.witness == ((0,), 3)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and resonance_ok and elapsed < 10.0
    _criterion(
        5,
        "formal strong linearization",
        ok,
        f"max relative order error {worst:.2e}, resonance witness ok: "
        f"{resonance_ok}, {elapsed:.1f}s",
    )


def test_criterion_06_diophantine_checker():
    rng = np.random.default_rng(206)
    t0 = time.perf_counter()
    agree = True
    for _ in range(10):
        alpha = float(rng.random())
        beta = float(rng.random())
        tau = float(rng.random())
        rep = check_cd([alpha], beta, 1e-9, tau, 200)
        best = math.inf
        witness = None
        for j in range(0, 201):
            for n in range(-(200 - j), 200 - j + 1):
                if j == 0 and n == 0:
                    continue
                x = n * alpha - j * beta
                frac = x - math.floor(x)
                margin = min(frac, 1.0 - frac) * (abs(n) + j) ** (2.0 + tau)
                if margin < best:
                    best = margin
                    witness = ((n,), j)
        agree = agree and rep.witness == witness and abs(rep.min_margin - best) <= 1e-12 * max(best, 1.0)
    elapsed = time.perf_counter() - t0
    ok = agree and elapsed < 5.0
    _criterion(
        6,
        "arithmetic-condition checker",
        ok,
        f"10 random cases at range 200, witnesses identical: {agree}, "
        f"{elapsed:.1f}s",
    )


def test_criterion_07_birkhoff_telescoping():
    phi = TrigPoly.cosine(1, 1.0)

    def exp_phi(M):
        return np.exp(phi.values_on_grid(M).real)

    c1 = fit_refit(exp_phi, start=128, degree_cutoff=2048, realflag=True)
    F = FiberedMap([GOLDEN], [c1], 0.5)
    u, _ = solve_cohomological(phi, GOLDEN)
    theta0 = 0.2137
    tr = birkhoff_trace(F, theta0, 10000)
    n = np.arange(10001)
    telescoped = (
        u.evaluate(np.mod(theta0 + n * GOLDEN, 1.0)).real - u.evaluate(theta0).real
    )
    sup_diff = float(np.max(np.abs(tr.values - telescoped)))

    t = np.arange(2048) / 2048
    c1b = TrigPoly.fit_grid(np.exp(-0.1 + 0.5 * np.cos(2 * np.pi * t)))
    Fb = FiberedMap([GOLDEN], [c1b], 0.5)
    slope = birkhoff_trace(Fb, 0.05, 10000).slope
    slope_err = abs(slope - math.log(Fb.multiplier())) / 0.1
    ok = sup_diff < 1e-8 and slope_err < 0.01
    _criterion(
        7,
        "Birkhoff telescoping and slope",
        ok,
        f"sup telescoping defect {sup_diff:.2e}, slope error "
        f"{slope_err * 100:.3f}%",
    )


def test_criterion_08_divergent_forcing():
    omega = value_from_quotients([4, 4, 6, 6, 8, 8, 10, 10])
    ex = furstenberg_example(
        omega, FurstenbergSchedule(levels=6, exponent=0.5, divergence_factor=2.0)
    )
    kappa_err = abs(ex.fibered_map.multiplier() - 1.0)
    sups = ex.sup_norms
    growth_ok = all(b >= 2.0 * a for a, b in zip(sups, sups[1:]))
    probe = stability_probe(ex.fibered_map, 0.1, 500, grid=(32, 3, 8))
    ok = kappa_err < 1e-10 and growth_ok and probe.verdict == "escaped"
    _criterion(
        8,
        "divergent forcing example",
        ok,
        f"|k-1| {kappa_err:.2e}, sup growth >= 2 per level: {growth_ok}, "
        f"probe: {probe.verdict}",
    )


def test_criterion_09_continuum():
    t0 = time.perf_counter()
    F_lin = FiberedMap([GOLDEN], [TrigPoly.constant(1j)], 0.5)
    rep_lin = continuum_approx(
        F_lin,
        0.2,
        ContinuumSchedule(levels=2, fejer_degree=32, horizon=200),
        theta_resolution=512,
        z_resolution=256,
    )
    inside = np.abs(rep_lin.mask.centers()) <= 0.2
    lin_ok = (
        bool(np.all(rep_lin.mask.masks == inside[None]))
        and rep_lin.boundary_contact == 0.0
        and rep_lin.dh_forward_pixels == 0.0
        and rep_lin.dh_backward_pixels == 0.0
    )

    lam = np.exp(2j * np.pi * GOLDEN)
    F_q = FiberedMap([GOLDEN], [TrigPoly.constant(lam), TrigPoly.constant(1.0)], 0.45)
    rep_q = continuum_approx(
        F_q,
        0.2,
        ContinuumSchedule(levels=2, fejer_degree=32, horizon=200),
        theta_resolution=512,
        z_resolution=256,
    )
    diag = rep_q.mask.pixel * math.sqrt(2.0)
    quad_ok = (
        rep_q.dh_forward_pixels <= 2.0
        and rep_q.dh_backward_pixels <= 2.0
        and rep_q.zero_section_included
        and rep_q.boundary_contact <= diag
    )
    elapsed = time.perf_counter() - t0
    ok = lin_ok and quad_ok and elapsed < 300.0
    _criterion(
        9,
        "invariant continuum",
        ok,
        f"linear exact: {lin_ok}; quadratic dH "
        f"({rep_q.dh_forward_pixels:.0f},{rep_q.dh_backward_pixels:.0f}) px, "
        f"contact {rep_q.boundary_contact:.1e} <= diag {diag:.1e}; "
        f"{elapsed:.0f}s",
    )


def test_criterion_10_grid_robustness():
    # multiplier and rotation number under doubled starting grids
    t = np.arange(2048) / 2048
    c1 = TrigPoly.fit_grid(
        np.exp(-0.2 + 0.3 * np.cos(2 * np.pi * t))
        * np.exp(2j * np.pi * 0.2 * np.sin(2 * np.pi * t)),
        realflag=False,
    )
    F = FiberedMap([GOLDEN], [c1], 0.3)

    def log_abs(M):
        return np.log(np.abs(c1.values_on_grid(M)))

    k_a, _ = stable_grid_mean(log_abs, start=256)
    k_b, _ = stable_grid_mean(log_abs, start=512)
    kappa_shift = abs(np.exp(k_a.real) - np.exp(k_b.real))
    _, rho_a = F.rotation_number(strict=False, start=512)
    _, rho_b = F.rotation_number(strict=False, start=1024)
    rho_shift = abs(rho_a - rho_b)

    g = TrigPoly.cosine(1, 1.0)
    u, _ = solve_cohomological(g, GOLDEN)
    residuals = []
    for M in (512, 1024):
        pts = grid_points(M)
        res = u.evaluate((pts + GOLDEN) % 1.0) - u.evaluate(pts) - g.evaluate(pts)
        residuals.append(float(np.max(np.abs(res))))
    res_shift = abs(residuals[0] - residuals[1])

    lam = np.exp(2j * np.pi * GOLDEN)
    F_q = FiberedMap([GOLDEN], [TrigPoly.constant(lam), TrigPoly.constant(1.0)], 0.45)
    sched = ContinuumSchedule(levels=1, fejer_degree=16, horizon=120)
    coarse = continuum_approx(
        F_q, 0.2, sched, theta_resolution=64, z_resolution=64
    ).mask
    fine = continuum_approx(
        F_q, 0.2, sched, theta_resolution=128, z_resolution=128
    ).mask
    mask_shift = hausdorff_distance(fine.downsample(), coarse, pixels=True)

    ok = (
        kappa_shift < 1e-8
        and rho_shift < 1e-8
        and res_shift < 1e-8
        and mask_shift <= 2.0
    )
    _criterion(
        10,
        "grid robustness",
        ok,
        f"multiplier shift {kappa_shift:.1e}, rotation shift {rho_shift:.1e}, "
        f"residual shift {res_shift:.1e}, mask shift {mask_shift:.0f} px",
    )
