"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a ``PASS``/``FAIL`` line (printed in the terminal summary)
before asserting, so a failing criterion still reports its measured values.
"""

import time

import numpy as np

from conftest import ACCEPTANCE
from bray_iso.chart import (
    OdeSpec,
    chart_hawking_mass,
    chart_params,
    exterior_profile,
    first_integral,
    gap_threshold,
    inner_area_minimum,
    solve_w,
    u_gap_bound,
    u_profile,
)
from bray_iso.decay import coarea_bound_check, exterior_radial_integral, plane
from bray_iso.deficit import (
    bray_chain,
    residual_trend,
    schwarzschild_deficit_check,
    theorem_step_audit,
    two_ball_region,
)
from bray_iso.metrics import PerturbationSpec, PerturbedMetric, SchwarzschildMetric
from bray_iso.minimizer import GraphSurface, area_and_gradient, closed_form_cmc, minimize, profile_gap
from bray_iso.regions import BallUnion, CenteredBall, OffsetBall, RadialGraph
from bray_iso.schwarzschild import profile_expansion_residual, sphere_hawking_mass, volume_to

FOUR_PI = 4 * np.pi


def verdict(n: int, title: str, ok: bool, detail: str):
    ACCEPTANCE[n] = f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}"
    assert ok, ACCEPTANCE[n]


def test_01_hawking_mass_identity():
    worst = 0.0
    for m in (0.5, 1.0, 2.0):
        r = np.geomspace(m / 2 * (1 + 1e-3), m / 2 * 1e6, 20)
        worst = max(worst, float(np.max(np.abs(sphere_hawking_mass(m, r) - m)) / m))
    verdict(1, "Hawking mass identity", worst <= 1e-9, f"max relative deviation {worst:.2e} (tol 1e-9)")


def test_02_profile_expansion():
    res = np.array([profile_expansion_residual(1.0, FOUR_PI * R**3 / 3) for R in (1e2, 1e3, 1e4)])
    variation = float(np.ptp(res) / np.max(np.abs(res)))
    verdict(2, "profile expansion", variation < 0.2, f"residuals {np.round(res, 5).tolist()}, variation {variation:.3%} (tol 20%)")


def test_03_chart_gluing():
    hs = (1e-2, 1e-3, 1e-4)
    glue, ratios = 0.0, []
    for r in (10.0, 100.0):
        ch = chart_params(1.0, r)
        glue = max(glue, abs(float(u_profile(ch, ch.c)) - ch.alpha))
        # the cone side has zero derivative, so the outer difference quotient is the mismatch
        mism = [abs(float(u_profile(ch, ch.c + h)) - ch.alpha) / h for h in hs]
        ratios += [mism[0] / mism[1], mism[1] / mism[2]]
    linear = all(7.0 < q < 13.0 for q in ratios)
    ok = glue <= 1e-9 and linear
    verdict(3, "chart gluing", ok, f"|u(c)-alpha| = {glue:.1e}, mismatch ratios per decade of h {np.round(ratios, 2).tolist()}")


def test_04_u_monotone_and_bounded():
    ok, worst = True, []
    for r in (10.0, 1e2, 1e3):
        ch = chart_params(1.0, r)
        s = np.geomspace(ch.c * (1 + 1e-3), ch.c * 1e3, 1000)
        u = u_profile(ch, s)
        ok &= bool(np.all(np.diff(u) > 0) and np.all(u > ch.alpha) and np.all(u < 1))
        worst.append(float(np.min(np.diff(u))))
    verdict(4, "u_c monotone in (alpha, 1)", ok, f"min increment per run {[f'{x:.1e}' for x in worst]}")


def test_05_first_integral_and_chart_mass():
    rows = []
    ok = True
    for m, r in ((1.0, 10.0), (2.0, 30.0), (0.5, 100.0)):
        ch = chart_params(m, r)
        ext = first_integral(exterior_profile(ch, np.geomspace(ch.c, 1e4 * ch.c, 2000)))
        prof = solve_w(ch, OdeSpec())
        hm = chart_hawking_mass(ch, prof, prof.grid)
        hm_dev = float(np.max(np.abs(hm - m)) / m)
        inner = inner_area_minimum(ch, prof)
        area_dev = abs(inner["area_min"] / (16 * np.pi * m * m) - 1) if inner["conclusive"] else np.inf
        ok &= ext.relative_deviation <= 1e-7 and hm_dev <= 1e-5 and area_dev <= 1e-2
        rows.append(f"m={m}: exterior {ext.relative_deviation:.1e}, chart mass {hm_dev:.1e}, inner area {area_dev:.1e}")
    verdict(5, "first integral conservation", ok, "; ".join(rows) + " (tols 1e-7, 1e-5, 1e-2)")


def test_06_gap_estimate():
    ok, parts = True, []
    for tau in (1.5, 2.0, 4.0):
        for r in (1e2, 1e3):
            g = u_gap_bound(chart_params(1.0, r), tau)
            ok &= g["holds"]
        radii = np.geomspace(1.0, 1e3, 31)
        th = gap_threshold(1.0, tau, radii)
        if th["threshold_r"] is None:
            parts.append(f"tau={tau}: fails at the largest sampled c")
        elif th["threshold_r"] == radii[0]:
            parts.append(f"tau={tau}: holds from the smallest sampled c={th['threshold_c']:.3g}")
        else:
            parts.append(f"tau={tau}: threshold c={th['threshold_c']:.3g}")
    verdict(6, "gap estimate", ok, "; ".join(parts))


def _chain_regions():
    out = [(CenteredBall(r), None) for r in (5.0, 20.0, 80.0)]
    for d, rho in ((30.0, 5.0), (60.0, 15.0), (120.0, 10.0), (25.0, 12.0)):
        out.append((BallUnion((CenteredBall(10.0), OffsetBall((d, 0.0, 0.0), rho))), 10.0))
    for terms in (((2, 0, 0.1),), ((1, 1, 0.15), (3, 0, 0.05)), ((2, 1, 0.08), (4, -2, 0.04))):
        g = RadialGraph.from_harmonics(20.0, terms, n_theta=64)
        out.append((g, float(np.min(g.rho)) * 0.999))
    return out


def test_07_bray_chain():
    fails = []
    regions = _chain_regions()
    for i, (region, r_chart) in enumerate(regions):
        rep = bray_chain(1.0, region, r_chart=r_chart)
        if not rep.all_ok:
            fails.append(i)
    verdict(7, "Bray chain term by term", not fails, f"{len(regions) - len(fails)}/{len(regions)} regions satisfy every step")


def test_08_deficit_bound():
    margins = []
    for d in 10.0 * 2.0 ** np.arange(6):
        rep = schwarzschild_deficit_check(1.0, BallUnion((OffsetBall((d, 0.0, 0.0), 5.0),)), 2.0)
        margins.append((rep.holds and rep.margin > 0, rep.margin))
    eq = []
    for r in (5.0, 20.0, 80.0):
        rep = schwarzschild_deficit_check(1.0, CenteredBall(r), 2.0)
        eq.append(abs(rep.margin) <= 10 * rep.error)
    ok = all(h for h, _ in margins) and all(eq)
    verdict(8, "deficit bound", ok, f"offset margins {[round(m, 2) for _, m in margins]}, centered equality {eq}")


def test_09_theorem_step_audit():
    t0 = time.perf_counter()
    pert = PerturbationSpec(1.0, cutoff=10.0)
    reps = [theorem_step_audit(pert, two_ball_region(r * (8 / 9) ** (1 / 3))) for r in (50.0, 100.0, 200.0, 400.0)]
    trends = {k: residual_trend([rep.residuals[k] for rep in reps]) for k in ("c", "d", "e", "f")}
    elapsed = time.perf_counter() - t0
    ok = all(t["bounded"] for t in trends.values()) and elapsed <= 300
    detail = ", ".join(f"{k}: growth {t['growth']:.2f}" for k, t in trends.items())
    verdict(9, "theorem step audit", ok, f"{detail}; {elapsed:.1f} s")


def test_10_decay_lemmas():
    coarea = all(coarea_bound_check(plane(1.0), g)["holds"] for g in (2.5, 3.0, 4.0, 6.0))
    worst = 0.0
    for alpha in np.linspace(1.2, 2.8, 9):
        for r0 in (1.0, 2.0, 4.0):
            rep = exterior_radial_integral(alpha, r0)
            worst = max(worst, abs(rep["quadrature"] / rep["closed_form"] - 1))
    ok = coarea and worst <= 1e-8
    verdict(10, "decay lemmas", ok, f"co-area holds on planes: {coarea}; exterior integral max rel. error {worst:.1e} (tol 1e-8)")


def test_11_centering():
    # exact Schwarzschild: every quantitative requirement against the closed forms
    t0 = time.perf_counter()
    ok, exact = True, []
    for r in (20.0, 50.0, 100.0):
        rep = minimize(GraphSurface.ellipsoidal(r, 0.2, 32), 1.0, volume_to(1.0, r))
        H_err = abs(rep.mean_H / closed_form_cmc(1.0, r) - 1)
        ok &= rep.converged and rep.cmc_deviation <= 1e-4 and H_err <= 1e-4 and profile_gap(rep, 1.0) >= -rep.area_error
        exact.append(rep.centering)
    # minimizers of g_m are exactly centered, so their centering is solver noise;
    # the decrease in r is measured under a perturbation that moves them
    ok &= max(exact) <= 1e-6
    metric = PerturbedMetric(PerturbationSpec(0.5, harmonics=((1, 0, 1.0), (2, 0, 1.0))))
    pert = []
    for r in (20.0, 50.0, 100.0):
        rep = minimize(GraphSurface.ellipsoidal(r, 0.2, 32), 1.0, metric.centered_volume(r), metric=metric)
        ok &= rep.converged and rep.cmc_deviation <= 1e-4
        pert.append(rep.centering)
    ok &= bool(np.all(np.diff(pert) < 0))
    elapsed = time.perf_counter() - t0
    verdict(
        11,
        "centering",
        ok,
        f"g_m centering {[f'{c:.1e}' for c in exact]}, perturbed centering {[f'{c:.2e}' for c in pert]}; {elapsed:.1f} s",
    )


def test_12_gradient_check():
    s = GraphSurface.random(10.0, 0.15, seed=12, n_theta=32)
    gm = SchwarzschildMetric(1.0)
    _, grad = area_and_gradient(s, gm)
    rng = np.random.default_rng(2024)
    flat = rng.choice(s.rho.size, size=50, replace=False)
    worst = 0.0
    for k in flat:
        i, j = np.unravel_index(k, s.rho.shape)
        # a one-node bump is a spike for the spectral derivatives, so the O(h**2)
        # term is large; 1e-5 balances it against roundoff in the area
        h = 1e-5 * s.rho[i, j]
        up, dn = s.rho.copy(), s.rho.copy()
        up[i, j] += h
        dn[i, j] -= h
        fd = (area_and_gradient(s.with_rho(up), gm)[0] - area_and_gradient(s.with_rho(dn), gm)[0]) / (2 * h)
        worst = max(worst, abs(fd / grad[i, j] - 1))
    verdict(12, "gradient check", worst <= 1e-6, f"max relative error over 50 nodes {worst:.1e} (tol 1e-6)")
