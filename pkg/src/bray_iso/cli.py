"""Command-line entry point.

Every subcommand writes one JSON report (``"schema": "bray-iso/1"``) or, for
sweeps and sampled profiles with ``--format csv``, a CSV table with a fixed
header.  JSON reports carry the settings that produced them under
``"settings"``.  Output is deterministic: keys are sorted and floats are
written with ``repr``.

Exit codes: 0 success, 1 a ``verify`` check failed, 2 usage error
(including malformed input files), 3 numerical failure (a partial report is
still written).

Sweep ranges use ``start:stop:*k`` (geometric) or ``start:stop:+k``
(arithmetic); a comma-separated list or a single value is also accepted.
``BRAY_ISO_THREADS`` caps the number of worker threads used by sweeps.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .chart import (
    OdeSpec,
    chart_hawking_mass,
    chart_params,
    exterior_profile,
    first_integral,
    inner_area_minimum,
    solve_w,
    u_gap_bound,
    u_profile,
)
from .decay import (
    beta_bound_check,
    coarea_bound_check,
    exterior_radial_integral,
    plane,
    volume_diff_bound_check,
)
from .deficit import (
    bray_chain,
    perturbed_deficit_check,
    residual_trend,
    schwarzschild_deficit_check,
    theorem_step_audit,
    two_ball_region,
)
from .errors import DomainError, NumericError
from .metrics import PerturbationSpec, PerturbedMetric, SchwarzschildMetric, make_metric
from .minimizer import (
    GraphSurface,
    OptimizerConfig,
    area_and_gradient,
    closed_form_cmc,
    minimize,
    profile_gap,
)
from .regions import (
    BallUnion,
    CenteredBall,
    OffsetBall,
    SurfaceQuadrature,
    boundary_area_estimate,
    off_center_classify,
    region_from_dict,
    region_to_dict,
    region_volume_estimate,
)
from .schwarzschild import (
    FOUR_PI,
    MassParam,
    conformal_factor,
    hawking_mass,
    isoperimetric_ratio,
    profile_area,
    profile_expansion_residual,
    radius_for_volume,
    sphere_area,
    sphere_hawking_mass,
    sphere_mean_curvature,
    volume_radius,
    volume_to,
    volume_to_quadrature,
)

SCHEMA = "bray-iso/1"

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

# fixed CSV headers, one per sweep kind
CSV_COLUMNS = {
    "deficit": ("d", "V", "r", "eta", "area", "bound", "margin"),
    "gap": ("r", "c", "alpha", "tau", "lhs", "rhs", "ratio", "holds"),
    "audit": ("r", "R", "res_c", "res_d", "res_e", "res_f", "res_h"),
    "centering": ("r", "iterations", "converged", "cmc_deviation", "mean_H", "H_closed_form", "centering", "area", "profile_area"),
    "w-profile": ("s", "w", "dw", "area", "hawking_mass"),
}


class UsageError(Exception):
    """Bad flags or unreadable input; mapped to exit code 2."""


# -- parsing helpers -----------------------------------------------------------
def parse_range(text: str) -> list[float]:
    """Expand ``start:stop:*k``, ``start:stop:+k``, ``a,b,c`` or a single number."""
    text = text.strip()
    try:
        if ":" not in text:
            vals = [float(t) for t in text.split(",") if t.strip()]
        else:
            parts = text.split(":")
            if len(parts) != 3 or len(parts[2]) < 2 or parts[2][0] not in "*+":
                raise UsageError(f"range {text!r} must look like start:stop:*k or start:stop:+k")
            start, stop, step = float(parts[0]), float(parts[1]), float(parts[2][1:])
            op = parts[2][0]
            if op == "*" and not step > 1:
                raise UsageError("geometric range factor must exceed 1")
            if op == "+" and not step > 0:
                raise UsageError("arithmetic range step must be positive")
            if op == "*" and not start > 0:
                raise UsageError("geometric range must start above 0")
            vals = []
            x, k = start, 0
            slack = 1e-9 * max(abs(start), abs(stop), 1.0)
            while x <= stop + slack:
                vals.append(x)
                k += 1
                x = start * step**k if op == "*" else start + k * step
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}: {exc}") from exc
    if not vals or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"range {text!r} is empty")
    return vals


def load_json_file(path: str, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {what} file {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: malformed {what} JSON: {exc.msg}") from exc


def load_region(path: str):
    data = load_json_file(path, "region")
    try:
        return region_from_dict(data)
    except DomainError as exc:
        raise UsageError(f"{path}: invalid region: {exc}") from exc


def _harmonic(text: str):
    try:
        l, mm, cf = text.split(",")
        return int(l), int(mm), float(cf)
    except ValueError as exc:
        raise UsageError(f"harmonic {text!r} must be l,m,coefficient") from exc


def build_perturbation(args, default_cutoff=None) -> PerturbationSpec:
    if getattr(args, "perturbation", None):
        d = load_json_file(args.perturbation, "perturbation")
        try:
            return PerturbationSpec(
                float(d["C"]),
                tuple(tuple(h) for h in d.get("harmonics", [[0, 0, 1.0]])),
                d.get("cutoff"),
                float(d.get("m", args.mass)),
            )
        except (KeyError, TypeError, ValueError, DomainError) as exc:
            raise UsageError(f"{args.perturbation}: invalid perturbation: {exc}") from exc
    harmonics = tuple(args.harmonic) if args.harmonic else ((0, 0, 1.0),)
    cutoff = args.cutoff if args.cutoff is not None else default_cutoff
    if cutoff is not None and cutoff <= 0:
        cutoff = None
    return PerturbationSpec(args.C, harmonics, cutoff, args.mass)


def _quadrature(args) -> SurfaceQuadrature:
    return SurfaceQuadrature(n_theta=args.n_theta, n_radial=args.n_radial)


def threads() -> int:
    env = os.environ.get("BRAY_ISO_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError("BRAY_ISO_THREADS must be a positive integer") from None
        if n < 1:
            raise UsageError("BRAY_ISO_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def parallel_map(fn, values):
    """Evaluate ``fn`` over ``values``; results come back in input order."""
    n = min(threads(), len(values))
    if n <= 1:
        return [fn(v) for v in values]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, values))


# -- output --------------------------------------------------------------------
def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def dumps_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_csv_cell(row[c]) for c in columns])
    return buf.getvalue()


def _csv_cell(v):
    v = _clean(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else v


def _settings(args) -> dict:
    skip = {"func", "output", "sweep_kind"}
    d = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    d["version"] = __version__
    return d


def envelope(args, command: str, result) -> dict:
    return {"schema": SCHEMA, "command": command, "settings": _settings(args), "result": result}


def _emit(args, text: str):
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        return
    try:
        sys.stdout.write(text)
        sys.stdout.flush()
    except BrokenPipeError:
        # reader closed early (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")


# -- subcommands ----------------------------------------------------------------
def _mass(args) -> MassParam:
    return MassParam(args.mass, euclidean_sanity=getattr(args, "euclidean_sanity", False))


def _radius(args, m: MassParam) -> float:
    if args.radius is not None:
        return float(args.radius)
    if args.volume is not None:
        return float(radius_for_volume(m, args.volume))
    raise UsageError("one of --radius or --volume is required")


def cmd_profile(args):
    m = _mass(args)
    r = _radius(args, m)
    A = float(sphere_area(m, r))
    H = float(sphere_mean_curvature(m, r))
    V = float(volume_to(m, r))
    out = {
        "r": r,
        "phi": float(conformal_factor(m, r)),
        "area": A,
        "H": H,
        "V": V,
        "R": float(volume_radius(V)) if V > 0 else 0.0,
        "hawking_mass": float(hawking_mass(A, H * H * A)),
    }
    if V > 0 and r > m.horizon_radius:
        out["isoperimetric_ratio"] = float(isoperimetric_ratio(m, r))
        out["profile_area"] = float(profile_area(m, V))
    return out, EXIT_OK


def cmd_chart(args):
    m = _mass(args)
    r = _radius(args, m)
    ch = chart_params(m, r)
    s = np.geomspace(ch.c * (1 + 1e-9), 100.0 * ch.c, args.samples)
    trace = first_integral(exterior_profile(ch, s))
    return {
        "m": ch.m,
        "r": ch.r,
        "c": ch.c,
        "alpha": ch.alpha,
        "V0": ch.V0,
        "u_at_c_minus_alpha": float(u_profile(ch, ch.c)) - ch.alpha,
        "first_integral": {
            "median": trace.median,
            "max_deviation": trace.max_deviation,
            "relative_deviation": trace.relative_deviation,
        },
        "gap": [u_gap_bound(ch, t) for t in args.tau],
    }, EXIT_OK


def _w_samples(ch, prof):
    s = prof.grid
    w = prof.values
    area = FOUR_PI * w**4 * ch.alpha * s**2
    hm = chart_hawking_mass(ch, prof, s)
    return s, w, prof.derivs, area, np.asarray(hm)


def cmd_w_profile(args):
    m = _mass(args)
    ch = chart_params(m, _radius(args, m))
    ode = OdeSpec(rtol=args.rtol, atol=args.atol, blowup=args.blowup, s_min_ratio=args.s_min_ratio, n_samples=args.samples)
    try:
        prof = solve_w(ch, ode)
    except NumericError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        partial = exc.partial
        summary = {"error": str(exc), "partial_samples": 0 if partial is None else int(partial.grid.size)}
        if partial is not None:
            summary["s_last"] = float(partial.grid[0])
            summary["w_last"] = float(partial.values[0])
        return summary, EXIT_NUMERIC
    s, w, dw, area, hm = _w_samples(ch, prof)
    if args.format == "csv":
        rows = [dict(zip(CSV_COLUMNS["w-profile"], vals)) for vals in zip(s, w, dw, area, hm)]
        return ("csv", CSV_COLUMNS["w-profile"], rows), EXIT_OK
    inner = inner_area_minimum(ch, prof)
    return {
        "c": ch.c,
        "alpha": ch.alpha,
        "s0_estimate": prof.meta.get("s0"),
        "samples": int(s.size),
        "w_max": float(w.max()),
        "hawking_mass_at_c": float(hm[-1]),
        "hawking_mass_max_relative_deviation": float(np.max(np.abs(hm - m.m)) / m.m),
        "inner_area_minimum": inner,
        "horizon_area": 16.0 * np.pi * m.m**2,
    }, EXIT_OK


def _metric_for(args, m):
    if args.metric == "perturbed":
        return PerturbedMetric(build_perturbation(args))
    return make_metric(args.metric, m.m)


def cmd_region_report(args):
    m = _mass(args)
    region = load_region(args.region)
    metric = _metric_for(args, m)
    q = _quadrature(args)
    area, e_area = boundary_area_estimate(region, metric, q)
    V, e_V = region_volume_estimate(region, metric, q)
    out = {
        "region": region_to_dict(region) if args.echo_region else region_to_dict(region)["type"],
        "metric": metric.settings(),
        "area": area,
        "area_error": e_area,
        "volume": V,
        "volume_error": e_V,
    }
    if args.metric != "euclidean" and V > 0:
        out["off_center"] = off_center_classify(region, m, args.tau, metric, q).to_dict()
    return out, EXIT_OK


def cmd_deficit(args):
    region = load_region(args.region)
    q = _quadrature(args)
    if args.C is not None or args.perturbation:
        if args.C is None and not args.perturbation:
            raise UsageError("perturbed deficit needs --C or --perturbation")
        pert = build_perturbation(args)
        rep = perturbed_deficit_check(pert, region, args.tau, args.eta, args.theta, q)
        return {"metric": "perturbed", "perturbation": pert.to_dict(), **rep.to_dict()}, EXIT_OK
    rep = schwarzschild_deficit_check(_mass(args), region, args.tau, q)
    return {"metric": "schwarzschild", **rep.to_dict()}, EXIT_OK


def cmd_chain(args):
    region = load_region(args.region)
    rep = bray_chain(_mass(args), region, args.r_chart, _quadrature(args))
    return {**rep.to_dict(), "all_ok": rep.all_ok}, EXIT_OK


def _audit_row(pert, r, q, tau):
    R = r * (8.0 / 9.0) ** (1.0 / 3.0)
    rep = theorem_step_audit(pert, two_ball_region(R), tau, q)
    return R, rep


def cmd_theorem_audit(args):
    pert = build_perturbation(args, default_cutoff=10.0)
    q = _quadrature(args)
    radii = args.radii
    reps = parallel_map(lambda r: _audit_row(pert, r, q, args.tau), radii)
    steps = {}
    for key in ("c", "d", "e", "f", "h"):
        seq = [rep.residuals[key] for _, rep in reps]
        steps[key] = {"residuals": seq, **residual_trend(seq)}
    return {
        "perturbation": pert.to_dict(),
        "region_family": "two_ball(R, offset=3R, ratio=1/2), R = r (8/9)^(1/3)",
        "reports": [{"R": R, **rep.to_dict()} for R, rep in reps],
        "trend": steps,
        "bounded": all(v["bounded"] for v in steps.values()),
    }, EXIT_OK


def _initial_surface(args, r):
    if args.surface:
        return GraphSurface.from_dict(load_json_file(args.surface, "surface"))
    if args.init == "sphere":
        return GraphSurface.sphere(r, args.grid)
    if args.init == "random":
        return GraphSurface.random(r, args.amplitude, args.seed, n_theta=args.grid)
    return GraphSurface.ellipsoidal(r, args.amplitude, args.grid)


def _minimize_at(args, r, metric, cfg, m):
    V = metric.centered_volume(r)
    rep = minimize(_initial_surface(args, r), m, V, cfg, metric)
    return rep


def _metric_for_minimize(args, m):
    if args.C is not None or args.perturbation:
        return PerturbedMetric(build_perturbation(args))
    return SchwarzschildMetric(m)


def _config(args) -> OptimizerConfig:
    return OptimizerConfig(
        step_size=args.step_size,
        volume_tol=args.volume_tol,
        grad_tol=args.grad_tol,
        max_iters=args.max_iters,
        seed=args.seed,
    )


def cmd_minimize(args):
    m = _mass(args)
    metric = _metric_for_minimize(args, m)
    if args.volume is not None:
        V = float(args.volume)
    elif args.radius is not None:
        V = metric.centered_volume(args.radius)
    else:
        raise UsageError("one of --radius or --volume is required")
    r = metric.matched_radius(V)
    rep = minimize(_initial_surface(args, r), m, V, _config(args), metric)
    out = rep.to_dict(include_surface=args.include_surface)
    out["metric"] = metric.settings()
    out["H_closed_form"] = closed_form_cmc(m, rep.matched_radius)
    out["profile_area"] = float(profile_area(m, V))
    out["profile_gap"] = profile_gap(rep, m)
    return out, EXIT_OK


def cmd_decay_check(args):
    coarea = [coarea_bound_check(plane(r0=r0), g) for r0 in args.r0 for g in args.gamma]
    beta = [beta_bound_check(plane(r0=r0, R=R), b) for r0 in args.r0 for R in args.R for b in args.beta if R > r0]
    ext = []
    for a in args.alpha:
        for r0 in args.r0:
            row = exterior_radial_integral(a, r0)
            row["relative_difference"] = abs(row["closed_form"] - row["quadrature"]) / row["closed_form"]
            ext.append(row)
    out = {"coarea": coarea, "beta": beta, "exterior_radial_integral": ext}
    if args.C is not None or args.perturbation:
        pert = build_perturbation(args, default_cutoff=10.0)
        region = CenteredBall(args.shell_radius)
        q = _quadrature(args)
        out["volume_diff"] = [volume_diff_bound_check(pert, region, a, r0, q) for a in args.alpha for r0 in args.r0]
    ok = all(x["holds"] for x in coarea + beta) and all(x["relative_difference"] <= 1e-8 for x in ext)
    if "volume_diff" in out:
        ok = ok and all(x["holds"] for x in out["volume_diff"])
    out["all_hold"] = ok
    return out, EXIT_OK


# sweeps ------------------------------------------------------------------
def _sweep_deficit(args):
    m = _mass(args)
    q = _quadrature(args)

    def row(d):
        region = BallUnion((OffsetBall((d, 0.0, 0.0), args.rho),))
        rep = schwarzschild_deficit_check(m, region, args.tau, q)
        return {"d": d, "V": rep.V, "r": rep.r, "eta": rep.eta, "area": rep.area_lhs, "bound": rep.bound_rhs, "margin": rep.margin}

    return parallel_map(row, args.offset)


def _sweep_gap(args):
    m = _mass(args)
    rows = []
    for r in args.radius:
        ch = chart_params(m, r)
        for t in args.tau:
            g = u_gap_bound(ch, t)
            rows.append({"r": r, "alpha": ch.alpha, **g})
    return rows


def _sweep_audit(args):
    pert = build_perturbation(args, default_cutoff=10.0)
    q = _quadrature(args)
    reps = parallel_map(lambda r: (r,) + _audit_row(pert, r, q, args.tau), args.radius)
    return [
        {"r": r, "R": R, **{f"res_{k}": rep.residuals[k] for k in ("c", "d", "e", "f", "h")}}
        for r, R, rep in reps
    ]


def _sweep_centering(args):
    m = _mass(args)
    metric = _metric_for_minimize(args, m)
    cfg = _config(args)

    def row(r):
        rep = _minimize_at(args, r, metric, cfg, m)
        return {
            "r": r,
            "iterations": rep.iterations,
            "converged": rep.converged,
            "cmc_deviation": rep.cmc_deviation,
            "mean_H": rep.mean_H,
            "H_closed_form": closed_form_cmc(m, rep.matched_radius),
            "centering": rep.centering,
            "area": rep.area,
            "profile_area": float(profile_area(m, rep.target_volume)),
        }

    return parallel_map(row, args.radius)


_SWEEPS = {"deficit": _sweep_deficit, "gap": _sweep_gap, "audit": _sweep_audit, "centering": _sweep_centering}


def cmd_sweep(args):
    kind = args.sweep_kind
    # rows are ordered by the swept parameter whatever order the values came in
    rows = sorted(_SWEEPS[kind](args), key=lambda row: row[CSV_COLUMNS[kind][0]])
    if args.format == "csv":
        return ("csv", CSV_COLUMNS[kind], rows), EXIT_OK
    return {"kind": kind, "columns": list(CSV_COLUMNS[kind]), "rows": rows}, EXIT_OK


# verify -----------------------------------------------------------------
def _check(name, ok, **detail):
    return {"name": name, "ok": bool(ok), **detail}


def verify_suite(m: float) -> list[dict]:
    """Fast invariant suite at mass ``m`` (radii scale with ``m``)."""
    mass = MassParam(m)
    a = mass.horizon_radius
    out = []
    r = np.geomspace(a * 1.01, a * 2e6, 20)
    dev = float(np.max(np.abs(sphere_hawking_mass(mass, r) - m)) / m)
    out.append(_check("hawking_mass_identity", dev <= 1e-9, max_relative_deviation=dev))

    rq = np.geomspace(a * 1.01, a * 2e4, 12)
    vdev = max(abs(volume_to(mass, x) - volume_to_quadrature(mass, x)) / volume_to(mass, x) for x in rq)
    out.append(_check("volume_closed_form_vs_quadrature", vdev <= 1e-10, max_relative_deviation=vdev))

    refl = float(np.max(np.abs(sphere_area(mass, rq) / sphere_area(mass, a * a / rq) - 1)))
    out.append(_check("reflection_symmetry", refl <= 1e-10, max_relative_deviation=refl))

    rt = max(abs(radius_for_volume(mass, volume_to(mass, x)) / x - 1) for x in rq)
    out.append(_check("radius_volume_round_trip", rt <= 1e-9, max_relative_deviation=rt))

    R = np.array([1e2, 1e3, 1e4]) * m
    res = np.array([profile_expansion_residual(mass, FOUR_PI * x**3 / 3) for x in R])
    var = float((res.max() - res.min()) / np.max(np.abs(res)))
    out.append(_check("profile_expansion_residual_bounded", var < 0.2, residuals=res, variation=var))

    ch = chart_params(mass, 10.0 * m)
    glue = abs(float(u_profile(ch, ch.c)) - ch.alpha)
    out.append(_check("chart_gluing", glue <= 1e-9, u_minus_alpha=glue))
    s = np.linspace(ch.c, 100 * ch.c, 1001)[1:]
    u = u_profile(ch, s)
    mono = bool(np.all(np.diff(u) > 0) and np.all((u > ch.alpha) & (u < 1)))
    out.append(_check("u_monotone_in_range", mono))
    fi = first_integral(exterior_profile(ch, s)).relative_deviation
    out.append(_check("first_integral_constant", fi <= 1e-7, relative_deviation=fi))

    prof = solve_w(ch)
    hm = np.asarray(chart_hawking_mass(ch, prof, prof.grid))
    hdev = float(np.max(np.abs(hm - m)) / m)
    out.append(_check("chart_hawking_mass_constant", hdev <= 1e-5, max_relative_deviation=hdev))
    inner = inner_area_minimum(ch, prof)
    horizon = 16 * np.pi * m * m
    idev = abs(inner["area_min"] - horizon) / horizon if inner["conclusive"] else np.inf
    out.append(_check("inner_area_minimum_is_horizon", idev <= 0.01, relative_deviation=idev))

    gaps = [u_gap_bound(chart_params(mass, x * m), t) for x in (1e2, 1e3) for t in (1.5, 2.0, 4.0)]
    out.append(_check("gap_bound", all(g["holds"] for g in gaps), ratios=[g["ratio"] for g in gaps]))

    q = SurfaceQuadrature(n_theta=64, n_radial=48)
    cen = schwarzschild_deficit_check(mass, CenteredBall(10.0 * m), 2.0, q)
    out.append(_check("deficit_equality_centered", abs(cen.margin) <= 10 * cen.error, margin=cen.margin, error=cen.error))
    off = schwarzschild_deficit_check(mass, BallUnion((OffsetBall((40.0 * m, 0.0, 0.0), 10.0 * m),)), 2.0, q)
    out.append(_check("deficit_two_ball", off.holds and off.margin > 0, margin=off.margin))

    chain = bray_chain(mass, CenteredBall(20.0 * m), 10.0 * m, q)
    out.append(_check("bray_chain", chain.all_ok, step_ok=chain.step_ok))

    cb = [coarea_bound_check(plane(), g)["holds"] for g in (2.5, 3.0, 4.0, 6.0)]
    out.append(_check("coarea_plane", all(cb)))
    ext = max(
        abs(x["closed_form"] - x["quadrature"]) / x["closed_form"]
        for x in (exterior_radial_integral(al, r0) for al in (1.2, 2.0, 2.8) for r0 in (1.0, 2.0, 4.0))
    )
    out.append(_check("exterior_radial_integral", ext <= 1e-8, max_relative_difference=ext))

    surf = GraphSurface.random(20.0 * m, 0.1, seed=0, n_theta=16)
    metric = SchwarzschildMetric(mass)
    A, grad = area_and_gradient(surf, metric)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10):
        i, j = rng.integers(surf.n_theta), rng.integers(2 * surf.n_theta)
        h = 1e-5 * surf.rho[i, j]
        rho_p, rho_m = surf.rho.copy(), surf.rho.copy()
        rho_p[i, j] += h
        rho_m[i, j] -= h
        fd = (area_and_gradient(surf.with_rho(rho_p), metric)[0] - area_and_gradient(surf.with_rho(rho_m), metric)[0]) / (2 * h)
        worst = max(worst, abs(fd - grad[i, j]) / abs(grad[i, j]))
    out.append(_check("area_gradient_finite_difference", worst <= 1e-6, max_relative_error=worst))
    return out


def cmd_verify(args):
    checks = verify_suite(args.mass)
    ok = all(c["ok"] for c in checks)
    return {"checks": checks, "passed": sum(c["ok"] for c in checks), "total": len(checks), "ok": ok}, (
        EXIT_OK if ok else EXIT_VERIFY
    )


# -- argument parser -------------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _range_arg(text):
    try:
        return parse_range(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _harmonic_arg(text):
    try:
        return _harmonic(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _common(p, radius=True):
    p.add_argument("--mass", type=float, default=1.0, help="Schwarzschild mass m > 0")
    p.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    if radius:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--radius", type=float, default=None, help="isotropic radius r")
        g.add_argument("--volume", type=float, default=None, help="horizon-relative volume V")


def _quad_flags(p):
    p.add_argument("--n-theta", type=int, default=128, help="polar Gauss-Legendre nodes of the surface quadrature")
    p.add_argument("--n-radial", type=int, default=64, help="radial Gauss-Legendre nodes for volumes")


def _pert_flags(p, C_default=None):
    p.add_argument("--C", type=float, default=C_default, help="perturbation amplitude")
    p.add_argument("--harmonic", type=_harmonic_arg, action="append", default=None, help="angular term l,m,coefficient (repeatable)")
    p.add_argument("--cutoff", type=float, default=None, help="support radius of the perturbation (<= 0 for none)")
    p.add_argument("--perturbation", default=None, help="perturbation JSON file {C, harmonics, cutoff}")


def _opt_flags(p):
    p.add_argument("--init", choices=("ellipsoidal", "random", "sphere"), default="ellipsoidal")
    p.add_argument("--surface", default=None, help="initial surface JSON {n_theta, rho}")
    p.add_argument("--amplitude", type=float, default=0.2)
    p.add_argument("--grid", type=int, default=32, help="polar nodes of the surface grid")
    p.add_argument("--step-size", type=float, default=1.0)
    p.add_argument("--volume-tol", type=float, default=1e-12)
    p.add_argument("--grad-tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bray-iso", description="Schwarzschild isoperimetry toolkit")
    parser.add_argument("--version", action="version", version=f"bray-iso {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("profile", help="closed-form quantities of a centered sphere")
    _common(p)
    p.add_argument("--euclidean-sanity", action="store_true", help="admit m = 0")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("chart", help="volume-preserving chart data and gap bounds")
    _common(p)
    p.add_argument("--tau", type=_range_arg, default=[1.5, 2.0, 4.0])
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_chart)

    p = sub.add_parser("w-profile", help="interior conformal factor of the chart")
    _common(p)
    p.add_argument("--rtol", type=float, default=1e-12)
    p.add_argument("--atol", type=float, default=1e-14)
    p.add_argument("--blowup", type=float, default=1e6)
    p.add_argument("--samples", type=int, default=2001)
    p.add_argument("--s-min-ratio", type=float, default=1e-40, help="give up once s < ratio * c")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_w_profile)

    p = sub.add_parser("region-report", help="area, volume and off-centering of a region")
    _common(p, radius=False)
    p.add_argument("--region", required=True)
    p.add_argument("--metric", choices=("euclidean", "schwarzschild", "perturbed"), default="schwarzschild")
    p.add_argument("--tau", type=float, default=2.0)
    p.add_argument("--echo-region", action="store_true")
    _quad_flags(p)
    _pert_flags(p, C_default=0.0)
    p.set_defaults(func=cmd_region_report)

    p = sub.add_parser("deficit", help="deficit inequality for a region")
    _common(p, radius=False)
    p.add_argument("--region", required=True)
    p.add_argument("--tau", type=float, default=2.0)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    _quad_flags(p)
    _pert_flags(p)
    p.set_defaults(func=cmd_deficit)

    p = sub.add_parser("chain", help="term-by-term area chain through the chart")
    _common(p, radius=False)
    p.add_argument("--region", required=True)
    p.add_argument("--r-chart", type=float, default=None)
    _quad_flags(p)
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("theorem-audit", help="residual ratios of the perturbed comparison steps")
    _common(p, radius=False)
    p.add_argument("--radii", type=_range_arg, default=[50.0, 100.0, 200.0, 400.0])
    p.add_argument("--tau", type=float, default=2.0)
    _quad_flags(p)
    _pert_flags(p, C_default=1.0)
    p.set_defaults(func=cmd_theorem_audit)

    p = sub.add_parser("minimize", help="volume-constrained area minimization")
    _common(p)
    p.add_argument("--include-surface", action="store_true")
    _opt_flags(p)
    _pert_flags(p)
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("decay-check", help="integral decay estimates")
    _common(p, radius=False)
    p.add_argument("--gamma", type=_range_arg, default=[2.5, 3.0, 4.0, 6.0])
    p.add_argument("--beta", type=_range_arg, default=[0.5, 1.0, 1.5])
    p.add_argument("--R", type=_range_arg, default=[10.0, 100.0], help="plane truncation radii for the beta bound")
    p.add_argument("--alpha", type=_range_arg, default=[1.2, 1.5, 2.0, 2.5, 2.8])
    p.add_argument("--r0", type=_range_arg, default=[1.0, 2.0, 4.0])
    p.add_argument("--shell-radius", type=float, default=8.0, help="centered ball used for the volume comparison")
    _quad_flags(p)
    _pert_flags(p)
    p.set_defaults(func=cmd_decay_check)

    p = sub.add_parser("sweep", help="parameter sweeps (CSV or JSON)")
    ss = p.add_subparsers(dest="sweep_kind", required=True, parser_class=_Parser)
    q = ss.add_parser("deficit", help="offset-ball deficit margins")
    _common(q, radius=False)
    q.add_argument("--tau", type=float, default=2.0)
    q.add_argument("--offset", type=_range_arg, required=True)
    q.add_argument("--rho", type=float, required=True)
    _quad_flags(q)
    q = ss.add_parser("gap", help="gap bound across chart radii")
    _common(q, radius=False)
    q.add_argument("--radius", type=_range_arg, required=True)
    q.add_argument("--tau", type=_range_arg, default=[2.0])
    q = ss.add_parser("audit", help="theorem step residuals across matched radii")
    _common(q, radius=False)
    q.add_argument("--radius", type=_range_arg, required=True)
    q.add_argument("--tau", type=float, default=2.0)
    _quad_flags(q)
    _pert_flags(q, C_default=1.0)
    q = ss.add_parser("centering", help="minimizer centering across matched radii")
    _common(q, radius=False)
    q.add_argument("--radius", type=_range_arg, required=True)
    _opt_flags(q)
    _pert_flags(q)
    for q in ss.choices.values():
        q.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the invariant suite")
    _common(p, radius=False)
    p.set_defaults(func=cmd_verify)
    return parser


def run(argv=None) -> int:
    """Parse ``argv``, execute the subcommand and write its report; returns the exit code."""
    try:
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as exc:  # --help / --version
            return int(exc.code or 0)
        if hasattr(args, "radius") and args.command in ("profile", "chart", "w-profile") and args.radius is None and args.volume is None:
            raise UsageError("one of --radius or --volume is required")
        result, code = args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except DomainError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except NumericError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        partial = {"error": str(exc)}
        _emit(args, dumps_report(envelope(args, args.command, partial)))
        return EXIT_NUMERIC
    if isinstance(result, tuple) and result and result[0] == "csv":
        _, columns, rows = result
        _emit(args, dumps_csv(columns, rows))
    else:
        _emit(args, dumps_report(envelope(args, args.command, result)))
    return code


def main() -> None:
    sys.exit(run())
