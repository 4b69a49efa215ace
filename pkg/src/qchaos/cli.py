"""Command-line entry point: ``qchaos <subcommand> ...``.

Exit status 0 on success, 2 on argument errors, 1 on computation errors
(with a JSON error object on stderr). Any subcommand that writes a file
also writes ``<file>.run.json`` holding the fully resolved argument list;
``qchaos replay <file>.run.json`` re-runs it.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as qio
from .backward import DeadEnd, DepthTooLarge, Mode, critical_purity_report, julia_cloud, quasi_julia_cloud
from .basins import InvalidViewport, Surface, monte_carlo_divergence, render
from .core import BlochVector, ErrorAngle
from .fractal import (
    SPHERE_VIEWPORT,
    BoundaryPolicy,
    EmptyMask,
    NoTransition,
    box_count_dimension,
    dimension_vs_purity,
    estimate_critical_purity_from_scan,
    extract_boundary,
    scan_point,
)
from .oracle import oracle_report
from .stability import (
    NoC3,
    NotFound,
    attractor_inventory,
    c0_multiplier,
    detect_mixed_attractor,
    find_c3,
    pure_two_cycles,
)

PLANE_VIEWPORT = (-1.0, 1.0, -1.0, 1.0)
ORACLE_TOL = 1e-12


class UsageError(Exception):
    """Semantically invalid arguments (reported with exit status 2)."""


# --------------------------------------------------------------------------
# argument parsing helpers


def _floats(text: str, n: int | None = None) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _viewport(text: str):
    return _floats(text, 4)


def _vector(text: str):
    return _floats(text, 3)


def _res(text: str) -> tuple[int, int]:
    try:
        if "x" in text:
            w, h = text.lower().split("x")
            return int(w), int(h)
        n = int(text)
        return n, n
    except ValueError:
        raise argparse.ArgumentTypeError(f"resolution must be N or WxH, got {text!r}")


def purity_range(text: str) -> list[float]:
    """``a:b:step`` (inclusive of b) or a comma list."""
    try:
        if ":" in text:
            a, b, step = (float(t) for t in text.split(":"))
            n = int(round((b - a) / step))
            return [round(a + i * step, 10) for i in range(n + 1)]
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"purities must be a:b:step or a list, got {text!r}")


def _eps(args) -> ErrorAngle:
    return ErrorAngle.parse(args.eps, args.unit)


def _threads(args) -> int | None:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("QCHAOS_THREADS")
    return int(env) if env else None


def _emit(args, payload: dict) -> None:
    """Print JSON to stdout, or write it to ``--out`` when that is a .json path."""
    out = getattr(args, "json_out", None)
    if out:
        qio.write_json(out, payload)
        _sidecar(args, out)
    sys.stdout.write(qio.dumps(payload))


def _sidecar(args, out) -> None:
    qio.write_sidecar(out, args.command, args._resolved_argv, args._config)


# --------------------------------------------------------------------------
# subcommands


def cmd_fixed_points(args) -> int:
    eps = _eps(args)
    inv = attractor_inventory(eps)
    payload = inv.to_dict()
    try:
        payload["c3"] = find_c3(eps).to_dict()
    except NoC3:
        payload["c3"] = None
    if args.csv:
        rows = []
        pts = list(inv.mixed_fixed_points) + list(inv.pure_attractors) + list(inv.detected_long_cycles)
        for p in pts:
            rows.append([eps.degrees, p.name, p.location.u, p.location.v, p.location.w, p.purity, p.multiplier, p.stability.value, p.period])
        qio.write_csv(args.csv, ["eps_deg", "point", "u", "v", "w", "purity", "lambda", "stability", "period"], rows)
        _sidecar(args, args.csv)
    _emit(args, payload)
    return 0


def cmd_cycles(args) -> int:
    eps = _eps(args)
    payload = {
        "eps": eps.epsilon,
        "eps_deg": eps.degrees,
        "pure_two_cycle": [p.to_dict() for p in pure_two_cycles(eps, include_complex=args.complex)],
        "c0_multiplier": c0_multiplier(eps),
    }
    if args.seed_point:
        cyc = detect_mixed_attractor(BlochVector(*args.seed_point), eps)
        d = cyc.to_dict()
        d["orbit"] = d.get("orbit", [])[: cyc.period]
        payload["detected_cycle"] = d
    _emit(args, payload)
    return 0


def cmd_julia(args) -> int:
    eps = _eps(args)
    cloud = julia_cloud(eps, args.depth, args.mode, args.seed, args.transient, args.orbits, _threads(args))
    z = cloud.points
    rows = ([float(a.real), float(a.imag)] if np.isfinite(a) else ["inf", "inf"] for a in z)
    qio.write_csv(args.out, ["x", "y"], rows)
    _sidecar(args, args.out)
    _emit(args, {"eps": eps.epsilon, "points": len(cloud), "out": str(args.out), "start": [cloud.start.real, cloud.start.imag]})
    return 0


def cmd_quasi_julia(args) -> int:
    eps = _eps(args)
    start = BlochVector(*args.start) if args.start else find_c3(eps).location
    cloud = quasi_julia_cloud(start, eps, args.depth, args.mode, args.seed, args.transient, args.orbits, _threads(args))
    qio.write_csv(args.out, ["u", "v", "w"], (list(map(float, p)) for p in cloud.points))
    _sidecar(args, args.out)
    pur = cloud.purities()
    _emit(args, {"eps": eps.epsilon, "points": len(cloud), "min_purity": float(pur.min()), "out": str(args.out)})
    return 0


def cmd_critical_purity(args) -> int:
    rep = critical_purity_report(_eps(args), args.depth)
    _emit(args, rep.to_dict())
    return 0


def _surface(args) -> Surface:
    if args.surface == "plane":
        return Surface.plane()
    if args.purity is None:
        raise UsageError("--surface sphere needs --purity")
    return Surface.sphere(args.purity)


def cmd_basin(args) -> int:
    eps = _eps(args)
    surf = _surface(args)
    vp = args.viewport or (PLANE_VIEWPORT if surf.kind == "plane" else SPHERE_VIEWPORT)
    w, h = args.res
    g = render(surf, vp, w, h, eps, args.r, args.max_iter, _threads(args))
    g.write_ppm(args.out)
    _sidecar(args, args.out)
    if args.labels:
        g.write_csv(args.labels)
    _emit(args, {"eps": eps.epsilon, "counts": g.counts(), "out": str(args.out), "labels": args.labels})
    return 0


def cmd_montecarlo(args) -> int:
    eps = _eps(args)
    r = "auto" if args.r == "auto" else float(args.r)
    res = monte_carlo_divergence(eps, args.n, r, args.max_iter, args.seed, args.measure, _threads(args))
    _emit(args, res.to_dict())
    return 0


def cmd_dimension(args) -> int:
    eps = _eps(args)
    g = render(Surface.sphere(args.purity), args.viewport or SPHERE_VIEWPORT, args.res, args.res, eps, args.r, args.max_iter, _threads(args))
    est = box_count_dimension(extract_boundary(g, args.policy), offsets=args.offsets)
    payload = {"eps": eps.epsilon, "purity": args.purity, "res": args.res, **est.to_dict()}
    if args.out:
        qio.write_json(args.out, payload)
        _sidecar(args, args.out)
    sys.stdout.write(qio.dumps(payload))
    return 0


def cmd_scan(args) -> int:
    eps = _eps(args)
    threads = _threads(args)
    curve = dimension_vs_purity(eps, args.purities, args.res, args.viewport or SPHERE_VIEWPORT, args.r, args.max_iter, threads=threads)
    qio.write_csv(
        args.out,
        ["P", "d", "stderr", "fit_r2", "boundary_pixels", "contact"],
        ([r["P"], r["d"], r["stderr"], r["fit_r2"], r["boundary_pixels"], r["contact"]] for r in (p.row() for p in curve)),
    )
    _sidecar(args, args.out)
    probe = None
    if args.bisect:
        def probe(P):
            return scan_point(eps, P, args.res, args.viewport or SPHERE_VIEWPORT, args.r, args.max_iter, threads=threads)
    payload = {"eps": eps.epsilon, "eps_deg": eps.degrees, "out": str(args.out)}
    for method in ("contact", "tau"):
        try:
            payload[method] = estimate_critical_purity_from_scan(curve, method, probe if method == args.method else None).to_dict()
        except NoTransition as exc:
            payload[method] = {"error": "NoTransition", "message": str(exc)}
    payload["p_c_est"] = payload[args.method].get("p_c_est")
    _emit(args, payload)
    return 0


def cmd_oracle_check(args) -> int:
    rep = oracle_report(args.n, args.seed)
    rep["tolerance"] = ORACLE_TOL
    rep["pass"] = rep["max_error"] < ORACLE_TOL
    _emit(args, rep)
    return 0 if rep["pass"] else 1


# --------------------------------------------------------------------------
# figure pipelines


def _render_fig(outdir, name, surface, eps_deg, res, threads, viewport=None):
    vp = viewport or (PLANE_VIEWPORT if surface.kind == "plane" else SPHERE_VIEWPORT)
    g = render(surface, vp, res, res, ErrorAngle.from_degrees(eps_deg), threads=threads)
    path = Path(outdir) / f"{name}.ppm"
    g.write_ppm(path)
    return {"file": str(path), "eps_deg": eps_deg, "counts": g.counts()}


def _julia_fig(outdir, name, eps_deg, seed=0):
    cloud = julia_cloud(ErrorAngle.from_degrees(eps_deg), 50_000, Mode.RANDOM_BRANCH, seed)
    path = Path(outdir) / f"{name}.csv"
    qio.write_csv(path, ["x", "y"], ([float(a.real), float(a.imag)] if np.isfinite(a) else ["inf", "inf"] for a in cloud.points))
    return {"file": str(path), "eps_deg": eps_deg, "points": len(cloud)}


def _sweep_csv(outdir, name, header, rows):
    path = Path(outdir) / f"{name}.csv"
    qio.write_csv(path, header, rows)
    return {"file": str(path)}


_FIG_EPS = {"a": 1.8, "b": 4.5, "c": -1.8, "d": -4.5}
_FIG13_EPS = {"a": 27.0, "b": 45.0, "c": -27.0, "d": -45.0}
_FIG9_EPS = {"a": 0.0, "b": 0.9, "c": 4.5, "d": -0.9, "e": -4.5}
TABLE_IV_EPS = (4.5, 2.7, 1.8, 0.9, 0.0, -0.9, -1.8, -2.7, -4.5)


def _figure(fig: str, outdir: str, res: int | None, n: int, threads) -> dict:
    sph = Surface.sphere
    if fig in ("2a", "2b", "2c"):
        P = {"2a": 1.0, "2b": 0.95, "2c": 0.75}[fig]
        out = _render_fig(outdir, f"fig{fig}", sph(P), 0.0, res or 1024, threads)
        if fig == "2b":
            out["julia"] = _julia_fig(outdir, "fig2b_julia", 0.0)
        return out
    if fig == "2d":
        return _render_fig(outdir, "fig2d", Surface.plane(), 0.0, res or 1024, threads)
    if fig[:1] == "4" and fig[1:] in _FIG_EPS:
        return _render_fig(outdir, f"fig{fig}", Surface.plane(), _FIG_EPS[fig[1:]], res or 1024, threads)
    if fig[:1] == "7" and fig[1:] in _FIG_EPS:
        return _render_fig(outdir, f"fig{fig}", sph(0.95), _FIG_EPS[fig[1:]], res or 1024, threads)
    if fig.startswith("13") and fig[2:] in _FIG13_EPS:
        return _render_fig(outdir, f"fig{fig}", Surface.plane(), _FIG13_EPS[fig[2:]], res or 512, threads)
    if fig.startswith("14") and fig[2:] in _FIG13_EPS:
        e = _FIG13_EPS[fig[2:]]
        out = _render_fig(outdir, f"fig{fig}", sph(1.0), e, res or 512, threads)
        out["julia"] = _julia_fig(outdir, f"fig{fig}_julia", e)
        return out
    if fig in ("5a", "5c", "5e"):
        return _julia_fig(outdir, f"fig{fig}", {"5a": 0.0, "5c": 4.5, "5e": -4.5}[fig])
    if fig == "6":
        rows = []
        for d in range(-10, 11):
            g = render(sph(1.0), SPHERE_VIEWPORT, res or 1024, res or 1024, ErrorAngle.from_degrees(d), threads=threads)
            est = box_count_dimension(extract_boundary(g))
            rows.append([float(d), est.d, est.stderr, est.fit_r2])
        return _sweep_csv(outdir, "fig6", ["eps_deg", "d", "stderr", "fit_r2"], rows)
    if fig == "8":
        rows = []
        for d in np.arange(-10.0, 10.01, 1.0):
            r = monte_carlo_divergence(ErrorAngle.from_degrees(float(d)), n=n, seed=0, threads=threads)
            rows.append([float(d), r.delta, r.purified_pct])
        return _sweep_csv(outdir, "fig8", ["eps_deg", "delta", "purified_pct"], rows)
    if fig[:1] == "9" and fig[1:] in _FIG9_EPS:
        e = ErrorAngle.from_degrees(_FIG9_EPS[fig[1:]])
        curve = dimension_vs_purity(e, purity_range("0.6:1.0:0.025"), res or 512, threads=threads)
        out = _sweep_csv(outdir, f"fig{fig}", ["P", "d", "stderr", "fit_r2", "boundary_pixels", "contact"],
                         ([r["P"], r["d"], r["stderr"], r["fit_r2"], r["boundary_pixels"], r["contact"]] for r in (p.row() for p in curve)))
        try:
            out["p_c_est"] = estimate_critical_purity_from_scan(curve).p_c_est
        except NoTransition:
            out["p_c_est"] = None
        return out
    if fig == "10":
        rows = []
        for d in TABLE_IV_EPS:
            rep = critical_purity_report(ErrorAngle.from_degrees(d))
            rows.append([d, rep.p3, rep.p_c])
        return _sweep_csv(outdir, "fig10", ["eps_deg", "p3", "p_c"], rows)
    if fig == "11":
        rows = []
        for d in np.arange(-10.0, 9.01, 0.5):
            c3 = find_c3(ErrorAngle.from_degrees(float(d)))
            rows.append([float(d), c3.purity, c3.location.u, c3.location.w, c3.multiplier])
        return _sweep_csv(outdir, "fig11", ["eps_deg", "p3", "u", "w", "lambda"], rows)
    if fig == "12":
        rows = [[float(d), c0_multiplier(ErrorAngle.from_degrees(float(d)))] for d in np.arange(-90.0, 90.01, 1.0)]
        return _sweep_csv(outdir, "fig12", ["eps_deg", "lambda_c0"], rows)
    raise UsageError(f"unknown figure id {fig!r}; known: {', '.join(FIGURE_IDS)}")


FIGURE_IDS = (
    ["2a", "2b", "2c", "2d"]
    + [f"4{k}" for k in "abcd"]
    + ["5a", "5c", "5e", "6"]
    + [f"7{k}" for k in "abcd"]
    + ["8"]
    + [f"9{k}" for k in "abcde"]
    + ["10", "11", "12"]
    + [f"13{k}" for k in "abcd"]
    + [f"14{k}" for k in "abcd"]
)


def cmd_repro_figure(args) -> int:
    Path(args.outdir).mkdir(parents=True, exist_ok=True)
    if args.id not in FIGURE_IDS:
        raise UsageError(f"unknown figure id {args.id!r}; known: {', '.join(FIGURE_IDS)}")
    payload = {"figure": args.id, **_figure(args.id, args.outdir, args.res, args.n, _threads(args))}
    manifest = Path(args.outdir) / f"fig{args.id}.json"
    qio.write_json(manifest, payload)
    _sidecar(args, manifest)
    sys.stdout.write(qio.dumps(payload))
    return 0


def cmd_replay(args) -> int:
    side = qio.read_sidecar(args.sidecar)
    return main(side["argv"])


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: $QCHAOS_THREADS or all cores)")
    ang = argparse.ArgumentParser(add_help=False)
    ang.add_argument("--eps", type=float, required=True, help="coherent error angle")
    ang.add_argument("--unit", choices=["deg", "pct", "rad"], default="deg", help="unit of --eps (pct = percent of 90 deg)")
    jout = argparse.ArgumentParser(add_help=False)
    jout.add_argument("--json-out", default=None, help="also write the JSON summary to this file")
    cls = argparse.ArgumentParser(add_help=False)
    cls.add_argument("--r", type=float, default=1e-3, help="attractor ball radius")
    cls.add_argument("--max-iter", type=int, default=200)

    p = argparse.ArgumentParser(prog="qchaos", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qchaos {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fixed-points", parents=[common, ang, jout], help="attractor inventory as JSON (and CSV)")
    s.add_argument("--csv", default=None, help="table of fixed points and cycles")
    s.set_defaults(func=cmd_fixed_points)

    s = sub.add_parser("cycles", parents=[common, ang, jout], help="pure 2-cycle and numerical cycle detection")
    s.add_argument("--seed-point", type=_vector, default=None, help="u,v,w to start cycle detection from")
    s.add_argument("--complex", action="store_true", help="also report a complex (off-plane) pure 2-cycle")
    s.set_defaults(func=cmd_cycles)

    for name, func, default_depth in (("julia", cmd_julia, 50_000), ("quasi-julia", cmd_quasi_julia, 50_000)):
        s = sub.add_parser(name, parents=[common, ang, jout], help=f"{name} point cloud by backward iteration")
        s.add_argument("--depth", type=int, default=default_depth, help="tree depth (full) or orbit length (random)")
        s.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.RANDOM_BRANCH.value)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--orbits", type=int, default=1)
        s.add_argument("--transient", type=int, default=20 if name == "julia" else 0)
        s.add_argument("--out", required=True, help="CSV output")
        if name == "quasi-julia":
            s.add_argument("--start", type=_vector, default=None, help="u,v,w (default: C3)")
        s.set_defaults(func=func)

    s = sub.add_parser("critical-purity", parents=[common, ang, jout], help="lowest-purity preimage of C3")
    s.add_argument("--depth", type=int, default=4)
    s.set_defaults(func=cmd_critical_purity)

    s = sub.add_parser("basin", parents=[common, ang, jout, cls], help="render a basin map")
    s.add_argument("--surface", choices=["plane", "sphere"], default="plane")
    s.add_argument("--purity", type=float, default=None)
    s.add_argument("--viewport", type=_viewport, default=None, help="xmin,xmax,ymin,ymax")
    s.add_argument("--res", type=_res, default=(512, 512), help="N or WxH")
    s.add_argument("--out", required=True, help="PPM (P6) output")
    s.add_argument("--labels", default=None, help="per-pixel CSV output")
    s.set_defaults(func=cmd_basin)

    s = sub.add_parser("montecarlo", parents=[common, ang, jout], help="divergence ratio over random initial states")
    s.add_argument("--n", type=int, default=1_000_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--r", default="auto", help="ball radius or 'auto' (1.5x attractor displacement)")
    s.add_argument("--max-iter", type=int, default=1000)
    s.add_argument("--measure", choices=["volume", "radial"], default="volume")
    s.set_defaults(func=cmd_montecarlo)

    s = sub.add_parser("dimension", parents=[common, ang, cls], help="box-counting dimension on one purity sphere")
    s.add_argument("--purity", type=float, required=True)
    s.add_argument("--res", type=int, default=1024)
    s.add_argument("--viewport", type=_viewport, default=None)
    s.add_argument("--policy", choices=[b.value for b in BoundaryPolicy], default=BoundaryPolicy.PURE_ONLY.value)
    s.add_argument("--offsets", action="store_true", help="average over 4 grid offsets")
    s.add_argument("--out", default=None, help="JSON fit output")
    s.set_defaults(func=cmd_dimension)

    s = sub.add_parser("scan", parents=[common, ang, jout, cls], help="d(P) curve and critical-purity estimate")
    s.add_argument("--purities", type=purity_range, default=purity_range("0.625:1.0:0.025"))
    s.add_argument("--res", type=int, default=512)
    s.add_argument("--viewport", type=_viewport, default=None)
    s.add_argument("--method", choices=["contact", "tau"], default="contact")
    s.add_argument("--no-bisect", dest="bisect", action="store_false")
    s.add_argument("--out", default="curve.csv")
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("oracle-check", parents=[common, jout], help="closed forms vs two-qubit circuit")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--seed", type=int, default=7)
    s.set_defaults(func=cmd_oracle_check)

    s = sub.add_parser("repro-figure", parents=[common], help="pinned pipeline for one figure")
    s.add_argument("--id", required=True, help=", ".join(FIGURE_IDS))
    s.add_argument("--outdir", default="figures")
    s.add_argument("--res", type=int, default=None)
    s.add_argument("--n", type=int, default=100_000, help="Monte Carlo samples (figure 8)")
    s.set_defaults(func=cmd_repro_figure)

    s = sub.add_parser("replay", help="re-run the command recorded in a sidecar")
    s.add_argument("sidecar")
    s.set_defaults(func=cmd_replay)
    return p


def _resolved_argv(parser: argparse.ArgumentParser, args) -> list[str]:
    """Canonical argv with every option spelled out, so defaults are pinned."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[args.command]
    out = [args.command]
    for act in sp._actions:
        if act.dest in ("help", "func") or not act.option_strings:
            if not act.option_strings and act.dest not in ("help",):
                out.append(str(getattr(args, act.dest)))
            continue
        val = getattr(args, act.dest, None)
        if isinstance(act, argparse._StoreTrueAction):
            if val:
                out.append(act.option_strings[0])
            continue
        if isinstance(act, argparse._StoreFalseAction):
            if not val:
                out.append(act.option_strings[0])
            continue
        if val is None:
            continue
        if act.dest == "threads":
            continue  # outputs do not depend on it
        if isinstance(val, (list, tuple)):
            if act.dest == "res":
                val = f"{val[0]}x{val[1]}"
            else:
                val = ",".join(repr(float(v)) for v in val)
        # "--opt=value" keeps values such as "-2.4,2.4,..." from parsing as options
        out.append(f"{act.option_strings[0]}={val}")
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "replay":
        args._resolved_argv = _resolved_argv(parser, args)
        args._config = {k: v for k, v in vars(args).items() if not k.startswith("_") and k != "func"}
    try:
        return args.func(args)
    except (UsageError, InvalidViewport, DepthTooLarge) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"qchaos: error: {exc}\n")
        return 2
    except (NoC3, DeadEnd, EmptyMask, NoTransition, NotFound, ArithmeticError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
