"""Command line driver.

Four subcommands: ``generate`` (benchmark model bundles), ``reduce``
(config-file driven reduction), ``analyze`` (frequency-domain error sweep)
and ``simulate`` (time-domain response, optionally against a reference
model).  Exit codes: 0 success, 2 configuration problem, 3 numerical
failure.  ``SOLIMBT_THREADS`` caps the parallelism of frequency sweeps.
"""

import argparse
import json
import sys as _sys
import time

import numpy as np

from . import pipeline
from .errors import ConfigCategory, InvalidParams, NonFiniteState, SolimbtError
from .matfun import TWO_PI, FrequencyBand, TimeWindow
from .mmio import load_bundle, save_bundle
from .system import SineSignal, StepSignal, generate_chain, simulate


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float) and not np.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return f"{x:.17g}"


def _json_safe(x):
    if isinstance(x, float) and not np.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def _parse_intervals(text):
    out = []
    for part in text.split(";"):
        lo, hi = part.split(",")
        out.append((float(lo), float(hi)))
    return out


def _band_from(intervals, unit):
    if unit == "hz":
        return FrequencyBand.from_hz(intervals)
    if unit == "rad":
        return FrequencyBand(intervals)
    raise InvalidParams(f"unknown frequency unit {unit!r}")


def cmd_generate(args):
    sys = generate_chain(
        args.n, masses=args.mass,
        coupling_stiffness=args.coupling_stiffness,
        coupling_damping=args.coupling_damping)
    save_bundle(args.out, sys, name=args.name)
    print(f"wrote chain model n={args.n} to {args.out}")
    return 0


_CONFIG_KEYS = {
    "input", "output", "name", "method", "formula", "band", "window",
    "order", "alpha", "realization", "j", "gamma", "solver",
    "solver_options", "modified", "variant", "hybrid",
}
_SOLVER_OPTION_KEYS = {"tol", "maxiter", "compress_tol", "num_shifts",
                       "batch", "max_dim"}


def _load_job(path):
    with open(path) as fh:
        job = json.load(fh)
    if not isinstance(job, dict):
        raise InvalidParams("job config must be a JSON object")
    for key in job:
        if key not in _CONFIG_KEYS:
            raise InvalidParams(f"unknown config key {key!r}")
    for key in ("input", "output", "method"):
        if key not in job:
            raise InvalidParams(f"missing config key {key!r}")

    method = job["method"]
    band = window = None
    if method == "flbt":
        if "band" not in job:
            raise InvalidParams("missing config key 'band' (required for flbt)")
        entry = job["band"]
        band = _band_from(entry["intervals"], entry.get("unit", "hz"))
    elif "band" in job:
        raise InvalidParams("config key 'band' is only valid for method flbt")
    if method == "tlbt":
        if "window" not in job:
            raise InvalidParams("missing config key 'window' (required for tlbt)")
        entry = job["window"]
        window = TimeWindow(float(entry["t0"]), float(entry["tf"]))
    elif "window" in job:
        raise InvalidParams("config key 'window' is only valid for method tlbt")

    order = job.get("order", {})
    if not set(order) <= {"tol", "fixed"}:
        raise InvalidParams("config key 'order' accepts only 'tol' or 'fixed'")
    opts = job.get("solver_options", {})
    if not set(opts) <= _SOLVER_OPTION_KEYS:
        bad = sorted(set(opts) - _SOLVER_OPTION_KEYS)
        raise InvalidParams(f"unknown solver_options key(s) {bad}")

    hybrid = None
    if "hybrid" in job:
        h = job["hybrid"]
        if not set(h) <= {"points", "fmin", "fmax", "unit", "tol"}:
            raise InvalidParams("bad key inside 'hybrid'")
        scalefac = TWO_PI if h.get("unit", "hz") == "hz" else 1.0
        omegas = np.logspace(np.log10(h["fmin"] * scalefac),
                             np.log10(h["fmax"] * scalefac),
                             int(h.get("points", 200)))
        hybrid = (omegas, float(h.get("tol", 1e-12)))

    config = pipeline.ReductionConfig(
        method=method,
        formula=job.get("formula", "pv"),
        band=band, window=window,
        order_tol=float(order.get("tol", 1e-4)),
        fixed_order=order.get("fixed"),
        realization=job.get("realization", "companion"),
        j=job.get("j", "identity"),
        gamma=job.get("gamma"),
        alpha=float(job.get("alpha", 0.0)),
        solver=job.get("solver", "sign"),
        solver_options=opts,
        modified=bool(job.get("modified", False)),
        variant=job.get("variant", "left"),
        hybrid=hybrid)
    config.validate()
    return job, config


def cmd_reduce(args):
    job, config = _load_job(args.config)
    sys, name = load_bundle(job["input"])
    t0 = time.perf_counter()
    rom = pipeline.reduce(sys, config)
    wall = time.perf_counter() - t0
    out = job["output"]
    save_bundle(out, rom.system, name=job.get("name", name + "_rom"))
    report = {
        "rom_order": rom.r,
        "stable": rom.stable,
        "formula": rom.formula,
        "method": rom.method,
        "sigma": [_json_safe(float(s)) for s in rom.sigma[:50]],
        "truncated_sum": _json_safe(rom.truncated_tail),
        "timings": {k: round(v, 6) for k, v in rom.details["timings"].items()},
        "wall_time_s": round(wall, 6),
    }
    with open(f"{out}/report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"order {rom.r} ({rom.formula}, {rom.method}), "
          f"stable={rom.stable}, wrote {out}")
    return 0


def cmd_analyze(args):
    orig, _ = load_bundle(args.original)
    rom, _ = load_bundle(args.reduced)
    scale = TWO_PI if args.unit == "hz" else 1.0
    band = None
    if args.band:
        band = _band_from(_parse_intervals(args.band), args.unit)
    report = pipeline.frequency_error_report(
        orig, rom, args.fmin * scale, args.fmax * scale, args.points, band=band)
    with open(args.out, "w") as fh:
        fh.write("omega_rad_s,orig_norm,abs_err,rel_err\n")
        for w, on, ae, re_ in zip(report.grid, report.orig_norm,
                                  report.abs_err, report.rel_err):
            rel = "" if not np.isfinite(re_) else _fmt(re_)
            fh.write(f"{_fmt(w)},{_fmt(on)},{_fmt(ae)},{rel}\n")
    summary = {
        "global_max_abs": _json_safe(report.global_max_abs),
        "global_max_rel": _json_safe(report.global_max_rel),
        "local_max_abs": _json_safe(report.local_max_abs),
        "local_max_rel": _json_safe(report.local_max_rel),
        "points": int(report.grid.size),
        "skipped": report.skipped,
        "rom_stable": report.rom_stable,
    }
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def _signal_from(args):
    if args.signal == "step":
        return StepSignal(amplitude=args.amplitude, onset=args.onset)
    if args.signal == "sin":
        return SineSignal(amplitude=args.amplitude, omega=args.omega,
                          onset=args.onset, offset=args.offset)
    raise InvalidParams(f"unknown signal {args.signal!r}")


def cmd_simulate(args):
    sys, _ = load_bundle(args.model)
    signal = _signal_from(args)
    t = np.arange(0.0, args.tf + 0.5 * args.dt, args.dt) + args.t0
    window = None
    if args.window:
        lo, hi = args.window.split(",")
        window = TimeWindow(float(lo), float(hi))

    if args.reference:
        ref, _ = load_bundle(args.reference)
        try:
            report = pipeline.time_error_report(ref, sys, signal, t, window=window)
        except NonFiniteState:
            summary = {"global_max_abs": "inf", "global_max_rel": "inf",
                       "local_max_abs": "inf", "local_max_rel": "inf",
                       "diverged": True}
            if args.summary:
                with open(args.summary, "w") as fh:
                    json.dump(summary, fh, indent=2, sort_keys=True)
                    fh.write("\n")
            print(json.dumps(summary, sort_keys=True), file=_sys.stderr)
            return 3
        traj = simulate(sys, signal, t)
        with open(args.out, "w") as fh:
            heads = [f"y_{i+1}" for i in range(traj.outputs.shape[1])]
            fh.write("t_s," + ",".join(heads) + ",abs_err,rel_err\n")
            for k in range(t.size):
                row = [_fmt(t[k])] + [_fmt(v) for v in traj.outputs[k]]
                rel = report.rel_err[k]
                row += [_fmt(report.abs_err[k]),
                        "" if not np.isfinite(rel) else _fmt(rel)]
                fh.write(",".join(row) + "\n")
        summary = {
            "global_max_abs": _json_safe(report.global_max_abs),
            "global_max_rel": _json_safe(report.global_max_rel),
            "local_max_abs": _json_safe(report.local_max_abs),
            "local_max_rel": _json_safe(report.local_max_rel),
        }
    else:
        try:
            traj = simulate(sys, signal, t)
        except NonFiniteState:
            summary = {"global_max_abs": "inf", "diverged": True}
            if args.summary:
                with open(args.summary, "w") as fh:
                    json.dump(summary, fh, indent=2, sort_keys=True)
                    fh.write("\n")
            print(json.dumps(summary, sort_keys=True), file=_sys.stderr)
            return 3
        with open(args.out, "w") as fh:
            heads = [f"y_{i+1}" for i in range(traj.outputs.shape[1])]
            fh.write("t_s," + ",".join(heads) + "\n")
            for k in range(t.size):
                row = [_fmt(t[k])] + [_fmt(v) for v in traj.outputs[k]]
                fh.write(",".join(row) + "\n")
        summary = {"outputs": traj.outputs.shape[1], "points": int(t.size)}
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="solimbt")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a benchmark model bundle")
    g.add_argument("--model", choices=["chain"], default="chain")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--mass", type=float, default=100.0)
    g.add_argument("--coupling-stiffness", type=float, default=2.0)
    g.add_argument("--coupling-damping", type=float, default=5.0)
    g.add_argument("--name", default="chain")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("reduce", help="run a reduction job from a JSON config")
    r.add_argument("--config", required=True)
    r.set_defaults(func=cmd_reduce)

    a = sub.add_parser("analyze", help="frequency-domain error sweep")
    a.add_argument("--original", required=True)
    a.add_argument("--reduced", required=True)
    a.add_argument("--fmin", type=float, required=True)
    a.add_argument("--fmax", type=float, required=True)
    a.add_argument("--points", type=int, default=500)
    a.add_argument("--unit", choices=["hz", "rad"], default="hz")
    a.add_argument("--band", help="interval list 'a,b[;c,d]' in --unit")
    a.add_argument("--out", required=True)
    a.add_argument("--summary")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="time-domain response")
    s.add_argument("--model", required=True)
    s.add_argument("--reference", help="bundle to compare against")
    s.add_argument("--signal", choices=["step", "sin"], default="step")
    s.add_argument("--amplitude", type=float, default=1.0)
    s.add_argument("--omega", type=float, default=1.0)
    s.add_argument("--onset", type=float, default=0.0)
    s.add_argument("--offset", type=float, default=0.0)
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--tf", type=float, required=True)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--window", help="'t0,tf' for local error maxima")
    s.add_argument("--out", required=True)
    s.add_argument("--summary")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigCategory as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return 2
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return 2
    except SolimbtError as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return 3


if __name__ == "__main__":
    _sys.exit(main())
