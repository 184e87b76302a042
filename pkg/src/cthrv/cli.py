"""``cthrv`` command line entry point.

Every subcommand writes its outputs plus one ``<output>.manifest.json``
recording the resolved configuration, seed, paths, version and per-phase
wall-clock time. Without ``--output`` results go to stdout and the manifest
to stderr.

Exit codes: 0 success, 2 usage/validation, 3 data error, 4 estimation error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import backend_name
from .batch import BatchConfig, fit_batch
from .errors import CTHRVError, DataError, ValidationError
from .least_squares import fit_least_squares
from .metrics import fit_report
from .model import ModelParams, string_stability
from .particle_filter import PFConfig, fit_particle_filter
from .simulate import (BENCHMARK_PARAMS, BENCHMARK_S0, BENCHMARK_V0, LeadProfileSpec,
                       benchmark_lead_spec, generate_lead_profile, simulate_follower)
from .trajectory import TrajectoryFormat, compare_sensors, load_trajectory, trajectory_to_csv

METHODS = ("batch", "ls", "pf")
TABLE_ROWS = ("k1", "k2", "tau", "runtime_s", "mae_speed", "mae_spacing", "stability")


class Run:
    """Collects manifest content for one invocation."""

    def __init__(self, args):
        self.args = args
        self.manifest = {
            "subcommand": args.command,
            "version": __version__,
            "backend": backend_name(),
            "seed": getattr(args, "seed", None),
            "inputs": {},
            "outputs": [],
            "config": {},
            "runtime_s": {},
        }

    def phase(self, name):
        run = self

        class _Timer:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                run.manifest["runtime_s"][name] = time.perf_counter() - self.t

        return _Timer()

    def write_text(self, text, path=None):
        path = path if path is not None else self.args.output
        if path is None:
            sys.stdout.write(text)
        else:
            Path(path).write_text(text, encoding="utf-8")
            self.manifest["outputs"].append(str(path))

    def finish(self, exit_code, error=None):
        self.manifest["status"] = "success" if exit_code == 0 else "error"
        self.manifest["exit_code"] = exit_code
        if error is not None:
            self.manifest["error"] = error
        text = json.dumps(self.manifest, indent=2, default=_jsonable) + "\n"
        if self.args.output is None:
            sys.stderr.write(text)
        else:
            Path(_manifest_path(self.args.output)).write_text(text, encoding="utf-8")


def _manifest_path(output):
    return str(output) + ".manifest.json"


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x)}")


def dumps(obj):
    return json.dumps(obj, indent=2, default=_jsonable) + "\n"


def _read_json(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None


def _load_input(args):
    if args.input is None:
        raise ValidationError("--input is required")
    path = Path(args.input)
    if path.is_file() and path.stat().st_size == 0:
        raise ValidationError(f"input file {args.input} is empty")
    try:
        return load_trajectory(args.input, TrajectoryFormat(args.input_format))
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc}") from None


# ---------------------------------------------------------------------------
# estimator dispatch shared by `fit` and `benchmark`


def method_config(method, raw, seed=None):
    """Resolve a method config from a JSON dict (flat, or keyed by method name)."""
    if method in raw and isinstance(raw[method], dict):
        raw = raw[method]
    elif any(m in raw for m in METHODS):
        raw = {}
    raw = dict(raw)
    if seed is not None:
        raw["seed"] = seed
    if method == "batch":
        return BatchConfig.from_dict(raw)
    if method == "pf":
        return PFConfig.from_dict(raw)
    if raw and set(raw) != {"seed"}:
        raise ValidationError(f"least squares takes no configuration, got {sorted(raw)}")
    return None


def estimate(traj, method, config):
    """Run one estimator; returns ``(params, runtime_s, extras, raw_result)``."""
    t = time.perf_counter()
    if method == "ls":
        res = params = fit_least_squares(traj)
        extras = {}
    elif method == "batch":
        res = fit_batch(traj, config)
        params = res.params
        extras = {"objective": res.objective}
    elif method == "pf":
        res = fit_particle_filter(traj, config)
        params = res.params
        extras = {"instability_probability": res.instability_probability,
                  "n_degenerate": res.n_degenerate, "clamp_events": res.clamp_events}
    else:
        raise ValidationError(f"unknown method {method!r}")
    return params, time.perf_counter() - t, extras, res


def estimation_report(traj, method, config, keep=None):
    """Estimate, then score; ``keep`` (a dict) receives the raw estimator result."""
    params, runtime, extras, raw = estimate(traj, method, config)
    if keep is not None:
        keep["result"] = raw
    report = {"method": method, "params": params.to_dict(), "runtime_s": runtime}
    report.update(extras)
    try:
        verdict = string_stability(params)
        report["stability"] = verdict.to_dict()
    except ValidationError as exc:
        report["stability"] = {"lambda": None, "classification": None, "error": str(exc)}
    fr = fit_report(traj, params)
    report["fit"] = fr.to_dict()
    report["mae_speed"] = fr.mae_speed
    report["mae_spacing"] = fr.mae_spacing
    return report


def _stability_cell(report):
    cls = report["stability"]["classification"]
    if cls is None:
        return "undefined"
    label = "string " + cls
    if "instability_probability" in report:
        label += f" ({100 * report['instability_probability']:.2f}% likely unstable)"
    return label


def table_column(report):
    p = report["params"]
    return {"k1": p["k1"], "k2": p["k2"], "tau": p["tau"], "runtime_s": report["runtime_s"],
            "mae_speed": report["mae_speed"], "mae_spacing": report["mae_spacing"],
            "stability": _stability_cell(report)}


def table_csv(columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["criterion"] + list(METHODS))
    for row in TABLE_ROWS:
        cells = []
        for m in METHODS:
            col = columns[m]
            if "error" in col:
                cells.append("error: " + col["error"]["message"])
            else:
                val = col[row]
                cells.append(format(val, ".17g") if isinstance(val, float) else str(val))
        w.writerow([row] + cells)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args, run):
    raw = _read_json(args.config)
    params = ModelParams.from_dict(raw.get("params", dict(zip(("k1", "k2", "tau"), BENCHMARK_PARAMS))))
    lead = LeadProfileSpec.from_dict(raw["lead"]) if "lead" in raw else benchmark_lead_spec()
    if args.seed is not None:
        lead = LeadProfileSpec(lead.duration, lead.dt, lead.base_speed, lead.events, args.seed, lead.jitter_std)
    v0 = float(raw.get("v0", BENCHMARK_V0))
    s0 = float(raw.get("s0", BENCHMARK_S0))
    if not s0 > 0:
        raise ValidationError(f"s0 must be > 0, got {s0}")
    if not v0 >= 0:
        raise ValidationError(f"v0 must be >= 0, got {v0}")
    run.manifest["config"] = {"params": params.to_dict(), "lead": lead.to_dict(), "v0": v0, "s0": s0}
    run.manifest["seed"] = lead.seed
    with run.phase("simulate"):
        v_l = generate_lead_profile(lead)
        traj = simulate_follower(params, v_l, v0, s0, lead.dt)
    run.write_text(trajectory_to_csv(traj))


def _read_lead_csv(path):
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if len(rows) < 2:
        raise DataError("lead CSV needs at least 2 rows")
    if "time" not in rows[0] or "v_l" not in rows[0]:
        raise DataError("lead CSV needs 'time' and 'v_l' columns")
    try:
        t = np.array([float(r["time"]) for r in rows])
        v_l = np.array([float(r["v_l"]) for r in rows])
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad number in lead CSV: {exc}") from None
    dt = round(float(t[1] - t[0]), 9)
    if not dt > 0 or np.any(np.abs(np.diff(t) - dt) > 1e-6):
        raise DataError("lead CSV timestamps must be uniform and increasing")
    return t[0], dt, v_l


def _params_from_args(args):
    if args.config is not None:
        raw = _read_json(args.config)
        raw = raw.get("params", raw)
        return ModelParams.from_dict(raw)
    if None in (args.k1, args.k2, args.tau):
        raise ValidationError("give --k1, --k2 and --tau (or --config)")
    return ModelParams(args.k1, args.k2, args.tau)


def cmd_simulate(args, run):
    params = _params_from_args(args)
    if args.input is None:
        raise ValidationError("--input (lead speed CSV) is required")
    t0, dt, v_l = _read_lead_csv(args.input)
    v0 = float(v_l[0]) if args.v0 is None else args.v0
    s0 = params.tau * v0 if args.s0 is None else args.s0
    run.manifest["inputs"]["lead"] = args.input
    run.manifest["config"] = {"params": params.to_dict(), "v0": v0, "s0": s0, "dt": dt}
    with run.phase("simulate"):
        traj = simulate_follower(params, v_l, v0, s0, dt, t0=t0)
    run.write_text(trajectory_to_csv(traj))


def cmd_fit(args, run):
    traj = _load_input(args)
    run.manifest["inputs"]["trajectory"] = args.input
    config = method_config(args.method, _read_json(args.config), args.seed)
    run.manifest["config"] = {"method": args.method, args.method: config.to_dict() if config else {}}
    if args.trace is not None and args.method != "pf":
        raise ValidationError("--trace is only available with --method pf")
    keep = {}
    with run.phase("estimate"):
        report = estimation_report(traj, args.method, config, keep)
    run.manifest["runtime_s"]["estimator"] = report["runtime_s"]
    if args.trace is not None:
        run.write_text(posterior_trace_csv(traj, keep["result"]), Path(args.trace))
    if args.format == "csv":
        col = table_column(report)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_ROWS)
        w.writerow([format(col[r], ".17g") if isinstance(col[r], float) else col[r] for r in TABLE_ROWS])
        run.write_text(buf.getvalue())
    else:
        run.write_text(dumps(report))


def posterior_trace_csv(traj, result):
    """Per-step posterior mean and std of the augmented state, one row per sample."""
    names = ("s", "v", "k1", "k2", "tau")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time"] + [f"mean_{n}" for n in names] + [f"std_{n}" for n in names])
    for t, m, s in zip(traj.time, result.mean, result.std):
        w.writerow([format(float(x), ".17g") for x in (t, *m, *s)])
    return buf.getvalue()


def cmd_benchmark(args, run):
    traj = _load_input(args)
    run.manifest["inputs"]["trajectory"] = args.input
    raw = _read_json(args.config)
    columns, reports, resolved = {}, {}, {}
    for m in METHODS:
        try:
            cfg = method_config(m, raw, args.seed)
            resolved[m] = cfg.to_dict() if cfg else {}
            with run.phase(m):
                rep = estimation_report(traj, m, cfg)
            reports[m] = rep
            columns[m] = table_column(rep)
        except CTHRVError as exc:
            err = {"type": type(exc).__name__, "message": str(exc)}
            reports[m] = {"method": m, "error": err}
            columns[m] = {"error": err}
    run.manifest["config"] = resolved
    table = table_csv(columns)
    payload = {"rows": list(TABLE_ROWS), "columns": columns, "reports": reports}
    if args.output is None:
        run.write_text(table if args.format == "csv" else dumps(payload))
        return
    base = Path(args.output)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    run.write_text(table, Path(str(base) + ".csv"))
    run.write_text(dumps(payload), Path(str(base) + ".json"))


def cmd_stability(args, run):
    if args.input is not None:
        raw = _read_json(args.input)
        params = ModelParams.from_dict(raw.get("params", raw))
        run.manifest["inputs"]["report"] = args.input
    else:
        params = _params_from_args(args)
    run.manifest["config"] = {"params": params.to_dict()}
    verdict = string_stability(params)
    out = {"params": params.to_dict()}
    out.update(verdict.to_dict())
    run.write_text(dumps(out))


def cmd_compare_sensors(args, run):
    radar = load_trajectory(args.radar, TrajectoryFormat(args.input_format))
    gps = load_trajectory(args.gps, TrajectoryFormat(args.input_format))
    run.manifest["inputs"] = {"radar": args.radar, "gps": args.gps}
    run.manifest["config"] = {"bin_width_gap": args.bin_width_gap, "bin_width_speed": args.bin_width_speed}
    with run.phase("compare"):
        cmp = compare_sensors(radar, gps, args.bin_width_gap, args.bin_width_speed)
    run.write_text(dumps(cmp.to_dict()))


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="cthrv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, input_=True):
        p.add_argument("--output", "-o", default=None, help="output path (default: stdout)")
        p.add_argument("--config", default=None, help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="RNG seed override")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        if input_:
            p.add_argument("--input", "-i", default=None)
            p.add_argument("--input-format", default=TrajectoryFormat.LEAD_SPEED.value,
                           choices=[f.value for f in TrajectoryFormat])

    def param_flags(p):
        p.add_argument("--k1", type=float)
        p.add_argument("--k2", type=float)
        p.add_argument("--tau", type=float)

    p = sub.add_parser("generate", help="synthetic lead profile + follower trajectory")
    common(p, input_=False)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="simulate a follower behind a lead speed CSV")
    common(p)
    param_flags(p)
    p.add_argument("--v0", type=float, default=None)
    p.add_argument("--s0", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="estimate parameters from a trajectory CSV")
    common(p)
    p.add_argument("--method", choices=("ls", "batch", "pf"), required=True)
    p.add_argument("--trace", default=None, help="pf only: write per-step posterior CSV here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("benchmark", help="run all three estimators on one trajectory")
    common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("stability", help="string stability verdict for a parameter set")
    common(p)
    param_flags(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("compare-sensors", help="radar-vs-GPS difference statistics")
    common(p, input_=False)
    p.add_argument("radar")
    p.add_argument("gps")
    p.add_argument("--input-format", default=TrajectoryFormat.LEAD_SPEED.value,
                   choices=[f.value for f in TrajectoryFormat])
    p.add_argument("--bin-width-gap", type=float, default=0.1)
    p.add_argument("--bin-width-speed", type=float, default=0.05)
    p.set_defaults(func=cmd_compare_sensors)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    run = Run(args)
    try:
        args.func(args, run)
    except CTHRVError as exc:
        err = {"type": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(f"cthrv {args.command}: {exc}\n")
        if args.command == "fit" and args.output is not None:
            Path(args.output).write_text(dumps({"method": args.method, "error": err}), encoding="utf-8")
            run.manifest["outputs"].append(args.output)
        run.finish(exc.exit_code, err)
        return exc.exit_code
    run.finish(0)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
