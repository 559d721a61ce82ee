"""Command-line interface.

::

    ifp check    --config PATH [--out DIR]
    ifp solve    --config PATH [--out DIR] [--tol X] [--max-iter N] [--grid-points N]
    ifp simulate --config PATH [--policy CSV] [--n-paths N] [--horizon T] [--full] ...
    ifp tail     --config PATH [--policy CSV] [--panel CSV] [--s-max S]
    ifp sweep    --config PATH --x NAME:LO:HI:COUNT --y NAME:LO:HI:COUNT --quantity Q
    ifp replay   MANIFEST [--threads N] [--out DIR]

Every command takes ``--out``, ``--seed`` and ``--threads`` (falling back to
``IFP_THREADS``) and writes ``manifest_<command>.json`` next to its outputs.

Exit codes: 0 success, 1 replay mismatch, 2 a model condition fails,
3 bad input, 4 no convergence.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import artifacts, config as cfg, dynamics, solver, tail
from ._accel import backend_name, set_threads
from .errors import (
    AssumptionViolated,
    GridMismatch,
    IFPError,
    InvalidParameter,
    NoConvergence,
    NotConverged,
    SchemaError,
    UnknownParameter,
)
from .model import compute_growth_report

log = logging.getLogger("ifp")

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_ASSUMPTION = 2
EXIT_INPUT = 3
EXIT_NOCONV = 4

REQUIRED_FLAGS = ("discount", "discounted_return", "income_moments", "stability", "mixing")
SWEEP_QUANTITIES = ("G_beta", "G_betaR", "G_R", "s_bar", "stable")
PATH_OPTIONS = ("--config", "--policy", "--panel")


class Run:
    """Per-invocation context: parsed config, output directory and manifest."""

    def __init__(self, args, argv):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.rc = cfg.load_config(args.config)
        self.seed = args.seed if args.seed is not None else self.rc.seed
        self.threads = _threads(args.threads)
        set_threads(self.threads)
        self.manifest = artifacts.RunManifest(
            command=args.command, argv=_absolute_argv(argv), config_path=str(Path(args.config).resolve()),
            config_sha256=artifacts.sha256(args.config), seed=self.seed, threads=self.threads,
            backend=backend_name(),
        )

    def write_text(self, name, text):
        p = artifacts.write_text(self.out / name, text)
        self.manifest.add_output(name, p)
        return p

    def write_json(self, name, obj):
        return self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def close(self):
        self.manifest.finish()
        self.manifest.write(self.out / f"manifest_{self.args.command}.json")


def _threads(value):
    if value is not None:
        return int(value)
    env = os.environ.get("IFP_THREADS")
    return int(env) if env else None


def _absolute_argv(argv):
    out = list(argv)
    for i, tok in enumerate(out[:-1]):
        if tok in PATH_OPTIONS:
            out[i + 1] = str(Path(out[i + 1]).resolve())
    for i, tok in enumerate(out):
        for opt in PATH_OPTIONS:
            if tok.startswith(opt + "="):
                out[i] = opt + "=" + str(Path(tok.split("=", 1)[1]).resolve())
    return out


def _policy(run):
    if run.args.policy:
        return artifacts.read_policy(run.args.policy, run.rc.spec)
    policy, _ = solver.solve(run.rc.spec, run.rc.solver)
    return policy


# --- commands ------------------------------------------------------------------


def cmd_check(run):
    report = compute_growth_report(run.rc.spec)
    d = report.to_dict()
    run.write_json("growth_report.json", d)
    print(json.dumps(d, indent=2, sort_keys=True))
    return EXIT_OK if all(report.flags[k] for k in REQUIRED_FLAGS) else EXIT_ASSUMPTION


def cmd_solve(run):
    a = run.args
    over = {k: v for k, v in (("tol_rho", a.tol), ("max_iter", a.max_iter), ("grid_points", a.grid_points)) if v}
    conf = dataclasses.replace(run.rc.solver, **over)
    policy, trace = solver.solve(run.rc.spec, conf)
    run.write_text("policy.csv", artifacts.policy_csv(policy))
    run.write_json("policy.json", artifacts.policy_sidecar(policy))
    print(f"converged in {len(trace)} iterations; alpha = {np.round(policy.alpha, 6).tolist()}")
    return EXIT_OK


def _sim_config(run):
    a = run.args
    s = dict(run.rc.simulation)
    for key, val in (("n_paths", a.n_paths), ("horizon", a.horizon), ("burn_in", a.burn_in), ("a0", a.a0)):
        if val is not None:
            s[key] = val
    if a.z0 is not None:
        s["z0"] = a.z0 if a.z0 == "stationary" else int(a.z0)
    s.setdefault("n_paths", 10_000)
    s.setdefault("horizon", 1000)
    s["seed"] = run.seed
    try:
        return dynamics.SimConfig(**s)
    except TypeError as err:
        raise SchemaError(str(err), "simulation") from err


def cmd_simulate(run):
    policy = _policy(run)
    conf = _sim_config(run)
    panel = dynamics.simulate(run.rc.spec, policy, conf, record=run.args.full, threads=run.threads)
    run.write_text("panel.csv", panel.to_csv(full=run.args.full))
    run.write_text("panel_summary.json", panel.summary_json())
    s = panel.summary()
    print(f"{s['n_paths']} paths to t={s['date']}: mean {s['mean']:.6g}, median {s['quantiles']['50']:.6g}")
    return EXIT_OK


def cmd_tail(run):
    policy = _policy(run)
    if policy.alpha is None:
        policy.alpha = np.array([solver.asymptotic_mpc(policy, z) for z in range(policy.n_states)])
    t = run.rc.tail
    s_max = run.args.s_max or t.get("s_max", tail.S_MAX)
    samples = artifacts.read_terminal_panel(run.args.panel) if run.args.panel else None
    rep = tail.tail_report(run.rc.spec, policy, samples, tail_fraction=t.get("tail_fraction", 0.01), s_max=s_max,
                           seed=run.seed)
    run.write_text("tail_report.json", rep.to_json() + "\n")
    run.write_text("lambda_curve.csv", rep.lambda_csv())
    print(rep.verdict)
    return EXIT_OK


def _axis(text):
    try:
        name, lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"axis must look like NAME:LO:HI:COUNT, got {text!r}") from err
    if count < 1:
        raise argparse.ArgumentTypeError("axis count must be >= 1")
    return name, np.linspace(lo, hi, count)


def sweep_value(rc, quantity, xname, x, yname, y):
    report = compute_growth_report(rc.with_params(**{xname: x, yname: y}))
    d = report.to_dict()
    return int(d["stable"]) if quantity == "stable" else float(d[quantity])


def sweep(rc, quantity, xaxis, yaxis, workers=None):
    """Evaluate ``quantity`` on the grid ``xaxis x yaxis`` (row-major, x outer)."""
    (xname, xs), (yname, ys) = xaxis, yaxis
    for name in (xname, yname):
        if rc.template is None or not isinstance(rc.params.get(name), (int, float)):
            known = sorted(k for k, v in rc.params.items() if isinstance(v, (int, float)))
            raise UnknownParameter(f"{name!r} is not a template parameter; known: {known}")
    cells = [(float(x), float(y)) for x in xs for y in ys]
    with ThreadPoolExecutor(max_workers=workers or 1) as ex:
        vals = list(ex.map(lambda c: sweep_value(rc, quantity, xname, c[0], yname, c[1]), cells))
    return cells, vals


def cmd_sweep(run):
    a = run.args
    cells, vals = sweep(run.rc, a.quantity, a.x, a.y, run.threads)
    lines = ["x,y,value"] + [f"{x!r},{y!r},{v!r}" for (x, y), v in zip(cells, vals)]
    run.write_text(f"sweep_{a.quantity}.csv", "\n".join(lines) + "\n")
    run.write_json(f"sweep_{a.quantity}.json", {"x": a.x[0], "y": a.y[0], "quantity": a.quantity,
                                               "nx": len(a.x[1]), "ny": len(a.y[1])})
    print(f"{len(cells)} cells written")
    return EXIT_OK


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "simulate": cmd_simulate, "tail": cmd_tail, "sweep": cmd_sweep}


def cmd_replay(args):
    """Rerun a manifest's command into a fresh directory and compare hashes."""
    man = artifacts.RunManifest.read(args.manifest)
    argv = list(man.argv)
    out = Path(args.out) if args.out else Path(args.manifest).resolve().parent / f"replay_{man.command}"
    argv = _set_option(argv, "--out", str(out))
    if args.threads is not None:
        argv = _set_option(argv, "--threads", str(args.threads))
    code = main(argv)
    if code != EXIT_OK:
        return code
    bad = []
    for name, digest in sorted(man.outputs.items()):
        p = out / name
        if not p.exists() or artifacts.sha256(p) != digest:
            bad.append(name)
    if bad:
        print(f"replay differs in: {', '.join(bad)}", file=sys.stderr)
        return EXIT_MISMATCH
    print(f"replay identical: {len(man.outputs)} files")
    return EXIT_OK


def _set_option(argv, opt, value):
    out = [t for t in argv if not t.startswith(opt + "=")]
    if opt in out:
        i = out.index(opt)
        out[i + 1] = value
        return out
    return out + [opt, value]


# --- parser --------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="ifp", description="Income fluctuation problem toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON configuration")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: $IFP_THREADS)")
        return p

    common(sub.add_parser("check", help="growth rates and condition flags"))
    p = common(sub.add_parser("solve", help="time iteration"))
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--grid-points", type=int, default=None)
    p = common(sub.add_parser("simulate", help="simulate a wealth panel"))
    p.add_argument("--policy", help="policy CSV from 'ifp solve' (solved on the fly if omitted)")
    p.add_argument("--n-paths", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--a0", type=float)
    p.add_argument("--z0", help="state index or 'stationary'")
    p.add_argument("--full", action="store_true", help="write every date, not just the terminal one")
    p = common(sub.add_parser("tail", help="tail exponent report"))
    p.add_argument("--policy")
    p.add_argument("--panel", help="panel CSV from 'ifp simulate' for the Hill check")
    p.add_argument("--s-max", type=float)
    p = common(sub.add_parser("sweep", help="growth quantity over a 2-D parameter grid"))
    p.add_argument("--x", type=_axis, required=True, metavar="NAME:LO:HI:COUNT")
    p.add_argument("--y", type=_axis, required=True, metavar="NAME:LO:HI:COUNT")
    p.add_argument("--quantity", choices=SWEEP_QUANTITIES, required=True)
    p = sub.add_parser("replay", help="rerun a manifest and compare outputs")
    p.add_argument("manifest")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_INPUT if err.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "replay":
            return cmd_replay(args)
        run = Run(args, argv)
        code = COMMANDS[args.command](run)
        run.close()
        return code
    except AssumptionViolated as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (NotConverged, NoConvergence) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NOCONV
    except (SchemaError, GridMismatch, InvalidParameter, UnknownParameter, FileNotFoundError) as err:
        print(f"input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except IFPError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
