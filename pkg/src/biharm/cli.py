"""Command-line driver.

Every subcommand accepts ``--config FILE`` (flat ``key = value`` lines) and
``--from-json FILE`` (a previous JSON output whose recorded arguments are
replayed). Precedence, lowest first: defaults, config file, replayed JSON,
command-line flags.

Exit codes: 0 success, 2 usage or precondition error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__, _backend, asymptotics, modes, shooting, transforms
from .errors import NotGlobal, NumericalFailure, PreconditionError
from .radial_ode import IntegratorControls, integrate, write_trace_csv

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_NUMERICAL = 3

# arguments that name files; excluded from the recorded run parameters
_IO_KEYS = {"command", "config", "from_json", "output", "csv", "kelvin_csv", "emden_csv", "workers"}


class UsageError(PreconditionError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _controls_args(p, r_target):
    g = p.add_argument_group("integrator")
    g.add_argument("--r-target", type=float, default=r_target)
    g.add_argument("--rel-tol", type=float, default=1e-10)
    g.add_argument("--abs-tol", type=float, default=1e-12)
    g.add_argument("--r0", type=float, default=None)
    g.add_argument("--u-floor", type=float, default=1e-8)
    g.add_argument("--max-steps", type=int, default=10_000_000)
    g.add_argument("--max-step-ratio", type=float, default=0.05)


def _common(p):
    p.add_argument("--config", help="flat key=value file; flags on the command line win")
    p.add_argument("--from-json", help="replay the arguments recorded in a previous JSON output")
    p.add_argument("--output", "-o", help="write JSON here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="biharm", description="Radial solutions of Δ²u = -u^{-q} in three dimensions.")
    parser.add_argument("--version", action="version", version=f"biharm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("shoot", help="integrate one profile and classify it")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--csv", help="trace CSV (r,u,du,v,dv)")
    _controls_args(p, 1e3)
    _common(p)

    p = sub.add_parser("beta-star", help="bracket the threshold by bisection")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--lo", type=float, default=None, help="lower bracket end (default: geometric seed)")
    p.add_argument("--hi", type=float, default=None)
    _controls_args(p, 1e3)
    _common(p)

    for name, helptext in (
        ("classify-regime", "fit growth rates and label the regime"),
        ("verify-transform", "Kelvin-transform a global trace and check the transformed equation"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--q", type=float, required=True)
        p.add_argument("--beta", type=float, default=None)
        p.add_argument("--minimal", action="store_true", help="use the threshold solution")
        p.add_argument("--tol", type=float, default=asymptotics.REGIME_TOL)
        p.add_argument("--window", type=float, nargs=2, default=None, metavar=("LO", "HI"))
        if name == "classify-regime":
            p.add_argument("--theta", type=float, default=asymptotics.DEFAULT_THETA)
        else:
            p.add_argument("--L", type=float, default=None, help="linear coefficient (default: fitted or u/r)")
            p.add_argument("--kelvin-csv", help="CSV of (s, vbar)")
            p.add_argument("--emden-csv", help="CSV of (t, zbar)")
        _controls_args(p, asymptotics.REGIME_HORIZON)
        _common(p)

    p = sub.add_parser("modes", help="spectral data and mode-equation decay rates")
    p.add_argument("--k", default="1..10", help="range LO..HI or a single index")
    p.add_argument("--solve", action="store_true", help="also solve the forced mode equation")
    p.add_argument("--A", type=float, default=1.0, help="forcing amplitude")
    p.add_argument("--a", type=float, default=None, help="forcing decay rate (default k + 0.5)")
    p.add_argument("--T", type=float, default=modes.DEFAULT_T)
    p.add_argument("--csv", help="CSV of (t, z) for the last solved mode")
    _common(p)

    p = sub.add_parser("sweep", help="regime reports over a (q, beta) grid")
    p.add_argument("--q", required=True, help="comma-separated exponents")
    p.add_argument(
        "--beta",
        default="minimal,2x",
        help="comma-separated: 'minimal', a multiple of the threshold like '2x', or a number",
    )
    p.add_argument("--theta", type=float, default=asymptotics.DEFAULT_THETA)
    p.add_argument("--tol", type=float, default=asymptotics.REGIME_TOL)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", help="sweep CSV (default: stdout)")
    _controls_args(p, asymptotics.REGIME_HORIZON)
    _common(p)
    return parser


def _tokens(params: dict) -> list[str]:
    out = []
    for key, val in params.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                out.append(flag)
        elif val is None:
            continue
        elif isinstance(val, (list, tuple)):
            out.append(flag)
            out.extend(str(v) for v in val)
        else:
            out.extend([flag, str(val)])
    return out


def read_config(path) -> dict:
    params = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            low = val.lower()
            if low in ("true", "yes", "on"):
                params[key] = True
            elif low in ("false", "no", "off"):
                params[key] = False
            else:
                params[key] = val.split() if key == "window" else val
    return params


def parse_args(argv):
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre.add_argument("--from-json")
    known, rest = pre.parse_known_args(argv)
    commands = [a for a in rest if not a.startswith("-")]
    if not commands or commands[0] not in COMMANDS:
        return parser.parse_args(argv)
    command = commands[0]
    prefix = []
    if known.config:
        prefix += _tokens(read_config(known.config))
    if known.from_json:
        with open(known.from_json) as fh:
            meta = json.load(fh)["metadata"]
        if meta["command"] != command:
            raise UsageError(f"{known.from_json} was written by '{meta['command']}', not '{command}'")
        prefix += _tokens(meta["args"])
    i = argv.index(command)
    return parser.parse_args(argv[: i + 1] + prefix + argv[i + 1 :])


def _run_params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _IO_KEYS}


def _metadata(args) -> dict:
    return {"tool": "biharm", "version": __version__, "backend": _backend.BACKEND, "command": args.command, "args": _run_params(args)}


def _csv_metadata(args) -> dict:
    meta = {"tool": f"biharm {__version__}", "command": args.command}
    meta.update((k, v) for k, v in _run_params(args).items() if v is not None)
    return meta


def _controls(args) -> IntegratorControls:
    return IntegratorControls(
        rel_tol=args.rel_tol,
        abs_tol=args.abs_tol,
        r0=args.r0,
        r_target=args.r_target,
        u_floor=args.u_floor,
        max_steps=args.max_steps,
        max_step_ratio=args.max_step_ratio,
    )


def cmd_shoot(args):
    out = shooting.classify(args.beta, args.q, _controls(args))
    if args.csv:
        write_trace_csv(out.trace, args.csv, _csv_metadata(args))
    return {"outcome": out.to_dict(), "n_samples": len(out.trace)}


def cmd_beta_star(args):
    bracket = None
    if args.lo is not None or args.hi is not None:
        if args.lo is None or args.hi is None:
            raise UsageError("give both --lo and --hi, or neither")
        bracket = (args.lo, args.hi)
    cert = shooting.find_beta_star(args.q, bracket, args.tol, _controls(args))
    return {"certificate": cert.to_dict()}


def _select(args):
    if args.minimal == (args.beta is not None):
        raise UsageError("give exactly one of --beta and --minimal")


def cmd_classify_regime(args):
    _select(args)
    report = asymptotics.regime_report(
        args.q, None if args.minimal else args.beta, _controls(args), args.tol, args.theta, args.window
    )
    return {"report": report.to_dict()}


def cmd_verify_transform(args):
    _select(args)
    controls = _controls(args)
    if args.minimal:
        cert = shooting.find_beta_star(args.q, None, args.tol, controls)
        trace = cert.hi.trace
        r_hi = shooting.minimal_window(cert, controls)[1]
    else:
        trace = integrate(args.beta, args.q, controls)
        if not trace.is_global:
            raise NotGlobal(f"beta={args.beta!r} is extinct at r={trace.termination.radius:.6g}")
        r_hi = trace.r_end
    window = tuple(args.window) if args.window else asymptotics.tail_window(r_hi)
    if args.L is not None:
        L, source = args.L, "given"
    elif args.q > 3:
        L, source = asymptotics.estimate_L(trace, window, args.q).L, "fitted"
    else:
        # the transformed equation holds for every L; use the last u/r
        L, source = float(trace.u[-1] / trace.r[-1]), "u/r at horizon"
    kt = transforms.kelvin(trace, L)
    s_window = (1.0 / window[1], min(1.0 / window[0], 1.0 / transforms.CHECK_MIN_RADIUS))
    prof = transforms.residual_avg_ode(kt, window=s_window)
    meta = _csv_metadata(args)
    if args.kelvin_csv:
        transforms.write_kelvin_csv(kt, args.kelvin_csv, meta)
    if args.emden_csv:
        transforms.write_emden_csv(transforms.emden(kt), args.emden_csv, meta)
    return {
        "L": L,
        "L_source": source,
        "beta": trace.beta,
        "r_window": list(window),
        "s_window": list(s_window),
        "max_relative_residual": prof.max_relative,
        "median_relative_residual": float(sorted(prof.relative)[len(prof.relative) // 2]),
        "passed": prof.max_relative < 1e-2,
    }


def parse_k_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = (int(s) for s in text.split(".."))
        else:
            lo = hi = int(text)
    except ValueError:
        raise UsageError(f"bad k range {text!r}; use LO..HI") from None
    if hi < lo:
        raise UsageError(f"empty k range {text!r}")
    return list(range(lo, hi + 1))


def cmd_modes(args):
    ks = parse_k_range(args.k)
    table = modes.spectrum_table(ks)
    result = {"spectrum": [row.to_dict() for row in table]}
    if args.solve:
        sols = []
        for k in ks:
            a = args.a if args.a is not None else k + 0.5
            sol = modes.solve_mode_ode_k1(args.A, a, T=args.T) if k == 1 else modes.solve_mode_ode(k, args.A, a, T=args.T)
            row = sol.to_dict()
            row["expected_rate"] = float(min(k, a))
            sols.append(row)
        result["solutions"] = sols
        if args.csv:
            modes.write_mode_csv(sol, args.csv, _csv_metadata(args))
    return result


def _parse_list(text, conv=float):
    return [conv(s.strip()) for s in str(text).split(",") if s.strip()]


def _sweep_job(job):
    q, token, theta, tol, ctl = job
    controls = IntegratorControls(**ctl)
    cert = shooting.find_beta_star(q, None, tol, controls)
    if token == "minimal":
        beta = None
    elif token.endswith("x"):
        beta = float(token[:-1]) * cert.beta_star
    else:
        beta = float(token)
    try:
        report = asymptotics.regime_report(q, beta, controls, tol, theta, certificate=cert)
    except NotGlobal:
        return [q, beta, "Extinct", None, None, None, None, None]
    return report.csv_row()


def cmd_sweep(args):
    qs = _parse_list(args.q)
    tokens = [t.strip() for t in str(args.beta).split(",") if t.strip()]
    for t in tokens:
        if t != "minimal":
            try:
                float(t[:-1] if t.endswith("x") else t)
            except ValueError:
                raise UsageError(f"bad beta token {t!r}") from None
    ctl = _controls(args).to_dict()
    jobs = [(q, t, args.theta, args.tol, ctl) for q in qs for t in tokens]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    buf = io.StringIO()
    for key, val in _csv_metadata(args).items():
        buf.write(f"# {key}: {val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(asymptotics.SWEEP_COLUMNS)
    for row in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return {"columns": list(asymptotics.SWEEP_COLUMNS), "rows": rows}


COMMANDS = {
    "shoot": cmd_shoot,
    "beta-star": cmd_beta_star,
    "classify-regime": cmd_classify_regime,
    "verify-transform": cmd_verify_transform,
    "modes": cmd_modes,
    "sweep": cmd_sweep,
}


def run(argv=None) -> dict:
    """Parse, execute and return the JSON document (raises package errors)."""
    args = parse_args(list(sys.argv[1:] if argv is None else argv))
    doc = {"metadata": _metadata(args)}
    doc.update(COMMANDS[args.command](args))
    text = json.dumps(doc, indent=2)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    elif args.command != "sweep" or args.csv:
        print(text)
    return doc


def main(argv=None) -> int:
    try:
        run(argv)
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
