"""Command-line entry points with reproducibility manifests.

Every subcommand maps onto one module operation set, prints a one-line
summary, and (with --out DIR) writes its JSON/CSV outputs plus a run
manifest with parameter set, master seed, code version and output digests.
Numeric output is printed with 17 significant digits so values round-trip
exactly.  Exit codes: 0 pass, 1 domain or statistical failure, 2 usage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _backend, montecarlo, oracle, solver, wick
from .lattice import (
    build_lattice,
    field_to_bytes,
    holder_norm,
    make_profile,
    random_field,
)
from .montecarlo import SpecError, parse_kv_sections

SCHEMA = "wickgl/1"


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def dumps17(obj, indent=2) -> str:
    """json.dumps with every float rendered via %.17g."""

    def render(o, pad=""):
        nxt = pad + " " * indent
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = ",\n".join(f'{nxt}{json.dumps(str(k))}: {render(v, nxt)}' for k, v in o.items())
            return "{\n" + items + "\n" + pad + "}"
        if isinstance(o, (list, tuple)):
            if not len(o):
                return "[]"
            items = ",\n".join(f"{nxt}{render(v, nxt)}" for v in o)
            return "[\n" + items + "\n" + pad + "]"
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return format_float(o)
        if isinstance(o, complex):
            return render({"re": o.real, "im": o.imag}, pad)
        return json.dumps(str(o) if not isinstance(o, str) else o)

    return render(obj)


class RunWriter:
    """Collects output files and writes the manifest when --out is given."""

    def __init__(self, command: str, params: dict, out_dir: str | None, seed=None):
        self.command = command
        self.params = params
        self.dir = Path(out_dir) if out_dir else None
        self.seed = seed
        self.started = time.time()
        self.digests: dict = {}
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, data) -> None:
        if self.dir is None:
            return
        blob = data if isinstance(data, bytes) else data.encode()
        (self.dir / name).write_bytes(blob)
        self.digests[name] = hashlib.sha256(blob).hexdigest()

    def finish(self) -> None:
        if self.dir is None:
            return
        manifest = {
            "schema": SCHEMA,
            "command": self.command,
            "params": self.params,
            "master_seed": self.seed,
            "version": __version__,
            "backend": _backend.BACKEND_NAME,
            "started": self.started,
            "finished": time.time(),
            "outputs": self.digests,
        }
        blob = dumps17(manifest).encode()
        (self.dir / "manifest.json").write_bytes(blob)


def _parse_mode(text: str, d: int):
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1 and d > 1:
        parts = parts * d
    if len(parts) != d:
        raise ValueError(f"mode {text!r} does not have {d} components")
    return tuple(parts)


def _apply_config(args, parser_name: str):
    """Config file defaults: [section] key = value, overridden by CLI flags."""
    if not getattr(args, "config", None):
        return args
    text = Path(args.config).read_text()
    sections = parse_kv_sections(text)
    body = {**sections.get("global", {}), **sections.get(parser_name, {})}
    for key, (value, _line) in body.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ValueError(f"config key {key!r} unknown for {parser_name}")
        if f"--{key}" not in args._explicit and attr not in args._explicit:
            current = getattr(args, attr)
            if isinstance(current, bool):
                setattr(args, attr, value.lower() in ("1", "true", "yes"))
            elif isinstance(current, int) and current is not None:
                setattr(args, attr, int(value))
            elif isinstance(current, float) and current is not None:
                setattr(args, attr, float(value))
            else:
                setattr(args, attr, value)
    return args


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wickgl",
        description="Cutoff OU fields on the torus: renormalized powers, "
        "correlation oracles, Monte Carlo verification, Ginzburg-Landau solvers.",
    )
    parser.add_argument("--version", action="version", version=f"wickgl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (writes files + manifest)")
        p.add_argument("--config", help="key = value config file with [section] headers")
        p.add_argument("--threads", type=int, default=None,
                       help="worker cap (default: WICKGL_THREADS or cpu count)")

    p = sub.add_parser("lattice-info", help="mode lattice summary")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--cutoff", type=int, required=True)
    common(p)

    p = sub.add_parser("wick-expect", help="expectation of a product of Wick powers")
    p.add_argument("--degrees", required=True, help="comma list, e.g. 2,2")
    p.add_argument("--cov", required=True,
                   help="covariance as JSON (inline or @file), e.g. [[1,0.5],[0.5,1]]")
    common(p)

    p = sub.add_parser("wick-correlate", help="correlation oracle, optional MC estimate")
    p.add_argument("--kind", choices=["WP", "AWP", "CWP"], default="WP")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--cutoff", type=int, required=True)
    p.add_argument("--power", required=True, help="Wick degree n, or n1,n2")
    p.add_argument("--k1", default="0")
    p.add_argument("--k2", default="0")
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--t2", type=float, default=None)
    p.add_argument("--phi", default="box", choices=["box", "ball", "smooth", "zero"])
    p.add_argument("--phi-radius", type=float, default=None)
    p.add_argument("--estimate", action="store_true", help="attach a Monte Carlo estimate")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=1.0 / 256)
    common(p)

    p = sub.add_parser("regime", help="existence/regularity regime for (n, d)")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--power", type=int, required=True)
    common(p)

    p = sub.add_parser("diverge-scan", help="partial sums along increasing cutoffs")
    p.add_argument("--kind", choices=["WP", "AWP", "CWP"], default="WP")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--power", type=int, required=True)
    p.add_argument("--mode", default="0", help="target mode, comma separated")
    p.add_argument("--cutoffs", required=True, help="increasing comma list, e.g. 4,8,16")
    common(p)

    p = sub.add_parser("check-bounds", help="two-sided discrete convolution bounds")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--mode", default="0")
    p.add_argument("--cutoff", type=int, default=24)
    common(p)

    p = sub.add_parser("time-integrals", help="closed-form double time integrals")
    p.add_argument("--kind", choices=["aver", "conv"], required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=0.0)
    p.add_argument("--t2", type=float, default=0.0)
    common(p)

    p = sub.add_parser("solve-gl", help="stochastic Ginzburg-Landau via the shifted scheme")
    p.add_argument("--dim", type=int, required=True, choices=[2, 3])
    p.add_argument("--power", type=int, default=2, help="polynomial degree n")
    p.add_argument("--kappa", required=True, help="comma list k0,k1,...,kn")
    p.add_argument("--cutoff", type=int, required=True)
    p.add_argument("--grid", type=int, default=None, help="norm-evaluation grid per axis")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", type=float, default=-0.5)
    p.add_argument("--blowup-threshold", type=float, default=solver.DEFAULT_BLOWUP_THRESHOLD)
    p.add_argument("--phi", default="box", choices=["box", "ball", "smooth", "zero"])
    p.add_argument("--phi-radius", type=float, default=None)
    p.add_argument("--xi-scale", type=float, default=0.1,
                   help="initial field: xi-scale * unit-norm random field")
    p.add_argument("--xi-seed", type=int, default=1)
    p.add_argument("--trace-rs", default="0,0.5,1", help="Hoelder exponents for the trace CSV")
    p.add_argument("--snap-stride", type=int, default=0, help="0 = final snapshot only")
    common(p)

    p = sub.add_parser("ensemble", help="run a spec file of oracle-vs-MC comparisons")
    p.add_argument("--spec", required=True)
    p.add_argument("--z-max", type=float, default=None, help="override pass threshold")
    common(p)

    return parser


def _cmd_lattice_info(args, writer):
    lat = build_lattice(args.dim, args.cutoff)
    info = {
        "schema": SCHEMA,
        "d": lat.d,
        "K": lat.K,
        "n_modes": lat.n_modes,
        "lambda_min": float(lat.lam.min()),
        "lambda_max": float(lat.lam.max()),
        "mode_order": "lexicographic",
        "field_variance_box": wick.field_variance(make_profile(lat, "box")),
    }
    print(dumps17(info))
    writer.write("lattice-info.json", dumps17(info))
    return 0, f"lattice d={lat.d} K={lat.K}: {lat.n_modes} modes"


def _cmd_wick_expect(args, writer):
    degrees = tuple(int(x) for x in args.degrees.split(","))
    cov_text = args.cov
    if cov_text.startswith("@"):
        cov_text = Path(cov_text[1:]).read_text()
    cov = np.asarray(json.loads(cov_text), dtype=float)
    value = wick.wick_expectation_product(degrees, cov)
    record = {"schema": SCHEMA, "degrees": list(degrees), "cov": cov.tolist(), "value": value}
    print(dumps17(record))
    writer.write("wick-expect.json", dumps17(record))
    return 0, f"E[prod Wick] = {format_float(value)}"


def _cmd_wick_correlate(args, writer):
    d, K = args.dim, args.cutoff
    powers = [int(x) for x in str(args.power).split(",")]
    n1, n2 = (powers[0], powers[-1])
    k1 = _parse_mode(args.k1, d)
    k2 = _parse_mode(args.k2, d)
    lat = build_lattice(d, K)
    phi = make_profile(lat, args.phi, args.phi_radius)
    kind = args.kind
    t2 = args.t1 if args.t2 is None else args.t2
    if kind == "WP":
        orc = oracle.correlation_wick(d, K, phi, phi, n1, n2, k1, k2, args.tau)
    elif kind == "AWP":
        orc = oracle.correlation_awp(d, K, phi, phi, n1, n2, k1, k2, args.t0, args.t1, t2)
    else:
        orc = oracle.correlation_cwp(d, K, phi, phi, n1, n2, k1, k2, 0.0, abs(args.tau))
    record = {
        "schema": SCHEMA, "kind": kind, "n1": n1, "n2": n2, "d": d, "K": K,
        "k1": list(k1), "k2": list(k2), "tau": args.tau,
        "t0": args.t0, "t1": args.t1, "t2": t2, "oracle": orc,
    }
    status = 0
    if args.estimate:
        rep = montecarlo.estimate_wick_correlation(
            kind, d, K, phi, (n1, n2), k1, k2, tau=args.tau, t0=args.t0, t1=args.t1,
            t2=t2, M=args.samples, seed=args.seed, dt=args.dt, threads=args.threads,
        )
        record.update({
            "estimate": complex(rep.estimate), "stderr": rep.stderr,
            "zscore": rep.zscore, "bias_budget": rep.bias_budget,
            "pass": rep.passed, "M": rep.M, "backend": rep.backend,
        })
        status = 0 if rep.passed else 1
    print(dumps17(record))
    writer.write("wick-correlate.json", dumps17(record))
    csv = "kind,n,d,k1,k2,tau,K,value\n" + (
        f"{kind},{n1},{d},{' '.join(map(str, k1))},{' '.join(map(str, k2))},"
        f"{format_float(args.tau)},{K},{format_float(orc)}\n"
    )
    writer.write("wick-correlate.csv", csv)
    summary = f"{kind} oracle = {format_float(orc)}"
    if args.estimate:
        summary += f", estimate = {format_float(record['estimate'].real)} (z={record['zscore']:.2f})"
    return status, summary


def _cmd_regime(args, writer):
    rep = oracle.regime_classify(args.power, args.dim)
    record = {"wp": rep.wp_exists, "awp": rep.awp_exists, "cwp": rep.cwp_exists}
    if rep.wp_exists:
        record["wp_exp"] = rep.wp_sup_exponent
    if rep.awp_exists:
        record["awp_exp"] = rep.awp_sup_exponent
    if rep.cwp_exists:
        record["cwp_exp"] = rep.cwp_sup_exponent
    print(dumps17(record))
    writer.write("regime.json", dumps17({"schema": SCHEMA, "n": args.power, "d": args.dim, **record}))
    return 0, (
        f"n={args.power} d={args.dim}: WP {'yes' if rep.wp_exists else 'no'}, "
        f"AWP {'yes' if rep.awp_exists else 'no'}, CWP {'yes' if rep.cwp_exists else 'no'}"
    )


def _cmd_diverge_scan(args, writer):
    v = _parse_mode(args.mode, args.dim)
    K_list = [int(x) for x in args.cutoffs.split(",")]
    scan = oracle.divergence_scan(args.kind, args.power, args.dim, v, K_list)
    record = {"schema": SCHEMA, **scan}
    print(dumps17(record))
    writer.write("diverge-scan.json", dumps17(record))
    csv_lines = ["kind,n,d,v,K,partial_sum"]
    for K, s in zip(scan["K_list"], scan["partial_sums"]):
        csv_lines.append(
            f"{scan['kind']},{scan['n']},{scan['d']},{' '.join(map(str, v))},{K},{format_float(s)}"
        )
    writer.write("diverge-scan.csv", "\n".join(csv_lines) + "\n")
    return 0, f"{args.kind} scan verdict: {scan['verdict']}"


def _cmd_check_bounds(args, writer):
    v = _parse_mode(args.mode, args.dim)
    rep = oracle.twosided_bound_check(args.dim, args.alpha, args.beta, v, args.cutoff)
    record = {
        "schema": SCHEMA, "d": rep.d, "alpha": rep.alpha, "beta": rep.beta,
        "v": list(rep.v), "K": rep.K, "holds": list(rep.holds),
        "middles": list(rep.middles),
        "bounds": [list(b) for b in rep.bounds],
        "all_hold": rep.all_hold,
    }
    print(dumps17(record))
    writer.write("check-bounds.json", dumps17(record))
    return (0 if rep.all_hold else 1), (
        f"two-sided bounds at v={list(v)}: {'all hold' if rep.all_hold else 'FAILED'}"
    )


def _cmd_time_integrals(args, writer):
    if args.kind == "aver":
        value = oracle.time_integral_aver(args.c, args.t0, args.t1, args.t2)
        record = {"schema": SCHEMA, "kind": "aver", "c": args.c,
                  "t0": args.t0, "t1": args.t1, "t2": args.t2, "value": value}
    else:
        value = oracle.time_integral_conv(args.a, args.b, args.t1, args.t2)
        record = {"schema": SCHEMA, "kind": "conv", "a": args.a, "b": args.b,
                  "t1": args.t1, "t2": args.t2, "value": value}
    print(format_float(value))
    writer.write("time-integrals.json", dumps17(record))
    return 0, f"{args.kind} integral = {format_float(value)}"


def _cmd_solve_gl(args, writer):
    d = args.dim
    kappas = [float(x) for x in args.kappa.split(",")]
    if len(kappas) != args.power + 1:
        raise ValueError("--kappa must list k0..kn for --power n")
    lat = build_lattice(d, args.cutoff)
    phi = make_profile(lat, args.phi, args.phi_radius)
    xi = random_field(lat, args.xi_seed, decay=2.0, unit_norm_r=0.0) * args.xi_scale
    trace_rs = tuple(float(x) for x in args.trace_rs.split(","))
    sol = solver.solve_gl(
        d, kappas, xi, lat, phi, seed=args.seed, dt=args.dt, T=args.tmax,
        eta=args.eta, blowup_threshold=args.blowup_threshold,
        trace_rs=trace_rs, N=args.grid,
    )
    lines = ["t," + ",".join(f"x_norm_r{r:g}" for r in trace_rs)]
    for t, X in zip(sol.times, sol.X):
        if X is None:
            lines.append(f"{format_float(t)}," + ",".join(["inf"] * len(trace_rs)))
        else:
            lines.append(
                f"{format_float(t)},"
                + ",".join(format_float(holder_norm(X, r, args.grid)) for r in trace_rs)
            )
    writer.write("trace.csv", "\n".join(lines) + "\n")
    stride = args.snap_stride
    if stride > 0:
        for i in range(0, len(sol.X), stride):
            if sol.X[i] is not None:
                writer.write(f"snapshot_{i:06d}.wgf", field_to_bytes(sol.X[i]))
    final = sol.X[-1] if sol.X[-1] is not None else None
    if final is not None:
        writer.write("snapshot_final.wgf", field_to_bytes(final))
    record = {
        "schema": SCHEMA,
        **sol.manifest,
        "blowup_time": sol.blowup_time,
        "weighted_traces": {f"r{r:g}": v for r, v in sol.weighted_traces.items()},
    }
    print(dumps17(record))
    writer.write("solve-gl.json", dumps17(record))
    if sol.blew_up:
        return 0, f"blow-up detected at tau = {format_float(sol.blowup_time)}"
    return 0, f"solved to T = {format_float(args.tmax)} without blow-up"


def _cmd_ensemble(args, writer):
    text = Path(args.spec).read_text()
    if args.z_max is not None:
        text = f"[defaults]\nz_max = {args.z_max}\n" + text
    reports, status = montecarlo.run_ensemble(text, threads=args.threads)
    json_lines = "\n".join(dumps17(r.to_dict(), indent=0).replace("\n", "") for r in reports)
    for r in reports:
        print(
            f"{r.target}: oracle {format_float(r.oracle)} estimate "
            f"{format_float(r.estimate.real)} z {r.zscore:.3f} "
            f"{'pass' if r.passed else 'FAIL'}"
        )
    writer.write("reports.jsonl", json_lines + ("\n" if json_lines else ""))
    writer.write("summary.csv", montecarlo.reports_to_csv(reports))
    n_fail = sum(not r.passed for r in reports)
    return status, f"{len(reports)} comparisons, {n_fail} failed"


_COMMANDS = {
    "lattice-info": _cmd_lattice_info,
    "wick-expect": _cmd_wick_expect,
    "wick-correlate": _cmd_wick_correlate,
    "regime": _cmd_regime,
    "diverge-scan": _cmd_diverge_scan,
    "check-bounds": _cmd_check_bounds,
    "time-integrals": _cmd_time_integrals,
    "solve-gl": _cmd_solve_gl,
    "ensemble": _cmd_ensemble,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._explicit = set(argv)
    try:
        args = _apply_config(args, args.command)
        if getattr(args, "threads", None) is not None:
            os.environ["WICKGL_THREADS"] = str(args.threads)
        writer = RunWriter(
            args.command,
            {k: v for k, v in vars(args).items() if not k.startswith("_") and k != "command"},
            getattr(args, "out", None),
            seed=getattr(args, "seed", None),
        )
        status, summary = _COMMANDS[args.command](args, writer)
        writer.finish()
        print(summary)
        return status
    except (ValueError, KeyError, OSError, SpecError, solver.ContractionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
