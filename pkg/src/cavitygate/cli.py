"""Command-line front end.

Exit status: 0 success, 1 a checked threshold was missed, 2 configuration
error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import analysis
from .config import ConfigError, RunConfig, parse_assignment, parse_config
from .ideal import SectorError, apply_schedule_ideal
from .lindblad import IntegrationError
from .schedule import (
    atom_timing_budget,
    compile_atom_single_cavity,
    compile_nqubit,
    compile_toffoli,
    timing_budget,
)

EXIT_OK, EXIT_THRESHOLD, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
TRUTH_TOL = 1e-10
CONVERGENCE_TOL = 0.002
COMMANDS = (
    "ideal-verify",
    "truth-table",
    "timing",
    "simulate",
    "sweep-dt",
    "sweep-c",
    "sweep-2d",
    "atom-variant",
    "convergence-check",
)


class _Context:
    def __init__(self, args: argparse.Namespace, cfg: RunConfig, out: Callable[[str], None]):
        self.args = args
        self.cfg = cfg
        self.print = out

    def header(self) -> dict:
        doc = {"config_hash": self.cfg.hash, "config": self.cfg.data}
        if not self.args.no_timestamp:
            doc["generated"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return doc

    def header_lines(self) -> list[str]:
        h = self.header()
        lines = [f"config_hash: {h['config_hash']}"]
        if "generated" in h:
            lines.append(f"generated: {h['generated']}")
        lines.append("config: " + self.cfg.canonical_json())
        return lines

    def out_path(self, default_name: str) -> Path:
        if self.args.out:
            return Path(self.args.out)
        return Path(self.cfg["output"]["dir"]) / default_name

    def write_json(self, doc: dict, default_name: str) -> Path:
        path = self.out_path(default_name)
        path.parent.mkdir(parents=True, exist_ok=True)
        full = {**self.header(), **doc}
        path.write_text(json.dumps(full, indent=2, sort_keys=True, default=_json_default) + "\n")
        return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(type(obj).__name__)


def _n(ctx: _Context) -> int:
    return ctx.args.n if ctx.args.n is not None else ctx.cfg.n


def _truth_rows(ctx: _Context, n: int, toffoli: bool):
    params = ctx.cfg.params(n=n, cavity_count=n)
    sched = (compile_toffoli if toffoli else compile_nqubit)(n, params)
    rows = analysis.truth_table(lambda psi: apply_schedule_ideal(sched, psi), sched.layout)
    return sched, rows


def cmd_ideal_verify(ctx: _Context) -> int:
    n = _n(ctx)
    sched, rows = _truth_rows(ctx, n, toffoli=False)
    err, leak = analysis.truth_table_errors(rows)
    ok = err < TRUTH_TOL and leak < TRUTH_TOL
    verdict = "truth table exact" if ok else "truth table MISMATCH"
    ctx.print(
        f"n={n}: {sched.operation_count} operations, {verdict}, "
        f"max phase error {err:.1e}, leakage {leak:.1e} (< {TRUTH_TOL:.0e} required)"
    )
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_truth_table(ctx: _Context) -> int:
    n = _n(ctx)
    _, rows = _truth_rows(ctx, n, ctx.args.toffoli)
    for r in rows:
        src = "".join(map(str, r.bits))
        dst = "".join(map(str, r.output_bits))
        # round first so that -1e-17 does not print as -0.000000000000
        c = complex(round(r.coefficient.real, 12) + 0.0, round(r.coefficient.imag, 12) + 0.0)
        ctx.print(f"|{src}> -> ({c.real:+.12f}{c.imag:+.12f}j) |{dst}>   leakage {r.leakage:.1e}")
    if ctx.args.out:
        ctx.write_json(
            {"rows": [
                {"input": list(r.bits), "output": list(r.output_bits),
                 "coefficient": [r.coefficient.real, r.coefficient.imag], "leakage": r.leakage}
                for r in rows
            ]},
            "truth_table.json",
        )
    return EXIT_OK


def cmd_timing(ctx: _Context) -> int:
    n = _n(ctx)
    params = ctx.cfg.params(n=n, cavity_count=n)
    tau = timing_budget(n, params)
    sched = compile_nqubit(n, params)
    ctx.print(f"n={n}: total gate time {tau * 1e6:.4f} us ({tau * 1e9:.2f} ns)")
    ctx.print(f"  compiled schedule: {sched.operation_count} operations, "
              f"{sched.count('Adjust')} adjust windows, {sched.total_duration * 1e9:.2f} ns")
    if ctx.args.out:
        ctx.write_json({"n": n, "total_s": tau, "schedule": sched.to_dict()}, "timing.json")
    return EXIT_OK


def cmd_simulate(ctx: _Context) -> int:
    cfg = ctx.cfg
    params = cfg.params()
    f, res = analysis.simulate_gate(
        params, dt=cfg.dt, photon_cutoff=cfg.photon_cutoff, opts=cfg.integrator()
    )
    ctx.print(
        f"fidelity {f:.6f}  (n={cfg.n}, n_max={cfg.photon_cutoff}, dt={cfg.dt * 1e9:g} ns, "
        f"c={cfg['c']:g}; {res.steps} steps, {res.wall_time:.1f} s)"
    )
    if ctx.args.out:
        ctx.write_json(
            {"fidelity": f, "steps": res.steps, "min_eigenvalue": res.min_eigenvalue,
             "final_trace": float(np.trace(res.rho).real)},
            "simulate.json",
        )
    return EXIT_OK


def _emit_sweep(ctx: _Context, result: analysis.SweepResult, name: str) -> None:
    fmt = ctx.cfg["output"]["format"]
    path = ctx.out_path(f"{name}.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt in ("csv", "both"):
        csv_path = path if path.suffix != ".json" else path.with_suffix(".csv")
        result.write_csv(csv_path, ctx.header_lines())
        ctx.print(f"wrote {csv_path}")
    if fmt in ("json", "both"):
        json_path = path.with_suffix(".json")
        doc = {**ctx.header(), **result.to_dict()}
        json_path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
        ctx.print(f"wrote {json_path}")
    finite = result.fidelity[np.isfinite(result.fidelity)]
    failed = int(np.sum(~np.isfinite(result.fidelity)))
    if len(finite):
        ctx.print(f"{len(result)} points: min fidelity {finite.min():.6f}, max {finite.max():.6f}"
                  + (f", {failed} failed" if failed else ""))


def _sweep(ctx: _Context, name: str) -> int:
    cfg = ctx.cfg
    kw = dict(photon_cutoff=cfg.photon_cutoff, opts=cfg.integrator(), jobs=ctx.args.jobs)
    params = cfg.params().with_coupling_ratio(1.0)
    if name == "sweep-dt":
        result = analysis.run_grid([(dt, cfg["c"]) for dt in cfg.dt_grid], params, **kw)
    elif name == "sweep-c":
        result = analysis.run_grid([(cfg.dt, c) for c in cfg.c_grid], params, **kw)
    else:
        result = analysis.sweep_2d(cfg.dt_grid, cfg.c_grid, params, **kw)
    _emit_sweep(ctx, result, name.replace("-", "_"))
    if len(result) and not np.any(np.isfinite(result.fidelity)):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_atom_variant(ctx: _Context) -> int:
    from .hamiltonian import atom_defaults

    n = _n(ctx)
    params = atom_defaults(n)
    sched = compile_atom_single_cavity(params, n)
    rows = analysis.truth_table(lambda psi: apply_schedule_ideal(sched, psi), sched.layout)
    err, leak = analysis.truth_table_errors(rows)
    tau = atom_timing_budget(params, n)
    ok = err < TRUTH_TOL and leak < TRUTH_TOL
    ctx.print(f"single-cavity variant, n={n}: {sched.operation_count} operations, "
              f"{sched.count('Transport')} transport windows")
    ctx.print(f"  total time {tau * 1e6:.2f} us (g = Omega = 2pi x 50 kHz, tau_m = 1 us)")
    ctx.print(f"  truth table {'exact' if ok else 'MISMATCH'}: phase error {err:.1e}, leakage {leak:.1e}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_convergence(ctx: _Context) -> int:
    cfg = ctx.cfg
    report = analysis.convergence_check(cfg.params(), cfg.integrator(), cutoffs=(1, 2))
    ok = report.delta < CONVERGENCE_TOL
    ctx.print(f"F(n_max=1) = {report.fidelity_low:.6f}, F(n_max=2) = {report.fidelity_high:.6f}, "
              f"|delta| = {report.delta:.2e} ({'<' if ok else '>='} {CONVERGENCE_TOL})")
    if ctx.args.out:
        ctx.write_json({"fidelity_nmax1": report.fidelity_low, "fidelity_nmax2": report.fidelity_high,
                        "delta": report.delta}, "convergence.json")
    return EXIT_OK if ok else EXIT_THRESHOLD


HANDLERS = {
    "ideal-verify": cmd_ideal_verify,
    "truth-table": cmd_truth_table,
    "timing": cmd_timing,
    "simulate": cmd_simulate,
    "sweep-dt": lambda ctx: _sweep(ctx, "sweep-dt"),
    "sweep-c": lambda ctx: _sweep(ctx, "sweep-c"),
    "sweep-2d": lambda ctx: _sweep(ctx, "sweep-2d"),
    "atom-variant": cmd_atom_variant,
    "convergence-check": cmd_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults used when omitted)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config entry, e.g. --set g_over_2pi_mhz=100")
    common.add_argument("--n", type=int, help="number of work qubits (overrides config n)")
    common.add_argument("--out", help="output file path")
    common.add_argument("--no-timestamp", action="store_true", help="omit the generation timestamp")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")

    parser = argparse.ArgumentParser(prog="cavitygate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "truth-table":
            p.add_argument("--toffoli", action="store_true", help="tabulate the Toffoli schedule instead")
    return parser


def main(argv: Sequence[str] | None = None, out: Callable[[str], None] = print) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides: dict = {}
        for item in args.set:
            _deep_update(overrides, parse_assignment(item))
        if args.n is not None:
            overrides["n"] = args.n
        cfg = parse_config(args.config, overrides)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ctx = _Context(args, cfg, out)
    try:
        return HANDLERS[args.command](ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, SectorError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _deep_update(base: dict, extra: dict) -> None:
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
