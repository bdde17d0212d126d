"""Command-line surface: convert, corrections, verify, solve, nogo.

Exit codes
----------
0   success (and, where applicable, the requested check passed)
1   the computation ran but the check failed (residuals above threshold,
    slope outside the band, negative gap, non-converged solve)
2   unparseable input (message carries line and column) or bad usage
3   input parsed but violates a model invariant
4   degenerate slope fit in ``verify``

The numeric policy can be overridden per run through the environment
variable ``SPINPULSE_NUMERIC_POLICY`` (see :mod:`spinpulse.policy`); the
effective policy is part of the run manifest, whose digest is embedded in
every output so identical manifests give byte-identical files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corrections import evaluate_corrections, nogo_diagnostics
from .design import feasibility_probe, residual_is_pi_regime, solve
from .fileio import (InvariantError, SchemaError, csv_document, fmt,
                     format_report, format_solution, make_manifest, parse_bath,
                     parse_problem, parse_pulse)
from .oracle import magnus_consistency
from .policy import active_policy
from .sampling import pi_close_ntrajectory, random_ntrajectory
from .trajectory import amplitude_from_axis_angle, integrate_axis_angle, n_trajectory

SLOPE_BANDS = {
    "uncorrected": (0.85, 1.15),
    "first-order": (1.85, 2.15),
    "second-order-commuting": (2.8, 3.2),
}

NOGO_CHECKS = ("ts-eq-tp", "pi-second-order")


def _write_output(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc


def _parse_sweep(spec: str) -> np.ndarray:
    try:
        lo, hi, pts = spec.split(":")
        lo, hi, pts = float(lo), float(hi), int(pts)
    except ValueError:
        raise SchemaError(f"bad sweep spec {spec!r}; expected min:max:points") from None
    if not (0 < lo < hi) or pts < 4:
        raise SchemaError("sweep needs 0 < min < max and at least 4 points")
    return np.geomspace(lo, hi, pts)


# ----------------------------------------------------------------------
# subcommands


def cmd_convert(args) -> int:
    text = _read(args.pulse_file)
    shape = parse_pulse(text)
    manifest = make_manifest("convert", {"pulse": text}, seed=args.seed)
    traj = integrate_axis_angle(shape, args.grid)
    ntraj = n_trajectory(traj)
    amps = amplitude_from_axis_angle(traj)
    if args.to == "trajectory":
        rows = np.column_stack([traj.grid, traj.axis, traj.angle, ntraj.nhat])
        doc = csv_document("t,ax,ay,az,psi,nx,ny,nz", rows, manifest.digest())
    else:
        rows = np.column_stack([traj.grid, amps])
        doc = csv_document("t,vx,vy,vz", rows, manifest.digest())
    _write_output(doc, args.out)
    direct = shape.amplitude(traj.grid)
    scale = max(float(np.max(np.linalg.norm(direct, axis=1))), 1e-300)
    defect = float(np.max(np.abs(amps - direct))) / scale
    print(f"round-trip defect = {fmt(defect)}", file=sys.stderr)
    return 0


def cmd_corrections(args) -> int:
    policy = active_policy()
    text = _read(args.pulse_file)
    shape = parse_pulse(text)
    manifest = make_manifest("corrections", {"pulse": text}, seed=args.seed)
    tau_s = args.tau_s if args.tau_s is not None else shape.tau_s
    if not 0.0 <= tau_s <= shape.tau_p:
        raise InvariantError("tau_s override outside [0, tau_p]")
    traj = integrate_axis_angle(shape, args.grid)
    ntraj = n_trajectory(traj)
    report = evaluate_corrections(ntraj, tau_s, policy=policy)
    diag = nogo_diagnostics(ntraj, tau_s, policy=policy)
    threshold = args.threshold if args.threshold is not None else policy.residual_threshold
    targets = tuple(args.targets.split(","))
    doc = format_report(report, diag, manifest.digest(), threshold, targets)
    _write_output(doc, args.out)
    index = {"r1": 0, "r2a": 1, "r2b": 2}
    try:
        requested = [report.normalized[index[t]] for t in targets]
    except KeyError as exc:
        raise SchemaError(f"unknown residual target {exc.args[0]!r}") from None
    return 0 if all(r <= threshold for r in requested) else 1


def cmd_verify(args) -> int:
    pulse_text = _read(args.pulse_file)
    bath_text = _read(args.bath_file)
    shape = parse_pulse(pulse_text)
    bath = parse_bath(bath_text)
    manifest = make_manifest("verify", {"pulse": pulse_text, "bath": bath_text},
                             seed=args.seed)
    taus = _parse_sweep(args.sweep)
    sweep = magnus_consistency(shape, bath, taus, steps=args.steps)
    slope, stderr = sweep.slopes["uf_defect"]
    mag_slope, mag_err = sweep.slopes["magnus_defect"]
    floor = max(e.uf_defect for e in sweep.entries)
    if floor < 1e-13 or not (np.isfinite(slope) and np.isfinite(mag_slope)):
        print("degenerate slope fit: defects at the machine floor", file=sys.stderr)
        return 4
    if args.band:
        lo, hi = (float(x) for x in args.band.split(":"))
    else:
        lo, hi = SLOPE_BANDS[args.regime]
    rows = [(e.tau_p, e.defect, e.uf_defect, e.magnus_defect) for e in sweep.entries]
    trailer = [
        f"uf_slope={fmt(slope)} stderr={fmt(stderr)} band={fmt(lo)}:{fmt(hi)}",
        f"magnus_slope={fmt(mag_slope)} stderr={fmt(mag_err)}",
        f"defect_slope={fmt(sweep.slopes['defect'][0])}",
    ]
    doc = csv_document("tau_p,defect,uf_defect,magnus_defect", rows,
                       manifest.digest(), trailer)
    _write_output(doc, args.out)
    print(f"uf_defect slope = {slope:.4f} +/- {stderr:.4f} (band {lo}..{hi})",
          file=sys.stderr)
    return 0 if lo <= slope <= hi else 1


def cmd_solve(args) -> int:
    text = _read(args.problem_file)
    problem = parse_problem(text)
    manifest = make_manifest("solve", {"problem": text}, seed=args.seed)
    end_split = not isinstance(problem.tau_s, str) and float(problem.tau_s) >= 1.0
    if args.probe or end_split or residual_is_pi_regime(problem):
        probe = feasibility_probe(problem, budget=args.restarts or 16, seed=args.seed)
        sol = probe.solution
        extra_note = (f"probe regime={probe.regime} objective={fmt(probe.best_objective)}"
                      f" gap={fmt(probe.gap)} bound={fmt(probe.gap_bound)}")
    else:
        if args.restarts:
            from dataclasses import replace
            problem = replace(problem, restarts=args.restarts)
        sol = solve(problem, seed=args.seed)
        probe = None
        extra_note = ""
    doc = format_solution(sol, manifest.digest())
    if extra_note:
        doc += f"# {extra_note}\n"
    _write_output(doc, args.out)
    status = "converged" if sol.converged else "did not converge"
    print(f"solver {status}: objective = {fmt(sol.objective)}", file=sys.stderr)
    if probe is not None:
        print(f"infeasibility certificate: best objective {fmt(probe.best_objective)}"
              f" >= gap bound {fmt(probe.gap_bound)}", file=sys.stderr)
        return 0 if probe.best_objective >= probe.gap_bound * (1 - 1e-9) else 1
    return 0 if sol.converged else 1


def cmd_nogo(args) -> int:
    policy = active_policy()
    if args.check not in NOGO_CHECKS:
        raise SchemaError(f"unknown check {args.check!r}; choose from {NOGO_CHECKS}")
    if args.samples < 1:
        raise SchemaError("samples must be at least 1")
    manifest = make_manifest(f"nogo-{args.check}", {}, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    rows = []
    gaps = []
    for i in range(args.samples):
        ntraj, tau_s = random_ntrajectory(rng, steps=args.grid)
        if args.check == "pi-second-order":
            ntraj = pi_close_ntrajectory(ntraj)
            diag = nogo_diagnostics(ntraj, tau_s, policy=policy)
            gap = diag.pi2_gap
        else:
            diag = nogo_diagnostics(ntraj, ntraj.tau_p, policy=policy)
            gap = diag.tsp_gap
        gaps.append(gap)
        rows.append((i, tau_s, gap))
    min_gap = min(gaps)
    trailer = [f"min_gap={fmt(min_gap)}", f"max_gap={fmt(max(gaps))}",
               f"mean_gap={fmt(float(np.mean(gaps)))}"]
    doc = csv_document("sample,tau_s,gap", rows, manifest.digest(), trailer)
    _write_output(doc, args.out)
    print(f"min gap over {args.samples} samples = {fmt(min_gap)}", file=sys.stderr)
    return 0 if min_gap >= -policy.nogo_tolerance else 1


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinpulse",
        description="design, analyze and verify short coherent control pulses")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="pulse file -> trajectory or amplitude CSV")
    p.add_argument("pulse_file")
    p.add_argument("--to", choices=("trajectory", "amplitude"), default="trajectory")
    p.add_argument("--grid", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("corrections", help="correction residuals and no-go gaps")
    p.add_argument("pulse_file")
    p.add_argument("--tau-s", type=float, default=None)
    p.add_argument("--grid", type=int, default=1024)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--targets", default="r1",
                   help="comma-separated residuals the exit code checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_corrections)

    p = sub.add_parser("verify", help="exact-propagator defect sweep and slope fit")
    p.add_argument("pulse_file")
    p.add_argument("bath_file")
    p.add_argument("--sweep", default="1e-3:1e-1:6", help="tau_p sweep min:max:points")
    p.add_argument("--regime", choices=tuple(SLOPE_BANDS), default="uncorrected")
    p.add_argument("--band", default=None, help="override slope band lo:hi")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("solve", help="solve a design problem file")
    p.add_argument("problem_file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--probe", action="store_true",
                   help="run as an infeasibility probe with certificate")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("nogo", help="randomized corroboration of the no-go gaps")
    p.add_argument("check", help="|".join(NOGO_CHECKS))
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_nogo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
