"""Command-line front end: ``stokes-lagrange run|sweep|verify``.

Exit codes: 0 success, 1 verification failure, 2 validation error,
3 runtime error (partial outputs are written when available).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import artifacts
from .approximation import ApproximationProblem, convergence_sweep
from .config import final_tolerances, load, output_options, run_config, sweep_sizes
from .control_synthesis import ControlProblem, synthesize
from .errors import IncompleteTrajectory, MissingArtifacts, RuntimeFailure, ValidationError
from .geometry import Domain, hausdorff_distance, tube
from .model_flow import build_model_flow, flow_from_descriptor
from .pipeline import BlendedControl, Trajectory, reference_curves, run_full, verify_gronwall
from .stokes_basis import place_sources

log = logging.getLogger("stokes_lagrange")

EXIT_OK, EXIT_VERIFY, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3


def _out_dir(args, doc):
    d = args.out or output_options(doc)["directory"]
    if d is None:
        d = os.path.splitext(os.path.basename(args.config))[0] + "_out"
    os.makedirs(d, exist_ok=True)
    return d


def _emit(args, msg):
    if not args.quiet:
        print(msg)


def _write_run(out, traj, control, flow, config, formats, frames, frame_every):
    if "json" in formats:
        artifacts.write_json(os.path.join(out, artifacts.TRAJECTORY_FILE), traj.to_json())
        if control is not None:
            doc = control.to_json()
            doc["flow"] = None if flow is None else flow.descriptor()
            doc["delta"] = config.delta
            doc["dt"] = config.dt
            artifacts.write_json(os.path.join(out, artifacts.CONTROL_FILE), doc)
    if "csv" in formats:
        artifacts.write_text(os.path.join(out, artifacts.DIAGNOSTICS_FILE),
                             artifacts.diagnostics_csv(traj))
    if frames and "svg" in formats and traj.times:
        artifacts.write_frames(os.path.join(out, artifacts.FRAMES_DIR), traj, frame_every)


def cmd_run(args):
    doc = load(args.config)
    config = run_config(doc)
    opts = output_options(doc)
    out = _out_dir(args, doc)
    frames = args.frames == "on"
    try:
        res = run_full(config)
    except RuntimeFailure as e:
        partial = e.partial
        if isinstance(partial, Trajectory):
            _write_run(out, partial, None, None, config, opts["formats"], frames,
                       opts["frame_every"])
        raise
    traj = res.trajectory
    _write_run(out, traj, res.control, res.flow, config, opts["formats"], frames,
               opts["frame_every"])
    f = traj.final
    _emit(args, f"final hausdorff distance: {f['hausdorff']:.6g}")
    _emit(args, f"area drift: {f['area_drift']:.3g}")
    _emit(args, f"gronwall: lhs={res.gronwall['lhs']:.4g} rhs={res.gronwall['rhs']:.4g} "
                f"pass={res.gronwall['pass']}")
    _emit(args, f"outputs written to {out}")
    return EXIT_OK


def cmd_sweep(args):
    doc = load(args.config)
    sizes = sweep_sizes(doc)
    config = run_config(doc)
    out = _out_dir(args, doc)
    flow = build_model_flow(config.gamma0, config.gamma1, config.domain, config.scenario,
                            margin=config.margin, pad=config.pad)
    refs = reference_curves(flow, config.gamma0, config.nodes, config.dt, config.domain)
    ts0 = tube(refs[0], config.delta, config.domain)
    prob = ApproximationProblem(ts0.points, flow.velocity(0.0, ts0.points),
                                weights=ts0.weights, tau_svd=config.tau_svd)
    table = convergence_sweep(prob, config.domain, sizes, config.offset)
    synth = []
    for n in sizes:
        basis = place_sources(config.domain, n, config.offset)
        worst = 0.0
        for t_i, ref in zip(config.nodes, refs):
            cp = ControlProblem.around_curve(config.domain, ref,
                                             lambda x, t=float(t_i): flow.velocity(t, x),
                                             config.delta, config.rho)
            worst = max(worst, synthesize(cp, basis, config.tau_svd).residual_match)
        synth.append(worst)
        log.info("sweep size %d: synthesis residual %.3g", n, worst)
    lines = ["basis_size,residual_c0,residual_c1,smax,smin,synthesis_residual_match"]
    for row, s in zip(table, synth):
        r1 = "" if row.residual_c1 is None else repr(row.residual_c1)
        lines.append(f"{row.basis_size},{row.residual_c0!r},{r1},{row.smax!r},{row.smin!r},{s!r}")
    artifacts.write_text(os.path.join(out, artifacts.SWEEP_FILE), "\n".join(lines) + "\n")
    for row, s in zip(table, synth):
        _emit(args, f"size {row.basis_size:5d}: fit residual {row.residual_c0:.4g}, "
                    f"synthesis residual {s:.4g}")
    return EXIT_OK


def _load_artifacts(path):
    traj_path = os.path.join(path, artifacts.TRAJECTORY_FILE) if os.path.isdir(path) else path
    ctrl_path = os.path.join(os.path.dirname(traj_path) or ".", artifacts.CONTROL_FILE)
    for p in (traj_path, ctrl_path):
        if not os.path.isfile(p):
            raise MissingArtifacts(f"missing {p}")
    try:
        tdoc = artifacts.read_json(traj_path)
        cdoc = artifacts.read_json(ctrl_path)
    except ValueError as e:
        raise MissingArtifacts(f"unreadable artifact: {e}") from None
    try:
        traj = Trajectory.from_json(tdoc)
        if traj.domain is None:
            raise IncompleteTrajectory("trajectory has no domain")
        control = BlendedControl.from_json(cdoc, traj.domain)
        flow = flow_from_descriptor(cdoc["flow"])
        delta, dt = float(cdoc["delta"]), float(cdoc["dt"])
    except (KeyError, TypeError, IncompleteTrajectory) as e:
        raise MissingArtifacts(f"incomplete artifacts: {e}") from None
    return traj, control, flow, delta, dt


def verify_artifacts(path, area_tol=1e-3, hausdorff_tol=None, rng_seed=0):
    """Re-check stored outputs; returns a list of ``(name, ok, detail)``."""
    traj, control, flow, delta, dt = _load_artifacts(path)
    domain: Domain = traj.domain
    checks = []
    times = np.asarray(traj.times)
    checks.append(("timestamps increasing", bool(np.all(np.diff(times) > 0)),
                   f"{len(times)} snapshots"))
    checks.append(("trajectory complete", traj.complete, ""))
    outside = 0
    for c in traj.curves:
        outside += int(np.count_nonzero(~domain.inside(c)))
        outside += int(np.count_nonzero(domain.boundary_distance(c) <= domain.tol_boundary))
    checks.append(("containment", outside == 0,
                   "containment violated" if outside else "all snapshot points inside"))
    drift = abs(traj.area[-1] - traj.area[0]) / abs(traj.area[0])
    checks.append(("area drift", drift <= area_tol, f"{drift:.3g} (tol {area_tol:g})"))
    if traj.gamma1 is not None:
        h = hausdorff_distance(traj.final_curve, traj.gamma1)
        stored = traj.final.get("hausdorff")
        same = stored is not None and abs(h - stored) <= 1e-12 * max(1.0, h)
        checks.append(("final distance reproducible", same, f"{h:.6g}"))
        if hausdorff_tol is not None:
            checks.append(("final distance", h <= hausdorff_tol, f"{h:.6g} (tol {hausdorff_tol:g})"))
    ts = np.random.default_rng(rng_seed).uniform(0.0, 1.0, 200)
    pou = float(np.abs(control.kappa(ts).sum(axis=1) - 1).max())
    checks.append(("partition of unity", pou <= 1e-12, f"{pou:.2e}"))
    try:
        rep = verify_gronwall(traj, flow, control, delta=delta, dt=dt)
        checks.append(("gronwall", rep["pass"], f"lhs={rep['lhs']:.4g} rhs={rep['rhs']:.4g}"))
    except IncompleteTrajectory as e:
        checks.append(("gronwall", False, str(e)))
    return checks


def cmd_verify(args):
    hausdorff_tol = None
    area_tol = 1e-3
    if args.config:
        doc = load(args.config)
        tol = final_tolerances(doc)
        hausdorff_tol = tol["final_hausdorff"]
        area_tol = tol["area_drift"]
    checks = verify_artifacts(args.path, area_tol, hausdorff_tol)
    ok = True
    for name, passed, detail in checks:
        ok &= bool(passed)
        _emit(args, f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser():
    p = argparse.ArgumentParser(prog="stokes-lagrange",
                                description="Boundary control of Stokes flow for moving fluid blobs.")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        sp.add_argument("--config", required=needs_config, metavar="PATH",
                        help="scenario JSON file")
        sp.add_argument("--out", metavar="DIR", help="output directory")
        sp.add_argument("--frames", choices=("on", "off"), default="on",
                        help="write SVG frames (default on)")
        sp.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="suppress progress output")

    common(sub.add_parser("run", help="run the control pipeline"))
    common(sub.add_parser("sweep", help="basis-size convergence sweep"))
    v = sub.add_parser("verify", help="re-check stored run outputs")
    v.add_argument("path", metavar="TRAJECTORY", help="trajectory.json or its directory")
    v.add_argument("--config", metavar="PATH", help="scenario file with final tolerances")
    v.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify}
    try:
        return handlers[args.command](args)
    except ValidationError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeFailure as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as e:
        print(f"error: ValueError: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

