"""Command-line front end.

Subcommands write data files under ``--out`` (default ``./out``) together
with a ``manifest.json`` listing every output and its sha256 digest.

Exit codes: 0 success, 1 unexpected error, 2 config error, 3 solver
failure, 4 too many failed phase-diagram cells, 5 starved vessel during a
simulation.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from importlib import resources
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import continuation as cont
from . import simulator as sim
from .equilibrium import continue_curve, detect_folds, nearest_equilibrium, solve_equilibria
from .io import RunManifest, write_csv, write_json
from .model import ConfigError, NetworkError, config_to_dict, load_config
from .stability import (
    char_coefficients,
    classify_stability,
    classify_state,
    eigen_contours,
    find_eigenvalues,
)

log = logging.getLogger("twofluidnet")

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CELLS = 4
EXIT_STARVED = 5

BUNDLED = ("example1", "example2")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _floats(text, n, what):
    parts = text.split(":")
    if len(parts) != n:
        raise CliError(f"{what}: expected {n} colon-separated values, got {text!r}", EXIT_CONFIG)
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise CliError(f"{what}: {exc}", EXIT_CONFIG) from exc


def _config(args):
    src = args.config
    try:
        if src in BUNDLED or src in (b + ".json" for b in BUNDLED):
            name = src if src.endswith(".json") else src + ".json"
            with resources.as_file(resources.files("twofluidnet") / "data" / name) as p:
                cfg = load_config(p)
        else:
            cfg = load_config(src)
    except ConfigError as exc:
        raise CliError(f"invalid config {src}:\n  " + "\n  ".join(exc.problems), EXIT_CONFIG) from exc
    except OSError as exc:
        raise CliError(f"cannot read config {src}: {exc}", EXIT_CONFIG) from exc
    if args.contrast is not None:
        try:
            cfg = cfg.with_contrast(args.contrast)
        except ValueError as exc:
            raise CliError(f"--contrast: {exc}", EXIT_CONFIG) from exc
    if getattr(args, "q1", None) is not None:
        if not 0.0 <= args.q1 <= 1.0:
            raise CliError(f"--q1 must lie in [0, 1], got {args.q1}", EXIT_CONFIG)
        cfg = cfg.with_q1(args.q1)
    return cfg


# --------------------------------------------------------------------------
# equilibria


CURVE_HEADER = ["s", "q1", "q_c", "phi_a", "phi_b", "phi_c", "res_a", "res_b", "res_c", "stable_flag", "fold_flag"]


def cmd_equilibria(args, out: Path, manifest: RunManifest):
    cfg = _config(args)
    if args.q1_range:
        a, b, n = _floats(args.q1_range, 3, "--q1-range")
        if n < 2 or not (0 <= a < b <= 1):
            raise CliError("--q1-range needs 0 <= A < B <= 1 and N >= 2", EXIT_CONFIG)
        try:
            curve = continue_curve(cfg, (a, b), ds_max=(b - a) / (n - 1))
            folds = detect_folds(curve)
            stab = classify_stability(curve)
        except NetworkError as exc:
            raise CliError(f"continuation failed: {exc}", EXIT_SOLVER) from exc
        fold_idx = set(curve.fold_indices)
        rows = []
        for i, st in enumerate(curve.states):
            rows.append([curve.s[i], st.q1, st.q_c, st.phi_a, st.phi_b, st.phi_c,
                         st.res_a, st.res_b, st.res_c, int(stab.labels[i] == "stable"), int(i in fold_idx)])
        manifest.add(write_csv(out / "equilibria.csv", CURVE_HEADER, rows))
        meta = {
            "contrast": cfg.contrast,
            "fold_count": len(folds),
            "folds": [{"q1": f.q1, "q_c": f.q_c} for f in folds],
            "segments": [{"label": s.label, "q1_start": s.q1_start, "q1_stop": s.q1_stop} for s in stab.segments],
        }
        manifest.add(write_json(out / "equilibria_meta.json", meta))
        print(f"{len(curve)} curve points, {len(folds)} folds")
        return 0
    if args.q1 is None:
        raise CliError("give --q1 or --q1-range", EXIT_CONFIG)
    try:
        states = solve_equilibria(cfg)
    except NetworkError as exc:
        raise CliError(f"root finding failed: {exc}", EXIT_SOLVER) from exc
    if not states:
        raise CliError(f"no equilibrium at q1={cfg.q1}", EXIT_SOLVER)
    rows = []
    for st in states:
        label, n = classify_state(cfg, st)
        rows.append([0.0, st.q1, st.q_c, st.phi_a, st.phi_b, st.phi_c, st.res_a, st.res_b, st.res_c,
                     int(label == "stable"), 0])
    manifest.add(write_csv(out / "equilibria.csv", CURVE_HEADER, rows))
    for st in states:
        print(f"q_c = {st.q_c:.12g}")
    return 0


# --------------------------------------------------------------------------
# eigenvalues


def cmd_eigs(args, out: Path, manifest: RunManifest):
    cfg = _config(args)
    if args.q1 is None or args.qc is None:
        raise CliError("eigs needs --q1 and --qc", EXIT_CONFIG)
    window = _floats(args.window, 4, "--window")
    if not (window[1] > window[0] and window[3] > window[2]):
        raise CliError("--window must satisfy sigma0 < sigma1 and omega0 < omega1", EXIT_CONFIG)
    st = nearest_equilibrium(cfg, args.qc, max_distance=args.qc_tol)
    if st is None:
        raise CliError(f"no equilibrium within {args.qc_tol} of q_c={args.qc} at q1={cfg.q1}", EXIT_SOLVER)
    coeffs = char_coefficients(st, cfg)
    fld = eigen_contours(coeffs, window[:2], window[2:], args.grid)
    roots = find_eigenvalues(coeffs, window, args.grid)
    manifest.add(write_csv(out / "contours.csv", ["sigma", "omega", "R", "I"], fld.rows()))
    records = [{"q1": cfg.q1, "q_c": st.q_c, "contrast": cfg.contrast, "sigma": r.sigma, "omega": r.omega}
               for r in roots]
    manifest.add(write_json(out / "roots.json", {"equilibrium": {"q1": cfg.q1, "q_c": st.q_c},
                                                 "coefficients": coeffs.to_dict(), "roots": records}))
    for r in roots:
        print(f"lambda = {r.sigma:.6f} + {r.omega:.6f}i")
    return 0


# --------------------------------------------------------------------------
# phase diagram


def cmd_phase_diagram(args, out: Path, manifest: RunManifest):
    cfg = _config(args)
    a, b, m = _floats(args.contrast_range, 3, "--contrast-range")
    if args.q1_grid < 2 or m < 2 or not (0 < a < b):
        raise CliError("phase diagram needs >= 2 points per axis and 0 < A < B", EXIT_CONFIG)
    q1s = np.linspace(0.0, 1.0, int(args.q1_grid))
    ms = np.geomspace(a, b, int(m))
    diagram = cont.build_phase_diagram(cfg, q1s, ms, curves=not args.no_curves, threads=args.threads)
    manifest.add(write_csv(out / "diagram.csv", ["q1", "contrast", "region"], diagram.rows()))
    for c in diagram.curves:
        manifest.add(write_json(out / f"{c.label}.json", c.to_dict()))
    manifest.add(write_json(out / "meta.json", diagram.meta()))
    n_fail = len(diagram.failures)
    if n_fail:
        print(f"warning: {n_fail} cells failed", file=sys.stderr)
    print(f"regions present: {' '.join(diagram.regions_present())}")
    if diagram.failure_fraction > 0.1:
        raise CliError(f"{n_fail} of {diagram.labels.size} cells failed", EXIT_CELLS)
    return 0


# --------------------------------------------------------------------------
# simulation


def cmd_simulate(args, out: Path, manifest: RunManifest):
    cfg = _config(args)
    try:
        seed = sim.seed_equilibrium(cfg, args.seed_branch)
    except NetworkError as exc:
        raise CliError(str(exc), EXIT_SOLVER) from exc
    try:
        sc = sim.SimConfig(cells_per_vessel=args.cells, cfl=args.cfl, t_end=args.t_end,
                           transient_skip=args.skip, perturbation=args.perturb, seed_state=seed)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    try:
        res = sim.run(cfg, sc, record_phi=True)
    except sim.StarvedVesselError as exc:
        raise CliError(str(exc), EXIT_STARVED) from exc
    stats = sim.analyze_cycle(res.t, res.q_c, sc.skip)
    every = max(1, int(args.record_every))
    rows = res.rows()[::every]
    manifest.add(write_csv(out / "timeseries.csv", ["t", "q_c", "phi_a_mean", "phi_b_mean", "phi_c_mean"], rows))
    manifest.add(write_csv(out / "snapshot.csv", ["x", "phi_a", "phi_b", "phi_c"], res.state.snapshot()))
    doc = stats.to_dict()
    doc["seed"] = {"q1": seed.q1, "q_c": seed.q_c}
    manifest.add(write_json(out / "stats.json", doc))
    if stats.fixed_point:
        print("fixed point: no oscillation")
    else:
        print(f"period {stats.period:.6f}  omega {stats.omega:.6f}  converged {stats.converged}")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twofluidnet", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=_version())
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True,
                        help="JSON config path, or a bundled name (example1, example2)")
        sp.add_argument("--contrast", type=float, help="override the viscosity contrast")
        sp.add_argument("--out", default="out", help="output directory (default ./out)")

    e = sub.add_parser("equilibria", help="equilibria at one q1 or a continuation curve")
    common(e)
    g = e.add_mutually_exclusive_group()
    g.add_argument("--q1", type=float)
    g.add_argument("--q1-range", help="A:B:N")

    s = sub.add_parser("eigs", help="contour field and eigenvalues at an equilibrium")
    common(s)
    s.add_argument("--q1", type=float, required=True)
    s.add_argument("--qc", type=float, required=True)
    s.add_argument("--qc-tol", type=float, default=0.01,
                   help="largest allowed distance from --qc to the equilibrium used")
    s.add_argument("--window", default="-2:1:0:40", help="sigma0:sigma1:omega0:omega1")
    s.add_argument("--grid", type=int, default=400)

    d = sub.add_parser("phase-diagram", help="region raster and bifurcation curves")
    common(d)
    d.add_argument("--q1-grid", type=int, default=201)
    d.add_argument("--contrast-range", default="2:500:120", help="A:B:M (log-spaced)")
    d.add_argument("--threads", type=int, default=None,
                   help=f"worker processes (default ${cont.THREADS_ENV} or 1)")
    d.add_argument("--no-curves", action="store_true", help="skip continuation curves")

    m = sub.add_parser("simulate", help="direct simulation from an equilibrium")
    common(m)
    m.add_argument("--q1", type=float)
    m.add_argument("--seed-branch", choices=("pos", "neg", "auto"), default="auto")
    m.add_argument("--cells", type=int, default=512)
    m.add_argument("--cfl", type=float, default=0.9)
    m.add_argument("--t-end", type=float, default=100.0)
    m.add_argument("--skip", type=float, default=None, help="transient to discard (default t_end/2)")
    m.add_argument("--perturb", type=float, default=1e-4)
    m.add_argument("--record-every", type=int, default=1, help="keep every k-th step in timeseries.csv")
    return p


COMMANDS = {
    "equilibria": cmd_equilibria,
    "eigs": cmd_eigs,
    "phase-diagram": cmd_phase_diagram,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    t0 = time.perf_counter()
    try:
        manifest = RunManifest(args.command, {}, _version())
        manifest.config = config_to_dict(_config(args))
        out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](args, out, manifest)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except NetworkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
