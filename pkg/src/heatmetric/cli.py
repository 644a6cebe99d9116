"""Batch experiment runner.

Every report of the library is exposed as a subcommand with file-based
inputs and CSV/JSON outputs:

    heatmetric flow        --space space.json --times 0,0.1,0.5 --out runs/
    heatmetric tangency    --geometry sphere --r 1 --lmax 80 --tmax 0.2 --tmin 0.0125
    heatmetric contraction --geometry circle --L 6.2831853 --n 64 --times 0.05,0.1
    heatmetric continuity  --space space.json --t 0.1 --deltas 0.08,0.04,0.02
    heatmetric refine      --L 6.2831853 --t 0.1 --grids 64,128,256,512 --probes 0:0.5
    heatmetric selftest    --seed 0

Matrices are written as CSV (row-major, header row of point ids), check
records as CSV lines (name, t, value, bound, pass), and every run emits a
JSON summary {command, config, checks, wall_time_seconds}. Exit code 0 iff
all enabled assertions pass, 1 on assertion failure, 2 on input error.
All tolerances default to the library's documented values and are echoed
into the summary; there is no unseeded randomness anywhere (the one random
fixture, the 16-point Sinkhorn comparison, takes --seed).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import flow as flow_mod
from . import heat as heat_mod
from . import tangent as tangent_mod
from . import transport as transport_mod
from .geometry import SphereGeometry, TorusGeometry, model_sphere
from .spaces import SpaceError, build_space, model_circle, model_torus

__all__ = ["main", "run"]


class InputError(Exception):
    """Bad configuration or input file (exit code 2)."""


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_matrix_csv(path, mat):
    mat = np.asarray(mat)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([str(i) for i in range(mat.shape[1])])
        for row in mat:
            w.writerow([_fmt(v) for v in row])


def write_checks_csv(path, checks):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "t", "value", "bound", "pass"])
        for c in checks:
            w.writerow([c["name"], _fmt(c.get("t", "")), _fmt(c["value"]),
                        _fmt(c["bound"]), _fmt(c["pass"])])


def check(name, value, bound, ok, t=None):
    rec = {"name": name, "value": float(value), "bound": float(bound), "pass": bool(ok)}
    if t is not None:
        rec["t"] = float(t)
    return rec


def load_space(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read space file {path}: {exc}") from exc
    try:
        edges = [(int(i), int(j), float(ell)) for i, j, ell in data["edges"]]
        cond = data.get("conductances")
        return build_space(
            int(data["points"]), edges, np.asarray(data["measure"], dtype=float),
            K=data.get("K"), conductances=None if cond is None else np.asarray(cond, float),
        )
    except (KeyError, TypeError, ValueError, SpaceError) as exc:
        raise InputError(f"malformed space file {path}: {exc}") from exc


def parse_times(text):
    try:
        times = [float(s) for s in text.split(",") if s != ""]
    except ValueError as exc:
        raise InputError(f"bad time list {text!r}") from exc
    if not times or any(t < 0 for t in times):
        raise InputError("times must be >= 0")
    if sorted(times) != times:
        raise InputError("times must be sorted ascending")
    return times


def parse_pairs(text):
    pairs = []
    for token in text.split(","):
        if not token:
            continue
        try:
            a, b = token.split(":")
            pairs.append((int(a), int(b)))
        except ValueError as exc:
            raise InputError(f"bad pair {token!r} (expected i:j)") from exc
    if not pairs:
        raise InputError("empty pair list")
    return pairs


def build_geometry(args):
    kind = args.geometry
    if kind == "circle":
        geom, space = model_circle(args.L, args.n)
        return geom, space
    if kind == "torus":
        geom, space = model_torus(args.L1, args.L2, args.n1, args.n2)
        return geom, space
    if kind == "sphere":
        return model_sphere(args.r, args.ntheta, args.lmax), None
    raise InputError(f"unknown geometry {kind!r}")


def resolve_input(args):
    """Exactly one of --space / --geometry."""
    has_space = getattr(args, "space", None) is not None
    has_geom = getattr(args, "geometry", None) is not None
    if has_space == has_geom:
        raise InputError("provide exactly one input: --space file or --geometry")
    if has_space:
        return load_space(args.space), None
    geom, space = build_geometry(args)
    return space, geom


# ---------------------------------------------------------------------------
# subcommands

def cmd_flow(args, out: Path):
    space, geom = resolve_input(args)
    if space is None:
        raise InputError("the flow subcommand needs a discrete space or grid geometry")
    times = parse_times(args.times)
    hs = heat_mod.spectral_decompose(space)
    checks, files = [], []
    pairs = parse_pairs(args.pairs) if args.pairs else None
    for t in times:
        tag = format(t, ".10g").replace(".", "p").replace("-", "m")
        if pairs is not None:
            vals = flow_mod.dtilde_pairs(space, hs, t, pairs)
            path = out / f"dtilde_pairs_{tag}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["x", "y", "dtilde"])
                for (x, y), v in zip(pairs, vals):
                    w.writerow([x, y, _fmt(v)])
            files.append(path)
            continue
        if space.n > args.cap:
            raise InputError(f"full matrices capped at n={args.cap}; pass --pairs")
        fm = flow_mod.flow_matrices(space, hs, t, cap=args.cap)
        p1, p2 = out / f"dtilde_{tag}.csv", out / f"dt_{tag}.csv"
        write_matrix_csv(p1, fm.dtilde)
        write_matrix_csv(p2, fm.dt)
        files += [p1, p2]
        viol = fm.max_axiom_violation()
        checks.append(check("flow_axioms", viol, args.tol, viol <= args.tol, t=t))
        if t > 0:
            # reported, never asserted: how far the arc distance has drifted
            off = ~np.eye(space.n, dtype=bool)
            distortion = float(np.max(space.dist[off] / fm.dt[off]))
            print(f"INFO t={tag}: empirical distortion max d/d_t = {distortion:.6f}")
        if t == 0:
            exact = float(np.abs(fm.dtilde - space.dist).max())
            checks.append(check("dtilde0_equals_d", exact, 0.0, exact == 0.0, t=0.0))
        elif space.K is not None:
            excess = float((fm.dt - np.exp(-space.K * t) * space.dist).max())
            checks.append(check("dt_below_scaled_original", excess, args.tol,
                                excess <= args.tol, t=t))
    return checks, files


def cmd_tangency(args, out: Path):
    if args.geometry is None:
        raise InputError("tangency needs --geometry")
    geom, _ = build_geometry(args)
    if args.times:
        t_grid = parse_times(args.times)
    else:
        if args.tmax <= 0 or args.tmin <= 0 or args.tmin > args.tmax:
            raise InputError("need 0 < tmin <= tmax")
        t_grid, t = [], args.tmax
        while t >= args.tmin * (1 - 1e-12):
            t_grid.append(t)
            t /= 2
    v = tuple(float(s) for s in args.v.split(",")) if "," in args.v else float(args.v)
    if isinstance(geom, TorusGeometry) and not isinstance(v, tuple):
        v = (float(v), 0.0)
    report = tangent_mod.tangency_experiment(geom, x=None, v=v, t_grid=t_grid,
                                             slope_tol=args.tol)
    path = out / "tangency.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "g_t", "slope", "hessian_mass", "target", "deviation", "pass"])
        for row in report.rows():
            w.writerow([_fmt(row[k]) for k in
                        ("t", "g_t", "slope", "hessian_mass", "target", "deviation")] + [""])
        w.writerow(["extrapolated", _fmt(report.extrapolated_slope), "", "",
                    _fmt(report.target), _fmt(report.deviation),
                    _fmt(report.passed(args.tol))])
    checks = [
        check("tangency_slope", report.extrapolated_slope, report.target,
              report.deviation <= args.tol),
        check("tangency_one_sided", 1.0 if report.one_sided_ok else 0.0, 1.0,
              report.one_sided_ok),
    ]
    return checks, [path]


def _zonal_pairs(geom, widths):
    pairs = [(flow_mod.ZonalMeasure.pole(geom), flow_mod.ZonalMeasure.pole(geom, south=True))]
    for s0 in widths:
        pairs.append((flow_mod.ZonalMeasure.heat_kernel(geom, s0),
                      flow_mod.ZonalMeasure.heat_kernel(geom, s0, south=True)))
    return pairs


def cmd_contraction(args, out: Path):
    space, geom = resolve_input(args)
    times = parse_times(args.times)
    if isinstance(geom, SphereGeometry):
        widths = [float(s) for s in args.widths.split(",") if s]
        report = flow_mod.sphere_contraction_report(geom, times, _zonal_pairs(geom, widths),
                                                    rel_tol=args.tol)
    else:
        hs = heat_mod.spectral_decompose(space)
        if args.pairs:
            pairs = parse_pairs(args.pairs)
        else:
            rng = np.random.default_rng(args.seed)
            idx = rng.choice(space.n, size=(min(4, space.n // 2), 2), replace=False)
            pairs = [tuple(map(int, p)) for p in idx]
        K = args.K if args.K is not None else space.K
        if K is None:
            raise InputError("contraction needs K (declare in the space file or pass --K)")
        report = flow_mod.contraction_report(space, hs, times, pairs, K=K, rel_tol=args.tol)
    path = out / "contraction.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair", "t", "w2_initial", "w2_evolved", "ratio", "bound", "pass"])
        for r in report.records:
            w.writerow([f"{r.pair[0]}|{r.pair[1]}", _fmt(r.t), _fmt(r.w2_initial),
                        _fmt(r.w2_evolved), _fmt(r.ratio), _fmt(r.bound),
                        _fmt(r.excess <= args.tol)])
    checks = [check("contraction_max_excess", report.max_excess, args.tol,
                    report.passed())]
    return checks, [path]


def cmd_continuity(args, out: Path):
    space, geom = resolve_input(args)
    if space is None:
        raise InputError("continuity runs on a discrete space or grid geometry")
    deltas = [float(s) for s in args.deltas.split(",") if s]
    if any(d < 0 for d in deltas):
        raise InputError("deltas must be >= 0")
    hs = heat_mod.spectral_decompose(space)
    K = args.K if args.K is not None else space.K
    report = flow_mod.time_continuity_report(space, hs, args.t, deltas, K=K, cap=args.cap)
    path = out / "continuity.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "sup_difference"])
        for d, s in zip(report.deltas, report.sup_differences):
            w.writerow([_fmt(d), _fmt(s)])
    checks = [
        check("continuity_decreasing", 1.0 if report.decreasing else 0.0, 1.0,
              report.decreasing, t=args.t),
        check("semigroup_bound_excess", report.semigroup_excess, args.tol,
              report.semigroup_excess <= args.tol, t=args.t),
    ]
    return checks, [path]


def cmd_refine(args, out: Path):
    grids = [int(s) for s in args.grids.split(",") if s]
    probes = []
    for token in args.probes.split(","):
        if not token:
            continue
        a, b = token.split(":")
        probes.append((float(a), float(b)))
    if not probes:
        raise InputError("empty probe list")
    try:
        report = flow_mod.refinement_stability(args.L, args.t, grids, probes)
    except flow_mod.FlowError as exc:
        raise InputError(str(exc)) from exc
    path = out / "refine.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["probe"] + [f"n{n}" for n in report.grid_sizes]
                   + [f"diff{k}" for k in range(report.differences.shape[1])]
                   + [f"order{k}" for k in range(report.orders.shape[1])])
        for p, vals, diffs, orders in zip(probes, report.probe_values,
                                          report.differences, report.orders):
            w.writerow([f"{p[0]}:{p[1]}"] + [_fmt(v) for v in vals]
                       + [_fmt(d) for d in diffs] + [_fmt(o) for o in orders])
    checks = [check("refinement_order", report.min_order, args.order,
                    report.min_order >= args.order, t=args.t)]
    return checks, [path]


def cmd_selftest(args, out: Path):
    checks = []
    # two-point closed form
    space2 = build_space(2, [(0, 1, 1.0)], [1.0, 1.0], K=0.0, conductances=[1.0])
    hs2 = heat_mod.spectral_decompose(space2)
    t = 0.3
    fm = flow_mod.flow_matrices(space2, hs2, t)
    dev = abs(fm.dtilde[0, 1] - np.exp(-t))
    checks.append(check("two_point_closed_form", dev, 1e-9, dev <= 1e-9, t=t))
    # heat sanity on a circle grid
    _, space = model_circle(2 * np.pi, 24)
    hs = heat_mod.spectral_decompose(space)
    rho_s = heat_mod.heat_kernel_matrix(hs, 0.2).rho
    rho_t = heat_mod.heat_kernel_matrix(hs, 0.3).rho
    rho_st = heat_mod.heat_kernel_matrix(hs, 0.5).rho
    ck = float(np.abs(rho_s @ (space.measure[:, None] * rho_t) - rho_st).max())
    checks.append(check("chapman_kolmogorov", ck, 1e-9, ck <= 1e-9))
    mass = float(np.abs(rho_t @ space.measure - 1).max())
    checks.append(check("kernel_mass", mass, 1e-8, mass <= 1e-8))
    margin = heat_mod.heat_injectivity_margin(hs, 0.3)
    checks.append(check("injectivity_margin", margin, -1e-12, margin >= -1e-12))
    ts = np.linspace(0, 1.5, 7)
    mu = space.delta(0)
    ents = [heat_mod.entropy(heat_mod.heat_apply(hs, s, mu), space.probability_measure())
            for s in ts]
    mono = float(max(np.diff(ents).max(), 0.0))
    checks.append(check("entropy_nonincreasing", mono, 1e-12, mono <= 1e-12))
    # transport: duality gap and involution
    rng = np.random.default_rng(args.seed)
    mu = rng.random(16) + 0.05
    nu = rng.random(16) + 0.05
    mu, nu = mu / mu.sum(), nu / nu.sum()
    _, sub = model_circle(1.0, 16)
    res = transport_mod.w2_exact(mu, nu, sub.dist)
    gap = transport_mod.dual_gap(mu, nu, res.value, res.potentials, dist=sub.dist)
    checks.append(check("duality_gap", gap, 1e-8, -1e-10 <= gap <= 1e-8))
    phi = 1e-3 * np.sin(2 * np.pi * np.arange(16) / 16)
    phi_cc = transport_mod.c_transform(transport_mod.c_transform(phi, sub.dist), sub.dist)
    inv = float(np.abs(phi_cc - phi).max())
    checks.append(check("c_transform_involution", inv, 1e-9, inv <= 1e-9))
    sink = transport_mod.w2_sinkhorn(mu, nu, sub.dist, eps_final=1e-3 * sub.dist.max() ** 2)
    rel = abs(sink - res.value) / res.value
    checks.append(check("sinkhorn_vs_exact", rel, 0.01, rel <= 0.01))
    # contraction on the circle
    rep = flow_mod.contraction_report(space, hs, [0.1, 0.5], [(0, 12), (3, 10)])
    checks.append(check("circle_contraction_excess", rep.max_excess, 1e-6, rep.passed()))
    # Gaussian envelope diagnostic: reported, not asserted (the envelope's
    # structure constants are unspecified)
    ratios = heat_mod.gaussian_bound_ratios(space, hs, 0.2)
    print(f"INFO gaussian envelope ratio range [{ratios.min():.3e}, {ratios.max():.3e}]")
    return checks, []


# ---------------------------------------------------------------------------

def _add_geometry_args(p):
    p.add_argument("--geometry", choices=["circle", "torus", "sphere"])
    p.add_argument("--L", type=float, default=2 * np.pi)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--L1", type=float, default=2 * np.pi)
    p.add_argument("--L2", type=float, default=2 * np.pi)
    p.add_argument("--n1", type=int, default=16)
    p.add_argument("--n2", type=int, default=16)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--ntheta", type=int, default=512)
    p.add_argument("--lmax", type=int, default=120)


def build_parser():
    parser = argparse.ArgumentParser(prog="heatmetric",
                                     description="heat-kernel metric flow experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flow", help="dtilde_t / d_t matrices")
    p.add_argument("--space")
    _add_geometry_args(p)
    p.add_argument("--times", required=True)
    p.add_argument("--pairs")
    p.add_argument("--cap", type=int, default=256)
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("tangency", help="small-time Ricci tangency experiment")
    _add_geometry_args(p)
    p.add_argument("--v", default="1.0")
    p.add_argument("--tmax", type=float, default=0.2)
    p.add_argument("--tmin", type=float, default=0.0125)
    p.add_argument("--times")
    p.add_argument("--tol", type=float, default=0.05)

    p = sub.add_parser("contraction", help="W2 contraction report")
    p.add_argument("--space")
    _add_geometry_args(p)
    p.add_argument("--times", required=True)
    p.add_argument("--pairs")
    p.add_argument("--K", type=float)
    p.add_argument("--widths", default="0.1,0.3")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)

    p = sub.add_parser("continuity", help="time continuity of the flow")
    p.add_argument("--space")
    _add_geometry_args(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--deltas", required=True)
    p.add_argument("--K", type=float)
    p.add_argument("--cap", type=int, default=256)
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("refine", help="circle grid refinement stability")
    p.add_argument("--L", type=float, default=2 * np.pi)
    p.add_argument("--t", type=float, default=0.1)
    p.add_argument("--grids", default="64,128,256,512")
    p.add_argument("--probes", default="0:0.5")
    p.add_argument("--order", type=float, default=1.0)

    p = sub.add_parser("selftest", help="invariant suite on built-in fixtures")
    p.add_argument("--seed", type=int, default=0)

    for sp in sub.choices.values():
        sp.add_argument("--out", default=".")
    return parser


COMMANDS = {
    "flow": cmd_flow,
    "tangency": cmd_tangency,
    "contraction": cmd_contraction,
    "continuity": cmd_continuity,
    "refine": cmd_refine,
    "selftest": cmd_selftest,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    t0 = time.time()
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        checks, files = COMMANDS[args.command](args, out)
    except (InputError, SpaceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    wall = time.time() - t0
    summary = {
        "command": args.command,
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "command"},
        "checks": checks,
        "wall_time_seconds": wall,
    }
    write_checks_csv(out / f"{args.command}_checks.csv", checks)
    with open(out / f"{args.command}_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, default=str)
        fh.write("\n")
    for c in checks:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{status} {c['name']}: value={_fmt(c['value'])} bound={_fmt(c['bound'])}")
    for f in files:
        print(f"wrote {f}")
    return 0 if all(c["pass"] for c in checks) else 1


def main():  # console entry point
    sys.exit(run())


if __name__ == "__main__":
    main()
