"""Command-line entry points for the experiments and the self-test suite."""

from __future__ import annotations

import argparse
import os
import sys

from . import experiments as ex
from .config import ConfigError, parse_config
from .io import ensure_dir, write_energy_csv, write_error_table_csv, \
    write_h1_error_table_csv, write_vtk_snapshot


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chns",
                                     description="Energy-stable two-phase flow solver")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--tau", help="time step, or comma list for stability")
        p.add_argument("--nx", help="mesh subdivisions, or comma list for converge")
        p.add_argument("--t-end", type=float, dest="t_end", help="final time")

    for name in ("converge", "coarsen", "relax", "stability"):
        common(sub.add_parser(name))
    sub.add_parser("selftest")
    return parser


def _run_converge(cfg):
    out = ensure_dir(cfg.out_dir)
    records = ex.run_convergence(list(cfg.levels), cfg.params(), t_end=cfg.t_end,
                                 tau_rule=lambda h: cfg.tau_factor * h ** 3)
    write_error_table_csv(records, os.path.join(out, "l2_errors.csv"))
    write_h1_error_table_csv(records, os.path.join(out, "h1_errors.csv"))
    for name in ("phi_linf_l2", "mu_l2_l2", "u_linf_l2", "p_l2_l2"):
        rates = ex.rates_between(records, name)
        print(f"{name}: errors {[getattr(r, name) for r in records]} rates {rates}")
    print(f"wrote {out}/l2_errors.csv and {out}/h1_errors.csv")
    return 0


def _write_snapshots(run, out, prefix=""):
    nv = run.ops.mesh.num_vertices
    for t, state in run.snapshots:
        fields = {"phi": state.phi[:nv], "mu": state.mu[:nv], "p": state.p[:nv],
                  "u": state.u}
        path = os.path.join(out, f"{prefix}snap_t{t:g}.vtk")
        write_vtk_snapshot(run.ops.mesh, fields, path)


def _run_coarsen(cfg):
    out = ensure_dir(cfg.out_dir)
    run = ex.run_coarsening(cfg.seed, cfg.nx, cfg.tau, cfg.t_end,
                            snapshot_times=cfg.snapshot_times, params=cfg.params(),
                            strict_root=cfg.strict_root)
    write_energy_csv(run.trace, os.path.join(out, "energy.csv"))
    _write_snapshots(run, out)
    verdict = "nonincreasing" if run.trace.monotone() else "NOT monotone"
    print(f"coarsening energy trace: {verdict}")
    return 0 if run.trace.monotone() else 1


def _run_relax(cfg):
    out = ensure_dir(cfg.out_dir)
    polygon = cfg.polygon if cfg.polygon is not None else ex.default_cross_polygon()
    run = ex.run_relaxation(polygon, cfg.nx, cfg.tau, cfg.t_end,
                            snapshot_times=cfg.snapshot_times, params=cfg.params(),
                            strict_root=cfg.strict_root)
    write_energy_csv(run.trace, os.path.join(out, "energy.csv"))
    _write_snapshots(run, out)
    verdict = "nonincreasing" if run.trace.monotone() else "NOT monotone"
    print(f"relaxation energy trace: {verdict}")
    return 0


def _run_stability(cfg, tau_list):
    out = ensure_dir(cfg.out_dir)
    runs = ex.run_stability_sweep(tau_list, cfg.seed, cfg.nx, cfg.t_end,
                                  params=cfg.params())
    ok = True
    for tau, run in runs.items():
        write_energy_csv(run.trace, os.path.join(out, f"energy_tau{tau:g}.csv"))
        monotone = run.trace.monotone()
        ok = ok and monotone
        print(f"tau={tau:g}: {'nonincreasing' if monotone else 'NOT monotone'}")
    return 0 if ok else 1


def _selftest() -> int:
    from . import selftest
    return selftest.run()


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "selftest":
        return _selftest()

    overrides = {"out_dir": args.out, "seed": args.seed, "t_end": args.t_end}
    tau_list = None
    if args.tau:
        taus = [float(v) for v in str(args.tau).split(",")]
        if args.command == "stability":
            tau_list = taus
        else:
            overrides["tau"] = taus[0]
    if args.nx:
        nxs = [int(v) for v in str(args.nx).split(",")]
        if args.command == "converge":
            overrides["levels"] = nxs
        else:
            overrides["nx"] = nxs[0]

    try:
        cfg = parse_config(args.config, kind=args.command, overrides=overrides)
        if args.command == "converge":
            return _run_converge(cfg)
        if args.command == "coarsen":
            return _run_coarsen(cfg)
        if args.command == "relax":
            return _run_relax(cfg)
        return _run_stability(cfg, tau_list or cfg.tau_list)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
