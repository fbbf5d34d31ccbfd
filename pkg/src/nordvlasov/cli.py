"""Command line: ``run``, ``verify-flow``, ``ladder``, ``print-config-schema``.

Exit codes: 0 all monitors pass, 1 a monitor or solver failure, 2 a bad
configuration or usage.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

from .core import (CasimirSpec, SimConfig, config_schema, load_config,
                   make_initial_data, validate_config)
from .errors import ConfigError, NordVlasovError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _load(args):
    cfg = load_config(args.config) if args.config else SimConfig()
    over = {}
    if getattr(args, "threads", None) is not None:
        over["threads"] = args.threads
    if getattr(args, "snapshot_stride", None) is not None:
        over["snapshot_stride"] = args.snapshot_stride
    if getattr(args, "out", None) is not None:
        over["out_dir"] = args.out
    cfg = cfg.replace(**over)
    data = make_initial_data(cfg)
    validate_config(cfg, data)
    return cfg, data


def _print_checks(checks, out=None):
    out = out or sys.stdout
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:24s} {c.detail}", file=out)


def cmd_run(args) -> int:
    from .diagnostics import Monitor
    from .io import write_csv, write_profiles, write_snapshot
    from .kinetic import Simulation

    try:
        cfg, data = _load(args)
        spec = CasimirSpec(2.0, cfg.gamma).check()
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(cfg.out_dir, exist_ok=True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)   # vacuum notice
            sim = Simulation(cfg, data, validate=False)
        mon = Monitor(spec, data.support_radius, cfg.casimir_q,
                      momentum_warn_factor=cfg.momentum_warn_factor,
                      energy_tol=cfg.energy_tol, keep_slices=False)
        for st in sim.run():
            mon.update(st)
            if cfg.snapshot_stride and st.step % cfg.snapshot_stride == 0:
                write_snapshot(os.path.join(cfg.out_dir, f"snap_{st.step:06d}.nvkn"), st)
            if cfg.profile_stride and st.step % cfg.profile_stride == 0:
                write_profiles(os.path.join(cfg.out_dir, f"profile_{st.step:06d}.dat"), st)
    except NordVlasovError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    mon.finish()
    recs = mon.records
    write_csv(os.path.join(cfg.out_dir, "diagnostics.csv"), recs[0].columns(),
              [r.values() for r in recs])
    checks = mon.checks()
    cont = mon.continuity() if len(recs) > 1 else None
    print(f"run: {cfg.profile}, {len(sim.state.ens)} particles, {len(recs) - 1} steps, "
          f"t = {sim.state.t:.6g}")
    _print_checks(checks)
    drifts = mon.drifts()
    print("drifts: " + ", ".join(f"{k} {v:.3e}" for k, v in drifts.items()))
    if cont is not None:
        print(f"fitted C in |phi_hom|_inf <= C (1 + t): {cont.fitted_C:.6g}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def cmd_verify_flow(args) -> int:
    from .flowcheck import FlowCheckRow, catalog, run_catalog
    from .io import write_csv

    fields = catalog()
    if args.fields is not None:
        wanted = [f.strip() for f in args.fields.split(",") if f.strip()]
        known = {f.name: f for f in fields}
        bad = [w for w in wanted if w not in known]
        if bad:
            print(f"unknown field(s) {bad}; known: {sorted(known)}", file=sys.stderr)
            return EXIT_CONFIG
        fields = [known[w] for w in wanted]
    rows = run_catalog(fields, jacobian_exponent=args.jacobian_exponent) if fields else []
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "flowcheck.csv")
    write_csv(path, FlowCheckRow.COLUMNS, [r.as_row() for r in rows])
    for r in rows:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.check:22s} {r.field:15s} "
              f"q={r.q:g} t={r.t:g} err={r.error:.3e} tol={r.tol:.0e}")
    print(f"{sum(r.passed for r in rows)}/{len(rows)} checks passed; table in {path}")
    return EXIT_OK if all(r.passed for r in rows) else EXIT_FAIL


def cmd_ladder(args) -> int:
    from .ladder import run_ladder

    try:
        n_list = [int(v) for v in args.n.split(",") if v.strip()]
    except ValueError:
        print(f"bad --n {args.n!r}", file=sys.stderr)
        return EXIT_CONFIG
    if len(n_list) < 2:
        print("error: ladder needs >= 2 rungs", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg, data = _load(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            rep = run_ladder(cfg, data, n_list, kind=args.kind,
                             progress=lambda r: print(f"rung n={r.n}: {r.seconds:.1f} s"))
    except (NordVlasovError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    paths = rep.write(cfg.out_dir)
    for na, nb, mu, ph, eph in rep.pairs:
        print(f"n={na:>3d}->{nb:<3d} mu {mu:.4e}  phi {ph:.4e}  e^phi {eph:.4e}")
    for n in rep.n_values:
        print(f"n={n:>3d} max E/E0 {rep.energy_ratio[n]:.6f}  "
              f"young slack {rep.young_slack[n]:.3e}  split {rep.split_error[n]:.2e}")
    ok_energy = rep.energy_uniform(cfg.energy_tol)
    ok_finite = rep.finite()
    print(f"{'PASS' if ok_energy else 'FAIL'}  energy bound uniform in n")
    print(f"{'PASS' if ok_finite else 'FAIL'}  metrics finite")
    for name in ("mu_l2", "phi_l2"):
        # reported, not enforced: the convergence is only along a subsequence
        print(f"{'yes ' if rep.monotone(name) else 'no  '}  {name} decreasing")
    print("wrote " + ", ".join(paths))
    return EXIT_OK if ok_energy and ok_finite else EXIT_FAIL


def cmd_schema(args) -> int:
    print(config_schema())
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="nordvlasov", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", metavar="PATH", help="key = value configuration file")
        p.add_argument("--threads", type=int, default=None, metavar="N",
                       help="worker threads (default 1, bitwise reproducible)")
        p.add_argument("--out", metavar="DIR", default=None, help="output directory")

    p = sub.add_parser("run", help="coupled evolution with diagnostics")
    common(p)
    p.add_argument("--snapshot-stride", type=int, default=None, metavar="K",
                   help="binary snapshot every K steps (0: none)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify-flow", help="Jacobian and Liouville checks under prescribed fields")
    p.add_argument("--out", metavar="DIR", default="out")
    p.add_argument("--threads", type=int, default=None, metavar="N")
    p.add_argument("--fields", default=None,
                   help="comma-separated subset of the catalog (empty string: none)")
    p.add_argument("--jacobian-exponent", type=float, default=3.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify_flow)

    p = sub.add_parser("ladder", help="regularization ladder over mollifier indices")
    common(p)
    p.add_argument("--n", default="4,8,16,32", help="comma-separated increasing indices")
    p.add_argument("--kind", default="projected", choices=("projected", "sampled"))
    p.set_defaults(func=cmd_ladder)

    p = sub.add_parser("print-config-schema", help="print the configuration keys")
    p.set_defaults(func=cmd_schema)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
