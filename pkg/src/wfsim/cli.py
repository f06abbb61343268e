"""Command-line interface: simulation, reconstruction, allocation, scaling.

Exit codes: 0 success, 1 runtime error, 2 configuration error.  All CSVs
use '.' decimals, LF line endings, and a header row; every value is SI.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .allocation import (
    HQL_MODEL,
    SQL_MODEL,
    TABLE_HQL,
    TABLE_SQL,
    allocation_sweep,
    optimize_exact,
    paper_rule_sql,
    run_scaling_experiment,
    validate_paper_tables,
)
from .config import ExperimentConfig, load_config
from .errors import ConfigError, WfsimError
from .estimator import decompose_error, phase_truth, reconstruct
from .measurement import (
    acquire_ensemble_hql,
    acquire_ensemble_sql,
    read_ensemble_csv,
    write_ensemble_csv,
)
from .sensor import Protocol, ProtocolConfig, sensitivity_curve
from .waveform import estimate_holder

log = logging.getLogger("wfsim")


def _setup_logging():
    level = os.environ.get("WFSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg.readout = replace(cfg.readout, seed=args.seed)
    return cfg


def _outdir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _require_waveform(cfg: ExperimentConfig):
    if cfg.waveform is None:
        raise ConfigError("a 'waveform' config section is required for this command")


def cmd_simulate(args) -> int:
    cfg = _load(args)
    _require_waveform(cfg)
    w, p, m = cfg.waveform, cfg.sensor, cfg.readout
    kind = args.protocol or cfg.protocol.get("kind", "pdd-tdqd")
    t_s = args.t_s if args.t_s is not None else float(cfg.protocol.get("t_s", 150e-9))
    out = _outdir(args, cfg)

    if kind == Protocol.RAMSEY_SQL.value:
        n1 = args.n1 or int(cfg.grid.get("n1", 8))
        n2 = args.n2 or int(cfg.grid.get("n2", 8))
        ens = acquire_ensemble_sql(w, p, m, n1, n2, t_s)
    else:
        if kind != Protocol.PDD_TDQD.value:
            raise ConfigError(f"simulate supports 'ramsey-sql' or 'pdd-tdqd', got {kind!r}")
        k = args.k or int(cfg.protocol.get("k", 1))
        n_batches = args.seeds or int(cfg.experiment.get("seeds", 1))
        if args.t_i is not None:
            from .measurement import acquire_single_instant_hql
            ens = acquire_single_instant_hql(w, p, m, k, args.t_i, t_s,
                                             n_batches=n_batches)
        else:
            n1 = args.n1 or int(cfg.grid.get("n1", 8))
            ens = acquire_ensemble_hql(w, p, m, n1, 2 * k, t_s, n_batches=n_batches)
    path = out / "ensemble.csv"
    write_ensemble_csv(ens, path, deterministic=args.deterministic)
    log.info("wrote %s (%d x %d)", path, ens.n1, ens.estimates.shape[1])
    print(path)
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _load(args)
    _require_waveform(cfg)
    ens = read_ensemble_csv(args.ensemble)
    rec = reconstruct(ens)
    report = decompose_error(ens, cfg.waveform, cfg.sensor)
    out = _outdir(args, cfg)
    rows = [
        (repr(t), repr(float(rec(t))), repr(float(phase_truth(cfg.waveform, cfg.sensor, ens.t_s, t))))
        for t in ens.grid.instants
    ]
    _write_csv(out / "reconstruction.csv",
               ["t_seconds", "phi_tilde_rad", "phi_true_rad"], rows)
    report.to_json(out / "error_report.json")
    print(f"delta={math.sqrt(report.delta_sq):.6g} rad "
          f"(stat {math.sqrt(report.delta_stat_sq):.6g}, "
          f"det {math.sqrt(report.delta_det_sq):.6g})")
    return 0


def cmd_allocate(args) -> int:
    model = SQL_MODEL if args.scheme == "sql" else HQL_MODEL
    if args.paper_rule:
        if args.scheme != "sql":
            raise ConfigError("--paper-rule applies to the sql scheme only")
        n1, n2 = paper_rule_sql(args.n)
        print(f"n1={n1},n2={n2}")
        return 0
    alloc = optimize_exact(model, args.n, budget_mode=args.budget)
    print(f"n1={alloc.n1},n2={alloc.n2}")
    if args.budget and alloc.n1 * alloc.n2 != args.n:
        print(f"# budget mode: n1*n2={alloc.n1 * alloc.n2} <= N={args.n}", file=sys.stderr)
    return 0


def cmd_scaling(args) -> int:
    cfg = _load(args)
    from .allocation import calibrated_tone
    t_s = float(cfg.experiment.get("t_s", 150e-9))
    period = cfg.waveform.period_T if cfg.waveform is not None else 9.6e-6
    w = cfg.waveform or calibrated_tone(cfg.sensor, t_s, period)
    budgets = cfg.experiment.get("budgets") or [
        N for N, _, _ in (TABLE_SQL if args.scheme == "sql" else TABLE_HQL)
    ]
    seeds = args.seeds or int(cfg.experiment.get("seeds", 100))
    rows, slope = run_scaling_experiment(
        args.scheme, budgets, w, cfg.sensor, cfg.readout, seeds=seeds, t_s=t_s,
        decoherence=not args.no_decoherence,
        allocator=cfg.experiment.get("allocator", "exact"),
    )
    out = _outdir(args, cfg)
    _write_csv(out / f"scaling_{args.scheme}.csv",
               ["N", "delta_rad", "delta_ci_rad", "n1", "n2"],
               [(r["N"], repr(r["delta"]), repr(r["delta_ci"]), r["n1"], r["n2"])
                for r in rows])
    # gnuplot-ready whitespace-separated data
    with open(out / f"scaling_{args.scheme}.dat", "w") as fh:
        fh.write("# N delta_rad delta_ci_rad\n")
        for r in rows:
            fh.write(f"{r['N']} {r['delta']!r} {r['delta_ci']!r}\n")
    summary = {"scheme": args.scheme, "seeds": seeds, "fitted_slope": slope,
               "decoherence": not args.no_decoherence}
    with open(out / f"scaling_{args.scheme}_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"scheme={args.scheme} slope={slope:.4f}")
    return 0


def cmd_sensitivity(args) -> int:
    cfg = _load(args)
    T = cfg.waveform.period_T if cfg.waveform is not None else 2.4e-6
    t_s = float(cfg.protocol.get("t_s", 300e-9))
    kind = Protocol(args.protocol)
    ks, etas = sensitivity_curve(cfg.sensor, kind, range(1, args.k_max + 1), t_s, T)
    out = _outdir(args, cfg)
    _write_csv(out / f"sensitivity_{kind.value}.csv",
               ["k", "eta_tesla_per_sqrthz"],
               [(int(k), repr(float(e))) for k, e in zip(ks, etas)])
    best = int(ks[np.argmin(etas)])
    print(f"protocol={kind.value} k_opt={best} eta_opt={float(np.min(etas)):.6g} T/sqrt(Hz)")
    return 0


def cmd_compare_tables(args) -> int:
    rows = validate_paper_tables()
    cfg = _load(args)
    out = _outdir(args, cfg)
    with open(out / "table_report.json", "w") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
    n_fail = 0
    for r in rows:
        print(f"{r['scheme']} N={r['N']:>5} (n1={r['n1']}, n2={r['n2']}): {r['status']}")
        n_fail += r["status"] == "FAIL"
    return 1 if n_fail else 0


def cmd_holder(args) -> int:
    cfg = _load(args)
    _require_waveform(cfg)
    est = estimate_holder(cfg.waveform, n_grid=args.n_grid)
    print(f"q={est.q:.4g} M={est.M:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wfsim",
                                     description="waveform-estimation simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--seed", type=int, default=None, help="root RNG seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads (affects speed only, never results)")
        sp.add_argument("--deterministic", action="store_true",
                        help="suppress timestamps in metadata")

    sp = sub.add_parser("simulate", help="acquire a phase-estimate ensemble")
    common(sp)
    sp.add_argument("--protocol", choices=[p.value for p in Protocol])
    sp.add_argument("--k", type=int)
    sp.add_argument("--t-i", type=float, dest="t_i")
    sp.add_argument("--t-s", type=float, dest="t_s")
    sp.add_argument("--n1", type=int)
    sp.add_argument("--n2", type=int)
    sp.add_argument("--seeds", type=int, help="independent repetitions (HQL batches)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("reconstruct", help="ZOH reconstruction + error report")
    common(sp)
    sp.add_argument("--ensemble", required=True, help="ensemble CSV path")
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("allocate", help="optimal (n1, n2) for a budget N")
    common(sp)
    sp.add_argument("--scheme", choices=["sql", "hql"], required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--budget", action="store_true", help="allow n1*n2 <= N")
    sp.add_argument("--paper-rule", action="store_true",
                    help="use the asymptotic rule n1 = round((2N)^(1/3))")
    sp.set_defaults(func=cmd_allocate)

    sp = sub.add_parser("scaling", help="simulated delta vs budget N")
    common(sp)
    sp.add_argument("--scheme", choices=["sql", "hql"], required=True)
    sp.add_argument("--seeds", type=int)
    sp.add_argument("--no-decoherence", action="store_true")
    sp.set_defaults(func=cmd_scaling)

    sp = sub.add_parser("sensitivity", help="sensitivity vs pass count k")
    common(sp)
    sp.add_argument("--protocol", choices=["tdqd", "pdd-tdqd"], default="pdd-tdqd")
    sp.add_argument("--k-max", type=int, default=128)
    sp.set_defaults(func=cmd_sensitivity)

    sp = sub.add_parser("compare-tables", help="validate published allocation tables")
    common(sp)
    sp.set_defaults(func=cmd_compare_tables)

    sp = sub.add_parser("holder", help="smoothness (Hoelder) estimate of the waveform")
    common(sp)
    sp.add_argument("--n-grid", type=int, default=4096)
    sp.set_defaults(func=cmd_holder)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (WfsimError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
