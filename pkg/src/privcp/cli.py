"""Command line entry point.

Exit codes: 0 on success, 2 on configuration errors, 3 on data errors.
"""

import argparse
import sys
from pathlib import Path

from . import harness, synth
from .data import DataError, write_csv

EXIT_CONFIG = 2
EXIT_DATA = 3


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args):
    ds, params = synth.generate(args.n, args.seed, args.kind.upper())
    out = Path(args.out)
    write_csv(ds, out)
    out.with_suffix(".params.json").write_text(params.to_json() + "\n", encoding="utf-8")
    print(f"wrote {out} ({ds.n} rows, {int(ds.m.sum())} corrupted)")


def cmd_run(args):
    from . import plots

    cfg = harness.ExperimentConfig.load(args.config)
    out = _out_dir(args)
    reports, agg = harness.run_experiment(cfg)
    harness.write_metrics(reports, out / "metrics.csv")
    harness.write_rows(agg, out / "aggregate.csv")
    plots.coverage_bars(agg, cfg.alpha, out / "coverage.svg")
    for a in agg:
        print(f"{a['method']:<13} coverage {a['coverage']:.4f} +- {a['coverage_se']:.4f}  "
              f"length {a['mean_length']:.3f}")


def cmd_sweep(args):
    from . import plots

    cfg = harness.ExperimentConfig.load(args.config)
    out = _out_dir(args)
    rows, summary, crit = harness.sweep_constant_delta(cfg)
    harness.write_rows(rows, out / "sweep_metrics.csv")
    harness.write_rows(summary, out / "sweep_aggregate.csv")
    plots.delta_sweep(summary, crit, cfg.alpha, out / "delta_sweep.svg")
    print(f"-W/(n+1) ~ {crit:.3f}")
    for s in summary:
        print(f"delta {s['delta']:+.2f}  coverage {s['coverage']:.4f}")


def cmd_region(args):
    from . import plots
    from .weights import write_region_csv

    cfg = harness.ExperimentConfig.load(args.config)
    out = _out_dir(args)
    res = harness.sweep_region(cfg)
    write_region_csv(res.predicate, out / "region_predicate.csv")
    emp = harness.replace(res.predicate, labels=res.empirical)
    write_region_csv(emp, out / "region_empirical.csv")
    plots.region_heatmap(res.predicate.labels, res.predicate.delta_min, res.predicate.delta_max,
                         res.boundary, out / "region.svg")
    frac, cells = res.agreement()
    print(f"agreement {frac:.4f} over {cells} cells")


def cmd_triply(args):
    cfg = harness.ExperimentConfig.load(args.config)
    out = _out_dir(args)
    rows, summary = harness.triply_matrix(cfg)
    harness.write_rows(rows, out / "triply_metrics.csv")
    harness.write_rows(summary, out / "triply_aggregate.csv")
    for s in summary:
        print(f"QR={s['qr']:<10} PCP={s['pcp']:<10} UI={s['ui']:<10} coverage {s['coverage']:.4f}")


def cmd_selftest(args):
    from . import selftest

    return selftest.main(verbose=not args.quiet)


def build_parser():
    p = argparse.ArgumentParser(prog="privcp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset as CSV")
    g.add_argument("--kind", choices=["under", "over", "hard"], required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    for name, fn, hlp in (("run", cmd_run, "run every configured method over repeated splits"),
                          ("sweep-delta", cmd_sweep, "PCP coverage with weights shifted by constants"),
                          ("region", cmd_region, "validity region grid at a fixed test point"),
                          ("triply", cmd_triply, "oracle/degenerate matrix of the triply robust union")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", required=True)
        s.add_argument("--out-dir", default=".")
        s.set_defaults(fn=fn)

    s = sub.add_parser("selftest", help="run the oracle-equivalence checks")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(fn=cmd_selftest)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        rc = args.fn(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())
