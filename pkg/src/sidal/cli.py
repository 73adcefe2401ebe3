"""Command-line interface: ``sidal run | replicate | verify | list-benchmarks``."""

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import benchmarks, campaign, config

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sidal",
        description="Active learning under self-induced Boltzmann distributions.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", default=os.environ.get("SIDAL_OUT_DIR", "."),
                       help="output directory (default: $SIDAL_OUT_DIR or .)")
        p.add_argument("--method")
        p.add_argument("--benchmark")
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--budget", type=int)
        p.add_argument("--particles", type=int)

    run = sub.add_parser("run", help="run one campaign")
    common(run)
    run.add_argument("--seed", type=int)

    rep = sub.add_parser("replicate", help="run one campaign per seed")
    common(rep)
    rep.add_argument("--seeds", required=True, help="comma list or a:b range")
    rep.add_argument("--jobs", type=int, default=1)

    sub.add_parser("verify", help="run the diagnostic self-checks")
    sub.add_parser("list-benchmarks", help="print registered benchmarks")
    return parser


def parse_seeds(text):
    if ":" in text:
        a, b = text.split(":", 1)
        return list(range(int(a), int(b)))
    return [int(s) for s in text.split(",") if s.strip()]


def _load_config(args):
    pairs = {}
    if args.config:
        pairs = config.parse_pairs(Path(args.config).read_text())
    overrides = {
        "method": args.method, "benchmark": args.benchmark, "lambda": args.lam,
        "budget": args.budget, "smc.particles": args.particles,
        "seed": getattr(args, "seed", None),
    }
    for key, value in overrides.items():
        if value is not None:
            pairs[key] = str(value)
    return config.config_from_pairs(pairs)


def _stem(cfg):
    return f"{cfg.benchmark}_{cfg.method}_seed{cfg.seed}"


def cmd_run(args):
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{_stem(cfg)}.csv"
    if path.exists():
        raise FileExistsError(f"{path} exists; refusing to overwrite")
    c = campaign.Campaign(cfg).run()
    campaign.write_records_csv(c, path)
    (out / f"{_stem(cfg)}.cfg").write_text(config.serialize_config(cfg))
    print(f"wrote {path} ({len(c.records)} iterations, "
          f"final wmse {c.records[-1].weighted_mse:.4g})" if c.records else f"wrote {path}")
    if cfg.diagnostics:
        rep = campaign.diagnostics_suite(c.records, c.posterior, c.bench, c.spec)
        for name, ok, detail in rep["checks"]:
            print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
        return EXIT_OK if rep["passed"] else EXIT_FAIL
    return EXIT_OK


def cmd_replicate(args):
    cfg = _load_config(args)
    seeds = parse_seeds(args.seeds)
    if not seeds:
        raise config.ConfigError("--seeds must name at least one seed")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.benchmark}_{cfg.method}"
    targets = [out / f"{_stem(replace(cfg, seed=s))}.csv" for s in seeds]
    targets += [out / f"{stem}_summary.csv", out / f"{stem}_summary.json"]
    clash = [str(p) for p in targets if p.exists()]
    if clash:
        raise FileExistsError(f"refusing to overwrite {', '.join(clash)}")
    campaigns, summary = campaign.run_replications(cfg, seeds, args.jobs)
    for s, c in campaigns.items():
        campaign.write_records_csv(c, out / f"{_stem(c.cfg)}.csv")
    meta = {"config": config.serialize_config(cfg),
            "eval_grid": next(iter(campaigns.values())).bench.grid_note}
    campaign.write_summary(summary, targets[-2], targets[-1], meta)
    print(f"wrote {len(seeds)} campaign files and {targets[-2].name}")
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_checks
    return EXIT_OK if run_checks() else EXIT_FAIL


def cmd_list(args):
    for name in benchmarks.list_benchmarks():
        print(name)
    return EXIT_OK


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    handler = {"run": cmd_run, "replicate": cmd_replicate, "verify": cmd_verify,
               "list-benchmarks": cmd_list}[args.command]
    try:
        return handler(args)
    except config.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
