"""Command-line entry point: ``sigtrade <command> [options]``.

Configuration comes from built-in defaults, then an optional JSON file
(``--config``, schema ``{"config_version": 1, "seed": ..., "strategy": {...},
"optimizer": {...}, "costs": {...}, "baseline": {...}, "ou": {...},
"study": {...}}``), then command-line flags.  Exit status is 0 on success,
1 on runtime or training failure and 2 on invalid input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path as FsPath

import numpy as np

from . import __version__
from .backtest import BaselineConfig, PairManifest, write_equity_csv
from .engine import StrategyConfig, TradingCosts
from .errors import DataError, InvalidArgument, SigTradeError
from .experiments import TABLE1_ROWS, StoppingStudy, run_pair, table1
from .models import OUParams, OUSampler, fit_ou_mle, generate_training_set, simulate_ou, uniform_grid
from .policy import OptimizerConfig, train
from .signature import Path, augment, signature

CONFIG_VERSION = 1
log = logging.getLogger("sigtrade")

# flag dest -> (config section, field)
_FLAG_MAP = {
    "side": ("strategy", "side"), "order": ("strategy", "order"), "threshold": ("strategy", "threshold"),
    "sharpness": ("strategy", "sharpness"), "samples": ("strategy", "sample_count"),
    "generator": ("strategy", "generator"), "min_window": ("strategy", "min_window"),
    "iterations": ("optimizer", "iterations"), "step_size": ("optimizer", "step_size"),
    "init_scale": ("optimizer", "init_scale"),
    "entry_cost": ("costs", "entry_cost"), "exit_cost": ("costs", "exit_cost"),
    "entry_discount": ("costs", "entry_discount"), "exit_discount": ("costs", "exit_discount"),
    "band_mult": ("baseline", "band_mult"), "band_window": ("baseline", "window"),
    "mean_level": ("ou", "mean_level"), "speed": ("ou", "speed"), "vol": ("ou", "vol"),
    "x0": ("ou", "x0"), "n": ("study", "n"), "horizon": ("study", "horizon"),
    "train_count": ("study", "train_count"), "test_count": ("study", "test_count"),
}

_DEFAULTS = {
    "strategy": {f.name: f.default for f in fields(StrategyConfig) if f.name != "optimizer"},
    "optimizer": {k: v for k, v in asdict(OptimizerConfig()).items() if k not in ("seed", "sharpness", "threshold")},
    "costs": asdict(TradingCosts()),
    "baseline": asdict(BaselineConfig()),
    "ou": {"mean_level": 10.0, "speed": 10.0, "vol": 1.0, "x0": None},
    "study": {k: v for k, v in asdict(StoppingStudy()).items() if k not in ("optimizer", "order")},
}


def resolve_config(args) -> dict:
    cfg = {"config_version": CONFIG_VERSION, "seed": 0}
    cfg.update({k: dict(v) for k, v in _DEFAULTS.items()})
    if getattr(args, "config", None):
        path = FsPath(args.config)
        if not path.exists():
            raise DataError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
        version = data.get("config_version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise DataError(f"{path}: unsupported config_version {version!r}")
        for key, value in data.items():
            if isinstance(value, dict):
                if key not in cfg:
                    raise DataError(f"{path}: unknown config section {key!r}")
                unknown = set(value) - set(cfg[key])
                if unknown:
                    raise DataError(f"{path}: unknown keys in {key!r}: {sorted(unknown)}")
                cfg[key].update(value)
            elif key == "seed":
                cfg["seed"] = int(value)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    for dest, (section, name) in _FLAG_MAP.items():
        value = getattr(args, dest, None)
        if value is not None:
            cfg[section][name] = value
    return cfg


def _optimizer(cfg) -> OptimizerConfig:
    s = cfg["strategy"]
    return OptimizerConfig(seed=cfg["seed"], sharpness=s["sharpness"], threshold=s["threshold"], **cfg["optimizer"])


def _strategy(cfg) -> StrategyConfig:
    return StrategyConfig(optimizer=_optimizer(cfg), **cfg["strategy"])


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None):
    if out:
        FsPath(out).write_text(text)
    else:
        sys.stdout.write(text)


def read_path_csv(file) -> Path:
    """Rows ``time,value[,value...]``.

    Lines starting with ``#`` are skipped and a non-numeric first row is
    treated as a header.
    """
    file = FsPath(file)
    if not file.exists():
        raise DataError(f"input file not found: {file}")
    lines = [ln for ln in file.read_text().splitlines() if not ln.lstrip().startswith("#")]
    rows = [r for r in csv.reader(lines) if r and any(c.strip() for c in r)]
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise DataError(f"{file}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] < 2:
        raise DataError(f"{file}: expected columns time,value[,...]")
    try:
        return Path(data[:, 0], data[:, 1:])
    except InvalidArgument as exc:
        raise DataError(f"{file}: {exc}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_sig(args, cfg):
    path = read_path_csv(args.input)
    sig = signature(augment(path, rescale_time=not args.no_rescale), args.sig_order)
    sys.stdout.write(json.dumps(sig.to_dict()) + "\n")


def cmd_simulate(args, cfg):
    ou, study = cfg["ou"], cfg["study"]
    params = OUParams(ou["mean_level"], ou["speed"], ou["vol"])
    x0 = params.mean_level if ou["x0"] is None else ou["x0"]
    path = simulate_ou(params, x0, study["n"], study["horizon"], cfg["seed"])
    buf = io.StringIO()
    buf.write("".join(f"# {line}\n" for line in _dump({"config": cfg}).splitlines()))
    buf.write("time,x\n")
    for t, x in zip(path.times, path.values[:, 0]):
        buf.write(f"{float(t)!r},{float(x)!r}\n")
    _emit(buf.getvalue(), args.out)


def cmd_fit(args, cfg):
    path = read_path_csv(args.input)
    dt = args.dt if args.dt is not None else float(np.mean(np.diff(path.times)))
    params = fit_ou_mle(path.values[:, 0], dt)
    _emit(_dump({"config": cfg, "dt": dt, "fitted": params.to_dict()}), args.out)


def cmd_train(args, cfg):
    ou, study = cfg["ou"], cfg["study"]
    params = OUParams(ou["mean_level"], ou["speed"], ou["vol"])
    x0 = params.mean_level if ou["x0"] is None else ou["x0"]
    times = uniform_grid(study["n"], study["horizon"])
    training = generate_training_set(OUSampler(params), x0, times, study["train_count"],
                                     order=cfg["strategy"]["order"], seed=2 * cfg["seed"])
    result = train(training, _optimizer(cfg))
    out = {"config": cfg, "loss": result.loss, "iterations": len(result.history) - 1,
           "best_iteration": result.best_iteration, "policy": result.policy.to_dict()}
    _emit(_dump(out), args.out)


def cmd_table1(args, cfg):
    study = cfg["study"]
    rows = [(cfg["ou"]["mean_level"], cfg["ou"]["vol"])] if args.single_row else TABLE1_ROWS
    st = StoppingStudy(study["n"], study["horizon"], cfg["strategy"]["order"], study["train_count"],
                       study["test_count"], _optimizer(cfg))
    seeds = range(cfg["seed"], cfg["seed"] + args.seeds)
    result = table1(rows, seeds, cfg["ou"]["speed"], st, x0=cfg["ou"]["x0"])
    if args.format == "json":
        _emit(_dump({"config": cfg, "rows": result}), args.out)
    else:
        buf = io.StringIO()
        buf.write("".join(f"# {line}\n" for line in _dump({"config": cfg}).splitlines()))
        buf.write("mean_level,vol,speed,stopped_value\n")
        for r in result:
            buf.write(f"{r['mean_level']!r},{r['vol']!r},{r['speed']!r},{r['stopped_value']:.6f}\n")
        _emit(buf.getvalue(), args.out)


def _run_pair(args, cfg):
    manifest_path = FsPath(args.manifest)
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}")
    manifest = PairManifest.load(manifest_path)
    for f in (manifest.file_a, manifest.file_b):
        if not f.exists():
            raise DataError(f"price file not found: {f}")
    run = run_pair(manifest, _strategy(cfg), TradingCosts(**cfg["costs"]), BaselineConfig(**cfg["baseline"]))
    outdir = FsPath(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    costs = TradingCosts(**cfg["costs"])
    pnl = [t.pnl(run.schedule.side, costs) for t in run.schedule.trades]
    schedule = {"config": cfg, "spread": run.spec.to_dict(), **run.schedule.to_dict(), "trade_pnl": pnl,
                "dates": [run.dates[t.entry_index].isoformat() + "/" + run.dates[t.exit_index].isoformat()
                          for t in run.schedule.trades],
                "problems": list(run.schedule.audit)}
    (outdir / "schedule.json").write_text(_dump(schedule))
    write_equity_csv(outdir / "equity.csv", run.comparison, run.dates, {"config": cfg})
    return run, outdir


def cmd_trade(args, cfg):
    run, outdir = _run_pair(args, cfg)
    report = {"config": cfg, "strategy": run.comparison.strategy.to_dict()}
    (outdir / "report.json").write_text(_dump(report))
    sys.stdout.write(f"{len(run.schedule)} trades; report written to {outdir}\n")


def cmd_compare(args, cfg):
    run, outdir = _run_pair(args, cfg)
    report = {"config": cfg, **run.comparison.to_dict(),
              "baseline_schedule": run.baseline.to_dict()}
    (outdir / "report.json").write_text(_dump(report))
    sys.stdout.write(run.comparison.table() + "\n")


# ---------------------------------------------------------------------------
# parser


def _add_strategy_flags(p):
    g = p.add_argument_group("strategy")
    g.add_argument("--side", choices=["long", "short"])
    g.add_argument("--order", type=int, help="signature truncation order N (default 3)")
    g.add_argument("--threshold", type=float, help="stopping threshold k (default 0.05)")
    g.add_argument("--sharpness", type=float, help="sigmoid sharpness mu (default 20)")
    g.add_argument("--samples", type=int, help="training samples per problem (default 100)")
    g.add_argument("--generator", choices=["ou-fit", "bootstrap"])
    g.add_argument("--min-window", type=int)
    g.add_argument("--iterations", type=int)
    g.add_argument("--step-size", type=float)
    g.add_argument("--init-scale", type=float)


def _add_cost_flags(p):
    g = p.add_argument_group("costs")
    for flag in ("--entry-cost", "--exit-cost", "--entry-discount", "--exit-discount"):
        g.add_argument(flag, type=float)


def _add_ou_flags(p):
    g = p.add_argument_group("OU model and grid")
    for flag in ("--mean-level", "--speed", "--vol", "--x0", "--horizon"):
        g.add_argument(flag, type=float)
    g.add_argument("--n", type=int, help="number of grid steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sigtrade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flags override it)")
    common.add_argument("--seed", type=int)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sig", parents=[common], help="print the signature of a time-augmented path CSV")
    p.add_argument("input")
    p.add_argument("--order", dest="sig_order", type=int, default=3)
    p.add_argument("--no-rescale", action="store_true", help="keep raw times in the time coordinate")
    p.set_defaults(func=cmd_sig)

    p = sub.add_parser("simulate", parents=[common], help="simulate one OU path as CSV")
    _add_ou_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit OU parameters to a path CSV")
    p.add_argument("input")
    p.add_argument("--dt", type=float, help="time step (default: mean spacing of the time column)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("train", parents=[common], help="train a single-stop policy on OU samples (payoff Y = X)")
    _add_ou_flags(p)
    _add_strategy_flags(p)
    p.add_argument("--train-count", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("table1", parents=[common], help="OU stopping study over the (mean, vol) sweep")
    _add_ou_flags(p)
    _add_strategy_flags(p)
    p.add_argument("--train-count", type=int)
    p.add_argument("--test-count", type=int)
    p.add_argument("--seeds", type=int, default=10, help="number of consecutive seeds to average")
    p.add_argument("--single-row", action="store_true", help="only the row given by --mean-level/--vol")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_table1)

    for name, func, helptext in (("trade", cmd_trade, "run the sequential strategy on a price pair"),
                                 ("compare", cmd_compare, "strategy versus moving-band baseline")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("manifest", help="pair manifest JSON")
        p.add_argument("--out", required=True, help="output directory")
        _add_strategy_flags(p)
        _add_cost_flags(p)
        g = p.add_argument_group("baseline")
        g.add_argument("--band-mult", type=float, help="band multiplier (default 0.1)")
        g.add_argument("--band-window", type=int, help="moving-statistics lookback (default 100)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        args.func(args, cfg)
    except (DataError, InvalidArgument, FileNotFoundError) as exc:
        print(f"sigtrade {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except SigTradeError as exc:
        print(f"sigtrade {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
