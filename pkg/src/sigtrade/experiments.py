"""Reusable experiment pipelines: OU stopping study and pair backtests."""
from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from .backtest import (
    BaselineConfig,
    Comparison,
    PairManifest,
    PriceSeries,
    baseline_strategy,
    compare,
    write_prices,
)
from .engine import StrategyConfig, Trade, TradeSchedule, TradingCosts, run_sequential
from .errors import DataError
from .models import (
    TRADING_DAYS,
    BootstrapSampler,
    OUParams,
    OUSampler,
    SpreadSpec,
    construct_spread,
    default_block_length,
    generate_training_set,
    simulate_ou_paths,
    uniform_grid,
)
from .policy import OptimizerConfig, path_features, stopping_index, train
from .signature import DEFAULT_ORDER, Path

log = logging.getLogger(__name__)

# (mean_level, vol) rows of the OU stopping study; speed is 10 throughout
TABLE1_ROWS = [(1.0, 1.0), (5.0, 1.0), (10.0, 1.0), (15.0, 1.0), (20.0, 1.0),
               (10.0, 0.1), (10.0, 0.5), (10.0, 1.0), (10.0, 1.5), (10.0, 2.0)]


@dataclass(frozen=True)
class StoppingStudy:
    n: int = 100
    horizon: float = 1.0
    order: int = DEFAULT_ORDER
    train_count: int = 100
    test_count: int = 10
    optimizer: OptimizerConfig = OptimizerConfig()


def stopped_value(params: OUParams, seed: int, study: StoppingStudy = StoppingStudy(), x0: float | None = None) -> float:
    """Mean of ``X`` at the learned stopping index over fresh test paths.

    Paths start at ``x0`` (default: the mean level); the payoff is ``Y = X``.
    """
    x0 = params.mean_level if x0 is None else x0
    times = uniform_grid(study.n, study.horizon)
    sampler = OUSampler(params)
    training = generate_training_set(sampler, x0, times, study.train_count, order=study.order, seed=2 * seed)
    opt = study.optimizer
    result = train(training, OptimizerConfig(opt.iterations, opt.step_size, opt.init_scale, seed,
                                             opt.sharpness, opt.threshold, opt.beta1, opt.beta2, opt.eps))
    test = sampler.sample(x0, times, study.test_count, 2 * seed + 1)
    idx = stopping_index(result.policy, path_features(times, test, study.order, result.policy.normalizer, batch=True))
    return float(np.mean(test[np.arange(len(test)), idx]))


def table1(rows=TABLE1_ROWS, seeds=range(10), speed: float = 10.0, study: StoppingStudy = StoppingStudy(),
           x0: float | None = None) -> list[dict]:
    """Seed-averaged stopped values per ``(mean_level, vol)`` row; paths start at ``x0`` or the row's mean."""
    out = []
    for mean_level, vol in rows:
        params = OUParams(mean_level, speed, vol)
        values = [stopped_value(params, s, study, x0) for s in seeds]
        out.append({"mean_level": mean_level, "vol": vol, "speed": speed,
                    "stopped_value": float(np.mean(values)), "per_seed": values})
        log.info("row mu=%g sigma=%g: %.4f", mean_level, vol, out[-1]["stopped_value"])
    return out


# ---------------------------------------------------------------------------
# pair backtests


def make_synthetic_pair(length: int = 504, hedge: float = 0.8, ou: OUParams = OUParams(0.0, 20.0, 0.1),
                        seed: int = 0, start: dt.date = dt.date(2021, 1, 4)) -> tuple[PriceSeries, PriceSeries]:
    """Two price series whose normalised spread ``A - hedge * B`` is OU."""
    rng = np.random.default_rng([seed, 7])
    times = np.arange(length) / TRADING_DAYS
    b_norm = np.exp(np.cumsum(np.concatenate([[0.0], 0.015 * rng.standard_normal(length - 1)])))
    noise = simulate_ou_paths(ou, 0.0, times, 1, seed)[0]
    a_norm = 1.0 + hedge * (b_norm - 1.0) + noise
    dates, day = [], start
    while len(dates) < length:
        if day.weekday() < 5:
            dates.append(day)
        day += dt.timedelta(days=1)
    return PriceSeries("SYNA", dates, 50.0 * a_norm), PriceSeries("SYNB", dates, 80.0 * b_norm)


def write_synthetic_pair(directory, formation: int = 252, **kwargs) -> FsPath:
    directory = FsPath(directory)
    directory.mkdir(parents=True, exist_ok=True)
    a, b = make_synthetic_pair(**kwargs)
    write_prices(directory / f"{a.symbol}.csv", a)
    write_prices(directory / f"{b.symbol}.csv", b)
    manifest = directory / "pair.json"
    manifest.write_text(
        '{\n'
        f'  "symbol_a": "{a.symbol}",\n  "symbol_b": "{b.symbol}",\n'
        f'  "file_a": "{a.symbol}.csv",\n  "file_b": "{b.symbol}.csv",\n'
        f'  "formation": {formation}\n'
        '}\n'
    )
    return manifest


@dataclass(frozen=True, eq=False)
class PairRun:
    spec: SpreadSpec
    dates: tuple
    spread: Path  # trading window
    schedule: TradeSchedule
    baseline: TradeSchedule
    comparison: Comparison


def _baseline_on_window(full: np.ndarray, formation: int, config: BaselineConfig) -> TradeSchedule:
    # the band lookback reaches into the formation window; indices are shifted to the trading window
    lead = config.window
    sched = baseline_strategy(full[formation - lead:], config)
    trades = [Trade(t.entry_index - lead, t.exit_index - lead, t.entry_value, t.exit_value) for t in sched.trades]
    return TradeSchedule("long", trades, sched.forced_close)


def run_pair(manifest: PairManifest, strategy: StrategyConfig = StrategyConfig(), costs: TradingCosts = TradingCosts(),
             baseline: BaselineConfig = BaselineConfig(), beta_grid=None) -> PairRun:
    """Form the spread on the formation window, then trade the rest of the data."""
    a, b = manifest.load_aligned()
    f = manifest.formation
    if f < 3:
        raise DataError(f"formation window of {f} points is too short")
    if len(a) - f < 2:
        raise DataError(f"empty trading window: {len(a)} aligned prices, formation {f}")
    if f < baseline.window:
        raise DataError(f"formation window ({f}) shorter than the baseline window ({baseline.window})")
    spec, _ = construct_spread(a.closes[:f], b.closes[:f], beta_grid, symbols=(a.symbol, b.symbol))
    full = spec.spread(a.closes, b.closes)
    dt_ = 1.0 / TRADING_DAYS
    if strategy.generator == "ou-fit":
        sampler = OUSampler(spec.fitted)
    else:
        sampler = BootstrapSampler(full[:f], default_block_length(f))
    observed = Path(dt_ * np.arange(len(full) - f), full[f:])
    schedule = run_sequential(observed, strategy, costs, sampler)
    base = _baseline_on_window(full, f, baseline)
    comparison = compare(observed, schedule, base, costs)
    return PairRun(spec, a.dates[f:], observed, schedule, base, comparison)
