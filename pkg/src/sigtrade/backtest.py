"""Price ingestion, the moving-band baseline, equity accounting and metrics."""
from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from .engine import Trade, TradeSchedule, TradingCosts
from .errors import DataError, InvalidArgument
from .signature import Path

INITIAL_CAPITAL = 1.0
PERIODS_PER_YEAR = 252


@dataclass(frozen=True, eq=False)
class PriceSeries:
    symbol: str
    dates: tuple
    closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=float)
        dates = tuple(self.dates)
        if len(dates) != len(closes):
            raise DataError("dates and closes differ in length")
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise DataError(f"{self.symbol}: dates must be strictly increasing")
        if np.any(~np.isfinite(closes)) or np.any(closes <= 0):
            raise DataError(f"{self.symbol}: closes must be positive")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "closes", closes)

    def __len__(self) -> int:
        return len(self.closes)


def load_prices(file, symbol: str | None = None) -> PriceSeries:
    """Read a ``date,close`` CSV with ISO-8601 dates.

    Rows are re-sorted by date.  Errors name the offending line number.
    """
    file = FsPath(file)
    symbol = symbol or file.stem
    rows = []
    with open(file, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["date", "close"]:
            raise DataError(f"{file}: expected header 'date,close'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2 or not row[1].strip():
                raise DataError(f"{file}:{lineno}: missing close")
            try:
                date = dt.date.fromisoformat(row[0].strip())
                close = float(row[1])
            except ValueError as exc:
                raise DataError(f"{file}:{lineno}: cannot parse row {row!r} ({exc})") from None
            if not (math.isfinite(close) and close > 0):
                raise DataError(f"{file}:{lineno}: close must be positive, got {close}")
            rows.append((date, close, lineno))
    rows.sort(key=lambda r: r[0])
    for (d0, _, l0), (d1, _, l1) in zip(rows, rows[1:]):
        if d0 == d1:
            raise DataError(f"{file}: duplicate date {d0} on lines {l0} and {l1}")
    if not rows:
        raise DataError(f"{file}: no price rows")
    return PriceSeries(symbol, [r[0] for r in rows], np.array([r[1] for r in rows]))


def write_prices(file, series: PriceSeries):
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "close"])
        for d, c in zip(series.dates, series.closes):
            w.writerow([d.isoformat(), repr(float(c))])


@dataclass(frozen=True)
class PairManifest:
    symbol_a: str
    symbol_b: str
    file_a: FsPath
    file_b: FsPath
    formation: int = 252

    @classmethod
    def load(cls, file) -> "PairManifest":
        file = FsPath(file)
        try:
            data = json.loads(file.read_text())
            base = file.parent
            return cls(
                data.get("symbol_a", FsPath(data["file_a"]).stem),
                data.get("symbol_b", FsPath(data["file_b"]).stem),
                base / data["file_a"],
                base / data["file_b"],
                int(data.get("formation", 252)),
            )
        except FileNotFoundError:
            raise
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{file}: invalid pair manifest ({exc})") from None

    def load_aligned(self) -> tuple[PriceSeries, PriceSeries]:
        """Both series restricted to their common dates."""
        a = load_prices(self.file_a, self.symbol_a)
        b = load_prices(self.file_b, self.symbol_b)
        common = sorted(set(a.dates) & set(b.dates))
        ia = {d: i for i, d in enumerate(a.dates)}
        ib = {d: i for i, d in enumerate(b.dates)}
        return (
            PriceSeries(a.symbol, common, a.closes[[ia[d] for d in common]]),
            PriceSeries(b.symbol, common, b.closes[[ib[d] for d in common]]),
        )


# ---------------------------------------------------------------------------
# baseline


@dataclass(frozen=True)
class BaselineConfig:
    band_mult: float = 0.1
    window: int = 100

    def __post_init__(self):
        if self.window < 2:
            raise InvalidArgument("baseline window must be >= 2")
        if self.band_mult < 0:
            raise InvalidArgument("band_mult must be non-negative")


def moving_bands(values, window: int, band_mult: float):
    """Lower/upper bands at each index from the preceding ``window`` values.

    Entries before ``window`` are NaN; the current value is excluded.
    """
    values = np.asarray(values, dtype=float)
    lower = np.full(len(values), np.nan)
    upper = np.full(len(values), np.nan)
    if len(values) > window:
        views = np.lib.stride_tricks.sliding_window_view(values[:-1], window)
        ma, sd = views.mean(axis=1), views.std(axis=1, ddof=1)
        lower[window:] = ma - band_mult * sd
        upper[window:] = ma + band_mult * sd
    return lower, upper


def _values(spread) -> np.ndarray:
    if isinstance(spread, Path):
        return spread.values[:, 0]
    return np.asarray(spread, dtype=float).reshape(-1)


def baseline_strategy(spread, config: BaselineConfig = BaselineConfig()) -> TradeSchedule:
    """Long when below ``MA - k Std``, flat again when above ``MA + k Std``."""
    x = _values(spread)
    if len(x) <= config.window:
        raise InvalidArgument(f"spread of length {len(x)} is not longer than the window {config.window}")
    lower, upper = moving_bands(x, config.window, config.band_mult)
    n = len(x) - 1
    trades, entry, forced = [], None, False
    for j in range(config.window, n + 1):
        if entry is None:
            if x[j] < lower[j] and j < n:
                entry = j
        elif x[j] > upper[j]:
            trades.append(Trade(entry, j, float(x[entry]), float(x[j])))
            entry = None
    if entry is not None:
        trades.append(Trade(entry, n, float(x[entry]), float(x[n])))
        forced = True
    return TradeSchedule("long", trades, forced)


# ---------------------------------------------------------------------------
# accounting


@dataclass(frozen=True, eq=False)
class EquityCurve:
    """Strategy value on the spread's grid.

    ``changes[j] = values[j] - values[j - 1]`` with ``values[-1]`` read as
    the initial capital, so the changes telescope to the total PnL.
    """

    values: np.ndarray
    initial: float = INITIAL_CAPITAL

    @property
    def changes(self) -> np.ndarray:
        return np.diff(self.values, prepend=self.initial)

    @property
    def daily_returns(self) -> np.ndarray:
        return self.changes / self.initial

    def __len__(self) -> int:
        return len(self.values)


def equity_curve(spread, schedule: TradeSchedule, costs: TradingCosts = TradingCosts(),
                 initial: float = INITIAL_CAPITAL) -> EquityCurve:
    """Unit-notional equity: marks the spread while in a position, pays costs at the trade indices."""
    x = _values(spread)
    n = len(x) - 1
    sign = 1.0 if schedule.side == "long" else -1.0
    delta = np.zeros(n + 1)
    step = np.diff(x)
    for t in schedule.trades:
        if not (0 <= t.entry_index < t.exit_index <= n):
            raise InvalidArgument(f"trade ({t.entry_index}, {t.exit_index}) is outside the spread of length {n + 1}")
        delta[t.entry_index + 1 : t.exit_index + 1] += sign * step[t.entry_index : t.exit_index]
        delta[t.entry_index] -= costs.entry_cost
        delta[t.exit_index] -= costs.exit_cost
    return EquityCurve(initial + np.cumsum(delta), initial)


@dataclass(frozen=True)
class PerformanceReport:
    """Per-period statistics in percent of initial capital.

    ``sharpe`` is None when the return standard deviation is zero.
    """

    daily_ret: float
    daily_std: float
    sharpe: float | None
    max_dd: float
    cum_pnl: float
    trade_num: int

    @property
    def sharpe_defined(self) -> bool:
        return self.sharpe is not None

    def annualized(self, periods: int = PERIODS_PER_YEAR) -> dict:
        return {
            "ret": self.daily_ret * periods,
            "std": self.daily_std * math.sqrt(periods),
            "sharpe": None if self.sharpe is None else self.sharpe * math.sqrt(periods),
        }

    def to_dict(self) -> dict:
        return {
            "daily_ret": self.daily_ret,
            "daily_std": self.daily_std,
            "sharpe": self.sharpe,
            "sharpe_defined": self.sharpe_defined,
            "max_dd": self.max_dd,
            "cum_pnl": self.cum_pnl,
            "trade_num": self.trade_num,
            "annualized": self.annualized(),
        }


def max_drawdown(values, initial: float = INITIAL_CAPITAL) -> float:
    """Most negative ``(equity - running max) / initial``; 0 when never below the peak."""
    values = np.asarray(values, dtype=float)
    peak = np.maximum.accumulate(np.concatenate([[initial], values]))[1:]
    return float(min(0.0, np.min((values - peak) / initial)))


def compute_metrics(curve: EquityCurve, schedule: TradeSchedule | None = None) -> PerformanceReport:
    if len(curve) < 2:
        raise InvalidArgument("an equity curve needs at least 2 points")
    rets = curve.daily_returns
    mean = float(np.mean(rets))
    std = float(np.std(rets, ddof=1))
    sharpe = mean / std if std > 0 else None
    return PerformanceReport(
        daily_ret=100.0 * mean,
        daily_std=100.0 * std,
        sharpe=sharpe,
        max_dd=100.0 * max_drawdown(curve.values, curve.initial),
        cum_pnl=100.0 * (curve.values[-1] - curve.initial) / curve.initial,
        trade_num=0 if schedule is None else len(schedule),
    )


@dataclass(frozen=True, eq=False)
class Comparison:
    strategy: PerformanceReport
    baseline: PerformanceReport
    strategy_equity: EquityCurve
    baseline_equity: EquityCurve

    def to_dict(self) -> dict:
        return {"strategy": self.strategy.to_dict(), "baseline": self.baseline.to_dict()}

    def table(self) -> str:
        rows = [("DailyRet (%)", "daily_ret"), ("DailyStd (%)", "daily_std"), ("Sharpe", "sharpe"),
                ("MaxDD (%)", "max_dd"), ("CumPnL (%)", "cum_pnl"), ("TradeNum", "trade_num")]
        lines = [f"{'':14s}{'Baseline':>12s}{'Signature':>12s}"]
        for label, key in rows:
            cells = []
            for rep in (self.baseline, self.strategy):
                v = getattr(rep, key)
                cells.append("undefined" if v is None else (f"{v:d}" if isinstance(v, int) else f"{v:.4f}"))
            lines.append(f"{label:14s}{cells[0]:>12s}{cells[1]:>12s}")
        return "\n".join(lines)


def compare(spread, strategy_schedule: TradeSchedule, baseline_schedule: TradeSchedule,
            costs: TradingCosts = TradingCosts()) -> Comparison:
    s_curve = equity_curve(spread, strategy_schedule, costs)
    b_curve = equity_curve(spread, baseline_schedule, costs)
    return Comparison(compute_metrics(s_curve, strategy_schedule), compute_metrics(b_curve, baseline_schedule),
                      s_curve, b_curve)


def write_equity_csv(file, comparison: Comparison, dates=None, header: dict | None = None):
    """``index,date,equity_strategy,equity_baseline`` preceded by ``#`` config lines."""
    n = len(comparison.strategy_equity)
    with open(file, "w", newline="") as fh:
        for line in json.dumps(header or {}, indent=1, sort_keys=True).splitlines():
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["index", "date", "equity_strategy", "equity_baseline"])
        for j in range(n):
            date = "" if dates is None else dates[j].isoformat()
            w.writerow([j, date, repr(float(comparison.strategy_equity.values[j])),
                        repr(float(comparison.baseline_equity.values[j]))])
