"""Sequential entry/exit stopping problems for a mean-reverting spread.

Long side: alternate an entry problem with payoff ``e^{-rt}(-X_t - c)`` and
an exit problem with payoff ``e^{-r't}(X_t - c')``.  Short side: the same
with the signs of ``X`` flipped.  Every problem lives on its own window
starting at the previous stop, is trained on fresh samples anchored at the
observed value there, and is decided on the observed path.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import InvalidArgument
from .models import Sampler, generate_training_set
from .policy import LinearPolicy, OptimizerConfig, path_features, stopping_index, train
from .signature import DEFAULT_ORDER, Path

log = logging.getLogger(__name__)

Side = Literal["long", "short"]
ProblemKind = Literal["entry", "exit"]


@dataclass(frozen=True)
class TradingCosts:
    entry_cost: float = 0.0
    exit_cost: float = 0.0
    entry_discount: float = 0.0
    exit_discount: float = 0.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if not (np.isfinite(value) and value >= 0):
                raise InvalidArgument(f"{name} must be finite and non-negative, got {value}")


@dataclass(frozen=True)
class StrategyConfig:
    side: Side = "long"
    order: int = DEFAULT_ORDER
    threshold: float = 0.05
    sharpness: float = 20.0
    sample_count: int = 100
    generator: Literal["ou-fit", "bootstrap"] = "ou-fit"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    min_window: int = 10

    def __post_init__(self):
        if self.side not in ("long", "short"):
            raise InvalidArgument(f"side must be 'long' or 'short', got {self.side!r}")
        if self.generator not in ("ou-fit", "bootstrap"):
            raise InvalidArgument(f"unknown generator {self.generator!r}")
        if self.min_window < 2:
            raise InvalidArgument("min_window must be >= 2")
        if self.sample_count < 1:
            raise InvalidArgument("sample_count must be >= 1")

    def optimizer_for(self, seed: int) -> OptimizerConfig:
        o = self.optimizer
        return OptimizerConfig(o.iterations, o.step_size, o.init_scale, seed, self.sharpness, self.threshold,
                               o.beta1, o.beta2, o.eps)


def _sign(side: Side, kind: ProblemKind) -> float:
    # +1 when the payoff is increasing in X (selling), -1 when buying
    buy = (side == "long") == (kind == "entry")
    return -1.0 if buy else 1.0


def problem_payoff(values, times, costs: TradingCosts, side: Side, kind: ProblemKind) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    clock = np.asarray(times, dtype=float) - float(np.asarray(times)[0])
    if kind == "entry":
        rate, cost = costs.entry_discount, costs.entry_cost
    else:
        rate, cost = costs.exit_discount, costs.exit_cost
    return np.exp(-rate * clock) * (_sign(side, kind) * values - cost)


def entry_payoff(segment: Path, costs: TradingCosts, side: Side = "long") -> np.ndarray:
    """Discounted entry payoff on the segment's local clock.

    Long: ``e^{-r t} (-X_t - c)``; short: ``e^{-r t} (X_t - c)``.
    """
    return problem_payoff(segment.values[:, 0], segment.times, costs, side, "entry")


def exit_payoff(segment: Path, costs: TradingCosts, side: Side = "long") -> np.ndarray:
    """Long: ``e^{-r' t} (X_t - c')``; short: ``e^{-r' t} (-X_t - c')``."""
    return problem_payoff(segment.values[:, 0], segment.times, costs, side, "exit")


@dataclass(frozen=True, eq=False)
class Trade:
    entry_index: int
    exit_index: int
    entry_value: float
    exit_value: float
    entry_policy: LinearPolicy | None = None
    exit_policy: LinearPolicy | None = None

    def pnl(self, side: Side = "long", costs: TradingCosts = TradingCosts()) -> float:
        sign = 1.0 if side == "long" else -1.0
        return sign * (self.exit_value - self.entry_value) - costs.entry_cost - costs.exit_cost


@dataclass(frozen=True, eq=False)
class TradeSchedule:
    side: Side
    trades: tuple = ()
    forced_close: bool = False
    audit: tuple = ()  # one dict per solved problem

    def __post_init__(self):
        object.__setattr__(self, "trades", tuple(self.trades))
        object.__setattr__(self, "audit", tuple(self.audit))
        last = -1
        for t in self.trades:
            if not (last < t.entry_index < t.exit_index):
                raise InvalidArgument(f"trade ({t.entry_index}, {t.exit_index}) breaks the interleaving invariant")
            last = t.exit_index

    def __len__(self) -> int:
        return len(self.trades)

    def validate(self, length: int):
        if self.trades and self.trades[-1].exit_index > length - 1:
            raise InvalidArgument(f"schedule exits at {self.trades[-1].exit_index} beyond the last index {length - 1}")

    def indices(self) -> list[tuple[int, int]]:
        return [(t.entry_index, t.exit_index) for t in self.trades]

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "trades": [
                {"entry_index": t.entry_index, "exit_index": t.exit_index,
                 "entry_value": t.entry_value, "exit_value": t.exit_value}
                for t in self.trades
            ],
            "forced_close": self.forced_close,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "TradeSchedule":
        trades = [Trade(int(t["entry_index"]), int(t["exit_index"]), float(t["entry_value"]), float(t["exit_value"]))
                  for t in data["trades"]]
        return cls(data["side"], trades, bool(data.get("forced_close", False)))


@dataclass(frozen=True, eq=False)
class StopDecision:
    policy: LinearPolicy
    index: int
    loss: float


def solve_stopping_problem(window: Path, kind: ProblemKind, config: StrategyConfig, costs: TradingCosts,
                           sampler: Sampler, seed: int = 0) -> StopDecision:
    """Train a policy for one problem and apply it to the observed window.

    Training samples start at the window's first observed value and live on
    the window's grid.  The returned index is relative to the window start.
    """
    times = window.times
    x0 = float(window.values[0, 0])

    def payoff(values, grid):
        return problem_payoff(values, grid, costs, config.side, kind)

    training = generate_training_set(sampler, x0, times, config.sample_count, payoff,
                                     order=config.order, seed=seed)
    result = train(training, config.optimizer_for(seed))
    feats = path_features(times, window.values, config.order, result.policy.normalizer)
    return StopDecision(result.policy, stopping_index(result.policy, feats), result.loss)


def run_sequential(observed: Path, config: StrategyConfig, costs: TradingCosts, sampler: Sampler) -> TradeSchedule:
    """Alternate entry and exit problems until the horizon is exhausted.

    A new entry problem needs at least ``min_window`` remaining grid points.
    Problems after the first one may not stop at their own start index, so
    consecutive stops are strictly increasing.  A position still open when
    its exit policy reaches the horizon is closed at the last index.
    """
    if observed.dimension != 1:
        raise InvalidArgument("the observed spread must be one-dimensional")
    n = len(observed) - 1
    if len(observed) < config.min_window:
        raise InvalidArgument(f"observed path has {len(observed)} points, fewer than min_window={config.min_window}")
    values = observed.values[:, 0]
    base_seed = config.optimizer.seed
    trades, audit = [], []
    forced = False
    start, problem = 0, 0

    def solve(kind, begin):
        nonlocal problem
        decision = solve_stopping_problem(observed.window(begin), kind, config, costs, sampler,
                                          seed=base_seed * 100_003 + problem)
        idx = decision.index if problem == 0 else max(decision.index, 1)
        action = "buy" if _sign(config.side, kind) < 0 else "sell"
        audit.append({"problem": problem, "kind": kind, "side": config.side, "action": action, "window_start": begin,
                      "raw_index": decision.index, "stop": begin + idx, "loss": decision.loss})
        log.info("problem %d (%s %s, %s) window [%d, %d] -> stop %d", problem, config.side, kind, action, begin, n,
                 begin + idx)
        problem += 1
        return begin + idx, decision.policy

    while n + 1 - start >= config.min_window:
        entry, entry_policy = solve("entry", start)
        if entry >= n:
            break
        exit_, exit_policy = solve("exit", entry)
        if exit_ >= n:
            exit_, forced = n, True
        trades.append(Trade(entry, exit_, float(values[entry]), float(values[exit_]), entry_policy, exit_policy))
        if forced:
            break
        start = exit_
    return TradeSchedule(config.side, trades, forced, audit)
