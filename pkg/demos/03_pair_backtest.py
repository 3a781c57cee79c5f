"""Trade a synthetic price pair and compare with the moving-band rule.

Formation: first 252 days fix the hedge ratio and the OU model.
Trading: the remaining days alternate entry and exit problems.

Run: python3 demos/03_pair_backtest.py
"""
import tempfile

from sigtrade.backtest import PairManifest
from sigtrade.engine import StrategyConfig, TradingCosts
from sigtrade.experiments import run_pair, write_synthetic_pair

costs = TradingCosts(entry_cost=0.001, exit_cost=0.001)
with tempfile.TemporaryDirectory() as tmp:
    manifest = PairManifest.load(write_synthetic_pair(tmp, seed=1))
    run = run_pair(manifest, StrategyConfig(), costs)

print(f"hedge ratio {run.spec.hedge_ratio:.3f}, fitted OU {run.spec.fitted}")
print("\nsignature strategy trades:")
for t in run.schedule.trades:
    print(f"  {run.dates[t.entry_index]} -> {run.dates[t.exit_index]}   pnl {t.pnl('long', costs):+.4f}")
print(f"baseline trades: {len(run.baseline)}\n")
print(run.comparison.table())
