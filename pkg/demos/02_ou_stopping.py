"""Learn when to stop an Ornstein-Uhlenbeck path.

The payoff is the path value itself.  A linear functional on the prefix
signatures is trained on 100 simulated paths and evaluated on fresh ones.

Run: python3 demos/02_ou_stopping.py
"""
import numpy as np

from sigtrade.models import OUParams, OUSampler, generate_training_set, uniform_grid
from sigtrade.policy import OptimizerConfig, hard_stopped_payoffs, path_features, train

params = OUParams(mean_level=10.0, speed=10.0, vol=1.0)
times = uniform_grid(100, 1.0)
sampler = OUSampler(params)

training = generate_training_set(sampler, x0=10.0, times=times, count=100, seed=0)
result = train(training, OptimizerConfig(seed=0))
print(f"training loss {result.loss:.4f} (best iterate {result.best_iteration} of {len(result.history) - 1})")

test = sampler.sample(10.0, times, 1000, seed=1)
feats = path_features(times, test, 3, result.policy.normalizer, batch=True)
stopped = hard_stopped_payoffs(result.policy, feats, test)
print(f"mean stopped value on 1000 held-out paths: {stopped.mean():.4f}")
print(f"stop at t=0: {test[:, 0].mean():.4f}   stop at T: {test[:, -1].mean():.4f}")
print(f"perfect foresight (max of each path): {test.max(axis=1).mean():.4f}")

# The learned policy is plain JSON
print("\npolicy JSON starts:", result.policy.to_json()[:120], "...")
