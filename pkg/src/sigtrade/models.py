"""Ornstein-Uhlenbeck simulation and fitting, spread construction, bootstrap.

All random draws for sample ``m`` come from the generator seeded with the
pair ``(seed, m)``, so a batch equals the concatenation of its single-sample
calls and results do not depend on batch size or ordering.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Protocol

import numpy as np

from .errors import ConstructionFailed, FitDegenerate, InvalidArgument, NotMeanReverting
from .policy import TrainingSet
from .signature import DEFAULT_ORDER, Path

TRADING_DAYS = 252


@dataclass(frozen=True)
class OUParams:
    """``dX = speed * (mean_level - X) dt + vol * dW``."""

    mean_level: float
    speed: float
    vol: float

    def __post_init__(self):
        if not self.speed > 0:
            raise InvalidArgument(f"OU speed must be positive, got {self.speed}")
        if not self.vol >= 0:
            raise InvalidArgument(f"OU vol must be non-negative, got {self.vol}")

    def transition(self, dt):
        """Per-step decay factor and conditional standard deviation."""
        decay = np.exp(-self.speed * np.asarray(dt, dtype=float))
        std = self.vol * np.sqrt((1.0 - decay**2) / (2.0 * self.speed))
        return decay, std

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "OUParams":
        return cls(float(data["mean_level"]), float(data["speed"]), float(data["vol"]))


def _rng(seed, index: int) -> np.random.Generator:
    # spawn keys keep substream 0 distinct from default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def uniform_grid(n: int, horizon: float) -> np.ndarray:
    if n < 1 or not horizon > 0:
        raise InvalidArgument(f"grid needs n >= 1 and T > 0, got n={n}, T={horizon}")
    return np.linspace(0.0, horizon, n + 1)


def simulate_ou_paths(params: OUParams, x0: float, times, count: int, seed: int = 0) -> np.ndarray:
    """Exact-transition OU samples on ``times``; returns shape ``(count, len(times))``."""
    times = np.asarray(times, dtype=float)
    decay, std = params.transition(np.diff(times))
    noise = np.stack([_rng(seed, m).standard_normal(len(times) - 1) for m in range(count)]) if count else np.empty((0, len(times) - 1))
    out = np.empty((count, len(times)))
    out[:, 0] = x0
    for j in range(len(times) - 1):
        out[:, j + 1] = params.mean_level + (out[:, j] - params.mean_level) * decay[j] + std[j] * noise[:, j]
    return out


def simulate_ou(params: OUParams, x0: float, n: int = 100, horizon: float = 1.0, seed: int = 0) -> Path:
    times = uniform_grid(n, horizon)
    return Path(times, simulate_ou_paths(params, x0, times, 1, seed)[0])


def _as_values(path) -> np.ndarray:
    if isinstance(path, Path):
        if path.dimension != 1:
            raise InvalidArgument("expected a one-dimensional path")
        return path.values[:, 0]
    return np.asarray(path, dtype=float).reshape(-1)


def _ar1(values: np.ndarray):
    x, y = values[:-1], values[1:]
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx <= 1e-14 * max(1.0, np.sum(x**2)):
        raise FitDegenerate("cannot fit an OU model to a (near-)constant path")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    return float(slope), float(intercept), float(np.mean(resid**2))


def fit_ou_mle(path, dt: float) -> OUParams:
    """Exact-likelihood OU fit through the AR(1) representation.

    The transition ``X_{j+1} = a X_j + b + eps`` with ``eps ~ N(0, s2)`` is
    fitted by least squares (its conditional MLE) and mapped back via
    ``speed = -ln(a) / dt``, ``mean_level = b / (1 - a)``,
    ``vol^2 = 2 speed s2 / (1 - a^2)``.

    Raises:
        FitDegenerate: constant path, or a non-positive AR coefficient.
        NotMeanReverting: AR coefficient ``>= 1``.
    """
    values = _as_values(path)
    if len(values) < 3:
        raise InvalidArgument("OU fitting needs at least 3 observations")
    if not dt > 0:
        raise InvalidArgument("dt must be positive")
    a, b, s2 = _ar1(values)
    if a >= 1.0:
        raise NotMeanReverting(f"estimated AR coefficient {a:.6g} >= 1")
    if a <= 0.0:
        raise FitDegenerate(f"estimated AR coefficient {a:.6g} <= 0 has no OU counterpart")
    if s2 <= 0.0:
        raise FitDegenerate("zero residual variance")
    speed = -math.log(a) / dt
    return OUParams(float(b / (1.0 - a)), float(speed), float(math.sqrt(2.0 * speed * s2 / (1.0 - a * a))))


def ou_log_likelihood(path, dt: float, params: OUParams) -> float:
    """Sum of exact Gaussian transition log-densities, conditional on ``X_0``."""
    values = _as_values(path)
    decay, std = params.transition(dt)
    if std <= 0:
        raise FitDegenerate("zero conditional variance")
    mean = params.mean_level + (values[:-1] - params.mean_level) * decay
    z = (values[1:] - mean) / std
    return float(-0.5 * np.sum(z**2) - len(z) * (math.log(std) + 0.5 * math.log(2 * math.pi)))


@dataclass(frozen=True)
class SpreadSpec:
    symbol_a: str
    symbol_b: str
    hedge_ratio: float
    fitted: OUParams
    log_likelihood: float

    def to_dict(self) -> dict:
        return {
            "symbol_a": self.symbol_a,
            "symbol_b": self.symbol_b,
            "hedge_ratio": self.hedge_ratio,
            "fitted": self.fitted.to_dict(),
            "log_likelihood": self.log_likelihood,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def spread(self, prices_a, prices_b) -> np.ndarray:
        """Apply the hedge ratio to (first-value normalised) prices."""
        a, b = normalize_prices(prices_a), normalize_prices(prices_b)
        return a - self.hedge_ratio * b


def normalize_prices(prices) -> np.ndarray:
    prices = np.asarray(getattr(prices, "closes", prices), dtype=float)
    if np.any(prices <= 0) or not np.all(np.isfinite(prices)):
        raise InvalidArgument("prices must be finite and positive")
    return prices / prices[0]


def default_beta_grid(a: np.ndarray, b: np.ndarray, points: int = 101, half_width: float = 3.0) -> np.ndarray:
    """``points`` candidates spanning +-half_width around the OLS ratio of a on b."""
    bc = b - b.mean()
    denom = float(bc @ bc)
    ols = float(bc @ (a - a.mean())) / denom if denom > 0 else 1.0
    return ols + np.linspace(-half_width, half_width, points)


def construct_spread(prices_a, prices_b, beta_grid=None, dt: float = 1.0 / TRADING_DAYS,
                     symbols: tuple[str, str] = ("A", "B")) -> tuple[SpreadSpec, Path]:
    """Choose the hedge ratio whose spread has the highest OU likelihood.

    Prices are divided by their first value; the spread is ``A - beta * B``.
    Near-equal likelihoods (relative 1e-9) are resolved toward the smaller
    ``|beta|``.
    """
    a, b = normalize_prices(prices_a), normalize_prices(prices_b)
    if len(a) != len(b):
        raise InvalidArgument("price series must be aligned")
    if len(a) < 3:
        raise InvalidArgument("need at least 3 aligned prices")
    if np.allclose(a, b, rtol=1e-12, atol=0.0):
        raise ConstructionFailed("normalised price series are identical; every spread is a multiple of one price")
    grid = default_beta_grid(a, b) if beta_grid is None else np.asarray(beta_grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise InvalidArgument("beta_grid is empty")
    fits = []
    for beta in grid:
        spread = a - beta * b
        try:
            params = fit_ou_mle(spread, dt)
            ll = ou_log_likelihood(spread, dt, params)
        except (FitDegenerate, NotMeanReverting):
            continue
        if np.isfinite(ll):
            fits.append((float(beta), params, ll))
    if not fits:
        raise ConstructionFailed("no hedge ratio in the grid yields a mean-reverting spread")
    best_ll = max(f[2] for f in fits)
    tol = 1e-9 * max(1.0, abs(best_ll))
    beta, params, ll = min((f for f in fits if f[2] >= best_ll - tol), key=lambda f: (abs(f[0]), f[0]))
    spec = SpreadSpec(symbols[0], symbols[1], beta, params, ll)
    return spec, Path(dt * np.arange(len(a)), a - beta * b)


@dataclass(frozen=True)
class BootstrapConfig:
    block_length: int
    sample_count: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.block_length < 1:
            raise InvalidArgument("block_length must be >= 1")
        if self.sample_count < 1:
            raise InvalidArgument("sample_count must be >= 1")


def default_block_length(n: int) -> int:
    return max(5, n // 10)


def _bootstrap_increments(diffs: np.ndarray, block_length: int, steps: int, rng) -> np.ndarray:
    # Circular blocks: every increment is drawn with equal probability, so the
    # resampled increment mean is unbiased.  A block covering the whole
    # sequence is the sequence itself.
    n = len(diffs)
    block = min(block_length, n)
    count = -(-steps // block)
    starts = np.zeros(count, dtype=int) if block == n else rng.integers(0, n, size=count)
    idx = (starts[:, None] + np.arange(block)) % n
    return diffs[idx].reshape(-1)[:steps]


def block_bootstrap_values(source, block_length: int, length: int, x0: float, count: int, seed: int = 0) -> np.ndarray:
    """``(count, length)`` resampled paths anchored at ``x0``."""
    values = _as_values(source)
    if length < 2:
        raise InvalidArgument("bootstrap horizon must have at least 2 points")
    if block_length > len(values):
        raise InvalidArgument(f"block_length {block_length} exceeds source length {len(values)}")
    diffs = np.diff(values)
    out = np.empty((count, length))
    out[:, 0] = x0
    for m in range(count):
        inc = _bootstrap_increments(diffs, block_length, length - 1, _rng(seed, m))
        out[m, 1:] = x0 + np.cumsum(inc)
    return out


def block_bootstrap(source: Path, config: BootstrapConfig, length: int, x0: float) -> list[Path]:
    """Resample contiguous blocks of the source's increments.

    Each sample concatenates uniformly drawn difference blocks (wrapping
    around the end of the sequence), truncates to
    ``length - 1`` increments and accumulates them from ``x0``.  Samples
    reuse the source's mean time step.
    """
    values = block_bootstrap_values(source, config.block_length, length, x0, config.sample_count, config.seed)
    times = np.asarray(source.times, dtype=float) if isinstance(source, Path) else np.arange(len(_as_values(source)))
    dt = (times[-1] - times[0]) / (len(times) - 1)
    grid = times[0] + dt * np.arange(length)
    return [Path(grid, row) for row in values]


class Sampler(Protocol):
    def sample(self, x0: float, times: np.ndarray, count: int, seed: int) -> np.ndarray: ...


@dataclass(frozen=True)
class OUSampler:
    params: OUParams

    def sample(self, x0, times, count, seed):
        return simulate_ou_paths(self.params, x0, times, count, seed)


@dataclass(frozen=True, eq=False)
class BootstrapSampler:
    source: np.ndarray
    block_length: int

    def sample(self, x0, times, count, seed):
        return block_bootstrap_values(self.source, self.block_length, len(times), x0, count, seed)


PayoffFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def identity_payoff(values, times):
    return values


def generate_training_set(sampler: Sampler, x0: float, times, count: int, payoff: PayoffFn = identity_payoff,
                          order: int = DEFAULT_ORDER, seed: int = 0, normalize: bool = True) -> TrainingSet:
    """Sample ``count`` paths from ``x0`` over ``times`` and pair them with payoffs.

    Payoffs are evaluated on raw values; signatures see the standardised
    values (see :meth:`TrainingSet.from_paths`).
    """
    if count < 1:
        raise InvalidArgument("sample count must be >= 1")
    times = np.asarray(times, dtype=float)
    values = sampler.sample(x0, times, count, seed)
    return TrainingSet.from_paths(times, values, payoff(values, times), order=order, normalize=normalize)
