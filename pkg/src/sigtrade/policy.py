"""Linear signature stopping policies and their smoothed training objective.

A policy is a dual vector ``l`` with a threshold ``k``.  Along a path with
prefix signatures ``S_0, ..., S_n`` it stops at the first grid index ``j``
where ``sum_{i<=j} <l, S_i>^2 >= k`` (capped at ``n``).  Training replaces
the hard indicator in the expected-payoff representation by a sigmoid of
sharpness ``mu`` and minimises the negated sample mean by an Adam-style
first-order method.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
import numpy as np
from scipy import stats
from scipy.special import expit

from .errors import InvalidArgument, TrainingDiverged
from .signature import (
    DEFAULT_ORDER,
    DualVector,
    TruncatedSignature,
    prefix_signature_array,
    rescaled_time,
)

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.05
DEFAULT_SHARPNESS = 20.0


@dataclass(frozen=True)
class Normalizer:
    """Affine map ``x -> (x - mean) / scale`` applied to raw path values."""

    mean: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.scale) and self.scale > 0):
            raise InvalidArgument(f"invalid normalizer (mean={self.mean}, scale={self.scale})")

    @classmethod
    def fit(cls, values) -> "Normalizer":
        values = np.asarray(values, dtype=float)
        scale = float(values.std())
        # constant samples (e.g. zero-volatility paths) keep unit scale
        return cls(float(values.mean()), scale if scale > 1e-12 else 1.0)

    def __call__(self, values):
        return (np.asarray(values, dtype=float) - self.mean) / self.scale


@dataclass(frozen=True, eq=False)
class LinearPolicy:
    coefficients: DualVector
    threshold: float = DEFAULT_THRESHOLD
    sharpness: float = DEFAULT_SHARPNESS
    normalizer: Normalizer | None = None

    def __post_init__(self):
        if not self.threshold > 0:
            raise InvalidArgument(f"threshold must be positive, got {self.threshold}")
        if not self.sharpness > 0:
            raise InvalidArgument(f"sharpness must be positive, got {self.sharpness}")

    @property
    def dimension(self) -> int:
        return self.coefficients.dimension

    @property
    def order(self) -> int:
        return self.coefficients.order

    def with_coefficients(self, coef) -> "LinearPolicy":
        return replace(self, coefficients=DualVector(self.dimension, self.order, coef))

    def features(self, times, values) -> np.ndarray:
        """Prefix signatures of one raw path ``(n + 1,)`` or ``(n + 1, d)``."""
        return path_features(times, values, self.order, self.normalizer, batch=False)

    def stop(self, times, values) -> int:
        """Stopping index for one raw path observed on ``times``."""
        return stopping_index(self, self.features(times, values))

    def to_dict(self) -> dict:
        norm = self.normalizer or Normalizer()
        return {
            "dimension": self.dimension,
            "order": self.order,
            "threshold": self.threshold,
            "sharpness": self.sharpness,
            "normalizer": {"mean": norm.mean, "scale": norm.scale},
            "coefficients": self.coefficients.coefficients.tolist(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "LinearPolicy":
        try:
            coef = DualVector(int(data["dimension"]), int(data["order"]), data["coefficients"])
            norm = data.get("normalizer")
            return cls(
                coef,
                threshold=float(data["threshold"]),
                sharpness=float(data["sharpness"]),
                normalizer=Normalizer(float(norm["mean"]), float(norm["scale"])) if norm else None,
            )
        except KeyError as exc:
            raise InvalidArgument(f"policy JSON is missing field {exc.args[0]!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "LinearPolicy":
        return cls.from_dict(json.loads(text))


def path_features(times, values, order: int, normalizer: Normalizer | None = None, rescale_time: bool = True, batch=None):
    """Normalise, time-augment and prefix-sign raw path values.

    Returns an array ``(n + 1, G)`` for one path or ``(M, n + 1, G)`` for a
    batch.  ``batch`` defaults to true only for 3-D input; pass it
    explicitly for a batch of scalar paths given as ``(M, n + 1)``.
    """
    values = np.asarray(values, dtype=float)
    if batch is None:
        batch = values.ndim == 3
    if batch and values.ndim == 2:
        values = values[..., None]
    if not batch and values.ndim == 1:
        values = values[:, None]
    if normalizer is not None:
        values = normalizer(values)
    times = np.asarray(times, dtype=float)
    if values.shape[-2] != len(times):
        raise InvalidArgument(f"{values.shape[-2]} path points for a grid of {len(times)} times")
    clock = rescaled_time(times) if rescale_time else times
    clock = np.broadcast_to(clock[:, None], values.shape[:-1] + (1,))
    return prefix_signature_array(np.concatenate([clock, values], axis=-1), order)


def _feature_matrix(prefixes) -> np.ndarray:
    if isinstance(prefixes, np.ndarray):
        return prefixes
    items = list(prefixes)
    if items and isinstance(items[0], TruncatedSignature):
        return np.stack([s.flat for s in items])
    return np.asarray(items, dtype=float)


def _inner_products(policy: LinearPolicy, prefixes) -> np.ndarray:
    feats = _feature_matrix(prefixes)
    coef = policy.coefficients.coefficients
    if feats.shape[-1] != coef.size:
        raise InvalidArgument(
            f"signature features of length {feats.shape[-1]} do not match policy layout of length {coef.size}"
        )
    return feats @ coef


def _first_crossing(cumulative: np.ndarray, level: float) -> np.ndarray:
    # index of the first entry >= level along the last axis, n when none
    hit = cumulative >= level
    n = cumulative.shape[-1] - 1
    return np.where(hit.any(axis=-1), hit.argmax(axis=-1), n)


def stopping_index(policy: LinearPolicy, prefixes) -> int:
    """First ``j`` with ``sum_{i<=j} <l, S_i>^2 >= k``; ``n`` if never reached.

    ``prefixes`` is a sequence of :class:`TruncatedSignature` or a feature
    array of shape ``(n + 1, G)``.  A batch ``(M, n + 1, G)`` yields an
    integer array.
    """
    cumulative = np.cumsum(_inner_products(policy, prefixes) ** 2, axis=-1)
    idx = _first_crossing(cumulative, policy.threshold)
    return int(idx) if np.ndim(idx) == 0 else idx


def randomized_stopping_index(policy: LinearPolicy, prefixes, z) -> int:
    """Stopping index with the threshold replaced by a realised level ``z > 0``."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0):
        raise InvalidArgument("randomisation level z must be positive")
    cumulative = np.cumsum(_inner_products(policy, prefixes) ** 2, axis=-1)
    if z_arr.ndim == 0:
        return int(_first_crossing(cumulative, float(z_arr)))
    # vector of levels against a single path
    hit = cumulative[None, :] >= z_arr[:, None]
    return np.where(hit.any(axis=1), hit.argmax(axis=1), cumulative.size - 1)


@dataclass(frozen=True)
class RandomizationSource:
    """Law of the positive randomisation level ``Z`` (unit exponential by default)."""

    distribution: object = field(default_factory=stats.expon)
    seed: int = 0

    def __post_init__(self):
        if self.distribution.cdf(0.0) != 0.0:
            raise InvalidArgument("randomisation level must satisfy P(Z <= 0) = 0")

    def cdf(self, x):
        return self.distribution.cdf(x)

    def survival(self, x):
        return self.distribution.sf(x)

    def sample(self, size: int, seed: int | None = None) -> np.ndarray:
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return self.distribution.rvs(size=size, random_state=rng)


def randomized_expected_payoff(policy: LinearPolicy, prefixes, payoff, source: RandomizationSource | None = None) -> float:
    """``Y_0 + sum_{j<n} G_Z(sum_{i<=j} <l, S_i>^2) (Y_{j+1} - Y_j)``."""
    source = source or RandomizationSource()
    payoff = np.asarray(payoff, dtype=float)
    cumulative = np.cumsum(_inner_products(policy, prefixes) ** 2)
    if cumulative.shape != payoff.shape:
        raise InvalidArgument("payoff and prefix signatures have different lengths")
    return float(payoff[0] + source.survival(cumulative[:-1]) @ np.diff(payoff))


def smoothed_cdf(x, threshold: float = DEFAULT_THRESHOLD, sharpness: float = DEFAULT_SHARPNESS):
    """Sigmoid ``1 / (1 + exp(-sharpness * (x - threshold)))``."""
    if not sharpness > 0:
        raise InvalidArgument("sharpness must be positive")
    return expit(sharpness * (np.asarray(x, dtype=float) - threshold))


def smoothed_expected_payoff(policy: LinearPolicy, prefixes, payoff) -> float:
    payoff = np.asarray(payoff, dtype=float)
    cumulative = np.cumsum(_inner_products(policy, prefixes) ** 2, axis=-1)
    if cumulative.shape != payoff.shape:
        raise InvalidArgument(
            f"payoff shape {payoff.shape} does not match prefix signatures {cumulative.shape}"
        )
    survival = 1.0 - smoothed_cdf(cumulative[..., :-1], policy.threshold, policy.sharpness)
    value = payoff[..., 0] + np.sum(survival * np.diff(payoff, axis=-1), axis=-1)
    return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """``M`` sample paths on a common grid with their payoffs.

    Attributes:
        times: shared grid, shape ``(n + 1,)``.
        features: prefix signatures of the normalised augmented paths,
            shape ``(M, n + 1, G)``.
        payoffs: raw-value payoffs, shape ``(M, n + 1)``.
        values: raw sample paths, shape ``(M, n + 1, d)``.
    """

    times: np.ndarray
    features: np.ndarray
    payoffs: np.ndarray
    values: np.ndarray
    order: int
    normalizer: Normalizer | None = None

    def __post_init__(self):
        if self.features.ndim != 3 or len(self.features) < 1:
            raise InvalidArgument("a training set needs at least one sample")
        if self.payoffs.shape != self.features.shape[:2]:
            raise InvalidArgument("payoffs and signatures disagree on (M, n + 1)")
        if not np.all(np.isfinite(self.payoffs)):
            raise InvalidArgument("payoffs contain non-finite values")

    @classmethod
    def from_paths(cls, times, values, payoffs, order: int = DEFAULT_ORDER, normalize: bool = True, rescale_time: bool = True):
        """Build a set from raw paths ``(M, n + 1[, d])`` and payoffs ``(M, n + 1)``."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            values = values[..., None]
        if values.ndim != 3 or len(values) < 1:
            raise InvalidArgument("values must have shape (M, n + 1[, d]) with M >= 1")
        normalizer = Normalizer.fit(values) if normalize else None
        feats = path_features(times, values, order, normalizer, rescale_time=rescale_time, batch=True)
        return cls(np.asarray(times, dtype=float), feats, np.asarray(payoffs, dtype=float), values, order, normalizer)

    @property
    def size(self) -> int:
        return len(self.features)

    @property
    def dimension(self) -> int:
        return self.values.shape[2] + 1

    @property
    def graded_length(self) -> int:
        return self.features.shape[2]


@dataclass(frozen=True)
class OptimizerConfig:
    iterations: int = 200
    step_size: float = 0.01
    init_scale: float | None = None  # None -> 0.1 / graded length
    seed: int = 0
    sharpness: float = DEFAULT_SHARPNESS
    threshold: float = DEFAULT_THRESHOLD
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidArgument("iterations must be >= 1")
        if not self.step_size > 0:
            raise InvalidArgument("step_size must be positive")
        if self.init_scale is not None and self.init_scale < 0:
            raise InvalidArgument("init_scale must be non-negative")


def _loss_and_grad(coef: np.ndarray, feats: np.ndarray, payoffs: np.ndarray, threshold: float, sharpness: float, want_grad=True):
    inner = feats @ coef  # (M, n+1)
    cumulative = np.cumsum(inner**2, axis=1)
    cdf = expit(sharpness * (cumulative[:, :-1] - threshold))
    dy = np.diff(payoffs, axis=1)
    values = payoffs[:, 0] + np.sum((1.0 - cdf) * dy, axis=1)
    loss = -float(np.mean(values))
    if not want_grad:
        return loss, None
    # d value / d C_j = -mu F (1 - F) dY_j ; C_j = sum_{i<=j} inner_i^2
    w = -sharpness * cdf * (1.0 - cdf) * dy
    tail = np.zeros_like(inner)
    tail[:, :-1] = np.cumsum(w[:, ::-1], axis=1)[:, ::-1]  # sum_{j>=i} w_j
    grad = np.einsum("mi,mig->g", 2.0 * tail * inner, feats)
    return loss, -grad / len(feats)


def loss(policy: LinearPolicy, training: TrainingSet) -> float:
    """Negated mean smoothed expected payoff over the training set."""
    _check_layout(policy, training)
    return _loss_and_grad(policy.coefficients.coefficients, training.features, training.payoffs,
                          policy.threshold, policy.sharpness, want_grad=False)[0]


def loss_gradient(policy: LinearPolicy, training: TrainingSet) -> DualVector:
    _check_layout(policy, training)
    _, grad = _loss_and_grad(policy.coefficients.coefficients, training.features, training.payoffs,
                             policy.threshold, policy.sharpness)
    return DualVector(policy.dimension, policy.order, grad)


def _check_layout(policy: LinearPolicy, training: TrainingSet):
    if training.size < 1:
        raise InvalidArgument("empty training set")
    if policy.coefficients.coefficients.size != training.graded_length:
        raise InvalidArgument("policy layout does not match the training signatures")


@dataclass(frozen=True, eq=False)
class TrainingResult:
    policy: LinearPolicy
    loss: float
    history: np.ndarray  # loss per iterate, including the initial point
    best_iteration: int


def train(training: TrainingSet, config: OptimizerConfig = OptimizerConfig()) -> TrainingResult:
    """Minimise the smoothed loss from a seeded random start.

    The returned policy is the iterate with the lowest loss seen, carrying
    the training set's normaliser.

    Raises:
        TrainingDiverged: if the loss or its gradient becomes non-finite.
    """
    if training.size < 1:
        raise InvalidArgument("empty training set")
    glen = training.graded_length
    scale = 0.1 / glen if config.init_scale is None else config.init_scale
    rng = np.random.default_rng(config.seed)
    coef = rng.normal(0.0, scale, glen) if scale > 0 else np.zeros(glen)
    m = np.zeros(glen)
    v = np.zeros(glen)
    history = np.empty(config.iterations + 1)
    best_loss, best_coef, best_it = np.inf, coef.copy(), 0
    for it in range(config.iterations + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            value, grad = _loss_and_grad(coef, training.features, training.payoffs,
                                         config.threshold, config.sharpness)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise TrainingDiverged(it, value)
        history[it] = value
        if value < best_loss:
            best_loss, best_coef, best_it = value, coef.copy(), it
        if it == config.iterations:
            break
        m = config.beta1 * m + (1 - config.beta1) * grad
        v = config.beta2 * v + (1 - config.beta2) * grad**2
        m_hat = m / (1 - config.beta1 ** (it + 1))
        v_hat = v / (1 - config.beta2 ** (it + 1))
        with np.errstate(over="ignore"):
            coef = coef - config.step_size * m_hat / (np.sqrt(v_hat) + config.eps)
    log.debug("trained policy: loss %.6g at iteration %d of %d", best_loss, best_it, config.iterations)
    policy = LinearPolicy(
        DualVector(training.dimension, training.order, best_coef),
        threshold=config.threshold,
        sharpness=config.sharpness,
        normalizer=training.normalizer,
    )
    return TrainingResult(policy, float(best_loss), history, best_it)


def hard_stopped_payoffs(policy: LinearPolicy, features, payoffs) -> np.ndarray:
    """Payoff at the (non-randomised) stopping index for each sample."""
    idx = np.atleast_1d(stopping_index(policy, np.asarray(features)))
    payoffs = np.atleast_2d(payoffs)
    return payoffs[np.arange(len(payoffs)), idx]
