"""Truncated signatures of piecewise-linear, time-augmented paths.

A truncated signature of order ``N`` over ``R^d`` is stored level by level:
level ``k`` is a flat array of length ``d**k`` whose entries are indexed by
multi-indices ``(i_1, ..., i_k)`` in lexicographic (row-major) order.  The
concatenation of all levels is the *graded* layout used for pairing with
linear functionals.

Signatures of discrete data are the signatures of the piecewise-linear
interpolant.  Each linear segment has the closed form ``delta^{(x)k} / k!``
and segments are glued with the truncated tensor product (Chen's identity).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument

DEFAULT_ORDER = 3
MAX_ORDER = 6


def graded_length(dimension: int, order: int) -> int:
    """Number of coefficients in levels ``0..order`` over ``R^dimension``."""
    return sum(dimension**k for k in range(order + 1))


def level_slices(dimension: int, order: int) -> list[slice]:
    out, start = [], 0
    for k in range(order + 1):
        out.append(slice(start, start + dimension**k))
        start += dimension**k
    return out


def _check_order(order) -> int:
    if int(order) != order or not 1 <= order <= MAX_ORDER:
        raise InvalidArgument(f"truncation order must be an integer in 1..{MAX_ORDER}, got {order!r}")
    return int(order)


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=False)
class Path:
    """Discretely observed path: ``values[j]`` is the point at ``times[j]``.

    ``values`` may be given 1-D for scalar paths; it is stored as ``(n, d)``.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or values.ndim != 2:
            raise InvalidArgument("times must be 1-D and values 1-D or 2-D")
        if len(times) != len(values):
            raise InvalidArgument(f"times ({len(times)}) and values ({len(values)}) differ in length")
        if len(times) < 2:
            raise InvalidArgument("a path needs at least 2 points")
        if values.shape[1] < 1:
            raise InvalidArgument("path dimension must be >= 1")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise InvalidArgument("path contains non-finite entries")
        if np.any(np.diff(times) <= 0):
            raise InvalidArgument("times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, values, horizon: float = 1.0) -> "Path":
        """Path on the equidistant grid ``t_j = j * horizon / n``."""
        values = np.asarray(values, dtype=float)
        return cls(np.linspace(0.0, horizon, len(values)), values)

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return len(self.times)

    def window(self, start: int, stop: int | None = None) -> "Path":
        """Sub-path on grid indices ``start..stop`` inclusive."""
        stop = len(self) - 1 if stop is None else stop
        return Path(self.times[start : stop + 1], self.values[start : stop + 1])


@dataclass(frozen=True, eq=False)
class AugmentedPath:
    """Path of dimension ``1 + d`` whose coordinate 0 is (rescaled) time."""

    inner: Path

    def __post_init__(self):
        if self.inner.dimension < 2:
            raise InvalidArgument("an augmented path has dimension 1 + d >= 2")
        if np.any(np.diff(self.inner.values[:, 0]) <= 0):
            raise InvalidArgument("time coordinate of an augmented path must be strictly increasing")

    @property
    def dimension(self) -> int:
        return self.inner.dimension

    @property
    def times(self) -> np.ndarray:
        return self.inner.times

    @property
    def values(self) -> np.ndarray:
        return self.inner.values

    def __len__(self) -> int:
        return len(self.inner)


def rescaled_time(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    return (times - times[0]) / (times[-1] - times[0])


def augment(path: Path, rescale_time: bool = True) -> AugmentedPath:
    """Prepend time as coordinate 0; optionally map the time grid onto [0, 1]."""
    clock = rescaled_time(path.times) if rescale_time else path.times
    return AugmentedPath(Path(path.times, np.column_stack([clock, path.values])))


# ---------------------------------------------------------------------------
# tensor algebra


def tensor_product(*arrays) -> np.ndarray:
    """n-way tensor product; entry ``(i, j, ...)`` is ``u_i * v_j * ...``."""
    if not arrays:
        raise InvalidArgument("tensor_product needs at least one array")
    arrs = [np.asarray(a, dtype=float) for a in arrays]
    for a in arrs:
        if a.size == 0:
            raise InvalidArgument("tensor_product of an empty array")
        if not np.all(np.isfinite(a)):
            raise InvalidArgument("tensor_product input contains non-finite entries")
    return reduce(np.multiply.outer, arrs)


def _outer_flat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # batched outer product over the trailing axis, flattened row-major
    return (a[..., :, None] * b[..., None, :]).reshape(*a.shape[:-1], a.shape[-1] * b.shape[-1])


def _mul_levels(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> list[np.ndarray]:
    order = len(a) - 1
    out = []
    for n in range(order + 1):
        acc = a[n] * b[0] + a[0] * b[n] if n else a[0] * b[0]
        for k in range(1, n):
            acc = acc + _outer_flat(a[k], b[n - k])
        out.append(acc)
    return out


def _segment_levels(delta: np.ndarray, order: int) -> list[np.ndarray]:
    levels = [np.ones(delta.shape[:-1] + (1,))]
    for k in range(1, order + 1):
        levels.append(_outer_flat(levels[-1], delta) / k)
    return levels


def prefix_signature_array(values: np.ndarray, order: int) -> np.ndarray:
    """Graded prefix signatures for a batch of discretised paths.

    Args:
        values: array of shape ``(n + 1, d)`` or ``(B, n + 1, d)``.
        order: truncation order.

    Returns:
        Array of shape ``(..., n + 1, graded_length(d, order))``; slot ``j``
        holds the signature over ``[t_0, t_j]`` (slot 0 is the unit).
    """
    values = np.asarray(values, dtype=float)
    order = _check_order(order)
    squeeze = values.ndim == 2
    if squeeze:
        values = values[None]
    batch, length, dim = values.shape
    out = np.empty((batch, length, graded_length(dim, order)))
    slices = level_slices(dim, order)
    running = _segment_levels(np.zeros((batch, dim)), order)
    out[:, 0] = np.concatenate(running, axis=-1)
    increments = np.diff(values, axis=1)
    for j in range(length - 1):
        running = _mul_levels(running, _segment_levels(increments[:, j], order))
        for sl, lvl in zip(slices, running):
            out[:, j + 1, sl] = lvl
    return out[0] if squeeze else out


# ---------------------------------------------------------------------------
# signature values


@dataclass(frozen=True, eq=False)
class TruncatedSignature:
    """Element of the truncated tensor algebra with level-0 entry 1."""

    dimension: int
    order: int
    levels: tuple

    def __post_init__(self):
        levels = tuple(np.array(lvl, dtype=float).reshape(-1) for lvl in self.levels)
        if len(levels) != self.order + 1:
            raise InvalidArgument(f"expected {self.order + 1} levels, got {len(levels)}")
        for k, lvl in enumerate(levels):
            if lvl.size != self.dimension**k:
                raise InvalidArgument(f"level {k} has {lvl.size} entries, expected {self.dimension**k}")
            if not np.all(np.isfinite(lvl)):
                raise InvalidArgument("signature contains non-finite entries")
            lvl.setflags(write=False)
        if levels[0][0] != 1.0:
            raise InvalidArgument("level 0 of a signature must equal 1")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def unit(cls, dimension: int, order: int) -> "TruncatedSignature":
        return cls(dimension, order, [np.ones(1)] + [np.zeros(dimension**k) for k in range(1, order + 1)])

    @classmethod
    def from_flat(cls, dimension: int, order: int, flat) -> "TruncatedSignature":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (graded_length(dimension, order),):
            raise InvalidArgument("flat array does not match the graded layout")
        return cls(dimension, order, [flat[sl] for sl in level_slices(dimension, order)])

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate(self.levels)

    def level(self, k: int) -> np.ndarray:
        return self.levels[k]

    def tensor(self, k: int) -> np.ndarray:
        """Level ``k`` reshaped to a ``(d,) * k`` array."""
        return self.levels[k].reshape((self.dimension,) * k)

    def __mul__(self, other: "TruncatedSignature") -> "TruncatedSignature":
        return chen_concat(self, other)

    def allclose(self, other: "TruncatedSignature", rtol=1e-10, atol=1e-12) -> bool:
        return (self.dimension, self.order) == (other.dimension, other.order) and np.allclose(
            self.flat, other.flat, rtol=rtol, atol=atol
        )

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "order": self.order, "levels": [lvl.tolist() for lvl in self.levels]}


@dataclass(frozen=True, eq=False)
class DualVector:
    """Linear functional on truncated signatures, in the graded layout."""

    dimension: int
    order: int
    coefficients: np.ndarray

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=float).reshape(-1)
        if coef.size != graded_length(self.dimension, self.order):
            raise InvalidArgument(
                f"{coef.size} coefficients do not match graded length "
                f"{graded_length(self.dimension, self.order)} for (d={self.dimension}, N={self.order})"
            )
        if not np.all(np.isfinite(coef)):
            raise InvalidArgument("dual vector contains non-finite coefficients")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)

    @classmethod
    def zeros(cls, dimension: int, order: int) -> "DualVector":
        return cls(dimension, order, np.zeros(graded_length(dimension, order)))

    @classmethod
    def basis(cls, dimension: int, order: int, word: tuple = ()) -> "DualVector":
        """Indicator of the coefficient for multi-index ``word`` (0-based letters)."""
        coef = np.zeros(graded_length(dimension, order))
        offset = level_slices(dimension, order)[len(word)].start
        idx = 0
        for letter in word:
            idx = idx * dimension + letter
        coef[offset + idx] = 1.0
        return cls(dimension, order, coef)


def segment_signature(increment, order: int) -> TruncatedSignature:
    """Signature of one linear segment: level ``k`` is ``increment^{(x)k} / k!``."""
    delta = np.asarray(increment, dtype=float).reshape(-1)
    order = _check_order(order)
    return TruncatedSignature(delta.size, order, _segment_levels(delta, order))


def chen_concat(a: TruncatedSignature, b: TruncatedSignature) -> TruncatedSignature:
    """Truncated tensor product ``a (x) b``: the signature of the concatenated path."""
    if (a.dimension, a.order) != (b.dimension, b.order):
        raise InvalidArgument(
            f"cannot multiply signatures with (d, N) = {(a.dimension, a.order)} and {(b.dimension, b.order)}"
        )
    return TruncatedSignature(a.dimension, a.order, _mul_levels(a.levels, b.levels))


def _path_values(path) -> np.ndarray:
    if isinstance(path, (Path, AugmentedPath)):
        return path.values
    raise InvalidArgument(f"expected a Path or AugmentedPath, got {type(path).__name__}")


def signature(path: AugmentedPath | Path, order: int = DEFAULT_ORDER, start: int = 0, stop: int | None = None):
    """Signature of the piecewise-linear path over grid indices ``start..stop``.

    The window defaults to the whole path.
    """
    values = _path_values(path)
    stop = len(values) - 1 if stop is None else stop
    if not 0 <= start < stop < len(values):
        raise InvalidArgument(f"invalid window [{start}, {stop}] for a path of {len(values)} points")
    order = _check_order(order)
    d = values.shape[1]
    segments = (segment_signature(inc, order) for inc in np.diff(values[start : stop + 1], axis=0))
    return reduce(chen_concat, segments, TruncatedSignature.unit(d, order))


def prefix_signatures(path: AugmentedPath | Path, order: int = DEFAULT_ORDER) -> list[TruncatedSignature]:
    """Signatures over ``[t_0, t_j]`` for every grid index ``j``."""
    values = _path_values(path)
    flat = prefix_signature_array(values, order)
    d = values.shape[1]
    return [TruncatedSignature.from_flat(d, order, row) for row in flat]


def pair(functional: DualVector, sig: TruncatedSignature) -> float:
    """Natural pairing: dot product over the graded coefficient arrays."""
    if (functional.dimension, functional.order) != (sig.dimension, sig.order):
        raise InvalidArgument("dual vector and signature have different (d, N)")
    return float(functional.coefficients @ sig.flat)


def stack_flat(signatures: Iterable[TruncatedSignature]) -> np.ndarray:
    return np.stack([s.flat for s in signatures])
