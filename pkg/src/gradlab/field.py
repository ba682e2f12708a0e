"""Dense real-valued grids, seeded Gaussian sampling, and summary statistics.

Everything downstream (differential operators, diffusion chains, solvers)
works on :class:`Field` values: height x width x channels grids of float64.
Fields are immutable and always finite, so consumers never re-validate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionError",
    "ParameterError",
    "Field",
    "FieldStats",
    "Rng",
    "new_field",
    "sample_gaussian",
    "field_stats",
]

# Desk-scale guard: reject allocations past this many scalars.
_MAX_ELEMENTS = 1 << 31


class DimensionError(ValueError):
    """Raised for zero, negative, or absurdly large grid dimensions."""


class ParameterError(ValueError):
    """Raised for out-of-range numeric parameters (e.g. sigma <= 0)."""


@dataclass(frozen=True)
class Field:
    """Immutable (height, width, channels) grid of float64 values.

    ``data`` is row-major and read-only.  Construction rejects NaN/Inf, so a
    Field in hand is always finite.  A 2-D array is accepted and treated as
    single-channel.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise DimensionError(f"field must be 2-D or 3-D, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise DimensionError(f"field dimensions must be >= 1, got {arr.shape}")
        if arr.size > _MAX_ELEMENTS:
            raise DimensionError(f"field of {arr.size} elements exceeds supported size")
        arr = np.array(arr, dtype=np.float64, order="C", copy=True)
        if not np.isfinite(arr).all():
            raise ValueError("field contains non-finite entries")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    @staticmethod
    def _wrap(arr: np.ndarray) -> "Field":
        """Build a Field around a freshly allocated float64 array without copying.

        Internal fast path for operators that just produced ``arr`` and hold
        the only reference.  Validation still runs.
        """
        f = object.__new__(Field)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DimensionError(f"bad field shape {arr.shape}")
        if arr.dtype != np.float64 or not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise ValueError("field contains non-finite entries")
        arr.flags.writeable = False
        object.__setattr__(f, "data", arr)
        return f


@dataclass(frozen=True)
class FieldStats:
    """Summary statistics over all entries of a field.

    ``variance`` is the unbiased (n-1) estimate; ``excess_kurtosis`` is the
    fourth standardized moment minus 3.  ``degenerate`` is set when the
    spread is zero (single entry or constant field), in which case variance
    and kurtosis are reported as 0 rather than NaN.
    """

    mean: float
    variance: float
    excess_kurtosis: float
    min: float
    max: float
    degenerate: bool


class Rng:
    """Counter-based Philox stream behind an explicit 64-bit seed.

    numpy's Philox-4x64 generator is used so that the same seed reproduces
    bit-identical draws across runs, platforms, and thread layouts.  An Rng
    is single-owner: never share one instance between concurrent consumers;
    derive independent child streams instead.
    """

    def __init__(self, seed: int) -> None:
        seed = int(seed)
        if not 0 <= seed < 1 << 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self._gen = np.random.Generator(np.random.Philox(key=seed))

    def normal(self, shape: tuple[int, ...] = ()) -> np.ndarray:
        """Standard normal draws of the given shape (float64)."""
        return self._gen.standard_normal(size=shape, dtype=np.float64)

    def integers(self, low: int, high: int, size=None):
        """Uniform integers in [low, high)."""
        return self._gen.integers(low, high, size=size)

    def uniform(self, low: float, high: float, size=None):
        return self._gen.uniform(low, high, size=size)

    def child(self, index: int) -> "Rng":
        """Independent stream number ``index`` derived from this seed.

        Uses a disjoint region of the 128-bit Philox key space, so children
        never collide with the parent stream or with one another.
        """
        if index < 0:
            raise ParameterError("child index must be nonnegative")
        r = object.__new__(Rng)
        r.seed = self.seed
        r._gen = np.random.Generator(np.random.Philox(key=self.seed + ((index + 1) << 64)))
        return r


def new_field(height: int, width: int, channels: int, fill: float) -> Field:
    """Constant field of the given shape with every entry equal to ``fill``."""
    for name, v in (("height", height), ("width", width), ("channels", channels)):
        if int(v) != v or v < 1:
            raise DimensionError(f"{name} must be a positive integer, got {v!r}")
    if height * width * channels > _MAX_ELEMENTS:
        raise DimensionError("requested field exceeds supported size")
    if not np.isfinite(fill):
        raise ParameterError("fill must be finite")
    return Field._wrap(np.full((height, width, channels), float(fill)))


def sample_gaussian(shape: tuple[int, int, int], sigma: float, rng: Rng) -> Field:
    """I.i.d. N(0, sigma^2) field of the given (h, w, c) shape.

    The draw depends only on the rng state, and scaling holds exactly:
    sampling with sigma equals sigma times sampling with 1 under the same
    seed.
    """
    if sigma <= 0 or not np.isfinite(sigma):
        raise ParameterError(f"sigma must be positive, got {sigma}")
    h, w, c = shape
    if h < 1 or w < 1 or c < 1:
        raise DimensionError(f"shape entries must be >= 1, got {shape}")
    return Field._wrap(float(sigma) * rng.normal((h, w, c)))


def field_stats(x: Field) -> FieldStats:
    """Mean, unbiased variance, excess kurtosis, min and max over all entries."""
    d = x.data.ravel()
    n = d.size
    mean = float(d.mean())
    mn = float(d.min())
    mx = float(d.max())
    if n < 2:
        return FieldStats(mean, 0.0, 0.0, mn, mx, degenerate=True)
    centered = d - mean
    m2 = float(np.mean(centered * centered))
    variance = m2 * n / (n - 1)
    if m2 == 0.0:
        return FieldStats(mean, 0.0, 0.0, mn, mx, degenerate=True)
    m4 = float(np.mean(centered**4))
    kurt = m4 / (m2 * m2) - 3.0
    return FieldStats(mean, variance, kurt, mn, mx, degenerate=False)
