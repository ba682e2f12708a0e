"""Noise schedules: beta_t, alpha_t = 1 - beta_t, gamma_t = prod alpha_j.

gamma is stored as the running product in double precision, computed
sequentially so that gamma[t] == gamma[t-1] * alpha[t] holds bitwise.
Arrays are indexed by step t = 1..T through the accessors; gamma_0 = 1 is
the empty product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import ParameterError

__all__ = ["Schedule", "make_schedule", "gamma_at", "default_schedule"]

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class Schedule:
    """Immutable (beta, alpha, gamma) triple over T steps.

    The arrays have length T and position i holds the value for step
    t = i + 1.  Prefer ``beta_at``/``alpha_at``/``gamma_at`` over raw
    indexing to keep the 1-based step convention in one place.
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray

    def __post_init__(self) -> None:
        for name in ("beta", "alpha", "gamma"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (len(self.beta) == len(self.alpha) == len(self.gamma) == self.T):
            raise ParameterError("schedule arrays must all have length T")
        if not ((self.beta > 0) & (self.beta < 1)).all():
            raise ParameterError("every beta_t must lie in (0, 1)")
        if self.T > 1 and not (np.diff(self.gamma) < 0).all():
            raise ParameterError("gamma must be strictly decreasing")
        if not 0 < self.gamma[-1] < 1:
            raise ParameterError("gamma_T must lie in (0, 1)")

    def beta_at(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise IndexError(f"step t={t} outside 1..{self.T}")
        return float(self.beta[t - 1])

    def alpha_at(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise IndexError(f"step t={t} outside 1..{self.T}")
        return float(self.alpha[t - 1])


def make_schedule(kind: str, T: int, beta_start: float, beta_end: float) -> Schedule:
    """Build a linear or constant beta schedule over T steps.

    linear interpolates the endpoints inclusively; constant uses beta_start
    for every step.  Requires 0 < beta_start <= beta_end < 1 and T >= 1.
    """
    if int(T) != T or T < 1:
        raise ParameterError(f"T must be a positive integer, got {T!r}")
    if not (0 < beta_start <= beta_end < 1):
        raise ParameterError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    if kind == "linear":
        beta = np.linspace(beta_start, beta_end, T)
    elif kind == "constant":
        beta = np.full(T, float(beta_start))
    else:
        raise ParameterError(f"unknown schedule kind {kind!r}")
    alpha = 1.0 - beta
    # ufunc accumulate is sequential, so the stored products satisfy
    # gamma[t] = gamma[t-1] * alpha[t] exactly.
    gamma = np.cumprod(alpha)
    return Schedule(int(T), beta, alpha, gamma)


def gamma_at(s: Schedule, t: int) -> float:
    """gamma_t with gamma_0 = 1 (empty product)."""
    if not 0 <= t <= s.T:
        raise IndexError(f"step t={t} outside 0..{s.T}")
    if t == 0:
        return 1.0
    return float(s.gamma[t - 1])


def default_schedule() -> Schedule:
    """The house default: linear, T=1000, beta from 1e-4 to 0.02."""
    return make_schedule("linear", DEFAULT_T, DEFAULT_BETA_START, DEFAULT_BETA_END)
