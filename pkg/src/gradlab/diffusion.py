"""Forward and reverse diffusion in image, gradient, and Laplacian domains.

The forward chain x_t = sqrt(1-beta_t) x_{t-1} + sqrt(beta_t) eps gaussianizes
any starting field; its closed form reaches step t in one draw,
x_t = sqrt(gamma_t) x_0 + sqrt(1-gamma_t) eps.  In the gradient and Laplacian
domains the injected unit noise additionally carries the domain's scale
(sqrt(2) and sqrt(5)/2): differencing white noise amplifies its per-pixel
variance by exactly those factors squared, so matching the scale keeps the
terminal distribution aligned with what differencing real noise produces.

Noise is injected i.i.d. per pixel in every domain.  Differenced white noise
is actually correlated across neighbors; the per-pixel marginals agree, and
that is the contract tested here.

Gradient-domain states pack both components into one field of 2C channels
(first C are gu, next C are gv) so a chain state is always a single Field.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .diffops import GradientField, forward_gradient, laplacian_fe
from .field import DimensionError, Field, Rng
from .schedule import Schedule, gamma_at

if TYPE_CHECKING:
    from .model import NoisePredictor

__all__ = [
    "DomainKind",
    "Trajectory",
    "noise_scale",
    "to_domain",
    "pack_gradient",
    "unpack_gradient",
    "forward_closed_form",
    "forward_iterative",
    "forward_marginal_trajectory",
    "forward_terminal",
    "reverse_step",
    "sample",
]


class DomainKind(enum.Enum):
    """Which representation the chain diffuses: intensities, gradients, or
    Laplacians."""

    IMAGE = "image"
    GRADIENT = "gradient"
    LAPLACIAN = "laplacian"


_NOISE_SCALE = {
    DomainKind.IMAGE: 1.0,
    DomainKind.GRADIENT: math.sqrt(2.0),
    DomainKind.LAPLACIAN: math.sqrt(5.0) / 2.0,
}


def noise_scale(d: DomainKind) -> float:
    """Per-domain multiplier on injected unit noise: 1, sqrt(2), sqrt(5)/2."""
    return _NOISE_SCALE[d]


@dataclass(frozen=True)
class Trajectory:
    """All T+1 states of one forward chain; states[0] is the clean field."""

    domain: DomainKind
    states: tuple[Field, ...]
    schedule: Schedule

    def __post_init__(self) -> None:
        if len(self.states) != self.schedule.T + 1:
            raise DimensionError(
                f"expected {self.schedule.T + 1} states, got {len(self.states)}"
            )
        shape = self.states[0].shape
        if any(s.shape != shape for s in self.states):
            raise DimensionError("trajectory states must share one shape")


def pack_gradient(g: GradientField) -> Field:
    """Stack gu and gv along channels into a single 2C-channel field."""
    return Field._wrap(np.concatenate([g.gu.data, g.gv.data], axis=2))


def unpack_gradient(x: Field) -> GradientField:
    """Split a packed 2C-channel field back into its two components."""
    if x.channels % 2 != 0:
        raise DimensionError(f"packed gradient needs even channels, got {x.channels}")
    c = x.channels // 2
    return GradientField(Field(x.data[:, :, :c]), Field(x.data[:, :, c:]))


def to_domain(x: Field, d: DomainKind) -> Field:
    """Map an image into the representation the chain diffuses."""
    if d is DomainKind.IMAGE:
        return x
    if d is DomainKind.GRADIENT:
        return pack_gradient(forward_gradient(x))
    return laplacian_fe(x)


def forward_closed_form(x0: Field, t: int, eps: Field, s: Schedule, d: DomainKind) -> Field:
    """One-draw forward marginal: sqrt(gamma_t) x0 + scale sqrt(1-gamma_t) eps.

    x0 must already live in domain d; eps is unit N(0,1) of the same shape.
    t = 0 returns x0 exactly.
    """
    if x0.shape != eps.shape:
        raise DimensionError(f"shape mismatch: {x0.shape} vs {eps.shape}")
    g = gamma_at(s, t)
    out = math.sqrt(g) * x0.data + noise_scale(d) * math.sqrt(1.0 - g) * eps.data
    return Field._wrap(out)


def _forward_chain(x0: Field, s: Schedule, rng: Rng, d: DomainKind):
    """Yield the state array after each forward step, t = 1..T.

    State t comes from state t-1 with fresh noise scaled by sqrt(beta_t)
    times the domain scale.
    """
    scale = noise_scale(d)
    cur = x0.data
    for t in range(1, s.T + 1):
        beta = s.beta_at(t)
        cur = math.sqrt(1.0 - beta) * cur + (math.sqrt(beta) * scale) * rng.normal(x0.shape)
        yield cur


def forward_iterative(x0: Field, s: Schedule, rng: Rng, d: DomainKind) -> Trajectory:
    """Run the forward chain step by step, keeping every state.

    states[0] is x0 bit-exact; state t is one _forward_chain step past t-1.
    """
    states = [x0]
    states.extend(Field._wrap(cur) for cur in _forward_chain(x0, s, rng, d))
    return Trajectory(domain=d, states=tuple(states), schedule=s)


def forward_terminal(x0: Field, s: Schedule, rng: Rng, d: DomainKind) -> Field:
    """The forward chain's state at t = T, without storing the trajectory.

    Same recurrence and noise stream as forward_iterative; use this when
    only the endpoint matters and T is large.
    """
    cur = x0.data
    for cur in _forward_chain(x0, s, rng, d):
        pass
    return Field._wrap(cur)


def forward_marginal_trajectory(x0: Field, s: Schedule, eps: Field, d: DomainKind) -> Trajectory:
    """Trajectory of closed-form marginals sharing a single noise draw.

    Every state is forward_closed_form(x0, t, eps) with the same eps, so the
    sequence is the marginal law at each t evaluated on one realization.
    Convergence curves computed from it vary smoothly in t, which is what the
    cross-domain timing comparison needs; fresh per-step noise would bury the
    ordering in resampling jitter.
    """
    states = [forward_closed_form(x0, t, eps, s, d) for t in range(s.T + 1)]
    return Trajectory(domain=d, states=tuple(states), schedule=s)


def reverse_step(
    xt: Field,
    t: int,
    predictor: "NoisePredictor",
    s: Schedule,
    d: DomainKind,
    stochastic: bool,
    rng: Rng,
) -> Field:
    """One ancestral denoising step from x_t to x_{t-1}.

    Deterministic part: (x_t - beta_t/sqrt(1-gamma_t) * scale * eps_hat)
    divided by sqrt(alpha_t).  When stochastic, fresh noise sqrt(beta_t) *
    scale is added except at t = 1, the final step.
    """
    if t < 1:
        raise IndexError(f"reverse step needs t >= 1, got {t}")
    beta = s.beta_at(t)
    alpha = s.alpha_at(t)
    g = gamma_at(s, t)
    scale = noise_scale(d)
    eps_hat = predictor.predict(xt, t, s, d)
    if eps_hat.shape != xt.shape:
        raise DimensionError(f"predictor shape {eps_hat.shape} != state {xt.shape}")
    out = (xt.data - (beta / math.sqrt(1.0 - g)) * scale * eps_hat.data) / math.sqrt(alpha)
    if stochastic and t > 1:
        out = out + (math.sqrt(beta) * scale) * rng.normal(xt.shape)
    return Field._wrap(out)


def sample(
    predictor: "NoisePredictor",
    s: Schedule,
    shape: tuple[int, int, int],
    d: DomainKind,
    stochastic: bool,
    rng: Rng,
) -> Field:
    """Draw one field in domain d by running the reverse chain from t = T.

    Starts from N(0, scale^2) noise.  The output lives in domain d; for
    gradient or Laplacian chains the caller reconstructs an image with the
    poisson module.
    """
    h, w, c = shape
    cur = Field._wrap(noise_scale(d) * rng.normal((h, w, c)))
    for t in range(s.T, 0, -1):
        cur = reverse_step(cur, t, predictor, s, d, stochastic, rng)
    return cur
