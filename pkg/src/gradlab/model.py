"""Noise predictors, hand-written backprop, losses, and training loops.

Two predictors matter here.  The analytic Gaussian oracle is the exact
posterior expectation of the injected unit noise when the clean data are
per-pixel i.i.d. Gaussian; it is the correctness reference for samplers and
losses.  TinyConvNet is a three-layer 3x3 convolution stack (hidden width
16, tanh between layers, replicate padding) conditioned on the timestep via
two constant channels sqrt(gamma_t) and sqrt(1-gamma_t); its gradients are
written out by hand and checked against finite differences.

The guided loss adds lambda * mean((grad xtilde - grad x)^2), where xtilde
is an image reconstructed from the predicted clean domain field.  The
reconstruction used during training is the exact spectral pseudo-inverse,
whose adjoint is available in closed form, so the penalty gradient is exact
rather than approximated through an iterative solver.
"""

from __future__ import annotations

import abc
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .diffusion import DomainKind, noise_scale
from .field import Field, ParameterError, Rng
from .poisson import _fe_pinv_zero_mean
from .schedule import Schedule, gamma_at, make_schedule

__all__ = [
    "NoisePredictor",
    "ZeroPredictor",
    "AnalyticGaussianOracle",
    "TinyConvNet",
    "TrainReport",
    "TrainingDiverged",
    "LossConfig",
    "Reconstructor",
    "IdentityReconstructor",
    "GradientSolveReconstructor",
    "LaplacianSolveReconstructor",
    "default_reconstructor",
    "oracle_predict",
    "net_forward",
    "net_backward",
    "loss_eval",
    "zero_baseline",
    "train",
    "train_reconstructor",
    "save_net",
    "load_net",
]

HIDDEN_WIDTH = 16
_LOG_EVERY = 50
_EVAL_PASSES = 8

# Conditioning planes at t=0 are (1, 0) whatever the schedule is; the
# learned reconstructor never sees another timestep.
_T0_SCHEDULE = make_schedule("constant", 1, 0.5, 0.5)


# ---------------------------------------------------------------------------
# predictors


class NoisePredictor(abc.ABC):
    """Anything that estimates the injected unit noise from a noisy state.

    Implementations must be deterministic given (xt, t) and their own fixed
    parameters, and safe for concurrent read-only use.
    """

    @abc.abstractmethod
    def predict(self, xt: Field, t: int, s: Schedule, d: DomainKind) -> Field:
        """Estimate of the unit noise that produced xt; same shape as xt."""

    def predict_batch(
        self, xtb: np.ndarray, ts: np.ndarray, s: Schedule, d: DomainKind
    ) -> np.ndarray:
        """Vectorized predict over a (B,H,W,C) stack; override when it pays."""
        return np.stack(
            [self.predict(Field(xtb[i]), int(ts[i]), s, d).data for i in range(len(ts))]
        )


class ZeroPredictor(NoisePredictor):
    """Predicts zero noise everywhere; the baseline every trained net must beat."""

    def predict(self, xt: Field, t: int, s: Schedule, d: DomainKind) -> Field:
        return Field._wrap(np.zeros(xt.shape))

    def predict_batch(self, xtb, ts, s, d):
        return np.zeros_like(xtb)


@dataclass(frozen=True)
class AnalyticGaussianOracle(NoisePredictor):
    """Exact posterior mean of the noise for i.i.d. Gaussian clean data.

    mu and var0 describe the per-pixel clean distribution in the working
    domain.  With xt = sqrt(g) x0 + scale sqrt(1-g) eps, joint Gaussianity
    gives E[eps | xt] = scale sqrt(1-g) (xt - sqrt(g) mu) /
    (g var0 + scale^2 (1-g)).
    """

    mu: float
    var0: float

    def __post_init__(self) -> None:
        if self.var0 < 0:
            raise ParameterError(f"var0 must be nonnegative, got {self.var0}")

    def predict(self, xt: Field, t: int, s: Schedule, d: DomainKind) -> Field:
        return oracle_predict(self, xt, t, s, d)

    def predict_batch(self, xtb, ts, s, d):
        g = np.array([gamma_at(s, int(t)) for t in ts])[:, None, None, None]
        scale = noise_scale(d)
        denom = g * self.var0 + scale * scale * (1.0 - g)
        if np.any(denom == 0.0):
            raise ParameterError("degenerate oracle: var0 = 0 at gamma = 1")
        return scale * np.sqrt(1.0 - g) * (xtb - np.sqrt(g) * self.mu) / denom


def oracle_predict(
    o: AnalyticGaussianOracle, xt: Field, t: int, s: Schedule, d: DomainKind
) -> Field:
    """Posterior-mean noise estimate under the oracle's Gaussian data model."""
    g = gamma_at(s, t)
    scale = noise_scale(d)
    denom = g * o.var0 + scale * scale * (1.0 - g)
    if denom == 0.0:
        raise ParameterError("degenerate oracle: var0 = 0 at gamma = 1")
    out = scale * np.sqrt(1.0 - g) * (xt.data - np.sqrt(g) * o.mu) / denom
    return Field._wrap(out)


# ---------------------------------------------------------------------------
# tiny conv net: batched forward and hand-written backward

_PARAM_ORDER = ("W1", "b1", "W2", "b2", "W3", "b3")


class TinyConvNet(NoisePredictor):
    """Three 3x3 conv layers with replicate padding and tanh in between.

    channels_in counts data channels only; two conditioning planes
    (sqrt(gamma_t), sqrt(1-gamma_t)) are appended before layer 1, so the
    first kernel sees channels_in + 2.  Weights start uniform in
    +-1/sqrt(fan-in); the final layer starts at zero so the fresh net
    predicts zero noise.  Parameter count depends only on (channels, width).
    """

    def __init__(
        self,
        channels_in: int,
        channels_out: int,
        rng: Rng,
        hidden: int = HIDDEN_WIDTH,
    ) -> None:
        if channels_in < 1 or channels_out < 1 or hidden < 1:
            raise ParameterError("channel counts and width must be >= 1")
        self.channels_in = channels_in
        self.channels_out = channels_out
        self.hidden = hidden
        c0 = channels_in + 2
        self.params: dict[str, np.ndarray] = {
            "W1": self._init_kernel(c0, hidden, rng),
            "b1": np.zeros(hidden),
            "W2": self._init_kernel(hidden, hidden, rng),
            "b2": np.zeros(hidden),
            "W3": np.zeros((3, 3, hidden, channels_out)),
            "b3": np.zeros(channels_out),
        }

    @staticmethod
    def _init_kernel(cin: int, cout: int, rng: Rng) -> np.ndarray:
        k = 1.0 / np.sqrt(9.0 * cin)
        return rng.uniform(-k, k, size=(3, 3, cin, cout))

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def predict(self, xt: Field, t: int, s: Schedule, d: DomainKind) -> Field:
        return net_forward(self, xt, t, s)

    def predict_batch(self, xtb, ts, s, d):
        out, _ = _net_apply(self, xtb, ts, s)
        return out


def _pad_edge(a: np.ndarray) -> np.ndarray:
    return np.pad(a, ((0, 0), (1, 1), (1, 1), (0, 0)), mode="edge")


def _conv_fwd(p: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    # p is the edge-padded input (B,H+2,W+2,Cin); accumulate the 9 taps
    h = p.shape[1] - 2
    wd = p.shape[2] - 2
    out = np.broadcast_to(b, (p.shape[0], h, wd, b.shape[0])).copy()
    for du in range(3):
        for dv in range(3):
            out += np.einsum(
                "bhwi,io->bhwo", p[:, du : du + h, dv : dv + wd, :], w[du, dv]
            )
    return out


def _conv_bwd_params(
    p: np.ndarray, up: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    h, wd = up.shape[1], up.shape[2]
    dw = np.empty((3, 3, p.shape[3], up.shape[3]))
    for du in range(3):
        for dv in range(3):
            dw[du, dv] = np.einsum(
                "bhwi,bhwo->io", p[:, du : du + h, dv : dv + wd, :], up
            )
    return dw, up.sum(axis=(0, 1, 2))


def _conv_bwd_input(up: np.ndarray, w: np.ndarray) -> np.ndarray:
    # gradient through the padded tensor, then fold ghost cells back onto
    # the border pixels they replicate (exact adjoint of edge padding)
    b, h, wd, _ = up.shape
    dp = np.zeros((b, h + 2, wd + 2, w.shape[2]))
    for du in range(3):
        for dv in range(3):
            dp[:, du : du + h, dv : dv + wd, :] += np.einsum(
                "bhwo,io->bhwi", up, w[du, dv]
            )
    dx = dp[:, 1:-1, 1:-1, :].copy()
    dx[:, 0, :, :] += dp[:, 0, 1:-1, :]
    dx[:, -1, :, :] += dp[:, -1, 1:-1, :]
    dx[:, :, 0, :] += dp[:, 1:-1, 0, :]
    dx[:, :, -1, :] += dp[:, 1:-1, -1, :]
    dx[:, 0, 0, :] += dp[:, 0, 0, :]
    dx[:, 0, -1, :] += dp[:, 0, -1, :]
    dx[:, -1, 0, :] += dp[:, -1, 0, :]
    dx[:, -1, -1, :] += dp[:, -1, -1, :]
    return dx


def _conditioning_planes(shape: tuple[int, ...], ts: np.ndarray, s: Schedule) -> np.ndarray:
    b, h, w, _ = shape
    g = np.array([gamma_at(s, int(t)) for t in ts])
    planes = np.empty((b, h, w, 2))
    planes[..., 0] = np.sqrt(g)[:, None, None]
    planes[..., 1] = np.sqrt(1.0 - g)[:, None, None]
    return planes


def _net_apply(net: TinyConvNet, xtb: np.ndarray, ts: np.ndarray, s: Schedule):
    """Batched forward pass; returns output and the cache backward needs."""
    if xtb.shape[3] != net.channels_in:
        raise ParameterError(
            f"net expects {net.channels_in} data channels, got {xtb.shape[3]}"
        )
    z0 = np.concatenate([xtb, _conditioning_planes(xtb.shape, ts, s)], axis=3)
    p0 = _pad_edge(z0)
    h1 = np.tanh(_conv_fwd(p0, net.params["W1"], net.params["b1"]))
    p1 = _pad_edge(h1)
    h2 = np.tanh(_conv_fwd(p1, net.params["W2"], net.params["b2"]))
    p2 = _pad_edge(h2)
    out = _conv_fwd(p2, net.params["W3"], net.params["b3"])
    return out, (p0, h1, p1, h2, p2)


def _net_grads(net: TinyConvNet, cache, upstream: np.ndarray) -> dict[str, np.ndarray]:
    """Exact reverse-mode parameter gradients for the cached forward pass."""
    p0, h1, p1, h2, p2 = cache
    grads: dict[str, np.ndarray] = {}
    grads["W3"], grads["b3"] = _conv_bwd_params(p2, upstream)
    dh2 = _conv_bwd_input(upstream, net.params["W3"]) * (1.0 - h2 * h2)
    grads["W2"], grads["b2"] = _conv_bwd_params(p1, dh2)
    dh1 = _conv_bwd_input(dh2, net.params["W2"]) * (1.0 - h1 * h1)
    grads["W1"], grads["b1"] = _conv_bwd_params(p0, dh1)
    return grads


def net_forward(net: TinyConvNet, xt: Field, t: int, s: Schedule) -> Field:
    """Single-field forward pass with conditioning planes appended."""
    out, _ = _net_apply(net, xt.data[None], np.array([t]), s)
    return Field._wrap(out[0])


def net_backward(
    net: TinyConvNet, xt: Field, t: int, s: Schedule, upstream: Field
) -> dict[str, np.ndarray]:
    """Gradients of sum(upstream * net(xt)) with respect to every parameter."""
    out, cache = _net_apply(net, xt.data[None], np.array([t]), s)
    if upstream.data.shape != out[0].shape:
        raise ParameterError(
            f"upstream shape {upstream.shape} != output shape {out[0].shape}"
        )
    return _net_grads(net, cache, upstream.data[None])


# ---------------------------------------------------------------------------
# reconstructors: domain field -> zero-mean image, with exact adjoints


class Reconstructor(abc.ABC):
    """Linear map from a clean domain field to a mean-free image.

    apply_batch/adjoint_batch work on (B,H,W,C) stacks; the adjoint is the
    exact transpose of apply, which makes guided-loss gradients exact.
    """

    @abc.abstractmethod
    def apply_batch(self, fields: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def adjoint_batch(self, images: np.ndarray) -> np.ndarray: ...

    def apply(self, x: Field) -> Field:
        return Field._wrap(self.apply_batch(x.data[None])[0])


class IdentityReconstructor(Reconstructor):
    """Image-domain fields already are images; nothing to solve."""

    def apply_batch(self, fields):
        return fields

    def adjoint_batch(self, images):
        return images


class GradientSolveReconstructor(Reconstructor):
    """Least-squares image from a packed (gu, gv) field, solved spectrally.

    apply = pinv(grad^T grad) o grad^T; its transpose is grad o pinv, both
    realized by cosine-transform division (grad^T grad = -4 laplacian_fe).
    """

    def apply_batch(self, fields):
        return -0.25 * _fe_pinv_zero_mean(_bdiv(fields), grid_axes=(1, 2))

    def adjoint_batch(self, images):
        return _bgrad(-0.25 * _fe_pinv_zero_mean(images, grid_axes=(1, 2)))


class LaplacianSolveReconstructor(Reconstructor):
    """Mean-free image whose FE Laplacian matches the mean-free input.

    The operator pinv is symmetric, so the adjoint is the map itself.
    """

    def apply_batch(self, fields):
        return _fe_pinv_zero_mean(fields, grid_axes=(1, 2))

    def adjoint_batch(self, images):
        return _fe_pinv_zero_mean(images, grid_axes=(1, 2))


def default_reconstructor(d: DomainKind) -> Reconstructor:
    if d is DomainKind.IMAGE:
        return IdentityReconstructor()
    if d is DomainKind.GRADIENT:
        return GradientSolveReconstructor()
    return LaplacianSolveReconstructor()


def _bgrad(a: np.ndarray) -> np.ndarray:
    gu = np.zeros_like(a)
    gv = np.zeros_like(a)
    gu[:, :-1] = a[:, 1:] - a[:, :-1]
    gv[:, :, :-1] = a[:, :, 1:] - a[:, :, :-1]
    return np.concatenate([gu, gv], axis=3)


def _bdiv(g: np.ndarray) -> np.ndarray:
    c = g.shape[3] // 2
    gu = g[..., :c]
    gv = g[..., c:]
    out = np.zeros_like(gu)
    out[:, :-1] -= gu[:, :-1]
    out[:, 1:] += gu[:, :-1]
    out[:, :, :-1] -= gv[:, :, :-1]
    out[:, :, 1:] += gv[:, :, :-1]
    return out


def _blap(a: np.ndarray) -> np.ndarray:
    p = np.pad(a, ((0, 0), (1, 1), (1, 1), (0, 0)), mode="edge")
    return 0.25 * (p[:, :-2, 1:-1] + p[:, 2:, 1:-1] + p[:, 1:-1, :-2] + p[:, 1:-1, 2:]) - a


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True)
class LossConfig:
    """Knobs for train(): guided weight, penalty flavor, minibatch size."""

    lam: float = 0.0
    laplacian_penalty: bool = False
    batch_size: int = 8

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ParameterError(f"lambda must be nonnegative, got {self.lam}")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")


@dataclass(frozen=True)
class TrainReport:
    """What a training run did: sampled loss curve and the final evaluation."""

    loss_curve: tuple[float, ...]
    final_loss: float
    steps: int
    seed: int
    penalty_curve: tuple[float, ...] | None = None


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the partial report for diagnosis."""

    def __init__(self, message: str, report: TrainReport) -> None:
        super().__init__(message)
        self.report = report


def _stack_batch(batch: list[Field]) -> np.ndarray:
    if not batch:
        raise ParameterError("empty batch")
    shape = batch[0].shape
    if any(f.shape != shape for f in batch):
        raise ParameterError("batch fields must share one shape")
    return np.stack([f.data for f in batch])


def _penalty_reference(d: DomainKind, x0b: np.ndarray, laplacian_penalty: bool) -> np.ndarray:
    # reference differential field of the TRUE clean image, per domain
    if d is DomainKind.LAPLACIAN and laplacian_penalty:
        return x0b
    if d is DomainKind.IMAGE:
        return _bgrad(x0b)
    if d is DomainKind.GRADIENT:
        return x0b
    # Laplacian-domain fields are exact FE Laplacians of some image, so the
    # spectral solve recovers that image minus its mean, whose gradient is
    # exactly the original image gradient.
    return _bgrad(_fe_pinv_zero_mean(x0b, grid_axes=(1, 2)))


def _penalty_terms(
    d: DomainKind,
    x0b: np.ndarray,
    xhat0: np.ndarray,
    recon: Reconstructor,
    laplacian_penalty: bool,
    want_grad: bool,
) -> tuple[float, np.ndarray | None]:
    """Guided penalty mean((op(xtilde) - ref)^2) and, optionally, its exact
    gradient with respect to the predicted clean field."""
    use_lap = d is DomainKind.LAPLACIAN and laplacian_penalty
    ref = _penalty_reference(d, x0b, laplacian_penalty)
    xtilde = recon.apply_batch(xhat0)
    diff = (_blap(xtilde) if use_lap else _bgrad(xtilde)) - ref
    penalty = float(np.mean(diff * diff))
    if not want_grad:
        return penalty, None
    scaled = (2.0 / diff.size) * diff
    dimg = _blap(scaled) if use_lap else _bdiv(scaled)
    return penalty, recon.adjoint_batch(dimg)


def _draw_forward(
    x0b: np.ndarray, s: Schedule, d: DomainKind, rng: Rng
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Sample (t, eps) per element and form the closed-form noisy states."""
    b = x0b.shape[0]
    ts = rng.integers(1, s.T + 1, size=b)
    eps = rng.normal(x0b.shape)
    g = np.array([gamma_at(s, int(t)) for t in ts])[:, None, None, None]
    xtb = np.sqrt(g) * x0b + noise_scale(d) * np.sqrt(1.0 - g) * eps
    return ts, eps, g, xtb


def loss_eval(
    predictor: NoisePredictor,
    batch: list[Field],
    s: Schedule,
    d: DomainKind,
    rng: Rng,
    lam: float = 0.0,
    reconstructor: Reconstructor | None = None,
    laplacian_penalty: bool = False,
) -> float:
    """Monte Carlo denoising loss, optionally with the guided penalty.

    Each batch element (already mapped into domain d) gets one uniformly
    drawn timestep and one fresh unit noise; the loss is the per-element
    mean of (eps - prediction)^2, plus lam times the penalty
    mean((grad xtilde - grad x)^2) when lam > 0, with xtilde reconstructed
    from the predicted clean field.  laplacian_penalty swaps the penalty to
    compare FE Laplacians instead; it only applies in the Laplacian domain.
    """
    if lam < 0:
        raise ParameterError(f"lambda must be nonnegative, got {lam}")
    if lam > 0 and reconstructor is None:
        raise ParameterError("guided loss (lambda > 0) requires a reconstructor")
    x0b = _stack_batch(batch)
    ts, eps, g, xtb = _draw_forward(x0b, s, d, rng)
    pred = predictor.predict_batch(xtb, ts, s, d)
    mse = float(np.mean((pred - eps) ** 2))
    if lam == 0.0:
        return mse
    scale = noise_scale(d)
    xhat0 = (xtb - scale * np.sqrt(1.0 - g) * pred) / np.sqrt(g)
    penalty, _ = _penalty_terms(d, x0b, xhat0, reconstructor, laplacian_penalty, False)
    return mse + lam * penalty


def zero_baseline(
    dataset: list[Field],
    s: Schedule,
    d: DomainKind,
    rng: Rng,
    config: LossConfig = LossConfig(),
) -> float:
    """The zero predictor's loss on train()'s own evaluation draws.

    Uses child stream 1 of rng, exactly like train()'s final_loss, so a run
    and its baseline form a paired comparison on identical (t, eps) draws.
    """
    recon = default_reconstructor(d) if config.lam > 0 else None
    return loss_eval(
        ZeroPredictor(),
        list(dataset) * _EVAL_PASSES,
        s,
        d,
        rng.child(1),
        lam=config.lam,
        reconstructor=recon,
        laplacian_penalty=config.laplacian_penalty,
    )


# ---------------------------------------------------------------------------
# training


def _sgd_update(net: TinyConvNet, grads: dict[str, np.ndarray], lr: float) -> None:
    for name in _PARAM_ORDER:
        net.params[name] -= lr * grads[name]


def train(
    net: TinyConvNet,
    dataset: list[Field],
    s: Schedule,
    d: DomainKind,
    config: LossConfig,
    lr: float,
    steps: int,
    rng: Rng,
) -> TrainReport:
    """Plain SGD on the denoising loss; fully determined by rng's seed.

    Dataset fields must already live in domain d.  The loss is logged every
    50 steps (and at the last step).  final_loss re-evaluates the trained
    net with loss_eval over eight passes of the dataset on child stream 1
    of rng; zero_baseline() uses the same stream, making the two directly
    comparable.  A non-finite loss aborts with TrainingDiverged carrying
    the partial report.
    """
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    if lr <= 0:
        raise ParameterError(f"lr must be positive, got {lr}")
    data = _stack_batch(dataset)
    n = data.shape[0]
    scale = noise_scale(d)
    recon = default_reconstructor(d) if config.lam > 0 else None
    train_rng = rng.child(0)

    curve: list[float] = []
    pen_curve: list[float] = []
    for step in range(1, steps + 1):
        idx = train_rng.integers(0, n, size=config.batch_size)
        x0b = data[idx]
        ts, eps, g, xtb = _draw_forward(x0b, s, d, train_rng)
        out, cache = _net_apply(net, xtb, ts, s)
        resid = out - eps
        mse = float(np.mean(resid * resid))
        upstream = (2.0 / resid.size) * resid
        penalty = 0.0
        if config.lam > 0:
            coef = scale * np.sqrt(1.0 - g) / np.sqrt(g)
            xhat0 = (xtb - scale * np.sqrt(1.0 - g) * out) / np.sqrt(g)
            penalty, dpen = _penalty_terms(
                d, x0b, xhat0, recon, config.laplacian_penalty, True
            )
            # chain rule through xhat0 = (xt - scale sqrt(1-g) out)/sqrt(g)
            upstream = upstream - config.lam * coef * dpen
        loss = mse + config.lam * penalty
        if not np.isfinite(loss):
            report = TrainReport(
                loss_curve=tuple(curve),
                final_loss=float("nan"),
                steps=step,
                seed=rng.seed,
                penalty_curve=tuple(pen_curve) if config.lam > 0 else None,
            )
            raise TrainingDiverged(f"loss became {loss} at step {step}", report)
        grads = _net_grads(net, cache, upstream)
        _sgd_update(net, grads, lr)
        if step % _LOG_EVERY == 0 or step == steps:
            curve.append(loss)
            if config.lam > 0:
                pen_curve.append(penalty)

    final = loss_eval(
        net,
        list(dataset) * _EVAL_PASSES,
        s,
        d,
        rng.child(1),
        lam=config.lam,
        reconstructor=recon,
        laplacian_penalty=config.laplacian_penalty,
    )
    return TrainReport(
        loss_curve=tuple(curve),
        final_loss=final,
        steps=steps,
        seed=rng.seed,
        penalty_curve=tuple(pen_curve) if config.lam > 0 else None,
    )


def _reconstructor_inputs(
    images: np.ndarray, d: DomainKind
) -> np.ndarray:
    if d is DomainKind.GRADIENT:
        return _bgrad(images)
    if d is DomainKind.LAPLACIAN:
        return _blap(images)
    raise ParameterError("reconstructor training needs gradient or Laplacian inputs")


def train_reconstructor(
    net: TinyConvNet,
    dataset: list[Field],
    noise_levels: list[float],
    rng: Rng,
    lr: float,
    steps: int,
    d: DomainKind = DomainKind.GRADIENT,
    batch_size: int = 8,
) -> TrainReport:
    """Supervised field-to-image regression, noise-perturbed for robustness.

    Dataset entries are clean images.  Each step differentiates a minibatch
    into domain d, adds N(0, level^2) noise with the level drawn uniformly
    from noise_levels, and regresses onto the mean-free images (the constant
    is unrecoverable from differences).  The net is evaluated like train():
    final_loss is the MSE on child stream 1 draws.
    """
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    if lr <= 0:
        raise ParameterError(f"lr must be positive, got {lr}")
    if not noise_levels:
        raise ParameterError("noise_levels must be nonempty")
    if any(lev < 0 for lev in noise_levels):
        raise ParameterError("noise levels must be nonnegative")
    images = _stack_batch(dataset)
    targets = images - images.mean(axis=(1, 2), keepdims=True)
    n = images.shape[0]
    levels = np.asarray(noise_levels, dtype=np.float64)
    train_rng = rng.child(0)

    def perturbed(idx: np.ndarray, r: Rng) -> np.ndarray:
        fields = _reconstructor_inputs(images[idx], d)
        lev = levels[r.integers(0, len(levels), size=len(idx))]
        return fields + lev[:, None, None, None] * r.normal(fields.shape)

    curve: list[float] = []
    ts0 = np.zeros(batch_size, dtype=int)
    for step in range(1, steps + 1):
        idx = train_rng.integers(0, n, size=batch_size)
        xb = perturbed(idx, train_rng)
        out, cache = _net_apply(net, xb, ts0, s=_T0_SCHEDULE)
        resid = out - targets[idx]
        loss = float(np.mean(resid * resid))
        if not np.isfinite(loss):
            report = TrainReport(tuple(curve), float("nan"), step, rng.seed)
            raise TrainingDiverged(f"loss became {loss} at step {step}", report)
        grads = _net_grads(net, cache, (2.0 / resid.size) * resid)
        _sgd_update(net, grads, lr)
        if step % _LOG_EVERY == 0 or step == steps:
            curve.append(loss)

    eval_rng = rng.child(1)
    idx = np.arange(n).repeat(_EVAL_PASSES)
    xb = perturbed(idx, eval_rng)
    out, _ = _net_apply(net, xb, np.zeros(len(idx), dtype=int), s=_T0_SCHEDULE)
    final = float(np.mean((out - targets[idx]) ** 2))
    return TrainReport(tuple(curve), final, steps, rng.seed)


# ---------------------------------------------------------------------------
# checkpoints


def save_net(net: TinyConvNet, bin_path: str, json_path: str, seed: int, step: int) -> None:
    """Raw little-endian float64 parameter dump plus a JSON sidecar."""
    with open(bin_path, "wb") as f:
        for name in _PARAM_ORDER:
            f.write(net.params[name].astype("<f8").tobytes())
    meta = {
        "architecture": "conv3x3-tanh-conv3x3-tanh-conv3x3",
        "channels_in": net.channels_in,
        "channels_out": net.channels_out,
        "width": net.hidden,
        "seed": seed,
        "step": step,
    }
    with open(json_path, "w") as f:
        json.dump(meta, f, indent=2)
        f.write("\n")


def load_net(bin_path: str, json_path: str) -> TinyConvNet:
    with open(json_path) as f:
        meta = json.load(f)
    net = TinyConvNet(
        meta["channels_in"], meta["channels_out"], Rng(0), hidden=meta["width"]
    )
    raw = np.fromfile(bin_path, dtype="<f8")
    want = sum(net.params[name].size for name in _PARAM_ORDER)
    if raw.size != want:
        raise ParameterError(f"checkpoint has {raw.size} values, expected {want}")
    pos = 0
    for name in _PARAM_ORDER:
        shape = net.params[name].shape
        size = net.params[name].size
        net.params[name] = raw[pos : pos + size].reshape(shape).astype(np.float64)
        pos += size
    return net
