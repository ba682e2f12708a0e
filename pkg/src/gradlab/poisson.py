"""Image recovery from Laplacian or gradient fields under Neumann boundaries.

Two independent solvers, used as correctness oracles for each other:

* ``solve_poisson_neumann``: direct spectral solve of laplacian_fe(x) = y.
  The replicate-padded 1-D second difference is diagonalized exactly by the
  orthonormal DCT-II, and the 2-D stencil is the Kronecker sum of the two
  1-D operators, so division in transform space inverts the operator.
* ``reconstruct_from_gradient``: conjugate gradient on the normal equations
  of the least-squares energy 0.5 * ||grad x - g||^2, which tolerates
  non-integrable gradient fields.

Both problems determine the solution only up to an additive constant, so
every solution carries the mean it was anchored to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .diffops import GradientField, divergence_adjoint, forward_gradient, laplacian_fe
from .field import DimensionError, Field, ParameterError

__all__ = [
    "PoissonSolution",
    "solve_poisson_neumann",
    "reconstruct_from_gradient",
    "greens_identity_check",
]

# Relative mean threshold beyond which a Laplacian rhs is declared
# incompatible with the Neumann problem and mean-projected.
_COMPAT_RTOL = 1e-8


@dataclass(frozen=True)
class PoissonSolution:
    """A recovered image plus solve diagnostics.

    residual_l2 is ||op(image) - rhs|| / ||rhs|| against the rhs actually
    solved (after any mean projection); iterations is 0 for the spectral
    path.  energy_trace, when present, holds the least-squares energy at
    every CG iterate and is non-increasing.
    """

    image: Field
    residual_l2: float
    anchored_mean: float
    iterations: int
    converged: bool = True
    mean_projected: bool = False
    energy_trace: tuple[float, ...] | None = None


def _anchor(arr: np.ndarray, anchor_mean: float) -> np.ndarray:
    """Shift every channel to the requested mean exactly (one add)."""
    return arr + (anchor_mean - arr.mean(axis=(0, 1)))


def _neumann_eigenvalues(h: int, w: int) -> np.ndarray:
    # 1-D replicate-boundary second difference has DCT-II eigenvalues
    # 2cos(pi k / N) - 2; the FE kernel is a quarter of the 2-D Kronecker sum.
    lu = -4.0 * np.sin(np.pi * np.arange(h) / (2 * h)) ** 2
    lv = -4.0 * np.sin(np.pi * np.arange(w) / (2 * w)) ** 2
    return 0.25 * (lu[:, None] + lv[None, :])


def _fe_pinv_zero_mean(arr: np.ndarray, grid_axes: tuple[int, int] = (0, 1)) -> np.ndarray:
    """Pseudo-inverse of laplacian_fe on a raw array: mean-free solution of
    the mean-free part of arr.

    Zeroing the DC coefficient is simultaneously the compatibility
    projection of the input and the zero-mean anchoring of the output.
    grid_axes names the two spatial axes, so batched stacks work too.
    """
    au, av = grid_axes
    eig = _neumann_eigenvalues(arr.shape[au], arr.shape[av])
    eig = eig.copy()
    eig[0, 0] = 1.0
    shape = [1] * arr.ndim
    shape[au] = arr.shape[au]
    shape[av] = arr.shape[av]
    spectrum = scipy.fft.dctn(arr, type=2, norm="ortho", axes=grid_axes)
    spectrum /= eig.reshape(shape)
    dc = [slice(None)] * arr.ndim
    dc[au] = 0
    dc[av] = 0
    spectrum[tuple(dc)] = 0.0
    return scipy.fft.idctn(spectrum, type=2, norm="ortho", axes=grid_axes)


def solve_poisson_neumann(y: Field, anchor_mean: float) -> PoissonSolution:
    """Solve laplacian_fe(x) = y with Neumann boundary, pinned to a mean.

    The zero-frequency mode is undetermined (solutions differ by constants),
    so it is set to make mean(image) = anchor_mean.  A rhs whose mean
    exceeds 1e-8 * max|y| violates the compatibility condition and has its
    mean projected out first; the flag records that.
    """
    if not np.isfinite(anchor_mean):
        raise ParameterError("anchor_mean must be finite")
    rhs = y.data
    mean_projected = False
    chan_means = rhs.mean(axis=(0, 1))
    max_abs = np.abs(rhs).max()
    if max_abs > 0 and np.abs(chan_means).max() > _COMPAT_RTOL * max_abs:
        rhs = rhs - chan_means
        mean_projected = True

    h, w, _ = y.shape
    eig = _neumann_eigenvalues(h, w)
    spectrum = scipy.fft.dctn(rhs, type=2, norm="ortho", axes=(0, 1))
    safe = eig.copy()
    safe[0, 0] = 1.0
    spectrum /= safe[:, :, None]
    # DC coefficient of the orthonormal DCT-II is mean * sqrt(h*w).
    spectrum[0, 0, :] = anchor_mean * np.sqrt(h * w)
    sol = scipy.fft.idctn(spectrum, type=2, norm="ortho", axes=(0, 1))
    sol = _anchor(sol, anchor_mean)
    image = Field._wrap(sol)

    rhs_norm = float(np.linalg.norm(rhs))
    res = float(np.linalg.norm(laplacian_fe(image).data - rhs))
    residual = res / rhs_norm if rhs_norm > 0 else res
    return PoissonSolution(
        image=image,
        residual_l2=residual,
        anchored_mean=float(anchor_mean),
        iterations=0,
        mean_projected=mean_projected,
    )


def _grad_arrays(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gu = np.zeros_like(a)
    gv = np.zeros_like(a)
    gu[:-1] = a[1:] - a[:-1]
    gv[:, :-1] = a[:, 1:] - a[:, :-1]
    return gu, gv


def _normal_op(a: np.ndarray) -> np.ndarray:
    # grad-adjoint of grad, inlined to avoid Field wrapping inside the loop
    gu, gv = _grad_arrays(a)
    out = np.zeros_like(a)
    out[:-1] -= gu[:-1]
    out[1:] += gu[:-1]
    out[:, :-1] -= gv[:, :-1]
    out[:, 1:] += gv[:, :-1]
    return out


def _lsq_energy(a: np.ndarray, gu0: np.ndarray, gv0: np.ndarray) -> float:
    gu, gv = _grad_arrays(a)
    return 0.5 * (np.sum((gu - gu0) ** 2) + np.sum((gv - gv0) ** 2))


def reconstruct_from_gradient(
    g: GradientField, anchor_mean: float, tol: float, max_iter: int
) -> PoissonSolution:
    """Least-squares image from a (possibly non-integrable) gradient field.

    Runs conjugate gradient on the normal equations, starting from the
    constant anchor_mean field.  Stops when the relative residual
    ||b - A x|| / ||b|| drops to tol, which is exactly the first-order
    optimality condition of the convex energy; returns the best iterate
    flagged non-converged if max_iter is exhausted first, or if rounding
    breaks the recurrence before then (exact CG never raises the energy,
    so a rise means the rhs is noise-level and the last good iterate is
    the answer).

    The rhs b = grad-adjoint(g) has zero mean by construction and the
    operator preserves zero-mean updates, so iterates keep the anchored
    mean; a final exact re-anchor removes accumulated rounding drift.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if max_iter < 0:
        raise ParameterError(f"max_iter must be nonnegative, got {max_iter}")
    if not np.isfinite(anchor_mean):
        raise ParameterError("anchor_mean must be finite")

    gu0 = g.gu.data
    gv0 = g.gv.data
    b = np.zeros_like(gu0)
    b[:-1] -= gu0[:-1]
    b[1:] += gu0[:-1]
    b[:, :-1] -= gv0[:, :-1]
    b[:, 1:] += gv0[:, :-1]

    x = np.full_like(b, float(anchor_mean))
    b_norm = float(np.linalg.norm(b))
    energy = [_lsq_energy(x, gu0, gv0)]
    if b_norm == 0.0:
        return PoissonSolution(
            image=Field._wrap(x),
            residual_l2=0.0,
            anchored_mean=float(anchor_mean),
            iterations=0,
            energy_trace=tuple(energy),
        )

    # A x = 0 for the constant start, so r0 = b.
    r = b.copy()
    p = r.copy()
    rr = float(np.dot(r.ravel(), r.ravel()))
    iterations = 0
    converged = np.sqrt(rr) / b_norm <= tol
    while not converged and iterations < max_iter:
        ap = _normal_op(p)
        pap = float(np.dot(p.ravel(), ap.ravel()))
        if pap <= 0.0:
            # p in the (constant) null space; nothing left to reduce
            break
        alpha = rr / pap
        x_next = x + alpha * p
        e_next = _lsq_energy(x_next, gu0, gv0)
        if not np.isfinite(e_next) or e_next - energy[-1] > 1e-12 * energy[0]:
            # rounding has broken the recurrence; keep the last good iterate
            break
        x = x_next
        r -= alpha * ap
        rr_next = float(np.dot(r.ravel(), r.ravel()))
        iterations += 1
        energy.append(e_next)
        converged = np.sqrt(rr_next) / b_norm <= tol
        p = r + (rr_next / rr) * p
        rr = rr_next

    x = _anchor(x, anchor_mean)
    residual = float(np.linalg.norm(b - _normal_op(x))) / b_norm
    return PoissonSolution(
        image=Field._wrap(x),
        residual_l2=residual,
        anchored_mean=float(anchor_mean),
        iterations=iterations,
        converged=bool(converged),
        energy_trace=tuple(energy),
    )


def greens_identity_check(x1: Field, x2: Field) -> float:
    """How far the difference of two solutions is from a pure constant.

    Solutions of the same Neumann problem differ by a constant, so this
    returns max|(x1 - x2) - mean(x1 - x2)| as a numerical uniqueness
    witness: 0 (to rounding) for genuine solution pairs.
    """
    if x1.shape != x2.shape:
        raise DimensionError(f"shape mismatch: {x1.shape} vs {x2.shape}")
    d = x1.data - x2.data
    return float(np.abs(d - d.mean()).max())
