"""Discrete differential operators with Neumann-consistent boundaries.

Three linear operators on fields, all pure and channel-independent:

* ``forward_gradient``: per-axis forward differences, zero at the trailing
  boundary (the replicate-padding rule makes the ghost difference vanish).
* ``divergence_adjoint``: the exact algebraic adjoint of forward_gradient,
  so <grad x, g> = <x, adjoint g> holds to machine precision.
* ``laplacian_fe``: the 5-point cross kernel with center -1 and neighbors
  1/4, i.e. one quarter of the standard 5-point Laplacian, with replicate
  padding.

Sign and scale bookkeeping matters here: ``laplacian_lsq`` (= adjoint of
gradient composed with gradient) is positive semi-definite and satisfies
laplacian_lsq(x) = -4 * laplacian_fe(x) exactly, boundary rows included.
Consumers must name which of the two conventions they use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import DimensionError, Field

__all__ = [
    "GradientField",
    "forward_gradient",
    "divergence_adjoint",
    "laplacian_fe",
    "laplacian_lsq",
]


@dataclass(frozen=True)
class GradientField:
    """Forward-difference gradient: gu along rows (u), gv along columns (v).

    Both components have the shape of the source field.  The last row of gu
    and the last column of gv are zero by the boundary rule; the constructor
    enforces only the shape agreement, since arbitrary (non-integrable)
    gradient fields are legal inputs to reconstruction.
    """

    gu: Field
    gv: Field

    def __post_init__(self) -> None:
        if self.gu.shape != self.gv.shape:
            raise DimensionError(
                f"gradient components disagree: {self.gu.shape} vs {self.gv.shape}"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.gu.shape


def forward_gradient(x: Field) -> GradientField:
    """Forward differences along u and v with replicate (Neumann) boundary.

    gu(u,v) = x(u+1,v) - x(u,v) for u < height-1 and 0 on the last row;
    gv analogously with 0 on the last column.
    """
    a = x.data
    gu = np.zeros_like(a)
    gv = np.zeros_like(a)
    gu[:-1] = a[1:] - a[:-1]
    gv[:, :-1] = a[:, 1:] - a[:, :-1]
    return GradientField(Field._wrap(gu), Field._wrap(gv))


def divergence_adjoint(g: GradientField) -> Field:
    """Exact adjoint of forward_gradient under the flat inner product.

    Entries in gu's last row and gv's last column multiply zero rows of the
    gradient matrix, so they are ignored here; that is what makes the
    adjoint identity exact rather than approximate.
    """
    gu = g.gu.data
    gv = g.gv.data
    out = np.zeros_like(gu)
    out[:-1] -= gu[:-1]
    out[1:] += gu[:-1]
    out[:, :-1] -= gv[:, :-1]
    out[:, 1:] += gv[:, :-1]
    return Field._wrap(out)


def laplacian_fe(x: Field) -> Field:
    """Finite-element Laplacian: center -1, four cross neighbors 1/4.

    Replicate padding (ghost pixel equals edge pixel) realizes the discrete
    Neumann condition.  Equals (1/4) of the usual 5-point Laplacian.
    """
    a = x.data
    p = np.pad(a, ((1, 1), (1, 1), (0, 0)), mode="edge")
    out = 0.25 * (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]) - a
    return Field._wrap(out)


def laplacian_lsq(x: Field) -> Field:
    """The composed operator grad-adjoint of grad; positive semi-definite.

    This is the matrix of the least-squares normal equations, equal to
    -4 * laplacian_fe(x) exactly (same boundary rows).
    """
    return divergence_adjoint(forward_gradient(x))
