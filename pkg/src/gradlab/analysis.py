"""Histograms, divergences, and the cross-domain convergence experiment.

The convergence question is: starting from the same clean field, after how
many forward steps does the per-entry value distribution stop changing?
We answer it with Jensen-Shannon divergence (base 2, so values live in
[0, 1]) between each step's histogram and the terminal one, and call the
chain converged at the first step from which the divergence never again
exceeds the tolerance.  Comparing that step count across the image,
gradient, and Laplacian chains is the whole point, so everything here
takes the domain's noise scale into account when choosing histogram
ranges.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .diffusion import DomainKind, Trajectory, forward_closed_form, noise_scale
from .field import Field, ParameterError, field_stats
from .schedule import Schedule

__all__ = [
    "Histogram",
    "JsdMatrix",
    "ConvergenceReport",
    "DEFAULT_BINS",
    "default_range",
    "histogram",
    "mass_vector",
    "jsd",
    "jsd_matrix",
    "jsd_matrix_from_masses",
    "convergence_report",
    "report_from_masses",
    "marginal_convergence_report",
    "sparsity_metrics",
    "write_jsd_csv",
    "write_jsd_matrix_csv",
]

DEFAULT_BINS = 128


@dataclass(frozen=True)
class Histogram:
    """Normalized histogram over a uniform grid, plus out-of-range mass.

    mass has one entry per bin; together with out_of_range_mass the total
    is exactly 1 (each component is count/total over the same total).
    """

    bin_edges: np.ndarray
    mass: np.ndarray
    out_of_range_mass: float

    def __post_init__(self) -> None:
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ParameterError("bin_edges must be strictly increasing")


@dataclass(frozen=True)
class JsdMatrix:
    """Pairwise divergences between the per-step histograms of one chain."""

    size: int
    values: np.ndarray
    domain: DomainKind


@dataclass(frozen=True)
class ConvergenceReport:
    """Divergence-to-terminal curve and the step where it stays under tol.

    t_converge uses the suffix rule: the first t such that every later
    step's divergence is also within tol, so a curve that dips under the
    threshold and bounces back out does not count as converged at the dip.
    """

    domain: DomainKind
    t_converge: int
    tol: float
    jsd_to_terminal: np.ndarray


def default_range(d: DomainKind) -> tuple[float, float]:
    """Histogram range covering the domain's terminal noise at four sigmas."""
    s = noise_scale(d)
    return (-4.0 * s, 4.0 * s)


def histogram(x: Field, bins: int, lo: float, hi: float) -> Histogram:
    """Count the field's entries into uniform bins over [lo, hi).

    Entries outside the range are tallied in out_of_range_mass, never
    silently dropped, so histograms of different noise levels stay
    comparable as distributions.
    """
    if bins < 2:
        raise ParameterError(f"need at least 2 bins, got {bins}")
    if not lo < hi:
        raise ParameterError(f"empty range [{lo}, {hi})")
    vals = x.data.ravel()
    if vals.size == 0:
        raise ParameterError("cannot histogram an empty field")
    idx = np.floor((vals - lo) / (hi - lo) * bins)
    ok = (idx >= 0) & (idx < bins)
    counts = np.bincount(idx[ok].astype(np.int64), minlength=bins)
    mass = counts / vals.size
    oor = float(vals.size - counts.sum()) / vals.size
    return Histogram(
        bin_edges=np.linspace(lo, hi, bins + 1), mass=mass, out_of_range_mass=oor
    )


def mass_vector(p: Histogram) -> np.ndarray:
    """The histogram as one probability vector: bins plus the overflow bin."""
    return np.append(p.mass, p.out_of_range_mass)


def _entropy(v: np.ndarray) -> float:
    return -float(np.sum(xlogy(v, v))) / math.log(2.0)


def jsd(p: Histogram, q: Histogram) -> float:
    """Jensen-Shannon divergence in bits between two histograms.

    The out-of-range mass participates as one extra shared bin.  Computed
    as H(m) - (H(p) + H(q))/2 with m the midpoint, which is algebraically
    the pair of KL halves but never divides by zero.
    """
    if p.bin_edges.shape != q.bin_edges.shape or not np.array_equal(
        p.bin_edges, q.bin_edges
    ):
        raise ParameterError("histograms have incompatible binning")
    pv = mass_vector(p)
    qv = mass_vector(q)
    m = 0.5 * (pv + qv)
    val = _entropy(m) - 0.5 * (_entropy(pv) + _entropy(qv))
    return min(max(val, 0.0), 1.0)


def _resolve_range(
    d: DomainKind, lo: float | None, hi: float | None
) -> tuple[float, float]:
    if (lo is None) != (hi is None):
        raise ParameterError("give both lo and hi, or neither")
    if lo is None:
        return default_range(d)
    return lo, hi


def _mass_stack(
    states: tuple[Field, ...] | list[Field], bins: int, lo: float, hi: float
) -> np.ndarray:
    rows = []
    for st in states:
        h = histogram(st, bins, lo, hi)
        rows.append(mass_vector(h))
    return np.stack(rows)


def jsd_matrix_from_masses(mass: np.ndarray, domain: DomainKind) -> JsdMatrix:
    """Pairwise divergences between rows of a stacked mass matrix."""
    n = mass.shape[0]
    ent = np.array([_entropy(row) for row in mass])
    values = np.zeros((n, n))
    log2 = math.log(2.0)
    for i in range(n - 1):
        mid = 0.5 * (mass[i] + mass[i + 1 :])
        ent_mid = -np.sum(xlogy(mid, mid), axis=1) / log2
        row = ent_mid - 0.5 * (ent[i] + ent[i + 1 :])
        values[i, i + 1 :] = np.clip(row, 0.0, 1.0)
    values = values + values.T
    return JsdMatrix(size=n, values=values, domain=domain)


def jsd_matrix(
    traj: Trajectory,
    bins: int = DEFAULT_BINS,
    lo: float | None = None,
    hi: float | None = None,
) -> JsdMatrix:
    """Pairwise divergence between every pair of timesteps in a trajectory."""
    lo, hi = _resolve_range(traj.domain, lo, hi)
    return jsd_matrix_from_masses(_mass_stack(traj.states, bins, lo, hi), traj.domain)


def report_from_masses(
    mass: np.ndarray, domain: DomainKind, tol: float
) -> ConvergenceReport:
    _check_tol(tol)
    term = mass[-1]
    log2 = math.log(2.0)
    term_ent = _entropy(term)
    mid = 0.5 * (mass + term)
    ent_mid = -np.sum(xlogy(mid, mid), axis=1) / log2
    ent_each = -np.sum(xlogy(mass, mass), axis=1) / log2
    curve = np.clip(ent_mid - 0.5 * (ent_each + term_ent), 0.0, 1.0)
    curve[-1] = 0.0
    t_converge = mass.shape[0] - 1
    for t in range(mass.shape[0] - 1, -1, -1):
        if curve[t] <= tol:
            t_converge = t
        else:
            break
    return ConvergenceReport(
        domain=domain, t_converge=t_converge, tol=tol, jsd_to_terminal=curve
    )


def _check_tol(tol: float) -> None:
    if not 0.0 < tol <= 1.0:
        raise ParameterError(f"tol must be in (0, 1], got {tol}")


def convergence_report(
    traj: Trajectory,
    tol: float,
    bins: int = DEFAULT_BINS,
    lo: float | None = None,
    hi: float | None = None,
) -> ConvergenceReport:
    """Divergence of every step's histogram from the terminal one.

    The terminal histogram is the trajectory's own last state, not an
    analytic target, so leftover signal at T cannot make convergence
    unreachable by definition.
    """
    _check_tol(tol)
    lo, hi = _resolve_range(traj.domain, lo, hi)
    mass = _mass_stack(traj.states, bins, lo, hi)
    return report_from_masses(mass, traj.domain, tol)


def marginal_convergence_report(
    x0: Field,
    s: Schedule,
    eps: Field,
    d: DomainKind,
    tol: float,
    bins: int = DEFAULT_BINS,
    lo: float | None = None,
    hi: float | None = None,
) -> ConvergenceReport:
    """convergence_report over closed-form marginals, one state at a time.

    Output is identical to running convergence_report on
    forward_marginal_trajectory(x0, s, eps, d); this variant never holds
    more than one state, which matters for large fields (a full
    512x512 trajectory with T=1000 is gigabytes).
    """
    _check_tol(tol)
    lo, hi = _resolve_range(d, lo, hi)
    rows = []
    for t in range(s.T + 1):
        st = forward_closed_form(x0, t, eps, s, d)
        rows.append(mass_vector(histogram(st, bins, lo, hi)))
    return report_from_masses(np.stack(rows), d, tol)


def sparsity_metrics(x: Field, tau: float) -> dict[str, float]:
    """Fraction of entries within tau of zero, plus excess kurtosis."""
    if tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    frac = float(np.mean(np.abs(x.data) <= tau))
    return {
        "fraction_near_zero": frac,
        "excess_kurtosis": field_stats(x).excess_kurtosis,
    }


def write_jsd_csv(report: ConvergenceReport, path: str) -> None:
    """Write the divergence-to-terminal curve as (t, jsd) rows."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "jsd_to_terminal"])
        for t, val in enumerate(report.jsd_to_terminal):
            w.writerow([t, f"{val:.12g}"])


def write_jsd_matrix_csv(m: JsdMatrix, path: str) -> None:
    """Write the pairwise divergence matrix as dense CSV."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for row in m.values:
            w.writerow([f"{val:.12g}" for val in row])
