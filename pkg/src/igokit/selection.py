"""Quantile-based selection: schemes, rank bounds, tie-averaged sample weights,
and the exact weighted preference for finite distributions.

A selection scheme is a non-increasing weight function ``w`` on [0, 1] that
integrates to 1. The truncation scheme ``w(u) = 1[u <= q]/q`` puts uniform
weight on the best fraction ``q``; arbitrary non-increasing weights enter
through :class:`TabulatedScheme`. Per-rank weights are integrals of ``w`` over
the rank cells ``((i-1)/lam, i/lam]`` and are computed analytically (interval
overlap), never by numeric quadrature: downstream improvement checks run at
1e-10 tolerances.

Ties compare by exact floating equality, matching the rank definitions; values
that differ in the last bit are distinct. All functions here are pure over
immutable inputs and safe for arbitrary parallel use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "TruncationScheme",
    "TabulatedScheme",
    "SampleWeights",
    "bar_weights",
    "rank_bounds",
    "sample_weights",
    "preference_exact",
]


@dataclass(frozen=True)
class TruncationScheme:
    """Truncation selection: uniform weight ``1/q`` on quantiles ``u <= q``.

    ``q`` must be strictly interior, ``0 < q < 1``.
    """

    q: float

    def __post_init__(self):
        q = float(self.q)
        if not (0.0 < q < 1.0) or not np.isfinite(q):
            raise InvalidInputError(f"q must satisfy 0 < q < 1, got {self.q!r}")
        object.__setattr__(self, "q", q)

    def weight(self, u: float) -> float:
        """Point value w(u)."""
        return (1.0 / self.q) if u <= self.q else 0.0

    def integral(self, a: float, b: float) -> float:
        """Exact integral of w over [a, b], 0 <= a <= b <= 1."""
        if b < a:
            raise InvalidInputError("integral bounds must satisfy a <= b")
        return (min(b, self.q) - min(a, self.q)) / self.q

    def bar_weights(self, lam: int) -> np.ndarray:
        """Per-rank weights: the overlap of each rank cell with [0, q], over q."""
        if lam < 1:
            raise InvalidInputError("lam must be >= 1")
        upper = np.arange(1, lam + 1) / lam
        lower = np.arange(0, lam) / lam
        return (np.minimum(upper, self.q) - np.minimum(lower, self.q)) / self.q


@dataclass(frozen=True)
class TabulatedScheme:
    """Selection scheme given directly by its per-cell weights.

    ``cells`` holds the integrals of ``w`` over ``n`` equal cells of [0, 1];
    ``w`` is the corresponding step function. Entries must be non-negative,
    non-increasing and sum to 1 (within 1e-12). ``TabulatedScheme((1.0,))`` is
    the uniform scheme ``w == 1``.

    Quantile-improvement guarantees are only asserted for truncation; this
    constructor exists so arbitrary non-increasing weights can be run.
    """

    cells: tuple

    def __post_init__(self):
        cells = tuple(float(c) for c in self.cells)
        if len(cells) < 1:
            raise InvalidInputError("cells must be non-empty")
        arr = np.array(cells)
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("cells must be finite")
        if np.any(arr < 0.0):
            raise InvalidInputError("cells must be non-negative")
        if np.any(np.diff(arr) > 1e-15):
            raise InvalidInputError("cells must be non-increasing")
        if abs(float(arr.sum()) - 1.0) > 1e-12:
            raise InvalidInputError("cells must sum to 1 within 1e-12")
        object.__setattr__(self, "cells", cells)

    def weight(self, u: float) -> float:
        n = len(self.cells)
        if u <= 0.0:
            return n * self.cells[0]
        k = min(int(np.ceil(u * n)) - 1, n - 1)
        return n * self.cells[k]

    def integral(self, a: float, b: float) -> float:
        if b < a:
            raise InvalidInputError("integral bounds must satisfy a <= b")
        return self._prefix(b) - self._prefix(a)

    def _prefix(self, t: float) -> float:
        n = len(self.cells)
        t = min(max(t, 0.0), 1.0)
        k = min(int(np.floor(t * n)), n - 1)
        head = float(np.sum(self.cells[:k]))
        return head + (t - k / n) * n * self.cells[k]

    def bar_weights(self, lam: int) -> np.ndarray:
        if lam < 1:
            raise InvalidInputError("lam must be >= 1")
        if lam == len(self.cells):
            return np.array(self.cells)
        edges = np.arange(lam + 1) / lam
        return np.array(
            [self.integral(edges[i], edges[i + 1]) for i in range(lam)]
        )


def bar_weights(lam: int, scheme) -> np.ndarray:
    """Per-rank weights of ``scheme`` for population size ``lam``."""
    return scheme.bar_weights(lam)


def rank_bounds(fitness):
    """Lower/upper rank bounds of each sample under exact-equality ties.

    Returns ``(rk_minus, rk_plus)`` where ``rk_minus[i]`` counts samples with
    strictly smaller fitness and ``rk_plus[i]`` counts samples with smaller or
    equal fitness (including sample ``i`` itself), so
    ``rk_plus[i] - rk_minus[i]`` is the multiplicity of ``fitness[i]``.
    """
    f = np.asarray(fitness, dtype=np.float64)
    if f.ndim != 1 or f.size < 1:
        raise InvalidInputError("fitness must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(f)):
        raise InvalidInputError("fitness values must be finite (no NaN/inf)")
    order = np.sort(f)
    rk_minus = np.searchsorted(order, f, side="left")
    rk_plus = np.searchsorted(order, f, side="right")
    return rk_minus, rk_plus


@dataclass(frozen=True, eq=False)
class SampleWeights:
    """Normalized per-sample selection weights: non-negative, summing to 1."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise InvalidInputError("weights must be a non-empty 1-d sequence")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise InvalidInputError("weights must be finite and non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise InvalidInputError("weights must sum to 1 within 1e-12")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __len__(self):
        return self.w.size

    def entropy(self) -> float:
        """Shannon entropy of the weights, with 0 log 0 = 0."""
        pos = self.w[self.w > 0.0]
        return float(-np.sum(pos * np.log(pos)))


def sample_weights(fitness, scheme) -> SampleWeights:
    """Tie-averaged selection weights of a fitness sample.

    Each sample receives the mean of the per-rank weights across the rank
    range its fitness value occupies; with no ties this is just the weight of
    its own rank. Weights are non-negative and sum to 1.
    """
    rk_minus, rk_plus = rank_bounds(fitness)
    lam = rk_minus.size
    bw = scheme.bar_weights(lam)
    csum = np.concatenate([[0.0], np.cumsum(bw)])
    w = (csum[rk_plus] - csum[rk_minus]) / (rk_plus - rk_minus)
    return SampleWeights(w)


def preference_exact(prob, fitness, scheme) -> np.ndarray:
    """Exact weighted preference on a finite distribution.

    ``prob`` are the probabilities of the support points (summing to 1 within
    1e-12) and ``fitness`` their objective values. For each point, the
    strictly-better mass ``q-`` and better-or-equal mass ``q+`` are
    accumulated over exact-equality fitness groups, and the preference is
    ``w(q+)`` when the point's own level carries no mass, otherwise the
    average of ``w`` over ``(q-, q+]``. The expectation of the result under
    ``prob`` is 1.
    """
    p = np.asarray(prob, dtype=np.float64)
    f = np.asarray(fitness, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise InvalidInputError("prob must be a non-empty 1-d sequence")
    if f.shape != p.shape:
        raise InvalidInputError("fitness and prob must have the same length")
    if np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise InvalidInputError("probabilities must be finite and non-negative")
    if abs(float(p.sum()) - 1.0) > 1e-12:
        raise InvalidInputError("probabilities must sum to 1 within 1e-12")
    if not np.all(np.isfinite(f)):
        raise InvalidInputError("fitness values must be finite")

    values, idx = np.unique(f, return_inverse=True)
    mass = np.bincount(idx, weights=p, minlength=values.size)
    q_plus = np.cumsum(mass)
    q_minus = q_plus - mass
    w_of_value = np.empty(values.size)
    for k in range(values.size):
        if mass[k] == 0.0:
            w_of_value[k] = scheme.weight(q_plus[k])
        else:
            w_of_value[k] = scheme.integral(q_minus[k], q_plus[k]) / mass[k]
    return w_of_value[idx]
