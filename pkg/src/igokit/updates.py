"""Parameter-update rules in expectation parameters.

All rules move a flat expectation-parameter vector ``eta``:

* :func:`igo_step` - finite-sample natural-gradient step,
  ``eta + dt * sum_i w_i (T(x_i) - eta)``.
* :func:`igo_ml_step` - weighted maximum-likelihood blend,
  ``(1 - dt) eta + dt * sum_i w_i T(x_i)``.
* :func:`smoothed_ce_step` - smoothed cross-entropy/ML step: the weighted-ML
  maximizer is computed first (and must be a valid distribution), then blended.
* :func:`blockwise_igo_ml_step` - sequential per-block weighted-ML updates
  with per-block step sizes, reusing one sample across all blocks.
* :func:`fitness_proportional_step` - natural-gradient step under
  reward-proportional weights, exact (finite distribution) or Monte Carlo.
* :func:`malago_step` - expectation-parameter natural-gradient descent on raw
  fitness (minimization).

For exponential families in expectation parameters the first three coincide
coordinate-wise; they are kept as distinct entry points because their error
behaviour differs (see each docstring). Domain exits raise; they are never
projected away. :func:`safeguarded_step` wraps any of these with step-size
halving for harness use.

Weighted sums reduce in fixed index order (numpy pairwise summation over
axis 0), so results are bit-reproducible for a given sample size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainExitError, InvalidInputError
from .oracle import FiniteDist
from .selection import SampleWeights

__all__ = [
    "StepConfig",
    "GaussianBlockDecomposition",
    "BernoulliBlockDecomposition",
    "igo_step",
    "igo_ml_step",
    "smoothed_ce_step",
    "blockwise_igo_ml_step",
    "fitness_proportional_step",
    "malago_step",
    "safeguarded_step",
]


@dataclass(frozen=True)
class StepConfig:
    """Step sizes with their certification status.

    Step sizes in ``(0, 1]`` carry the quantile-improvement guarantee; larger
    values are accepted only with ``uncertified=True``.
    """

    dt: float = 1.0
    dt_per_block: tuple = ()
    uncertified: bool = False

    def validate(self) -> None:
        all_dts = (self.dt,) + tuple(self.dt_per_block)
        for value in all_dts:
            if not np.isfinite(value) or value < 0.0:
                raise InvalidInputError(
                    f"step sizes must be non-negative, got {value!r}"
                )
            if value > 1.0 and not self.uncertified:
                raise InvalidInputError(
                    f"step size {value} exceeds 1: quantile improvement is only "
                    "guaranteed for 0 < dt <= 1; set uncertified to run anyway"
                )


@dataclass(frozen=True)
class GaussianBlockDecomposition:
    """Two-block Gaussian decomposition: covariance and mean.

    The default order ``("cov", "mean")`` updates the covariance about the
    current mean first and recovers the rank-mu mean/covariance recombination
    with separate learning rates. The reverse order ``("mean", "cov")`` is the
    EMNA-like variant: it recentres the scatter on the already-moved mean,
    which is known to shrink the covariance faster and can converge
    prematurely; it is provided for study, not as a default.
    """

    order: tuple = ("cov", "mean")

    def __post_init__(self):
        if sorted(self.order) != ["cov", "mean"]:
            raise InvalidInputError(
                'order must be a permutation of ("cov", "mean")'
            )


@dataclass(frozen=True)
class BernoulliBlockDecomposition:
    """Coordinate-wise Bernoulli decomposition: one block per coordinate."""

    dim: int
    order: tuple = ()

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError("dim must be >= 1")
        order = tuple(self.order) if self.order else tuple(range(self.dim))
        if sorted(order) != list(range(self.dim)):
            raise InvalidInputError("order must be a permutation of the coordinates")
        object.__setattr__(self, "order", order)


def _weight_array(weights, lam: int) -> np.ndarray:
    if isinstance(weights, SampleWeights):
        w = weights.w
    else:
        w = SampleWeights(np.asarray(weights, dtype=np.float64)).w
    if w.size != lam:
        raise InvalidInputError("weights length must match the sample count")
    return w


def _check_dt(dt: float) -> float:
    dt = float(dt)
    if not np.isfinite(dt) or dt < 0.0:
        raise InvalidInputError(f"dt must be finite and >= 0, got {dt!r}")
    return dt


def igo_step(model, eta, samples, weights, dt: float) -> np.ndarray:
    """Finite-sample natural-gradient step in expectation parameters.

    ``eta' = eta + dt * sum_i w_i (T(x_i) - eta)``. Raises
    ``DomainExitError`` when the result leaves the valid region.
    """
    dt = _check_dt(dt)
    eta = np.asarray(eta, dtype=np.float64)
    stats = model.batch_sufficient_statistics(samples)
    w = _weight_array(weights, stats.shape[0])
    eta_next = eta + dt * np.sum(w[:, None] * (stats - eta), axis=0)
    model.from_eta(eta_next)
    return eta_next


def igo_ml_step(model, eta, samples, weights, dt: float) -> np.ndarray:
    """Weighted maximum-likelihood blend of the current state and the sample.

    ``eta' = (1 - dt) eta + dt * sum_i w_i T(x_i)``; this is the maximizer of
    the dt-blend of the cross-entropy with the current distribution and the
    weighted sample log-likelihood. Only the blended point must be a valid
    distribution; a degenerate blend raises a domain exit.
    """
    dt = _check_dt(dt)
    eta = np.asarray(eta, dtype=np.float64)
    stats = model.batch_sufficient_statistics(samples)
    w = _weight_array(weights, stats.shape[0])
    eta_next = (1.0 - dt) * eta + dt * np.sum(w[:, None] * stats, axis=0)
    model.from_eta(eta_next)
    return eta_next


def smoothed_ce_step(model, eta, samples, weights, dt: float) -> np.ndarray:
    """Smoothed cross-entropy/ML step: blend toward the weighted-ML point.

    The weighted-ML statistic (the weighted mean of the sufficient statistics)
    is computed first, then mixed into the current state with weight ``dt``.
    Only the blended state must be a valid distribution; a weighted-ML point
    on the closure boundary (all winners sharing a Bernoulli coordinate) still
    blends for ``dt < 1``, while at ``dt = 1`` the blend *is* the ML point and
    a degenerate one (e.g. a single Gaussian sample) raises. Coincides with
    :func:`igo_ml_step` in expectation parameters.
    """
    dt = _check_dt(dt)
    eta = np.asarray(eta, dtype=np.float64)
    stats = model.batch_sufficient_statistics(samples)
    w = _weight_array(weights, stats.shape[0])
    target = np.sum(w[:, None] * stats, axis=0)
    eta_next = (1.0 - dt) * eta + dt * target
    model.from_eta(eta_next)
    return eta_next


def blockwise_igo_ml_step(model, eta, samples, weights, decomposition, dt_per_block) -> np.ndarray:
    """Sequential per-block weighted-ML updates sharing one sample.

    Blocks are updated in the declared order, each solving the restricted
    weighted-ML problem with the other blocks frozen at their current values
    and its own step size. For the Gaussian cov/mean decomposition the closed
    forms are

    ``C* = C + dt_C * sum_i w_i ((x_i - m)(x_i - m)^T - C)`` (about the
    current mean), then ``m* = m + dt_m * sum_i w_i (x_i - m)``.

    With all block step sizes equal this is *not* the same map as
    :func:`igo_ml_step`. Any invalid intermediate block output raises a domain
    exit.
    """
    eta = np.asarray(eta, dtype=np.float64)
    dts = tuple(_check_dt(v) for v in dt_per_block)
    stats_rows = model.batch_sufficient_statistics(samples)
    w = _weight_array(weights, stats_rows.shape[0])
    samples = np.asarray(samples, dtype=np.float64)

    if isinstance(decomposition, GaussianBlockDecomposition):
        if len(dts) != 2:
            raise InvalidInputError("Gaussian decomposition takes two step sizes")
        params = model.from_eta(eta)
        m = params.mean.copy()
        cov = params.cov.copy()
        from .models import GaussianParams

        for name, dt_b in zip(decomposition.order, dts):
            if name == "cov":
                centered = samples - m
                scatter = np.einsum("i,ij,ik->jk", w, centered, centered)
                scatter = (scatter + scatter.T) / 2.0
                cov = cov + dt_b * (scatter - cov)
                params = GaussianParams(m, cov)
            else:
                m = m + dt_b * np.sum(w[:, None] * (samples - m), axis=0)
                params = GaussianParams(m, cov)
        return model.to_eta(params)

    if isinstance(decomposition, BernoulliBlockDecomposition):
        if decomposition.dim != model.dim:
            raise InvalidInputError("decomposition dimension mismatch")
        if len(dts) != decomposition.dim:
            raise InvalidInputError("one step size per coordinate block required")
        model.from_eta(eta)
        weighted_mean = np.sum(w[:, None] * samples, axis=0)
        theta = eta.copy()
        for j, dt_b in zip(decomposition.order, dts):
            theta[j] = (1.0 - dt_b) * theta[j] + dt_b * weighted_mean[j]
            model.from_eta(theta)
        return theta

    raise InvalidInputError(f"unsupported decomposition {decomposition!r}")


def fitness_proportional_step(model, eta, source, rewards, dt: float) -> np.ndarray:
    """Natural-gradient step under reward-proportional selection.

    ``eta' = eta + dt * E[(r(x) / E[r]) (T(x) - eta)]``. ``source`` is either
    a :class:`~igokit.oracle.FiniteDist` (expectation taken exactly over its
    support) or an ``(n, d)`` sample array (Monte Carlo, uniform 1/n sample
    weights). ``rewards`` holds the per-point rewards, all non-negative with
    at least one positive.
    """
    dt = _check_dt(dt)
    eta = np.asarray(eta, dtype=np.float64)
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or np.any(r < 0.0) or not np.all(np.isfinite(r)):
        raise InvalidInputError("rewards must be finite and non-negative")
    if not np.any(r > 0.0):
        raise InvalidInputError("rewards must not be all zero")

    if isinstance(source, FiniteDist):
        if r.size != source.size:
            raise InvalidInputError("one reward per support point required")
        stats = model.batch_sufficient_statistics(source.support)
        mean_r = float(source.prob @ r)
        coef = source.prob * r / mean_r
    else:
        stats = model.batch_sufficient_statistics(source)
        if r.size != stats.shape[0]:
            raise InvalidInputError("one reward per sample required")
        coef = r / float(r.sum())

    eta_next = eta + dt * np.sum(coef[:, None] * (stats - eta), axis=0)
    model.from_eta(eta_next)
    return eta_next


def malago_step(model, eta, samples, fitness, dt: float, normalized: bool = True) -> np.ndarray:
    """Expectation-parameter natural-gradient descent on raw fitness values.

    ``eta' = eta - dt * (1/n) sum_i f(x_i) (T(x_i) - eta)`` for minimization.
    ``normalized=False`` drops the 1/n factor (the verbatim summed form, whose
    magnitude grows with the sample size); the normalized default is the
    consistent estimator of the infinite-population drift.
    """
    dt = _check_dt(dt)
    eta = np.asarray(eta, dtype=np.float64)
    f = np.asarray(fitness, dtype=np.float64)
    stats = model.batch_sufficient_statistics(samples)
    if f.shape != (stats.shape[0],):
        raise InvalidInputError("one fitness value per sample required")
    if not np.all(np.isfinite(f)):
        raise InvalidInputError("fitness values must be finite")
    scale = 1.0 / stats.shape[0] if normalized else 1.0
    eta_next = eta - dt * scale * np.sum(f[:, None] * (stats - eta), axis=0)
    model.from_eta(eta_next)
    return eta_next


def safeguarded_step(step, dt: float, max_halvings: int = 30):
    """Run ``step(dt)`` shrinking ``dt`` by halving on domain exits.

    Returns ``(result, dt_used)``; raises the final ``DomainExitError`` once
    ``max_halvings`` halvings are exhausted. Intended for harness runs; the
    raw update functions never shrink steps on their own.
    """
    dt = _check_dt(dt)
    attempt = dt
    for _ in range(max_halvings + 1):
        try:
            return step(attempt), attempt
        except DomainExitError:
            attempt /= 2.0
    raise DomainExitError(
        f"step still exits the domain after {max_halvings} halvings "
        f"(dt {dt} -> {attempt * 2.0})"
    )
