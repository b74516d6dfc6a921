"""Statistical and numerical verification utilities.

Everything here cross-checks the core machinery from an independent angle:
empirical quantiles against exact ones, Monte Carlo preference means against
exact sums, the quadratic KL expansion against closed-form divergences, and
finite-population improvement frequencies against the infinite-population
guarantee. Monte Carlo assertions elsewhere in the suite run on fixed seed
sets so CI stays deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .models import Bernoulli
from .oracle import (
    MAX_ENUM_DIM,
    bernoulli_support,
    enumerate_bernoulli,
    exact_J,
    exact_quantile,
)
from .selection import preference_exact

__all__ = [
    "PreferenceEstimate",
    "BoundReport",
    "ImprovementStats",
    "empirical_quantile",
    "estimate_J",
    "estimate_preference_mean",
    "progress_bound",
    "finite_population_improvement",
    "check_kl_expansion",
]


def empirical_quantile(values, q: float) -> float:
    """Quantile of the uniform empirical distribution, sup form.

    Returns the largest value ``m`` in the sample with at least a ``q``
    fraction at or below ``m`` and at least a ``1 - q`` fraction at or above.
    """
    if not (0.0 < q < 1.0):
        raise InvalidInputError("q must satisfy 0 < q < 1")
    f = np.asarray(values, dtype=np.float64)
    if f.ndim != 1 or f.size < 1:
        raise InvalidInputError("values must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(f)):
        raise InvalidInputError("values must be finite")
    n = f.size
    vals, counts = np.unique(f, return_counts=True)
    lower = np.cumsum(counts) / n
    upper = np.cumsum(counts[::-1])[::-1] / n
    for k in range(vals.size - 1, -1, -1):
        if lower[k] >= q and upper[k] >= 1.0 - q:
            return float(vals[k])
    return float(vals[-1])  # unreachable for 0 < q < 1


@dataclass(frozen=True)
class PreferenceEstimate:
    """Monte Carlo mean of the base-state preference with its standard error."""

    value: float
    stderr: float
    n: int


def _batch_fn(f):
    return f.batch if hasattr(f, "batch") else f


def estimate_J(model, eta_eval, eta_base, f, scheme, rng, n: int) -> PreferenceEstimate:
    """Monte Carlo estimate of the expected base-preference under ``eta_eval``.

    On enumerable Bernoulli models the preference of each draw is exact
    (computed once per support point); otherwise the quantile structure of the
    base state is estimated from an equally large holdout sample, which makes
    the result statistical on both sides. Draws are taken from ``eta_eval``
    and the standard error of their preference mean is reported.
    """
    if n < 100:
        raise InvalidInputError("n must be >= 100")
    batch = _batch_fn(f)
    eta_eval = np.asarray(eta_eval, dtype=np.float64)
    eta_base = np.asarray(eta_base, dtype=np.float64)

    if isinstance(model, Bernoulli) and model.dim <= MAX_ENUM_DIM:
        dist = enumerate_bernoulli(model.from_eta(eta_base))
        w_table = preference_exact(dist.prob, batch(dist.support), scheme)
        draws = model.sample(model.from_eta(eta_eval), rng, n)
        codes = 2.0 ** np.arange(model.dim - 1, -1, -1)
        w_draws = w_table[(draws @ codes).astype(np.int64)]
    else:
        holdout = model.sample(model.from_eta(eta_base), rng, n)
        base_f = np.sort(batch(holdout))
        draws = model.sample(model.from_eta(eta_eval), rng, n)
        f_draws = batch(draws)
        u_minus = np.searchsorted(base_f, f_draws, side="left") / n
        u_plus = np.searchsorted(base_f, f_draws, side="right") / n
        w_draws = np.empty(n)
        for i in range(n):
            if u_minus[i] == u_plus[i]:
                w_draws[i] = scheme.weight(u_plus[i])
            else:
                w_draws[i] = scheme.integral(u_minus[i], u_plus[i]) / (
                    u_plus[i] - u_minus[i]
                )
    value = float(np.mean(w_draws))
    stderr = float(np.std(w_draws, ddof=1) / np.sqrt(n))
    return PreferenceEstimate(value=value, stderr=stderr, n=n)


def estimate_preference_mean(model, eta_eval, eta_base, objective, scheme, rng, n: int = 2000) -> float:
    """Trace helper: exact expected preference when enumerable, else Monte Carlo."""
    if isinstance(model, Bernoulli) and model.dim <= MAX_ENUM_DIM:
        support = bernoulli_support(model.dim)
        return exact_J(eta_eval, eta_base, objective.batch(support), scheme)
    return estimate_J(model, eta_eval, eta_base, objective, scheme, rng, n).value


@dataclass(frozen=True)
class BoundReport:
    """Exact expected preference of a step against its divergence bound.

    ``satisfied`` records the strict comparison ``j_value > bound`` with
    ``bound = exp(((1 - dt) / dt) * kl_value)``; at ``dt = 1`` the bound
    degenerates to 1. A step that did not move (``fixed_point``) sits exactly
    at ``j = bound = 1`` and cannot satisfy the strict form.
    """

    j_value: float
    kl_value: float
    bound: float
    satisfied: bool
    fixed_point: bool


def progress_bound(eta_t, eta_next, fitness, scheme, dt: float) -> BoundReport:
    """Exact progress report for one Bernoulli step (enumerable dimensions)."""
    eta_t = np.asarray(eta_t, dtype=np.float64)
    eta_next = np.asarray(eta_next, dtype=np.float64)
    model = Bernoulli(eta_t.size)
    j_value = exact_J(eta_next, eta_t, fitness, scheme)
    kl_value = model.kl_divergence(model.from_eta(eta_t), model.from_eta(eta_next))
    if dt == 1.0:
        bound = 1.0
    else:
        bound = float(np.exp(((1.0 - dt) / dt) * kl_value))
    fixed_point = bool(np.max(np.abs(eta_next - eta_t)) <= 1e-12)
    return BoundReport(
        j_value=j_value,
        kl_value=kl_value,
        bound=bound,
        satisfied=bool(j_value > bound),
        fixed_point=fixed_point,
    )


@dataclass(frozen=True)
class ImprovementStats:
    """Counts of quantile movement across executed finite-population steps.

    ``steps_improved`` counts strict quantile decreases, ``steps_equal`` exact
    stalls and ``steps_worsened`` increases; the three partition
    ``steps_total``. ``improvement_rate`` is the frequency of the weak
    improvement event (the quantile did not worsen): on integer-valued
    objectives the quantile moves by whole levels and stalls on plateaus, so
    strict decreases alone are rare even when every step improves weakly.
    """

    steps_total: int
    steps_improved: int
    steps_equal: int
    steps_worsened: int

    @property
    def improvement_rate(self) -> float:
        if not self.steps_total:
            return 0.0
        return (self.steps_improved + self.steps_equal) / self.steps_total


def finite_population_improvement(config, n_steps: int, n_seeds: int,
                                  holdout: int = 100_000, tol: float = 1e-12) -> ImprovementStats:
    """Frequency of exact-quantile improvement along finite-population runs.

    For Bernoulli configurations the quantile before and after each executed
    step is exact (full enumeration); Gaussian configurations use a frozen
    holdout sample of at least ``holdout`` draws as a quantile surrogate and
    are statistical by nature. Seeds derive from ``config.seed`` and the seed
    index, so the counts are reproducible.
    """
    from .algorithms import _prepare_step  # local: avoids import cycle
    from .models import Gaussian

    config.validate()
    objective = config.make_objective()
    model = config.make_model()
    scheme = config.make_scheme() if config.algorithm != "rpp" else None
    q = float(config.q) if config.q is not None else 0.5
    gaussian = isinstance(model, Gaussian)
    if gaussian and holdout < 100_000:
        raise InvalidInputError("Gaussian surrogate quantiles need holdout >= 1e5")

    def exact_q(eta, rng_hold):
        if gaussian:
            pts = model.sample(model.from_eta(eta), rng_hold, holdout)
            return empirical_quantile(objective.batch(pts), q)
        dist = enumerate_bernoulli(model.from_eta(eta))
        return exact_quantile(dist, objective.batch(dist.support), q).value

    improved = equal = worsened = total = 0
    for seed_index in range(n_seeds):
        rng = np.random.default_rng([config.seed, seed_index, 0])
        rng_hold = np.random.default_rng([config.seed, seed_index, 1])
        eta = model.to_eta(config.initial_params())
        q_before = exact_q(eta, rng_hold)
        for _ in range(n_steps):
            try:
                result = _prepare_step(config, model, eta, scheme, objective, rng)(1.0)
            except Exception:
                break
            eta = result.eta
            q_after = exact_q(eta, rng_hold)
            total += 1
            if q_after < q_before - tol:
                improved += 1
            elif q_after > q_before + tol:
                worsened += 1
            else:
                equal += 1
            q_before = q_after
    return ImprovementStats(total, improved, equal, worsened)


def check_kl_expansion(model, eta, delta, halvings: int) -> np.ndarray:
    """Quadratic-expansion errors of the KL divergence under halved steps.

    Returns ``err_k = |KL(eta || eta + delta/2^k) - 0.5 d_k^T F(eta) d_k|``
    for ``k = 0 .. halvings`` with ``d_k = delta / 2^k``; the remainder is
    cubic or better, so each halving should shrink the error by at least 4x.
    Raises a domain exit if ``eta + delta`` is not a valid state.
    """
    if halvings < 0:
        raise InvalidInputError("halvings must be >= 0")
    eta = np.asarray(eta, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != eta.shape:
        raise InvalidInputError("delta must match eta's shape")
    base = model.from_eta(eta)
    model.from_eta(eta + delta)
    fim = model.fisher_information(eta)
    errs = np.empty(halvings + 1)
    for k in range(halvings + 1):
        d = delta / (2.0**k)
        kl = model.kl_divergence(base, model.from_eta(eta + d))
        errs[k] = abs(kl - 0.5 * float(d @ fim @ d))
    return errs
