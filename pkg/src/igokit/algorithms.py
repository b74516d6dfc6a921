"""Named algorithm front-ends and the seeded iteration loop.

The recovered algorithms are thin delegations to the update rules:

* ``pbil`` - rank-weighted natural-gradient step on a product Bernoulli
  model (exactly :func:`igokit.updates.igo_step`).
* ``cma_rank_mu`` - the pure rank-mu mean/covariance recombination, i.e. the
  blockwise weighted-ML step with the (cov, mean) decomposition and separate
  learning rates. No evolution paths, no step-size control, no rank-one term.
* ``ce_ml`` - the smoothed cross-entropy/ML step.
* ``rpp`` - reward-proportional update; ``dt = 1`` is the classic form
  ``theta <- E[x r(x)] / E[r(x)]``, smaller ``dt`` the smoothed variant.
* ``igo_generic`` - the natural-gradient step on whichever model the
  objective lives on.

Runs are deterministic given the seed: the sampling stream is derived as
``default_rng([seed, 0])`` and an auxiliary stream (preference estimation)
as ``default_rng([seed, 1])``, so optional diagnostics never perturb the
trajectory. Stop conditions (step budget, target fitness, domain-exit policy)
are harness plumbing; none of the recovered algorithms defines its own.
When the safeguard policy halves a step size, the already-drawn sample is
reused: only the move shrinks, never the population.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from . import updates
from .diagnostics import empirical_quantile, estimate_preference_mean
from .errors import DomainExitError, InvalidInputError
from .models import Bernoulli, BernoulliParams, Gaussian, GaussianParams
from .objectives import OBJECTIVE_NAMES, Objective, make_objective
from .oracle import MAX_ENUM_DIM, enumerate_bernoulli, exact_quantile
from .selection import SampleWeights, TabulatedScheme, TruncationScheme, sample_weights

__all__ = [
    "ALGORITHMS",
    "AlgorithmConfig",
    "StepResult",
    "Trace",
    "TraceStep",
    "pbil_step",
    "cma_rank_mu_step",
    "ce_ml_step",
    "igo_generic_step",
    "rpp_step",
    "run",
]

ALGORITHMS = ("pbil", "cma_rank_mu", "ce_ml", "rpp", "igo_generic")
_DOMAIN_EXIT_POLICIES = ("halt", "safeguard")
_MAX_HALVINGS = 30


@dataclass(frozen=True)
class AlgorithmConfig:
    """Everything a seeded run needs; validated before any work starts."""

    algorithm: str = "pbil"
    objective: str = "onemax"
    dim: int = 16
    lam: int = 100
    q: Optional[float] = 0.25
    weights_table: Optional[tuple] = None
    dt: float = 0.5
    dt_mean: Optional[float] = None
    dt_cov: Optional[float] = None
    max_steps: int = 100
    seed: int = 1
    objective_seed: int = 1
    target_fitness: Optional[float] = None
    domain_exit: str = "halt"
    uncertified: bool = False
    rpp_exact: bool = True
    bernoulli_init: float = 0.5
    estimate_j: bool = False
    timing: bool = False

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise InvalidInputError(
                f"algorithm: unknown {self.algorithm!r}; known: {', '.join(ALGORITHMS)}"
            )
        if self.objective not in OBJECTIVE_NAMES:
            raise InvalidInputError(
                f"objective: unknown {self.objective!r}; known: {', '.join(OBJECTIVE_NAMES)}"
            )
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidInputError(f"dim: must be a positive integer, got {self.dim!r}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 0:
            raise InvalidInputError(
                f"steps: must be a non-negative integer, got {self.max_steps!r}"
            )
        if self.domain_exit not in _DOMAIN_EXIT_POLICIES:
            raise InvalidInputError(
                f"domain-exit: must be one of {_DOMAIN_EXIT_POLICIES}, got {self.domain_exit!r}"
            )
        rank_based = self.algorithm != "rpp"
        if rank_based:
            if int(self.lam) != self.lam or self.lam < 2:
                raise InvalidInputError(
                    f"lambda: rank-based schemes need an integer >= 2, got {self.lam!r}"
                )
            if self.weights_table is None and (
                self.q is None or not (0.0 < float(self.q) < 1.0)
            ):
                raise InvalidInputError(f"q: must satisfy 0 < q < 1, got {self.q!r}")
        elif not self.rpp_exact and (int(self.lam) != self.lam or self.lam < 1):
            raise InvalidInputError(
                f"lambda: sampled reward updates need an integer >= 1, got {self.lam!r}"
            )
        per_block = ()
        if self.algorithm == "cma_rank_mu":
            per_block = (self.resolved_dt_cov(), self.resolved_dt_mean())
        updates.StepConfig(
            dt=self.dt, dt_per_block=per_block, uncertified=self.uncertified
        ).validate()
        if not (0.0 < self.bernoulli_init < 1.0):
            raise InvalidInputError(
                f"bernoulli-init: must lie in (0, 1), got {self.bernoulli_init!r}"
            )
        obj = self.make_objective()
        if self.algorithm == "rpp":
            if obj.direction != "max":
                raise InvalidInputError(
                    "objective: the reward-proportional path needs a reward "
                    f"(direction 'max') objective, got {self.objective!r}"
                )
            if self.rpp_exact and self.dim > MAX_ENUM_DIM:
                raise InvalidInputError(
                    f"dim: exact reward enumeration supports dim <= {MAX_ENUM_DIM}"
                )
        elif obj.direction != "min":
            raise InvalidInputError(
                f"objective: {self.objective!r} is a reward; use the rpp algorithm"
            )
        if self.algorithm == "cma_rank_mu" and obj.space != "continuous":
            raise InvalidInputError("objective: cma_rank_mu runs on continuous objectives")

    def resolved_dt_mean(self) -> float:
        return self.dt if self.dt_mean is None else self.dt_mean

    def resolved_dt_cov(self) -> float:
        return self.dt if self.dt_cov is None else self.dt_cov

    def make_objective(self) -> Objective:
        return make_objective(self.objective, self.dim, seed=self.objective_seed)

    def make_scheme(self):
        if self.weights_table is not None:
            return TabulatedScheme(tuple(self.weights_table))
        return TruncationScheme(float(self.q))

    def make_model(self):
        obj = self.make_objective()
        return Gaussian(self.dim) if obj.space == "continuous" else Bernoulli(self.dim)

    def initial_params(self):
        model = self.make_model()
        if isinstance(model, Gaussian):
            return GaussianParams(np.zeros(self.dim), np.eye(self.dim))
        return BernoulliParams(np.full(self.dim, self.bernoulli_init))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


@dataclass(frozen=True)
class StepResult:
    """One executed step: the new state plus what produced it.

    Exact reward updates carry no sample; ``fitness`` then holds the reward of
    every support point and ``weights`` is empty.
    """

    eta: np.ndarray
    samples: Optional[np.ndarray]
    fitness: np.ndarray
    weights: Optional[SampleWeights]
    dt_used: tuple


def pbil_step(model, eta, rng, objective, lam, scheme, dt) -> StepResult:
    """Sample, rank, weight, move: delegates the move to ``igo_step``."""
    samples = model.sample(model.from_eta(eta), rng, lam)
    fitness = objective.batch(samples)
    weights = sample_weights(fitness, scheme)
    eta_next = updates.igo_step(model, eta, samples, weights, dt)
    return StepResult(eta_next, samples, fitness, weights, (dt,))


igo_generic_step = pbil_step


def ce_ml_step(model, eta, rng, objective, lam, scheme, dt) -> StepResult:
    """Smoothed cross-entropy/ML iteration."""
    samples = model.sample(model.from_eta(eta), rng, lam)
    fitness = objective.batch(samples)
    weights = sample_weights(fitness, scheme)
    eta_next = updates.smoothed_ce_step(model, eta, samples, weights, dt)
    return StepResult(eta_next, samples, fitness, weights, (dt,))


def cma_rank_mu_step(model, eta, rng, objective, lam, scheme, dt_cov, dt_mean) -> StepResult:
    """Pure rank-mu recombination: blockwise weighted ML, covariance first."""
    samples = model.sample(model.from_eta(eta), rng, lam)
    fitness = objective.batch(samples)
    weights = sample_weights(fitness, scheme)
    eta_next = updates.blockwise_igo_ml_step(
        model, eta, samples, weights,
        updates.GaussianBlockDecomposition(), (dt_cov, dt_mean),
    )
    return StepResult(eta_next, samples, fitness, weights, (dt_cov, dt_mean))


def rpp_step(model, eta, objective, dt, rng=None, lam=None, exact=True) -> StepResult:
    """Reward-proportional update, exact (enumeration) or Monte Carlo."""
    if exact:
        dist = enumerate_bernoulli(model.from_eta(eta))
        rewards = objective.batch(dist.support)
        eta_next = updates.fitness_proportional_step(model, eta, dist, rewards, dt)
        return StepResult(eta_next, None, rewards, None, (dt,))
    samples = model.sample(model.from_eta(eta), rng, lam)
    rewards = objective.batch(samples)
    eta_next = updates.fitness_proportional_step(model, eta, samples, rewards, dt)
    return StepResult(eta_next, samples, rewards, None, (dt,))


@dataclass(frozen=True)
class TraceStep:
    """Per-iteration log entry."""

    step: int
    eta: np.ndarray
    best_f: float
    emp_quantile: float
    weight_entropy: float
    kl_prev: float
    elapsed_ns: int
    j_estimate: Optional[float] = None


@dataclass
class Trace:
    """A full run: per-step entries plus the outcome."""

    config: AlgorithmConfig
    steps: list = field(default_factory=list)
    stop_reason: str = "max_steps"
    final_eta: Optional[np.ndarray] = None
    halvings: int = 0

    @property
    def best_fitness(self) -> Optional[float]:
        if not self.steps:
            return None
        values = [s.best_f for s in self.steps]
        direction = self.config.make_objective().direction
        return max(values) if direction == "max" else min(values)


def _prepare_step(config, model, eta, scheme, objective, rng) -> Callable[[float], StepResult]:
    """Draw the step's population once; return an applier over a dt scale."""
    algo = config.algorithm
    if algo == "rpp":
        if config.rpp_exact:
            dist = enumerate_bernoulli(model.from_eta(eta))
            rewards = objective.batch(dist.support)

            def apply(scale: float) -> StepResult:
                dt = config.dt * scale
                eta_next = updates.fitness_proportional_step(model, eta, dist, rewards, dt)
                return StepResult(eta_next, None, rewards, None, (dt,))

        else:
            samples = model.sample(model.from_eta(eta), rng, config.lam)
            rewards = objective.batch(samples)

            def apply(scale: float) -> StepResult:
                dt = config.dt * scale
                eta_next = updates.fitness_proportional_step(model, eta, samples, rewards, dt)
                return StepResult(eta_next, samples, rewards, None, (dt,))

        return apply

    samples = model.sample(model.from_eta(eta), rng, config.lam)
    fitness = objective.batch(samples)
    weights = sample_weights(fitness, scheme)

    if algo in ("pbil", "igo_generic"):

        def apply(scale: float) -> StepResult:
            dt = config.dt * scale
            eta_next = updates.igo_step(model, eta, samples, weights, dt)
            return StepResult(eta_next, samples, fitness, weights, (dt,))

    elif algo == "ce_ml":

        def apply(scale: float) -> StepResult:
            dt = config.dt * scale
            eta_next = updates.smoothed_ce_step(model, eta, samples, weights, dt)
            return StepResult(eta_next, samples, fitness, weights, (dt,))

    elif algo == "cma_rank_mu":
        decomposition = updates.GaussianBlockDecomposition()

        def apply(scale: float) -> StepResult:
            dt_cov = config.resolved_dt_cov() * scale
            dt_mean = config.resolved_dt_mean() * scale
            eta_next = updates.blockwise_igo_ml_step(
                model, eta, samples, weights, decomposition, (dt_cov, dt_mean)
            )
            return StepResult(eta_next, samples, fitness, weights, (dt_cov, dt_mean))

    else:
        raise InvalidInputError(f"unknown algorithm {algo!r}")
    return apply


def _reward_trace_fields(model, eta, rewards_on_support, q):
    """Exact-reward runs carry no sample: log exact summaries instead."""
    dist = enumerate_bernoulli(model.from_eta(eta))
    expected = float(dist.prob @ rewards_on_support)
    report = exact_quantile(dist, rewards_on_support, q)
    return expected, report.value


def run(config: AlgorithmConfig, objective: Optional[Objective] = None) -> Trace:
    """Execute one seeded run and return its trace.

    Deterministic: the same config yields a bit-identical trace. ``objective``
    overrides the registry lookup (it must match the configured dimension);
    the config echo keeps the registry name either way.
    """
    config.validate()
    if objective is None:
        objective = config.make_objective()
    elif objective.dim != config.dim:
        raise InvalidInputError("objective override dimension mismatch")
    model = config.make_model()
    scheme = config.make_scheme() if config.algorithm != "rpp" else None
    eta = model.to_eta(config.initial_params())
    rng = np.random.default_rng([config.seed, 0])
    rng_aux = np.random.default_rng([config.seed, 1])
    q_for_trace = float(config.q) if config.q is not None else 0.5

    trace = Trace(config=config)
    t0 = time.monotonic_ns()
    for step_index in range(config.max_steps):
        prev_eta = eta
        try:
            applier = _prepare_step(config, model, prev_eta, scheme, objective, rng)
            if config.domain_exit == "safeguard":
                result = _safeguarded_apply(applier, trace)
            else:
                result = applier(1.0)
        except DomainExitError:
            trace.stop_reason = "domain_exit"
            break
        eta = result.eta

        if config.algorithm == "rpp":
            coef = result.fitness / float(np.sum(result.fitness))
            entropy = float(-np.sum(coef[coef > 0.0] * np.log(coef[coef > 0.0])))
            if result.samples is None:
                best_f, emp_q = _reward_trace_fields(model, eta, result.fitness, q_for_trace)
            else:
                best_f = float(np.max(result.fitness))
                emp_q = empirical_quantile(result.fitness, q_for_trace)
        else:
            best_f = float(np.min(result.fitness))
            emp_q = empirical_quantile(result.fitness, q_for_trace)
            entropy = result.weights.entropy()
        kl_prev = model.kl_divergence(model.from_eta(prev_eta), model.from_eta(eta))
        j_est = None
        if config.estimate_j and scheme is not None:
            j_est = estimate_preference_mean(model, eta, prev_eta, objective, scheme, rng_aux)
        trace.steps.append(
            TraceStep(
                step=step_index,
                eta=eta.copy(),
                best_f=best_f,
                emp_quantile=float(emp_q),
                weight_entropy=entropy,
                kl_prev=kl_prev,
                elapsed_ns=time.monotonic_ns() - t0,
                j_estimate=j_est,
            )
        )
        if config.target_fitness is not None:
            reached = (
                best_f >= config.target_fitness
                if objective.direction == "max"
                else best_f <= config.target_fitness
            )
            if reached:
                trace.stop_reason = "target"
                break
    trace.final_eta = eta.copy()
    return trace


def _safeguarded_apply(applier, trace) -> StepResult:
    scale = 1.0
    for halvings in range(_MAX_HALVINGS + 1):
        try:
            result = applier(scale)
            trace.halvings += halvings
            return result
        except DomainExitError:
            scale /= 2.0
    trace.halvings += _MAX_HALVINGS
    raise DomainExitError(f"step still exits the domain after {_MAX_HALVINGS} halvings")
