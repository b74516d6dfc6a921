"""Exponential-family search distributions in expectation parameters.

Two families are provided: the product Bernoulli distribution on ``{0,1}^d``
(densities w.r.t. the counting measure) and the full multivariate Gaussian on
``R^d`` (Lebesgue measure). Everything downstream works with the *expectation
parameters* ``eta = E[T(x)]`` of the family, stored as one flat float vector:

* Bernoulli: ``eta[i] = P[x_i = 1]``, ``d`` entries, ``T(x) = x``.
* Gaussian: ``d`` mean entries followed by the second-moment matrix
  ``E[x x^T]`` packed in row-major upper-triangular order
  (``d*(d+1)/2`` entries), so ``T(x) = (x, pack(x x^T))``.

One canonical packed layout stores each symmetric entry exactly once, which
keeps inner products over the flat vector free of double counting.

The parameter domain is the *open* interior: Bernoulli probabilities strictly
inside ``(0, 1)``, covariances strictly positive definite. Boundary values are
rejected, never clipped: log-densities and Fisher information blow up there,
and silent clamping would mask violations of the monotone-improvement
guarantees exercised by the test suite.

Concurrency: models and parameter objects are immutable value objects and safe
to share read-only across threads. Sampling mutates the caller-supplied numpy
``Generator``; for parallel sampling derive one independent stream per worker
from a master seed, e.g. ``np.random.default_rng([master_seed, worker_index])``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDistributionError,
    DomainExitError,
    IllConditionedError,
    InvalidInputError,
)

__all__ = [
    "BernoulliParams",
    "GaussianParams",
    "Bernoulli",
    "Gaussian",
]


def _frozen_array(value, dtype=np.float64) -> np.ndarray:
    out = np.array(value, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class BernoulliParams:
    """Success probabilities of a product Bernoulli distribution.

    Invariants: ``0 < probs[i] < 1`` for every coordinate and ``d >= 1``.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen_array(self.probs)
        if probs.ndim != 1 or probs.size < 1:
            raise InvalidInputError("probs must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(probs)):
            raise InvalidInputError("probs must be finite")
        if np.any(probs <= 0.0) or np.any(probs >= 1.0):
            raise InvalidInputError(
                "probs must lie strictly inside (0, 1); boundary values are rejected"
            )
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self) -> int:
        return self.probs.size


@dataclass(frozen=True, eq=False)
class GaussianParams:
    """Mean vector and covariance matrix of a multivariate Gaussian.

    The covariance must be exactly symmetric as stored and strictly positive
    definite; validity is checked through Cholesky factorization, and the
    factor is cached for sampling and density evaluation.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _frozen_array(self.mean)
        cov = _frozen_array(self.cov)
        if mean.ndim != 1 or mean.size < 1:
            raise InvalidInputError("mean must be a non-empty 1-d sequence")
        d = mean.size
        if cov.shape != (d, d):
            raise InvalidInputError(f"cov must have shape ({d}, {d}), got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidInputError("mean and cov must be finite")
        if not np.array_equal(cov, cov.T):
            raise InvalidInputError("cov must be exactly symmetric as stored")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise DegenerateDistributionError(
                "covariance is not positive definite"
            ) from None
        chol.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def chol(self) -> np.ndarray:
        """Lower-triangular Cholesky factor of ``cov``."""
        return self._chol


class Bernoulli:
    """Product Bernoulli family on ``{0,1}^d`` in expectation parameters.

    The success probabilities are simultaneously the expectation parameters,
    since the sufficient statistics are the coordinates themselves.
    """

    def __init__(self, dim: int):
        if int(dim) != dim or dim < 1:
            raise InvalidInputError("dim must be a positive integer")
        self.dim = int(dim)
        self.eta_dim = self.dim

    def __repr__(self):
        return f"Bernoulli(dim={self.dim})"

    # -- points and statistics ------------------------------------------

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise InvalidInputError(
                f"point must have shape ({self.dim},), got {x.shape}"
            )
        if not np.all((x == 0.0) | (x == 1.0)):
            raise InvalidInputError("Bernoulli points must be 0/1 valued")
        return x

    def _check_eta(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=np.float64)
        if eta.shape != (self.eta_dim,):
            raise InvalidInputError(
                f"eta must have shape ({self.eta_dim},), got {eta.shape}"
            )
        return eta

    def sufficient_statistics(self, x) -> np.ndarray:
        """T(x) = x, in the flat expectation-parameter layout."""
        return self._check_point(x).copy()

    def batch_sufficient_statistics(self, points) -> np.ndarray:
        """Stack of T(x) rows for an ``(n, d)`` array of points."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise InvalidInputError(
                f"points must have shape (n, {self.dim}), got {pts.shape}"
            )
        if not np.all((pts == 0.0) | (pts == 1.0)):
            raise InvalidInputError("Bernoulli points must be 0/1 valued")
        return pts.copy()

    # -- parameter conversions ------------------------------------------

    def to_eta(self, params: BernoulliParams) -> np.ndarray:
        """Expectation parameters; the identity map on the probabilities."""
        if params.dim != self.dim:
            raise InvalidInputError("parameter dimension mismatch")
        return params.probs.copy()

    def from_eta(self, eta) -> BernoulliParams:
        """Inverse conversion. Raises ``DomainExitError`` if any coordinate
        left the open interval (0, 1)."""
        eta = self._check_eta(eta)
        if not np.all(np.isfinite(eta)):
            raise DomainExitError("eta has non-finite coordinates")
        if np.any(eta <= 0.0) or np.any(eta >= 1.0):
            bad = int(np.argmax((eta <= 0.0) | (eta >= 1.0)))
            raise DomainExitError(
                f"coordinate {bad} = {eta[bad]!r} left the open interval (0, 1)"
            )
        return BernoulliParams(eta)

    # -- densities and sampling -----------------------------------------

    def log_density(self, params: BernoulliParams, x) -> float:
        """Log probability mass of ``x`` (counting measure)."""
        x = self._check_point(x)
        p = params.probs
        return float(np.sum(np.where(x == 1.0, np.log(p), np.log1p(-p))))

    def sample(self, params: BernoulliParams, rng: np.random.Generator, count: int) -> np.ndarray:
        """``count`` i.i.d. draws as an ``(count, d)`` 0/1 float array."""
        if count < 1:
            raise InvalidInputError("count must be >= 1")
        u = rng.random((count, self.dim))
        return (u < params.probs).astype(np.float64)

    def natural_grad_log_density(self, eta, x) -> np.ndarray:
        """Natural gradient of ``ln p_eta`` at ``x``: exactly ``T(x) - eta``."""
        eta = self._check_eta(eta)
        return self.sufficient_statistics(x) - eta

    # -- divergence and information --------------------------------------

    def kl_divergence(self, p: BernoulliParams, q: BernoulliParams) -> float:
        """KL(P_p || P_q); closed-form coordinate-wise sum, always >= 0.

        Rounding can push the sum a few ulp below zero for nearly identical
        parameters (where the true value is far under float resolution); the
        result is floored at exactly 0.
        """
        if p.dim != self.dim or q.dim != self.dim:
            raise InvalidInputError("parameter dimension mismatch")
        a, b = p.probs, q.probs
        terms = a * (np.log(a) - np.log(b)) + (1.0 - a) * (np.log1p(-a) - np.log1p(-b))
        return max(0.0, float(np.sum(terms)))

    def fisher_information(self, eta) -> np.ndarray:
        """Fisher information in expectation parameters: the diagonal matrix
        with entries ``1 / (eta_i * (1 - eta_i))``."""
        params = self.from_eta(eta)
        p = params.probs
        return np.diag(1.0 / (p * (1.0 - p)))


class Gaussian:
    """Full-covariance multivariate Gaussian family on ``R^d``.

    Expectation parameters are the mean and the (packed) second moment
    ``E[x x^T] = cov + mean mean^T``; the inverse conversion recovers the
    covariance by subtracting the outer product of the mean. Sampling goes
    through the cached Cholesky factor of the covariance.
    """

    def __init__(self, dim: int):
        if int(dim) != dim or dim < 1:
            raise InvalidInputError("dim must be a positive integer")
        self.dim = int(dim)
        rows, cols = np.triu_indices(self.dim)
        self._rows = rows
        self._cols = cols
        self.eta_dim = self.dim + rows.size

    def __repr__(self):
        return f"Gaussian(dim={self.dim})"

    # -- packing helpers --------------------------------------------------

    def pack_symmetric(self, mat: np.ndarray) -> np.ndarray:
        """Row-major upper-triangular packing of a symmetric ``(d, d)`` matrix."""
        mat = np.asarray(mat, dtype=np.float64)
        if mat.shape != (self.dim, self.dim):
            raise InvalidInputError("matrix shape mismatch")
        return mat[self._rows, self._cols].copy()

    def unpack_symmetric(self, packed: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`pack_symmetric`; the result is exactly symmetric."""
        packed = np.asarray(packed, dtype=np.float64)
        if packed.shape != (self._rows.size,):
            raise InvalidInputError("packed length mismatch")
        mat = np.zeros((self.dim, self.dim))
        mat[self._rows, self._cols] = packed
        mat[self._cols, self._rows] = packed
        return mat

    # -- points and statistics -------------------------------------------

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise InvalidInputError(
                f"point must have shape ({self.dim},), got {x.shape}"
            )
        return x

    def _check_eta(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=np.float64)
        if eta.shape != (self.eta_dim,):
            raise InvalidInputError(
                f"eta must have shape ({self.eta_dim},), got {eta.shape}"
            )
        return eta

    def sufficient_statistics(self, x) -> np.ndarray:
        """``T(x) = (x, pack(x x^T))`` in the flat layout."""
        x = self._check_point(x)
        return np.concatenate([x, x[self._rows] * x[self._cols]])

    def batch_sufficient_statistics(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise InvalidInputError(
                f"points must have shape (n, {self.dim}), got {pts.shape}"
            )
        return np.hstack([pts, pts[:, self._rows] * pts[:, self._cols]])

    # -- parameter conversions --------------------------------------------

    def to_eta(self, params: GaussianParams) -> np.ndarray:
        """``(mean, pack(cov + mean mean^T))``."""
        if params.dim != self.dim:
            raise InvalidInputError("parameter dimension mismatch")
        m = params.mean
        second = params.cov + np.outer(m, m)
        return np.concatenate([m, second[self._rows, self._cols]])

    def from_eta(self, eta) -> GaussianParams:
        """Recover ``(mean, cov)`` with ``cov = M2 - mean mean^T``.

        Raises ``DegenerateDistributionError`` when the implied covariance is
        not positive definite.
        """
        eta = self._check_eta(eta)
        if not np.all(np.isfinite(eta)):
            raise DomainExitError("eta has non-finite coordinates")
        m = eta[: self.dim]
        second = self.unpack_symmetric(eta[self.dim :])
        cov = second - np.outer(m, m)
        cov = (cov + cov.T) / 2.0
        return GaussianParams(m, cov)

    # -- densities and sampling --------------------------------------------

    def log_density(self, params: GaussianParams, x) -> float:
        """Log density of ``x`` w.r.t. Lebesgue measure."""
        x = self._check_point(x)
        diff = x - params.mean
        L = params.chol
        y = np.linalg.solve(L, diff)
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        return float(-0.5 * (self.dim * np.log(2.0 * np.pi) + logdet + y @ y))

    def sample(self, params: GaussianParams, rng: np.random.Generator, count: int) -> np.ndarray:
        """``count`` i.i.d. draws via the symmetric (Cholesky) factor."""
        if count < 1:
            raise InvalidInputError("count must be >= 1")
        z = rng.standard_normal((count, self.dim))
        return params.mean + z @ params.chol.T

    def natural_grad_log_density(self, eta, x) -> np.ndarray:
        """``T(x) - eta`` in the flat layout."""
        eta = self._check_eta(eta)
        return self.sufficient_statistics(x) - eta

    # -- divergence and information ------------------------------------------

    def kl_divergence(self, p: GaussianParams, q: GaussianParams) -> float:
        """Closed-form two-Gaussian KL divergence KL(P_p || P_q), floored at 0
        against rounding on nearly identical parameters."""
        if p.dim != self.dim or q.dim != self.dim:
            raise InvalidInputError("parameter dimension mismatch")
        Lq = q.chol
        x = np.linalg.solve(Lq, p.chol)
        trace_term = float(np.sum(x * x))
        y = np.linalg.solve(Lq, q.mean - p.mean)
        maha = float(y @ y)
        logdet_q = 2.0 * float(np.sum(np.log(np.diag(Lq))))
        logdet_p = 2.0 * float(np.sum(np.log(np.diag(p.chol))))
        return max(0.0, 0.5 * (trace_term + maha - self.dim + logdet_q - logdet_p))

    def fisher_information(self, eta) -> np.ndarray:
        """Fisher information at ``eta``, computed numerically as the Hessian
        of ``delta -> KL(eta || eta + delta)`` at zero displacement, by central
        differences.

        The result is symmetrized exactly; loss of positive definiteness
        raises ``IllConditionedError`` with a condition report. This numerical
        route is intentionally independent of the closed forms it is used to
        cross-check.
        """
        eta = self._check_eta(eta)
        base = self.from_eta(eta)
        n = self.eta_dim
        h = 1e-4 * np.maximum(1.0, np.abs(eta))

        def kl_at(delta):
            return self.kl_divergence(base, self.from_eta(eta + delta))

        fim = np.empty((n, n))
        unit = np.zeros(n)
        for i in range(n):
            unit[:] = 0.0
            unit[i] = h[i]
            # KL and its gradient vanish at zero displacement, so the pure
            # second difference needs only the two one-sided evaluations.
            fim[i, i] = (kl_at(unit) + kl_at(-unit)) / (h[i] * h[i])
        for i in range(n):
            for j in range(i + 1, n):
                di = np.zeros(n)
                dj = np.zeros(n)
                di[i] = h[i]
                dj[j] = h[j]
                val = (
                    kl_at(di + dj) - kl_at(di - dj) - kl_at(-di + dj) + kl_at(-di - dj)
                ) / (4.0 * h[i] * h[j])
                fim[i, j] = val
                fim[j, i] = val
        fim = (fim + fim.T) / 2.0
        try:
            np.linalg.cholesky(fim)
        except np.linalg.LinAlgError:
            eigs = np.linalg.eigvalsh(fim)
            cond = "inf" if eigs[0] == 0.0 else f"{abs(eigs[-1] / eigs[0]):.3e}"
            raise IllConditionedError(
                "numerical Fisher information lost positive definiteness: "
                f"eigenvalue range [{eigs[0]:.3e}, {eigs[-1]:.3e}], "
                f"condition estimate {cond}"
            ) from None
        return fim
