"""Synthetic students from survey respondents.

Each respondent's ratings become per-course interest probabilities. Repeated
biased coin flips form a data matrix that updates a multivariate Beta prior;
the posterior is sampled through a Gaussian copula with Beta marginals. A
status population is the uniform mixture of its respondents' posteriors plus a
multinomial over declared course maxima.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy import linalg
from scipy.stats import beta as beta_dist
from scipy.stats import norm

import constants
from utils.core import Agent, InputError, InvariantError

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


def normalize_ratings(ratings: Sequence[int]) -> FloatArray:
    r = np.asarray(ratings, dtype=float)
    return (r - constants.MIN_RATING) / (constants.MAX_RATING - constants.MIN_RATING)


def sample_data_matrix(theta: npt.ArrayLike, ell: int, rng: np.random.Generator) -> npt.NDArray[np.int64]:
    if ell < 1:
        raise InputError(f"Smoothing parameter ell must be >= 1, got {ell}")
    theta = np.asarray(theta, dtype=float)
    return (rng.random((ell, theta.size)) < theta).astype(np.int64)


def update_matrix(D: npt.ArrayLike) -> npt.NDArray[np.int64]:
    """Sum of outer products of the rows of D."""
    D = np.asarray(D, dtype=np.int64)
    return D.T @ D


# Exponential-size construction, kept as a reference for small m

def bit_matrix(m: int) -> npt.NDArray[np.int64]:
    """m x 2^m matrix whose column k is the bit vector of k (bit g is course g)."""
    k = np.arange(2**m)
    return ((k[None, :] >> np.arange(m)[:, None]) & 1).astype(np.int64)


def vectorize_data(D: npt.ArrayLike) -> npt.NDArray[np.int64]:
    """Count of rows of D per bit pattern."""
    D = np.asarray(D, dtype=np.int64)
    m = D.shape[1]
    codes = D @ (1 << np.arange(m))
    return np.bincount(codes, minlength=2**m).astype(np.int64)


def update_matrix_explicit(D: npt.ArrayLike) -> npt.NDArray[np.int64]:
    D = np.asarray(D, dtype=np.int64)
    H = bit_matrix(D.shape[1])
    return (H * vectorize_data(D)) @ H.T


@dataclass(frozen=True)
class Prior:
    nu: float
    mu: FloatArray
    R: FloatArray

    @classmethod
    def default(cls, m: int) -> "Prior":
        return cls(constants.PRIOR_NU, np.full(m, constants.PRIOR_MEAN), np.eye(m))

    def moment_matrix(self) -> FloatArray:
        V = np.diag(self.mu * (1 - self.mu)) / (self.nu + 1)
        half = np.sqrt(V)
        Sigma = half @ self.R @ half
        return self.nu * ((self.nu + 1) * Sigma + np.outer(self.mu, self.mu))


@dataclass
class PosteriorModel:
    nu: float
    mu: FloatArray
    A: FloatArray
    Sigma: FloatArray
    R: FloatArray
    alpha: FloatArray
    beta: FloatArray
    factor: FloatArray

    @property
    def m(self) -> int:
        return self.mu.size


def correlation_factor(R: FloatArray) -> FloatArray:
    """Symmetric square root of a correlation matrix, repairing it first if it is not PSD."""
    w, Q = linalg.eigh(R)
    if w.min() < constants.EIGENVALUE_FLOOR:
        logger.debug("Repairing correlation matrix (smallest eigenvalue %.3g)", w.min())
        R = Q @ np.diag(np.maximum(w, constants.EIGENVALUE_FLOOR)) @ Q.T
        d = 1.0 / np.sqrt(np.diag(R))
        R = R * np.outer(d, d)
        w, Q = linalg.eigh(R)
        w = np.maximum(w, 0.0)
    factor = Q @ np.diag(np.sqrt(w)) @ Q.T
    if not np.all(np.isfinite(factor)):
        raise InvariantError("Correlation matrix factorization failed after repair")
    return factor


def posterior(prior: Prior, D: npt.ArrayLike) -> PosteriorModel:
    D = np.asarray(D, dtype=np.int64)
    ell, m = D.shape
    if prior.mu.size != m:
        raise InputError(f"Prior has {prior.mu.size} courses but data has {m}")
    nu = prior.nu + ell
    A = prior.moment_matrix() + update_matrix(D)
    mu = np.diag(A) / nu
    eps = constants.MARGINAL_EPS
    if np.any((mu < eps) | (mu > 1 - eps)):
        logger.debug("Clipping %d degenerate marginal means", int(((mu < eps) | (mu > 1 - eps)).sum()))
    mu = np.clip(mu, eps, 1 - eps)
    Sigma = (A / nu - np.outer(mu, mu)) / (nu + 1)
    Sigma = (Sigma + Sigma.T) / 2
    inv_half = 1.0 / np.sqrt(mu * (1 - mu) / (nu + 1))
    R = Sigma * np.outer(inv_half, inv_half)
    R = np.clip(R, -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    alpha = nu * mu
    beta = nu - alpha
    return PosteriorModel(nu=nu, mu=mu, A=A, Sigma=Sigma, R=R, alpha=alpha, beta=beta, factor=correlation_factor(R))


def sample_synthetic(model: PosteriorModel, rng: np.random.Generator, size: Optional[int] = None) -> FloatArray:
    """One draw (or ``size`` draws) of interest probabilities from the copula model."""
    rows = 1 if size is None else size
    z = rng.standard_normal((rows, model.m)) @ model.factor.T
    sigma = beta_dist.ppf(norm.cdf(z), model.alpha, model.beta)
    sigma = np.clip(sigma, 0.0, 1.0)
    return sigma[0] if size is None else sigma


def to_response(sigma: npt.ArrayLike) -> npt.NDArray[np.int64]:
    s = np.asarray(sigma, dtype=float)
    r = np.floor(constants.MAX_RATING * s + 0.5)
    return np.clip(r, constants.MIN_RATING, constants.MAX_RATING).astype(np.int64)


@dataclass
class StatusPopulation:
    status: str
    kernels: list[PosteriorModel]
    course_max_values: npt.NDArray[np.int64]
    course_max_probs: FloatArray

    def __post_init__(self):
        if not self.kernels:
            raise InputError(f"No respondents to model status {self.status}")


def fit_population(
    respondents: Sequence[Agent],
    ell: int = constants.DEFAULT_ELL,
    rng: Optional[np.random.Generator] = None,
    prior: Optional[Prior] = None,
) -> StatusPopulation:
    """One posterior kernel per respondent; every respondent must share the same status."""
    if not respondents:
        raise InputError("Cannot fit a population without respondents")
    statuses = {a.status for a in respondents}
    if len(statuses) != 1:
        raise InputError(f"Respondents mix statuses {sorted(statuses)}")
    rng = rng if rng is not None else np.random.default_rng(constants.RANDOM_SEED)
    m = len(respondents[0].ratings)
    prior = prior if prior is not None else Prior.default(m)
    kernels = [posterior(prior, sample_data_matrix(normalize_ratings(a.ratings), ell, rng)) for a in respondents]
    values, counts = np.unique([a.course_max for a in respondents], return_counts=True)
    status = statuses.pop()
    logger.info("Fitted %d kernels for %s (ell=%d)", len(kernels), status, ell)
    return StatusPopulation(status, kernels, values.astype(np.int64), counts / counts.sum())


def sample_population(pop: StatusPopulation, count: int, rng: np.random.Generator, start_id: int = 0) -> list[Agent]:
    if count <= 0:
        return []
    picks = rng.integers(len(pop.kernels), size=count)
    course_max = rng.choice(pop.course_max_values, size=count, p=pop.course_max_probs)
    ratings = np.empty((count, pop.kernels[0].m), dtype=np.int64)
    for k in np.unique(picks):
        rows = np.flatnonzero(picks == k)
        ratings[rows] = to_response(sample_synthetic(pop.kernels[k], rng, size=rows.size))
    cap = constants.COURSE_CAP[pop.status]
    return [
        Agent(
            id=start_id + t,
            student_id=f"synth-{pop.status}-{t}",
            status=pop.status,
            ratings=tuple(int(r) for r in ratings[t]),
            course_max=int(min(course_max[t], cap)),
        )
        for t in range(count)
    ]
