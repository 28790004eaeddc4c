"""Variational Bayesian Gaussian mixture with a stick-breaking weight prior.

Coordinate-ascent variational inference for a truncated Dirichlet-process
mixture of full-covariance Gaussians with Normal-Wishart parameter priors.
Each iteration records the evidence lower bound, which is non-decreasing up
to floating-point noise; redundant components starve and lose all argmax
responsibility, leaving the "effective" components.

Priors: stick Beta(1, 1/K) with truncation K, mean prior at the data mean
(with a weak precision scaling so component means are data-driven), Wishart
degrees of freedom d, and the diagonal of the data covariance (floored at the
jitter level) as the covariance scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import digamma, gammaln, logsumexp, xlogy

from .clustering import ClusterAssignment, kmeans_fit
from .util import ensure_rng

_LN_2PI = math.log(2.0 * math.pi)
_JITTER = 1e-6
_MEAN_PRECISION_PRIOR = 1e-3


@dataclass(frozen=True)
class BgmModel:
    truncation: int
    weights: np.ndarray  # (K,), simplex
    means: np.ndarray  # (K, d)
    covariances: np.ndarray  # (K, d, d), SPD
    responsibilities: np.ndarray  # (N, K), row-stochastic
    elbo_trace: tuple[float, ...]
    n_iter: int
    converged: bool

    @property
    def labels(self) -> np.ndarray:
        return self.responsibilities.argmax(axis=1)

    @property
    def effective_components(self) -> tuple[int, ...]:
        """Components that take argmax responsibility for at least one sample."""
        return tuple(int(c) for c in np.unique(self.labels))

    def assignment(self) -> ClusterAssignment:
        """Argmax labels renumbered densely in order of first appearance."""
        raw = self.labels
        remap: dict[int, int] = {}
        dense = np.empty_like(raw)
        for i, c in enumerate(raw):
            if int(c) not in remap:
                remap[int(c)] = len(remap)
            dense[i] = remap[int(c)]
        return ClusterAssignment(dense)

    def to_json_dict(self) -> dict:
        return {
            "kind": "bgm",
            "truncation": self.truncation,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "effective_components": list(self.effective_components),
            "elbo": self.elbo_trace[-1],
            "n_iter": self.n_iter,
            "converged": self.converged,
        }


def _chol_with_jitter(matrix: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        jittered = matrix + _JITTER * np.eye(matrix.shape[0])
        try:
            return np.linalg.cholesky(jittered)
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(
                f"covariance scale not SPD even after {_JITTER} jitter"
            ) from None


def _log_wishart_b(logdet_w: float, nu: float, d: int) -> float:
    """Log normalization constant of a Wishart with scale log-determinant
    logdet_w and nu degrees of freedom."""
    return (
        -0.5 * nu * logdet_w
        - 0.5 * nu * d * math.log(2.0)
        - 0.25 * d * (d - 1) * math.log(math.pi)
        - gammaln(0.5 * (nu - np.arange(d))).sum()
    )


class _Posterior:
    """Variational posterior parameters for one M-step."""

    def __init__(self, stick_a, stick_b, beta, means, nu, w_inv):
        self.stick_a = stick_a
        self.stick_b = stick_b
        self.beta = beta
        self.means = means
        self.nu = nu
        self.w_inv = w_inv
        self.chol = np.stack([_chol_with_jitter(m) for m in w_inv])
        self.logdet_w_inv = 2.0 * np.log(
            np.stack([np.diagonal(c) for c in self.chol])
        ).sum(axis=1)
        d = means.shape[1]
        self.elog_det_lambda = (
            digamma(0.5 * (self.nu[:, None] - np.arange(d)[None, :])).sum(axis=1)
            + d * math.log(2.0)
            - self.logdet_w_inv
        )
        elog_v = digamma(stick_a) - digamma(stick_a + stick_b)
        elog_1mv = digamma(stick_b) - digamma(stick_a + stick_b)
        self.elog_v = elog_v
        self.elog_1mv = elog_1mv
        self.elog_pi = elog_v + np.concatenate([[0.0], np.cumsum(elog_1mv)[:-1]])

    def precision_matrices(self) -> np.ndarray:
        d = self.means.shape[1]
        eye = np.eye(d)
        return np.stack([cho_solve((c, True), eye) for c in self.chol])


def _suff_stats(X: np.ndarray, resp: np.ndarray):
    nk = resp.sum(axis=0)
    safe = np.where(nk > 0, nk, 1.0)
    xbar = (resp.T @ X) / safe[:, None]
    d = X.shape[1]
    sk = np.empty((resp.shape[1], d, d))
    for k in range(resp.shape[1]):
        diff = X - xbar[k]
        sk[k] = (resp[:, k, None] * diff).T @ diff / safe[k]
    return nk, xbar, sk


def _m_step(nk, xbar, sk, prior) -> _Posterior:
    gamma_c, m0, beta0, nu0, w0_inv = prior
    k = nk.shape[0]
    stick_a = 1.0 + nk
    stick_b = gamma_c + (nk.sum() - np.cumsum(nk))
    beta = beta0 + nk
    means = (beta0 * m0 + nk[:, None] * xbar) / beta[:, None]
    nu = nu0 + nk
    w_inv = np.empty_like(sk)
    for j in range(k):
        dev = xbar[j] - m0
        w_inv[j] = (
            w0_inv
            + nk[j] * sk[j]
            + (beta0 * nk[j] / (beta0 + nk[j])) * np.outer(dev, dev)
        )
    return _Posterior(stick_a, stick_b, beta, means, nu, w_inv)


def _e_step(X: np.ndarray, post: _Posterior) -> np.ndarray:
    n, d = X.shape
    k = post.means.shape[0]
    log_rho = np.empty((n, k))
    for j in range(k):
        diff = X - post.means[j]
        y = solve_triangular(post.chol[j], diff.T, lower=True)
        maha = (y**2).sum(axis=0)
        quad = d / post.beta[j] + post.nu[j] * maha
        log_rho[:, j] = (
            post.elog_pi[j]
            + 0.5 * post.elog_det_lambda[j]
            - 0.5 * d * _LN_2PI
            - 0.5 * quad
        )
    log_norm = logsumexp(log_rho, axis=1)
    return np.exp(log_rho - log_norm[:, None])


def _elbo(X, resp, nk, xbar, sk, post, prior) -> float:
    gamma_c, m0, beta0, nu0, w0_inv = prior
    n, d = X.shape
    k = nk.shape[0]
    precisions = post.precision_matrices()
    logdet_w0_inv = float(np.log(np.diagonal(w0_inv)).sum())
    log_b0 = _log_wishart_b(-logdet_w0_inv, nu0, d)

    likelihood = 0.0
    prior_gauss = 0.0
    entropy_gauss = 0.0
    for j in range(k):
        wj = precisions[j]
        dev_data = xbar[j] - post.means[j]
        dev_prior = post.means[j] - m0
        likelihood += 0.5 * nk[j] * (
            post.elog_det_lambda[j]
            - d / post.beta[j]
            - post.nu[j] * float(np.trace(sk[j] @ wj))
            - post.nu[j] * float(dev_data @ wj @ dev_data)
            - d * _LN_2PI
        )
        prior_gauss += 0.5 * (
            d * math.log(beta0 / (2.0 * math.pi))
            + post.elog_det_lambda[j]
            - d * beta0 / post.beta[j]
            - beta0 * post.nu[j] * float(dev_prior @ wj @ dev_prior)
        )
        prior_gauss += (
            log_b0
            + 0.5 * (nu0 - d - 1) * post.elog_det_lambda[j]
            - 0.5 * post.nu[j] * float(np.trace(w0_inv @ wj))
        )
        log_bk = _log_wishart_b(-post.logdet_w_inv[j], post.nu[j], d)
        wishart_entropy = (
            -log_bk
            - 0.5 * (post.nu[j] - d - 1) * post.elog_det_lambda[j]
            + 0.5 * post.nu[j] * d
        )
        entropy_gauss += (
            0.5 * post.elog_det_lambda[j]
            + 0.5 * d * math.log(post.beta[j] / (2.0 * math.pi))
            - 0.5 * d
            - wishart_entropy
        )

    assignments = float((nk * post.elog_pi).sum())
    prior_sticks = k * (gammaln(1.0 + gamma_c) - gammaln(gamma_c)) + (
        gamma_c - 1.0
    ) * float(post.elog_1mv.sum())
    entropy_z = float(xlogy(resp, resp).sum())
    entropy_sticks = float(
        (
            gammaln(post.stick_a + post.stick_b)
            - gammaln(post.stick_a)
            - gammaln(post.stick_b)
            + (post.stick_a - 1.0) * post.elog_v
            + (post.stick_b - 1.0) * post.elog_1mv
        ).sum()
    )
    return (
        likelihood
        + assignments
        + prior_sticks
        + prior_gauss
        - entropy_z
        - entropy_sticks
        - entropy_gauss
    )


def _init_responsibilities(X, truncation, rng) -> np.ndarray:
    n = X.shape[0]
    k = min(truncation, n)
    _, assignment = kmeans_fit(X, k, n_init=10, max_iter=100, rng=rng)
    resp = np.zeros((n, truncation))
    resp[np.arange(n), assignment.labels] = 1.0
    return resp


def bgm_fit(X, truncation: int, max_iter: int = 500, tol: float = 1e-4, rng=None) -> BgmModel:
    """Fit the truncated stick-breaking Gaussian mixture by variational EM.

    Stops when the ELBO changes by less than tol or after max_iter sweeps;
    responsibilities are refreshed once more against the final parameters.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    n, d = X.shape
    if n <= d:
        raise ValueError(f"need more samples than dimensions for full covariances, got {n} <= {d}")
    if truncation < 1:
        raise ValueError(f"truncation must be >= 1, got {truncation}")
    rng = ensure_rng(rng)

    variances = X.var(axis=0)
    w0_inv = np.diag(np.maximum(variances, _JITTER))
    prior = (1.0 / truncation, X.mean(axis=0), _MEAN_PRECISION_PRIOR, float(d), w0_inv)

    resp = _init_responsibilities(X, truncation, rng)
    trace: list[float] = []
    converged = False
    post = None
    for _ in range(max_iter):
        nk, xbar, sk = _suff_stats(X, resp)
        post = _m_step(nk, xbar, sk, prior)
        trace.append(_elbo(X, resp, nk, xbar, sk, post, prior))
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
        resp = _e_step(X, post)
    resp = _e_step(X, post)

    stick_mean = post.stick_a / (post.stick_a + post.stick_b)
    remainder = np.concatenate([[1.0], np.cumprod(1.0 - stick_mean)[:-1]])
    weights = stick_mean * remainder
    weights = weights / weights.sum()
    covariances = post.w_inv / post.nu[:, None, None]

    return BgmModel(
        truncation=truncation,
        weights=weights,
        means=post.means.copy(),
        covariances=covariances,
        responsibilities=resp,
        elbo_trace=tuple(trace),
        n_iter=len(trace),
        converged=converged,
    )
