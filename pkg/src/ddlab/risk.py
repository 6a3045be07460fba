"""Excess-risk evaluation: Monte Carlo decomposition and closed-form theory.

The expected excess risk of the min-norm estimator splits into a bias term
``||beta - E[beta_hat]||^2`` and a variance term with two pieces: one from
the randomness of the data matrix (term A) and one from the response noise,
``sigma^2 E[Tr((X X^T)^-1)]`` (term B).  ``monte_carlo_risk`` estimates all
of these from seeded trials; ``theory_overparam`` / ``theory_underparam``
give the closed forms in gamma = n/d, and ``trace_recursion`` /
``trace_asymptotic`` track how the trace term grows with samples.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import (
    SingularityError,
    pinv_apply_factors,
    project_rowspace_factors,
    svd,
    trace_inv_gram_factors,
)
from .randgen import ModelSpec, RngState, make_beta, mix_seed, sample_gaussian_matrix, sample_response

# Stream tag for the ground-truth coefficient draw: one beta per experiment,
# shared by every (n, trial) cell so bias statistics are well defined.
BETA_STREAM_KEY = 0x62657461


@dataclass
class RiskSummary:
    """Monte Carlo bias/variance/excess aggregates at one (n, d)."""

    n: int
    d: int
    trials: int
    bias_sq: float
    var_A: float
    var_B: float
    excess_mean: float
    excess_median: float
    excess_stderr: float
    skipped: int = 0


@dataclass(frozen=True)
class TheoryPoint:
    """Closed-form bias/variance/excess at one gamma = n/d."""

    gamma: float
    bias_sq: float
    variance: float
    excess: float


def excess_risk(beta_hat: np.ndarray, beta: np.ndarray) -> float:
    """Excess risk of an estimate: squared distance to the truth.

    Test MSE minus the noise floor sigma^2 equals ||beta_hat - beta||^2
    under isotropic Gaussian covariates.
    """
    if beta_hat.shape[0] != beta.shape[0]:
        raise ValueError(
            f"length mismatch: beta_hat has {beta_hat.shape[0]}, beta has {beta.shape[0]}"
        )
    diff = beta_hat - beta
    return float(diff @ diff)


def _run_trial(spec: ModelSpec, n: int, base_seed: int, beta: np.ndarray, trial: int):
    """One seeded draw-and-fit; returns per-trial statistics or None if skipped."""
    rng = RngState(mix_seed(base_seed, n, trial))
    X = sample_gaussian_matrix(rng, n, spec.d)
    y, eta = sample_response(rng, X, beta, spec.sigma)
    f = svd(X)
    if f.rank < min(n, spec.d):
        return None
    beta_hat = pinv_apply_factors(f, y)
    proj_beta = project_rowspace_factors(f, beta)
    excess = excess_risk(beta_hat, beta)
    if n <= spec.d:
        noise_term = trace_inv_gram_factors(f)
    else:
        noise_fit = pinv_apply_factors(f, eta)
        noise_term = float(noise_fit @ noise_fit)
    return beta_hat, proj_beta, excess, noise_term


def monte_carlo_risk(
    spec: ModelSpec,
    n: int,
    trials: int,
    base_seed: int,
    threads: int = 1,
) -> RiskSummary:
    """Estimate the bias/variance decomposition at one (n, d) from seeded trials.

    Per trial: draw (X, y), fit the min-norm estimator, and record the
    projected truth, the excess risk, and the noise term (the inverse-Gram
    trace for n <= d, otherwise the squared norm of the noise fit).  The
    aggregates are

    * ``bias_sq``:   ||beta - mean(beta_hat)||^2
    * ``var_A``:     mean ||P_X beta - mean(P_X beta)||^2
    * ``var_B``:     sigma^2 * mean(trace) for n <= d, else mean ||X^+ eta||^2
    * ``excess_*``:  mean / median / stderr of per-trial excess risk

    Trial t draws from seed ``mix_seed(base_seed, n, t)`` and beta (shared
    by all trials) from ``mix_seed(base_seed, BETA_STREAM_KEY)``, so results
    are identical for any thread count.  Rank-deficient draws (possible only
    for degenerate specs) are skipped and counted.
    """
    if trials < 2:
        raise ValueError(f"trials must be >= 2, got {trials}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    beta = make_beta(spec, RngState(mix_seed(base_seed, BETA_STREAM_KEY)))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, trials)) as pool:
            results = list(
                pool.map(lambda t: _run_trial(spec, n, base_seed, beta, t), range(trials))
            )
    else:
        results = [_run_trial(spec, n, base_seed, beta, t) for t in range(trials)]

    kept = [r for r in results if r is not None]
    skipped = trials - len(kept)
    if len(kept) < 2:
        raise SingularityError(
            f"only {len(kept)} of {trials} trials had full-rank draws; cannot summarize"
        )

    beta_hats = np.stack([r[0] for r in kept])
    proj_betas = np.stack([r[1] for r in kept])
    excesses = np.array([r[2] for r in kept])
    noise_terms = np.array([r[3] for r in kept])

    mean_beta_hat = beta_hats.mean(axis=0)
    bias_sq = float(np.sum((beta - mean_beta_hat) ** 2))
    dev = proj_betas - proj_betas.mean(axis=0)
    var_A = float(np.mean(np.sum(dev**2, axis=1)))
    if n <= spec.d:
        var_B = spec.sigma**2 * float(noise_terms.mean())
    else:
        var_B = float(noise_terms.mean())

    return RiskSummary(
        n=n,
        d=spec.d,
        trials=trials,
        bias_sq=bias_sq,
        var_A=var_A,
        var_B=var_B,
        excess_mean=float(excesses.mean()),
        excess_median=float(np.median(excesses)),
        excess_stderr=float(excesses.std(ddof=1) / np.sqrt(len(excesses))),
        skipped=skipped,
    )


def theory_overparam(gamma: float, beta_norm: float, sigma: float) -> TheoryPoint:
    """Closed-form risk for the interpolating regime, 0 < gamma < 1.

    bias = (1-g)^2 b^2, variance = g(1-g) b^2 + sigma^2 g/(1-g); the excess
    is their sum, (1-g) b^2 + sigma^2 g/(1-g).  Exact for the bias and the
    data-matrix variance term at finite d; the noise term is the large-d
    limit of the inverse-Gram trace.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(
            f"theory_overparam needs 0 < gamma < 1, got {gamma}; "
            "use theory_underparam for gamma > 1"
        )
    bias_sq = (1.0 - gamma) ** 2 * beta_norm**2
    variance = gamma * (1.0 - gamma) * beta_norm**2 + sigma**2 * gamma / (1.0 - gamma)
    return TheoryPoint(gamma=gamma, bias_sq=bias_sq, variance=variance, excess=bias_sq + variance)


def theory_underparam(gamma: float, sigma: float) -> TheoryPoint:
    """Closed-form risk for the classical regime, gamma > 1: sigma^2/(g-1), no bias."""
    if gamma <= 1.0:
        raise ValueError(
            f"theory_underparam needs gamma > 1, got {gamma}; "
            "use theory_overparam for gamma < 1"
        )
    variance = sigma**2 / (gamma - 1.0)
    return TheoryPoint(gamma=gamma, bias_sq=0.0, variance=variance, excess=variance)


def trace_recursion(d: int, n: int) -> float:
    """Expected inverse-Gram trace after n samples via the one-sample recursion.

    Iterates ``T_{k+1} = T_k (1 + 1/(d-k)) + 1/(d-k)`` from T_0 = 0, the
    growth rule obtained by replacing the rejection norm ||P_perp x||^2 with
    its expectation d - k.  Telescopes to the closed form n/(d-n+1).
    """
    if not 0 <= n < d:
        raise ValueError(f"trace_recursion needs 0 <= n < d, got n={n}, d={d}")
    t = 0.0
    for k in range(n):
        t = t * (1.0 + 1.0 / (d - k)) + 1.0 / (d - k)
    return t


def trace_asymptotic(gamma: float) -> float:
    """Large-d limit of the expected inverse-Gram trace: gamma / (1 - gamma)."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"trace_asymptotic needs 0 <= gamma < 1, got {gamma}")
    return gamma / (1.0 - gamma)


def theory_point(n: int, d: int, beta_norm: float, sigma: float) -> Optional[TheoryPoint]:
    """Closed-form risk at integer (n, d); None at the critical point n = d."""
    if n == d:
        return None
    gamma = n / d
    if gamma < 1.0:
        return theory_overparam(gamma, beta_norm, sigma)
    return theory_underparam(gamma, sigma)
