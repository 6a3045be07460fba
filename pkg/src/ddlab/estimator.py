"""Two routes to the ridgeless least-squares estimate.

``min_norm_fit`` applies the pseudoinverse directly; ``gd_fit`` runs plain
gradient descent from zero on the unnormalized empirical risk
``||X b - y||^2``.  At convergence the two agree: gradient-descent iterates
never leave the rowspace of X, so the limit is the minimum-norm
interpolant when n <= d and the unique least-squares solution when n > d.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from .linalg import (
    SvdFactors,
    pinv_apply_factors,
    project_rowspace_factors,
    svd,
    trace_inv_gram_factors,
)


class Regime(Enum):
    """n <= d is the interpolating branch, n > d the classical one."""

    OVERPARAMETERIZED = "overparameterized"
    UNDERPARAMETERIZED = "underparameterized"


@dataclass
class Estimate:
    """A fitted coefficient vector plus conditioning diagnostics.

    ``trace_inv_gram`` is populated exactly when the fit is in the
    overparameterized regime (n <= d; the square case counts as
    overparameterized, where both branches coincide).
    """

    beta_hat: np.ndarray
    regime: Regime
    sigma_min: float
    trace_inv_gram: Optional[float]
    train_residual: float


@dataclass(frozen=True)
class GdConfig:
    """Gradient-descent knobs.

    ``step_size="auto"`` uses 0.9 / s1^2, which is inside the stability
    region of the update ``b <- b - step * 2 X^T (X b - y)`` (stable for
    step < 1 / s1^2).  ``tolerance`` is an absolute gradient-norm stop.
    """

    max_steps: int = 200_000
    step_size: Union[float, str] = "auto"
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if isinstance(self.step_size, str):
            if self.step_size != "auto":
                raise ValueError(f"step_size must be positive or 'auto', got {self.step_size!r}")
        elif self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")


class GdConvergenceError(RuntimeError):
    """Gradient descent stopped at max_steps above tolerance (or diverged)."""

    def __init__(self, message: str, steps: int, gradient_norm: float):
        super().__init__(message)
        self.steps = steps
        self.gradient_norm = gradient_norm


def _diagnostics(f: SvdFactors, beta_hat: np.ndarray, X, y) -> Estimate:
    regime = Regime.OVERPARAMETERIZED if f.n <= f.d else Regime.UNDERPARAMETERIZED
    trace = trace_inv_gram_factors(f) if regime is Regime.OVERPARAMETERIZED else None
    residual = float(np.linalg.norm(X @ beta_hat - y))
    return Estimate(
        beta_hat=beta_hat,
        regime=regime,
        sigma_min=float(f.s[-1]),
        trace_inv_gram=trace,
        train_residual=residual,
    )


def min_norm_fit(X: np.ndarray, y: np.ndarray) -> Estimate:
    """Fit by direct pseudoinverse application, with diagnostics."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    f = svd(X)
    beta_hat = pinv_apply_factors(f, y)
    return _diagnostics(f, beta_hat, X, y)


def gd_fit(
    X: np.ndarray,
    y: np.ndarray,
    cfg: Optional[GdConfig] = None,
    on_iterate: Optional[Callable[[int, np.ndarray], None]] = None,
    callback_every: int = 100,
) -> Estimate:
    """Fit by gradient descent from zero on ``||X b - y||^2``.

    Stops when the gradient norm ``||2 X^T (X b - y)||`` drops to
    ``cfg.tolerance``; raises :class:`GdConvergenceError` carrying the final
    gradient norm if ``max_steps`` is exhausted or the iteration diverges.
    ``on_iterate(step, b)`` is invoked every ``callback_every`` steps and on
    the final iterate, letting callers spot-check the rowspace invariant.
    """
    cfg = cfg or GdConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    f = svd(X)
    s1 = float(f.s[0])
    if cfg.step_size == "auto":
        # All-zero X has zero gradient everywhere; any finite step is unused.
        step = 0.9 / s1**2 if s1 > 0.0 else 1.0
    else:
        step = float(cfg.step_size)

    beta = np.zeros(f.d)
    grad_norm = np.inf
    for t in range(1, cfg.max_steps + 1):
        grad = 2.0 * (X.T @ (X @ beta - y))
        grad_norm = float(np.linalg.norm(grad))
        if not np.isfinite(grad_norm):
            raise GdConvergenceError(
                f"gradient descent diverged at step {t} (gradient norm {grad_norm})",
                steps=t,
                gradient_norm=grad_norm,
            )
        if grad_norm <= cfg.tolerance:
            break
        beta -= step * grad
        if on_iterate is not None and (t % callback_every == 0 or t == cfg.max_steps):
            on_iterate(t, beta)
    else:
        raise GdConvergenceError(
            f"gradient descent did not converge in {cfg.max_steps} steps: "
            f"gradient norm {grad_norm:.6e} > tolerance {cfg.tolerance:.6e}",
            steps=cfg.max_steps,
            gradient_norm=grad_norm,
        )
    if on_iterate is not None:
        on_iterate(t, beta)
    # Confinement to the rowspace is structural; fail loudly if it ever breaks.
    leak = float(np.linalg.norm(project_rowspace_factors(f, beta, complement=True)))
    scale = float(np.linalg.norm(beta))
    if scale > 0 and leak > 1e-8 * scale:
        raise GdConvergenceError(
            f"iterate left the rowspace: complement norm {leak:.3e} vs ||b||={scale:.3e}",
            steps=t,
            gradient_norm=grad_norm,
        )
    return _diagnostics(f, beta, X, y)
