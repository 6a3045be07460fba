"""Dense linear algebra kernels for min-norm regression experiments.

Everything here is derived from one thin SVD of the data matrix: the
pseudoinverse application, rowspace projectors, Gram-inverse traces, the
minimum singular value, and the exact one-sample trace update.  The
singular-value cutoff ``max(n, d) * s1 * eps`` detects exact rank
deficiency only; genuinely small singular values near n = d are kept,
because truncating them would act as implicit ridge regularization and
erase the risk peak these experiments exist to measure.

The factorization itself is delegated to LAPACK via ``numpy.linalg.svd``
(Golub-Kahan bidiagonalization); the accuracy contract is pinned by the
:class:`SvdFactors` invariants and the test suite, not by the algorithm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS = float(np.finfo(np.float64).eps)


class SvdConvergenceError(RuntimeError):
    """The SVD iteration failed to converge."""


class SingularityError(ValueError):
    """A required inverse does not exist at working precision."""


@dataclass
class SvdFactors:
    """Thin SVD ``X = U diag(s) V^T`` with r = min(n, d) columns.

    ``s`` is non-increasing; U (n-by-r) and V (d-by-r) have orthonormal
    columns.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.V.shape[0]

    @property
    def cutoff(self) -> float:
        """Rank-detection threshold: max(n, d) * s1 * machine epsilon."""
        s1 = float(self.s[0]) if self.s.size else 0.0
        return max(self.n, self.d) * s1 * _EPS

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.s > self.cutoff))


def svd(X: np.ndarray) -> SvdFactors:
    """Thin SVD of a nonempty matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"svd needs a nonempty 2-d matrix, got shape {X.shape}")
    try:
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        # LAPACK does not expose its internal sweep count; report what it says.
        raise SvdConvergenceError(f"SVD did not converge on shape {X.shape}: {exc}") from exc
    return SvdFactors(U=U, s=s, V=Vt.T)


def _inv_s(f: SvdFactors) -> np.ndarray:
    """Reciprocal singular values, zeroed at or below the cutoff."""
    inv = np.zeros_like(f.s)
    keep = f.s > f.cutoff
    np.divide(1.0, f.s, out=inv, where=keep)
    return inv


def pinv_apply_factors(f: SvdFactors, y: np.ndarray) -> np.ndarray:
    """Apply the pseudoinverse held in ``f`` to a response vector."""
    if y.shape[0] != f.n:
        raise ValueError(f"y has length {y.shape[0]}, expected {f.n}")
    return f.V @ (_inv_s(f) * (f.U.T @ y))


def pinv_apply(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution ``X^+ y``.

    Computed as ``V diag(1/s_i for s_i > cutoff else 0) U^T y``.  An all-zero
    X maps everything to the zero vector.
    """
    return pinv_apply_factors(svd(X), np.asarray(y, dtype=np.float64))


def project_rowspace_factors(
    f: SvdFactors, v: np.ndarray, complement: bool = False
) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the rowspace of X (or its complement)."""
    if v.shape[0] != f.d:
        raise ValueError(f"v has length {v.shape[0]}, expected {f.d}")
    Vk = f.V[:, f.s > f.cutoff]
    proj = Vk @ (Vk.T @ v)
    return v - proj if complement else proj


def project_rowspace(X: np.ndarray, v: np.ndarray, complement: bool = False) -> np.ndarray:
    """Project ``v`` onto the rowspace of X; ``complement=True`` gives v minus that."""
    return project_rowspace_factors(svd(X), np.asarray(v, dtype=np.float64), complement)


def trace_inv_gram_factors(f: SvdFactors) -> float:
    """Trace of the inverse Gram matrix as sum of 1/s_i^2 over the spectrum."""
    if f.n > f.d:
        raise ValueError(f"trace_inv_gram needs n <= d, got n={f.n}, d={f.d}")
    smin = float(f.s[-1])
    if smin <= f.cutoff:
        raise SingularityError(
            f"rank-deficient matrix: sigma_min={smin:.6e} is at or below cutoff={f.cutoff:.6e}"
        )
    return float(np.sum(1.0 / f.s**2))


def trace_inv_gram(X: np.ndarray) -> float:
    """``Tr((X X^T)^-1)`` for a full-row-rank X with n <= d.

    Computed from the singular values as ``sum(1 / s_i^2)``; forming the
    explicit Gram inverse is kept to the tests as an oracle.
    """
    return trace_inv_gram_factors(svd(X))


def trace_increment_factors(f: SvdFactors, x: np.ndarray) -> float:
    """Exact change of ``Tr((X X^T)^-1)`` when row ``x`` is appended.

    For X with n < d rows and full row rank, appending x gives

        Tr((X1 X1^T)^-1) = Tr((X X^T)^-1) + (1 + ||(X^T)^+ x||^2) / ||P_perp x||^2

    where P_perp projects onto the orthogonal complement of the rowspace.
    Follows from the Schur complement of the bordered Gram matrix plus a
    rank-one (Sherman-Morrison) correction of the leading block.
    """
    if f.n >= f.d:
        raise ValueError(f"trace_increment needs n < d, got n={f.n}, d={f.d}")
    if x.shape[0] != f.d:
        raise ValueError(f"x has length {x.shape[0]}, expected {f.d}")
    smin = float(f.s[-1])
    if smin <= f.cutoff or f.rank < f.n:
        raise SingularityError(
            f"rank-deficient matrix: sigma_min={smin:.6e} is at or below cutoff={f.cutoff:.6e}"
        )
    coef = (f.V.T @ x) / f.s  # coordinates of (X^T)^+ x in the left basis
    perp = x - f.V @ (f.V.T @ x)
    denom = float(perp @ perp)
    if np.sqrt(denom) <= f.cutoff:
        raise SingularityError(
            f"new sample lies in the rowspace: ||P_perp x||={np.sqrt(denom):.6e} "
            f"is at or below cutoff={f.cutoff:.6e}"
        )
    return (1.0 + float(coef @ coef)) / denom


def trace_increment(X: np.ndarray, x: np.ndarray) -> float:
    """Exact one-sample update of the inverse-Gram trace (see factors variant)."""
    return trace_increment_factors(svd(X), np.asarray(x, dtype=np.float64))


def min_singular_value(X: np.ndarray) -> float:
    """Smallest of the min(n, d) singular values of a nonempty X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"min_singular_value needs a nonempty 2-d matrix, got shape {X.shape}")
    try:
        s = np.linalg.svd(X, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"SVD did not converge on shape {X.shape}: {exc}") from exc
    return float(s[-1])
