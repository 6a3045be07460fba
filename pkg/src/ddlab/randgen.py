"""Seeded random generation for the isotropic Gaussian regression model.

Every random quantity in this project flows through :class:`RngState`, a
SplitMix64 counter generator with a fixed Box-Muller transform on top.  The
algorithm is fully specified here so that a reimplementation in any language
reproduces the streams bit for bit:

* state is a 64-bit seed plus a 64-bit position (raw words consumed so far);
* word ``i`` of the stream (0-indexed from the start) is
  ``fmix64(seed + (i + 1) * 0x9E3779B97F4A7C15)`` with all arithmetic mod
  2**64, where ``fmix64`` is the SplitMix64 finalizer
  (``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
  z *= 0x94D049BB133111EB; z ^= z >> 31``);
* a uniform double in [0, 1) is the top 53 bits: ``(word >> 11) * 2.0**-53``;
* standard normals come from Box-Muller on consecutive uniform pairs
  ``(u1, u2)``: with ``r = sqrt(-2 log(1 - u1))`` the pair emits
  ``r cos(2 pi u2)`` then ``r sin(2 pi u2)``, in that order.  A request for
  an odd number of normals consumes a whole pair and discards the trailing
  sine output.

Stream seeds for trials are derived with :func:`mix_seed`, so results never
depend on execution order or parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1


def fmix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int, wrapping at 64 bits."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def mix_seed(base_seed: int, *keys: int) -> int:
    """Derive a stream seed from a base seed and integer keys.

    Folds each key into the state via the SplitMix64 finalizer:
    ``s = fmix64(base_seed)``, then ``s = fmix64(s ^ fmix64(key + GOLDEN))``
    for each key in order.  Distinct key tuples give independent streams, so
    per-trial generators can be built as ``mix_seed(base_seed, n, trial)``
    and parallel execution cannot change any result.
    """
    s = fmix64(base_seed)
    for k in keys:
        s = fmix64(s ^ fmix64((int(k) + _GOLDEN) & _MASK64))
    return s


class RngState:
    """SplitMix64 counter stream.

    Single-owner: never share one instance across trials or threads.  Both
    the raw word stream and the derived uniform/normal streams are pure
    functions of ``(seed, position)``.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.position = 0

    def _words(self, count: int) -> np.ndarray:
        """Next ``count`` raw 64-bit words, vectorized with uint64 wraparound."""
        idx = np.uint64(self.position + 1) + np.arange(count, dtype=np.uint64)
        z = np.uint64(self.seed) + idx * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
        self.position += count
        return z

    def uniforms(self, count: int) -> np.ndarray:
        """Next ``count`` doubles, i.i.d. uniform on [0, 1)."""
        return (self._words(count) >> np.uint64(11)) * 2.0**-53

    def normals(self, count: int) -> np.ndarray:
        """Next ``count`` doubles, i.i.d. standard normal via Box-Muller."""
        pairs = (count + 1) // 2
        u = self.uniforms(2 * pairs)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))  # 1 - u1 lies in (0, 1]
        theta = (2.0 * np.pi) * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:count]


class BetaMode(Enum):
    """Direction rule for the ground-truth coefficient vector."""

    FIRST_AXIS = "first-axis"
    RANDOM_UNIT = "random-unit"


@dataclass(frozen=True)
class ModelSpec:
    """Ground-truth distribution: x ~ N(0, I_d), y = <x, beta> + N(0, sigma^2).

    ``beta_norm`` is a free parameter (no unit cap is enforced); the risk
    formulas depend on the coefficient vector only through its norm.
    """

    d: int
    sigma: float = 0.1
    beta_norm: float = 1.0
    beta_mode: BetaMode = BetaMode.FIRST_AXIS

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.beta_norm < 0:
            raise ValueError(f"beta_norm must be >= 0, got {self.beta_norm}")


@dataclass
class DataSet:
    """One sampled (X, y) pair; ``eta`` stores the realized noise.

    When ``eta`` is present, ``y == X @ beta + eta`` holds bit for bit for
    the beta used at generation (see :func:`sample_response`).
    """

    X: np.ndarray
    y: np.ndarray
    eta: Optional[np.ndarray] = None


def make_beta(spec: ModelSpec, rng: RngState) -> np.ndarray:
    """Construct the ground-truth coefficient vector for ``spec``.

    FIRST_AXIS returns ``beta_norm * e_1`` without consuming randomness;
    RANDOM_UNIT returns ``beta_norm`` times a uniformly random unit vector
    (a normalized Gaussian draw of length d).
    """
    if spec.beta_mode is BetaMode.FIRST_AXIS:
        beta = np.zeros(spec.d)
        beta[0] = spec.beta_norm
        return beta
    g = rng.normals(spec.d)
    return (spec.beta_norm / np.linalg.norm(g)) * g


def sample_gaussian_matrix(rng: RngState, n: int, d: int) -> np.ndarray:
    """An n-by-d matrix of i.i.d. standard normal entries, filled row-major."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return rng.normals(n * d).reshape(n, d)


def sample_response(
    rng: RngState, X: np.ndarray, beta: np.ndarray, sigma: float
) -> tuple[np.ndarray, np.ndarray]:
    """Draw responses ``y = X beta + eta`` with eta i.i.d. N(0, sigma^2).

    Always consumes ``n`` normal draws, so the stream layout does not depend
    on sigma.  The returned eta is the representable residual
    ``y - X @ beta`` (noise after the response rounds to double), which makes
    ``y == X @ beta + eta`` exact in floating point rather than only in real
    arithmetic.
    """
    n = X.shape[0]
    if X.shape[1] != beta.shape[0]:
        raise ValueError(
            f"dimension mismatch: X has {X.shape[1]} columns, beta has length {beta.shape[0]}"
        )
    draw = sigma * rng.normals(n)
    signal = X @ beta
    y = signal + draw
    eta = y - signal
    return y, eta
