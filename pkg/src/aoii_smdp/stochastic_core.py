"""Validated (sub-)stochastic matrices, combinatorial helpers and plain DPH laws.

A discrete phase-type law ``DPH(beta, A)`` is the number of steps an absorbing
Markov chain started from ``beta`` spends among its transient phases; its pmf is
``beta A^(t-1) (1 - A 1)`` for ``t >= 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.linalg

from .errors import (
    ArgumentOutOfRange,
    NegativeEntry,
    NotStrictlySubstochastic,
    RowSumViolation,
    SingularMatrix,
    ValidationError,
)

PROB_TOL = 1e-12
DERIVED_TOL = 1e-10
RCOND_MIN = 1e-12
MAX_COMBINATORIAL = 64


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def validate_stochastic(matrix, mode: str = "stochastic", tol: float = PROB_TOL) -> np.ndarray:
    """Check a square probability matrix and return a read-only float copy.

    ``mode="stochastic"`` requires unit row sums. ``mode="substochastic"``
    requires row sums at most one and a spectral radius strictly below one,
    i.e. the chain must leave the transient set eventually.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix contains non-finite entries")
    neg = np.argwhere(a < 0)
    if neg.size:
        i, j = neg[0]
        raise NegativeEntry(f"negative entry {float(a[i, j])!r} at row {i}, column {j}")
    sums = a.sum(axis=1)
    if mode == "stochastic":
        bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
        if bad.size:
            raise RowSumViolation(f"row {bad[0]} sums to {float(sums[bad[0]])!r}, expected 1")
    elif mode == "substochastic":
        bad = np.flatnonzero(sums > 1.0 + tol)
        if bad.size:
            raise RowSumViolation(f"row {bad[0]} sums to {float(sums[bad[0]])!r} > 1")
        if a.size and np.all(np.abs(sums - 1.0) <= tol):
            raise NotStrictlySubstochastic("every row sums to 1; the chain never absorbs")
        if a.size and spectral_radius(a) >= 1.0 - tol:
            raise NotStrictlySubstochastic("spectral radius >= 1; some phases never absorb")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return _frozen(a)


def validate_probability_vector(vec, tol: float = PROB_TOL, name: str = "vector") -> np.ndarray:
    v = np.asarray(vec, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} contains non-finite entries")
    if np.any(v < 0):
        i = int(np.flatnonzero(v < 0)[0])
        raise NegativeEntry(f"{name} has negative entry {float(v[i])!r} at index {i}")
    if abs(v.sum() - 1.0) > tol:
        raise RowSumViolation(f"{name} sums to {float(v.sum())!r}, expected 1")
    return _frozen(v)


def spectral_radius(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def kron(a, b) -> np.ndarray:
    return np.kron(np.atleast_2d(np.asarray(a, dtype=float)), np.atleast_2d(np.asarray(b, dtype=float)))


def fundamental_matrix(a: np.ndarray) -> np.ndarray:
    """Return ``(I - A)^-1`` via dense LU, refusing ill-conditioned systems."""
    a = np.asarray(a, dtype=float)
    k = a.shape[0]
    if k == 0:
        return np.zeros((0, 0))
    m = np.eye(k) - a
    if 1.0 / np.linalg.cond(m, 1) < RCOND_MIN:
        raise SingularMatrix("I - A is numerically singular")
    lu = scipy.linalg.lu_factor(m, check_finite=False)
    return scipy.linalg.lu_solve(lu, np.eye(k), check_finite=False)


@lru_cache(maxsize=None)
def _stirling2(m: int, r: int) -> int:
    if m == r:
        return 1
    if r == 0 or r > m:
        return 0
    return r * _stirling2(m - 1, r) + _stirling2(m - 1, r - 1)


def stirling2(m: int, r: int) -> int:
    """Stirling number of the second kind, exact integer arithmetic."""
    if not (0 <= m <= MAX_COMBINATORIAL and 0 <= r <= MAX_COMBINATORIAL):
        raise ArgumentOutOfRange(f"stirling2 needs 0 <= r <= m <= {MAX_COMBINATORIAL}, got ({m}, {r})")
    return _stirling2(int(m), int(r))


def falling_factorial(t: int, m: int) -> int:
    """``t (t-1) ... (t-m+1)``; the empty product is 1."""
    if m < 0:
        raise ArgumentOutOfRange(f"falling_factorial needs m >= 0, got {m}")
    out = 1
    for k in range(m):
        out *= t - k
    return out


@dataclass(frozen=True)
class DphDistribution:
    """``DPH(ipv, tpts)`` with its absorption vector ``1 - tpts 1``."""

    ipv: np.ndarray
    tpts: np.ndarray
    absorption: np.ndarray

    @classmethod
    def from_arrays(cls, ipv, tpts) -> "DphDistribution":
        a = validate_stochastic(np.atleast_2d(tpts), "substochastic")
        beta = validate_probability_vector(ipv, name="ipv")
        if beta.shape[0] != a.shape[0]:
            raise ValidationError(f"ipv has {beta.shape[0]} phases but tpts has {a.shape[0]}")
        absorption = 1.0 - a.sum(axis=1)
        absorption[np.abs(absorption) < 1e-15] = 0.0
        return cls(beta, a, _frozen(absorption))

    @property
    def order(self) -> int:
        return self.tpts.shape[0]


def dph_pmf(dist: DphDistribution, t: int) -> float:
    if t < 1:
        raise ArgumentOutOfRange(f"pmf support starts at 1, got t={t}")
    return float(dist.ipv @ np.linalg.matrix_power(dist.tpts, t - 1) @ dist.absorption)


def dph_pmf_range(dist: DphDistribution, t_max: int) -> np.ndarray:
    """pmf values for t = 1..t_max using a running vector product."""
    out = np.empty(t_max)
    v = np.array(dist.ipv)
    for t in range(t_max):
        out[t] = v @ dist.absorption
        v = v @ dist.tpts
    return out


def dph_survival(dist: DphDistribution, t: int) -> float:
    """``P(T > t) = beta A^t 1``."""
    return float(dist.ipv @ np.linalg.matrix_power(dist.tpts, t) @ np.ones(dist.order))


def dph_factorial_moment(dist: DphDistribution, m: int) -> float:
    """``E[T (T-1) ... (T-m+1)] = m! beta A^(m-1) (I-A)^-m 1``."""
    if m < 1:
        raise ArgumentOutOfRange(f"factorial moment order must be >= 1, got {m}")
    n = fundamental_matrix(dist.tpts)
    v = dist.ipv @ np.linalg.matrix_power(dist.tpts, m - 1) @ np.linalg.matrix_power(n, m)
    return float(factorial(m) * v.sum())


def make_rng(seed: int, replication: int = 0) -> np.random.Generator:
    """Counter-based stream for replication ``replication`` of a seeded run."""
    return np.random.Generator(np.random.Philox((int(seed) + int(replication)) % 2**64))


def _transition_table(tpts: np.ndarray, exits: np.ndarray) -> np.ndarray:
    # cumulative row distribution over [transient phases..., exit columns...]
    full = np.hstack([tpts, np.atleast_2d(exits).reshape(tpts.shape[0], -1)])
    cum = np.cumsum(full, axis=1)
    cum[:, -1] = np.inf
    return cum


def _draw(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    # first column whose cumulative mass exceeds u, row by row
    return (u[:, None] >= cum_rows).sum(axis=1)


def dph_sample(dist: DphDistribution, rng: np.random.Generator) -> int:
    """One absorption time, obtained by walking the phases."""
    cum0 = np.cumsum(dist.ipv)
    phase = min(int(np.searchsorted(cum0, rng.random(), side="right")), dist.order - 1)
    table = _transition_table(dist.tpts, dist.absorption)
    t = 1
    while True:
        nxt = int(np.searchsorted(table[phase], rng.random(), side="right"))
        if nxt >= dist.order:
            return t
        phase = nxt
        t += 1


def dph_sample_many(dist: DphDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent absorption times, simulated in lock-step."""
    cum0 = np.cumsum(dist.ipv)
    cum0[-1] = np.inf
    phase = _draw(np.broadcast_to(cum0, (n, cum0.size)), rng.random(n))
    table = _transition_table(dist.tpts, dist.absorption)
    times = np.zeros(n, dtype=np.int64)
    alive = np.arange(n)
    t = 0
    while alive.size:
        t += 1
        nxt = _draw(table[phase[alive]], rng.random(alive.size))
        done = nxt >= dist.order
        times[alive[done]] = t
        phase[alive[~done]] = nxt[~done]
        alive = alive[~done]
    return times
