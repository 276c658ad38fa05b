"""Dual-regime absorbing Markov chains and their absorption-time law.

The chain starts in regime 1 (``K1`` transient states, blocks ``A1``/``B1``).
If it has not been absorbed when the elapsed time reaches ``threshold - 1`` the
boundary matrix ``btm`` maps the surviving mass onto the ``K2`` transient
states of regime 2 (blocks ``A2``/``B2``).  Both regimes share ``L`` absorbing
states.  All indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from math import comb, factorial

import numpy as np

from .errors import ArgumentOutOfRange, ValidationError
from .stochastic_core import (
    PROB_TOL,
    _draw,
    _frozen,
    falling_factorial,
    fundamental_matrix,
    stirling2,
    validate_probability_vector,
    validate_stochastic,
)

MAX_MOMENT = 10
MAX_PENALTY_DEGREE = 8


def _check_blocks(tpts: np.ndarray, apts: np.ndarray, name: str) -> None:
    if apts.shape[0] != tpts.shape[0]:
        raise ValidationError(f"{name}: APTS has {apts.shape[0]} rows, TPTS has {tpts.shape[0]}")
    if np.any(apts < 0):
        raise ValidationError(f"{name}: APTS has negative entries")
    sums = tpts.sum(axis=1) + apts.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL)
    if bad.size:
        raise ValidationError(f"{name}: row {bad[0]} of [A|B] sums to {float(sums[bad[0]])!r}")


@dataclass(frozen=True)
class DualRegimeChain:
    """The 7-tuple ``(ipv1, threshold, btm, tpts1, tpts2, apts1, apts2)``."""

    ipv1: np.ndarray
    threshold: int
    btm: np.ndarray
    tpts1: np.ndarray
    tpts2: np.ndarray
    apts1: np.ndarray
    apts2: np.ndarray

    def __post_init__(self):
        tau = int(self.threshold)
        if tau < 1 or tau != self.threshold:
            raise ArgumentOutOfRange(f"threshold must be a positive integer, got {self.threshold!r}")
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("threshold", tau)
        set_("ipv1", validate_probability_vector(self.ipv1, name="ipv1"))
        set_("tpts1", validate_stochastic(np.atleast_2d(self.tpts1), "substochastic"))
        set_("tpts2", validate_stochastic(np.atleast_2d(self.tpts2), "substochastic"))
        set_("apts1", _frozen(np.atleast_2d(self.apts1)))
        set_("apts2", _frozen(np.atleast_2d(self.apts2)))
        set_("btm", _frozen(np.atleast_2d(self.btm)))
        k1, k2 = self.tpts1.shape[0], self.tpts2.shape[0]
        if self.ipv1.shape[0] != k1:
            raise ValidationError(f"ipv1 has length {self.ipv1.shape[0]}, expected K1={k1}")
        if self.btm.shape != (k1, k2):
            raise ValidationError(f"btm has shape {self.btm.shape}, expected {(k1, k2)}")
        if np.any(self.btm < 0) or np.any(np.abs(self.btm.sum(axis=1) - 1.0) > PROB_TOL):
            raise ValidationError("btm rows must be probability vectors")
        if self.apts1.shape[1] != self.apts2.shape[1]:
            raise ValidationError("regimes must share the same absorbing states")
        _check_blocks(self.tpts1, self.apts1, "regime 1")
        _check_blocks(self.tpts2, self.apts2, "regime 2")

    @property
    def k1(self) -> int:
        return self.tpts1.shape[0]

    @property
    def k2(self) -> int:
        return self.tpts2.shape[0]

    @property
    def n_absorbing(self) -> int:
        return self.apts1.shape[1]

    @cached_property
    def distribution(self) -> "DrDphDistribution":
        return DrDphDistribution(
            self.ipv1, self.threshold, self.btm, self.tpts1, self.tpts2, regime2_ipv(self)
        )


@dataclass(frozen=True)
class DrDphDistribution:
    """Absorption-time law of a :class:`DualRegimeChain` plus the cached regime-2 IPV."""

    ipv1: np.ndarray
    threshold: int
    btm: np.ndarray
    tpts1: np.ndarray
    tpts2: np.ndarray
    ipv2: np.ndarray

    @cached_property
    def exit1(self) -> np.ndarray:
        return 1.0 - self.tpts1.sum(axis=1)

    @cached_property
    def exit2(self) -> np.ndarray:
        return 1.0 - self.tpts2.sum(axis=1)

    @cached_property
    def fundamental2(self) -> np.ndarray:
        return fundamental_matrix(self.tpts2)


def regime2_ipv(chain: DualRegimeChain) -> np.ndarray:
    """``ipv1 A1^(threshold-1) btm``: mass entering regime 2."""
    v = chain.ipv1 @ np.linalg.matrix_power(chain.tpts1, chain.threshold - 1) @ chain.btm
    return _frozen(v)


def drdph_pmf(dist: DrDphDistribution, t: int) -> float:
    if t < 1:
        raise ArgumentOutOfRange(f"pmf support starts at 1, got t={t}")
    if t < dist.threshold:
        return float(dist.ipv1 @ np.linalg.matrix_power(dist.tpts1, t - 1) @ dist.exit1)
    return float(dist.ipv2 @ np.linalg.matrix_power(dist.tpts2, t - dist.threshold) @ dist.exit2)


def drdph_tail(dist: DrDphDistribution, t: int) -> float:
    """``P(T > t)`` in closed form, for ``t >= threshold - 1``."""
    if t < dist.threshold - 1:
        raise ArgumentOutOfRange("closed-form tail only covers regime 2")
    v = dist.ipv2 @ np.linalg.matrix_power(dist.tpts2, t - dist.threshold + 1)
    return float(v.sum())


def absorption_vectors(chain: DualRegimeChain) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities of landing in each absorbing state during regime 1 and regime 2."""
    k1 = chain.k1
    n1 = fundamental_matrix(chain.tpts1)
    reach1 = np.eye(k1) - np.linalg.matrix_power(chain.tpts1, chain.threshold - 1)
    sigma1 = chain.ipv1 @ reach1 @ n1 @ chain.apts1
    sigma2 = chain.distribution.ipv2 @ chain.distribution.fundamental2 @ chain.apts2
    return sigma1, sigma2


def _regime1_factorial_part(dist: DrDphDistribution, m: int) -> float:
    total = 0.0
    v = np.array(dist.ipv1)
    for t in range(1, dist.threshold):
        total += falling_factorial(t, m) * float(v @ dist.exit1)
        v = v @ dist.tpts1
    return total


def _regime2_factorial_part(dist: DrDphDistribution, m: int, base: int, shift: int) -> float:
    a2, n2 = dist.tpts2, dist.fundamental2
    k = a2.shape[0]
    series = np.zeros((k, k))
    a_pow, n_pow = np.eye(k), n2
    for r in range(m + 1):
        coef = comb(m, r) * falling_factorial(base, m - r) * factorial(r)
        if coef:
            series += float(coef) * (a_pow @ n_pow)
        a_pow = a_pow @ a2
        n_pow = n_pow @ n2
    if shift:
        series = series @ np.linalg.matrix_power(a2, shift)
    return float(dist.ipv2 @ series @ dist.exit2)


def factorial_moment(dist: DrDphDistribution, m: int, legacy_form: bool = False) -> float:
    """``E[T (T-1) ... (T-m+1)]``, with ``m = 0`` giving 1.

    The regime-2 series ``sum_s (s+tau)^(m) ipv2 A2^s exit2`` is closed by
    writing ``(s+tau)^(m) = sum_r C(m,r) tau^(m-r) s^(r)`` and using
    ``sum_s s^(r) A^s = r! A^r (I-A)^-(r+1)``.  That holds for every ``m``.
    ``legacy_form=True`` evaluates the alternative ``m > tau`` closed form
    (``m^(m-r)`` in place of ``tau^(m-r)`` and a trailing ``A2^(m-tau)``).  It
    is the same series shifted by ``m - tau`` slots; the skipped terms vanish
    because ``(s+tau)^(m) = 0`` for ``s + tau < m``, so both paths agree.
    """
    if not 0 <= m <= MAX_MOMENT:
        raise ArgumentOutOfRange(f"moment order must be in 0..{MAX_MOMENT}, got {m}")
    if m == 0:
        return 1.0
    tau = dist.threshold
    if legacy_form and m > tau:
        part2 = _regime2_factorial_part(dist, m, base=m, shift=m - tau)
    else:
        part2 = _regime2_factorial_part(dist, m, base=tau, shift=0)
    return _regime1_factorial_part(dist, m) + part2


def ordinary_moment(dist: DrDphDistribution, m: int, legacy_form: bool = False) -> float:
    """``E[T^m]`` from factorial moments through Stirling numbers of the second kind."""
    if not 1 <= m <= MAX_MOMENT:
        raise ArgumentOutOfRange(f"moment order must be in 1..{MAX_MOMENT}, got {m}")
    return sum(stirling2(m, r) * factorial_moment(dist, r, legacy_form) for r in range(m + 1))


@lru_cache(maxsize=None)
def faulhaber_coefficients(k: int) -> tuple[Fraction, ...]:
    """Exact coefficients ``c`` with ``sum_{t=1..T} t^k = sum_n c[n] T^n``.

    ``t^k = sum_r S(k,r) t^(r)`` and ``sum_{t=1..T} t^(r) = (T+1)^(r+1) / (r+1)``
    for ``r >= 1``; the ``k = 0`` sum is just ``T``.
    """
    if k < 0:
        raise ArgumentOutOfRange(f"power must be >= 0, got {k}")
    coeffs = [Fraction(0)] * (k + 2)
    if k == 0:
        coeffs[1] = Fraction(1)
        return tuple(coeffs)
    for r in range(1, k + 1):
        # (T+1) T (T-1) ... (T-r+1) as an ascending coefficient list
        poly = [Fraction(1), Fraction(1)]
        for root in range(r):
            poly = [Fraction(0)] + poly
            for n in range(len(poly) - 1):
                poly[n] -= root * poly[n + 1]
        scale = Fraction(stirling2(k, r), r + 1)
        for n, c in enumerate(poly):
            coeffs[n] += scale * c
    return tuple(coeffs)


def expected_penalty_sum(dist: DrDphDistribution, poly) -> float:
    """``E[sum_{t=1..T} f(t)]`` for ``f(t) = sum_k poly[k] t^k``."""
    w = [float(c) for c in poly]
    while len(w) > 1 and w[-1] == 0.0:
        w.pop()
    degree = len(w) - 1
    if degree > MAX_PENALTY_DEGREE:
        raise ArgumentOutOfRange(f"penalty degree must be <= {MAX_PENALTY_DEGREE}, got {degree}")
    if not all(np.isfinite(w)):
        raise ValidationError("penalty coefficients must be finite")
    if all(c == 0.0 for c in w):
        return 0.0
    mu = [1.0] + [ordinary_moment(dist, n) for n in range(1, degree + 2)]
    total = 0.0
    for k, wk in enumerate(w):
        if wk == 0.0:
            continue
        total += wk * sum(float(c) * mu[n] for n, c in enumerate(faulhaber_coefficients(k)) if c)
    return total


def _chain_tables(chain: DualRegimeChain):
    cum1 = np.cumsum(np.hstack([chain.tpts1, chain.apts1]), axis=1)
    cum2 = np.cumsum(np.hstack([chain.tpts2, chain.apts2]), axis=1)
    cum1[:, -1] = np.inf
    cum2[:, -1] = np.inf
    cum0 = np.cumsum(chain.ipv1)
    cum0[-1] = np.inf
    cumb = np.cumsum(chain.btm, axis=1)
    cumb[:, -1] = np.inf
    return cum0, cum1, cumb, cum2


def drdph_sample(chain: DualRegimeChain, rng: np.random.Generator) -> tuple[int, int, int]:
    """Simulate one path: ``(absorption_time, absorbing_state, regime2_slots)``."""
    t, state, r2 = drdph_sample_many(chain, 1, rng)
    return int(t[0]), int(state[0]), int(r2[0])


def drdph_sample_many(chain: DualRegimeChain, n: int, rng: np.random.Generator):
    """Vectorised :func:`drdph_sample` over ``n`` independent paths.

    Regime 1 governs the transitions out of elapsed times ``0..threshold-2``;
    at elapsed time ``threshold-1`` survivors are moved by ``btm`` and regime 2
    governs from there on.  ``regime2_slots`` counts elapsed times spent in
    regime 2, so it equals ``absorption_time - threshold + 1`` or 0.
    """
    cum0, cum1, cumb, cum2 = _chain_tables(chain)
    k1, k2, tau = chain.k1, chain.k2, chain.threshold
    times = np.zeros(n, dtype=np.int64)
    landed = np.zeros(n, dtype=np.int64)
    state = _draw(np.broadcast_to(cum0, (n, cum0.size)), rng.random(n))
    alive = np.arange(n)
    t = 0
    while alive.size and t < tau - 1:
        nxt = _draw(cum1[state[alive]], rng.random(alive.size))
        t += 1
        done = nxt >= k1
        times[alive[done]] = t
        landed[alive[done]] = nxt[done] - k1
        state[alive[~done]] = nxt[~done]
        alive = alive[~done]
    if alive.size:
        state[alive] = _draw(cumb[state[alive]], rng.random(alive.size))
    while alive.size:
        nxt = _draw(cum2[state[alive]], rng.random(alive.size))
        t += 1
        done = nxt >= k2
        times[alive[done]] = t
        landed[alive[done]] = nxt[done] - k2
        state[alive[~done]] = nxt[~done]
        alive = alive[~done]
    regime2 = np.maximum(times - tau + 1, 0)
    return times, landed, regime2
