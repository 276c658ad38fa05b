"""Average-cost SMDP over embedded values with threshold actions.

States are the embedded values ``0..N-1``; the action in state ``j`` is the
threshold ``tau_j`` in ``1..tau_max``.  The per-cycle reward is
``r = a + lam * c``, and the long-run cost per slot is the gain ``g`` solving
``v_j + g d_j = r_j + sum_i rho_ji v_i`` with the last bias pinned to zero.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .cycle_model import SmdpParameters
from .errors import (
    ArgumentOutOfRange,
    BoundaryWarning,
    InvalidPolicy,
    NotUnichain,
    SearchSpaceTooLarge,
    SingularSystem,
)

TIE_TOL = 1e-12
MAX_EXHAUSTIVE = 10**7


@dataclass(frozen=True)
class Policy:
    thresholds: tuple

    def __post_init__(self):
        taus = tuple(int(t) for t in self.thresholds)
        if any(t < 1 for t in taus) or any(int(t) != t for t in self.thresholds):
            raise InvalidPolicy(f"thresholds must be positive integers, got {self.thresholds!r}")
        object.__setattr__(self, "thresholds", taus)

    @classmethod
    def uniform(cls, n: int, tau: int) -> "Policy":
        return cls((tau,) * n)

    def check(self, params: SmdpParameters) -> None:
        if len(self.thresholds) != params.n:
            raise InvalidPolicy(f"policy has {len(self.thresholds)} thresholds, params have {params.n} states")
        if max(self.thresholds) > params.tau_max:
            raise InvalidPolicy(f"threshold above tau_max={params.tau_max}")

    def __str__(self) -> str:
        return ",".join(map(str, self.thresholds))


@dataclass
class SolverResult:
    policy: Policy
    gain: float
    bias: np.ndarray
    iterations: int
    trace: list = field(default_factory=list)
    lam: float = 0.0
    at_boundary: bool = False

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "lambda": self.lam,
            "policy": list(self.policy.thresholds),
            "gain": self.gain,
            "bias": [float(b) for b in self.bias],
            "iterations": self.iterations,
            "trace": [float(g) for g in self.trace],
            "at_boundary": self.at_boundary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(
            [repr(float(self.lam)), repr(float(self.gain)), self.iterations] + list(self.policy.thresholds)
        )
        return buf.getvalue()


def _induced(params: SmdpParameters, lam: float, policy: Policy):
    idx = np.arange(params.n)
    k = np.asarray(policy.thresholds) - 1
    r = params.age_cost[idx, k] + lam * params.tx_cost[idx, k]
    return r, params.duration[idx, k], params.transition[idx, k]


def check_unichain(p: np.ndarray) -> None:
    """Require exactly one closed communicating class."""
    n_comp, labels = connected_components(p > 0, directed=True, connection="strong")
    closed = 0
    for c in range(n_comp):
        members = labels == c
        if p[np.ix_(members, ~members)].sum() == 0.0:
            closed += 1
    if closed != 1:
        raise NotUnichain(f"embedded chain has {closed} closed classes")


def policy_evaluate(params: SmdpParameters, lam: float, policy: Policy) -> tuple[float, np.ndarray]:
    """Gain and bias of a fixed policy (bias of the last state pinned to 0)."""
    if lam < 0:
        raise ArgumentOutOfRange(f"lambda must be nonnegative, got {lam}")
    policy.check(params)
    r, d, p = _induced(params, lam, policy)
    check_unichain(p)
    n = params.n
    # unknowns: v_0..v_{n-2}, g   (v_{n-1} = 0)
    m = np.zeros((n, n))
    m[:, : n - 1] = np.eye(n)[:, : n - 1] - p[:, : n - 1]
    m[:, n - 1] = d
    if 1.0 / np.linalg.cond(m, 1) < 1e-13:
        raise SingularSystem("evaluation system is singular")
    sol = scipy.linalg.solve(m, r)
    bias = np.append(sol[: n - 1], 0.0)
    return float(sol[n - 1]), bias


def stationary_distribution(p: np.ndarray) -> np.ndarray:
    n = p.shape[0]
    m = np.vstack([p.T - np.eye(n), np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    return np.linalg.lstsq(m, rhs, rcond=None)[0]


def renewal_reward_gain(params: SmdpParameters, lam: float, policy: Policy) -> float:
    """Independent gain: stationary-weighted reward over stationary-weighted duration."""
    r, d, p = _induced(params, lam, policy)
    pi = stationary_distribution(p)
    return float(pi @ r / (pi @ d))


def policy_improve(params: SmdpParameters, lam: float, gain: float, bias: np.ndarray) -> Policy:
    """Greedy thresholds; ties go to the smallest threshold."""
    test = params.age_cost + lam * params.tx_cost - gain * params.duration + params.transition @ bias
    taus = []
    for row in test:
        best = row.min()
        tol = TIE_TOL * max(1.0, abs(best))
        taus.append(int(np.flatnonzero(row <= best + tol)[0]) + 1)
    return Policy(tuple(taus))


def _warn_boundary(policy: Policy, tau_max: int) -> bool:
    hit = [j + 1 for j, t in enumerate(policy.thresholds) if t == tau_max]
    if hit:
        warnings.warn(
            f"optimal threshold at tau_max={tau_max} for states {hit}; the search may be truncated",
            BoundaryWarning,
            stacklevel=3,
        )
    return bool(hit)


def policy_iteration(params: SmdpParameters, lam: float, initial: Policy | None = None, max_iter: int = 1000) -> SolverResult:
    policy = initial or Policy.uniform(params.n, 1)
    seen = set()
    trace = []
    best = None
    it = 0
    while policy.thresholds not in seen and it < max_iter:
        seen.add(policy.thresholds)
        gain, bias = policy_evaluate(params, lam, policy)
        trace.append(gain)
        it += 1
        if best is None or gain < best[1] - TIE_TOL * max(1.0, abs(gain)):
            best = (policy, gain, bias)
        policy = policy_improve(params, lam, gain, bias)
    policy, gain, bias = best
    boundary = _warn_boundary(policy, params.tau_max)
    return SolverResult(policy, gain, bias, it, trace, lam, boundary)


def uniform_threshold_search(params: SmdpParameters, lam: float, tau_max: int | None = None) -> tuple[int, float]:
    """Best single system-wide threshold (smallest on ties)."""
    tau_max = tau_max or params.tau_max
    best_tau, best_gain = 0, np.inf
    for tau in range(1, tau_max + 1):
        gain, _ = policy_evaluate(params, lam, Policy.uniform(params.n, tau))
        if gain < best_gain - TIE_TOL * max(1.0, abs(gain)):
            best_tau, best_gain = tau, gain
    if best_tau == tau_max:
        warnings.warn(f"single-threshold optimum at tau_max={tau_max}; the search may be truncated",
                      BoundaryWarning, stacklevel=2)
    return best_tau, best_gain


def exhaustive_search(params: SmdpParameters, lam: float, tau_max: int | None = None) -> tuple[Policy, float]:
    tau_max = tau_max or params.tau_max
    if tau_max**params.n > MAX_EXHAUSTIVE:
        raise SearchSpaceTooLarge(f"{tau_max}^{params.n} policies exceeds {MAX_EXHAUSTIVE}")
    best, best_gain = None, np.inf
    for taus in itertools.product(range(1, tau_max + 1), repeat=params.n):
        pol = Policy(taus)
        gain, _ = policy_evaluate(params, lam, pol)
        if gain < best_gain - TIE_TOL * max(1.0, abs(gain)):
            best, best_gain = pol, gain
    _warn_boundary(best, tau_max)
    return best, best_gain
