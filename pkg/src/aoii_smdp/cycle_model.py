"""Per-cycle SMDP parameters from the dual-regime chain of each embedded value.

A cycle of type ``j`` starts one slot before source and monitor agree on
``j``.  It consists of an in-sync stretch (no cost) followed by an
out-of-sync stretch that ends at the next synchronisation.  The out-of-sync
stretch is a dual-regime chain: regime 1 tracks only the source state (no
transmission yet), regime 2 tracks (source state, channel phase) once the
AoII has reached the threshold.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .dr_dph import (
    MAX_PENALTY_DEGREE,
    DualRegimeChain,
    absorption_vectors,
    expected_penalty_sum,
    ordinary_moment,
)
from .errors import (
    ArgumentOutOfRange,
    DegenerateState,
    IsolatedState,
    NumericalError,
    ValidationError,
)
from .stochastic_core import (
    DERIVED_TOL,
    DphDistribution,
    _frozen,
    kron,
    validate_stochastic,
)

DEFAULT_TAU_MAX = 50


def eval_poly(coeffs, x):
    """Evaluate ``sum_k coeffs[k] x^k`` (ascending coefficients)."""
    out = np.zeros_like(np.asarray(x, dtype=float))
    for c in reversed(coeffs):
        out = out * x + c
    return out


@dataclass(frozen=True)
class SourceModel:
    """Irreducible DTMC source with one penalty polynomial per estimate value."""

    q: np.ndarray
    penalties: tuple

    def __post_init__(self):
        q = validate_stochastic(self.q, "stochastic")
        n = q.shape[0]
        if n < 2:
            raise ValidationError("the source needs at least two states")
        n_comp, _ = connected_components(q > 0, directed=True, connection="strong")
        if n_comp != 1:
            raise ValidationError("source transition matrix is not irreducible")
        for j in range(n):
            if q[j, j] >= 1.0:
                raise DegenerateState(f"state {j} is absorbing (q_jj = 1)")
        if len(self.penalties) != n:
            raise ValidationError(f"expected {n} penalty polynomials, got {len(self.penalties)}")
        pens = []
        grid = np.arange(1, 1001, dtype=float)
        for j, p in enumerate(self.penalties):
            w = tuple(float(c) for c in p) or (0.0,)
            if not all(np.isfinite(w)):
                raise ValidationError(f"penalty {j} has non-finite coefficients")
            if len(w) - 1 > MAX_PENALTY_DEGREE:
                raise ValidationError(f"penalty {j} has degree > {MAX_PENALTY_DEGREE}")
            if np.any(eval_poly(w, grid) < 0):
                raise ValidationError(f"penalty {j} is negative somewhere on t = 1..1000")
            pens.append(w)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "penalties", tuple(pens))

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def penalty_matrix(self) -> np.ndarray:
        """Penalty coefficients padded into an ``N x (K+1)`` array."""
        width = max(len(p) for p in self.penalties)
        out = np.zeros((self.n, width))
        for j, p in enumerate(self.penalties):
            out[j, : len(p)] = p
        return out


@dataclass(frozen=True)
class ChannelModel:
    """Forward-channel delay ``DPH(gamma, G)``."""

    dph: DphDistribution

    @classmethod
    def from_arrays(cls, gamma, g) -> "ChannelModel":
        return cls(DphDistribution.from_arrays(gamma, g))

    @property
    def gamma(self) -> np.ndarray:
        return self.dph.ipv

    @property
    def g(self) -> np.ndarray:
        return self.dph.tpts

    @property
    def h(self) -> np.ndarray:
        return self.dph.absorption

    @property
    def m(self) -> int:
        return self.dph.order


@dataclass(frozen=True)
class CycleChain:
    ev: int
    action: int
    chain: DualRegimeChain


def _others(n: int, j: int) -> list[int]:
    return [i for i in range(n) if i != j]


def regime1_blocks(source: SourceModel, j: int):
    """IPV, TPTS and APTS while the AoII is below the threshold."""
    q, n = source.q, source.n
    others = _others(n, j)
    leave = q[j, others]
    if leave.sum() <= 0.0:
        raise IsolatedState(f"state {j} never leaves itself")
    beta1 = leave / leave.sum()
    a1 = q[np.ix_(others, others)].copy()
    b1 = np.zeros((n - 1, n))
    b1[:, j] = q[others, j]
    return beta1, a1, b1


def regime2_blocks(source: SourceModel, channel: ChannelModel, j: int, legacy_absorption: bool = False):
    """TPTS and APTS once a transmission is under way, states ordered (source, phase).

    From ``(i, m)``: the source stays and the channel moves (``q_ii g_ml``); the
    source jumps to another mismatched ``i'`` and a fresh attempt starts
    (``q_ii' gamma_l``); the source jumps to ``j`` (sync, ``q_ij``); or the
    source stays and the packet lands (sync at ``i``, ``q_ii h_m``).
    ``legacy_absorption=True`` uses ``(1 - q_ii) h_m`` for the last entry,
    which breaks row-stochasticity and is rejected downstream.
    """
    q, n = source.q, source.n
    mm = channel.m
    others = _others(n, j)
    sub = q[np.ix_(others, others)]
    stay = np.diag(sub).copy()
    jump = sub - np.diag(stay)
    a2 = kron(np.diag(stay), channel.g) + kron(jump, np.outer(np.ones(mm), channel.gamma))
    b2 = np.zeros((len(others) * mm, n))
    deliver = (1.0 - stay) if legacy_absorption else stay
    for a, i in enumerate(others):
        rows = slice(a * mm, (a + 1) * mm)
        b2[rows, j] = q[i, j]
        b2[rows, i] = deliver[a] * channel.h
    return a2, b2


def boundary_matrix(channel: ChannelModel, n: int) -> np.ndarray:
    """Each regime-1 state ``i`` moves to ``(i, phase)`` with the channel IPV."""
    return kron(np.eye(n - 1), channel.gamma)


def build_cycle_chain(source: SourceModel, channel: ChannelModel, j: int, tau: int, legacy_absorption: bool = False) -> CycleChain:
    if not 0 <= j < source.n:
        raise ArgumentOutOfRange(f"state index {j} outside 0..{source.n - 1}")
    if tau < 1:
        raise ArgumentOutOfRange(f"threshold must be >= 1, got {tau}")
    beta1, a1, b1 = regime1_blocks(source, j)
    a2, b2 = regime2_blocks(source, channel, j, legacy_absorption)
    theta = boundary_matrix(channel, source.n)
    return CycleChain(j, int(tau), DualRegimeChain(beta1, int(tau), theta, a1, a2, b1, b2))


def age_cost(cycle: CycleChain, penalty) -> float:
    return expected_penalty_sum(cycle.chain.distribution, penalty)


def in_sync_mean(q_jj: float, legacy_dwell: bool = False) -> float:
    """Mean in-sync stretch: geometric with continuation probability ``q_jj``."""
    if q_jj >= 1.0:
        raise DegenerateState("q_jj = 1: the cycle never ends")
    if legacy_dwell:
        if q_jj <= 0.0:
            raise DegenerateState("legacy dwell formula undefined at q_jj = 0")
        return 1.0 / q_jj
    return 1.0 / (1.0 - q_jj)


def duration(cycle: CycleChain, source: SourceModel, legacy_dwell: bool = False) -> float:
    q_jj = source.q[cycle.ev, cycle.ev]
    return in_sync_mean(q_jj, legacy_dwell) + ordinary_moment(cycle.chain.distribution, 1)


def transmission_cost(cycle: CycleChain) -> float:
    """Expected number of slots with a transmission in flight."""
    dist = cycle.chain.distribution
    return float((dist.ipv2 @ dist.fundamental2).sum())


def transition_row(cycle: CycleChain) -> np.ndarray:
    """Next embedded value distribution, checked against the full absorption split."""
    chain, j = cycle.chain, cycle.ev
    dist = chain.distribution
    row = dist.ipv2 @ dist.fundamental2 @ chain.apts2
    row[j] = 0.0
    row[j] = 1.0 - row.sum()
    sigma1, sigma2 = absorption_vectors(chain)
    if np.max(np.abs(sigma1 + sigma2 - row)) > DERIVED_TOL:
        raise NumericalError(f"absorption split disagrees with complement row for EV {j}")
    return row


@dataclass
class SmdpParameters:
    """Tables indexed ``[j, tau - 1]`` (and ``[j, tau - 1, i]`` for transitions)."""

    age_cost: np.ndarray
    tx_cost: np.ndarray
    duration: np.ndarray
    transition: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.age_cost.shape[0]

    @property
    def tau_max(self) -> int:
        return self.age_cost.shape[1]

    def validate(self, tol: float = DERIVED_TOL) -> None:
        n, t = self.age_cost.shape
        for name in ("tx_cost", "duration"):
            if getattr(self, name).shape != (n, t):
                raise ValidationError(f"{name} table has shape {getattr(self, name).shape}")
        if self.transition.shape != (n, t, n):
            raise ValidationError(f"transition table has shape {self.transition.shape}")
        sums = self.transition.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > tol)
        if bad.size:
            j, k = bad[0]
            raise ValidationError(f"transition row (j={j + 1}, tau={k + 1}) sums to {float(sums[j, k])!r}")
        if np.any(self.transition < -tol):
            raise ValidationError("negative transition probability")
        if np.any(self.age_cost < -tol) or np.any(self.tx_cost < -tol):
            raise ValidationError("negative cost entry")
        if np.any(self.duration < 2.0 - tol):
            raise ValidationError("cycle durations must be at least 2 slots")

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "tau", "age_cost", "tx_cost", "duration"] + [f"rho_{i + 1}" for i in range(self.n)])
        for j in range(self.n):
            for k in range(self.tau_max):
                w.writerow(
                    [j + 1, k + 1, repr(float(self.age_cost[j, k])), repr(float(self.tx_cost[j, k])),
                     repr(float(self.duration[j, k]))]
                    + [repr(float(p)) for p in self.transition[j, k]]
                )
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "SmdpParameters":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        n = len(header) - 5
        tau_max = max(int(r[1]) for r in body)
        out = cls(np.zeros((n, tau_max)), np.zeros((n, tau_max)), np.zeros((n, tau_max)), np.zeros((n, tau_max, n)))
        for r in body:
            j, k = int(r[0]) - 1, int(r[1]) - 1
            out.age_cost[j, k], out.tx_cost[j, k], out.duration[j, k] = map(float, r[2:5])
            out.transition[j, k] = [float(x) for x in r[5:]]
        return out


def smdp_parameters(source: SourceModel, channel: ChannelModel, tau_max: int = DEFAULT_TAU_MAX) -> SmdpParameters:
    """Fill the ``a``, ``c``, ``d`` and ``rho`` tables for ``tau = 1..tau_max``."""
    if tau_max < 1:
        raise ArgumentOutOfRange(f"tau_max must be >= 1, got {tau_max}")
    n = source.n
    a = np.empty((n, tau_max))
    c = np.empty((n, tau_max))
    d = np.empty((n, tau_max))
    rho = np.empty((n, tau_max, n))
    for j in range(n):
        for k in range(tau_max):
            cyc = build_cycle_chain(source, channel, j, k + 1)
            a[j, k] = age_cost(cyc, source.penalties[j])
            c[j, k] = transmission_cost(cyc)
            d[j, k] = duration(cyc, source)
            rho[j, k] = transition_row(cyc)
    params = SmdpParameters(_frozen(a), _frozen(c), _frozen(d), _frozen(rho))
    params.validate()
    return params
