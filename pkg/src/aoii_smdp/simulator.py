"""Slot-level Monte-Carlo simulation of source, channel, monitor and policy.

Per slot ``t`` (all four uniforms are drawn every slot so runs that differ
only in the policy stay coupled):

1. policy: on a mismatch with an idle channel, start a transmission if the
   trigger fires (``AoII >= tau[estimate]``, or a Bernoulli(xi) coin for
   random sampling); the first phase is drawn from ``gamma``;
2. channel: an active transmission moves by ``G`` or is delivered with ``h``;
3. source: ``X`` moves by ``Q``; any change of ``X`` aborts the transmission
   in flight, including one delivered in this slot;
4. commit: a surviving delivery sets the estimate to ``X``; the AoII resets
   on agreement and grows by one otherwise.

The slot cost is ``f_estimate(AoII)`` on mismatched slots plus ``lam`` when a
transmission is in flight.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from scipy import stats

from .cycle_model import ChannelModel, SourceModel
from .errors import InvalidPolicy, MinimumSampleSize
from .smdp_solver import Policy
from .stochastic_core import make_rng

MIN_HORIZON = 10_000
MIN_REPLICATIONS = 3
MIN_CYCLES = 10_000
MAX_TRACE = 100_000
WARMUP_FRACTION = 0.01

MODE_THRESHOLD = 0
MODE_RANDOM = 1


@dataclass(frozen=True)
class SimPolicy:
    """``multi`` (per-estimate thresholds), ``uniform`` (one threshold) or ``rs`` (coin with prob ``xi``)."""

    kind: str
    thresholds: tuple = ()
    xi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("multi", "uniform", "rs"):
            raise InvalidPolicy(f"unknown policy kind {self.kind!r}")
        if self.kind == "rs":
            if not 0.0 <= self.xi <= 1.0:
                raise InvalidPolicy(f"sampling probability must lie in [0, 1], got {self.xi}")
        else:
            if not self.thresholds or any(int(t) != t or t < 1 for t in self.thresholds):
                raise InvalidPolicy(f"thresholds must be positive integers, got {self.thresholds!r}")
            if self.kind == "uniform" and len(self.thresholds) != 1:
                raise InvalidPolicy("uniform policy takes exactly one threshold")

    @classmethod
    def multi(cls, thresholds) -> "SimPolicy":
        if isinstance(thresholds, Policy):
            thresholds = thresholds.thresholds
        return cls("multi", tuple(thresholds))

    @classmethod
    def uniform(cls, tau: int) -> "SimPolicy":
        return cls("uniform", (tau,))

    @classmethod
    def rs(cls, xi: float) -> "SimPolicy":
        return cls("rs", (), float(xi))

    @classmethod
    def parse(cls, text: str) -> "SimPolicy":
        """Parse ``multi:1,2,3``, ``uniform:2`` or ``rs:0.4``."""
        kind, _, arg = text.partition(":")
        try:
            values = [float(arg)] if kind == "rs" else [int(a) for a in arg.split(",")]
        except ValueError as exc:
            raise InvalidPolicy(f"cannot parse policy {text!r}") from exc
        if kind == "rs":
            return cls.rs(values[0])
        if kind in ("multi", "uniform"):
            return cls(kind, tuple(values))
        raise InvalidPolicy(f"unknown policy kind in {text!r}")

    def threshold_vector(self, n: int) -> np.ndarray:
        if self.kind == "rs":
            return np.ones(n, dtype=np.int64)
        if self.kind == "uniform":
            return np.full(n, self.thresholds[0], dtype=np.int64)
        if len(self.thresholds) != n:
            raise InvalidPolicy(f"policy has {len(self.thresholds)} thresholds for {n} states")
        return np.asarray(self.thresholds, dtype=np.int64)

    def __str__(self) -> str:
        if self.kind == "rs":
            return f"rs:{self.xi!r}"
        return f"{self.kind}:{','.join(map(str, self.thresholds))}"


@njit(cache=True, inline="always")
def _pick(cum, u):
    k = 0
    while u >= cum[k]:
        k += 1
    return k


@njit(cache=True, inline="always")
def _penalty(pen, j, age):
    out = 0.0
    for k in range(pen.shape[1] - 1, -1, -1):
        out = out * age + pen[j, k]
    return out


@njit(cache=True, inline="always")
def _slot(x, xhat, aoii, phase, taus, mode, xi, strict, qcum, gcum, gamma_cum, m, rng):
    """Advance one slot; returns (x, xhat, aoii, next_phase, active_phase)."""
    u_trig = rng.random()
    u_phase = rng.random()
    u_chan = rng.random()
    u_src = rng.random()
    if aoii > 0 and phase < 0:
        if mode == MODE_RANDOM:
            fire = u_trig < xi
        elif strict:
            fire = aoii > taus[xhat]
        else:
            fire = aoii >= taus[xhat]
        if fire:
            phase = _pick(gamma_cum, u_phase)
    active = phase
    tx = phase >= 0
    delivered = False
    if tx:
        nxt = _pick(gcum[phase], u_chan)
        if nxt >= m:
            delivered = True
            phase = -1
        else:
            phase = nxt
    x_new = _pick(qcum[x], u_src)
    if x_new != x and tx:
        delivered = False
        phase = -1
    if delivered:
        xhat = x_new
    if x_new == xhat:
        aoii = 0
    else:
        aoii += 1
    return x_new, xhat, aoii, phase, active


@njit(cache=True)
def _run_path(n_slots, warmup, taus, mode, xi, strict, charge_in_sync, qcum, gcum, gamma_cum, pen,
              rng, trace, n_ev):
    m = gcum.shape[0]
    x = 0
    xhat = 0
    aoii = 0
    phase = -1
    pen_sum = 0.0
    tx_sum = 0
    cyc_count = np.zeros(n_ev, dtype=np.int64)
    cyc_dur = np.zeros(n_ev)
    cyc_tx = np.zeros(n_ev)
    cyc_pen = np.zeros(n_ev)
    cyc_next = np.zeros((n_ev, n_ev), dtype=np.int64)
    ev = -1
    ev_start = 0
    run_tx = 0
    run_pen = 0.0
    n_trace = trace.shape[0]
    for t in range(n_slots):
        age = aoii
        est = xhat
        x0 = x
        x, xhat, aoii, phase, active = _slot(x, xhat, aoii, phase, taus, mode, xi, strict,
                                             qcum, gcum, gamma_cum, m, rng)
        tx = active >= 0
        if age > 0 or charge_in_sync:
            cost = _penalty(pen, est, age)
        else:
            cost = 0.0
        if t < n_trace:
            trace[t, 0] = t
            trace[t, 1] = x0
            trace[t, 2] = est
            trace[t, 3] = age
            trace[t, 4] = active
            trace[t, 5] = cost
            trace[t, 6] = 1.0 if tx else 0.0
        if t >= warmup:
            pen_sum += cost
            if tx:
                tx_sum += 1
        if tx:
            run_tx += 1
        run_pen += cost
        if age > 0 and aoii == 0:
            # slot t is an embedded point; the next embedded value is x
            if ev >= 0:
                cyc_count[ev] += 1
                cyc_dur[ev] += t - ev_start
                cyc_tx[ev] += run_tx
                cyc_pen[ev] += run_pen
                cyc_next[ev, x] += 1
            ev = x
            ev_start = t
            run_tx = 0
            run_pen = 0.0
    return pen_sum, tx_sum, cyc_count, cyc_dur, cyc_tx, cyc_pen, cyc_next


@njit(cache=True)
def _run_cycles(n_cycles, j, taus, strict, charge_in_sync, qcum, gcum, gamma_cum, pen, rng,
                out_a, out_c, out_d, out_next):
    m = gcum.shape[0]
    for c in range(n_cycles):
        x = j
        xhat = j
        aoii = 0
        phase = -1
        d = 0
        tx = 0
        a = 0.0
        while True:
            age = aoii
            est = xhat
            x, xhat, aoii, phase, active = _slot(x, xhat, aoii, phase, taus, MODE_THRESHOLD, 0.0,
                                                 strict, qcum, gcum, gamma_cum, m, rng)
            d += 1
            if active >= 0:
                tx += 1
            if age > 0 or charge_in_sync:
                a += _penalty(pen, est, age)
            if age > 0 and aoii == 0:
                break
        out_a[c] = a
        out_c[c] = tx
        out_d[c] = d
        out_next[c] = x


def _cum_rows(p: np.ndarray) -> np.ndarray:
    cum = np.cumsum(np.atleast_2d(p), axis=1)
    cum[:, -1] = np.inf
    return np.ascontiguousarray(cum)


def _tables(source: SourceModel, channel: ChannelModel):
    qcum = _cum_rows(source.q)
    gcum = _cum_rows(np.hstack([channel.g, channel.h[:, None]]))
    gamma_cum = _cum_rows(channel.gamma[None, :])[0]
    return qcum, gcum, gamma_cum, np.ascontiguousarray(source.penalty_matrix())


def _half_width(samples: np.ndarray, level: float = 0.95) -> float:
    r = samples.size
    if r < 2:
        return float("inf")
    return float(stats.t.ppf(0.5 + level / 2, r - 1) * samples.std(ddof=1) / np.sqrt(r))


@dataclass
class SimulationReport:
    avg_cost: float
    ci_half_width: float
    avg_penalty: float
    avg_tx_fraction: float
    lam: float
    policy: str
    slots: int
    replications: int
    seed: int
    replication_costs: list = field(default_factory=list)
    cycle_stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema_version": 1, **asdict(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(
            [self.policy, repr(self.lam), repr(self.avg_cost), repr(self.ci_half_width),
             repr(self.avg_penalty), repr(self.avg_tx_fraction), self.slots, self.replications, self.seed]
        )
        return buf.getvalue()


TRACE_COLUMNS = ("clock", "X", "X_hat", "AoII", "channel_phase", "penalty", "delta")


def write_trace(trace: np.ndarray, fh) -> None:
    """CSV slot dump; states and phases are 1-based, idle channel is ``idle``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in trace:
        phase = "idle" if row[4] < 0 else int(row[4]) + 1
        w.writerow([int(row[0]), int(row[1]) + 1, int(row[2]) + 1, int(row[3]), phase, repr(float(row[5])), int(row[6])])


def simulate(source: SourceModel, channel: ChannelModel, policy: SimPolicy, lam: float,
             horizon: int = 1_000_000, replications: int = 5, seed: int = 20240521,
             trace_slots: int = 0, strict_trigger: bool = False, charge_in_sync: bool = False):
    """Time-average cost of ``policy`` over independent replications.

    Returns the report, plus the slot trace of the first replication when
    ``trace_slots > 0`` (as a ``(report, trace)`` pair).
    """
    if horizon < MIN_HORIZON:
        raise MinimumSampleSize(f"horizon must be >= {MIN_HORIZON}, got {horizon}")
    if replications < MIN_REPLICATIONS:
        raise MinimumSampleSize(f"need >= {MIN_REPLICATIONS} replications, got {replications}")
    if lam < 0:
        raise InvalidPolicy(f"lambda must be nonnegative, got {lam}")
    trace_slots = min(int(trace_slots), MAX_TRACE, horizon)
    n = source.n
    taus = policy.threshold_vector(n)
    mode = MODE_RANDOM if policy.kind == "rs" else MODE_THRESHOLD
    qcum, gcum, gamma_cum, pen = _tables(source, channel)
    warmup = int(WARMUP_FRACTION * horizon)
    counted = horizon - warmup
    pens, txs = np.empty(replications), np.empty(replications)
    cyc_count = np.zeros(n, dtype=np.int64)
    cyc_dur, cyc_tx, cyc_pen = np.zeros(n), np.zeros(n), np.zeros(n)
    cyc_next = np.zeros((n, n), dtype=np.int64)
    trace = np.zeros((trace_slots, len(TRACE_COLUMNS)))
    for rep in range(replications):
        rng = make_rng(seed, rep)
        tr = trace if rep == 0 else trace[:0]
        out = _run_path(horizon, warmup, taus, mode, float(policy.xi), strict_trigger, charge_in_sync,
                        qcum, gcum, gamma_cum, pen, rng, tr, n)
        pens[rep] = out[0] / counted
        txs[rep] = out[1] / counted
        cyc_count += out[2]
        cyc_dur += out[3]
        cyc_tx += out[4]
        cyc_pen += out[5]
        cyc_next += out[6]
    costs = pens + lam * txs
    with np.errstate(invalid="ignore", divide="ignore"):
        cycle_stats = {
            "count": cyc_count.tolist(),
            "mean_duration": _nan_to_none(cyc_dur / cyc_count),
            "mean_regime2_slots": _nan_to_none(cyc_tx / cyc_count),
            "mean_penalty": _nan_to_none(cyc_pen / cyc_count),
            "next_ev_frequency": [_nan_to_none(row / row.sum()) for row in cyc_next.astype(float)],
        }
    report = SimulationReport(
        avg_cost=float(costs.mean()),
        ci_half_width=_half_width(costs),
        avg_penalty=float(pens.mean()),
        avg_tx_fraction=float(txs.mean()),
        lam=float(lam),
        policy=str(policy),
        slots=int(horizon * replications),
        replications=int(replications),
        seed=int(seed),
        replication_costs=[float(c) for c in costs],
        cycle_stats=cycle_stats,
    )
    if trace_slots:
        return report, trace
    return report


def _nan_to_none(arr: np.ndarray) -> list:
    return [None if not np.isfinite(v) else float(v) for v in arr]


@dataclass
class CycleEstimate:
    """Empirical cycle means with standard errors (all indexed 0-based)."""

    ev: int
    tau: int
    cycles: int
    age_cost: float
    age_cost_se: float
    tx_cost: float
    tx_cost_se: float
    duration: float
    duration_se: float
    transition: np.ndarray
    transition_se: np.ndarray


def estimate_cycle_parameters(source: SourceModel, channel: ChannelModel, j: int, tau: int,
                              cycles: int = 1_000_000, seed: int = 20240521,
                              strict_trigger: bool = False, charge_in_sync: bool = False) -> CycleEstimate:
    """Simulate ``cycles`` independent cycles that start at embedded value ``j``."""
    if cycles < MIN_CYCLES:
        raise MinimumSampleSize(f"need >= {MIN_CYCLES} cycles, got {cycles}")
    if tau < 1:
        raise InvalidPolicy(f"threshold must be >= 1, got {tau}")
    n = source.n
    qcum, gcum, gamma_cum, pen = _tables(source, channel)
    out_a = np.empty(cycles)
    out_c = np.empty(cycles)
    out_d = np.empty(cycles)
    out_next = np.empty(cycles, dtype=np.int64)
    _run_cycles(cycles, j, np.full(n, tau, dtype=np.int64), strict_trigger, charge_in_sync,
                qcum, gcum, gamma_cum, pen, make_rng(seed), out_a, out_c, out_d, out_next)
    freq = np.bincount(out_next, minlength=n) / cycles
    se = lambda v: float(v.std(ddof=1) / np.sqrt(cycles))  # noqa: E731
    return CycleEstimate(
        ev=j, tau=tau, cycles=cycles,
        age_cost=float(out_a.mean()), age_cost_se=se(out_a),
        tx_cost=float(out_c.mean()), tx_cost_se=se(out_c),
        duration=float(out_d.mean()), duration_se=se(out_d),
        transition=freq, transition_se=np.sqrt(freq * (1 - freq) / cycles),
    )


def rs_line_search(source: SourceModel, channel: ChannelModel, lam: float, xi_grid,
                   horizon: int = 1_000_000, replications: int = 5, seed: int = 20240521):
    """Best random-sampling probability on ``xi_grid`` by simulation; ties go to larger ``xi``.

    Returns ``(xi_star, report_at_xi_star, {xi: report})``.
    """
    grid = sorted(float(x) for x in xi_grid)
    if any(not 0.0 <= x <= 1.0 for x in grid):
        raise InvalidPolicy("sampling probabilities must lie in [0, 1]")
    reports = {xi: simulate(source, channel, SimPolicy.rs(xi), lam, horizon, replications, seed) for xi in grid}
    best = None
    for xi in grid:
        if best is None or reports[xi].avg_cost <= reports[best].avg_cost:
            best = xi
    return best, reports[best], reports
