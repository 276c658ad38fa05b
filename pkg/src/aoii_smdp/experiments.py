"""Built-in scenarios and the lambda sweep comparing SMDP, ST and RS policies."""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cycle_model import ChannelModel, SmdpParameters, SourceModel, smdp_parameters
from .errors import AoiiError, BoundaryWarning, ConfigError
from .simulator import SimPolicy, rs_line_search, simulate
from .smdp_solver import policy_iteration, uniform_threshold_search

log = logging.getLogger(__name__)

DEFAULT_SEED = 20240521
DEFAULT_XI_GRID = tuple(round(0.05 * k, 2) for k in range(1, 21))
ALL_POLICIES = ("smdp", "st", "rs")


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 1_000_000
    replications: int = 5
    seed: int = DEFAULT_SEED


@dataclass(frozen=True)
class Scenario:
    name: str
    source: SourceModel
    channel: ChannelModel
    lambda_grid: tuple
    tau_max: int = 50
    sim: SimConfig = SimConfig()
    xi_grid: tuple = DEFAULT_XI_GRID
    notes: tuple = ()

    def provenance(self) -> list[str]:
        lines = [
            f"scenario: {self.name}",
            f"Q: {json.dumps(self.source.q.tolist())}",
            f"penalties (ascending coefficients): {json.dumps([list(p) for p in self.source.penalties])}",
            f"channel gamma: {json.dumps(self.channel.gamma.tolist())}",
            f"channel G: {json.dumps(self.channel.g.tolist())}",
            f"lambda grid: {json.dumps(list(self.lambda_grid))}",
            f"tau_max: {self.tau_max}",
            f"xi grid: {json.dumps(list(self.xi_grid))}",
            f"horizon: {self.sim.horizon}; replications: {self.sim.replications}; seed: {self.sim.seed}",
        ]
        return lines + list(self.notes)

    def with_overrides(self, **kw) -> "Scenario":
        sim_kw = {k: kw.pop(k) for k in ("horizon", "replications", "seed") if kw.get(k) is not None}
        kw = {k: v for k, v in kw.items() if v is not None}
        sim = SimConfig(**{**self.sim.__dict__, **sim_kw})
        return Scenario(**{**self.__dict__, **kw, "sim": sim})


def scenario_one_source(n: int = 10) -> np.ndarray:
    q = np.zeros((n, n))
    diag = np.linspace(0.4, 0.6, n)
    for i in range(n):
        rest = 1.0 - diag[i]
        off = np.linspace(0.5 * rest / (n - 1), 1.5 * rest / (n - 1), n - 1)
        q[i, [k for k in range(n) if k != i]] = off
        q[i, i] = diag[i]
    return q


def scenario_one() -> Scenario:
    """Ten-state source, quadratic-plus-linear penalties, geometric(0.8) channel."""
    n = 10
    penalties = tuple((0.0, 1.0 / (n + 1 - j), 1.0 / j) for j in range(1, n + 1))
    return Scenario(
        name="scenario1",
        source=SourceModel(scenario_one_source(n), penalties),
        channel=ChannelModel.from_arrays([1.0], [[0.2]]),
        lambda_grid=(0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0),
        notes=("off-diagonal entries of each Q row assigned in ascending column order",),
    )


def scenario_two() -> Scenario:
    """Three-state source with a two-phase channel."""
    q = np.array([[0.60, 0.25, 0.15], [0.25, 0.55, 0.20], [0.20, 0.30, 0.50]])
    penalties = ((0.5, 1.0), (1.0, 0.5), (0.25, 1.0 / 3.0))
    return Scenario(
        name="scenario2",
        source=SourceModel(q, penalties),
        channel=ChannelModel.from_arrays([1.0, 0.0], [[0.7, 0.2], [0.1, 0.6]]),
        lambda_grid=(0.0, 0.5, 1.0, 2.0, 5.0, 10.0),
    )


BUILTIN = {"scenario1": scenario_one, "scenario2": scenario_two}


def builtin(name: str) -> Scenario:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(BUILTIN)}") from None


@dataclass
class SweepRow:
    lam: float
    smdp_gain: float = float("nan")
    smdp_policy: tuple = ()
    smdp_sim_cost: float = float("nan")
    smdp_sim_ci: float = float("nan")
    st_tau: int = 0
    st_gain: float = float("nan")
    st_sim_cost: float = float("nan")
    st_sim_ci: float = float("nan")
    rs_xi: float = float("nan")
    rs_sim_cost: float = float("nan")
    rs_sim_ci: float = float("nan")
    error: str = ""


COLUMNS = {
    "smdp": ("smdp_gain", "smdp_sim_cost", "smdp_sim_ci"),
    "st": ("st_tau", "st_gain", "st_sim_cost", "st_sim_ci"),
    "rs": ("rs_xi", "rs_sim_cost", "rs_sim_ci"),
}


def _sweep_point(scenario: Scenario, params: SmdpParameters, lam: float, policies) -> SweepRow:
    row = SweepRow(lam=lam)
    sim = scenario.sim
    src, ch = scenario.source, scenario.channel
    if "smdp" in policies:
        res = policy_iteration(params, lam)
        row.smdp_gain, row.smdp_policy = res.gain, res.policy.thresholds
        rep = simulate(src, ch, SimPolicy.multi(res.policy), lam, sim.horizon, sim.replications, sim.seed)
        row.smdp_sim_cost, row.smdp_sim_ci = rep.avg_cost, rep.ci_half_width
    if "st" in policies:
        row.st_tau, row.st_gain = uniform_threshold_search(params, lam)
        rep = simulate(src, ch, SimPolicy.uniform(row.st_tau), lam, sim.horizon, sim.replications, sim.seed)
        row.st_sim_cost, row.st_sim_ci = rep.avg_cost, rep.ci_half_width
    if "rs" in policies:
        xi, rep, _ = rs_line_search(src, ch, lam, scenario.xi_grid, sim.horizon, sim.replications, sim.seed)
        row.rs_xi, row.rs_sim_cost, row.rs_sim_ci = xi, rep.avg_cost, rep.ci_half_width
    return row


def run_sweep(scenario: Scenario, policies=ALL_POLICIES, params: SmdpParameters | None = None) -> list[SweepRow]:
    """One row per lambda in ascending order; a failing lambda yields a row with ``error`` set."""
    policies = tuple(p for p in ALL_POLICIES if p in policies)
    if params is None and ("smdp" in policies or "st" in policies):
        params = smdp_parameters(scenario.source, scenario.channel, scenario.tau_max)
    rows = []
    for lam in sorted(scenario.lambda_grid):
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", BoundaryWarning)
                row = _sweep_point(scenario, params, float(lam), policies)
            for w in caught:
                log.warning("lambda=%s: %s", lam, w.message)
        except AoiiError as exc:
            log.error("lambda=%s failed: %s", lam, exc)
            row = SweepRow(lam=float(lam), error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def sweep_csv(scenario: Scenario, rows: list[SweepRow], policies=ALL_POLICIES) -> str:
    buf = io.StringIO()
    for line in scenario.provenance():
        buf.write(f"# {line}\n")
    buf.write(f"# policies: {','.join(p for p in ALL_POLICIES if p in policies)}\n")
    cols = ["lambda"] + [c for p in ALL_POLICIES if p in policies for c in COLUMNS[p]] + ["error"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.lam)] + [_fmt(getattr(r, c)) for c in cols[1:-1]] + [r.error])
    return buf.getvalue()


def thresholds_csv(scenario: Scenario, rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    for line in scenario.provenance():
        buf.write(f"# {line}\n")
    n = scenario.source.n
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda"] + [f"tau_{j + 1}" for j in range(n)] + ["st_tau"])
    for r in rows:
        taus = list(r.smdp_policy) if r.smdp_policy else [""] * n
        w.writerow([_fmt(r.lam)] + taus + [r.st_tau or ""])
    return buf.getvalue()


@dataclass
class BatteryCell:
    ev: int
    tau: int
    quantity: str
    analytic: float
    empirical: float
    std_error: float
    z: float
    passed: bool


def cycle_battery(scenario: Scenario, taus=(1, 2, 3, 5), cycles: int = 1_000_000, seed: int | None = None,
                  z_max: float = 3.0, params: SmdpParameters | None = None) -> list[BatteryCell]:
    """Compare every closed-form cycle parameter with its simulated estimate.

    ``params`` replaces the closed forms (used to check that corrupted tables
    are caught); it must cover ``max(taus)``.
    """
    from .simulator import estimate_cycle_parameters

    src, ch = scenario.source, scenario.channel
    if params is None:
        params = smdp_parameters(src, ch, max(taus))
    seed = scenario.sim.seed if seed is None else seed
    cells = []
    for j in range(src.n):
        for tau in taus:
            est = estimate_cycle_parameters(src, ch, j, tau, cycles, seed + 1000 * j + tau)
            k = tau - 1
            pairs = [
                ("a", params.age_cost[j, k], est.age_cost, est.age_cost_se),
                ("c", params.tx_cost[j, k], est.tx_cost, est.tx_cost_se),
                ("d", params.duration[j, k], est.duration, est.duration_se),
            ] + [
                (f"rho_{i + 1}", params.transition[j, k, i], est.transition[i], est.transition_se[i])
                for i in range(src.n)
            ]
            for name, ana, emp, se in pairs:
                ana, emp, se = float(ana), float(emp), float(se)
                diff = abs(ana - emp)
                z = diff / se if se > 0 else (0.0 if diff == 0 else float("inf"))
                cells.append(BatteryCell(j, tau, name, ana, emp, se, z, bool(z <= z_max)))
    return cells


def battery_table(cells: list[BatteryCell]) -> str:
    lines = [f"{'j':>2} {'tau':>3} {'qty':<6} {'analytic':>12} {'empirical':>12} {'se':>10} {'z':>6}  result"]
    for c in cells:
        lines.append(
            f"{c.ev + 1:>2} {c.tau:>3} {c.quantity:<6} {c.analytic:>12.6f} {c.empirical:>12.6f} "
            f"{c.std_error:>10.2e} {c.z:>6.2f}  {'PASS' if c.passed else 'FAIL'}"
        )
    return "\n".join(lines)
