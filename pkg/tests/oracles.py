"""Reference computations that share no code path with the package.

Everything here works from raw arrays: counts are enumerated, moments are
summed term by term with a certified bound on the neglected tail.
"""

from __future__ import annotations

import numpy as np


def count_set_partitions(m: int, r: int) -> int:
    """Number of ways to split ``{1..m}`` into ``r`` non-empty blocks (restricted growth strings)."""
    if m == 0:
        return int(r == 0)
    count = 0

    def grow(i, top):
        nonlocal count
        if i == m:
            count += int(top + 1 == r)
            return
        for b in range(min(top + 2, r)):
            grow(i + 1, max(top, b))

    grow(1, 0)
    return count


def random_stochastic_rows(rng, rows: int, cols: int) -> np.ndarray:
    return rng.dirichlet(np.ones(cols), size=rows)


def random_block(rng, k: int, n_abs: int, min_exit: float = 0.05):
    """TPTS and APTS blocks with row exit mass at least ``min_exit``."""
    exit_mass = rng.uniform(min_exit, 0.6, size=k)
    a = random_stochastic_rows(rng, k, k) * (1.0 - exit_mass)[:, None]
    b = random_stochastic_rows(rng, k, n_abs) * exit_mass[:, None]
    # sparsify a bit so zero patterns get exercised
    mask = rng.random((k, k)) < 0.2
    moved = (a * mask).sum(axis=1)
    a[mask] = 0.0
    b[:, 0] += moved
    return a, b


def random_chain_arrays(rng, k1_max=12, k2_max=12, l_max=4, tau_max=10):
    k1 = int(rng.integers(1, k1_max + 1))
    k2 = int(rng.integers(1, k2_max + 1))
    n_abs = int(rng.integers(1, l_max + 1))
    tau = int(rng.integers(1, tau_max + 1))
    beta1 = rng.dirichlet(np.ones(k1))
    a1, b1 = random_block(rng, k1, n_abs)
    a2, b2 = random_block(rng, k2, n_abs)
    theta = random_stochastic_rows(rng, k1, k2)
    return dict(ipv1=beta1, threshold=tau, btm=theta, tpts1=a1, tpts2=a2, apts1=b1, apts2=b2)


def _geometric_power_sum(m: int, kappa: float) -> float:
    """``sum_{s>=1} s^m kappa^(s-1)``, summed until terms vanish."""
    total, s = 0.0, 1
    while True:
        term = s**m * kappa ** (s - 1)
        total += term
        if (kappa == 0.0 or s > m / -np.log(kappa) + 5) and term < 1e-18 * total:
            return total
        s += 1


def truncated_expectation(arrays: dict, g, degree: int, rel_tol: float = 1e-12, tail_mass: float = 1e-14):
    """``E[g(T)]`` by direct summation of ``g(t) P(T = t)``.

    Requires ``0 <= g(t) <= t^degree``.  With ``kappa = ||A2||_inf`` the
    neglected part after ``T0`` is at most ``P(T > T0) (T0+1)^degree C`` where
    ``C = sum_s s^degree kappa^(s-1)``; summation stops once that bound is
    below ``rel_tol`` times the partial sum and the tail mass is below
    ``tail_mass``.  Returns ``(value, bound, T0)``.
    """
    a1, a2 = np.asarray(arrays["tpts1"]), np.asarray(arrays["tpts2"])
    e1, e2 = 1.0 - a1.sum(axis=1), 1.0 - a2.sum(axis=1)
    tau = arrays["threshold"]
    kappa = float(np.abs(a2).sum(axis=1).max())
    c = _geometric_power_sum(degree, kappa)
    total = 0.0
    v = np.asarray(arrays["ipv1"], dtype=float)
    t = 0
    for t in range(1, tau):
        total += g(t) * float(v @ e1)
        v = v @ a1
    w = v @ np.asarray(arrays["btm"])
    t = tau
    while True:
        total += g(t) * float(w @ e2)
        w = w @ a2
        survive = float(w.sum())
        bound = survive * (t + 1) ** degree * c
        if survive < tail_mass and bound <= rel_tol * abs(total):
            return total, bound, t
        t += 1
        if t > 10**6:
            raise RuntimeError("oracle failed to converge")


def pmf_by_iteration(arrays: dict, t_max: int) -> np.ndarray:
    """``P(T = t)`` for ``t = 1..t_max`` by pushing the phase vector forward."""
    a1, a2 = np.asarray(arrays["tpts1"]), np.asarray(arrays["tpts2"])
    e1, e2 = 1.0 - a1.sum(axis=1), 1.0 - a2.sum(axis=1)
    tau = arrays["threshold"]
    out = np.zeros(t_max)
    v = np.asarray(arrays["ipv1"], dtype=float)
    for t in range(1, min(tau, t_max + 1)):
        out[t - 1] = v @ e1
        v = v @ a1
    w = v @ np.asarray(arrays["btm"])
    for t in range(tau, t_max + 1):
        out[t - 1] = w @ e2
        w = w @ a2
    return out


def random_smdp_tables(rng, n: int, tau_max: int):
    """Positive costs, durations >= 2 and fully supported transition rows."""
    a = rng.uniform(0.0, 10.0, size=(n, tau_max))
    c = rng.uniform(0.0, 5.0, size=(n, tau_max))
    d = rng.uniform(2.0, 20.0, size=(n, tau_max))
    rho = rng.dirichlet(np.ones(n), size=(n, tau_max))
    return a, c, d, rho


def _first_above(probs, u):
    acc = 0.0
    for k, p in enumerate(probs):
        acc += p
        if u < acc:
            return k
    return len(probs) - 1


def reference_trace(q, gamma, g, taus, penalties, n_slots, rng):
    """Plain-Python slot loop drawing four uniforms per slot in the order trigger, phase, channel, source.

    Per slot: start a transmission if out of sync, idle and ``AoII >= tau[X_hat]``;
    move the channel (absorption means tentative delivery); move the source;
    a source change voids any transmission active in the slot; commit.
    Rows are ``(X, X_hat, AoII, phase or -1, penalty, delta)`` at slot start.
    """
    q, g, gamma = np.asarray(q), np.asarray(g), np.asarray(gamma)
    m = g.shape[0]
    h = 1.0 - g.sum(axis=1)
    x = xhat = age = 0
    phase = -1
    rows = []
    for _ in range(n_slots):
        u = rng.random(4)
        if age > 0 and phase < 0 and age >= taus[xhat]:
            phase = _first_above(gamma, u[1])
        active = phase
        pen = sum(c * age**k for k, c in enumerate(penalties[xhat])) if age > 0 else 0.0
        rows.append((x, xhat, age, active, pen, int(active >= 0)))
        delivered = False
        if active >= 0:
            nxt = _first_above(list(g[active]) + [h[active]], u[2])
            delivered = nxt == m
            phase = -1 if delivered else nxt
        x_new = _first_above(q[x], u[3])
        if x_new != x and active >= 0:
            delivered, phase = False, -1
        if delivered:
            xhat = x_new
        x = x_new
        age = 0 if x == xhat else age + 1
    return rows
