"""Occupation-measure experiments: weighted sums of small-ball probabilities
with explicit tail models, exponent fits, and the non-generating lamp
randomizing walk.

Partial sums are computed from exact providers where feasible (ball evolution
for short horizons, the dimension-splitting return formula on Z^d) and from
seeded Monte Carlo trajectories otherwise; every emitted sum is tagged with
its provenance and tails are model-dependent unless flagged UNCONTROLLED.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, LeakageError
from .groups import GroupSpec, enumerate_ball
from .kernels import Kernel
from .walks import MC_BLOCK, evolve, step, zd_return_probability_table

DEFAULT_HORIZON = 1 << 14


@dataclass
class OccupationResult:
    group: str
    r: int
    p: float
    horizon: int
    partial: float
    partial_err: float
    tail: float | None
    tail_kind: str  # "MODEL" | "UNCONTROLLED"
    provider: str

    @property
    def total(self) -> float | None:
        return None if self.tail is None else self.partial + self.tail


def _tail_model_zd(d: int, r: int, p: float, horizon: int, ball_volume: int, envelope_c: float) -> float:
    """Model tail: sum_{k>K} (k+1)^(p-1) * volume * C k^(-d/2).

    The envelope constant C is fitted from the exact return probabilities;
    the ball-volume union bound mirrors the sup-over-targets display.  Only a
    model: the result is labelled MODEL, never certified.
    """
    exponent = p - 1 - d / 2
    if exponent >= -1:
        return math.inf
    # integral comparison for the convergent sum
    ks = np.arange(horizon + 1, horizon + 200_001)
    block = float(((ks + 1.0) ** (p - 1) * ks ** (-d / 2.0)).sum())
    a = horizon + 200_000
    rest = (a ** (exponent + 1)) / (-(exponent + 1))
    # parity: at each time only half the lattice sites carry mass, while the
    # envelope constant is fitted to the matching-parity peak
    return 0.5 * envelope_c * ball_volume * (block + rest)


def occupation_moment_zd_exact(
    d: int, r: int, p: float, horizon: int, kernel_check: bool = True
) -> OccupationResult:
    """Occupation moment on Z^d at r=0 via the exact return-probability table."""
    if r != 0:
        raise ValueError("exact provider covers r=0 only; use evolve or mc")
    tab = zd_return_probability_table(d, horizon)
    ks = np.arange(horizon + 1)
    partial = float(((ks + 1.0) ** (p - 1)) @ tab)
    # fit the envelope constant on the top dyadic block of even times
    top = np.arange(horizon // 2, horizon + 1, 2)
    c_env = float((tab[top] * top ** (d / 2.0)).max())
    tail = _tail_model_zd(d, 0, p, horizon, 1, c_env)
    return OccupationResult(
        group=f"z:{d}", r=0, p=p, horizon=horizon, partial=partial, partial_err=0.0,
        tail=tail, tail_kind="MODEL", provider="zd-exact",
    )


def occupation_moment_evolve(
    group: GroupSpec,
    kernel: Kernel,
    r: int,
    p: float,
    horizon: int,
    ball_radius: int | None = None,
    leak_budget: float = 1e-6,
) -> OccupationResult:
    """Occupation moment from killed evolution; per-term exact intervals.

    The partial sum uses interval midpoints, with half the accumulated
    interval width reported as the error.  Raises LeakageError when the final
    leaked mass exceeds the budget.  No tail model is attached (UNCONTROLLED)
    unless the caller combines it with an envelope.
    """
    R = ball_radius if ball_radius is not None else min(horizon + r, 4 * int(math.isqrt(horizon) + 1) + r)
    ball = enumerate_ball(group, R)
    inside = ball.radii <= r
    pvec = np.zeros(ball.size)
    pvec[0] = 1.0
    leaked = 0.0
    mid_sum = 0.0
    width_sum = 0.0
    for k in range(horizon + 1):
        if k:
            pvec, inc = step(ball, kernel, pvec)
            leaked += inc
        lo = float(pvec[inside].sum())
        hi = min(1.0, lo + leaked)
        w = (k + 1.0) ** (p - 1)
        mid_sum += w * 0.5 * (lo + hi)
        width_sum += w * (hi - lo)
    if leaked > leak_budget:
        raise LeakageError(f"leakage {leaked:.3e} exceeds budget {leak_budget:.1e}")
    return OccupationResult(
        group=group.name, r=r, p=p, horizon=horizon, partial=mid_sum,
        partial_err=0.5 * width_sum, tail=None, tail_kind="UNCONTROLLED",
        provider="evolve",
    )


def occupation_moment_mc_zd(
    d: int,
    r_values,
    p: float,
    horizon: int,
    trajectories: int,
    seed: int,
    workers: int = 1,
) -> dict[int, OccupationResult]:
    """Monte Carlo occupation moments on Z^d, all radii from shared trajectories.

    Each trajectory accumulates sum_k (k+1)^(p-1) 1(|X_k|_1 <= r); the
    estimate is the mean with a CLT standard error.  Deterministic for a
    fixed seed via per-block Philox streams merged in block order.
    """
    r_values = sorted(set(int(r) for r in r_values))
    weights = (np.arange(horizon + 1) + 1.0) ** (p - 1)
    sums = {r: 0.0 for r in r_values}
    sqs = {r: 0.0 for r in r_values}
    n_blocks = (trajectories + MC_BLOCK - 1) // MC_BLOCK

    for b in range(n_blocks):
        size = min(MC_BLOCK, trajectories - b * MC_BLOCK)
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, b], dtype=np.uint64)))
        pos = np.zeros((size, d), dtype=np.int64)
        occ = {r: np.zeros(size) for r in r_values}
        dist = np.zeros(size, dtype=np.int64)
        for r in r_values:
            occ[r] += weights[0] * (dist <= r)
        axes = rng.integers(0, d, size=(size, horizon))
        signs = rng.integers(0, 2, size=(size, horizon)) * 2 - 1
        rows = np.arange(size)
        for k in range(1, horizon + 1):
            pos[rows, axes[:, k - 1]] += signs[:, k - 1]
            dist = np.abs(pos).sum(axis=1)
            w = weights[k]
            for r in r_values:
                occ[r] += w * (dist <= r)
        for r in r_values:
            sums[r] += float(occ[r].sum())
            sqs[r] += float((occ[r] ** 2).sum())

    out = {}
    tab = zd_return_probability_table(d, 4096)
    top = np.arange(2048, 4097, 2)
    c_env = float((tab[top] * top ** (d / 2.0)).max())
    for r in r_values:
        mean = sums[r] / trajectories
        var = max(sqs[r] / trajectories - mean * mean, 0.0)
        se = math.sqrt(var / trajectories)
        vol = _l1_ball_volume(d, r)
        tail = _tail_model_zd(d, r, p, horizon, vol, c_env)
        out[r] = OccupationResult(
            group=f"z:{d}", r=r, p=p, horizon=horizon, partial=mean,
            partial_err=2 * se, tail=tail, tail_kind="MODEL", provider="mc",
        )
    return out


def _l1_ball_volume(d: int, r: int) -> int:
    """Number of integer points with |x|_1 <= r in Z^d, by 1d convolution."""
    counts = np.zeros(r + 1, dtype=np.int64)
    counts[0] = 1
    for _ in range(d):
        new = np.zeros(r + 1, dtype=np.int64)
        for total in range(r + 1):
            acc = 0
            for j in range(total + 1):
                acc += counts[total - j] * (2 if j else 1)
            new[total] = acc
        counts = new
    return int(counts.sum())


def occupation_exponent_fit(results: dict[int, OccupationResult]) -> dict:
    """Log-log slope of the (tail-completed) occupation sums against r."""
    rs = sorted(results)
    if len(rs) < 4:
        raise InsufficientDataError("need >= 4 radii")
    xs = [math.log(r) for r in rs]
    ys = []
    for r in rs:
        res = results[r]
        total = res.partial + (res.tail or 0.0)
        ys.append(math.log(total))
    slope, intercept = np.polyfit(xs, ys, 1)
    return {"beta_hat": float(slope), "intercept": float(intercept), "radii": rs}


# ---------------------------------------------------------------------------
# the non-generating lamp-randomizing walk
# ---------------------------------------------------------------------------


def lamp_randomizing_walk(nu, n: int, samples: int, seed: int) -> dict:
    """Simulate the walk that redraws lamps on [-N_i, N_i] each step.

    ``nu`` is a probability table {j: P(N=j)} with finite support.  The base
    point never moves, so the distance at time i is the word length of the
    current lamp configuration; conditional on the radii, the probability
    that every lamp is off at time n is 2^-(2 max N_i + 1).

    Returns per-sample distance traces (summarized), the conditional return
    probabilities from the closed formula, and an empirical lamp-state
    frequency from direct simulation for formula cross-checking.
    """
    support = sorted(nu)
    probs = np.array([float(nu[j]) for j in support])
    if abs(probs.sum() - 1.0) > 1e-9 or probs.min() < 0:
        raise ValueError("nu must be a probability table")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    max_n = max(support)
    width = 2 * max_n + 1

    idx = rng.choice(len(support), size=(samples, n), p=probs)
    radii = np.array(support, dtype=np.int64)[idx]  # N_i per step
    running_max = np.maximum.accumulate(radii, axis=1)

    # distance trace: lamps on [-M, M] are iid uniform after the last redraw
    # covering them, so the lit set is uniform over subsets of the covered
    # window; simulate the lamp states exactly
    lamps = np.zeros((samples, width), dtype=bool)
    final_dist = np.zeros(samples, dtype=np.int64)
    dist_trace_mean = np.zeros(n)
    for i in range(n):
        Ns = radii[:, i]
        for val in np.unique(Ns):
            rows = np.nonzero(Ns == val)[0]
            lo, hi = max_n - val, max_n + val + 1
            lamps[rows, lo:hi] = rng.random((len(rows), hi - lo)) < 0.5
        lit = lamps.sum(axis=1)
        first = np.argmax(lamps, axis=1) - max_n
        last = width - 1 - np.argmax(lamps[:, ::-1], axis=1) - max_n
        has = lit > 0
        a = np.minimum(0, np.where(has, first, 0))
        b = np.maximum(0, np.where(has, last, 0))
        dist = lit + 2 * (b - a)  # cursor fixed at 0
        dist_trace_mean[i] = float(dist.mean())
        if i == n - 1:
            final_dist = dist
    all_off_freq = float((lamps.sum(axis=1) == 0).mean())

    cond_return = np.exp2(-(2 * running_max[:, -1].astype(float) + 1))
    return {
        "distance_mean_trace": dist_trace_mean,
        "final_distance": final_dist,
        "max_radius": running_max[:, -1],
        "conditional_return_formula": cond_return,
        "all_off_frequency": all_off_freq,
        "formula_mean": float(cond_return.mean()),
    }
