"""Exact truncated walk evolution, Monte Carlo sampling, and return-probability oracles.

Evolution uses absorbing truncation on an enumerated ball: mass stepping
outside the ball is accumulated as ``leaked``, so for any event inside the
ball the true probability lies in [killed mass, killed mass + leaked].  The
intervals are rigorous; their width is reported, never hidden.

Monte Carlo sampling is counter-based and block-partitioned: sample block b
draws from Philox keyed by (seed, b), so results are identical for any worker
count and any execution order of blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import RadiusTooSmallError, SizeCapError
from .groups import CayleyBall, GroupSpec, enumerate_ball
from .kernels import Kernel

MC_BLOCK = 4096
_Z95 = 1.959963984540054


@dataclass
class WalkDistribution:
    """Killed-walk distribution over ball indices after k steps.

    Invariant: sum(p) + leaked == 1 within 1e-12, and leaked is nondecreasing
    in k for a fixed ball.
    """

    ball: CayleyBall
    k: int
    p: np.ndarray
    leaked: float

    def mass_defect(self) -> float:
        return abs(math.fsum(self.p.tolist()) + self.leaked - 1.0)

    def radius_mass(self, r: int) -> float:
        """Killed mass at word distance <= r (compensated summation)."""
        sel = self.p[self.ball.radii <= r]
        return math.fsum(sel.tolist())


def step(ball: CayleyBall, kernel: Kernel, p: np.ndarray) -> tuple[np.ndarray, float]:
    """One killed transition: returns (next vector, newly leaked mass)."""
    hold = float(kernel.hold)
    q = p * hold if hold else np.zeros_like(p)
    w = kernel.float_weights()
    leaked_inc = 0.0
    for j in range(len(w)):
        if w[j] == 0.0:
            continue
        src, dst, out = ball.generator_arrays(j)
        # right multiplication by a fixed generator is injective, so dst has
        # no duplicates and fancy-index accumulation is safe
        q[dst] += w[j] * p[src]
        if out.size:
            leaked_inc += w[j] * math.fsum(p[out].tolist())
    return q, leaked_inc


def evolve(ball: CayleyBall, kernel: Kernel, k: int, start: np.ndarray | None = None) -> WalkDistribution:
    """Exact distribution of the walk killed on exiting the ball, after k steps."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if start is None:
        p = np.zeros(ball.size)
        p[0] = 1.0
    else:
        p = np.asarray(start, dtype=float).copy()
    leaked = 0.0
    for _ in range(k):
        p, inc = step(ball, kernel, p)
        leaked += inc
    return WalkDistribution(ball=ball, k=k, p=p, leaked=leaked)


def evolve_schedule(ball: CayleyBall, kernels: list[Kernel], start: np.ndarray | None = None) -> WalkDistribution:
    """Evolve one step per kernel in sequence (heterogeneous step schedule)."""
    if start is None:
        p = np.zeros(ball.size)
        p[0] = 1.0
    else:
        p = np.asarray(start, dtype=float).copy()
    leaked = 0.0
    for ker in kernels:
        p, inc = step(ball, ker, p)
        leaked += inc
    return WalkDistribution(ball=ball, k=len(kernels), p=p, leaked=leaked)


def small_ball_probability(ball: CayleyBall, kernel: Kernel, k: int, r: int) -> tuple[float, float]:
    """Two-sided interval for P(d(X_0, X_k) <= r); requires r <= ball radius."""
    if r > ball.radius:
        raise RadiusTooSmallError(f"r={r} exceeds ball radius {ball.radius}")
    dist = evolve(ball, kernel, k)
    lo = dist.radius_mass(r)
    return lo, min(1.0, lo + dist.leaked)


def return_probability(ball: CayleyBall, kernel: Kernel, k: int) -> tuple[float, float]:
    """Interval for the return probability P(X_k = X_0)."""
    dist = evolve(ball, kernel, k)
    lo = float(dist.p[0])
    return lo, min(1.0, lo + dist.leaked)


def exit_time_tail(ball: CayleyBall, kernel: Kernel, r: int, k: int) -> float:
    """Exact P(walk stays within word distance r through step k).

    Computed by killed evolution restricted to the radius-r sub-ball; the
    result is the surviving mass, with no truncation error since every path
    that would leak has genuinely exited.
    """
    if r > ball.radius:
        raise RadiusTooSmallError(f"r={r} exceeds ball radius {ball.radius}")
    inside = ball.radii <= r
    hold = float(kernel.hold)
    w = kernel.float_weights()
    p = np.zeros(ball.size)
    p[0] = 1.0
    for _ in range(k):
        q = p * hold if hold else np.zeros_like(p)
        for j in range(len(w)):
            if w[j] == 0.0:
                continue
            src, dst, _ = ball.generator_arrays(j)
            q[dst] += w[j] * p[src]
        q[~inside] = 0.0
        p = q
    return math.fsum(p.tolist())


# ---------------------------------------------------------------------------
# Monte Carlo sampling
# ---------------------------------------------------------------------------


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score 95% confidence interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def lamplighter_distance(lit_positions, cursor: int) -> int:
    """Word distance of a Z_2 wr Z element with generators {t+, t-, s}.

    Cost = number of lit lamps + shortest walk from 0 to ``cursor`` covering
    every lit site, which is 2*(b - a) - |cursor| for a = min(lit + {0, p}),
    b = max(lit + {0, p}).
    """
    if len(lit_positions) == 0:
        return abs(cursor)
    a = min(0, cursor, min(lit_positions))
    b = max(0, cursor, max(lit_positions))
    return len(lit_positions) + 2 * (b - a) - abs(cursor)


def _simulate_block_zd(group, kernel, k, r, size, rng):
    d = group.engine.d
    pos = np.zeros((size, d), dtype=np.int64)
    moves = np.array([group.engine._moves[g] for g in group.generators], dtype=np.int64)
    probs = np.concatenate(([float(kernel.hold)], kernel.float_weights()))
    cum = np.cumsum(probs)
    u = rng.random((size, k))
    for t in range(k):
        choice = np.searchsorted(cum, u[:, t], side="right")
        moving = choice > 0
        pos[moving] += moves[choice[moving] - 1]
    return int(np.count_nonzero(np.abs(pos).sum(axis=1) <= r))


def _simulate_block_lamplighter(group, kernel, k, r, size, rng):
    eng = group.engine
    width = 2 * k + 1
    lamps = np.zeros((size, width), dtype=bool)
    pos = np.zeros(size, dtype=np.int64)
    gens = group.generators
    probs = np.concatenate(([float(kernel.hold)], kernel.float_weights()))
    cum = np.cumsum(probs)
    move = np.zeros(len(gens) + 1, dtype=np.int64)
    switch = np.zeros(len(gens) + 1, dtype=bool)
    for j, g in enumerate(gens):
        if g.startswith("t"):
            move[j + 1] = 1 if g.endswith("+") else -1
        else:
            switch[j + 1] = True
    u = rng.random((size, k))
    rows = np.arange(size)
    for t in range(k):
        choice = np.searchsorted(cum, u[:, t], side="right")
        sw = switch[choice]
        if sw.any():
            lamps[rows[sw], pos[sw] + k] ^= True
        pos += move[choice]
    lit_count = lamps.sum(axis=1)
    first = np.argmax(lamps, axis=1) - k
    last = width - 1 - np.argmax(lamps[:, ::-1], axis=1) - k
    has = lit_count > 0
    a = np.minimum(np.minimum(pos, 0), np.where(has, first, 0))
    b = np.maximum(np.maximum(pos, 0), np.where(has, last, 0))
    dist = lit_count + 2 * (b - a) - np.abs(pos)
    return int(np.count_nonzero(dist <= r))


def _simulate_block_generic(group, kernel, k, r, size, rng, member_keys):
    gens = group.generators
    probs = np.concatenate(([float(kernel.hold)], kernel.float_weights()))
    cum = np.cumsum(probs)
    u = rng.random((size, k))
    hits = 0
    for i in range(size):
        x = group.identity()
        choice = np.searchsorted(cum, u[i], side="right")
        for c in choice:
            if c > 0:
                x = group.apply(x, gens[c - 1])
        if group.key(x) in member_keys:
            hits += 1
    return hits


def monte_carlo_small_ball(
    group: GroupSpec,
    kernel: Kernel,
    k: int,
    r: int,
    samples: int,
    seed: int,
    workers: int = 1,
):
    """Estimate P(d(X_0, X_k) <= r) with a Wilson 95% CI.

    Deterministic given ``seed``: sample block b uses Philox keyed by
    (seed, b) and results merge in block order, so the estimate does not
    depend on ``workers``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    name = group.name.split(":")[0]
    if name == "z":
        sim = lambda size, rng: _simulate_block_zd(group, kernel, k, r, size, rng)
    elif name == "lamplighter" and group.engine.s == 2 and group.engine.d == 1:
        sim = lambda size, rng: _simulate_block_lamplighter(group, kernel, k, r, size, rng)
    else:
        member_keys = frozenset(enumerate_ball(group, r).key_to_index)
        sim = lambda size, rng: _simulate_block_generic(group, kernel, k, r, size, rng, member_keys)

    blocks = [(b, min(MC_BLOCK, samples - b * MC_BLOCK)) for b in range((samples + MC_BLOCK - 1) // MC_BLOCK)]

    def run_block(args):
        b, size = args
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, b], dtype=np.uint64)))
        return sim(size, rng)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(run_block, blocks))
    else:
        counts = [run_block(b) for b in blocks]
    successes = int(sum(counts))
    estimate = successes / samples
    ci = wilson_interval(successes, samples)
    return estimate, ci


# ---------------------------------------------------------------------------
# exact return-probability oracles
# ---------------------------------------------------------------------------


def _log_central_binomials(m_max: int) -> np.ndarray:
    """log of C(m, m/2) 2^-m for even m (and -inf for odd m)."""
    out = np.full(m_max + 1, -np.inf)
    m = np.arange(0, m_max + 1, 2)
    out[m] = (
        np.vectorize(math.lgamma)(m + 1)
        - 2 * np.vectorize(math.lgamma)(m // 2 + 1)
        - m * math.log(2)
    )
    return out


def zd_return_probability(d: int, k: int) -> float:
    """Exact P(X_k = 0) for the simple random walk on Z^d.

    Computed by splitting steps over dimensions: the step counts form a
    multinomial and each dimension contributes a central binomial.  Evaluated
    in the log domain, so accuracy is ~1e-13 relative.
    """
    if k == 0:
        return 1.0
    if k % 2:
        return 0.0
    b = _log_central_binomials(k)
    if d == 1:
        return float(np.exp(b[k]))
    if d == 2:
        # split over {x-dim} vs {y-dim}: counts Binomial(k, 1/2)
        j = np.arange(0, k + 1)
        lg = np.vectorize(math.lgamma)
        logc = lg(k + 1) - lg(j + 1) - lg(k - j + 1) - k * math.log(2)
        terms = logc + b[j] + b[k - j]
        finite = np.isfinite(terms)
        return float(np.exp(terms[finite]).sum())
    if d == 3:
        # dim-3 count m ~ Binomial(k, 1/3); remaining k-m steps split in Z^2
        p2 = np.array([zd_return_probability(2, j) if j % 2 == 0 else 0.0 for j in range(k + 1)])
        m = np.arange(0, k + 1)
        lg = np.vectorize(math.lgamma)
        logc = lg(k + 1) - lg(m + 1) - lg(k - m + 1) + m * math.log(1 / 3) + (k - m) * math.log(2 / 3)
        with np.errstate(divide="ignore"):
            lp2 = np.where(p2 > 0, np.log(np.maximum(p2, 1e-320)), -np.inf)
        terms = logc + b[m] + lp2[k - m]
        finite = np.isfinite(terms)
        return float(np.exp(terms[finite]).sum())
    raise ValueError("d must be 1, 2, or 3")


def zd_return_probability_table(d: int, k_max: int) -> np.ndarray:
    """P(X_k = 0) for k = 0..k_max on Z^d (vectorized over k)."""
    b = _log_central_binomials(k_max)
    lg = np.vectorize(math.lgamma)
    if d == 1:
        with np.errstate(invalid="ignore"):
            out = np.exp(b)
        out[0] = 1.0
        out[1::2] = 0.0
        return out
    if d == 2:
        out = np.zeros(k_max + 1)
        out[0::2] = np.exp(2 * b[0::2])
        return out
    if d == 3:
        p2 = np.exp(2 * b)
        p2[1::2] = 0.0
        out = np.zeros(k_max + 1)
        out[0] = 1.0
        for k in range(2, k_max + 1, 2):
            m = np.arange(0, k + 1, 2)
            logc = lg(k + 1) - lg(m + 1) - lg(k - m + 1) + m * math.log(1 / 3) + (k - m) * math.log(2 / 3)
            out[k] = float(np.exp(logc + b[m]).dot(p2[k - m]))
        return out
    raise ValueError("d must be 1, 2, or 3")


# ---------------------------------------------------------------------------
# exact lamplighter return probability (switch-walk-switch convention)
# ---------------------------------------------------------------------------

LAMPLIGHTER_DP_CAP = 2048


def sws_step_kernels(group: GroupSpec) -> list[Kernel]:
    """Sub-step kernels whose composition is one switch-walk-switch step.

    One SWS step randomizes the lamp under the cursor (toggle with prob 1/2),
    moves +-1 with prob 1/2 each, then randomizes the lamp at the new site.
    """
    from fractions import Fraction

    half = Fraction(1, 2)
    k_switch = Kernel(group=group, weights={"s": half}, hold=half)
    k_walk = Kernel(group=group, weights={"t+": half, "t-": half})
    return [k_switch, k_walk, k_switch]


def lamplighter_return_exact(n: int, mode_floor: float = 1e-30) -> float:
    """Exact return probability of the switch-walk-switch walk on Z_2 wr Z.

    Conditioned on the base +-1 path, the walk returns iff the path ends at 0
    and every lamp on the visited range [min, max] resets to off, which has
    probability 2^-(range+1).  Summing over exact min/max classes and
    collapsing the inclusion-exclusion gives

        P(n) = (1/8) * sum_{m,M=0..n} W(m) W(M) * P_n^{[-m, M]}(0, 0)

    with W(j) = 2^-j (W(n) absorbs the tail 2^-(n-1)) and P^[-m,M] the +-1
    walk killed outside [-m, M], evaluated by the explicit path-graph
    eigenexpansion.  Modes with |cos|^n below ``mode_floor`` are dropped;
    remaining terms are positive so there is no cancellation.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > LAMPLIGHTER_DP_CAP:
        raise SizeCapError(f"n={n} exceeds DP cap {LAMPLIGHTER_DP_CAP}")
    if n == 0:
        return 1.0
    if n % 2:
        return 0.0
    weights = np.power(2.0, -np.arange(0, n + 1, dtype=float))
    weights[n] = 2.0 ** (-(n - 1))
    total = 0.0
    for v in range(1, 2 * n + 2):  # v = number of sites = m + M + 1
        theta = np.pi * np.arange(1, v + 1) / (v + 1)
        cos = np.cos(theta)
        with np.errstate(divide="ignore"):
            keep = n * np.log(np.abs(cos) + 1e-320) >= math.log(mode_floor)
        if not keep.any():
            continue
        modes = np.arange(1, v + 1)[keep]
        cos_n = np.power(cos[keep], n)
        m_lo = max(0, v - 1 - n)
        m_hi = min(n, v - 1)
        m = np.arange(m_lo, m_hi + 1)
        wmm = weights[m] * weights[v - 1 - m]
        # sin^2(i*pi*(m+1)/(v+1)) matrix: modes x positions
        s = np.sin(np.outer(modes, (m + 1)) * (np.pi / (v + 1))) ** 2
        total += (2.0 / (v + 1)) * float(cos_n.dot(s.dot(wmm)))
    return total / 8.0
