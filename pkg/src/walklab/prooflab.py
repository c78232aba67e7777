"""Finite realizations of the proof machinery: indicator-decay times with
exhaustive oracles, the spectral-bound check relating them, and the
measured-wall metric with its displayed identities.

All finite-chain computations run on dense symmetric stochastic matrices of
size at most 16; wall-metric computations run on enumerated balls using group
arithmetic, with truncation leakage accounted explicitly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LeakageError, NoConvergenceError, SizeCapError
from .groups import CayleyBall
from .kernels import Kernel
from .walks import evolve

CHAIN_CAP = 16
SUBSET_SIZE_CAP = 6
DECAY_K_CAP = 10_000
INFINITE = "INFINITE"


@dataclass
class FiniteChain:
    """Symmetric stochastic matrix on at most 16 states."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if Q.shape[0] > CHAIN_CAP:
            raise SizeCapError(f"chain size {Q.shape[0]} above cap {CHAIN_CAP}")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Q must be symmetric")
        if not np.allclose(Q.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("rows must sum to 1")
        if Q.min() < -1e-15:
            raise ValueError("entries must be nonnegative")
        self.Q = Q

    @property
    def size(self) -> int:
        return self.Q.shape[0]

    @classmethod
    def lazy_cycle(cls, n: int, hold: float = 0.5) -> "FiniteChain":
        Q = np.zeros((n, n))
        for i in range(n):
            Q[i, i] = hold
            Q[i, (i + 1) % n] += (1 - hold) / 2
            Q[i, (i - 1) % n] += (1 - hold) / 2
        return cls(Q)

    @classmethod
    def random_metropolis(cls, n: int, rng, edge_prob: float = 0.5, min_hold: float = 0.05) -> "FiniteChain":
        """Random connected graph, Metropolis weights, forced minimum holding."""
        while True:
            A = rng.random((n, n)) < edge_prob
            A = np.triu(A, 1)
            A = A | A.T
            order = rng.permutation(n)
            for i in range(1, n):  # random spanning tree keeps it connected
                j = order[rng.integers(i)]
                A[order[i], j] = A[j, order[i]] = True
            deg = A.sum(axis=1)
            if deg.min() > 0:
                break
        dmax = deg.max()
        Q = A / dmax * (1 - min_hold)
        np.fill_diagonal(Q, 0.0)
        np.fill_diagonal(Q, 1.0 - Q.sum(axis=1))
        return cls(Q)


def _eigen(chain: FiniteChain):
    vals, vecs = np.linalg.eigh(chain.Q)
    return vals, vecs


def _norm_decay_coeffs(vecs, members):
    ind = np.zeros(vecs.shape[0])
    ind[list(members)] = 1.0
    return (vecs.T @ ind) ** 2  # ||Q^k 1_W||^2 = sum_i coeffs_i * vals_i^(2k)


def indicator_decay_time(
    chain: FiniteChain, n: int, level: int, k_cap: int = DECAY_K_CAP
):
    """Least k with ||Q^k 1_W||^2 <= 2^-level ||1_W||^2 for every |W| <= n.

    Exhaustive over nonempty subsets.  Returns INFINITE when the limiting
    squared norm (the unit-modulus spectral mass of some indicator) already
    violates the threshold; the limit is exact from the dense eigensystem.
    """
    if n > SUBSET_SIZE_CAP:
        raise SizeCapError(f"subset size {n} above cap {SUBSET_SIZE_CAP}")
    if n < 1 or level < 1:
        raise ValueError("n and level must be >= 1")
    vals, vecs = _eigen(chain)
    lam2 = vals**2
    unit = lam2 >= 1.0 - 1e-12
    worst = 0
    for size in range(1, min(n, chain.size) + 1):
        thr = 2.0**-level * size
        for members in itertools.combinations(range(chain.size), size):
            coeffs = _norm_decay_coeffs(vecs, members)
            limit = float(coeffs[unit].sum())
            if limit > thr * (1 + 1e-9):
                return INFINITE  # certified: the norm decreases to a limit above the threshold
            if limit > thr - 1e-9 * max(thr, 1.0):
                # knife edge: the limit equals the threshold.  The condition is
                # attained at finite k only if the entire sub-unit spectral
                # mass sits on exactly-zero eigenvalues; otherwise the norm
                # stays strictly above the threshold forever.
                residual_pos = float(coeffs[(~unit) & (lam2 > 1e-18)].sum())
                if residual_pos > 1e-12:
                    return INFINITE

            def norm2(k):
                return float(coeffs @ lam2**k)

            if norm2(0) <= thr:
                continue
            lo, hi = 0, 1
            while norm2(hi) > thr:
                hi *= 2
                if hi > k_cap:
                    raise NoConvergenceError(f"decay time exceeds cap {k_cap}")
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if norm2(mid) <= thr:
                    hi = mid
                else:
                    lo = mid
            worst = max(worst, hi)
    return worst


def indicator_decay_time_oracle(chain: FiniteChain, n: int, level: int, k_cap: int = DECAY_K_CAP):
    """Independent oracle: direct matrix powering with a linear scan in k."""
    if n > SUBSET_SIZE_CAP:
        raise SizeCapError(f"subset size {n} above cap {SUBSET_SIZE_CAP}")
    subsets = []
    for size in range(1, min(n, chain.size) + 1):
        subsets.extend(itertools.combinations(range(chain.size), size))
    worst = 0
    for members in subsets:
        ind = np.zeros(chain.size)
        ind[list(members)] = 1.0
        thr = 2.0**-level * len(members)
        vec = ind.copy()
        k = 0
        while float(vec @ vec) > thr:
            vec = chain.Q @ vec
            k += 1
            if k > k_cap:
                return INFINITE
        worst = max(worst, k)
    return worst


def spectral_profile_exhaustive(chain: FiniteChain, m: int) -> float:
    """Exact minimum Dirichlet eigenvalue of I - Q over subsets of size <= m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    m = min(m, chain.size)
    if chain.size > CHAIN_CAP:
        raise SizeCapError("chain too large")
    A = np.eye(chain.size) - chain.Q
    best = math.inf
    for size in range(1, m + 1):
        for members in itertools.combinations(range(chain.size), size):
            sub = A[np.ix_(members, members)]
            best = min(best, float(np.linalg.eigvalsh(sub)[0]))
    return best


def decay_time_spectral_bound_check(chain: FiniteChain, n: int, level: int) -> dict:
    """Check decay_time(n, level) <= level*log2 / spectral_profile(n * 2^(level+1)).

    VACUOUS when the volume argument reaches the chain size (the profile is 0
    there for irreducible chains and the right side is infinite).
    """
    volume = n * 2 ** (level + 1)
    if volume >= chain.size:
        return {"status": "VACUOUS", "volume": volume}
    lam = spectral_profile_exhaustive(chain, volume)
    chi = indicator_decay_time(chain, n, level)
    if lam <= 0:
        return {"status": "VACUOUS", "volume": volume, "spectral": lam}
    rhs = level * math.log(2.0) / lam
    if chi == INFINITE:
        return {"status": "VIOLATION", "chi": chi, "rhs": rhs}
    ok = chi <= rhs + 1e-9
    return {
        "status": "PASS" if ok else "VIOLATION",
        "chi": chi,
        "rhs": rhs,
        "slack": rhs - chi,
        "spectral": lam,
    }


# ---------------------------------------------------------------------------
# measured-wall metric
# ---------------------------------------------------------------------------


@dataclass
class WallMetricContext:
    """Witness-set wall metric on a group, via translate-overlap counting.

    With counting Haar measure the overlap term equals #{g in x W^-1 : y in
    g W}, so the distance is |W| - |x W^-1 meet y W^-1| computed from
    canonical keys in O(|W|) per query.
    """

    ball: CayleyBall
    members: tuple[int, ...]
    _inv_elems: list = field(init=False, repr=False)

    def __post_init__(self):
        group = self.ball.group
        self._inv_elems = [group.inverse(self.ball.element(i)) for i in self.members]

    @property
    def volume(self) -> int:
        return len(self.members)

    def translate_keys(self, x) -> frozenset:
        group = self.ball.group
        return frozenset(group.key(group.compose(x, w_inv)) for w_inv in self._inv_elems)

    def distance_elements(self, x, y) -> int:
        overlap = len(self.translate_keys(x) & self.translate_keys(y))
        return self.volume - overlap

    def distance(self, i: int, j: int) -> int:
        return self.distance_elements(self.ball.element(i), self.ball.element(j))

    def distances_from_identity(self) -> np.ndarray:
        """d(o, z) for every ball element z (vectorized over the ball)."""
        group = self.ball.group
        base = self.translate_keys(group.identity())
        out = np.empty(self.ball.size, dtype=np.int64)
        for i in range(self.ball.size):
            out[i] = self.volume - len(base & self.translate_keys(self.ball.element(i)))
        return out


def wall_normalization_check(ctx: WallMetricContext, kernel: Kernel) -> dict:
    """Verify max edge increment of the wall metric against the boundary bound.

    The bound is (max_e deg(o)/deg_e(o)) * ratio(W) * |W|; on a Cayley graph
    each oriented-edge orbit meets the identity star once, so the degree
    ratio is deg(o) and the bound equals the number of oriented boundary
    edges of W.  The maximum is exact over all edges with an endpoint in
    W union its outer shell (translation invariance covers the rest).
    """
    from .profiles import boundary_ratio

    ball = ctx.ball
    group = ball.group
    window = set(ctx.members)
    for i in list(window):
        for t in ball.adjacency[i]:
            if t != -1:
                window.add(int(t))
    max_inc = 0
    for i in sorted(window):
        x = ball.element(i)
        for j, g in enumerate(group.generators):
            t = ball.adjacency[i, j]
            if t == -1:
                continue
            d = ctx.distance(i, int(t))
            max_inc = max(max_inc, d)
    ratio = boundary_ratio(ball, kernel, ctx.members)
    deg = group.degree
    bound = deg * float(ratio) * ctx.volume
    return {"max_increment": max_inc, "bound": bound, "pass": max_inc <= bound + 1e-9}


def first_moment_identity_check(
    ctx: WallMetricContext, kernel: Kernel, k: int, leak_budget: float = 1e-9
) -> dict:
    """Two routes to E[|W| - d(X_0, X_k)], which must agree to 1e-9.

    Route one evolves from the identity and averages |W| - d over the exact
    distribution; route two evolves from the uniform distribution on W and
    returns |W| * P_W(X_k in W).  Unimodularity (counting Haar) makes these
    equal.  Raises LeakageError when either evolution leaks more than the
    budget, since the identity is only exact on the full group.
    """
    ball = ctx.ball
    dist = evolve(ball, kernel, k)
    if dist.leaked > leak_budget:
        raise LeakageError(f"identity-start leakage {dist.leaked:.2e} above budget")
    wall = ctx.distances_from_identity()
    lhs = float(dist.p @ (ctx.volume - wall))

    start = np.zeros(ball.size)
    start[list(ctx.members)] = 1.0 / ctx.volume
    dist2 = evolve(ball, kernel, k, start=start)
    if dist2.leaked > leak_budget:
        raise LeakageError(f"uniform-start leakage {dist2.leaked:.2e} above budget")
    rhs = ctx.volume * float(dist2.p[list(ctx.members)].sum())
    return {"lhs": lhs, "rhs": rhs, "diff": abs(lhs - rhs), "pass": abs(lhs - rhs) <= 1e-9}


def wall_distance_tail_check(
    ctx: WallMetricContext,
    kernel: Kernel,
    level: int,
    k: int,
    certify: str = "direct",
    certified_k: float | None = None,
) -> dict:
    """Check P(d_wall(X_0, X_k) <= |W|/2) <= 2^(1 - level/2).

    The bound requires k at or past the indicator-decay time; two
    certificates are supported.  "direct" verifies the per-witness condition
    <1_W, Q^(2k) 1_W> <= 2^-level |W| (sufficient via Cauchy-Schwarz for the
    first-moment bound this check rests on), with truncation leakage added to
    the upper side so the certificate stays rigorous.  "given" trusts
    ``certified_k`` (for instance the spectral-bound value computed from an
    exact profile) and requires k >= certified_k.

    The measured probability uses the killed distribution plus leaked mass,
    an upper bound on the true probability.
    """
    ball = ctx.ball
    threshold = 2.0 ** (1 - level / 2)
    if certify == "direct":
        start = np.zeros(ball.size)
        start[list(ctx.members)] = 1.0 / ctx.volume
        dist2 = evolve(ball, kernel, 2 * k, start=start)
        corr = ctx.volume * (float(dist2.p[list(ctx.members)].sum()) + dist2.leaked)
        certified = corr <= 2.0**-level * ctx.volume
        cert_info = {"norm_sq_upper": corr, "norm_sq_threshold": 2.0**-level * ctx.volume}
    elif certify == "given":
        if certified_k is None:
            raise ValueError("certified_k required")
        certified = k >= certified_k
        cert_info = {"certified_k": certified_k}
    else:
        raise ValueError("certify must be 'direct' or 'given'")
    if not certified:
        return {"status": "NOT_CERTIFIED", **cert_info}
    dist = evolve(ball, kernel, k)
    wall = ctx.distances_from_identity()
    mass_close = float(dist.p[wall <= ctx.volume / 2].sum()) + dist.leaked
    ok = mass_close <= threshold + 1e-12
    return {
        "status": "PASS" if ok else "VIOLATION",
        "measured_upper": mass_close,
        "threshold": threshold,
        "leaked": dist.leaked,
        **cert_info,
    }
