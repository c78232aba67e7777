"""Proof machinery: decay times, spectral-bound checks, wall metrics."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest

from walklab import groups, prooflab
from walklab.errors import LeakageError, SizeCapError
from walklab.groups import enumerate_ball
from walklab.kernels import Kernel
from walklab.prooflab import (
    INFINITE,
    FiniteChain,
    WallMetricContext,
    decay_time_spectral_bound_check,
    first_moment_identity_check,
    indicator_decay_time,
    indicator_decay_time_oracle,
    spectral_profile_exhaustive,
    wall_distance_tail_check,
    wall_normalization_check,
)


def test_chain_validation():
    with pytest.raises(ValueError):
        FiniteChain(np.array([[0.5, 0.6], [0.6, 0.5]]))
    with pytest.raises(ValueError):
        FiniteChain(np.array([[0.5, 0.5], [0.4, 0.6]]))
    with pytest.raises(SizeCapError):
        FiniteChain(np.eye(17))


def test_decay_time_identity_infinite():
    assert indicator_decay_time(FiniteChain(np.eye(3)), 1, 1) == INFINITE


def test_decay_time_two_state_hand_value():
    # ||Q 1_x||^2 = 1/2 for the uniform two-state chain
    ch = FiniteChain(np.array([[0.5, 0.5], [0.5, 0.5]]))
    assert indicator_decay_time(ch, 1, 1) == 1


def test_decay_time_monotone_random_chains():
    rng = np.random.default_rng(17)
    for _ in range(12):
        ch = FiniteChain.random_metropolis(9, rng)
        vals = {}
        for n in (1, 2, 3):
            for l in (1, 2, 3):
                v = indicator_decay_time(ch, n, l)
                vals[(n, l)] = 10**9 if v == INFINITE else v
        for l in (1, 2, 3):
            assert vals[(1, l)] <= vals[(2, l)] <= vals[(3, l)]
        for n in (1, 2, 3):
            assert vals[(n, 1)] <= vals[(n, 2)] <= vals[(n, 3)]


def test_decay_time_agrees_with_powering_oracle():
    rng = np.random.default_rng(23)
    for _ in range(25):
        ch = FiniteChain.random_metropolis(8, rng)
        for (n, l) in [(1, 1), (2, 1), (1, 2)]:
            # clean regime: limit mass n^2/|V| is well below the threshold n 2^-l
            assert n * n / 8 < 2.0**-l * n * 0.9
            assert indicator_decay_time(ch, n, l) == indicator_decay_time_oracle(ch, n, l)


def test_spectral_profile_exhaustive_cases():
    rng = np.random.default_rng(3)
    ch = FiniteChain.random_metropolis(8, rng)
    assert spectral_profile_exhaustive(ch, 8) == pytest.approx(0.0, abs=1e-12)
    # lazy path of 3: singleton Dirichlet form is 1 - max hold
    Q = np.array([[0.6, 0.4, 0.0], [0.4, 0.2, 0.4], [0.0, 0.4, 0.6]])
    ch3 = FiniteChain(Q)
    assert spectral_profile_exhaustive(ch3, 1) == pytest.approx(1 - 0.6, abs=1e-12)
    # nonincreasing in m
    vals = [spectral_profile_exhaustive(ch, m) for m in range(1, 9)]
    assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))


def test_spectral_profile_matches_ball_gap(z1_ball12, z1_kernel):
    # common instance: the killed path of 5 inside the lattice ball equals the
    # finite-chain profile of the lazy-free path matrix restricted suitably
    from walklab.profiles import dirichlet_gap

    members = tuple(z1_ball12.key_to_index[z1_ball12.group.key((x,))] for x in range(5))
    g = dirichlet_gap(z1_ball12, z1_kernel, members)
    Q = np.zeros((7, 7))
    for i in range(7):
        if i > 0:
            Q[i, i - 1] = 0.5
        if i < 6:
            Q[i, i + 1] = 0.5
    Q[0, 0] = 0.5
    Q[6, 6] = 0.5
    ch = FiniteChain(Q)
    # interior 5-subset of the 7-path carries the same killed block
    sub = frozenset(range(1, 6))
    A = np.eye(5) - Q[1:6, 1:6]
    assert g.value == pytest.approx(float(np.linalg.eigvalsh(A)[0]), abs=1e-12)


def test_bound_check_vacuous_and_pass():
    rng = np.random.default_rng(8)
    ch = FiniteChain.random_metropolis(12, rng)
    rep = decay_time_spectral_bound_check(ch, 3, 1)  # 3 * 4 = 12 >= |V|
    assert rep["status"] == "VACUOUS"
    cyc = FiniteChain.lazy_cycle(12)
    rep = decay_time_spectral_bound_check(cyc, 2, 1)
    assert rep["status"] == "PASS" and rep["slack"] >= 0


def test_chi_lower_companion_positive():
    # the decay time at level 1 times the spectral profile stays bounded away
    # from zero on the random suite; 0.05 is an empirical floor
    rng = np.random.default_rng(31)
    ratios = []
    for _ in range(30):
        ch = FiniteChain.random_metropolis(10, rng)
        chi = indicator_decay_time(ch, 2, 1)
        lam = spectral_profile_exhaustive(ch, 2)
        assert chi != INFINITE
        ratios.append(chi * lam)
    assert min(ratios) > 0.05


# --- wall metric ----------------------------------------------------------------


def _z_interval_ctx(ball, m):
    group = ball.group
    members = tuple(ball.key_to_index[group.key((x,))] for x in range(m))
    return WallMetricContext(ball, members)


def test_wall_metric_z_interval(z1_ball12):
    ctx = _z_interval_ctx(z1_ball12, 5)
    z1 = z1_ball12.group
    for j in range(0, 9):
        idx = z1_ball12.key_to_index[z1.key((j,))]
        assert ctx.distance(0, idx) == min(j, 5)


def test_wall_metric_identity_and_cap(z2_ball11):
    members = tuple(range(6))
    ctx = WallMetricContext(z2_ball11, members)
    assert ctx.distance(0, 0) == 0
    far = z2_ball11.size - 1
    assert ctx.distance(0, far) <= ctx.volume
    # far-apart pair saturates at |W|
    z2 = z2_ball11.group
    idx = z2_ball11.key_to_index[z2.key((11, 0))]
    assert ctx.distance(0, idx) == ctx.volume


def test_wall_metric_pseudometric_random_triples(z2_ball11, ll_ball11):
    rng = random.Random(1)
    for ball, w in ((z2_ball11, tuple(range(7))), (ll_ball11, tuple(range(6)))):
        ctx = WallMetricContext(ball, w)
        for _ in range(300):
            i, j, k = (rng.randrange(ball.size) for _ in range(3))
            dij, djk, dik = ctx.distance(i, j), ctx.distance(j, k), ctx.distance(i, k)
            assert dij >= 0 and dij == ctx.distance(j, i)
            assert dik <= dij + djk
        assert ctx.distance(3, 3) == 0


def test_normalized_wall_metric_lipschitz(z2_ball11, z2_kernel):
    # max edge increment normalizes the metric below the graph distance
    ctx = WallMetricContext(z2_ball11, tuple(range(8)))
    rep = wall_normalization_check(ctx, z2_kernel)
    inc = max(rep["max_increment"], 1)
    wall = ctx.distances_from_identity()
    radii = z2_ball11.radii.astype(int)
    for i in range(0, z2_ball11.size, 13):
        assert wall[i] / inc <= radii[i] + 1e-12


def test_normalization_checks(z1_ball12, z1_kernel, z2_ball11, z2_kernel):
    ctx = _z_interval_ctx(z1_ball12, 6)
    rep = wall_normalization_check(ctx, z1_kernel)
    assert rep["pass"] and rep["max_increment"] == 1 and rep["bound"] == pytest.approx(2.0)
    z2 = z2_ball11.group
    square = tuple(z2_ball11.key_to_index[z2.key((x, y))] for x in range(2) for y in range(2))
    rep2 = wall_normalization_check(WallMetricContext(z2_ball11, square), z2_kernel)
    assert rep2["pass"]
    degenerate = wall_normalization_check(WallMetricContext(z2_ball11, (0,)), z2_kernel)
    assert degenerate["pass"] and degenerate["max_increment"] <= 1


def test_first_moment_identity(z1, z1_kernel):
    ball = enumerate_ball(z1, 16)
    ctx = _z_interval_ctx(ball, 5)
    rep0 = first_moment_identity_check(ctx, z1_kernel, 0)
    assert rep0["diff"] == 0.0 and rep0["lhs"] == pytest.approx(5.0)
    rep = first_moment_identity_check(ctx, z1_kernel, 4)
    assert rep["pass"] and rep["diff"] <= 1e-10


def test_first_moment_leakage_error(z1, z1_kernel):
    ball = enumerate_ball(z1, 6)
    ctx = _z_interval_ctx(ball, 4)
    with pytest.raises(LeakageError):
        first_moment_identity_check(ctx, z1_kernel, 12)


def test_wall_tail_check_vacuous_level2(z1_ball12, z1_kernel):
    ctx = _z_interval_ctx(z1_ball12, 4)
    rep = wall_distance_tail_check(ctx, z1_kernel, level=2, k=2)
    # threshold 2^0 = 1: any certified instance passes vacuously
    if rep["status"] != "NOT_CERTIFIED":
        assert rep["status"] == "PASS" and rep["threshold"] == 1.0


def test_wall_tail_check_z_direct(z1, z1_kernel):
    ball = enumerate_ball(z1, 700)
    ctx = _z_interval_ctx(ball, 4)
    rep = wall_distance_tail_check(ctx, z1_kernel, level=4, k=330)
    assert rep["status"] == "PASS"
    assert rep["measured_upper"] <= rep["threshold"]
