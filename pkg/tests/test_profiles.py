"""Profile machinery: set functionals, exhaustion, witness search, growth bounds."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from walklab import groups, profiles
from walklab.errors import DegenerateError, EmptySetError, SizeCapError
from walklab.groups import enumerate_ball
from walklab.kernels import Kernel
from walklab.profiles import (
    EXACT,
    LOWER,
    UPPER,
    ProfilePoint,
    ProfileTable,
    boundary_ratio,
    cheeger_consistency,
    connected_subsets_containing,
    dirichlet_gap,
    iso_lower_from_growth,
    iso_upper_from_growth,
    profile_exact_small,
    profile_upper,
)


def _interval_indices(ball, n, offset=0):
    z1 = ball.group
    return tuple(ball.key_to_index[z1.key((x,))] for x in range(offset, offset + n))


# --- boundary ratio ----------------------------------------------------------


def test_boundary_ratio_single_vertex(z1_ball12, z1_kernel, z2_ball11, z2_kernel):
    assert boundary_ratio(z1_ball12, z1_kernel, (0,)) == 1
    assert boundary_ratio(z2_ball11, z2_kernel, (0,)) == 1


def test_boundary_ratio_z_interval(z1_ball12, z1_kernel):
    for n in (2, 3, 5, 8):
        members = _interval_indices(z1_ball12, n)
        assert boundary_ratio(z1_ball12, z1_kernel, members) == Fraction(1, n)


def test_boundary_ratio_z2_square(z2_ball11, z2_kernel):
    z2 = z2_ball11.group
    m = 3
    members = tuple(
        z2_ball11.key_to_index[z2.key((x, y))] for x in range(m) for y in range(m)
    )
    # 4m boundary edges each carrying 1/4
    assert boundary_ratio(z2_ball11, z2_kernel, members) == Fraction(4 * m, 4) / (m * m)


def test_boundary_ratio_empty_error(z1_ball12, z1_kernel):
    with pytest.raises(EmptySetError):
        boundary_ratio(z1_ball12, z1_kernel, ())


# --- Dirichlet gap -----------------------------------------------------------


def test_gap_single_vertex(z1_ball12, z1_kernel):
    g = dirichlet_gap(z1_ball12, z1_kernel, (0,))
    assert g.value == pytest.approx(1.0, abs=1e-12)
    assert g.converged


def test_gap_path_closed_form(z1_ball12, z1_kernel):
    for n in (2, 4, 7, 10):
        members = _interval_indices(z1_ball12, n)
        g = dirichlet_gap(z1_ball12, z1_kernel, members)
        assert g.value == pytest.approx(1 - math.cos(math.pi / (n + 1)), abs=1e-12)


def test_gap_square_tensor_oracle(z2_ball11, z2_kernel):
    z2 = z2_ball11.group
    for m in (2, 3):
        members = tuple(
            z2_ball11.key_to_index[z2.key((x, y))] for x in range(m) for y in range(m)
        )
        g = dirichlet_gap(z2_ball11, z2_kernel, members)
        oracle = 1 - 0.5 * (math.cos(math.pi / (m + 1)) + math.cos(math.pi / (m + 1)))
        assert g.value == pytest.approx(oracle, abs=1e-11)


def test_gap_sparse_path_matches_dense(z1, z1_kernel):
    ball = enumerate_ball(z1, 900)
    members = tuple(range(ball.size))  # whole ball, size 1801 > dense cutoff
    g = dirichlet_gap(ball, z1_kernel, members)
    n = ball.size
    assert g.converged
    assert g.value == pytest.approx(1 - math.cos(math.pi / (n + 1)), rel=1e-8)


def test_gap_bounded_by_ratio_on_witnesses(ll_ball11, ll_kernel):
    # indicator test function: gap(W) <= boundary ratio(W)
    sets = [
        tuple(range(1, 4)),
        tuple(range(8)),
        (0, 1, 2, 5, 9),
    ]
    for members in sets:
        g = dirichlet_gap(ll_ball11, ll_kernel, members)
        assert g.value <= float(boundary_ratio(ll_ball11, ll_kernel, members)) + 1e-10


# --- exhaustive profiles ------------------------------------------------------


def test_connected_enumeration_vs_bruteforce():
    z2 = groups.z_lattice(2)
    ball = enumerate_ball(z2, 4)
    fast = set(connected_subsets_containing(ball, 4))
    adj = ball.adjacency
    brute = set()
    for size in range(1, 5):
        for combo in itertools.combinations(range(ball.size), size):
            if 0 not in combo:
                continue
            # connectivity check
            todo, seen = [combo[0]], {combo[0]}
            cset = set(combo)
            while todo:
                v = todo.pop()
                for t in adj[v]:
                    if t in cset and t not in seen:
                        seen.add(int(t))
                        todo.append(int(t))
            if seen == cset:
                brute.add(tuple(sorted(combo)))
    assert fast == brute


def test_z_exact_profile_values_and_witnesses(z1_exact_profiles):
    iso, gap = z1_exact_profiles
    for p in iso.points:
        assert p.meta["ratio"] == Fraction(1, p.n)
        xs = sorted(p.witness)
        assert xs == list(range(xs[0], xs[0] + p.n)) or len(xs) == p.n
    assert gap.by_n()[1].value == pytest.approx(1.0, abs=1e-12)


def test_z2_exact_profile_n4_square(z2_exact_profiles):
    iso, _ = z2_exact_profiles
    assert iso.by_n()[4].value == pytest.approx(0.5, abs=1e-15)


def test_exact_profile_caps(z1_ball12, z1_kernel):
    with pytest.raises(SizeCapError):
        profile_exact_small(z1_ball12, z1_kernel, 13)


# --- witness search -----------------------------------------------------------


def test_profile_upper_boxes_zd(z2_ball11, z2_kernel):
    iso_up, _ = profile_upper(z2_ball11, z2_kernel, [4, 16, 36, 64], strategy="structured")
    for p in iso_up.points:
        side = int(math.isqrt(p.n))
        assert p.value <= 1.0 / side + 1e-12  # d * side^-1 / d for the square


def test_profile_upper_lamp_intervals(ll_ball14, ll_kernel):
    iso_up, _ = profile_upper(ll_ball14, ll_kernel, [8, 24, 64], strategy="structured")
    got = {p.n: p.value for p in iso_up.points}
    for L in (2, 3, 4):
        n = L * 2**L
        assert got[n] == pytest.approx(2.0 / (3 * L), abs=1e-12)


def test_heuristics_never_beat_exact(z1_ball12, z1_kernel, z1_exact_profiles):
    iso_exact, _ = z1_exact_profiles
    iso_up, _ = profile_upper(z1_ball12, z1_kernel, list(range(1, 9)), strategy="anneal", seed=4)
    exact = iso_exact.by_n()
    for p in iso_up.points:
        if p.n in exact:
            assert p.value >= exact[p.n].value - 1e-12


def test_witness_values_recomputable(z2_ball11, z2_kernel):
    iso_up, _ = profile_upper(z2_ball11, z2_kernel, [9, 25], strategy="greedy")
    for p in iso_up.points:
        assert float(boundary_ratio(z2_ball11, z2_kernel, p.witness)) == pytest.approx(p.value, abs=1e-14)


# --- growth bounds ------------------------------------------------------------


def test_csc_lower_z_formula(z1):
    gt = groups.growth_table(z1, 12)
    low = iso_lower_from_growth(gt, deg=2, n_grid=range(1, 11))
    for p in low.points:
        r = math.ceil((2 * p.n - 1) / 2)
        assert p.value == pytest.approx(1.0 / (4 * r), abs=1e-12)


def test_csc_lower_below_exact(z1_exact_profiles, z2_exact_profiles, z1, z2):
    for group, deg, (iso, _) in ((z1, 2, z1_exact_profiles), (z2, 4, z2_exact_profiles)):
        gt = groups.growth_table(group, 12)
        low = iso_lower_from_growth(gt, deg=deg, n_grid=range(1, 11))
        exact = iso.by_n()
        for p in low.points:
            assert p.value <= exact[p.n].value + 1e-12


def test_growth_upper_consistency_z(z1, z1_exact_profiles):
    gt = groups.growth_table(z1, 90)
    up = iso_upper_from_growth(gt, [20, 40, 80, 120])
    iso, _ = z1_exact_profiles
    for p in up.points:
        assert p.value >= 1.0 / p.n  # never below the true profile
        assert p.value <= 12.0 / p.n  # and within a constant of it


def test_growth_recursion_audit(z1, z2, z1_exact_profiles, z2_exact_profiles):
    # Gr(r+1) >= (1 + value(Gr(r))) Gr(r) for the exact boundary profile
    for group, (iso, _) in ((z1, z1_exact_profiles), (z2, z2_exact_profiles)):
        gt = dict(groups.growth_table(group, 9))
        exact = iso.by_n()
        for r in range(0, 8):
            n = gt[r]
            if n in exact:
                assert gt[r + 1] >= (1 + exact[n].value) * gt[r] - 1e-9


def test_growth_upper_degenerate():
    flat = [(0, 1), (1, 5), (2, 5), (3, 5)]
    with pytest.raises(DegenerateError):
        iso_upper_from_growth(flat, [5])


# --- tables and consistency ----------------------------------------------------


def test_envelope_closure_monotone():
    pts = [ProfilePoint(2, 0.5, UPPER), ProfilePoint(4, 0.7, UPPER), ProfilePoint(8, 0.3, UPPER),
           ProfilePoint(2, 0.2, LOWER), ProfilePoint(4, 0.1, LOWER), ProfilePoint(8, 0.25, LOWER)]
    closed = ProfileTable(pts).envelope_closed()
    uppers = [p.value for p in sorted(closed.points, key=lambda q: q.n) if p.kind == UPPER]
    uppers = [p.value for p in sorted((q for q in closed.points if q.kind == UPPER), key=lambda q: q.n)]
    lowers = [p.value for p in sorted((q for q in closed.points if q.kind == LOWER), key=lambda q: q.n)]
    assert uppers == sorted(uppers, reverse=True)
    assert lowers == sorted(lowers, reverse=True)


def test_cheeger_z_exact(z1_exact_profiles):
    iso, gap = z1_exact_profiles
    rep = cheeger_consistency(iso, gap)
    assert rep["violations"] == []
    for n in range(1, 11):
        i, g = iso.by_n()[n].value, gap.by_n()[n].value
        assert 0.5 * i * i <= g + 1e-12 and g <= i + 1e-12


def test_cheeger_trivial_n1():
    iso = ProfileTable([ProfilePoint(1, 1.0, EXACT)])
    gap = ProfileTable([ProfilePoint(1, 1.0, EXACT)])
    rep = cheeger_consistency(iso, gap)
    assert rep["violations"] == [] and rep["checked"] == 2


def test_cheeger_lamplighter_tables_no_certified_violation(ll, ll_ball14, ll_kernel, ll_exact_profiles):
    iso_up, gap_up = profile_upper(ll_ball14, ll_kernel, [8, 24, 64, 160], strategy="structured", with_gap=True)
    gt = groups.growth_table(ll, 14)
    iso_low = iso_lower_from_growth(gt, deg=3, n_grid=[8, 24, 64, 160])
    iso_all = ProfileTable(iso_up.points + iso_low.points)
    rep = cheeger_consistency(iso_all, gap_up)
    assert rep["violations"] == []
    assert rep["checked"] > 0


def test_cheeger_detects_fabricated_violation():
    # a gap UPPER below half the squared iso LOWER is a certified violation
    iso = ProfileTable([ProfilePoint(4, 0.8, LOWER)])
    gap = ProfileTable([ProfilePoint(4, 0.05, UPPER)])
    rep = cheeger_consistency(iso, gap)
    assert len(rep["violations"]) == 1
    assert rep["violations"][0]["check"] == "half-iso-squared<=gap"
