"""Bound calculus: inverses, orbit constant, displacement bound, transforms, fits."""

from __future__ import annotations

import math

import numpy as np
import pytest

from walklab import groups
from walklab.bounds import (
    BoundReport,
    MonotoneFunction,
    doubling_regime_bound,
    edge_orbit_constant,
    edge_orbit_constant_audit,
    empirical_domination,
    generalized_inverse,
    heat_exponent_transform,
    heat_profile_from_spectral,
    rearrangement_constants_check,
    saturation_exponent_fit,
    small_ball_bound,
    spectral_theta_transform,
)
from walklab.errors import InsufficientDataError, NotDoublingError, OutOfRangeError
from walklab.profiles import EXACT, LOWER, UPPER, ProfilePoint, ProfileTable


def z_iso_model():
    return MonotoneFunction.power_log_model(1.0, 1.0, 0.0, label="iso-z")


def z_gap_model():
    # exact interval gap 1 - cos(pi/(n+1)) is ~ (pi^2/2) n^-2 at scale
    return MonotoneFunction.power_log_model(math.pi**2 / 2, 2.0, 0.0, label="gap-z")


def z_exact_tables(n_values):
    """Analytic EXACT tables for the 1d lattice: intervals are optimal sets.

    Ratio optimality: any set is a union of intervals and the mediant
    inequality favors one interval; gap optimality: the killed operator
    block-decomposes over components and a longer interval has smaller gap.
    """
    iso = ProfileTable(
        [ProfilePoint(n, 1.0 / n, EXACT, "interval") for n in n_values], label="iso-z"
    )
    gap = ProfileTable(
        [ProfilePoint(n, 1 - math.cos(math.pi / (n + 1)), EXACT, "interval") for n in n_values],
        label="gap-z",
    )
    return iso, gap


# --- generalized inverse -------------------------------------------------------


def test_inverse_decreasing_model():
    f = z_iso_model()
    assert generalized_inverse(f, 0.1) == pytest.approx(10.0, rel=1e-9)


def test_inverse_growth_table_integer():
    gt = groups.growth_table(groups.z_lattice(1), 10)
    g = MonotoneFunction.from_growth_table(gt)
    assert generalized_inverse(g, 8) == 4.0  # first r with 2r+1 >= 8
    assert generalized_inverse(g, 1) == 0.0


def test_inverse_constant_out_of_range():
    const = MonotoneFunction(mode="model", direction="increasing", a=2.0)
    with pytest.raises(OutOfRangeError) as err:
        generalized_inverse(const, 5.0)
    assert err.value.side == "above"


def test_inverse_galois_property():
    f = MonotoneFunction.power_log_model(2.0, 0.7, 0.5)
    for x in (0.5, 0.1, 0.02, 0.003):
        t = generalized_inverse(f, x)
        assert f(t) <= x * (1 + 1e-9)
    iso, _ = z_exact_tables(range(1, 40))
    tab = MonotoneFunction.from_profile_table(iso)
    for x in (0.5, 0.21, 0.11, 0.04):
        t = generalized_inverse(tab, x)
        assert tab(t) <= x * (1 + 1e-6)


def test_table_inverse_round_trip():
    iso, _ = z_exact_tables(range(2, 60))
    tab = MonotoneFunction.from_profile_table(iso)
    for n in (3.0, 7.5, 21.0):
        y = tab(n)
        t = generalized_inverse(tab, y)
        assert t == pytest.approx(n, rel=1e-6)


# --- orbit constant -------------------------------------------------------------


@pytest.mark.parametrize(
    "group,expected",
    [
        (groups.z_lattice(1), 0.25),
        (groups.z_lattice(2), 0.125),
        (groups.lamplighter(2, 1), 1 / 6),
        (groups.heisenberg(), 0.125),
        (groups.grigorchuk(), 0.125),
    ],
    ids=lambda x: getattr(x, "name", x),
)
def test_edge_orbit_constant(group, expected):
    assert edge_orbit_constant(group) == pytest.approx(expected)
    ball = groups.enumerate_ball(group, 2)
    assert edge_orbit_constant_audit(ball) == 1


# --- displacement bound ----------------------------------------------------------


def test_bound_vacuous_small_k():
    rep = small_ball_bound(1, 1, z_gap_model(), z_iso_model(), 0.25)
    assert rep.max_level == 0 and rep.rhs == 2.0


def test_bound_hand_evaluated_scan():
    # iso 1/n, gap n^-2 exactly, c = 1/4: condition l*log2*(2^(l+1)*4r)^2 <= k
    iso = MonotoneFunction.power_log_model(1.0, 1.0, 0.0)
    gap = MonotoneFunction.power_log_model(1.0, 2.0, 0.0)
    k, r, c = 10**6, 10, 0.25
    level = 0
    while True:
        cand = level + 1
        arg = 2.0 ** (cand + 1) * (r / c)
        if cand * math.log(2) * arg * arg <= k:
            level = cand
        else:
            break
    rep = small_ball_bound(k, r, gap, iso, c)
    assert rep.max_level == level
    assert rep.rhs == pytest.approx(2 * math.exp(-0.5 * math.log(2) * level))


def test_bound_monotone_in_k_and_r():
    gap = MonotoneFunction.power_log_model(1.0, 0.0, 2.0)  # (log n)^-2
    iso = MonotoneFunction.power_log_model(1.0, 0.0, 1.0)  # 1/log n
    rhs_by_k = [small_ball_bound(k, 4, gap, iso, 1 / 6).rhs for k in (16, 64, 256, 1024, 4096)]
    assert all(a >= b for a, b in zip(rhs_by_k, rhs_by_k[1:]))
    rhs_by_r = [small_ball_bound(1024, r, gap, iso, 1 / 6).rhs for r in (1, 2, 4, 8)]
    assert all(a <= b for a, b in zip(rhs_by_r, rhs_by_r[1:]))


def test_bound_extrapolation_flag():
    iso, gap = z_exact_tables(range(1, 12))
    iso_fn = MonotoneFunction.from_profile_table(iso)
    gap_fn = MonotoneFunction.from_profile_table(gap)
    rep = small_ball_bound(10**9, 1, gap_fn, iso_fn, 0.25)
    assert rep.extrapolated  # needs the gap table far beyond n=12


# --- heat transforms ---------------------------------------------------------------


def test_heat_profile_closed_forms():
    assert heat_profile_from_spectral(lambda x: 1.0, 3.0) == pytest.approx(math.exp(3.0), rel=1e-6)
    for d in (2, 3):
        fn = lambda x: x ** (-2.0 / d)
        for t in (1.0, 5.0, 20.0):
            assert heat_profile_from_spectral(fn, t) == pytest.approx(
                (1 + 2 * t / d) ** (d / 2), rel=1e-6
            )
    loglam = lambda x: 1.0 / max(math.log(x), 1e-300) ** 2 if x > 1 else 1e12
    for t in (2.0, 9.0, 40.0):
        assert heat_profile_from_spectral(loglam, t) == pytest.approx(
            math.exp((3 * t) ** (1 / 3)), rel=1e-6
        )


def test_heat_profile_increasing():
    fn = lambda x: x ** (-0.5)
    vals = [heat_profile_from_spectral(fn, t) for t in (1, 2, 4, 8)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_heat_exponent_transform_cases():
    tr = heat_exponent_transform(lambda x: 1.0)
    assert tr(7.0) == 7.0 and tr.inverse(7.0) == pytest.approx(7.0, rel=1e-9)
    lam = lambda x: 1.0 / max(math.log(x), 1e-300) ** 2
    tr2 = heat_exponent_transform(lam)
    x = 5.0
    assert tr2(x) == pytest.approx(x**3 * math.log(2) ** 2, rel=1e-12)
    n = 1000.0
    assert tr2.inverse(n) == pytest.approx((n / math.log(2) ** 2) ** (1 / 3), rel=1e-6)


def test_transform_agreement_on_lamp_model():
    # exp[-inverse-transform(n)] and 1/heat-profile(2n) agree within a
    # constant factor in the exponent on the (log x)^-2 model
    lam = lambda x: 1.0 / max(math.log(x), 1e-300) ** 2 if x > 1 else 1e12
    tr = heat_exponent_transform(lam)
    ratios = []
    for n in [2.0**j for j in range(6, 17)]:
        a = tr.inverse(n)
        b = math.log(heat_profile_from_spectral(lam, 2 * n))
        ratios.append(b / a)
    assert all(0.5 <= r <= 3.0 for r in ratios)
    assert max(ratios) / min(ratios) <= 1.1


# --- doubling-regime bound -----------------------------------------------------------


def test_doubling_regime_bound_requires_doubling():
    poly = MonotoneFunction.power_log_model(1.0, 1.0, 0.0)
    with pytest.raises(NotDoublingError):
        doubling_regime_bound(100, 4, 2.0, 0.5, poly)


def test_doubling_regime_bound_small_k_escape():
    lam = MonotoneFunction.power_log_model(1.0, 0.0, 2.0)
    rep = doubling_regime_bound(50, 8, 2.0, 0.5, lam)
    assert rep["value"] == pytest.approx(math.exp(-0.5 * 50 / 64))
    assert rep["value"] == rep["escape_regime"]


def test_doubling_regime_crossover():
    lam = MonotoneFunction.power_log_model(1.0, 0.0, 2.0)
    rep = doubling_regime_bound(10**6, 2, 2.0, 0.5, lam)
    assert rep["value"] == rep["heat_regime"]  # large k: the heat term wins
    assert rep["crossover_k"] is not None and rep["crossover_k"] > 1


# --- fits ------------------------------------------------------------------------------


def test_saturation_fit_z():
    ns = sorted(set(int(round(2 ** (j / 2))) for j in range(4, 21)))
    iso, gap = z_exact_tables(ns)
    rep = saturation_exponent_fit(iso, gap)
    assert abs(rep["alpha"] - 2.0) <= 0.2


def test_saturation_fit_identity():
    ns = [2, 4, 8, 16, 32, 64, 128]
    iso = ProfileTable([ProfilePoint(n, 1.0 / n, EXACT) for n in ns])
    rep = saturation_exponent_fit(iso, iso)
    assert rep["alpha"] == pytest.approx(1.0, abs=1e-9)


def test_saturation_fit_z2_models():
    ns = [m * m for m in (8, 12, 16, 24, 32, 48, 64, 96, 128)]
    iso = ProfileTable([ProfilePoint(n, n**-0.5, UPPER) for n in ns])
    gap = ProfileTable(
        [ProfilePoint(n, 1 - math.cos(math.pi / (math.isqrt(n) + 1)), UPPER) for n in ns]
    )
    rep = saturation_exponent_fit(iso, gap)
    assert abs(rep["alpha"] - 2.0) <= 0.2


def test_saturation_fit_insufficient():
    iso = ProfileTable([ProfilePoint(2, 0.5, EXACT), ProfilePoint(4, 0.25, EXACT)])
    with pytest.raises(InsufficientDataError):
        saturation_exponent_fit(iso, iso)


def test_rearrangement_check_z_and_violation():
    ns = sorted(set(int(round(2 ** (j / 2))) for j in range(2, 25)))
    iso, gap = z_exact_tables(ns)
    iso_fn = MonotoneFunction.from_profile_table(iso)
    gap_fn = MonotoneFunction.from_profile_table(gap)
    eps = [2.0**-j for j in range(1, 9)]
    rep = rearrangement_constants_check(iso_fn, gap_fn, eps)
    assert not rep["violation"]
    assert rep["best"][1] < 20.0
    # fabricated: gap := iso makes eps^2 unreachable for small eps
    rep_bad = rearrangement_constants_check(iso_fn, iso_fn, eps)
    assert rep_bad["violation"]


def test_spectral_theta_transform():
    ns = [2, 4, 8]
    tab = ProfileTable([ProfilePoint(n, 1.0 / n, EXACT) for n in ns])
    out = spectral_theta_transform(tab, 0.5)
    assert [p.value for p in out.points] == [0.25, 0.125, 0.0625]
    assert all(p.kind == LOWER for p in out.points)


def test_empirical_domination_z_small():
    from walklab.kernels import Kernel
    from walklab.walks import small_ball_probability

    z1 = groups.z_lattice(1)
    ball = groups.enumerate_ball(z1, 70)
    ker = Kernel.uniform(z1)
    measured = {}
    for k in (8, 16, 32, 64):
        for r in (1, 2, 4):
            lo, hi = small_ball_probability(ball, ker, k, r)
            measured[(k, r)] = hi
    iso, gap = z_exact_tables(range(1, 600))
    rep = empirical_domination(
        measured,
        MonotoneFunction.from_profile_table(gap),
        MonotoneFunction.from_profile_table(iso),
        edge_orbit_constant(z1),
    )
    assert rep["violations"] == []
    assert any(row["max_level"] > 0 for row in rep["rows"])
