"""Bound calculus: monotone function objects, generalized inverses, the main
small-ball displacement bound, heat-kernel transforms, and fits.

MonotoneFunction wraps either an analytic power-log model a * x^p * (log x)^q
or a monotone log-log interpolation of a profile table.  Each instance
carries a certified argument range; evaluation outside the range follows the
extrapolation policy (models extend, tables clamp) and raises a soft flag
that bound reports collect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import (
    InsufficientDataError,
    NoConvergenceError,
    NotDoublingError,
    OutOfRangeError,
)
from .groups import CayleyBall, GroupSpec
from .profiles import EXACT, LOWER, UPPER, ProfileTable

LEVEL_SCAN_CAP = 128


@dataclass
class MonotoneFunction:
    """Monotone function with generalized inverse and range tracking.

    ``mode`` is "model" (analytic a*x^p*(log x)^q, natural log), "loglog"
    (piecewise linear in log-log through table points), or "step"
    (right-continuous step through integer table points, used for growth
    tables so inverses land on integer grid values).
    """

    mode: str
    direction: str  # "increasing" | "decreasing"
    a: float = 1.0
    p: float = 0.0
    q: float = 0.0
    xs: np.ndarray | None = None
    ys: np.ndarray | None = None
    certified: tuple[float, float] = (2.0, math.inf)
    label: str = ""

    @classmethod
    def power_log_model(cls, a: float, p: float, q: float, label: str = "") -> "MonotoneFunction":
        """Profile model a * n^-p * (log n)^-q with p, q >= 0 (decreasing)."""
        if a <= 0 or p < 0 or q < 0:
            raise ValueError("need a > 0 and p, q >= 0")
        direction = "decreasing" if (p > 0 or q > 0) else "increasing"
        return cls(mode="model", direction=direction, a=a, p=-p, q=-q, label=label)

    @classmethod
    def from_profile_table(cls, table: ProfileTable, kinds=(EXACT, UPPER, LOWER), label: str = "") -> "MonotoneFunction":
        pts = sorted((p.n, p.value) for p in table.points if p.kind in kinds)
        if len(pts) < 2:
            raise InsufficientDataError("need at least two table points")
        xs = np.array([max(float(n), 1.0) for n, _ in pts])
        ys = np.array([float(v) for _, v in pts])
        if np.any(ys <= 0):
            raise ValueError("table values must be positive")
        # enforce nonincreasing values (profile tables are envelope-closed)
        ys = np.minimum.accumulate(ys)
        return cls(
            mode="loglog",
            direction="decreasing",
            xs=xs,
            ys=ys,
            certified=(float(xs[0]), float(xs[-1])),
            label=label or table.label,
        )

    @classmethod
    def from_growth_table(cls, growth, label: str = "growth") -> "MonotoneFunction":
        xs = np.array([float(r) for r, _ in growth])
        ys = np.array([float(c) for _, c in growth])
        return cls(
            mode="step",
            direction="increasing",
            xs=xs,
            ys=ys,
            certified=(float(xs[0]), float(xs[-1])),
            label=label,
        )

    # -- evaluation ---------------------------------------------------------

    def eval_flagged(self, x: float) -> tuple[float, bool]:
        """(value, extrapolation_flag)."""
        flag = not (self.certified[0] <= x <= self.certified[1])
        if self.mode == "model":
            if x < 1.0:
                x = 1.0
            lx = math.log(x) if x > 1.0 else 0.0
            if self.q != 0.0 and lx == 0.0:
                lx = 1e-12
            return self.a * math.exp(self.p * math.log(x) + self.q * math.log(lx)) if lx > 0 else self.a, flag
        xs, ys = self.xs, self.ys
        if x <= xs[0]:
            return float(ys[0]), flag
        if x >= xs[-1]:
            return float(ys[-1]), flag
        if self.mode == "step":
            i = int(np.searchsorted(xs, x, side="right")) - 1
            return float(ys[i]), flag
        lx = math.log(x)
        lv = np.interp(lx, np.log(xs), np.log(ys))
        return math.exp(lv), flag

    def __call__(self, x: float) -> float:
        return self.eval_flagged(x)[0]

    # -- generalized inverse -------------------------------------------------

    def inverse(self, y: float) -> float:
        return generalized_inverse(self, y)


def generalized_inverse(f: MonotoneFunction, y: float, hi_cap: float = 1e60) -> float:
    """inf{t : f(t) <= y} for decreasing f, inf{t : f(t) >= y} for increasing f.

    Raises OutOfRangeError (with a side indicator) when no t in the search
    domain satisfies the condition, or when the condition holds everywhere
    below the domain floor.
    """
    lo = 1.0
    if f.mode in ("loglog", "step"):
        cond = (lambda t: f(t) <= y) if f.direction == "decreasing" else (lambda t: f(t) >= y)
        xs = f.xs
        if f.mode == "step":
            for t in xs:
                if cond(float(t)):
                    return float(t)
            raise OutOfRangeError(f"{y} not reached by table", side="above" if f.direction == "increasing" else "below")
        # piecewise log-log: scan segments, solve inside the bracketing one
        vals = f.ys
        if cond(float(xs[0])):
            return float(xs[0])
        for i in range(1, len(xs)):
            if cond(float(xs[i])):
                la, lb = math.log(xs[i - 1]), math.log(xs[i])
                va, vb = math.log(vals[i - 1]), math.log(vals[i])
                if va == vb:
                    return float(xs[i])
                t = la + (math.log(y) - va) * (lb - la) / (vb - va)
                return math.exp(min(max(t, la), lb))
        raise OutOfRangeError(f"{y} outside table range", side="below" if f.direction == "decreasing" else "above")
    # analytic model: expanding bracket + bisection in log space
    cond = (lambda t: f(t) <= y) if f.direction == "decreasing" else (lambda t: f(t) >= y)
    if cond(lo):
        return lo
    hi = 2.0
    while not cond(hi):
        hi *= 4.0
        if hi > hi_cap:
            raise OutOfRangeError(f"{y} not attained below {hi_cap}", side="below" if f.direction == "decreasing" else "above")
    llo, lhi = math.log(hi / 4.0), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (llo + lhi)
        if cond(math.exp(mid)):
            lhi = mid
        else:
            llo = mid
    return math.exp(lhi)


# ---------------------------------------------------------------------------
# edge-orbit constant
# ---------------------------------------------------------------------------


def edge_orbit_constant(group: GroupSpec) -> float:
    """The constant c = 1 / (2 deg(o)) for a Cayley graph.

    Left translations act freely, so the orbit of any oriented edge meets the
    edges at the identity in exactly the one edge carrying the same generator
    label; the minimal intersection count is 1.
    """
    return 1.0 / (2 * group.degree)


def edge_orbit_constant_audit(ball: CayleyBall, sample_cap: int = 4000) -> int:
    """Recompute the orbit-intersection count by explicit translation.

    For every oriented edge (x, x*s) in the ball, the left translation by
    x^-1 carries it to (o, s); freeness means no other edge at the identity is
    in the orbit.  Returns the minimal per-orbit intersection count (always 1).
    """
    group = ball.group
    counts = set()
    checked = 0
    for i in range(ball.size):
        if checked >= sample_cap:
            break
        x = ball.element(i)
        xinv = group.inverse(x)
        for j, g in enumerate(group.generators):
            if ball.adjacency[i, j] == -1:
                continue
            y = group.apply(x, g)
            # translate the edge (x, y) back to the identity
            ox = group.compose(xinv, x)
            oy = group.compose(xinv, y)
            if group.key(ox) != group.identity_key():
                raise AssertionError("translation did not fix the base point")
            hits = sum(
                1 for h in group.generators if group.key(group.apply(ox, h)) == group.key(oy)
            )
            # hits counts parallel identity edges landing on the same target,
            # i.e. |orbit(e) meet E_o| for the label class of e
            counts.add(hits)
            checked += 1
    return min(counts)


# ---------------------------------------------------------------------------
# the main displacement bound
# ---------------------------------------------------------------------------


@dataclass
class BoundReport:
    k: int
    r: int
    c: float
    max_level: int
    rhs: float
    regime: str = "main"
    extrapolated: bool = False
    capped: bool = False
    inputs: dict = field(default_factory=dict)


def small_ball_bound(
    k: int,
    r: int,
    spectral_fn: MonotoneFunction,
    iso_fn: MonotoneFunction,
    c: float,
    level_cap: int = LEVEL_SCAN_CAP,
) -> BoundReport:
    """Evaluate the displacement bound 2 exp[-(log 2 / 2) L] where

        L = max{ l >= 0 : l log 2 / spectral(2^(l+1) * iso^-1(c / r)) <= k }.

    The scan increases l until the condition first fails (the left side is
    strictly increasing in l); l = 0 always qualifies, so the bound is never
    worse than 2.  Arguments beyond certified table ranges raise a soft
    extrapolation flag recorded on the report.
    """
    if k < 1 or r < 1:
        raise ValueError("k and r must be >= 1")
    flagged = False
    try:
        v0 = generalized_inverse(iso_fn, c / r)
    except OutOfRangeError:
        # iso profile never drops to c/r (nonamenable-like input): vacuous
        return BoundReport(k=k, r=r, c=c, max_level=0, rhs=2.0, extrapolated=True)
    if not (iso_fn.certified[0] <= v0 <= iso_fn.certified[1]):
        flagged = True
    level = 0
    while level + 1 <= level_cap:
        cand = level + 1
        arg = (2.0 ** (cand + 1)) * v0
        lam, fl = spectral_fn.eval_flagged(arg)
        flagged = flagged or fl
        if lam <= 0:
            break
        if cand * math.log(2.0) / lam <= k:
            level = cand
        else:
            break
    rhs = 2.0 * math.exp(-0.5 * math.log(2.0) * level)
    return BoundReport(
        k=k,
        r=r,
        c=c,
        max_level=level,
        rhs=rhs,
        extrapolated=flagged,
        capped=level >= level_cap,
        inputs={"iso_inverse_at_c_over_r": v0},
    )


# ---------------------------------------------------------------------------
# heat-kernel transforms
# ---------------------------------------------------------------------------


def heat_profile_from_spectral(spectral_fn, t: float, rel_tol: float = 1e-8, hi_cap: float = 1e250) -> float:
    """Solve t = integral_1^y dx / (x * spectral(x)) for y.

    The integrand is evaluated after the substitution u = log x, giving
    integral_0^(log y) du / spectral(e^u); adaptive quadrature plus Brent
    inversion to relative tolerance ``rel_tol``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 1.0

    def integrand(u):
        lam = spectral_fn(math.exp(u))
        if lam <= 0:
            raise NoConvergenceError("spectral function must be positive")
        return 1.0 / lam

    def integral_to(ly):
        val, err = quad(integrand, 0.0, ly, limit=200)
        if not math.isfinite(val):
            raise NoConvergenceError("quadrature failed")
        return val

    ly_hi = 1.0
    while integral_to(ly_hi) < t:
        ly_hi *= 2.0
        if ly_hi > math.log(hi_cap):
            raise NoConvergenceError("inversion bracket exceeded cap")
    ly = brentq(lambda u: integral_to(u) - t, 0.0, ly_hi, rtol=rel_tol, maxiter=200)
    return math.exp(ly)


@dataclass
class HeatExponentTransform:
    """The doubling-regime transform x -> x / spectral(2^x) and its inverse."""

    spectral_fn: object

    def __call__(self, x: float) -> float:
        lam = self.spectral_fn(2.0**x)
        if lam <= 0:
            raise OutOfRangeError("spectral value nonpositive", side="above")
        return x / lam

    def inverse(self, y: float, hi_cap: float = 1e9) -> float:
        """inf{x : transform(x) >= y} by expanding bracket + bisection."""
        if y <= 0:
            return 0.0
        lo, hi = 1e-9, 1.0
        while self(hi) < y:
            hi *= 2.0
            if hi > hi_cap:
                raise OutOfRangeError(f"{y} not attained", side="above")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self(mid) >= y:
                hi = mid
            else:
                lo = mid
        return hi


def heat_exponent_transform(spectral_fn) -> HeatExponentTransform:
    return HeatExponentTransform(spectral_fn)


# ---------------------------------------------------------------------------
# doubling-regime small-ball bound
# ---------------------------------------------------------------------------


def doubling_regime_bound(
    k: int,
    r: int,
    beta: float,
    c: float,
    spectral_fn,
    doubling_range=(1, 24),
    doubling_threshold: float = 0.05,
) -> dict:
    """exp[-c min(k / r^beta, transform^-1(c k))] plus both regime values.

    Requires the spectral function to pass the exponential-scale doubling
    diagnostic on ``doubling_range``; raises NotDoublingError otherwise.
    """
    from .regularity import doubling_diagnostic

    if beta <= 0:
        raise ValueError("beta must be positive")
    diag = doubling_diagnostic(spectral_fn, doubling_range, threshold=doubling_threshold)
    if not diag["pass"]:
        raise NotDoublingError(f"doubling ratio {diag['min_ratio']:.3g} below threshold")
    transform = heat_exponent_transform(spectral_fn)
    escape = k / r**beta
    heat = transform.inverse(c * k)
    value = math.exp(-c * min(escape, heat))

    def gap(kk):
        return kk / r**beta - transform.inverse(c * kk)

    crossover = None
    lo, hi = 1.0, float(max(k, 2))
    glo, ghi = gap(lo), gap(hi)
    grow = 1
    while glo * ghi > 0 and grow < 60:
        hi *= 2
        ghi = gap(hi)
        grow += 1
    if glo * ghi <= 0:
        crossover = brentq(gap, lo, hi, rtol=1e-9)
    return {
        "value": value,
        "escape_regime": math.exp(-c * escape),
        "heat_regime": math.exp(-c * heat),
        "crossover_k": crossover,
        "doubling_ratio": diag["min_ratio"],
    }


# ---------------------------------------------------------------------------
# fits and checks
# ---------------------------------------------------------------------------


def _fit_slope(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    n = len(xs)
    if n > 2:
        se = math.sqrt(float(resid @ resid) / (n - 2) / float(((xs - xs.mean()) ** 2).sum()))
    else:
        se = 0.0
    return float(slope), float(intercept), se


def saturation_exponent_fit(iso_table: ProfileTable, gap_table: ProfileTable) -> dict:
    """Least-squares exponent of the gap profile against the boundary profile.

    Fits log(gap) = alpha log(iso) + const on the common n grid.  When both
    tables carry one-sided kinds, envelope combinations give a one-sided band
    (gap UPPER against iso LOWER bounds the exponent from above, and vice
    versa); with EXACT tables the band collapses to +-2 standard errors.
    """
    iso_by_n = {}
    for p in iso_table.points:
        iso_by_n.setdefault(p.n, {})[p.kind] = p.value
    rows = []
    for q in gap_table.points:
        got = iso_by_n.get(q.n)
        if got:
            rows.append((q.n, q.kind, q.value, got))
    common = sorted({n for n, *_ in rows})
    if len(common) < 6:
        raise InsufficientDataError(f"only {len(common)} overlapping grid points")

    def pick(kinds_pref, d):
        for k in kinds_pref:
            if k in d:
                return d[k]
        return None

    xs, ys = [], []
    for n, kind, gval, isod in rows:
        ival = pick((EXACT, UPPER, LOWER), isod)
        if ival and ival < 1.0 and gval > 0:
            xs.append(math.log(ival))
            ys.append(math.log(gval))
    if len(xs) < 6:
        raise InsufficientDataError("fewer than 6 usable points (iso must be < 1)")
    alpha, intercept, se = _fit_slope(xs, ys)
    return {
        "alpha": alpha,
        "intercept": intercept,
        "band": (alpha - 2 * se, alpha + 2 * se),
        "points": len(xs),
    }


def rearrangement_constants_check(
    iso_fn: MonotoneFunction,
    spectral_fn: MonotoneFunction,
    eps_grid,
    c2_grid=(1.0, 2.0, 4.0, 8.0),
    growth_factor: float = 4.0,
) -> dict:
    """Search constants with spectral(C2 * iso^-1(eps)) <= C3 * eps^2 on a grid.

    Reports, per C2, the smallest workable C3 = max ratio over the grid, and
    flags a violation when the required C3 diverges as eps decreases (ratio on
    the small-eps half exceeds ``growth_factor`` times the large-eps half).
    """
    eps_grid = sorted(float(e) for e in eps_grid)
    results = {}
    violation = False
    for c2 in c2_grid:
        ratios = []
        for eps in eps_grid:
            try:
                v = generalized_inverse(iso_fn, eps)
            except OutOfRangeError:
                continue
            lam = spectral_fn(c2 * v)
            ratios.append((eps, lam / (eps * eps)))
        if len(ratios) < 4:
            continue
        mid = len(ratios) // 2
        small_half = max(r for _, r in ratios[:mid])
        large_half = max(r for _, r in ratios[mid:])
        c3 = max(r for _, r in ratios)
        diverging = small_half > growth_factor * max(large_half, 1e-300)
        results[c2] = {"c3": c3, "diverging": diverging}
        violation = violation or diverging
    if not results:
        raise InsufficientDataError("epsilon grid out of range for the iso profile")
    best_c2 = min(results, key=lambda c: results[c]["c3"])
    return {
        "per_c2": results,
        "best": (best_c2, results[best_c2]["c3"]),
        "violation": all(v["diverging"] for v in results.values()),
    }


# ---------------------------------------------------------------------------
# empirical domination
# ---------------------------------------------------------------------------


def empirical_domination(
    measured: dict,
    spectral_fn: MonotoneFunction,
    iso_fn: MonotoneFunction,
    c: float,
) -> dict:
    """Check measured small-ball upper interval ends against the evaluated bound.

    ``measured`` maps (k, r) to the interval upper end hi (killed mass plus
    leaked).  For soundness the caller should pass a spectral function that
    lower-bounds and an iso function whose inverse upper-bounds the truth;
    both choices enlarge the evaluated right side.  Any violation flags an
    implementation error, since the underlying inequality is a theorem.
    """
    rows = []
    violations = []
    for (k, r), hi in sorted(measured.items()):
        rep = small_ball_bound(k, r, spectral_fn, iso_fn, c)
        ok = hi <= rep.rhs + 1e-12
        rows.append(
            {
                "k": k,
                "r": r,
                "hi": hi,
                "rhs": rep.rhs,
                "max_level": rep.max_level,
                "ok": ok,
                "extrapolated": rep.extrapolated,
            }
        )
        if not ok:
            violations.append(rows[-1])
    return {"rows": rows, "violations": violations}


def spectral_theta_transform(table: ProfileTable, theta: float) -> ProfileTable:
    """Scale a spectral table by theta (dominated-kernel comparison transform).

    If a kernel decomposes as theta * base + (1 - theta) * rest, its spectral
    profile dominates theta times the base profile; this helper applies that
    table transform.
    """
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    from .profiles import ProfilePoint

    pts = [
        ProfilePoint(p.n, p.value * theta, LOWER if p.kind in (EXACT, LOWER) else UPPER, p.witness, {"theta": theta})
        for p in table.points
    ]
    return ProfileTable(pts, label=f"{table.label}-theta{theta}")
