"""Growth and averaging conditions certifying existence of isoperimetric sets.

For a density approaching a finite limit a > 0 at infinity, existence of
minimizers for every volume follows once balls of any prescribed volume can
be found arbitrarily far out with mean density at most a.  Each checker
operationalizes one sufficient condition on a budgeted geometric ladder:

* slow_growth_ball     sup_B f <= a^(1/n) (inf_B f)^((n-1)/n) on distant balls
* slow_growth_radial   f(R+tau) <= a^(1/n) f(R)^((n-1)/n) for some large R
* exponential_gap      f(R) <= a - exp(-cR) for some large R (per given c)
* derivative_condition f'(R) = o(a - f(R))      (radial C^1 models)
* mean_inequality      avg_{dB} f <= a^(1/n) (avg_B f)^((n-1)/n)
* superharmonic        f'' + (n-1)/r f' <= 0 on a radial interval

Unbounded quantifiers cannot be decided numerically, so verdicts are
budget-bounded: ``pass`` always carries a concrete re-verifiable witness,
and exhausted searches report ``fail`` (for pure radial scans, where the
scan itself is the claim) or ``inconclusive`` (for ball searches).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .density import ClassificationReport, Density, SamplingSpec, Verdict, classify
from .errors import ConfigurationError, InapplicableError, NumericError
from .measure import (
    Ball,
    BallStats,
    ball_extrema,
    mean_density,
    measure_region,
    unit_ball_volume,
)

__all__ = [
    "SearchBudget",
    "ConditionResult",
    "ExistenceReport",
    "profile_upper_bound",
    "solve_ball_radius",
    "find_distant_low_density_ball",
    "check_slow_growth_ball",
    "check_radial_slow_growth",
    "check_exponential_gap",
    "check_derivative_condition",
    "check_mean_inequality",
    "check_superharmonic",
    "existence_report",
    "reverify_witness",
]

SLACK = 1e-12


@dataclass(frozen=True)
class SearchBudget:
    """Budgets for the distant-ball ladders and radial scans."""

    r0: float = 10.0
    doublings: int = 20
    directions: int = 64
    res: int = 128
    seed: int = 0
    tau: float = 1.0
    r_max: float = 1e6
    scan_points: int = 512
    # small c is the demanding case: the gap must outlast every exp(-cR)
    c_ladder: tuple[float, ...] = (1.0, 0.5, 0.25)
    superharmonic_interval: tuple[float, float] = (2.0, 100.0)


@dataclass(frozen=True)
class ConditionResult:
    name: str
    verdict: Verdict
    witness: Optional[dict] = None
    detail: str = ""


@dataclass(frozen=True)
class ExistenceReport:
    density_name: str
    dim: int
    a: Optional[float]
    conditions: dict[str, ConditionResult]
    certified: bool
    diverging: bool
    classification: ClassificationReport
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "density": self.density_name,
            "dim": self.dim,
            "a": self.a,
            "certified": self.certified,
            "diverging": self.diverging,
            "notes": list(self.notes),
            "conditions": {
                k: {"verdict": v.verdict.value, "witness": v.witness, "detail": v.detail}
                for k, v in self.conditions.items()
            },
        }


def _require_limit(d: Density) -> float:
    if not d.has_positive_limit:
        raise InapplicableError(
            f"density '{d.name}' has no declared finite positive limit at infinity"
        )
    return float(d.limit_at_infinity)


def resolve_limit(d: Density, classification: Optional[ClassificationReport] = None) -> float:
    """Limit a from metadata, cross-checked against the sampled estimate.

    Every condition is sensitive to a, so a clear disagreement is a hard
    error rather than a warning: a settled tail must match within 1%, a
    diverging tail contradicts any finite limit, and a still-drifting tail
    must at least not already exceed the declared value.
    """
    a = _require_limit(d)
    rep = classification or classify(d)
    if rep.diverging_verdict is Verdict.PASS:
        raise ConfigurationError(
            f"density '{d.name}' declares limit {a} but its sampled tail diverges"
        )
    if rep.diverging_verdict is Verdict.FAIL and rep.limit_estimate is not None:
        if abs(rep.limit_estimate - a) > 0.01 * max(abs(a), abs(rep.limit_estimate)):
            raise ConfigurationError(
                f"declared limit {a} disagrees with sampled tail estimate "
                f"{rep.limit_estimate:.6g} by more than 1%"
            )
    elif rep.limit_interval is not None and rep.limit_interval[1] > a * 1.01:
        raise ConfigurationError(
            f"declared limit {a} already exceeded by sampled tail values "
            f"(up to {rep.limit_interval[1]:.6g})"
        )
    return a


def profile_upper_bound(volume: float, d: Density) -> float:
    """n (omega_n a)^(1/n) V^((n-1)/n): perimeter of distant balls of volume V."""
    a = _require_limit(d)
    if volume <= 0:
        raise ConfigurationError("volume must be positive")
    n = d.dim
    return n * (unit_ball_volume(n) * a) ** (1.0 / n) * volume ** ((n - 1.0) / n)


def solve_ball_radius(
    d: Density, center: np.ndarray, volume: float, res: int = 128
) -> Ball:
    """Radius such that the ball about ``center`` has the given weighted volume."""
    from scipy.optimize import brentq

    center = np.asarray(center, dtype=float)
    n = center.size
    guess_f = float(d.eval(center))
    r_guess = (volume / (unit_ball_volume(n) * max(guess_f, 1e-300))) ** (1.0 / n)

    def vol(r: float) -> float:
        return measure_region(Ball(center, r), d, res).volume - volume

    lo, hi = r_guess, r_guess
    flo = vol(lo)
    for _ in range(200):
        if flo <= 0:
            break
        lo *= 0.5
        flo = vol(lo)
    else:
        raise NumericError("could not bracket ball radius from below", {"center": center})
    fhi = vol(hi)
    for _ in range(200):
        if fhi >= 0:
            break
        hi *= 2.0
        fhi = vol(hi)
    else:
        raise NumericError("could not bracket ball radius from above", {"center": center})
    r = brentq(vol, lo, hi, xtol=1e-13 * max(1.0, r_guess), rtol=8.9e-16)
    return Ball(center, float(r))


def _ladder_centers(d: Density, budget: SearchBudget):
    # for radial densities every direction is equivalent, so one per rung
    n_dirs = 1 if d.radial else budget.directions
    rng = np.random.default_rng(budget.seed)
    for k in range(budget.doublings):
        dist = budget.r0 * 2.0**k
        dirs = rng.standard_normal((budget.directions, d.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        for u in dirs[:n_dirs]:
            yield dist, dist * u


def find_distant_low_density_ball(
    d: Density, volume: float, r0: float = 10.0, budget: Optional[SearchBudget] = None
) -> Optional[BallStats]:
    """First ball of the given weighted volume on the distance ladder with
    mean density at most a (+1e-9 slack); None if the budget is exhausted."""
    a = _require_limit(d)
    if volume <= 0:
        raise ConfigurationError("volume must be positive")
    budget = budget or SearchBudget()
    budget = dataclasses.replace(budget, r0=r0)
    for _, center in _ladder_centers(d, budget):
        ball = solve_ball_radius(d, center, volume, budget.res)
        stats = mean_density(ball, d, budget.res, seed=budget.seed)
        if stats.mean_density <= a + 1e-9:
            return stats
    return None


def _stable_gap(d: Density, r: np.ndarray) -> np.ndarray:
    """a - f(r), stable against rounding of f toward its limit."""
    a = _require_limit(d)
    if d.profile is not None and d.profile.gap is not None:
        return np.asarray(d.profile.gap(np.asarray(r, dtype=float)))
    return a - d.eval_radial(r)


def _log_ratio(d: Density, r: np.ndarray) -> np.ndarray:
    """log(f(r)/a) = log1p(-gap/a), exactly 0 where f attains the limit."""
    a = _require_limit(d)
    return np.log1p(-_stable_gap(d, r) / a)


def _slow_growth_points(d: Density, lhs_r: np.ndarray, rhs_r: np.ndarray) -> np.ndarray:
    """Where  f(lhs_r) <= a^(1/n) f(rhs_r)^((n-1)/n)  holds, saturation-aware.

    Both sides are compared as log(f/a).  A point where both gaps round to
    zero carries no evidence unless the model genuinely attains its limit.
    """
    n = d.dim
    ql = _log_ratio(d, lhs_r)
    qr = ((n - 1.0) / n) * _log_ratio(d, rhs_r)
    # slack stays relative: near the rounding horizon both sides are tiny and
    # an absolute tolerance would accept analytically false points
    ok = ql <= qr + SLACK * np.abs(qr)
    saturated = (_stable_gap(d, lhs_r) == 0.0) & (_stable_gap(d, rhs_r) == 0.0)
    attains = d.profile is not None and d.profile.attains_limit
    if not attains:
        ok &= ~saturated
    return ok


def check_slow_growth_ball(
    d: Density, volume: float, r0: float = 10.0, budget: Optional[SearchBudget] = None
) -> ConditionResult:
    """sup_B f <= a^(1/n) (inf_B f)^((n-1)/n) on some distant ball of volume V.

    Radial models compare through the stable limit gap; general models fall
    back to sampled extrema, which beyond the rounding horizon of f cannot
    refute near-equalities (precision-bounded, like every other verdict).
    """
    name = "slow_growth_ball"
    a = _require_limit(d)
    n = d.dim
    budget = budget or SearchBudget()
    budget = dataclasses.replace(budget, r0=r0)
    for dist, center in _ladder_centers(d, budget):
        ball = solve_ball_radius(d, center, volume, budget.res)
        lo_r, hi_r = max(0.0, dist - ball.radius), dist + ball.radius
        if d.radial and d.profile is not None and d.profile.gap is not None:
            rs = np.linspace(lo_r, hi_r, 2049)
            g = _stable_gap(d, rs)
            r_sup = rs[np.argmin(g)]  # smallest gap <-> largest f
            r_inf = rs[np.argmax(g)]
            ok = bool(_slow_growth_points(d, np.array([r_sup]), np.array([r_inf]))[0])
            f_sup, f_min = float(d.eval_radial(r_sup)), float(d.eval_radial(r_inf))
        else:
            f_min, f_sup = ball_extrema(ball, d, seed=budget.seed)
            ok = f_sup <= a ** (1.0 / n) * f_min ** ((n - 1.0) / n) + SLACK
        if ok:
            witness = {
                "center": center.tolist(),
                "radius": ball.radius,
                "distance": dist,
                "sup": f_sup,
                "inf": f_min,
                "volume": volume,
            }
            return ConditionResult(name, Verdict.PASS, witness)
    return ConditionResult(
        name, Verdict.INCONCLUSIVE, None, "ladder exhausted without a qualifying ball"
    )


def _radial_scan_grid(r0: float, r_max: float, points: int) -> np.ndarray:
    return np.geomspace(max(r0, 1e-9), r_max, points)


def check_radial_slow_growth(
    d: Density,
    tau: float = 1.0,
    r0: float = 10.0,
    r_max: float = 1e6,
    points: int = 512,
) -> ConditionResult:
    """Radial form: exists R > r0 with f(R+tau) <= a^(1/n) f(R)^((n-1)/n).

    Scan-bounded: failure means no R on this grid works, which for the
    catalog models reflects the analytic behavior.
    """
    name = "slow_growth_radial"
    if not d.radial or d.profile is None:
        raise InapplicableError("radial slow-growth check needs a radial density")
    _require_limit(d)
    grid = _radial_scan_grid(r0, r_max, points)
    ok = _slow_growth_points(d, grid + tau, grid)
    if np.any(ok):
        R = float(grid[np.argmax(ok)])
        n = d.dim
        a = float(d.limit_at_infinity)
        return ConditionResult(
            name,
            Verdict.PASS,
            {"R": R, "tau": tau, "lhs": float(d.eval_radial(R + tau)),
             "rhs": float(a ** (1 / n) * d.eval_radial(R) ** ((n - 1) / n))},
        )
    return ConditionResult(name, Verdict.FAIL, None, f"no R in [{r0:g}, {r_max:g}] qualifies")


def check_exponential_gap(
    d: Density, c: float = 1.0, rho: float = 1.0, r_max: float = 1e6, points: int = 512
) -> ConditionResult:
    """exists R in [rho, r_max] with f(R) <= a - exp(-cR).

    Equivalent to  a - f(R) >= exp(-cR); the left side is the stable gap.
    The threshold is positive at every finite R, so a model that attains its
    limit (zero gap) never qualifies there.
    """
    name = "exponential_gap"
    if not d.radial or d.profile is None:
        raise InapplicableError("exponential-gap check needs a radial density")
    _require_limit(d)
    grid = _radial_scan_grid(rho, r_max, points)
    g = _stable_gap(d, grid)
    with np.errstate(under="ignore"):
        threshold = np.exp(-c * grid)
    ok = (g > 0.0) & (g >= threshold)
    if np.any(ok):
        R = float(grid[np.argmax(ok)])
        return ConditionResult(
            name,
            Verdict.PASS,
            {"R": R, "c": c, "gap": float(_stable_gap(d, np.array([R]))[0]),
             "threshold": float(np.exp(-c * R))},
        )
    return ConditionResult(name, Verdict.FAIL, None, f"no R in [{rho:g}, {r_max:g}] (c={c:g})")


def check_derivative_condition(
    d: Density, r_grid: Optional[np.ndarray] = None
) -> ConditionResult:
    """f'(R) = o(a - f(R)), operationalized as: the ratio drops below 0.01 by
    the end of the grid and trends down over its last decade."""
    name = "derivative_condition"
    if not d.radial or d.profile is None or d.profile.deriv is None:
        raise InapplicableError("derivative condition needs a radial C^1 density")
    _require_limit(d)
    grid = np.geomspace(1.0, 1e4, 256) if r_grid is None else np.asarray(r_grid, dtype=float)
    gap = _stable_gap(d, grid)
    usable = gap > 0.0
    if not np.any(usable):
        return ConditionResult(
            name, Verdict.INCONCLUSIVE, None, "density reaches its limit on the grid (gap <= 0)"
        )
    grid = grid[usable]
    ratio = np.abs(d.profile.deriv(grid)) / gap[usable]
    finite = np.isfinite(ratio)
    if not np.any(finite):
        return ConditionResult(name, Verdict.INCONCLUSIVE, None, "ratio not computable")
    grid, ratio = grid[finite], ratio[finite]
    last_decade = grid >= grid[-1] / 10.0
    tail = ratio[last_decade]
    trending_down = bool(np.all(np.diff(tail) <= 1e-12 + 0.05 * tail[:-1]))
    small = bool(tail[-1] < 0.01)
    if small and trending_down:
        return ConditionResult(
            name, Verdict.PASS, {"R": float(grid[-1]), "ratio": float(tail[-1])}
        )
    return ConditionResult(
        name,
        Verdict.FAIL,
        None,
        f"ratio at R={grid[-1]:g} is {tail[-1]:.3g} (trending_down={trending_down})",
    )


def check_mean_inequality(
    d: Density, ball: Ball, res: int = 128
) -> ConditionResult:
    """avg_{dB} f <= a^(1/n) (avg_B f)^((n-1)/n), both sides by quadrature."""
    name = "mean_inequality"
    a = _require_limit(d)
    n = ball.dim
    rep = measure_region(ball, d, res)
    omega = unit_ball_volume(n)
    r = ball.radius
    avg_boundary = rep.perimeter / (n * omega * r ** (n - 1))
    avg_solid = rep.volume / (omega * r**n)
    rhs = a ** (1.0 / n) * avg_solid ** ((n - 1.0) / n)
    tol = rep.quadrature_error / (omega * r ** (n - 1))
    witness = {
        "center": ball.center.tolist(),
        "radius": r,
        "boundary_avg": float(avg_boundary),
        "rhs": float(rhs),
    }
    if avg_boundary <= rhs + tol:
        return ConditionResult(name, Verdict.PASS, witness)
    return ConditionResult(name, Verdict.FAIL, witness)


def check_superharmonic(
    d: Density, r_interval: tuple[float, float] = (2.0, 100.0), points: int = 512
) -> ConditionResult:
    """Radial Laplacian f'' + (n-1)/r f' <= 1e-10 on a grid over the interval."""
    name = "superharmonic"
    if not d.radial or d.profile is None:
        raise InapplicableError("superharmonicity check needs a radial density")
    lo, hi = r_interval
    if lo <= 0:
        raise ConfigurationError("superharmonicity interval must avoid the origin")
    n = d.dim
    grid = np.linspace(lo, hi, points)
    if d.profile.deriv is not None and d.profile.deriv2 is not None:
        lap = d.profile.deriv2(grid) + (n - 1) / grid * d.profile.deriv(grid)
    else:
        h = np.maximum(1e-5, 1e-5 * grid)
        f0 = d.eval_radial(grid)
        fp = (d.eval_radial(grid + h) - d.eval_radial(grid - h)) / (2 * h)
        fpp = (d.eval_radial(grid + h) - 2 * f0 + d.eval_radial(grid - h)) / h**2
        lap = fpp + (n - 1) / grid * fp
    worst = float(np.max(lap))
    witness = {"interval": [lo, hi], "max_radial_laplacian": worst}
    if worst <= 1e-10:
        return ConditionResult(name, Verdict.PASS, witness)
    return ConditionResult(name, Verdict.FAIL, witness)


# ---------------------------------------------------------------------------
# aggregate report
# ---------------------------------------------------------------------------

_CONDITIONS = (
    "slow_growth_ball",
    "slow_growth_radial",
    "exponential_gap",
    "derivative_condition",
    "mean_inequality",
    "superharmonic",
)


def _inapplicable(name: str, reason: str) -> ConditionResult:
    return ConditionResult(name, Verdict.INCONCLUSIVE, None, f"inapplicable: {reason}")


def existence_report(
    d: Density,
    volume: float = 1.0,
    budget: Optional[SearchBudget] = None,
) -> ExistenceReport:
    """Run every applicable condition checker; certified iff any passes.

    Densities diverging to infinity get no finite-limit checks; for radial
    ones the divergence itself settles existence, which the report records
    informationally without counting it as a certificate.
    """
    budget = budget or SearchBudget()
    classification = classify(d, SamplingSpec(seed=budget.seed))
    results: dict[str, ConditionResult] = {}
    notes: list[str] = []
    a: Optional[float] = None

    if d.has_positive_limit:
        a = resolve_limit(d, classification)
    elif d.limit_at_infinity is not None:
        notes.append("declared limit is 0: finite-limit conditions inapplicable")
    diverging = classification.diverging_verdict is Verdict.PASS
    if diverging and d.radial:
        notes.append(
            "radial density diverging to infinity: existence holds for all volumes "
            "(recorded informationally, not as a condition certificate)"
        )

    if a is None:
        for name in _CONDITIONS:
            results[name] = _inapplicable(name, "no finite positive limit")
    else:
        results["slow_growth_ball"] = check_slow_growth_ball(d, volume, budget.r0, budget)
        if d.radial and d.profile is not None:
            results["slow_growth_radial"] = check_radial_slow_growth(
                d, budget.tau, budget.r0, budget.r_max, budget.scan_points
            )
            gap_results = [
                check_exponential_gap(d, c, 1.0, budget.r_max, budget.scan_points)
                for c in budget.c_ladder
            ]
            if all(g.verdict is Verdict.PASS for g in gap_results):
                results["exponential_gap"] = ConditionResult(
                    "exponential_gap",
                    Verdict.PASS,
                    {"per_c": [g.witness for g in gap_results], "c_ladder": list(budget.c_ladder)},
                )
            else:
                worst = next(g for g in gap_results if g.verdict is not Verdict.PASS)
                results["exponential_gap"] = ConditionResult(
                    "exponential_gap", worst.verdict, None, worst.detail
                )
            if d.profile.deriv is not None:
                results["derivative_condition"] = check_derivative_condition(d)
            else:
                results["derivative_condition"] = _inapplicable(
                    "derivative_condition", "no radial derivative available"
                )
            if d.profile.deriv2 is not None or d.smoothness.value != "piecewise-constant":
                results["superharmonic"] = check_superharmonic(
                    d, budget.superharmonic_interval
                )
            else:
                results["superharmonic"] = _inapplicable(
                    "superharmonic", "density is not C^2"
                )
        else:
            for name in ("slow_growth_radial", "exponential_gap", "derivative_condition",
                         "superharmonic"):
                results[name] = _inapplicable(name, "density is not radial")
        results["mean_inequality"] = _search_mean_inequality(d, volume, budget)

    certified = any(r.verdict is Verdict.PASS for r in results.values())
    return ExistenceReport(
        density_name=d.name,
        dim=d.dim,
        a=a,
        conditions=results,
        certified=certified,
        diverging=diverging,
        classification=classification,
        notes=tuple(notes),
    )


def _search_mean_inequality(d: Density, volume: float, budget: SearchBudget) -> ConditionResult:
    checked = 0
    cap = 6 if d.radial else 3 * budget.directions
    for dist, center in _ladder_centers(d, budget):
        checked += 1
        if checked > cap:  # a few rungs suffice: the report is budgeted
            break
        ball = solve_ball_radius(d, center, volume, budget.res)
        res = check_mean_inequality(d, ball, budget.res)
        if res.verdict is Verdict.PASS:
            return res
    return ConditionResult(
        "mean_inequality", Verdict.INCONCLUSIVE, None, "no qualifying ball within budget"
    )


def reverify_witness(d: Density, result: ConditionResult, res_factor: int = 2) -> bool:
    """Re-check a pass verdict's witness in isolation at doubled resolution."""
    if result.verdict is not Verdict.PASS or result.witness is None:
        return False
    w = result.witness
    n = d.dim
    a = _require_limit(d) if d.has_positive_limit else None
    if result.name == "slow_growth_ball":
        if d.radial and d.profile is not None and d.profile.gap is not None:
            ball = Ball(np.asarray(w["center"]), w["radius"])
            dist = float(np.linalg.norm(ball.center))
            rs = np.linspace(max(0.0, dist - ball.radius), dist + ball.radius, 4097)
            g = _stable_gap(d, rs)
            return bool(
                _slow_growth_points(
                    d, np.array([rs[np.argmin(g)]]), np.array([rs[np.argmax(g)]])
                )[0]
            )
        ball = Ball(np.asarray(w["center"]), w["radius"])
        f_min, f_sup = ball_extrema(ball, d, n_samples=8192)
        return bool(f_sup <= a ** (1 / n) * f_min ** ((n - 1) / n) + SLACK)
    if result.name == "slow_growth_radial":
        R, tau = w["R"], w["tau"]
        return bool(_slow_growth_points(d, np.array([R + tau]), np.array([R]))[0])
    if result.name == "exponential_gap":
        entries = w.get("per_c")
        if entries is None:
            entries = [w]
        for e in entries:
            g = float(_stable_gap(d, np.array([e["R"]]))[0])
            if not (g > 0.0 and g >= np.exp(-e["c"] * e["R"])):
                return False
        return True
    if result.name == "derivative_condition":
        res = check_derivative_condition(d)
        return res.verdict is Verdict.PASS
    if result.name == "mean_inequality":
        ball = Ball(np.asarray(w["center"]), w["radius"])
        res = check_mean_inequality(d, ball, res=res_factor * 128)
        return res.verdict is Verdict.PASS
    if result.name == "superharmonic":
        res = check_superharmonic(d, tuple(w["interval"]), points=1024)
        return res.verdict is Verdict.PASS
    return False
