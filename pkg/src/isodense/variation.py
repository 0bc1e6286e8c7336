"""Generalized curvature, first-variation checks, and planar shooting.

For a density f = e^v the generalized curvature of a boundary point is
H_f = H_0 + dv/dnu (H_0 the inward Euclidean curvature, sum convention:
the unit circle has H_0 = 1).  Deforming the boundary by eps*u*nu changes
weighted volume by eps * int u f dH^1 and weighted perimeter by
eps * int H_f u f dH^1, which pins H_f as the profile's derivative and makes
boundaries of minimizers constant-H_f curves.

Shooting integrates the planar Frenet system x' = cos(phi), y' = sin(phi),
phi' = H - v'(|x|) (x_hat . nu) from (r_start, 0) launched straight up, and
closes symmetric curves by reflection at the first perpendicular return to
the axis.  Radial densities only; the symmetrization theorem justifies
restricting the search to reflection-symmetric candidates, so non-symmetric
minimizers (two-phase examples) are outside this search space by design.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .density import Density, eval_log_gradient
from .errors import (
    ConfigurationError,
    EstimationError,
    GeometryError,
    InapplicableError,
    NonClosingError,
)
from .measure import measure_region, polygon_plane_integral, unit_ball_volume
from .regions import Ball, PolarGraph

__all__ = [
    "Curve",
    "ShootingResult",
    "ProfilePoint",
    "ShootingConfig",
    "ProfileSearchBudget",
    "FirstVariationReport",
    "euclidean_curvature",
    "generalized_curvature",
    "curvature_along",
    "first_variation_check",
    "shoot_constant_curvature",
    "estimate_profile",
    "profile_sweep",
]


@dataclass(frozen=True)
class Curve:
    """Arc-length sampled closed or open planar curve with unit frame."""

    points: np.ndarray  # (k, 2)
    tangents: np.ndarray  # (k, 2), unit
    normals: np.ndarray  # (k, 2), unit outward, tangent rotated by -90 deg
    closed: bool

    def __post_init__(self):
        pts, tan, nor = self.points, self.tangents, self.normals
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape != tan.shape != nor.shape:
            raise GeometryError("curve arrays must share shape (k, 2)")
        if np.max(np.abs(np.linalg.norm(tan, axis=1) - 1.0)) > 1e-10:
            raise GeometryError("tangents must be unit vectors (1e-10)")
        if np.max(np.abs(np.linalg.norm(nor, axis=1) - 1.0)) > 1e-10:
            raise GeometryError("normals must be unit vectors (1e-10)")
        if np.max(np.abs(np.sum(tan * nor, axis=1))) > 1e-10:
            raise GeometryError("tangent and normal must be orthogonal (1e-10)")
        if self.closed:
            gap = float(np.linalg.norm(pts[0] - pts[-1]))
            if gap > 1e-8 * max(self.length(), 1e-300):
                raise GeometryError(f"closed curve endpoint gap {gap:.2e} too large")

    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)


def euclidean_curvature(curve: Curve, index: int) -> float:
    """Signed inward curvature H_0 at a sample, by finite-difference turning
    rate of the tangent angle (positive = 1/R on a CCW circle)."""
    k = curve.points.shape[0]
    if k < 3:
        raise GeometryError("need at least three samples for curvature")
    i = index % k if curve.closed else index
    if not curve.closed and (i < 1 or i > k - 2):
        raise GeometryError("curvature needs a two-sided neighborhood")
    im = (i - 1) % k
    ip = (i + 1) % k
    if curve.closed and (im == k - 1 or ip == 0):
        # skip the duplicated endpoint sample
        im = (im - 1) % k if im == k - 1 else im
        ip = (ip + 1) % k if ip == 0 else ip
    p0, p1, p2 = curve.points[im], curve.points[i], curve.points[ip]
    a = p1 - p0
    b = p2 - p1
    la, lb = np.linalg.norm(a), np.linalg.norm(b)
    if la < 1e-300 or lb < 1e-300:
        raise GeometryError("coincident samples")
    dtheta = math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])
    return float(dtheta / (0.5 * (la + lb)))


def curvature_along(curve: Curve) -> np.ndarray:
    """H_0 at every sample by 4th-order differencing of the stored tangent
    angles (much less noise-prone than position-only stencils)."""
    theta = np.arctan2(curve.tangents[:, 1], curve.tangents[:, 0])
    th = np.unwrap(theta)
    s = np.concatenate([[0.0], np.cumsum(curve.segment_lengths())])
    if curve.closed:
        turn = 2.0 * np.pi * round((th[-1] - th[0]) / (2.0 * np.pi))
        # remove the winding so the angle samples are periodic, differentiate
        # with a periodic spline, add the winding rate back
        lin = turn * s / s[-1]
        periodic = th - lin
        periodic[-1] = periodic[0]
        spl = CubicSpline(s, periodic, bc_type="periodic")
        return spl.derivative()(s) + turn / s[-1]
    spl = CubicSpline(s, th)
    return spl.derivative()(s)


def generalized_curvature(curve: Curve, index: int, d: Density) -> float:
    """H_f = H_0 + grad(log f) . nu at one sample."""
    h0 = euclidean_curvature(curve, index)
    x = curve.points[index]
    nu = curve.normals[index]
    grad = eval_log_gradient(d, x)
    return float(h0 + grad @ nu)


# ---------------------------------------------------------------------------
# first variation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FirstVariationReport:
    eps_grid: np.ndarray
    predicted_dV: float
    predicted_dP: float
    measured_dV: np.ndarray
    measured_dP: np.ndarray
    rel_mismatch_dV: np.ndarray
    rel_mismatch_dP: np.ndarray
    decay_order: float


def _boundary_spline(region, n_nodes: int):
    """Periodic spline r(theta) for a Ball or PolarGraph boundary."""
    if isinstance(region, Ball):
        if region.dim != 2:
            raise InapplicableError("first variation implemented in the plane")
        th = np.linspace(0.0, 2.0 * np.pi, n_nodes + 1)
        rv = np.full(n_nodes + 1, region.radius)
        center = region.center
    elif isinstance(region, PolarGraph):
        th = np.linspace(region.theta[0], region.theta[0] + 2.0 * np.pi, n_nodes + 1)
        rv = region.radius_at(th)
        rv[-1] = rv[0]
        center = region.center
    else:
        raise InapplicableError("first variation needs a Ball or PolarGraph")
    spline = CubicSpline(th, rv, bc_type="periodic")
    return th, spline, center


def first_variation_check(
    region,
    d: Density,
    u,
    eps_grid: Sequence[float],
    n_nodes: int = 2048,
    res: int = 512,
) -> FirstVariationReport:
    """Deform the boundary by eps*u*nu, measure volume/perimeter responses,
    and compare the fitted linear coefficients with int u f dH^1 and
    int H_f u f dH^1.

    ``u`` is a callable of theta or an array on the node grid.  Central
    differences in eps kill the quadratic term, so the mismatch decays like
    eps^2 until quadrature noise takes over.
    """
    eps_grid = np.asarray(sorted(eps_grid, reverse=True), dtype=float)
    if np.any(eps_grid <= 0):
        raise ConfigurationError("eps grid must be positive (both signs are probed)")
    th_grid, spline, center = _boundary_spline(region, n_nodes)
    th = th_grid[:-1]
    rv = spline(th)
    rp = spline.derivative()(th)
    rpp = spline.derivative(2)(th)
    u_vals = np.asarray(u(th), dtype=float) if callable(u) else np.asarray(u, dtype=float)
    if u_vals.shape != th.shape:
        raise ConfigurationError("u samples must match the boundary grid")

    uvec = np.stack([np.cos(th), np.sin(th)], axis=-1)
    uperp = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    pts = center + rv[:, None] * uvec
    speed = np.sqrt(rv**2 + rp**2)
    normals = (rv[:, None] * uvec - rp[:, None] * uperp) / speed[:, None]
    h0 = (rv**2 + 2.0 * rp**2 - rv * rpp) / speed**3
    fb = d.eval(pts)
    grad_v = eval_log_gradient(d, pts)
    hf = h0 + np.sum(grad_v * normals, axis=1)
    w = speed * (2.0 * np.pi / th.size)
    predicted_dV = float(np.sum(u_vals * fb * w))
    predicted_dP = float(np.sum(hf * u_vals * fb * w))

    def vp(eps: float) -> tuple[float, float]:
        moved = pts + eps * u_vals[:, None] * normals
        loop = np.vstack([moved, moved[:1]])
        segs = np.diff(loop, axis=0)
        lens = np.linalg.norm(segs, axis=1)
        if np.any(lens == 0.0):
            raise GeometryError("deformation collapsed a boundary segment")
        rel = loop - center
        ang = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
        if np.any(np.diff(ang) <= 0):
            raise GeometryError("deformation is no longer star-shaped (self-intersection risk)")
        mids = 0.5 * (loop[:-1] + loop[1:])
        per = float(np.sum(d.eval(mids) * lens))
        vol = polygon_plane_integral(
            loop[:, 0], loop[:, 1], lambda zx, xx: d.eval(np.stack([zx, xx], axis=-1)), res=res
        )
        return vol, per

    measured_dV, measured_dP = [], []
    for eps in eps_grid:
        vp_plus = vp(eps)
        vp_minus = vp(-eps)
        measured_dV.append((vp_plus[0] - vp_minus[0]) / (2.0 * eps))
        measured_dP.append((vp_plus[1] - vp_minus[1]) / (2.0 * eps))
    measured_dV = np.asarray(measured_dV)
    measured_dP = np.asarray(measured_dP)
    mm_v = np.abs(measured_dV - predicted_dV) / max(abs(predicted_dV), 1e-300)
    mm_p = np.abs(measured_dP - predicted_dP) / max(abs(predicted_dP), 1e-300)
    both = np.maximum(mm_v + 1e-16, 1e-16) * np.maximum(mm_p + 1e-16, 1e-16)
    if eps_grid.size >= 2:
        slope = np.polyfit(np.log(eps_grid), 0.5 * np.log(both), 1)[0]
    else:
        slope = float("nan")
    return FirstVariationReport(
        eps_grid=eps_grid,
        predicted_dV=predicted_dV,
        predicted_dP=predicted_dP,
        measured_dV=measured_dV,
        measured_dP=measured_dP,
        rel_mismatch_dV=mm_v,
        rel_mismatch_dP=mm_p,
        decay_order=float(slope),
    )


# ---------------------------------------------------------------------------
# constant generalized curvature shooting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShootingConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    closure_tol: float = 1e-7
    samples: int = 2048
    length_budget: Optional[float] = None
    volume_res: int = 512


@dataclass(frozen=True)
class ShootingResult:
    H: float
    curve: Curve
    closure_residual: float
    enclosed_volume: float
    perimeter: float
    r_start: float


def _radial_v_prime(d: Density) -> Callable[[float], float]:
    if not d.radial or d.profile is None:
        raise InapplicableError("shooting needs a radial density")
    prof = d.profile
    if prof.deriv is not None:
        def vp(r: float) -> float:
            return float(prof.deriv(np.asarray(r)) / prof.value(np.asarray(r)))
    else:
        def vp(r: float) -> float:
            h = max(1e-6, 1e-6 * r)
            lo = max(r - h, 1e-12)
            return float(
                (np.log(prof.value(np.asarray(r + h))) - np.log(prof.value(np.asarray(lo))))
                / (r + h - lo)
            )
    return vp


def _integrate_half(d: Density, H: float, r_start: float, config: ShootingConfig):
    """Integrate until the first downward crossing of the x-axis.

    Returns (sol, s_cross) with s_cross None when the budget ran out.
    """
    vp = _radial_v_prime(d)

    def rhs(s, state):
        x, y, phi = state
        r = math.hypot(x, y)
        cos_p, sin_p = math.cos(phi), math.sin(phi)
        if r < 1e-14:
            bend = 0.0
        else:
            # nu = (sin phi, -cos phi); x_hat . nu = (x sin phi - y cos phi)/r
            bend = vp(r) * (x * sin_p - y * cos_p) / r
        return (cos_p, sin_p, H - bend)

    def crossing(s, state):
        return state[1]

    crossing.terminal = True
    crossing.direction = -1.0
    s_max = config.length_budget
    if s_max is None:
        scale = max(r_start, 1.0 / max(abs(H), 1e-6), 1.0)
        s_max = 60.0 * scale
    sol = solve_ivp(
        rhs,
        (0.0, s_max),
        (r_start, 0.0, 0.5 * math.pi),
        events=crossing,
        rtol=config.rtol,
        atol=config.atol,
        dense_output=True,
        max_step=s_max / 16.0,
    )
    s_cross = float(sol.t_events[0][0]) if sol.t_events[0].size else None
    return sol, s_cross


def _half_arc_metrics(d: Density, sol, s_cross: float, config: ShootingConfig):
    """Closure residual, mirrored closed polygon, weighted volume/perimeter."""
    s = np.linspace(0.0, s_cross, config.samples + 1)
    states = sol.sol(s)
    x, y, phi = states
    residual = abs(math.cos(phi[-1])) + abs(y[-1])
    upper = np.stack([x, y], axis=-1)
    lower = np.stack([x[-2:0:-1], -y[-2:0:-1]], axis=-1)
    loop = np.vstack([upper, lower, upper[:1]])
    tan_upper = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    tan_lower = np.stack([-np.cos(phi[-2:0:-1]), np.sin(phi[-2:0:-1])], axis=-1)
    tangents = np.vstack([tan_upper, tan_lower, tan_upper[:1]])
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=-1)
    segs = np.diff(loop, axis=0)
    lens = np.linalg.norm(segs, axis=1)
    mids = 0.5 * (loop[:-1] + loop[1:])
    perimeter = float(np.sum(d.eval(mids) * lens))
    volume = polygon_plane_integral(
        loop[:, 0], loop[:, 1],
        lambda zz, xx: d.eval(np.stack([zz, xx], axis=-1)),
        res=config.volume_res,
    )
    return residual, loop, tangents, normals, abs(volume), perimeter


def shoot_constant_curvature(
    d: Density, H: float, r_start: float, config: ShootingConfig = ShootingConfig()
) -> ShootingResult:
    """Shoot one constant-H_f curve, launched perpendicular to the positive
    x-axis, and close it by reflection symmetry.

    Raises ``NonClosingError`` (carrying the partial curve) when the length
    budget runs out or the return to the axis is not perpendicular.
    """
    if r_start <= 0:
        raise ConfigurationError("launch radius must be positive")
    sol, s_cross = _integrate_half(d, H, r_start, config)
    if s_cross is None:
        s = np.linspace(0.0, sol.t[-1], config.samples + 1)
        x, y, phi = sol.sol(s)
        pts = np.stack([x, y], axis=-1)
        tangents = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=-1)
        partial = Curve(pts, tangents, normals, closed=False)
        raise NonClosingError(
            f"no axis return within length budget (H={H:g}, r_start={r_start:g})",
            partial_curve=partial,
        )
    residual, loop, tangents, normals, volume, perimeter = _half_arc_metrics(
        d, sol, s_cross, config
    )
    curve = Curve(loop, tangents, normals, closed=residual < 1e-4)
    if residual >= config.closure_tol:
        raise NonClosingError(
            f"axis return not perpendicular (residual {residual:.2e})",
            partial_curve=curve,
            best_residual=residual,
        )
    return ShootingResult(
        H=H,
        curve=curve,
        closure_residual=residual,
        enclosed_volume=volume,
        perimeter=perimeter,
        r_start=r_start,
    )


# ---------------------------------------------------------------------------
# profile estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfilePoint:
    V: float
    I_estimate: float
    H: float
    convexity_flag: bool
    min_h0: float
    closure_residual: float
    r_start: float
    upper_bound: Optional[float]
    branch: str


@dataclass(frozen=True)
class ProfileSearchBudget:
    volume_rtol: float = 1e-6
    max_shots: int = 200
    distant_gaps: tuple[float, ...] = (1e-2, 1e-3)
    shooting: ShootingConfig = ShootingConfig()


def _centered_candidate(d: Density, volume: float, budget: ProfileSearchBudget):
    """Ball about the origin with the target weighted volume, verified by an
    actual shot (the centered circle satisfies the closure identity
    H = 1/r + v'(r) exactly, but the returned metrics are re-measured)."""
    def vol_of(r: float) -> float:
        return measure_region(Ball(np.zeros(2), r), d, 512).volume - volume

    lo, hi = 1e-6, 1.0
    while vol_of(hi) < 0 and hi < 1e9:
        hi *= 2.0
    while vol_of(lo) > 0 and lo > 1e-12:
        lo *= 0.5
    r_c = brentq(vol_of, lo, hi, rtol=8.9e-16)
    vp = _radial_v_prime(d)
    h_c = 1.0 / r_c + vp(r_c)
    return shoot_constant_curvature(d, h_c, r_c, budget.shooting)


def _distance_for_gap(d: Density, gap_target: float) -> Optional[float]:
    if d.profile is None or d.profile.gap is None or not d.has_positive_limit:
        return None
    grid = np.geomspace(1.0, 1e8, 4096)
    g = d.profile.gap(grid) / d.limit_at_infinity
    ok = np.nonzero(g <= gap_target)[0]
    if ok.size == 0:
        return None
    return float(grid[ok[0]])


def _distant_candidate(d: Density, volume: float, dist: float, budget: ProfileSearchBudget):
    """Oval launched near a distant point, solved jointly for closure and
    volume by a 2-d quasi-Newton on (H, r_start)."""
    from scipy.optimize import root

    a_loc = float(d.eval_radial(dist))
    r_oval = math.sqrt(volume / (math.pi * a_loc))
    if r_oval * 8 > dist:
        return None  # oval would not be "distant" at this volume
    vp = _radial_v_prime(d)
    launch0 = dist + r_oval
    h0 = 1.0 / r_oval + vp(launch0)
    cfg = budget.shooting

    def F(z):
        H, r_start = z
        if r_start <= 0 or not np.isfinite(H):
            return [1e3, 1e3]
        sol, s_cross = _integrate_half(d, H, r_start, cfg)
        if s_cross is None:
            return [1e3, 1e3]
        residual, loop, _, _, vol, _ = _half_arc_metrics(d, sol, s_cross, cfg)
        return [math.cos(float(sol.sol(s_cross)[2])), (vol - volume) / volume]

    out = root(F, x0=np.array([h0, launch0]), method="hybr", options={"xtol": 1e-12})
    if not out.success:
        return None
    H, r_start = out.x
    try:
        shot = shoot_constant_curvature(d, float(H), float(r_start), cfg)
    except NonClosingError:
        return None
    if abs(shot.enclosed_volume - volume) > budget.volume_rtol * volume * 10:
        return None
    return shot


def estimate_profile(
    d: Density, volume: float, budget: ProfileSearchBudget = ProfileSearchBudget()
) -> ProfilePoint:
    """Upper bound for the isoperimetric profile at one volume.

    Searches closed constant-H_f curves (centered branch always; distant
    ovals when the density has a finite positive limit, where far regions
    can undercut centered candidates), keeps solutions with weighted volume
    within 1e-6 relative of the target, and returns the smallest weighted
    perimeter with its curvature constant and mean-convexity flag.  This is
    a certificate-backed upper bound, not a claimed exact profile value.
    """
    if volume <= 0:
        raise ConfigurationError("volume must be positive")
    if not d.radial or d.profile is None:
        raise InapplicableError("profile estimation needs a radial density")
    if d.dim != 2:
        raise InapplicableError("shooting operates in the plane only")
    if d.smoothness.value == "piecewise-constant":
        raise InapplicableError(
            "piecewise densities admit non-symmetric minimizers outside the "
            "shooting search space"
        )
    candidates: list[tuple[ShootingResult, str]] = []
    failures: list[str] = []
    try:
        candidates.append((_centered_candidate(d, volume, budget), "centered"))
    except (NonClosingError, ValueError) as exc:
        failures.append(f"centered: {exc}")
    for gap_target in budget.distant_gaps:
        dist = _distance_for_gap(d, gap_target)
        if dist is None:
            continue
        shot = _distant_candidate(d, volume, dist, budget)
        if shot is not None:
            candidates.append((shot, f"distant(gap~{gap_target:g})"))
    good = [
        (shot, tag)
        for shot, tag in candidates
        if abs(shot.enclosed_volume - volume) <= 10 * budget.volume_rtol * max(volume, 1e-300)
    ]
    if not good:
        raise EstimationError(
            "no closed solution matched the target volume", partials=failures or candidates
        )
    good.sort(key=lambda st: (st[0].perimeter, st[0].r_start))
    best, tag = good[0]
    h0 = curvature_along(best.curve)
    min_h0 = float(np.min(h0))
    bound = None
    if d.has_positive_limit:
        n = 2
        bound = n * (unit_ball_volume(n) * d.limit_at_infinity) ** 0.5 * volume**0.5
    return ProfilePoint(
        V=best.enclosed_volume,
        I_estimate=best.perimeter,
        H=best.H,
        convexity_flag=bool(min_h0 >= -1e-8),
        min_h0=min_h0,
        closure_residual=best.closure_residual,
        r_start=best.r_start,
        upper_bound=bound,
        branch=tag,
    )


def profile_sweep(
    d: Density, volumes: Sequence[float], budget: ProfileSearchBudget = ProfileSearchBudget()
) -> list[ProfilePoint]:
    return [estimate_profile(d, float(v), budget) for v in volumes]
