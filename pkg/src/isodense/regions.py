"""Region representations for measurable sets in R^2 and R^3.

Four variants are supported:

* ``Ball`` -- any dimension >= 2 (quadrature implemented for n in {2, 3});
* ``PolarGraph`` -- star-shaped planar set r = r(theta), piecewise linear in
  the stored samples, optionally about a center other than the origin;
* ``Axisymmetric`` -- solid of revolution in R^3 described by a simple closed
  polyline in the (rho, phi) half-plane (spherical coordinates, axis phi = 0);
* ``IndicatorGrid`` -- boolean cells of size h, n in {2, 3}.

Regions serialize to JSON; indicator grids can also round-trip through a raw
binary mask with a small JSON header.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ConfigurationError, InvalidRegionError

__all__ = [
    "Ball",
    "PolarGraph",
    "Axisymmetric",
    "IndicatorGrid",
    "Region",
    "region_to_json",
    "load_region",
    "save_grid_mask",
    "load_grid_mask",
]


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.center.ndim != 1 or self.center.size < 2:
            raise InvalidRegionError("ball center must be a point in R^n, n >= 2")
        if not np.all(np.isfinite(self.center)) or not np.isfinite(self.radius):
            raise InvalidRegionError("ball has non-finite data")
        if self.radius <= 0:
            raise InvalidRegionError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return self.center.size


@dataclass(frozen=True)
class PolarGraph:
    """Planar set {center + rho*u(theta): 0 <= rho <= r(theta)}.

    ``theta`` is strictly increasing and spans exactly 2*pi; the first and
    last r-values must coincide (periodic closure).  r(theta) is interpreted
    piecewise linearly between samples.
    """

    theta: np.ndarray
    r: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        th, r = self.theta, self.r
        if th.ndim != 1 or th.size < 4 or th.shape != r.shape:
            raise InvalidRegionError("polar graph needs matching theta/r arrays (>= 4 samples)")
        if np.any(np.diff(th) <= 0):
            raise InvalidRegionError("polar graph angles must be strictly increasing")
        if abs((th[-1] - th[0]) - 2.0 * np.pi) > 1e-9:
            raise InvalidRegionError("polar graph must span exactly 2*pi")
        if np.any(r <= 0):
            raise InvalidRegionError("polar graph radii must be positive")
        if abs(r[0] - r[-1]) > 1e-12 * max(1.0, abs(r[0])):
            raise InvalidRegionError("polar graph must close up (first r == last r)")
        if self.center.shape != (2,):
            raise InvalidRegionError("polar graph center must be a point in R^2")

    @property
    def dim(self) -> int:
        return 2

    def radius_at(self, angles: np.ndarray) -> np.ndarray:
        a = np.mod(np.asarray(angles, dtype=float) - self.theta[0], 2.0 * np.pi) + self.theta[0]
        return np.interp(a, self.theta, self.r)

    def boundary_points(self, angles: np.ndarray) -> np.ndarray:
        rho = self.radius_at(angles)
        u = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        return self.center + rho[..., None] * u


def _polyline_is_simple(z: np.ndarray, x: np.ndarray) -> bool:
    # O(k^2) segment intersection test; region polylines are small (<= few 1000).
    pts = np.stack([z, x], axis=1)
    segs = np.stack([pts[:-1], pts[1:]], axis=1)
    k = len(segs)
    for i in range(k):
        p, q = segs[i]
        d1 = q - p
        for j in range(i + 2, k):
            if i == 0 and j == k - 1:
                continue  # closing segment shares the first vertex
            a, b = segs[j]
            d2 = b - a
            denom = d1[0] * d2[1] - d1[1] * d2[0]
            if abs(denom) < 1e-30:
                continue
            t = ((a[0] - p[0]) * d2[1] - (a[1] - p[1]) * d2[0]) / denom
            s = ((a[0] - p[0]) * d1[1] - (a[1] - p[1]) * d1[0]) / denom
            if 1e-12 < t < 1 - 1e-12 and 1e-12 < s < 1 - 1e-12:
                return False
    return True


@dataclass(frozen=True)
class Axisymmetric:
    """Solid of revolution about the polar axis, n = 3.

    ``rho``/``phi`` describe a closed polyline (first point repeated last) in
    {rho >= 0, 0 <= phi <= pi}.  Segments lying on the axis (phi = 0 or pi)
    close the generating polygon but sweep no boundary area.
    """

    rho: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float))
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        rho, phi = self.rho, self.phi
        if rho.ndim != 1 or rho.size < 4 or rho.shape != phi.shape:
            raise InvalidRegionError("axisymmetric polyline needs matching rho/phi arrays")
        if np.any(rho < 0) or np.any(phi < -1e-12) or np.any(phi > np.pi + 1e-12):
            raise InvalidRegionError("axisymmetric polyline must stay in {rho>=0, 0<=phi<=pi}")
        if abs(rho[0] - rho[-1]) > 0 or abs(phi[0] - phi[-1]) > 0:
            raise InvalidRegionError("axisymmetric polyline must be closed (repeat first point)")
        z, x = self.meridian()
        span = max(np.ptp(z), np.ptp(x))
        if span <= 0:
            raise InvalidRegionError("axisymmetric polyline is degenerate")
        if not _polyline_is_simple(z, x):
            raise InvalidRegionError("axisymmetric polyline self-intersects")

    @property
    def dim(self) -> int:
        return 3

    def meridian(self) -> tuple[np.ndarray, np.ndarray]:
        """Cartesian meridian coordinates (z along the axis, x distance from it)."""
        return self.rho * np.cos(self.phi), self.rho * np.sin(self.phi)


@dataclass(frozen=True)
class IndicatorGrid:
    """Axis-aligned boolean cells; cell (i, j[, k]) covers origin + [i, i+1)*h x ..."""

    origin: np.ndarray
    h: float
    cells: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "cells", np.asarray(self.cells, dtype=bool))
        if self.cells.ndim not in (2, 3):
            raise InvalidRegionError("indicator grid must be 2-d or 3-d")
        if self.origin.shape != (self.cells.ndim,):
            raise InvalidRegionError("indicator grid origin/cells dimension mismatch")
        if self.h <= 0 or not np.isfinite(self.h):
            raise InvalidRegionError("indicator grid needs a positive cell size")
        if not self.cells.any():
            raise InvalidRegionError("indicator grid has no true cells")

    @property
    def dim(self) -> int:
        return self.cells.ndim

    def cell_centers(self) -> np.ndarray:
        """Centers of the true cells, shape (k, dim)."""
        idx = np.argwhere(self.cells)
        return self.origin + (idx + 0.5) * self.h

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Membership test for world points (vectorized, False outside the grid)."""
        pts = np.asarray(pts, dtype=float)
        idx = np.floor((pts - self.origin) / self.h).astype(int)
        shape = self.cells.shape
        ok = np.ones(pts.shape[:-1], dtype=bool)
        for ax in range(self.dim):
            ok &= (idx[..., ax] >= 0) & (idx[..., ax] < shape[ax])
        out = np.zeros(pts.shape[:-1], dtype=bool)
        if np.any(ok):
            sel = tuple(idx[ok][:, ax] for ax in range(self.dim))
            out[ok] = self.cells[sel]
        return out


Region = Union[Ball, PolarGraph, Axisymmetric, IndicatorGrid]


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def region_to_json(region: Region) -> dict:
    if isinstance(region, Ball):
        return {"kind": "ball", "center": region.center.tolist(), "radius": region.radius}
    if isinstance(region, PolarGraph):
        return {
            "kind": "polar_graph",
            "theta": region.theta.tolist(),
            "r": region.r.tolist(),
            "center": region.center.tolist(),
        }
    if isinstance(region, Axisymmetric):
        return {"kind": "axisymmetric", "rho": region.rho.tolist(), "phi": region.phi.tolist()}
    if isinstance(region, IndicatorGrid):
        return {
            "kind": "indicator_grid",
            "origin": region.origin.tolist(),
            "h": region.h,
            "cells": region.cells.astype(int).tolist(),
        }
    raise ConfigurationError(f"unknown region type {type(region)!r}")


def load_region(source) -> Region:
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            doc = json.load(fh)
        base = Path(source).parent
    elif isinstance(source, dict):
        doc, base = source, Path(".")
    else:
        raise ConfigurationError("region source must be a path or a dict")
    kind = doc.get("kind")
    if kind == "ball":
        return Ball(np.asarray(doc["center"]), float(doc["radius"]))
    if kind == "polar_graph":
        return PolarGraph(
            np.asarray(doc["theta"]),
            np.asarray(doc["r"]),
            np.asarray(doc.get("center", (0.0, 0.0))),
        )
    if kind == "axisymmetric":
        return Axisymmetric(np.asarray(doc["rho"]), np.asarray(doc["phi"]))
    if kind == "indicator_grid":
        if "mask_file" in doc:
            return load_grid_mask(base / doc["mask_file"] if base else doc["mask_file"], doc)
        return IndicatorGrid(
            np.asarray(doc["origin"]), float(doc["h"]), np.asarray(doc["cells"], dtype=bool)
        )
    raise ConfigurationError(f"unknown region kind '{kind}'")


def save_grid_mask(grid: IndicatorGrid, mask_path, header_path=None) -> None:
    """Write the boolean cells as a flat uint8 file plus a JSON header."""
    mask_path = Path(mask_path)
    mask_path.write_bytes(np.ascontiguousarray(grid.cells, dtype=np.uint8).tobytes())
    header = {
        "kind": "indicator_grid",
        "dims": list(grid.cells.shape),
        "h": grid.h,
        "origin": grid.origin.tolist(),
        "mask_file": mask_path.name,
    }
    header_path = Path(header_path) if header_path else mask_path.with_suffix(".json")
    header_path.write_text(json.dumps(header))


def load_grid_mask(mask_path, header: dict) -> IndicatorGrid:
    dims = tuple(int(v) for v in header["dims"])
    raw = np.frombuffer(Path(mask_path).read_bytes(), dtype=np.uint8)
    if raw.size != int(np.prod(dims)):
        raise ConfigurationError("mask file size does not match header dims")
    cells = raw.reshape(dims).astype(bool)
    return IndicatorGrid(np.asarray(header["origin"]), float(header["h"]), cells)
