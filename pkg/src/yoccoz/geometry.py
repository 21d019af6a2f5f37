"""Planar helpers shared by the puzzle and modulus layers.

Polylines and polygons are numpy arrays of complex numbers.  Grids are
axis-aligned with square cells; classification codes follow modulus.py.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def as_xy(poly: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    poly = np.asarray(poly, dtype=complex)
    return poly.real, poly.imag


def points_in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd (crossing number) containment test, vectorized over points.

    Points lying on an edge are classified arbitrarily; callers must keep
    query points away from the boundary.
    """
    points = np.asarray(points, dtype=complex)
    shape = points.shape
    px = points.real.ravel()[:, None]
    py = points.imag.ravel()[:, None]
    x, y = as_xy(poly)
    x1, y1 = x[:-1][None, :], y[:-1][None, :]
    x2, y2 = x[1:][None, :], y[1:][None, :]
    straddle = (y1 <= py) != (y2 <= py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x1 + (py - y1) * (x2 - x1) / np.where(y2 == y1, 1.0, y2 - y1)
    hits = straddle & (xcross > px)
    return (np.sum(hits, axis=1) % 2 == 1).reshape(shape)


def point_in_polygon(z: complex, poly: np.ndarray) -> bool:
    return bool(points_in_polygon(np.array([z]), poly)[0])


def point_segment_distance(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest segment of a polyline.

    Evaluated in chunks to keep the pairwise matrix bounded."""
    points = np.asarray(points, dtype=complex).ravel()
    p = np.asarray(poly, dtype=complex)
    a, b = p[:-1][None, :], p[1:][None, :]
    ab = b - a
    denom = np.abs(ab) ** 2
    denom_safe = np.where(denom == 0, 1.0, denom)
    out = np.empty(points.shape)
    chunk = max(1, int(4e6 // max(1, a.shape[1])))
    for i in range(0, len(points), chunk):
        z = points[i : i + chunk][:, None]
        t = np.clip(((z - a) * np.conj(ab)).real / denom_safe, 0.0, 1.0)
        proj = a + t * ab
        out[i : i + chunk] = np.min(np.abs(z - proj), axis=1)
    return out


def polyline_gap(a: np.ndarray, b: np.ndarray) -> float:
    """Minimal distance between two polylines (points against segments)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    d1 = point_segment_distance(a, b).min()
    d2 = point_segment_distance(b, a).min()
    return float(min(d1, d2))


def polyline_gap_local(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """(gap, local resolution): min distance and sampling size near it.

    The resolution is the longest segment adjacent to the closest-approach
    points on either polyline, i.e. the sampling error scale of the
    measurement itself.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    da = point_segment_distance(a, b)
    db = point_segment_distance(b, a)
    ia = int(np.argmin(da))
    ib = int(np.argmin(db))
    gap = float(min(da[ia], db[ib]))

    def local_seg(poly, i):
        segs = []
        if i > 0:
            segs.append(abs(poly[i] - poly[i - 1]))
        if i < len(poly) - 1:
            segs.append(abs(poly[i + 1] - poly[i]))
        return max(segs) if segs else 0.0

    return gap, float(max(local_seg(a, ia), local_seg(b, ib)))


def polyline_resolution(poly: np.ndarray) -> float:
    """Longest segment of a polyline: its sampling resolution."""
    p = np.asarray(poly, dtype=complex)
    if len(p) < 2:
        return math.inf
    return float(np.max(np.abs(np.diff(p))))


def segment_crossings(a: complex, b: complex, poly: np.ndarray) -> int:
    """Number of segments of the polyline properly crossed by segment ab."""
    p = np.asarray(poly, dtype=complex)
    c, d = p[:-1], p[1:]

    def orient(p1, p2, p3):
        return np.sign(((p2 - p1) * np.conj(p3 - p1)).imag)

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, np.full_like(c, a))
    o4 = orient(c, d, np.full_like(c, b))
    return int(np.sum((o1 * o2 < 0) & (o3 * o4 < 0)))


@dataclass(frozen=True)
class Grid:
    """Square-celled grid over a bounding box; cell (i, j) = (row, col)."""

    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    @classmethod
    def over_bbox(cls, x0, x1, y0, y1, n: int) -> "Grid":
        h = max(x1 - x0, y1 - y0) / n
        nx = max(2, math.ceil((x1 - x0) / h))
        ny = max(2, math.ceil((y1 - y0) / h))
        return cls(x0=x0, y0=y0, h=h, nx=nx, ny=ny)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def centers(self) -> np.ndarray:
        xs = self.x0 + (np.arange(self.nx) + 0.5) * self.h
        ys = self.y0 + (np.arange(self.ny) + 0.5) * self.h
        X, Y = np.meshgrid(xs, ys)
        return X + 1j * Y

    def cell_of(self, z: complex) -> tuple[int, int]:
        j = int((z.real - self.x0) / self.h)
        i = int((z.imag - self.y0) / self.h)
        return i, j

    def rasterize_polygon(self, poly: np.ndarray) -> np.ndarray:
        """Boolean mask of cells whose centers lie inside the polygon."""
        return points_in_polygon(self.centers(), poly)

    def rasterize_polyline(self, poly: np.ndarray) -> np.ndarray:
        """Boolean mask of cells touched by a polyline (half-cell sampling)."""
        mask = np.zeros(self.shape, dtype=bool)
        p = np.asarray(poly, dtype=complex)
        for a, b in zip(p[:-1], p[1:]):
            n = max(2, int(abs(b - a) / (0.4 * self.h)) + 2)
            ts = np.linspace(0.0, 1.0, n)
            zs = a + ts * (b - a)
            js = np.floor((zs.real - self.x0) / self.h).astype(int)
            is_ = np.floor((zs.imag - self.y0) / self.h).astype(int)
            ok = (js >= 0) & (js < self.nx) & (is_ >= 0) & (is_ < self.ny)
            mask[is_[ok], js[ok]] = True
        return mask
