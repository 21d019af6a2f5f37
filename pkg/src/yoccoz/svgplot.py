"""SVG emission: Julia/puzzle overlays and the parameter-plane picture.

SVG files are written directly (polylines, circles, text, one embedded
escape-time raster via PNG); everything geometric reuses the puzzle's
materialization caches.
"""
from __future__ import annotations

import base64
import io
import math
from typing import Optional, Sequence

import numpy as np

from .dynamics import QuadraticMap, find_center, find_periodic_point
from .puzzle import Puzzle

_DEPTH_COLORS = (
    "#1b6ca8", "#d1495b", "#2e933c", "#8c4a9e", "#e98a15",
    "#00798c", "#b0413e", "#5c6f68", "#9e643c", "#3d348b",
)


class SvgCanvas:
    def __init__(self, x0, x1, y0, y1, width=900):
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        self.width = width
        self.height = int(width * (y1 - y0) / (x1 - x0))
        self.parts: list[str] = []

    def _map(self, z: complex) -> tuple[float, float]:
        u = (z.real - self.x0) / (self.x1 - self.x0) * self.width
        v = (self.y1 - z.imag) / (self.y1 - self.y0) * self.height
        return u, v

    def polyline(self, pts: Sequence[complex], color="#333", width=1.0, opacity=1.0):
        if len(pts) < 2:
            return
        coords = " ".join(f"{u:.2f},{v:.2f}" for u, v in (self._map(z) for z in pts))
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{width}" stroke-opacity="{opacity}"/>'
        )

    def circle(self, z: complex, radius_px=3.0, color="#000", fill=True, world_radius=None):
        u, v = self._map(z)
        if world_radius is not None:
            radius_px = world_radius / (self.x1 - self.x0) * self.width
        f = color if fill else "none"
        self.parts.append(
            f'<circle cx="{u:.2f}" cy="{v:.2f}" r="{radius_px:.2f}" fill="{f}" '
            f'stroke="{color}" stroke-width="1"/>'
        )

    def dots(self, pts: Sequence[complex], color="#888", radius_px=0.6):
        for z in pts:
            u, v = self._map(z)
            self.parts.append(f'<circle cx="{u:.2f}" cy="{v:.2f}" r="{radius_px}" fill="{color}"/>')

    def text(self, z: complex, s: str, color="#000", size=14, dx=4, dy=-4):
        u, v = self._map(z)
        self.parts.append(
            f'<text x="{u + dx:.1f}" y="{v + dy:.1f}" font-size="{size}" fill="{color}">{s}</text>'
        )

    def raster(self, rgb: np.ndarray):
        """Embed an RGB uint8 array covering the full view box."""
        from PIL import Image

        img = Image.fromarray(rgb, mode="RGB")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        data = base64.b64encode(buf.getvalue()).decode("ascii")
        self.parts.append(
            f'<image x="0" y="0" width="{self.width}" height="{self.height}" '
            f'href="data:image/png;base64,{data}" preserveAspectRatio="none"/>'
        )

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">'
        )
        return head + '<rect width="100%" height="100%" fill="white"/>' + "".join(self.parts) + "</svg>"


def julia_points(m: QuadraticMap, count: int = 6000, seed: int = 2) -> np.ndarray:
    """Inverse-iteration cloud on the Julia set."""
    rng = np.random.default_rng(seed)
    beta = find_periodic_point(m, 1, 1.5 + 0.5j if abs(m.c) > 2 else 2.0).location
    z = np.full(64, beta, dtype=complex)
    out = []
    for _ in range(count // 64 + 20):
        signs = rng.integers(0, 2, size=z.shape) * 2 - 1
        z = signs * np.sqrt(z - m.c)
        out.append(z.copy())
    pts = np.concatenate(out[10:])
    return pts[:count]


def julia_puzzle_svg(
    puz: Puzzle,
    depth: int,
    marks: Optional[dict] = None,
    width: int = 900,
) -> str:
    """Julia set with the puzzle skeleton to the given depth.

    Rays and equipotential arcs are colored by depth; optional marks is a
    mapping label -> complex point.
    """
    m = puz.map
    cloud = julia_points(m)
    pad = 0.35
    x0, x1 = cloud.real.min() - pad, cloud.real.max() + pad
    y0, y1 = cloud.imag.min() - pad, cloud.imag.max() + pad
    cv = SvgCanvas(x0, x1, y0, y1, width)
    cv.dots(cloud, color="#b8b8b8", radius_px=0.7)
    for d in range(depth + 1):
        color = _DEPTH_COLORS[d % len(_DEPTH_COLORS)]
        for piece in puz.layer(d):
            poly = puz.polygon(piece, samples_per_turn=96, res_target=0.05)
            vis = poly[np.abs(poly) < max(abs(x0), abs(x1), abs(y0), abs(y1)) * 1.6]
            cv.polyline(vis, color=color, width=max(0.5, 1.8 - 0.25 * d), opacity=0.85)
    for label, z in (marks or {}).items():
        cv.circle(z, radius_px=3.5, color="#000")
        cv.text(z, label)
    return cv.render()


# ---------------------------------------------------------------------------
# parameter plane


def escape_time_raster(x0, x1, y0, y1, nx, ny, max_iter=160) -> np.ndarray:
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y1, y0, ny)
    C = xs[None, :] + 1j * ys[:, None]
    Z = np.zeros_like(C)
    count = np.zeros(C.shape, dtype=int)
    alive = np.ones(C.shape, dtype=bool)
    for k in range(max_iter):
        Z[alive] = Z[alive] ** 2 + C[alive]
        esc = alive & (np.abs(Z) > 4.0)
        count[esc] = k
        alive &= ~esc
    t = np.where(alive, 0.0, np.sqrt(count / max_iter))
    rgb = np.zeros((*C.shape, 3), dtype=np.uint8)
    rgb[..., 0] = np.where(alive, 40, 255 - 160 * t).astype(np.uint8)
    rgb[..., 1] = np.where(alive, 44, 255 - 120 * t).astype(np.uint8)
    rgb[..., 2] = np.where(alive, 60, 255 - 60 * t).astype(np.uint8)
    return rgb


def multiplier_of_cycle(c: complex, period: int, z_seed: complex) -> tuple[complex, complex]:
    """(multiplier, cycle point) of the period-`period` cycle near z_seed."""
    m = QuadraticMap(c)
    z = z_seed
    for _ in range(60):
        fz, dz = z, 1.0 + 0.0j
        for _ in range(period):
            dz = 2 * fz * dz
            fz = fz * fz + c
        den = dz - 1
        if den == 0:
            break
        step = (fz - z) / den
        z -= step
        if abs(step) < 1e-13 * max(1.0, abs(z)):
            break
    fz, dz = z, 1.0 + 0.0j
    for _ in range(period):
        dz = 2 * fz * dz
        fz = fz * fz + c
    return dz, z


def component_radius_estimate(center: complex, period: int, h: float = 1e-5) -> float:
    """First-order radius of the hyperbolic component: 1/|lambda'(center)|.

    The multiplier map is a conformal isomorphism onto the unit disk; the
    component boundary is |lambda| = 1, so the disk model gives radius
    1/|lambda'| to first order (exact for the period-2 disk).
    """
    d = []
    for dc in (h, -h, 1j * h, -1j * h):
        lam, _ = multiplier_of_cycle(center + dc, period, 0.01 + 0.005j)
        d.append(lam / dc)  # lambda(center) = 0, so each quotient ~ lambda'
    lp = sum(d) / 4
    return 1.0 / abs(lp)


def boundary_point(center: complex, period: int, internal_angle: float) -> complex:
    """Point of the component boundary where the multiplier is
    exp(2 pi i internal_angle), by a complex secant iteration in c."""
    mu = complex(math.cos(2 * math.pi * internal_angle), math.sin(2 * math.pi * internal_angle))
    r = component_radius_estimate(center, period)
    c1 = center + 0.5 * r * mu
    c2 = center + 0.9 * r * mu

    def g(c):
        lam, _ = multiplier_of_cycle(c, period, 0.01 + 0.01j)
        return lam - mu

    g1, g2 = g(c1), g(c2)
    for _ in range(60):
        if g2 == g1:
            break
        c3 = c2 - g2 * (c2 - c1) / (g2 - g1)
        c1, g1 = c2, g2
        c2 = c3
        g2 = g(c2)
        if abs(g2) < 1e-10:
            break
    return c2


def satellite_tree(period_bound: int) -> list[dict]:
    """Centers and radius estimates of the satellite chains growing from
    the main cardioid, up to the given period."""
    comps = [{"center": 0.0 + 0.0j, "period": 1, "kind": "cardioid"}]
    out = []
    frontier = list(comps)
    while frontier:
        parent = frontier.pop()
        p0 = parent["period"]
        for q in range(2, period_bound + 1):
            if p0 * q > period_bound:
                continue
            for p in range(1, q):
                if math.gcd(p, q) != 1:
                    continue
                try:
                    bif = boundary_point(parent["center"], p0, p / q)
                    u = bif - parent["center"]
                    u /= abs(u)
                    scale = math.sin(math.pi * p / q) / (q * q)
                    if parent["kind"] != "cardioid":
                        scale *= component_radius_estimate(parent["center"], p0) * 4
                    seed = bif + 0.6 * scale * u
                    center = find_center(p0 * q, seed)
                    radius = component_radius_estimate(center, p0 * q)
                except Exception:
                    continue
                child = {
                    "center": center,
                    "period": p0 * q,
                    "kind": "satellite",
                    "root": bif,
                    "radius": radius,
                    "parent_period": p0,
                }
                out.append(child)
                frontier.append(child)
    return out


def cardioid_polyline(n: int = 400) -> np.ndarray:
    t = np.linspace(0, 2 * math.pi, n)
    mu = np.exp(1j * t)
    return mu / 2 - mu**2 / 4


def molecule_svg(period_bound: int = 6, width: int = 900, raster_n: int = 480) -> str:
    """Parameter-plane picture: escape-time backdrop with the satellite
    component skeleton (cardioid plus satellite disks) overlaid."""
    x0, x1, y0, y1 = -2.1, 0.7, -1.2, 1.2
    cv = SvgCanvas(x0, x1, y0, y1, width)
    ny = int(raster_n * (y1 - y0) / (x1 - x0))
    cv.raster(escape_time_raster(x0, x1, y0, y1, raster_n, ny))
    cv.polyline(cardioid_polyline(), color="#ffd166", width=2.0)
    for comp in satellite_tree(period_bound):
        cv.circle(comp["center"], world_radius=comp["radius"], color="#ffd166", fill=False)
        cv.circle(comp["center"], radius_px=1.5, color="#ffd166")
        if comp["period"] <= 4:
            cv.text(comp["center"], str(comp["period"]), color="#ffd166", size=12)
    return cv.render()
