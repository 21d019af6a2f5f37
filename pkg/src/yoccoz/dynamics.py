"""Numerics for a single quadratic polynomial z -> z^2 + c.

Iteration, the Green's function of the filled Julia set, external ray
tracing against Boettcher targets, ray landing, periodic point location,
and clustering of landing points into numerical ray portraits.

External rays are traced by stepping the potential down geometrically and
Newton-correcting z against f^n(z) = w, where w is the Boettcher-coordinate
target at angle 2^n * theta and potential 2^n * G, with n chosen large
enough that the Boettcher map is the identity to machine precision.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .angles import Angle, double, is_periodic, validate_portrait

# Potential above which the Boettcher coordinate is identified with z.
# exp(_G_ID) = 1e8, so the relative identification error is ~|c| * 1e-16.
_G_ID = math.log(1e8)
_DERIV_CAP = 1e280


class NewtonDivergence(RuntimeError):
    """Newton correction failed below the minimal potential step."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class NoConvergence(RuntimeError):
    """Newton iteration for a periodic point did not converge."""


class GreenValue(NamedTuple):
    value: float
    censored: bool


@dataclass(frozen=True)
class QuadraticMap:
    """The polynomial f(z) = z^2 + c with its numeric policy."""

    c: complex
    escape_radius: float = 1e3
    max_iter: int = 1000
    newton_tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "c", complex(self.c))
        if self.escape_radius < 2 + abs(self.c):
            raise ValueError(
                f"escape_radius {self.escape_radius} < 2 + |c| = {2 + abs(self.c)}: "
                "escape is not guaranteed beyond it"
            )

    def f(self, z: complex) -> complex:
        return z * z + self.c

    def iterate(self, z: complex, n: int) -> complex:
        for _ in range(n):
            z = z * z + self.c
        return z

    def orbit_points(self, z: complex, n: int) -> list[complex]:
        pts = [z]
        for _ in range(n):
            z = z * z + self.c
            pts.append(z)
        return pts

    def green(self, z: complex) -> GreenValue:
        """Green's function G(z) = lim 2^-n log|f^n(z)|; 0 if no escape.

        After escaping the guaranteed radius the orbit is pushed to |z| >=
        1e18 so the tail correction is below double precision.
        """
        z = complex(z)
        R = self.escape_radius
        n = 0
        while n < self.max_iter and abs(z) <= R:
            z = z * z + self.c
            n += 1
        if abs(z) <= R:
            return GreenValue(0.0, True)
        while abs(z) < 1e18:
            z = z * z + self.c
            n += 1
        return GreenValue(math.ldexp(math.log(abs(z)), -n), False)

    @property
    def base_potential(self) -> float:
        """Potential of the reference equipotential, log(escape_radius)."""
        return math.log(self.escape_radius)

    def depth_potential(self, m: int) -> float:
        """Potential of the depth-m equipotential: base / 2^m."""
        return math.ldexp(self.base_potential, -m)


@dataclass
class RayTrace:
    """Polyline of one external ray, ordered by decreasing potential."""

    angle: Angle
    points: list[complex]
    potentials: list[float]
    landed: bool = False
    landing_point: Optional[complex] = None
    warning: Optional[str] = None

    def to_json_dict(self) -> dict:
        return {
            "angle": str(self.angle),
            "points": [[z.real, z.imag] for z in self.points],
            "potentials": list(self.potentials),
            "landed": self.landed,
            "landing_point": (
                [self.landing_point.real, self.landing_point.imag] if self.landed else None
            ),
        }


@dataclass(frozen=True)
class PeriodicPoint:
    location: complex
    period: int
    multiplier: complex
    dividing: Optional[bool] = None
    landing_angles: Optional[frozenset] = None

    @property
    def repelling(self) -> bool:
        return abs(self.multiplier) > 1


def _eval_fn(c: complex, z: complex, n: int) -> tuple[complex, complex]:
    """f^n(z) and its z-derivative by forward accumulation."""
    d = 1.0 + 0.0j
    for _ in range(n):
        d = 2.0 * z * d
        z = z * z + c
        if abs(d) > _DERIV_CAP or abs(z) > 1e200:
            return z, complex(math.inf, 0.0)
    return z, d


def _ray_target(angle: Angle, potential: float) -> tuple[int, complex]:
    """Iterate count n and Boettcher target for the given ray point.

    n is minimal with 2^n * potential >= the identification potential; the
    target is exp(2^n*potential + 2*pi*i * (2^n*angle mod 1)) with the
    angle doubled exactly in integer arithmetic.
    """
    n = max(0, math.ceil(math.log2(_G_ID / potential))) if potential < _G_ID else 0
    num, den = angle.numerator, angle.denominator
    frac = ((num * pow(2, n, den)) % den) / den if den > 1 else 0.0
    w = cmath.exp(complex(math.ldexp(potential, n), 2 * math.pi * frac))
    return n, w


def _newton_ray_point(m: QuadraticMap, angle: Angle, potential: float, seed: complex):
    """Solve f^n(z) = target from seed; return z or None on failure."""
    n, w = _ray_target(angle, potential)
    z = seed
    tol = m.newton_tol
    for _ in range(40):
        fz, dz = _eval_fn(m.c, z, n)
        if not (abs(dz) < math.inf) or dz == 0:
            return None
        step = (fz - w) / dz
        z = z - step
        if abs(step) < tol * max(1.0, abs(z)):
            return z
        if abs(z) > 10 * max(m.escape_radius, abs(w)):
            return None
    return None


def trace_ray(
    m: QuadraticMap,
    angle,
    target_potential: float,
    step_ratio: float = 2 ** (-1 / 8),
) -> RayTrace:
    """Trace the external ray of the given angle down to target_potential.

    Potential levels decrease geometrically by step_ratio; each level is
    Newton-corrected.  On divergence the step is split until a floor, then
    a NewtonDivergence carrying the partial trace is raised.
    """
    angle = angle if isinstance(angle, Angle) else Angle(angle)
    if target_potential <= 0:
        raise ValueError("target_potential must be positive")
    G0 = m.base_potential
    z = cmath.exp(complex(G0, 2 * math.pi * angle.turns))
    z0 = _newton_ray_point(m, angle, G0, z)
    if z0 is None:
        raise NewtonDivergence(f"cannot start ray {angle} at potential {G0}")
    points, potentials = [z0], [G0]
    _descend(m, angle, points, potentials, target_potential, step_ratio)
    return RayTrace(angle=angle, points=points, potentials=potentials)


def _descend(m, angle, points, potentials, target, ratio, min_ratio=2 ** (-1 / 1024)):
    """Extend a trace down to `target`, adaptively splitting failed steps."""
    G = potentials[-1]
    while G > target * (1 + 1e-12):
        Gn = max(G * ratio, target)
        z = _newton_ray_point(m, angle, Gn, points[-1])
        sub = ratio
        while z is None:
            sub = math.sqrt(sub)
            if sub > min_ratio:
                raise NewtonDivergence(
                    f"ray {angle} stalled at potential {G}",
                    partial=RayTrace(angle, list(points), list(potentials)),
                )
            Gn = max(G * sub, target)
            z = _newton_ray_point(m, angle, Gn, points[-1])
        points.append(z)
        potentials.append(Gn)
        G = Gn


def ray_point(m: QuadraticMap, angle, potential: float) -> complex:
    """The point of the external ray at an exact potential."""
    return trace_ray(m, angle, potential).points[-1]


def land_ray(
    m: QuadraticMap,
    angle,
    landing_tol: float = 1e-8,
    max_steps: int = 4000,
) -> RayTrace:
    """Trace a rational ray down to its landing point.

    The potential decays with an accelerating ratio; landing is declared
    when the raw tail has diameter < landing_tol and the geometric
    (Aitken) extrapolation of the tail is consistent to landing_tol/2.
    Non-contracting tails (near-parabolic landings) are reported with
    warning "slow_landing" rather than guessed.
    """
    angle = angle if isinstance(angle, Angle) else Angle(angle)
    tr = trace_ray(m, angle, target_potential=1e-3)
    pts, pots = tr.points, tr.potentials
    G = pots[-1]
    exp_step = 0.125  # next potential is G * 2**-exp_step
    steps = 0
    while steps < max_steps:
        steps += 1
        if _tail_landed(pts, landing_tol):
            tail = pts[-3:]
            tr.landed = True
            tr.landing_point = sum(tail) / len(tail)
            return tr
        if G < 1e-270:
            tr.warning = "slow_landing"
            return tr
        Gn = G * 2 ** (-exp_step)
        z = _newton_ray_point(m, angle, Gn, pts[-1])
        if z is None:
            exp_step /= 2
            if exp_step < 1 / 512:
                tr.warning = "slow_landing"
                return tr
            continue
        pts.append(z)
        pots.append(Gn)
        G = Gn
        exp_step = min(exp_step * 2, 8.0)
    tr.warning = "slow_landing"
    return tr


def _tail_landed(pts: Sequence[complex], tol: float) -> bool:
    if len(pts) < 5:
        return False
    tail = pts[-4:]
    diam = max(abs(a - b) for a in tail for b in tail)
    if diam >= tol:
        return False
    # geometric extrapolation of the remaining distance must be small too
    d1, d2 = pts[-2] - pts[-3], pts[-1] - pts[-2]
    if abs(d2) == 0:
        return True
    if abs(d1) <= abs(d2):  # not contracting
        return False
    q = d2 / d1
    rest = abs(d2 * q / (1 - q))
    return rest < tol / 2


def find_periodic_point(m: QuadraticMap, period: int, seed: complex) -> PeriodicPoint:
    """Newton-refine a periodic point of f^period from seed.

    The exact period is the smallest divisor d of `period` with
    f^d(z) ~ z; the multiplier is (f^d)'(z) at that exact period.
    """
    if abs(seed) > m.escape_radius:
        raise ValueError("seed outside escape radius")
    z = complex(seed)
    for _ in range(80):
        fz, dz = _eval_fn(m.c, z, period)
        denom = dz - 1.0
        if denom == 0 or not (abs(denom) < math.inf):
            raise NoConvergence(f"degenerate Newton step at {z}")
        step = (fz - z) / denom
        z = z - step
        if abs(step) < m.newton_tol * max(1.0, abs(z)):
            break
    else:
        raise NoConvergence(f"no periodic point of period {period} from seed {seed}")
    res = abs(m.iterate(z, period) - z)
    if not res < 100 * m.newton_tol * max(1.0, abs(z)):
        raise NoConvergence(f"refined point has residual {res}")
    exact = period
    for d in range(1, period):
        if period % d == 0 and abs(m.iterate(z, d) - z) < 1e-8 * max(1.0, abs(z)):
            exact = d
            break
    _, mult = _eval_fn(m.c, z, exact)
    return PeriodicPoint(location=z, period=exact, multiplier=mult)


@dataclass(frozen=True)
class LandingCluster:
    angles: tuple[Angle, ...]
    point: Optional[complex]
    resolved: bool


def cluster_landings(
    m: QuadraticMap,
    angles: Sequence,
    cluster_tol: float = 1e-6,
    landing_tol: float = 1e-8,
    _cache: Optional[dict] = None,
) -> list[LandingCluster]:
    """Land every ray and partition the angles by common landing point.

    Angles whose rays fail to land within tolerance become singleton
    clusters flagged unresolved.
    """
    angles = [a if isinstance(a, Angle) else Angle(a) for a in angles]
    landings: dict[Angle, Optional[complex]] = {}
    for a in angles:
        if _cache is not None and a in _cache:
            landings[a] = _cache[a]
            continue
        tr = land_ray(m, a, landing_tol=landing_tol)
        landings[a] = tr.landing_point if tr.landed else None
        if _cache is not None:
            landings[a] = landings[a]
            _cache[a] = landings[a]

    resolved = [(a, z) for a, z in landings.items() if z is not None]
    parent = list(range(len(resolved)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(resolved)):
        for j in range(i + 1, len(resolved)):
            if abs(resolved[i][1] - resolved[j][1]) < cluster_tol:
                parent[find(i)] = find(j)

    groups: dict[int, list[int]] = {}
    for i in range(len(resolved)):
        groups.setdefault(find(i), []).append(i)

    clusters = []
    for idx in groups.values():
        angs = tuple(sorted(resolved[i][0] for i in idx))
        pt = sum(resolved[i][1] for i in idx) / len(idx)
        clusters.append(LandingCluster(angs, pt, True))
    for a, z in landings.items():
        if z is None:
            clusters.append(LandingCluster((a,), None, False))
    clusters.sort(key=lambda cl: cl.angles[0])
    return clusters


def portrait_from_clusters(clusters: Sequence[LandingCluster]):
    """Validate the resolved clusters as an orbit portrait."""
    classes = [cl.angles for cl in clusters if cl.resolved]
    return validate_portrait(classes)


def equipotential(m: QuadraticMap, level: float, samples: int) -> np.ndarray:
    """Sample the equipotential {G = level} at equally spaced ray angles."""
    if level <= 0:
        raise ValueError("level must be positive")
    if samples < 16:
        raise ValueError("need at least 16 samples")
    pts = [ray_point(m, Angle(k, samples), level) for k in range(samples)]
    pts.append(pts[0])
    return np.array(pts, dtype=complex)


def find_center(period: int, seed: complex, tol: float = 1e-14) -> complex:
    """Newton solve (in c) of f_c^period(0) = 0 for a superattracting center."""
    c = complex(seed)
    for _ in range(100):
        z, dz = 0.0 + 0.0j, 0.0 + 0.0j
        for _ in range(period):
            dz = 2 * z * dz + 1
            z = z * z + c
        if dz == 0:
            raise NoConvergence("degenerate center Newton step")
        step = z / dz
        c = c - step
        if abs(step) < tol:
            return c
    raise NoConvergence(f"center of period {period} did not converge from {seed}")


# ---------------------------------------------------------------------------
# Vectorized coarse prefilter: which candidate angles could land near a point.


def _vector_trace(m: QuadraticMap, angles: list[Angle], potential: float) -> np.ndarray:
    """Positions of many rays at one potential (coarse, vectorized).

    Uses float angle arithmetic inside the same Newton-target recipe as
    the scalar tracer; accurate to ~1e-9 at the moderate potentials used
    for prefiltering.  Elements whose Newton correction diverges are
    returned as NaN (callers should keep them as candidates).
    """
    G0 = m.base_potential
    z = np.exp(G0 + 2j * math.pi * np.array([a.turns for a in angles]))
    alive = np.ones(len(angles), dtype=bool)
    levels = []
    G = G0
    while G > potential * 1.000001:
        ratio = 2 ** (-1 / 8) if G > 1.0 else 2 ** (-1 / 4)
        G = max(G * ratio, potential)
        levels.append(G)
    nums = np.array([a.numerator for a in angles], dtype=object)
    dens = np.array([a.denominator for a in angles], dtype=object)
    for G in levels:
        n = max(0, math.ceil(math.log2(_G_ID / G))) if G < _G_ID else 0
        args = np.array(
            [float((nu * pow(2, n, de)) % de) / float(de) if de > 1 else 0.0
             for nu, de in zip(nums, dens)]
        )
        w = np.exp(math.ldexp(G, n) + 2j * math.pi * args)
        zl = z[alive]
        wl = w[alive]
        ok = np.ones(zl.shape, dtype=bool)
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(8):
                fz = zl.copy()
                dz = np.ones_like(zl)
                for _ in range(n):
                    dz = 2 * fz * dz
                    fz = fz * fz + m.c
                ok &= np.isfinite(fz) & np.isfinite(dz) & (dz != 0)
                step = np.where(ok, (fz - wl) / np.where(dz == 0, 1.0, dz), 0.0)
                zl = zl - step
                if np.all(np.abs(step[ok]) < 1e-10 * np.maximum(1.0, np.abs(zl[ok]))):
                    break
            ok &= np.isfinite(zl) & (np.abs(zl) < 10 * max(m.escape_radius, np.max(np.abs(wl))))
        idx = np.flatnonzero(alive)
        z[idx[ok]] = zl[ok]
        alive[idx[~ok]] = False
    z[~alive] = complex(math.nan, math.nan)
    return z


def rays_landing_at(
    m: QuadraticMap,
    point: complex,
    angle_period: int,
    cluster_tol: float = 1e-6,
    _cache: Optional[dict] = None,
) -> list[Angle]:
    """All angles of exact period `angle_period` whose rays land at `point`.

    Candidates are pruned by a vectorized coarse trace before the
    survivors are landed exactly.
    """
    den = 2**angle_period - 1
    cands = [Angle(k, den) for k in range(1, den)]
    # exact-period filter
    cands = [a for a in cands if _exact_period_fast(a, angle_period)]
    for pot, radius in ((0.05, 1.5), (3e-3, 0.5), (2e-4, 0.2)):
        if len(cands) <= 8:
            break
        z = _vector_trace(m, cands, pot)
        dist = np.abs(z - point)
        keep = ~np.isfinite(dist) | (dist < radius)
        cands = [a for a, k in zip(cands, keep) if k]
    out = []
    for a in cands:
        if _cache is not None and a in _cache:
            lp = _cache[a]
        else:
            tr = land_ray(m, a)
            lp = tr.landing_point if tr.landed else None
            if _cache is not None:
                _cache[a] = lp
        if lp is not None and abs(lp - point) < cluster_tol:
            out.append(a)
    return sorted(out)


def _exact_period_fast(a: Angle, n: int) -> bool:
    num, den = a.numerator, a.denominator
    for d in range(1, n):
        if n % d == 0 and (num * (pow(2, d, den) - 1)) % den == 0:
            return False
    return True
