"""Renormalization combinatorics: the (r, q, n) parameters and the nest.

The bounded-combinatorics decision runs in three stages, mirroring the
construction of the secondary dividing point:

  1. choose a cycle with r rays: either the degenerate base choice r = 1
     (the non-dividing beta fixed point with its single ray, covering maps
     with no satellite prefix) or a dividing cycle found from landed
     periodic rays;
  2. the unique fixed point alpha of f^r inside the central domain cut by
     the rays at the cycle and at gamma' = -gamma must be repelling, with
     q rays landing at it;
  3. n is the first escape time of f^(rq m)(0) from the central domain cut
     by the rays at alpha and alpha'; additionally the earlier orbit
     f^(r j)(0), j = 1..qn-1, must stay inside the gamma-domain.

The last containment condition is what fails for satellite-renormalizable
choices, pushing the search to the next cycle; without it the nest lemmas
(non-degenerate annulus etc.) provably fail, which is how it is pinned in
the tests.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .angles import Angle, OrbitPortrait, antipode, double, validate_portrait
from .dynamics import (
    PeriodicPoint,
    QuadraticMap,
    _eval_fn,
    land_ray,
    rays_landing_at,
)
from .geometry import point_segment_distance, segment_crossings
from .puzzle import GeometricPiece, Piece, Puzzle, PuzzleError, build_puzzle


_SESSIONS: dict = {}


def _session(m: QuadraticMap, cache: Optional[dict] = None) -> dict:
    """Per-map memo shared by repeated decisions: landed rays, cycle
    lists, and ray-at-point scans."""
    if cache is not None:
        base = cache
    else:
        base = _SESSIONS.setdefault(m, {})
    for key in ("land", "cycles", "rays_at"):
        base.setdefault(key, {})
    return base


class NotSatisfied(RuntimeError):
    """The (r, q, n) search failed; `stage` names the failing stage."""

    def __init__(self, stage: str, detail: str = ""):
        super().__init__(f"{stage}: {detail}" if detail else stage)
        self.stage = stage
        self.detail = detail


class Inconclusive(RuntimeError):
    """An orbit point came too close to the ray skeleton to classify."""


@dataclass
class RenormData:
    """Combinatorial parameters of one admissible (r, q, n) choice."""

    r: int
    q: int
    n: int
    k: int
    lam: int  # depth at which the cycle stars are pairwise disjoint
    gamma_portrait: OrbitPortrait
    gamma_point: complex
    alpha_point: PeriodicPoint
    alpha_portrait: OrbitPortrait
    gamma_domain_ok: bool
    kind: Optional[str] = None  # primitive | satellite | immediate
    period_p: Optional[int] = None

    def __post_init__(self):
        assert self.k == self.r * self.q * self.n
        assert self.lam == self.k + 1 + 2 * self.r

    @property
    def nest_base_depth(self) -> int:
        return self.k + self.r

    @property
    def pocket_depth(self) -> int:
        """Depth of P, the innermost piece of the Y^(rq j + 1) cascade."""
        return self.r * self.q * (self.n - 1) + 1

    @property
    def buffer_depth(self) -> int:
        return self.r * (2 * self.n - 1) * self.q + 1

    def to_json_dict(self) -> dict:
        return {
            "r": self.r,
            "q": self.q,
            "n": self.n,
            "k": self.k,
            "lambda": self.lam,
            "kind": self.kind,
            "p": self.period_p,
            "gamma_portrait": self.gamma_portrait.to_json_dict(),
            "alpha_portrait": self.alpha_portrait.to_json_dict(),
            "alpha": [self.alpha_point.location.real, self.alpha_point.location.imag],
            "gamma_domain_ok": self.gamma_domain_ok,
        }


@dataclass
class PrincipalNest:
    """Nested critical pieces E0 cc E1 cc ... with degree-2 return maps."""

    levels: list[Piece]
    return_times: list[int]
    height_chi: int
    terminated: bool
    puzzle: Puzzle

    def little_julia_proxy(self) -> Piece:
        """One more return-pullback of the last level; stands in for the
        little Julia set in planar modulus estimates."""
        if not self.terminated:
            raise PuzzleError("nest did not terminate; no renormalization level")
        p = self.return_times[-1]
        return self.puzzle.critical_piece(self.levels[-1].depth + p)


# ---------------------------------------------------------------------------
# ray-wedge membership


class _Wedge:
    """The component of the plane cut by a family of landed rays that
    contains the reference point (the critical point).

    The rays of each landing class are joined through their common landing
    point into closed arcs, so a test segment can only change sides by
    properly crossing an arc.  Segments that pass too close to a landing
    vertex are retried from jittered reference points.
    """

    _REFS = (0.0 + 0.0j, 0.013 + 0.017j, -0.011 + 0.021j, 0.019 - 0.012j, -0.017 - 0.015j)

    def __init__(self, m: QuadraticMap, classes: Sequence[Sequence[Angle]], session: dict):
        self.m = m
        self.arcs: list[np.ndarray] = []
        self.vertices: list[complex] = []
        for cl in classes:
            cl = sorted(Angle(a) for a in cl)
            traces = [_cached_land(m, a, session) for a in cl]
            v = sum(tr.landing_point for tr in traces) / len(traces)
            self.vertices.append(v)
            for tr in traces:
                self.arcs.append(np.array(list(tr.points) + [v], dtype=complex))

    def distance(self, z: complex) -> float:
        return min(
            float(point_segment_distance(np.array([z]), arc)[0]) for arc in self.arcs
        )

    def contains(self, z: complex, guard: float = 1e-9) -> bool:
        """Is z in the same complementary component as the critical point?

        Crossing parity of a segment from a reference point near 0 to z;
        both endpoints are far inside the reference equipotential, so
        equipotential arcs cannot be crossed.  Segments passing near a
        landing vertex (where crossing signs degenerate) are retried from
        a jittered reference.
        """
        z = complex(z)
        if self.distance(z) < guard:
            raise Inconclusive(f"point {z} within {guard} of the ray skeleton")
        for ref in self._REFS:
            seg = np.array([ref, z])
            if any(
                float(point_segment_distance(np.array([v]), seg)[0]) < 1e-5
                for v in self.vertices
            ):
                continue
            crossings = sum(segment_crossings(ref, z, arc) for arc in self.arcs)
            return crossings % 2 == 0
        raise Inconclusive(f"all reference segments to {z} pass near a landing vertex")


def _cached_land(m: QuadraticMap, a: Angle, session: dict):
    land = session["land"]
    if a not in land:
        tr = land_ray(m, a)
        if not tr.landed:
            raise NotSatisfied("landing", f"ray {a} did not land ({tr.warning})")
        land[a] = tr
    return land[a]


def _cached_rays_at(m: QuadraticMap, point: complex, T: int, session: dict) -> list:
    key = (round(point.real, 9), round(point.imag, 9), T)
    if key not in session["rays_at"]:
        pts = {a: (tr.landing_point if tr.landed else None) for a, tr in session["land"].items()}
        session["rays_at"][key] = rays_landing_at(m, point, T, _cache=pts)
    return session["rays_at"][key]


def _cached_cycles(m: QuadraticMap, t: int, session: dict) -> list:
    if t not in session["cycles"]:
        session["cycles"][t] = periodic_cycles(m, t)
    return session["cycles"][t]


# ---------------------------------------------------------------------------
# dividing cycle discovery


def _poly_coeffs_fn_minus_z(c: complex, t: int) -> np.ndarray:
    """Coefficients (highest first) of f_c^t(z) - z."""
    p = np.array([1.0, 0.0, c], dtype=complex)  # z^2 + c
    for _ in range(t - 1):
        p = np.polymul(p, p)
        p[-1] += c
    out = p.copy()
    out[-2] -= 1.0
    return out


def periodic_cycles(m: QuadraticMap, period: int) -> list[list[complex]]:
    """All cycles of exact period `period`, as ordered orbits."""
    roots = np.roots(_poly_coeffs_fn_minus_z(m.c, period))
    pts = []
    for z in roots:
        z = complex(z)
        exact = True
        for d in range(1, period):
            if period % d == 0 and abs(m.iterate(z, d) - z) < 1e-7 * max(1.0, abs(z)):
                exact = False
                break
        if exact:
            pts.append(z)
    cycles = []
    used = [False] * len(pts)
    for i, z in enumerate(pts):
        if used[i]:
            continue
        orbit = [z]
        used[i] = True
        w = m.f(z)
        for _ in range(period - 1):
            j = min(range(len(pts)), key=lambda k: abs(pts[k] - w))
            used[j] = True
            orbit.append(pts[j])
            w = m.f(pts[j])
        cycles.append(orbit)
    return cycles


def find_dividing_cycles(
    m: QuadraticMap,
    max_period: int,
    max_angle_period: Optional[int] = None,
    cache: Optional[dict] = None,
) -> list[tuple[PeriodicPoint, OrbitPortrait]]:
    """Repelling cycles of period <= max_period with >= 2 rays per point.

    Rays are searched among angles of exact period <= max_angle_period
    (default max(2*max_period, 6)); candidates are pruned by a coarse
    vectorized trace toward each cycle point before exact landing.
    """
    if max_period > 12:
        raise ValueError("desk scale: max_period <= 12")
    if max_angle_period is None:
        max_angle_period = max(2 * max_period, 6)
    session = _session(m, cache)
    out = []
    for t in range(1, max_period + 1):
        for orbit in _cached_cycles(m, t, session):
            z0 = orbit[0]
            _, mult = _eval_fn(m.c, z0, t)
            if not abs(mult) > 1:
                continue
            rays: list[Angle] = []
            for T in range(t, max_angle_period + 1, t):
                found = _cached_rays_at(m, z0, T, session)
                if found:
                    rays = found
                    break
            if len(rays) < 2:
                continue
            classes = [sorted(rays)]
            for _ in range(t - 1):
                classes.append(sorted(double(a) for a in classes[-1]))
            portrait = validate_portrait(classes)
            pp = PeriodicPoint(location=z0, period=t, multiplier=mult)
            out.append((pp, portrait))
    out.sort(key=lambda it: (it[1].ray_count_r, it[1].period_t, it[1].angles()))
    return out


# ---------------------------------------------------------------------------
# the (r, q, n) search


def _gamma_candidates(m: QuadraticMap, r_max: int, session: dict):
    """Cycle choices ordered by total ray count, starting with the
    degenerate r = 1 base choice (the beta fixed point, one ray)."""
    cands = []
    if r_max >= 1:
        beta_portrait = validate_portrait([[Angle(0)]])
        beta = _cached_land(m, Angle(0), session).landing_point
        cands.append((1, beta_portrait, beta))
    if r_max >= 2:
        for pp, portrait in find_dividing_cycles(
            m, max_period=r_max // 2, max_angle_period=r_max, cache=session
        ):
            if portrait.ray_count_r <= r_max:
                # gamma is the cycle point whose image carries the
                # characteristic (critical value) vertex
                j = portrait.characteristic_class_index()
                prev = (j - 1) % portrait.period_t
                gamma = _cached_land(m, portrait.classes[prev][0], session).landing_point
                cands.append((portrait.ray_count_r, portrait, gamma))
    cands.sort(key=lambda it: it[0])
    return cands


def _alpha_candidates(m: QuadraticMap, r: int, wedge: _Wedge) -> list[complex]:
    roots = np.roots(_poly_coeffs_fn_minus_z(m.c, r))
    inside = []
    for z in roots:
        z = complex(z)
        if any(abs(z - w) < 1e-7 for w in inside):
            continue
        try:
            if wedge.contains(z, guard=1e-7):
                inside.append(z)
        except Inconclusive:
            continue  # vertices of the wedge are not interior points
    return inside


def _orbit_portrait_of_class(cl: Sequence[Angle], period: int) -> OrbitPortrait:
    classes = [sorted(cl)]
    for _ in range(period - 1):
        classes.append(sorted(double(a) for a in classes[-1]))
    return validate_portrait(classes)


def renorm_params(
    m: QuadraticMap,
    bounds: tuple[int, int, int],
    cache: Optional[dict] = None,
) -> RenormData:
    """First admissible (r, q, n) within the bounds, by increasing r.

    Raises NotSatisfied naming the failing stage of the last candidate
    (or "no cycle" when no cycle choice exists within the bound).
    """
    r_max, q_max, n_max = bounds
    if r_max < 1 or q_max < 1 or n_max < 1:
        raise NotSatisfied("bounds", "empty search space")
    session = _session(m, cache)
    last: Optional[NotSatisfied] = None
    for r, gamma_portrait, gamma in _gamma_candidates(m, r_max, session):
        try:
            return _try_gamma(m, r, gamma_portrait, gamma, q_max, n_max, session)
        except NotSatisfied as e:
            last = e
    raise last if last is not None else NotSatisfied("no cycle", "no cycle choice within bounds")


def _try_gamma(m, r, gamma_portrait, gamma, q_max, n_max, session) -> RenormData:
    gamma_classes = [list(cl) for cl in gamma_portrait.classes]
    gamma_prime_class = [antipode(a) for cl in gamma_portrait.classes for a in cl
                         if abs(_cached_land(m, a, session).landing_point - gamma) < 1e-6]
    if not gamma_prime_class:
        raise NotSatisfied("gamma", "no rays identified at gamma")
    d_gamma = _Wedge(m, gamma_classes + [gamma_prime_class], session)

    alphas = _alpha_candidates(m, r, d_gamma)
    if len(alphas) != 1:
        raise NotSatisfied(
            "alpha", f"{len(alphas)} fixed points of f^{r} in the central domain"
        )
    alpha = alphas[0]
    _, mult = _eval_fn(m.c, alpha, r)
    if not abs(mult) > 1:
        raise NotSatisfied("alpha", f"alpha multiplier {abs(mult):.4f} not repelling")

    alpha_rays: list[Angle] = []
    q = 0
    for j in range(1, q_max + 1):
        found = _cached_rays_at(m, alpha, r * j, session)
        if found:
            alpha_rays = found
            q = len(found)
            break
    if q < 2:
        raise NotSatisfied("q", f"no ray family with >= 2 rays at alpha within q_max={q_max}")
    if q > q_max:
        raise NotSatisfied("q", f"alpha has {q} rays > q_max={q_max}")

    alpha_prime_rays = [antipode(a) for a in alpha_rays]
    d_alpha = _Wedge(m, [alpha_rays, alpha_prime_rays], session)

    n = None
    for mm in range(1, n_max + 1):
        z = m.iterate(0.0, r * q * mm)
        try:
            if not d_alpha.contains(z):
                n = mm
                break
        except Inconclusive as e:
            raise NotSatisfied("n", f"orbit point too close to skeleton: {e}")
    if n is None:
        raise NotSatisfied("n", f"critical orbit does not escape within n_max={n_max}")

    # standing assumption: the earlier orbit stays in the gamma-domain
    gamma_ok = True
    for j in range(1, q * n):
        z = m.iterate(0.0, r * j)
        try:
            if not d_gamma.contains(z):
                gamma_ok = False
                break
        except Inconclusive:
            gamma_ok = False
            break
    if not gamma_ok:
        raise NotSatisfied(
            "gamma-domain",
            f"f^(r j)(0) escapes the gamma central domain before time rq n (r={r})",
        )

    pp = PeriodicPoint(location=alpha, period=r, multiplier=mult)
    return RenormData(
        r=r,
        q=q,
        n=n,
        k=r * q * n,
        lam=r * q * n + 1 + 2 * r,
        gamma_portrait=gamma_portrait,
        gamma_point=gamma,
        alpha_point=pp,
        alpha_portrait=_orbit_portrait_of_class(alpha_rays, r),
        gamma_domain_ok=True,
    )


@dataclass(frozen=True)
class MoleculeDecision:
    satisfied: bool
    witness: Optional[RenormData]
    reason: Optional[str]


def molecule_check(
    m: QuadraticMap, bounds: tuple[int, int, int], cache: Optional[dict] = None
) -> MoleculeDecision:
    """True iff some (r, q, n) <= bounds is admissible; witness attached."""
    try:
        data = renorm_params(m, bounds, cache=cache)
        return MoleculeDecision(True, data, None)
    except NotSatisfied as e:
        return MoleculeDecision(False, None, str(e))


def admissible_triples(
    m: QuadraticMap, bounds: tuple[int, int, int], cache: Optional[dict] = None
) -> list[tuple[int, int, int]]:
    """All admissible (r, q, n) with r <= bounds[0] (q, n uncapped up to
    the given bounds); used for monotonicity checks over bound lattices."""
    r_max, q_max, n_max = bounds
    session = _session(m, cache)
    seen = []
    for r, gp, gamma in _gamma_candidates(m, r_max, session):
        try:
            data = _try_gamma(m, r, gp, gamma, q_max, n_max, session)
            seen.append((data.r, data.q, data.n))
        except NotSatisfied:
            continue
    return seen


# ---------------------------------------------------------------------------
# the alpha-puzzle, classification, and the principal nest


def alpha_puzzle(m: QuadraticMap, data: RenormData, **kw) -> Puzzle:
    """The puzzle of the alpha-cycle portrait (the working puzzle)."""
    return build_puzzle(m, data.alpha_portrait, **kw)


def classify_renormalization(
    m: QuadraticMap,
    portrait_or_data: Union[OrbitPortrait, RenormData],
    m_max: int = 10**4,
    cluster_tol: float = 1e-6,
) -> tuple[str, Optional[int]]:
    """({primitive, satellite, immediate, none}, period).

    The renormalization period is the doubling period of the
    characteristic angles (the first return time of the critical value
    sector).  The condition f^(p j)(0) in Y^(p+1) is verified for
    j <= m_max, with an early exit once the critical orbit is detected
    periodic; primitive vs satellite is decided by vertex sharing among
    the pieces f^j(Y^(p+1)).
    """
    if isinstance(portrait_or_data, RenormData):
        portrait = portrait_or_data.alpha_portrait
    else:
        portrait = portrait_or_data
    if not portrait.is_dividing:
        return ("none", None)
    try:
        puz = build_puzzle(m, portrait)
    except PuzzleError:
        return ("none", None)
    p = portrait.ray_period

    # renormalization condition: the critical value stays in the piece
    # X^p attached to the critical value sector, and returns forever
    arc = portrait.characteristic_arc
    try:
        xp = puz.attached_piece(arc, p)
    except PuzzleError:
        return ("none", None)
    if puz.value_piece(p).key != xp.key:
        return ("none", p)

    # orbit periodicity shortcut
    horizon = m_max
    orbit = [0j]
    for j in range(1, 4 * p + 1):
        orbit.append(m.f(orbit[-1]))
    for per in range(1, 2 * p + 1):
        if abs(orbit[per]) < 1e-9 and all(
            abs(orbit[j] - orbit[j + per]) < 1e-9 for j in range(2 * p)
        ):
            horizon = min(horizon, per)
            break

    for j in range(1, horizon + 1):
        if puz.orbit_piece(j * p, p + 1).key != puz.critical_piece(p + 1).key:
            return ("none", p)

    pieces = [puz.critical_piece(p + 1)]
    for j in range(1, p):
        pieces.append(puz.orbit_piece(j, p + 1 - j))
    vertex_sets = []
    for pc in pieces:
        vertex_sets.append([puz.vertex_point(pr) for pr in pc.vertex_pairs])
    shared = False
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            for v in vertex_sets[i]:
                if any(abs(v - w) < 10 * cluster_tol for w in vertex_sets[j]):
                    shared = True
    if shared:
        kind = "immediate" if portrait.period_t == 1 else "satellite"
    else:
        kind = "primitive"
    return (kind, p)


def build_nest(
    m: QuadraticMap,
    data: RenormData,
    max_levels: int = 8,
    max_time: int = 4096,
    puzzle: Optional[Puzzle] = None,
) -> PrincipalNest:
    """The principal nest of critical pieces above the renormalization.

    E0 = Y^(k+r); each next level is the first-return pullback of the
    previous one, a degree-2 cover.  The nest terminates when the return
    orbit of the critical point is periodic (superattracting centers);
    otherwise it stops at max_levels / max_time with terminated=False.
    """
    puz = puzzle if puzzle is not None else alpha_puzzle(m, data)
    e0 = puz.critical_piece(data.nest_base_depth)
    levels = [e0]
    times: list[int] = []
    terminated = False
    for _ in range(max_levels):
        base = levels[-1]
        l = None
        for mm in range(1, max_time + 1):
            if puz.orbit_piece(mm, base.depth).key == base.key:
                l = mm
                break
        if l is None:
            break
        # the return must be a double cover: exactly one critical passage
        for j in range(1, l):
            inter = puz.orbit_piece(j, base.depth + l - j)
            if inter.is_symmetric:
                raise PuzzleError(f"return to depth {base.depth} is not degree 2")
        nxt = puz.critical_piece(base.depth + l)
        levels.append(nxt)
        times.append(l)
        if abs(m.iterate(0.0, l)) < 1e-9:
            terminated = True  # superattracting return: the nest ends here
            break
    return PrincipalNest(
        levels=levels,
        return_times=times,
        height_chi=len(levels) - 1,
        terminated=terminated,
        puzzle=puz,
    )


def buffers(puzzle: Puzzle, data: RenormData) -> list[Piece]:
    """The buffer pieces attached to the vertices of P = Y^(rq(n-1)+1).

    Each is the univalent f^k-pullback of P leaning on P's boundary rays
    at one vertex; they are pairwise disjoint and of depth r(2n-1)q+1.
    """
    from .puzzle import BufferOverlap, NonUnivalentPullback

    dp = data.pocket_depth
    k = data.k
    P = puzzle.critical_piece(dp)
    out = []
    for inc, outg in P.vertex_pairs:
        # occupied sector of P at this vertex is (outg, inc); the buffer
        # leans on the same two rays from inside
        sector = (outg, inc)
        piece = P
        degree = 1
        for i in range(k - 1, -1, -1):
            lo = _double_n(sector[0], i)
            hi = _double_n(sector[1], i)
            comps = puzzle.preimage_components(piece)
            degree *= 2 if len(comps) == 1 else 1
            if len(comps) == 1:
                piece = comps[0]
                continue
            cands = []
            for cpt in comps:
                angs = set(cpt.boundary_angles)
                if lo in angs and hi in angs:
                    cands.append(cpt)
            if len(cands) != 1:
                raise PuzzleError(f"buffer chain ambiguous at vertex pair {(inc, outg)}")
            piece = cands[0]
        if degree != 1:
            raise NonUnivalentPullback(f"buffer at {(inc, outg)} has degree {degree}")
        if piece.depth != data.buffer_depth:
            raise PuzzleError("buffer depth mismatch")
        if not piece.support_inside(P):
            raise BufferOverlap(f"buffer at {(inc, outg)} is not inside P")
        out.append(piece)
    if len({p.key for p in out}) != len(out):
        raise BufferOverlap("buffers are not pairwise distinct")
    return out


def _double_n(a: Angle, n: int) -> Angle:
    num, den = a.numerator, a.denominator
    return Angle((num * pow(2, n, den)) % den, den) if den > 1 else Angle(0)
