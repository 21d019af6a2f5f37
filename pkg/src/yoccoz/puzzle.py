"""Yoccoz puzzle of a dividing cycle: pieces, stars, buffers, containment.

A puzzle piece is stored combinatorially as the cyclic set of circle arcs
its boundary subtends (between consecutive bounding rays); the planar
realization (ray polylines truncated by equipotential arcs) is materialized
lazily, only when a numeric predicate needs it.

Depth-m pieces are the faces of the lamination spanned by the landing
classes of the 2^-m preimages of the portrait angles.  They are computed
exactly by pulling faces back one level at a time: the face containing the
critical value pulls back to the single symmetric critical face; every
other face pulls back to two components separated by the diameter over the
critical value face, which makes the split exact rational arithmetic.
Numerics enter only at depth-0 seeding (locating orbit points among the
first faces) and in rare symmetric-parent ambiguities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .angles import Angle, OrbitPortrait, antipode, arc_length, double, in_arc, is_periodic
from .dynamics import (
    QuadraticMap,
    _newton_ray_point,
    cluster_landings,
    land_ray,
    ray_point,
    trace_ray,
)
from .geometry import point_in_polygon, point_segment_distance, polyline_gap, polyline_resolution


class PuzzleError(RuntimeError):
    pass


class SlowLanding(PuzzleError):
    """A portrait ray failed to land; the puzzle cannot be built."""


class OnBoundary(PuzzleError):
    """The queried point is within tolerance of the ray/equipotential skeleton."""


class SkeletonProximity(OnBoundary):
    """An orbit point is too close to the skeleton to classify."""


class NotAVertex(PuzzleError):
    pass


class NotABigon(PuzzleError):
    """The piece does not have exactly two vertices."""


class VertexCountViolation(PuzzleError):
    pass


class BufferOverlap(PuzzleError):
    pass


class NonUnivalentPullback(PuzzleError):
    pass


Arc = tuple[Angle, Angle]


def _mid(arc: Arc) -> Angle:
    lo, hi = arc
    return Angle(Fraction(lo) + arc_length(lo, hi) / 2)


def _double_arc(arc: Arc) -> Arc:
    return (double(arc[0]), double(arc[1]))


def _half_arcs(arc: Arc) -> tuple[Arc, Arc]:
    lo, hi = Fraction(arc[0]), Fraction(arc[0]) + arc_length(*arc)
    a = (Angle(lo / 2), Angle(hi / 2))
    b = (Angle(lo / 2 + Fraction(1, 2)), Angle(hi / 2 + Fraction(1, 2)))
    return a, b


def _arc_inside(inner: Arc, outer: Arc) -> bool:
    """inner arc contained (endpoints allowed) in the closed outer arc."""
    lo, hi = outer
    span = arc_length(lo, hi)
    s = arc_length(lo, inner[0])
    e = arc_length(lo, inner[1])
    return s <= span and e <= span and s <= e


@dataclass(frozen=True)
class Piece:
    """An ordinary puzzle piece of bidepth (depth, eq_depth).

    `arcs` is the cyclically ordered tuple of subtended circle arcs; the
    boundary consists of one equipotential arc per entry plus the pair of
    rays joining consecutive arcs at a common landing vertex.
    """

    depth: int
    eq_depth: int
    arcs: tuple[Arc, ...]
    pinched: bool = False

    def __post_init__(self):
        assert self.eq_depth >= self.depth

    @property
    def key(self):
        return (self.depth, self.arcs)

    @property
    def boundary_angles(self) -> tuple[Angle, ...]:
        return tuple(sorted({a for arc in self.arcs for a in arc}))

    @property
    def vertex_pairs(self) -> tuple[tuple[Angle, Angle], ...]:
        """(incoming ray, outgoing ray) per vertex, between consecutive arcs."""
        n = len(self.arcs)
        return tuple((self.arcs[i][1], self.arcs[(i + 1) % n][0]) for i in range(n))

    @property
    def vertex_count(self) -> int:
        return len(self.arcs)

    @property
    def is_symmetric(self) -> bool:
        sset = set(self.arcs)
        return all((antipode(a), antipode(b)) in sset for a, b in self.arcs)

    def support_contains(self, x: Angle) -> bool:
        return any(in_arc(x, lo, hi) or x == lo or x == hi for lo, hi in self.arcs)

    def support_inside(self, other: "Piece") -> bool:
        return all(any(_arc_inside(a, b) for b in other.arcs) for a in self.arcs)

    def touches_cycle(self) -> bool:
        """True iff some vertex is a point of the original dividing cycle.

        Vertex landing points are cycle points exactly when their ray
        angles are periodic under doubling; strict preimages have even
        denominators.
        """
        return any(is_periodic(a) or is_periodic(b) for a, b in self.vertex_pairs)

    def image(self) -> "Piece":
        """The piece f(self), one depth up; collapses symmetric pairs."""
        if self.depth == 0:
            raise PuzzleError("depth-0 pieces have no image piece")
        if self.is_symmetric:
            seen = set()
            arcs = []
            for arc in self.arcs:
                d = _double_arc(arc)
                if d not in seen:
                    seen.add(d)
                    arcs.append(d)
        else:
            arcs = [_double_arc(a) for a in self.arcs]
        arcs = tuple(sorted(arcs))
        return Piece(self.depth - 1, self.eq_depth - 1, arcs, self.pinched)

    @property
    def mapping_degree(self) -> int:
        """Degree of f on this piece: 2 iff it contains the critical point."""
        return 2 if self.is_symmetric else 1

    def at_equipotential(self, eq_depth: int) -> "Piece":
        """Same rays, truncated by a deeper equipotential (a geometric piece)."""
        if eq_depth < self.depth:
            raise PuzzleError("equipotential depth must be >= ray depth")
        return replace(self, eq_depth=eq_depth)

    def to_json_dict(self) -> dict:
        return {
            "bidepth": [self.depth, self.eq_depth],
            "arcs": [[str(a), str(b)] for a, b in self.arcs],
        }


@dataclass(frozen=True)
class GeometricPiece:
    """A union of ordinary pieces of one bidepth (stars, pullback unions)."""

    pieces: tuple[Piece, ...]

    def __post_init__(self):
        assert len({(p.depth, p.eq_depth) for p in self.pieces}) == 1

    @property
    def depth(self) -> int:
        return self.pieces[0].depth

    @property
    def eq_depth(self) -> int:
        return self.pieces[0].eq_depth

    @property
    def component_count(self) -> int:
        return len(self.pieces)

    def support_contains(self, x: Angle) -> bool:
        return any(p.support_contains(x) for p in self.pieces)

    def support_inside_union(self, other: "GeometricPiece") -> bool:
        return all(
            any(_arc_inside(a, b) for q in other.pieces for b in q.arcs)
            for p in self.pieces
            for a in p.arcs
        )

    def contains_piece(self, piece: Piece) -> bool:
        return any(piece.key == p.key for p in self.pieces)


def faces_of_classes(classes: Sequence[Sequence[Angle]], depth: int, eq_depth: int) -> list[Piece]:
    """Faces of the lamination whose leaves are the class convex hulls.

    Two complementary arcs of the full angle set belong to the same face
    iff they lie in the same gap of every class hull.
    """
    allang = sorted({a for cl in classes for a in cl})
    arcs = [(allang[i], allang[(i + 1) % len(allang)]) for i in range(len(allang))]
    sorted_classes = [tuple(sorted(cl)) for cl in classes]

    def gap_label(arc: Arc) -> tuple:
        mid = _mid(arc)
        label = []
        for cl in sorted_classes:
            if len(cl) == 1:
                label.append(0)
                continue
            for i in range(len(cl)):
                if in_arc(mid, cl[i], cl[(i + 1) % len(cl)]):
                    label.append(i)
                    break
            else:
                raise AssertionError("arc midpoint on a class angle")
        return tuple(label)

    groups: dict[tuple, list[Arc]] = {}
    for arc in arcs:
        groups.setdefault(gap_label(arc), []).append(arc)
    return [Piece(depth, eq_depth, tuple(sorted(g))) for g in groups.values()]


class _Chain:
    """Pieces along the forward orbit of a seed point, by (iterate, depth).

    piece(j, d) is the depth-d puzzle piece containing f^j(seed); it is the
    pullback of piece(j+1, d-1), with the component selected exactly by
    support inclusion in piece(j, d-1) whenever that piece is asymmetric,
    and numerically otherwise.
    """

    def __init__(self, puzzle: "Puzzle", seed: complex):
        self.puzzle = puzzle
        self.seed = complex(seed)
        self._orbit: list[complex] = [self.seed]
        self._pieces: dict[tuple[int, int], Piece] = {}

    def orbit_point(self, j: int) -> complex:
        while len(self._orbit) <= j:
            self._orbit.append(self.puzzle.map.f(self._orbit[-1]))
        return self._orbit[j]

    def piece(self, j: int, d: int) -> Piece:
        key = (j, d)
        if key in self._pieces:
            return self._pieces[key]
        if d == 0:
            pc = self.puzzle._face_of_point(self.orbit_point(j))
        else:
            parent = self.piece(j + 1, d - 1)
            comps = self.puzzle.preimage_components(parent)
            if len(comps) == 1:
                pc = comps[0]
            else:
                prev = self.piece(j, d - 1)
                fits = [c for c in comps if c.support_inside(prev)]
                if len(fits) == 1:
                    pc = fits[0]
                else:
                    pc = self.puzzle._resolve_by_point(comps, self.orbit_point(j))
        self._pieces[key] = pc
        return pc


class Puzzle:
    """The Yoccoz puzzle of a quadratic map for one dividing-orbit portrait."""

    def __init__(
        self,
        m: QuadraticMap,
        portrait: OrbitPortrait,
        max_depth: int = 16,
        cluster_tol: float = 1e-6,
        landing_tol: float = 1e-8,
        boundary_tol: float = 1e-9,
        samples_per_turn: int = 128,
    ):
        if not portrait.is_dividing:
            raise PuzzleError("puzzle requires a dividing portrait (valence >= 2)")
        self.map = m
        self.portrait = portrait
        self.max_depth = max_depth
        self.cluster_tol = cluster_tol
        self.landing_tol = landing_tol
        self.boundary_tol = boundary_tol
        self.samples_per_turn = samples_per_turn

        self._land_cache: dict[Angle, Optional[complex]] = {}
        self._trace_cache: dict[Angle, "object"] = {}
        self._eq_cache: dict[tuple[Angle, float], complex] = {}
        self._poly_cache: dict = {}
        self._layers: dict[int, tuple[Piece, ...]] = {}
        self._chains: dict[complex, _Chain] = {}

        clusters = cluster_landings(
            m, portrait.angles(), cluster_tol=cluster_tol, landing_tol=landing_tol,
            _cache=self._land_cache,
        )
        observed = sorted(tuple(cl.angles) for cl in clusters if cl.resolved)
        expected = sorted(tuple(cl) for cl in portrait.classes)
        if any(not cl.resolved for cl in clusters):
            bad = [cl.angles[0] for cl in clusters if not cl.resolved]
            raise SlowLanding(f"portrait rays failed to land: {bad}")
        if observed != expected:
            raise PuzzleError(
                f"portrait not realized at c={m.c}: landing classes {observed} "
                f"!= portrait classes {expected}"
            )
        self.cycle_points: dict[tuple[Angle, ...], complex] = {
            tuple(cl.angles): cl.point for cl in clusters
        }

        faces = faces_of_classes(portrait.classes, 0, 0)
        expect = portrait.period_t * (portrait.valence_s - 1) + 1
        if len(faces) != expect:
            raise PuzzleError(f"depth-0 face count {len(faces)} != t(s-1)+1 = {expect}")
        self._layers[0] = tuple(sorted(faces, key=lambda p: p.arcs))

    # -- landing / tracing caches ------------------------------------------

    def landing_point(self, a: Angle) -> complex:
        a = a if isinstance(a, Angle) else Angle(a)
        if a not in self._land_cache:
            tr = land_ray(self.map, a, landing_tol=self.landing_tol)
            if not tr.landed:
                raise SlowLanding(f"ray {a} did not land ({tr.warning})")
            self._trace_cache[a] = tr
            self._land_cache[a] = tr.landing_point
        if self._land_cache[a] is None:
            raise SlowLanding(f"ray {a} did not land")
        return self._land_cache[a]

    def landed_trace(self, a: Angle):
        a = a if isinstance(a, Angle) else Angle(a)
        if a not in self._trace_cache:
            tr = land_ray(self.map, a, landing_tol=self.landing_tol)
            if not tr.landed:
                raise SlowLanding(f"ray {a} did not land ({tr.warning})")
            self._trace_cache[a] = tr
            self._land_cache[a] = tr.landing_point
        return self._trace_cache[a]

    def equipotential_point(self, a: Angle, potential: float) -> complex:
        key = (a, round(potential, 14))
        if key not in self._eq_cache:
            self._eq_cache[key] = ray_point(self.map, a, potential)
        return self._eq_cache[key]

    def vertex_point(self, pair: tuple[Angle, Angle]) -> complex:
        z1 = self.landing_point(pair[0])
        z2 = self.landing_point(pair[1])
        if abs(z1 - z2) > 10 * self.cluster_tol:
            raise PuzzleError(f"rays {pair} do not land together: {z1} vs {z2}")
        return (z1 + z2) / 2

    # -- combinatorial pullback machinery ----------------------------------

    def chain(self, seed: complex) -> _Chain:
        seed = complex(seed)
        if seed not in self._chains:
            self._chains[seed] = _Chain(self, seed)
        return self._chains[seed]

    def critical_piece(self, d: int) -> Piece:
        """The critical piece at depth d (contains 0; symmetric for d >= 1)."""
        return self.chain(0).piece(0, d)

    def value_piece(self, d: int) -> Piece:
        """The piece containing the critical value at depth d."""
        return self.chain(0).piece(1, d)

    def orbit_piece(self, j: int, d: int) -> Piece:
        """The depth-d piece containing f^j(0)."""
        return self.chain(0).piece(j, d)

    def preimage_components(self, piece: Piece) -> list[Piece]:
        """All components of f^-1(piece), exactly.

        One symmetric component when the piece contains the critical
        value; otherwise two components separated by the diameter over the
        critical value face of the same depth.
        """
        halves = [h for arc in piece.arcs for h in _half_arcs(arc)]
        pinched = piece.pinched or self._parent_pinches(piece)
        if piece.key == self.value_piece(piece.depth).key:
            arcs = tuple(sorted(halves))
            child = Piece(piece.depth + 1, piece.eq_depth + 1, arcs, pinched)
            assert child.is_symmetric
            return [child]
        xi = _mid(self.value_piece(piece.depth).arcs[0])
        d1 = Angle(Fraction(xi) / 2)
        d2 = antipode(d1)
        side_a = tuple(sorted(h for h in halves if in_arc(_mid(h), d1, d2)))
        side_b = tuple(sorted(h for h in halves if not in_arc(_mid(h), d1, d2)))
        assert len(side_a) == len(side_b) == len(piece.arcs)
        return [
            Piece(piece.depth + 1, piece.eq_depth + 1, side_a, pinched),
            Piece(piece.depth + 1, piece.eq_depth + 1, side_b, pinched),
        ]

    def _parent_pinches(self, piece: Piece) -> bool:
        # degenerate configuration: a vertex of the parent is the critical
        # value, so both preimage vertices collapse onto 0.  Only already
        # landed rays are consulted; exact coincidences also surface as
        # skeleton-proximity errors during seeding.
        c = self.map.c
        for pr in piece.vertex_pairs:
            z = self._land_cache.get(pr[0])
            if z is not None and abs(z - c) < self.boundary_tol:
                return True
        return False

    def pullback_all(self, piece: Piece, k: int) -> list[tuple[Piece, int]]:
        """All components of f^-k(piece) with their mapping degrees."""
        out = [(piece, 1)]
        for _ in range(k):
            nxt = []
            for p, deg in out:
                for comp in self.preimage_components(p):
                    nxt.append((comp, deg * comp.mapping_degree))
            out = nxt
        return out

    # -- depth-0 seeding and point location ---------------------------------

    def layer(self, d: int) -> tuple[Piece, ...]:
        """All pieces of depth d (faces of the depth-d lamination)."""
        if d in self._layers:
            return self._layers[d]
        if d > self.max_depth:
            raise PuzzleError(f"depth {d} exceeds max_depth {self.max_depth}")
        prev = self.layer(d - 1)
        faces: list[Piece] = []
        for p in prev:
            faces.extend(self.preimage_components(p))
        out = tuple(sorted(faces, key=lambda p: p.arcs))
        self._layers[d] = out
        return out

    def _face_of_point(self, z: complex) -> Piece:
        z = complex(z)
        g = self.map.green(z)
        if not g.censored and g.value >= self.map.depth_potential(0):
            raise PuzzleError(f"point {z} is outside the depth-0 equipotential")
        hits = []
        for face in self.layer(0):
            poly = self.polygon(face, samples_per_turn=64, res_target=0.3)
            if point_in_polygon(z, poly):
                hits.append(face)
        if len(hits) != 1:
            raise SkeletonProximity(
                f"point {z} not uniquely located at depth 0 (hits={len(hits)})"
            )
        d = min(
            float(point_segment_distance(np.array([z]), self.polygon(f, samples_per_turn=64, res_target=0.3))[0])
            for f in self.layer(0)
        )
        if d < self.boundary_tol:
            raise SkeletonProximity(f"point {z} is within {d} of the skeleton")
        return hits[0]

    def _resolve_by_point(self, candidates: Sequence[Piece], z: complex) -> Piece:
        hits = [
            p
            for p in candidates
            if point_in_polygon(z, self.polygon(p, samples_per_turn=64, res_target=0.3))
        ]
        if len(hits) != 1:
            raise SkeletonProximity(
                f"point {z} does not select a unique component (hits={len(hits)})"
            )
        return hits[0]

    def piece_at(self, depth: int, z: complex) -> Piece:
        """The depth-`depth` piece whose interior contains z."""
        z = complex(z)
        g = self.map.green(z)
        if not g.censored and g.value >= self.map.depth_potential(depth):
            raise OnBoundary(f"point {z} is outside the depth-{depth} equipotential")
        pc = self.chain(z).piece(0, depth)
        d = float(
            point_segment_distance(
                np.array([z]), self.polygon(pc, samples_per_turn=64, res_target=0.3)
            )[0]
        )
        if d < self.boundary_tol:
            raise OnBoundary(f"point {z} is within {d} of the piece boundary")
        return pc

    def critical_value_piece(self) -> Piece:
        """The depth-0 piece containing the critical value; one vertex."""
        arc = self.portrait.characteristic_arc
        assert arc is not None
        for face in self.layer(0):
            if arc in face.arcs:
                if face.vertex_count != 1:
                    raise VertexCountViolation(
                        f"critical value piece has {face.vertex_count} vertices"
                    )
                x0 = self.value_piece(0)
                if x0.key != face.key:
                    raise VertexCountViolation(
                        "characteristic-arc face does not contain the critical value"
                    )
                return face
        raise PuzzleError("no depth-0 face carries the characteristic arc")

    # -- sector chains: pieces attached to a vertex --------------------------

    def _attached_face(self, sector: Arc) -> Piece:
        """The depth-0 face occupying the given sector at a cycle vertex."""
        for face in self.layer(0):
            for inc, out in face.vertex_pairs:
                if (out, inc) == sector:
                    return face
        raise NotAVertex(f"no depth-0 face occupies sector {sector}")

    def attached_piece(self, sector: Arc, depth: int) -> Piece:
        """The depth-d piece attached to a vertex inside the given sector.

        The sector is the positively oriented arc (lo, hi) between two
        consecutive rays of the vertex; the attached piece leans on both
        rays, so its support stays inside the sector and keeps both sector
        angles as boundary angles.  The chain of its images consists of
        attached pieces at the forward vertices in the doubled sectors.
        """
        lo, hi = sector
        pairs = [sector]
        for _ in range(depth):
            pairs.append((double(pairs[-1][0]), double(pairs[-1][1])))
        piece = self._attached_face(pairs[depth])
        for i in range(depth - 1, -1, -1):
            plo, phi = pairs[i]
            comps = self.preimage_components(piece)
            if len(comps) == 1:
                # symmetric critical child: the unique preimage, attached at
                # the vertex (and at its antipode)
                piece = comps[0]
                angs = set(piece.boundary_angles)
                if plo not in angs or phi not in angs:
                    raise PuzzleError(f"sector chain lost its rays at {sector}")
                continue
            cands = []
            for c in comps:
                angs = set(c.boundary_angles)
                if plo in angs and phi in angs and all(
                    _arc_inside(a, (plo, phi)) for a in c.arcs
                ):
                    cands.append(c)
            if len(cands) != 1:
                raise PuzzleError(
                    f"sector chain ambiguous at depth {depth - i} for sector {sector}"
                )
            piece = cands[0]
        return piece

    def _vertex_handle(self, v: Union[complex, Angle]) -> tuple[complex, tuple[Angle, ...]]:
        """Resolve a cycle or co-cycle vertex to (point, sorted ray angles)."""
        if isinstance(v, (Angle, Fraction)):
            a = Angle(v)
            for cls, pt in self.cycle_points.items():
                if a in cls:
                    return pt, tuple(sorted(cls))
                if a in {antipode(x) for x in cls}:
                    return -pt, tuple(sorted(antipode(x) for x in cls))
            raise NotAVertex(f"angle {a} is not a ray of the cycle or co-cycle")
        z = complex(v)
        for cls, pt in self.cycle_points.items():
            if abs(z - pt) < self.cluster_tol * 10:
                return pt, tuple(sorted(cls))
            if abs(z + pt) < self.cluster_tol * 10:
                return -pt, tuple(sorted(antipode(x) for x in cls))
        raise NotAVertex(f"{z} is not a cycle or co-cycle vertex")

    def star(self, v: Union[complex, Angle], depth: int) -> GeometricPiece:
        """Union of the depth-d pieces attached to the vertex v.

        Supported vertices are the points of the dividing cycle and their
        antipodes (the co-cycle); rays at the antipode -z are the rays at
        z shifted by 1/2.  Co-cycle stars need depth >= 1 since the
        co-cycle rays only exist from depth 1 on.
        """
        pt, cls = self._vertex_handle(v)
        if depth < 0 or depth > self.max_depth:
            raise PuzzleError(f"star depth {depth} out of range")
        periodic_vertex = all(is_periodic(a) for a in cls)
        if depth == 0 and not periodic_vertex:
            raise NotAVertex("co-cycle points are not vertices at depth 0")
        q = len(cls)
        sectors = [(cls[i], cls[(i + 1) % q]) for i in range(q)]
        pieces = tuple(self.attached_piece(s, depth) for s in sectors)
        return GeometricPiece(pieces)

    # -- planar materialization ---------------------------------------------

    def _eq_arc(
        self, lo: Angle, hi: Angle, G: float, spt: int, res_target: float
    ) -> list[complex]:
        """Equipotential samples from angle lo to hi at potential G.

        Deep equipotentials hug the Julia set, so their spatial extent is
        not proportional to angular length; samples are bisected in angle
        (Newton-corrected, seeded from a neighbor) until consecutive
        points in the near field are closer than res_target.
        """
        length = arc_length(lo, hi)
        k = max(2, math.ceil(float(length) * spt))
        angles = [Fraction(lo) + length * s / k for s in range(k + 1)]
        pts = [self.equipotential_point(Angle(a), G) for a in angles]
        if math.exp(G) > 8.0:
            return pts
        out = [pts[0]]
        budget = 3000
        i = 0
        while i < len(pts) - 1:
            z1, z2 = pts[i], pts[i + 1]
            if budget <= 0 or abs(z2 - z1) <= res_target:
                out.append(z2)
                i += 1
                continue
            mid = (angles[i] + angles[i + 1]) / 2
            zm = _newton_ray_point(self.map, Angle(mid), G, z1)
            budget -= 1
            if zm is None or abs(zm - z1) + abs(zm - z2) > 10 * abs(z2 - z1) + 1e-9:
                # lateral Newton seeding fails near the Julia set; fall
                # back to a full trace down the midpoint ray
                try:
                    zm = self.equipotential_point(Angle(mid), G)
                except Exception:
                    zm = None
            if zm is None:
                out.append(z2)
                i += 1
                continue
            pts[i + 1 : i + 1] = [zm]
            angles[i + 1 : i + 1] = [mid]
        return out

    def _ray_segment(self, angle: Angle, G: float, res_target: float) -> list[complex]:
        """Ray points from potential G down to the landing point.

        Starts from the cached landed trace and bisects potential levels
        (Newton-corrected, seeded by neighbors) until consecutive points
        are closer than res_target.
        """
        tr = self.landed_trace(angle)
        pts = [self.equipotential_point(angle, G)]
        pots = [G]
        for z, g in zip(tr.points, tr.potentials):
            if g < G:
                pts.append(z)
                pots.append(g)
        pts.append(tr.landing_point)
        pots.append(0.0)
        out = [pts[0]]
        i = 0
        budget = 4000
        while i < len(pts) - 1:
            z1, z2 = pts[i], pts[i + 1]
            g1, g2 = pots[i], pots[i + 1]
            # refinement only matters near the Julia set; the far field is
            # never where containment gaps are attained
            near = abs(z1) < 8.0 or abs(z2) < 8.0
            if (
                not near
                or budget <= 0
                or abs(z2 - z1) <= res_target
                or g1 <= g2 * (1 + 1e-9)
                or (g2 == 0 and g1 < 1e-12)
            ):
                out.append(z2)
                i += 1
                continue
            gm = math.sqrt(g1 * max(g2, g1 * 1e-8))
            zm = _newton_ray_point(self.map, angle, gm, z1)
            budget -= 1
            if zm is None or abs(zm - z1) > 4 * abs(z2 - z1) + 1e-9:
                out.append(z2)
                i += 1
                continue
            pts[i + 1 : i + 1] = [zm]
            pots[i + 1 : i + 1] = [gm]
        return out

    def polygon(
        self,
        piece: Piece,
        samples_per_turn: Optional[int] = None,
        res_target: float = 0.02,
    ) -> np.ndarray:
        """Closed boundary polyline: equipotential arcs joined by ray pairs."""
        spt = samples_per_turn or self.samples_per_turn
        key = (piece.key, piece.eq_depth, spt, round(res_target, 9))
        if key in self._poly_cache:
            return self._poly_cache[key]
        G = self.map.depth_potential(piece.eq_depth)
        pts: list[complex] = []
        n = len(piece.arcs)
        for i, (lo, hi) in enumerate(piece.arcs):
            pts.extend(self._eq_arc(lo, hi, G, spt, res_target))
            # descend the closing ray of this arc, pass the vertex, climb the
            # opening ray of the next arc
            inc = hi
            out = piece.arcs[(i + 1) % n][0]
            vtx = self.vertex_point((inc, out))
            pts.extend(self._ray_segment(inc, G, res_target))
            pts.append(vtx)
            pts.extend(reversed(self._ray_segment(out, G, res_target)))
        pts.append(pts[0])
        poly = np.array(pts, dtype=complex)
        self._poly_cache[key] = poly
        return poly

    def gap(self, inner: Piece, outer: Piece) -> tuple[float, float]:
        """(minimal boundary distance, local trace resolution).

        Two-pass: a coarse gap fixes the refinement target, so the
        resolution reported with the measurement scales with the gap; the
        resolution is the sampling size where the minimum is attained.
        """
        from .geometry import polyline_gap_local

        pi = self.polygon(inner, res_target=0.1)
        po = self.polygon(outer, res_target=0.1)
        g0, _ = polyline_gap_local(pi, po)
        if g0 > 1e-12:
            target = max(min(0.02, g0 / 32), 1e-6)
            pi = self.polygon(inner, res_target=target)
            po = self.polygon(outer, res_target=target)
        return polyline_gap_local(pi, po)

    def depth0_ancestor(self, piece: Piece) -> Piece:
        """The depth-0 face containing the piece (exact arc inclusion)."""
        for face in self.layer(0):
            if piece.support_inside(face):
                return face
        raise PuzzleError("piece has no depth-0 ancestor (corrupt arcs)")

    def to_json_dict(self) -> dict:
        return {
            "c": [self.map.c.real, self.map.c.imag],
            "portrait": self.portrait.to_json_dict(),
            "cycle_points": {
                "/".join(str(a) for a in cls): [pt.real, pt.imag]
                for cls, pt in self.cycle_points.items()
            },
            "depth0_pieces": [p.to_json_dict() for p in self.layer(0)],
        }


def build_puzzle(m: QuadraticMap, portrait: OrbitPortrait, max_depth: int = 16, **kw) -> Puzzle:
    """Construct the puzzle of a dividing-cycle portrait for the map."""
    return Puzzle(m, portrait, max_depth=max_depth, **kw)


@dataclass(frozen=True)
class SubsetReport:
    piece: Piece
    status: str  # "exempt" | "pass" | "inconclusive"
    gap: Optional[float] = None
    resolution: Optional[float] = None


def check_subset_lemma(puzzle: Puzzle, piece: Piece) -> SubsetReport:
    """Compact containment of an off-cycle piece in its depth-0 piece.

    Pieces whose closure meets the dividing cycle are exempt (the
    containment statement does not apply to them).  Containment is
    certified when the minimal boundary gap exceeds 10x the trace
    resolution; smaller positive gaps are reported inconclusive.
    """
    if piece.depth < 1:
        raise PuzzleError("subset check needs depth >= 1")
    if piece.touches_cycle():
        return SubsetReport(piece, "exempt")
    outer = puzzle.depth0_ancestor(piece)
    gap, res = puzzle.gap(piece, outer)
    status = "pass" if gap > 10 * res else "inconclusive"
    return SubsetReport(piece, status, gap=gap, resolution=res)


def critical_value_piece(puzzle: Puzzle) -> Piece:
    return puzzle.critical_value_piece()


def star(puzzle: Puzzle, v, depth: int) -> GeometricPiece:
    return puzzle.star(v, depth)


def piece_at(puzzle: Puzzle, depth: int, z: complex) -> Piece:
    return puzzle.piece_at(depth, z)
