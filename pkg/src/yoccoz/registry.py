"""Executable checks for the structural statements behind the puzzle.

Each registry entry measures one geometric statement at trace resolution
and reports pass / fail / exempt / inconclusive with the measured values;
nothing here is a proof.  Entries that need the bounded-combinatorics data
are exempt when the decision fails for the given parameter.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import label as nd_label

from .angles import Angle, antipode
from .dynamics import QuadraticMap
from .geometry import Grid, points_in_polygon
from .modulus import piece_modulus
from .puzzle import Piece, Puzzle, PuzzleError, check_subset_lemma
from .renorm import (
    MoleculeDecision,
    NotSatisfied,
    PrincipalNest,
    RenormData,
    _cached_land,
    _session,
    alpha_puzzle,
    build_nest,
    buffers,
    molecule_check,
)

REGISTRY_IDS = (
    "critical_value_piece_single_vertex",
    "off_cycle_pieces_compactly_contained",
    "separation_arcs_disconnect",
    "escaping_value_beyond_cocycle_rays",
    "cycle_stars_disjoint",
    "buffers_disjoint_univalent",
    "nest_annulus_nondegenerate",
    "star_pullback_trapped",
    "gamma_piece_compactly_contained",
)


@dataclass
class LemmaCheck:
    id: str
    status: str  # pass | fail | exempt | inconclusive
    measured: dict = field(default_factory=dict)
    note: str = ""

    def to_json_dict(self) -> dict:
        return {"id": self.id, "status": self.status, "measured": self.measured, "note": self.note}


@dataclass
class VerificationReport:
    c: complex
    bounds: tuple[int, int, int]
    decision: MoleculeDecision
    entries: list[LemmaCheck]

    def to_json_dict(self) -> dict:
        return {
            "c": [self.c.real, self.c.imag],
            "bounds": list(self.bounds),
            "molecule_condition": self.decision.satisfied,
            "reason": self.decision.reason,
            "entries": [e.to_json_dict() for e in self.entries],
        }

    def statuses(self) -> dict:
        return {e.id: e.status for e in self.entries}


def _gap_entry(entry_id: str, puz: Puzzle, inner: Piece, outer: Piece) -> LemmaCheck:
    g, res = puz.gap(inner, outer)
    if g > 10 * res:
        status = "pass"
    elif g > 0:
        status = "inconclusive"
    else:
        status = "fail"
    return LemmaCheck(entry_id, status, {"gap": g, "resolution": res})


def check_critical_value_piece(puz: Puzzle) -> LemmaCheck:
    try:
        x0 = puz.critical_value_piece()
    except PuzzleError as e:
        return LemmaCheck("critical_value_piece_single_vertex", "fail", note=str(e))
    return LemmaCheck(
        "critical_value_piece_single_vertex",
        "pass",
        {"vertices": x0.vertex_count, "rays": len(x0.boundary_angles)},
    )


def check_subset_sample(puz: Puzzle, depths=(2, 3)) -> LemmaCheck:
    gaps = []
    for d in depths:
        for pc in puz.layer(d):
            rep = check_subset_lemma(puz, pc)
            if rep.status == "exempt":
                continue
            if rep.status != "pass":
                return LemmaCheck(
                    "off_cycle_pieces_compactly_contained",
                    rep.status,
                    {"gap": rep.gap, "resolution": rep.resolution, "depth": d},
                )
            gaps.append(rep.gap)
    if not gaps:
        return LemmaCheck("off_cycle_pieces_compactly_contained", "exempt", note="no off-cycle pieces sampled")
    return LemmaCheck(
        "off_cycle_pieces_compactly_contained", "pass", {"min_gap": min(gaps), "checked": len(gaps)}
    )


def _cocycle_arcs(m: QuadraticMap, data: RenormData, session: dict):
    """The ray pair at alpha' and the candidate inverse branches.

    Returns (base pair of polylines, list of branch generations); each
    generation is a list of alternative (pair of polylines, vertex).
    """
    aprime_rays = [antipode(a) for a in data.alpha_portrait.classes[0]]
    base = []
    vtx = []
    for a in aprime_rays:
        tr = _cached_land(m, a, session)
        base.append(np.array(list(tr.points) + [tr.landing_point], dtype=complex))
        vtx.append(tr.landing_point)
    return base, sum(vtx) / len(vtx)


def check_separation(m: QuadraticMap, data: RenormData, puz: Puzzle, grid_n: int = 400) -> LemmaCheck:
    """The inverse arcs of the alpha'-ray-pair cut gamma off the alpha
    cycle and co-cycle: verified by flood fill on a grid with the traced
    arcs as obstacles, over all inverse-branch choices (the statement is
    existential in the branch choice)."""
    session = _session(m)
    base, _v0 = _cocycle_arcs(m, data, session)

    gamma = data.gamma_point
    targets = []
    alpha = data.alpha_point.location
    z = alpha
    for _ in range(data.r):
        targets.append(z)
        targets.append(-z)
        z = m.f(z)
    aprime = -alpha

    combos = _branch_combinations(m, data, session)
    for combo in combos:
        obstacles = list(base)
        for pair in combo:
            obstacles.extend(pair)
        reached = _flood_targets(gamma, targets, obstacles, exclude={aprime}, n=grid_n)
        if not reached:
            return LemmaCheck(
                "separation_arcs_disconnect",
                "pass",
                {"branches": len(combo), "targets": len(targets)},
            )
    return LemmaCheck(
        "separation_arcs_disconnect",
        "fail",
        {"combinations_tried": len(combos)},
        note="no branch choice disconnected gamma from the cycle",
    )


def _halve_n(angles, n):
    from fractions import Fraction

    out = [Fraction(a) for a in angles]
    for _ in range(n):
        out = [x / 2 for x in out] + [x / 2 + Fraction(1, 2) for x in out]
    return sorted(set(out))


def _preimages(m: QuadraticMap, w: complex, t: int) -> list[complex]:
    pts = [w]
    for _ in range(t):
        nxt = []
        for z in pts:
            try:
                root = complex(np.sqrt(complex(z - m.c)))
            except Exception:
                continue
            nxt.extend([root, -root])
        pts = nxt
    return pts


def _branch_combinations(m: QuadraticMap, data: RenormData, session: dict):
    """All chains of inverse branches of the alpha'-arc, one per
    generation m = 1..s-1, assembled from landed preimage rays."""
    t = data.gamma_portrait.period_t
    s = data.gamma_portrait.valence_s
    aprime_class = [antipode(a) for a in data.alpha_portrait.classes[0]]
    gens: list[list[list[np.ndarray]]] = []
    angles = [a for a in aprime_class]
    for j in range(1, s):
        from fractions import Fraction

        halves = _halve_n(angles, t)
        # group halves by landing point into candidate pairs
        by_pt: dict = {}
        for a in halves:
            aa = Angle(a)
            tr = _cached_land(m, aa, session)
            key = (round(tr.landing_point.real, 6), round(tr.landing_point.imag, 6))
            by_pt.setdefault(key, []).append(
                np.array(list(tr.points) + [tr.landing_point], dtype=complex)
            )
        gens.append([arcs for arcs in by_pt.values() if len(arcs) >= 2])
        angles = halves
    if not gens:
        return [()]
    return list(itertools.product(*gens))


def _flood_targets(start, targets, obstacles, exclude, n):
    """Do any targets remain reachable from start once the obstacle arcs
    are removed from the plane?  (Grid flood fill.)"""
    pts = [start] + list(targets)
    xs = [p.real for p in pts]
    ys = [p.imag for p in pts]
    pad = 0.7
    g = Grid.over_bbox(min(xs) - pad, max(xs) + pad, min(ys) - pad, max(ys) + pad, n)
    blocked = np.zeros(g.shape, dtype=bool)
    for arc in obstacles:
        blocked |= g.rasterize_polyline(arc)
    free = ~blocked
    lab, _ = nd_label(free)
    si, sj = g.cell_of(start)
    home = lab[si, sj]
    if home == 0:
        return True  # start landed on an obstacle cell: inconclusive, treat as reached
    reached = []
    for tpt in targets:
        if any(abs(tpt - e) < 1e-7 for e in exclude):
            continue
        ti, tj = g.cell_of(tpt)
        if 0 <= ti < g.shape[0] and 0 <= tj < g.shape[1] and lab[ti, tj] == home:
            reached.append(tpt)
    return reached


def check_escaping_value_side(m: QuadraticMap, data: RenormData) -> LemmaCheck:
    """f^k(0) lies on the far side of the alpha'-rays from both 0 and
    alpha (the combinatorial separation used to seed the nest)."""
    from .renorm import _Wedge

    session = _session(m)
    aprime_rays = [antipode(a) for a in data.alpha_portrait.classes[0]]
    w = _Wedge(m, [aprime_rays], session)
    zeta = m.iterate(0.0, data.k)
    try:
        zeta_in = w.contains(zeta)
        alpha_in = w.contains(data.alpha_point.location)
        zero_in = w.contains(0.0)
    except Exception as e:
        return LemmaCheck("escaping_value_beyond_cocycle_rays", "inconclusive", note=str(e))
    ok = (not zeta_in) and alpha_in and zero_in
    return LemmaCheck(
        "escaping_value_beyond_cocycle_rays",
        "pass" if ok else "fail",
        {"zeta": [zeta.real, zeta.imag]},
    )


def check_stars(puz: Puzzle, data: RenormData) -> LemmaCheck:
    alpha = data.alpha_point.location
    vertices = []
    z = alpha
    for _ in range(data.r):
        vertices.extend([z, -z])
        z = puz.map.f(z)
    members = []
    for v in vertices:
        st = puz.star(v, data.lam)
        if any(p.is_symmetric for p in st.pieces):
            return LemmaCheck(
                "cycle_stars_disjoint", "fail", note=f"star at {v} contains the critical piece"
            )
        members.append({p.key for p in st.pieces})
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            if members[i] & members[j]:
                return LemmaCheck(
                    "cycle_stars_disjoint", "fail", note=f"stars {i} and {j} share a piece"
                )
    return LemmaCheck(
        "cycle_stars_disjoint",
        "pass",
        {"stars": len(members), "depth": data.lam, "pieces": sum(len(s) for s in members)},
    )


def check_buffers(puz: Puzzle, data: RenormData) -> LemmaCheck:
    try:
        bufs = buffers(puz, data)
    except PuzzleError as e:
        return LemmaCheck("buffers_disjoint_univalent", "fail", note=str(e))
    return LemmaCheck(
        "buffers_disjoint_univalent",
        "pass",
        {"count": len(bufs), "depth": data.buffer_depth},
    )


def check_nest_annulus(puz: Puzzle, data: RenormData, nest: PrincipalNest) -> LemmaCheck:
    if len(nest.levels) < 2:
        return LemmaCheck("nest_annulus_nondegenerate", "inconclusive", note="nest has one level")
    base = _gap_entry("nest_annulus_nondegenerate", puz, nest.levels[1], nest.levels[0])
    yk = puz.critical_piece(data.k)
    aux = _gap_entry("nest_annulus_nondegenerate", puz, nest.levels[0], yk)
    measured = {
        "gap_E1_E0": base.measured.get("gap"),
        "resolution_E1_E0": base.measured.get("resolution"),
        "gap_E0_Yk": aux.measured.get("gap"),
        "return_time": nest.return_times[0],
        "r": data.r,
    }
    ok = base.status == "pass" and aux.status == "pass" and nest.return_times[0] >= data.r
    status = "pass" if ok else ("fail" if "fail" in (base.status, aux.status) else "inconclusive")
    return LemmaCheck("nest_annulus_nondegenerate", status, measured)


def check_qn_pullback(puz: Puzzle, data: RenormData, samples: int = 12, seed: int = 5) -> LemmaCheck:
    """Sampled pullbacks of the depth-1 star land inside one of the two
    depth-1 stars (trapping of the k-step return)."""
    m = puz.map
    alpha = data.alpha_point.location
    k = data.k
    s_a = puz.star(alpha, 1)
    s_b = puz.star(-alpha, 1)
    polys_a = [puz.polygon(p, samples_per_turn=64, res_target=0.2) for p in s_a.pieces]
    polys_b = [puz.polygon(p, samples_per_turn=64, res_target=0.2) for p in s_b.pieces]

    def in_union(z, polys):
        return any(points_in_polygon(np.array([z]), poly)[0] for poly in polys)

    rng = np.random.default_rng(seed)
    bbox_pts = np.concatenate(polys_a)
    x0, x1 = bbox_pts.real.min(), bbox_pts.real.max()
    y0, y1 = bbox_pts.imag.min(), bbox_pts.imag.max()
    checked = 0
    tried = 0
    while checked < samples and tried < 400:
        tried += 1
        w = complex(rng.uniform(x0, x1), rng.uniform(y0, y1))
        if not in_union(w, polys_a):
            continue
        for z in _preimages(m, w, k):
            in_a = in_union(z, polys_a)
            in_b = in_union(z, polys_b)
            if not (in_a or in_b):
                continue
            try:
                P = _assemble_pullback(puz, s_a, z, k)
            except PuzzleError:
                continue
            inside_a = all(
                any(_supp_in(pc, q) for q in s_a.pieces) for pc in P
            )
            inside_b = all(
                any(_supp_in(pc, q) for q in s_b.pieces) for pc in P
            )
            if not (inside_a or inside_b):
                return LemmaCheck(
                    "star_pullback_trapped",
                    "fail",
                    {"z": [z.real, z.imag]},
                    note="pullback component straddles both stars",
                )
            checked += 1
    if checked == 0:
        return LemmaCheck("star_pullback_trapped", "inconclusive", note="no usable samples")
    return LemmaCheck("star_pullback_trapped", "pass", {"samples": checked})


def _supp_in(piece: Piece, other: Piece) -> bool:
    return piece.support_inside(other)


def _assemble_pullback(puz: Puzzle, geo, z: complex, k: int) -> list[Piece]:
    """The component of f^-k(union) containing z, as a list of pieces."""
    comps: list[Piece] = []
    for member in geo.pieces:
        comps.extend(c for c, _deg in puz.pullback_all(member, k))
    # adjacency via shared boundary rays
    angsets = [set(p.boundary_angles) for p in comps]
    n = len(comps)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if angsets[i] & angsets[j]:
                parent[find(i)] = find(j)
    # locate z's own piece among the components
    zp = puz.chain(z).piece(0, comps[0].depth)
    home = None
    for i, p in enumerate(comps):
        if p.key == zp.key:
            home = find(i)
            break
    if home is None:
        raise PuzzleError("sample's piece is not in the pullback")
    return [p for i, p in enumerate(comps) if find(i) == home]


def check_gamma_piece(puz: Puzzle, data: RenormData) -> LemmaCheck:
    gamma = data.gamma_point
    try:
        inner = puz.chain(gamma).piece(0, data.r)
        outer = puz.chain(gamma).piece(0, 0)
    except PuzzleError as e:
        return LemmaCheck("gamma_piece_compactly_contained", "inconclusive", note=str(e))
    if inner.touches_cycle():
        return LemmaCheck(
            "gamma_piece_compactly_contained", "fail", note="gamma piece touches the cycle"
        )
    entry = _gap_entry("gamma_piece_compactly_contained", puz, inner, outer)
    return entry


def run_verification(
    m: QuadraticMap, bounds: tuple[int, int, int], max_time: int = 4096
) -> VerificationReport:
    """Run every registry entry once; entries whose hypotheses are not
    available for this parameter are reported exempt."""
    decision = molecule_check(m, bounds)
    entries: list[LemmaCheck] = []
    if not decision.satisfied:
        for eid in REGISTRY_IDS:
            entries.append(
                LemmaCheck(eid, "exempt", note=f"bounded combinatorics not satisfied: {decision.reason}")
            )
        return VerificationReport(m.c, bounds, decision, entries)

    data = decision.witness
    puz = alpha_puzzle(m, data)
    nest = build_nest(m, data, puzzle=puz, max_time=max_time)

    entries.append(check_critical_value_piece(puz))
    entries.append(check_subset_sample(puz))
    entries.append(check_separation(m, data, puz))
    entries.append(check_escaping_value_side(m, data))
    entries.append(check_stars(puz, data))
    entries.append(check_buffers(puz, data))
    entries.append(check_nest_annulus(puz, data, nest))
    entries.append(check_qn_pullback(puz, data))
    entries.append(check_gamma_piece(puz, data))

    ids = [e.id for e in entries]
    assert sorted(ids) == sorted(REGISTRY_IDS) and len(set(ids)) == len(ids)
    return VerificationReport(m.c, bounds, decision, entries)
