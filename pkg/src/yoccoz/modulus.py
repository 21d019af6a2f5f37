"""Discrete conformal modulus and extremal length on square grids.

The modulus of an annular configuration (and the extremal width of a
quadrilateral) is estimated as the reciprocal Dirichlet energy of the
five-point-Laplacian harmonic function with u = 0 on the inner marker set
and u = 1 on the outer one; sides without markers get natural (Neumann)
conditions.  The reported error proxy is the change under halving the
resolution.  All dynamical moduli computed here are plane-domain values
(pieces are materialized as polygons); outputs are labeled accordingly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Grid
from .puzzle import Piece, Puzzle

INTERIOR, EXCLUDED, MARK_A, MARK_B = 0, 1, 2, 3


class Disconnected(RuntimeError):
    """No interior path between the two marked boundary sets."""


class SolverStall(RuntimeError):
    pass


class InconclusiveContainment(RuntimeError):
    """The required compact containment could not be certified."""


@dataclass(frozen=True)
class ModulusEstimate:
    value: float
    resolution: int
    refinement_delta: float
    kind: str  # annulus_modulus | extremal_distance | extremal_width
    label: str = ""

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "resolution": self.resolution,
            "refinement_delta": self.refinement_delta,
            "kind": self.kind,
            "label": self.label,
        }


@dataclass
class GridDomain:
    """A classified square grid over a bounding box.

    The classifier maps an array of cell-center points to the codes
    INTERIOR / EXCLUDED / MARK_A / MARK_B, so the same domain can be
    re-rasterized at any resolution (needed for refinement deltas).
    """

    bbox: tuple[float, float, float, float]  # x0, x1, y0, y1
    n: int
    classifier: Callable[[np.ndarray], np.ndarray]

    def grid(self, n: Optional[int] = None) -> Grid:
        x0, x1, y0, y1 = self.bbox
        return Grid.over_bbox(x0, x1, y0, y1, n or self.n)

    def codes(self, n: Optional[int] = None) -> tuple[Grid, np.ndarray]:
        g = self.grid(n)
        return g, self.classifier(g.centers()).astype(np.int8)

    def at_resolution(self, n: int) -> "GridDomain":
        return GridDomain(self.bbox, n, self.classifier)


def _solve_dirichlet(codes: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Harmonic u with u=0 on A, u=1 on B, Laplace on interior cells.

    Missing neighbors (excluded cells, box edge) give natural Neumann
    conditions.  Returns u over the full grid (excluded cells NaN).
    """
    active = codes != EXCLUDED
    interior = codes == INTERIOR
    a_mask = codes == MARK_A
    b_mask = codes == MARK_B
    if not a_mask.any() or not b_mask.any():
        raise Disconnected("a marker set is empty")

    from scipy.ndimage import label

    lab, _ = label(active)
    good = set(np.unique(lab[a_mask])) & set(np.unique(lab[b_mask])) - {0}
    if not good:
        raise Disconnected("no path between the marked sets")

    ny, nx = codes.shape
    idx = -np.ones(codes.shape, dtype=np.int64)
    ii, jj = np.nonzero(interior)
    idx[ii, jj] = np.arange(len(ii))
    nun = len(ii)
    if nun == 0:
        raise Disconnected("no interior cells")

    rows, cols, vals = [], [], []
    rhs = np.zeros(nun)
    diag = np.zeros(nun)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni, nj = ii + di, jj + dj
        inb = (ni >= 0) & (ni < ny) & (nj >= 0) & (nj < nx)
        ok = inb.copy()
        ok[inb] = active[ni[inb], nj[inb]]
        diag[ok] += 1.0
        nb_int = ok.copy()
        nb_int[ok] = interior[ni[ok], nj[ok]]
        rows.extend(np.nonzero(nb_int)[0])
        cols.extend(idx[ni[nb_int], nj[nb_int]])
        vals.extend([-1.0] * int(nb_int.sum()))
        nb_b = ok.copy()
        nb_b[ok] = b_mask[ni[ok], nj[ok]]
        rhs[nb_b] += 1.0

    L = sp.csr_matrix(
        (np.concatenate([vals, diag]),
         (np.concatenate([rows, np.arange(nun)]),
          np.concatenate([cols, np.arange(nun)]))),
        shape=(nun, nun),
    )

    x = None
    try:
        import pyamg

        ml = pyamg.ruge_stuben_solver(L.tocsr())
        x = ml.solve(rhs, tol=tol, accel="cg", maxiter=400)
    except Exception:
        x = None
    if x is None or not np.all(np.isfinite(x)):
        x, info = spla.cg(L, rhs, rtol=tol, maxiter=40 * codes.shape[0])
        if info != 0:
            raise SolverStall(f"conjugate gradient stalled (info={info})")
    res = np.linalg.norm(L @ x - rhs)
    if res > 1e-6 * max(1.0, np.linalg.norm(rhs)):
        raise SolverStall(f"residual {res} too large")

    u = np.full(codes.shape, np.nan)
    u[interior] = x
    u[a_mask] = 0.0
    u[b_mask] = 1.0
    return u


def _dirichlet_energy(codes: np.ndarray, u: np.ndarray) -> float:
    active = codes != EXCLUDED
    uu = np.where(active, u, 0.0)
    e = 0.0
    both = active[:, 1:] & active[:, :-1]
    e += float(np.sum(((uu[:, 1:] - uu[:, :-1]) ** 2)[both]))
    both = active[1:, :] & active[:-1, :]
    e += float(np.sum(((uu[1:, :] - uu[:-1, :]) ** 2)[both]))
    return e


def _energy_at(domain: GridDomain, n: int) -> float:
    _, codes = domain.codes(n)
    u = _solve_dirichlet(codes)
    return _dirichlet_energy(codes, u)


def grid_modulus(domain: GridDomain, label: str = "") -> ModulusEstimate:
    """Modulus of the annular configuration: 1 / Dirichlet energy.

    Calibration: for the round annulus r < |z| < R the value is
    log(R/r) / (2 pi).
    """
    e = _energy_at(domain, domain.n)
    e2 = _energy_at(domain, domain.n // 2)
    return ModulusEstimate(
        value=1.0 / e,
        resolution=domain.n,
        refinement_delta=abs(1.0 / e - 1.0 / e2),
        kind="annulus_modulus",
        label=label,
    )


def extremal_distance(domain: GridDomain, label: str = "") -> ModulusEstimate:
    """Extremal distance between the A and B boundary families."""
    e = _energy_at(domain, domain.n)
    e2 = _energy_at(domain, domain.n // 2)
    return ModulusEstimate(
        value=1.0 / e,
        resolution=domain.n,
        refinement_delta=abs(1.0 / e - 1.0 / e2),
        kind="extremal_distance",
        label=label,
    )


def extremal_width(domain: GridDomain, label: str = "") -> ModulusEstimate:
    """Extremal width (reciprocal of the distance) of the configuration."""
    e = _energy_at(domain, domain.n)
    e2 = _energy_at(domain, domain.n // 2)
    return ModulusEstimate(
        value=e,
        resolution=domain.n,
        refinement_delta=abs(e - e2),
        kind="extremal_width",
        label=label,
    )


# ---------------------------------------------------------------------------
# synthetic configurations


def annulus_domain(r: float, R: float, n: int, margin: float = 1.05) -> GridDomain:
    box = R * margin

    def classify(z: np.ndarray) -> np.ndarray:
        rad = np.abs(z)
        out = np.full(z.shape, INTERIOR, dtype=np.int8)
        out[rad <= r] = MARK_A
        out[rad >= R] = MARK_B
        return out

    return GridDomain((-box, box, -box, box), n, classify)


def rectangle_domain(width: float, height: float, n: int, across: str = "x") -> GridDomain:
    """Conformal rectangle with Dirichlet plates on two opposite sides.

    `across="x"`: A and B are the left/right edges (distance = width /
    height); `across="y"`: top/bottom.
    """
    pad = 2.0 * max(width, height) / n

    def classify(z: np.ndarray) -> np.ndarray:
        x, y = z.real, z.imag
        out = np.full(z.shape, EXCLUDED, dtype=np.int8)
        inside = (x > 0) & (x < width) & (y > 0) & (y < height)
        out[inside] = INTERIOR
        if across == "x":
            out[(x <= 0) & (y > 0) & (y < height)] = MARK_A
            out[(x >= width) & (y > 0) & (y < height)] = MARK_B
        else:
            out[(y <= 0) & (x > 0) & (x < width)] = MARK_A
            out[(y >= height) & (x > 0) & (x < width)] = MARK_B
        return out

    return GridDomain((-pad, width + pad, -pad, height + pad), n, classify)


def disks_domain(R: float, disks: Sequence[tuple[complex, float]], n: int) -> GridDomain:
    """Large disk of radius R with excluded inner disks marked A."""
    box = R * 1.05

    def classify(z: np.ndarray) -> np.ndarray:
        out = np.full(z.shape, INTERIOR, dtype=np.int8)
        for a, r in disks:
            out[np.abs(z - a) <= r] = MARK_A
        out[np.abs(z) >= R] = MARK_B
        return out

    return GridDomain((-box, box, -box, box), n, classify)


def eccentric_annulus_modulus(R: float, r: float, d: float) -> float:
    """Exact modulus between |z| = R and the circle of radius r centered at
    distance d from the origin (inside), via the inversive distance."""
    inv = (R * R + r * r - d * d) / (2 * R * r)
    return math.acosh(inv) / (2 * math.pi)


# ---------------------------------------------------------------------------
# dynamical pieces


def _decimate(poly: np.ndarray, min_step: float) -> np.ndarray:
    """Drop polygon points closer than min_step to their predecessor.

    Classification only needs the boundary resolved at the cell scale."""
    p = np.asarray(poly, dtype=complex)
    if len(p) < 3 or min_step <= 0:
        return p
    keep = [0]
    last = p[0]
    for i in range(1, len(p) - 1):
        if abs(p[i] - last) >= min_step:
            keep.append(i)
            last = p[i]
    keep.append(len(p) - 1)
    return p[keep]


def _polygon_domain(
    outer: np.ndarray, inner: Optional[np.ndarray], n: int, pad_frac: float = 0.04
) -> GridDomain:
    from .geometry import points_in_polygon

    xs = outer.real
    ys = outer.imag
    dx = xs.max() - xs.min()
    dy = ys.max() - ys.min()
    pad = pad_frac * max(dx, dy)
    bbox = (xs.min() - pad, xs.max() + pad, ys.min() - pad, ys.max() + pad)

    def classify(z: np.ndarray) -> np.ndarray:
        h = abs(z[0, 1] - z[0, 0]) if z.ndim == 2 and z.shape[1] > 1 else 0.0
        po = _decimate(outer, h / 3)
        out = np.full(z.shape, MARK_B, dtype=np.int8)
        ins = points_in_polygon(z, po)
        out[ins] = INTERIOR
        if inner is not None:
            pi = _decimate(inner, h / 3)
            ina = points_in_polygon(z, pi)
            out[ina & ins] = MARK_A
        return out

    return GridDomain(bbox, n, classify)


def piece_modulus(
    puzzle: Puzzle, outer: Piece, inner: Piece, resolution: int = 512
) -> ModulusEstimate:
    """Planar modulus of outer \\ (filled inner), both materialized.

    The inner piece stands in for the hull of the Julia material it
    carries; the value is the plane-domain approximation of the annulus
    modulus and is labeled as such.  Requires certified compact
    containment of inner in outer.
    """
    g, res = puzzle.gap(inner, outer)
    if not g > 10 * res:
        raise InconclusiveContainment(f"gap {g} vs resolution {res}")
    po = puzzle.polygon(outer)
    pi = puzzle.polygon(inner)
    dom = _polygon_domain(po, pi, resolution)
    est = grid_modulus(dom, label="planar approximation (filled inner piece)")
    return est


def bigon_distance(
    puzzle: Puzzle,
    bigon: Piece,
    v: complex,
    w: complex,
    resolution: int = 512,
) -> ModulusEstimate:
    """Extremal distance, inside the bigon, between the ray pairs at its
    two vertices (plane-domain approximation of the vertex-to-vertex
    distance).  The equipotential sides get natural conditions."""
    from .geometry import points_in_polygon
    from .puzzle import NotABigon

    if bigon.vertex_count != 2:
        raise NotABigon(f"piece has {bigon.vertex_count} vertices")
    pairs = bigon.vertex_pairs
    pts = [puzzle.vertex_point(pr) for pr in pairs]
    want = [complex(v), complex(w)]
    order = []
    for target in want:
        k = min(range(len(pts)), key=lambda i: abs(pts[i] - target))
        if abs(pts[k] - target) > 1e-5:
            raise NotABigon(f"{target} is not a vertex of the bigon")
        order.append(k)
    if order[0] == order[1]:
        raise NotABigon("the two vertices coincide")

    G = puzzle.map.depth_potential(bigon.eq_depth)
    rays = {0: [], 1: []}
    for which, k in enumerate(order):
        for a in pairs[k]:
            seg = puzzle._ray_segment(a, G, res_target=0.01)
            rays[which].append(np.array(seg + [pts[k]], dtype=complex))

    poly = puzzle.polygon(bigon)
    dom0 = _polygon_domain(poly, None, resolution)

    def classify(z: np.ndarray) -> np.ndarray:
        from .geometry import Grid, points_in_polygon

        h = abs(z[0, 1] - z[0, 0]) if z.ndim == 2 and z.shape[1] > 1 else 1e-3
        g = Grid(
            x0=z[0, 0].real - h / 2,
            y0=z[0, 0].imag - h / 2,
            h=h,
            nx=z.shape[1],
            ny=z.shape[0],
        )
        out = np.full(z.shape, EXCLUDED, dtype=np.int8)
        out[points_in_polygon(z, _decimate(poly, h / 3))] = INTERIOR
        for code, arcs in ((MARK_A, rays[0]), (MARK_B, rays[1])):
            mask = np.zeros(z.shape, dtype=bool)
            for arc in arcs:
                mask |= g.rasterize_polyline(arc)
            out[mask] = code
        return out

    dom = GridDomain(dom0.bbox, resolution, classify)
    est = extremal_distance(dom, label="planar approximation (ray-pair plates)")
    return est


# ---------------------------------------------------------------------------
# inequality harnesses


@dataclass(frozen=True)
class DiskFamily:
    """Synthetic configuration for the union-modulus inequality report:
    m disks inside a large disk, with round collars as the annuli."""

    outer_radius: float
    disks: tuple[tuple[complex, float], ...]
    eta: float


def quasi_additivity_report(config: DiskFamily, resolution: int = 512) -> dict:
    """Measure both sides of the union-modulus inequality.

    For each inner disk the modulus mod(V, K_i) is known analytically
    (eccentric annulus); delta is their maximum.  The collar condition
    requires each disk's round collar modulus to exceed eta * delta.  The
    conclusion compares the grid modulus of V minus the union against
    2 delta / (eta m).
    """
    R = config.outer_radius
    disks = list(config.disks)
    m = len(disks)
    eta = config.eta
    per = [eccentric_annulus_modulus(R, r, abs(a)) for a, r in disks]
    delta = max(per)
    collars = []
    for i, (a, r) in enumerate(disks):
        clear = R - abs(a)
        for j, (b, s) in enumerate(disks):
            if i != j:
                clear = min(clear, abs(a - b) - s)
        collars.append(math.log(max(clear, r) / r) / (2 * math.pi))
    hypothesis = all(col > eta * delta for col in collars)
    union = grid_modulus(disks_domain(R, disks, resolution), label="grid union modulus")
    rhs = 2.0 * delta / (eta * m)
    return {
        "m": m,
        "eta": eta,
        "delta": delta,
        "per_disk_modulus": per,
        "collar_moduli": collars,
        "hypothesis_met": hypothesis,
        "lhs_union_modulus": union.value,
        "lhs_refinement_delta": union.refinement_delta,
        "rhs": rhs,
        "conclusion_holds": union.value < rhs,
        "status": "ok" if hypothesis else "hypothesis not met",
    }


class HypothesisFailure(RuntimeError):
    def __init__(self, bullet: str, detail: str = ""):
        super().__init__(f"{bullet}: {detail}" if detail else bullet)
        self.bullet = bullet


def _pullback_along_critical_orbit(puzzle: Puzzle, Z: Piece, t: int) -> tuple[Piece, int]:
    """The component of f^-t(Z) riding the critical orbit, with degree."""
    piece = Z
    degree = 1
    for j in range(t - 1, -1, -1):
        comps = puzzle.preimage_components(piece)
        degree *= 2 if len(comps) == 1 else 1
        if len(comps) == 1:
            piece = comps[0]
        else:
            want = puzzle.orbit_piece(j, piece.depth + 1)
            fits = [c for c in comps if want.support_inside(c)]
            if len(fits) != 1:
                raise HypothesisFailure("pullback", f"ambiguous at t={t}, j={j}")
            piece = fits[0]
    return piece, degree


def transfer_default_configuration(puzzle: Puzzle, data, nest, degree_cap: int = 1024):
    """Pick (Y, Z, times) for the transfer table.

    Y is a star-avoiding piece at depth lam visited by the orbit within
    the admissible time window, keeping only moments whose Z-pullback
    lands inside the second-to-last nest level; Z is Y's depth-0 ancestor
    truncated two equipotential levels above Y (the far field beyond that
    level is omitted: a monotone underestimate, labeled in the report).
    """
    if not nest.terminated:
        raise HypothesisFailure("nest", "no terminated renormalization level")
    p = nest.return_times[-1]
    lam = data.lam
    alpha = data.alpha_point.location
    star_keys = set()
    for v in (alpha, -alpha):
        for pc in puzzle.star(v, lam).pieces:
            star_keys.add(pc.key)
    groups: dict = {}
    for t in range(1, 2 * p):
        pc = puzzle.orbit_piece(t, lam)
        if pc.key in star_keys:
            continue
        groups.setdefault(pc.key, []).append(t)
    inner = nest.levels[-2] if len(nest.levels) >= 2 else nest.levels[-1]
    best = None
    for key, ts in groups.items():
        Y = puzzle.orbit_piece(ts[0], lam)
        Z0 = puzzle.depth0_ancestor(Y)
        Z = Z0.at_equipotential(max(Z0.depth, Y.eq_depth - 2))
        good = []
        for t in ts:
            try:
                ups, deg = _pullback_along_critical_orbit(puzzle, Z, t)
            except HypothesisFailure:
                continue
            if deg <= degree_cap and ups.support_inside(inner):
                good.append(t)
        good = [t for t in good if good and t - good[0] < p and t < 2 * p]
        if good and (best is None or len(good) > len(best[2])):
            best = (Y, Z, good)
    if best is None:
        raise HypothesisFailure("orbit containment", "no admissible star-avoiding moments")
    return best


def transfer_report(
    m,
    data,
    nest,
    puzzle: Puzzle,
    Y: Piece,
    Z: Piece,
    times: Sequence[int],
    C: float = 2.0**15,
    degree_cap: int = 1024,
    resolution: int = 512,
) -> dict:
    """Measured two-sided data for the modulus transfer inequality.

    The four hypotheses are checked combinatorially (time window, orbit
    containment, pullback containment in the second-to-last nest level,
    degree bound); the report compares mod(Z, Y) with (C / m) times the
    modulus of the last nest level around the little Julia proxy.  This is
    a data table, not a proof.
    """
    times = sorted(times)
    if not times:
        raise HypothesisFailure("times", "no moments given")
    if not nest.terminated:
        raise HypothesisFailure("nest", "no terminated renormalization level")
    p = nest.return_times[-1]
    if times[-1] - times[0] >= p or times[-1] >= 2 * p:
        raise HypothesisFailure("time window", f"t_m={times[-1]}, p={p}")
    if Z.depth >= nest.levels[-2].depth if len(nest.levels) >= 2 else False:
        raise HypothesisFailure("depth", "Z not shallower than the nest")

    echi = nest.levels[-1]
    upsil_rows = []
    for t in times:
        # orbit containment: the little Julia set rides the critical orbit
        orb = puzzle.orbit_piece(t, Y.depth)
        if orb.key != Y.key:
            raise HypothesisFailure("orbit containment", f"f^{t}(K) not in Y (t={t})")
        # pullback of Z along the orbit, selected by the critical chain
        piece, degree = _pullback_along_critical_orbit(puzzle, Z, t)
        if len(nest.levels) >= 2 and not piece.support_inside(nest.levels[-2]):
            raise HypothesisFailure("pullback containment", f"Upsilon_{t} escapes E^(chi-1)")
        if degree > degree_cap:
            raise HypothesisFailure("degree", f"deg {degree} > cap {degree_cap}")
        upsil_rows.append({"t": t, "degree": degree, "depth": piece.depth})

    mod_zy = piece_modulus(puzzle, Z, Y, resolution)
    proxy = nest.little_julia_proxy()
    mod_ek = piece_modulus(puzzle, echi, proxy, resolution)
    mm = len(times)
    return {
        "times": list(times),
        "p": p,
        "pullbacks": upsil_rows,
        "mod_ZY": mod_zy.value,
        "mod_ZY_delta": mod_zy.refinement_delta,
        "mod_Echi_K": mod_ek.value,
        "mod_Echi_K_delta": mod_ek.refinement_delta,
        "C": C,
        "m": mm,
        "rhs": C / mm * mod_ek.value,
        "ratio": mod_zy.value / mod_ek.value if mod_ek.value else math.inf,
        "inequality_holds_at_measured_values": mod_zy.value < C / mm * mod_ek.value,
        "label": "planar approximation; K proxied by the next return pullback",
    }
