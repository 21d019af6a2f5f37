"""Exact arithmetic of external angles under doubling, and orbit portraits.

Angles live on the circle R/Z and are stored as reduced fractions in [0, 1).
Everything in this module is exact rational arithmetic; no floats are used,
so combinatorial statements (periodicity, unlinking, cyclic order) are
decided, not estimated.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence


class PortraitError(ValueError):
    """A candidate ray portrait violates an admissibility condition."""


class NotDoublingInvariant(PortraitError):
    """Doubling does not permute the classes (or breaks cyclic order)."""


class UnequalValence(PortraitError):
    """Classes do not all have the same number of angles."""


class UnlinkedViolation(PortraitError):
    """Two classes interleave on the circle."""


class NotDividing(PortraitError):
    """The portrait has valence 1, so it does not divide the plane."""


class Angle(Fraction):
    """A rational angle on R/Z, reduced and normalized to [0, 1)."""

    __slots__ = ()

    def __new__(cls, numerator=0, denominator=None):
        if denominator is None and isinstance(numerator, str):
            numerator = Fraction(numerator)
        f = Fraction(numerator) if denominator is None else Fraction(numerator, denominator)
        return super().__new__(cls, f % 1)

    def __repr__(self) -> str:
        return f"Angle({self.numerator}/{self.denominator})"

    def __str__(self) -> str:
        return f"{self.numerator}/{self.denominator}"

    @property
    def turns(self) -> float:
        return self.numerator / self.denominator


def double(a: Angle) -> Angle:
    """The angle 2a mod 1 (action of z -> z^2 on external rays)."""
    return Angle(2 * Fraction(a))


def halves(a: Angle) -> tuple[Angle, Angle]:
    """The two preimages of a under doubling: a/2 and (a+1)/2."""
    f = Fraction(a)
    return Angle(f / 2), Angle(f / 2 + Fraction(1, 2))


def periodic_angles(n: int) -> list[Angle]:
    """All angles fixed by n-fold doubling: k/(2^n - 1), sorted.

    The count is 2^n - 1 (angles of exact period n together with all
    shorter divisor periods).
    """
    if n < 1:
        raise ValueError(f"period must be >= 1, got {n}")
    d = 2**n - 1
    return [Angle(k, d) for k in range(d)]


def orbit(a: Angle) -> tuple[int, int, list[Angle]]:
    """Exact (preperiod, period, points) of a under doubling.

    `points` lists every angle visited before the orbit first repeats,
    in order starting from a.
    """
    a = a if isinstance(a, Angle) else Angle(a)
    seen: dict[Angle, int] = {}
    pts: list[Angle] = []
    x = a
    while x not in seen:
        seen[x] = len(pts)
        pts.append(x)
        x = double(x)
    first = seen[x]
    return first, len(pts) - first, pts


def exact_period(a: Angle) -> Optional[int]:
    """Exact period of a under doubling, or None if a is preperiodic."""
    pre, per, _ = orbit(a)
    return per if pre == 0 else None


def is_periodic(a: Angle) -> bool:
    """True iff a is periodic under doubling (reduced denominator odd)."""
    return (a if isinstance(a, Angle) else Angle(a)).denominator % 2 == 1


def arc_length(lo: Angle, hi: Angle) -> Fraction:
    """Length of the positively-oriented circle arc from lo to hi."""
    return (Fraction(hi) - Fraction(lo)) % 1


def in_arc(x: Angle, lo: Angle, hi: Angle) -> bool:
    """True iff x lies strictly inside the positively-oriented arc (lo, hi)."""
    if lo == hi:
        return False
    return 0 < arc_length(lo, x) < arc_length(lo, hi)


@dataclass(frozen=True)
class OrbitPortrait:
    """Equivalence classes of periodic angles whose rays land together.

    `classes` are ordered so that doubling maps class j bijectively onto
    class j+1 (mod period_t); each class is sorted ascending.  For a
    dividing portrait (valence >= 2) `characteristic_arc` is the pair of
    angles bounding the critical value sector; it is None when valence_s
    is 1.
    """

    classes: tuple[tuple[Angle, ...], ...]
    period_t: int
    valence_s: int
    ray_count_r: int
    characteristic_arc: Optional[tuple[Angle, Angle]]

    def angles(self) -> tuple[Angle, ...]:
        return tuple(sorted(a for cl in self.classes for a in cl))

    @property
    def is_dividing(self) -> bool:
        return self.valence_s >= 2

    @property
    def ray_period(self) -> int:
        """Period of the characteristic angles under doubling.

        This is the first-return time of the critical value piece, i.e.
        the period of the renormalization the portrait supports.  It
        equals period_t * valence_s when the angles form a single
        doubling orbit, and period_t when they split into valence_s
        orbits.
        """
        arc = self.characteristic_arc
        if arc is None:
            raise NotDividing("portrait with valence 1 has no ray period")
        p = exact_period(arc[0])
        assert p is not None
        return p

    def characteristic_class_index(self) -> int:
        """Index of the class containing the characteristic arc endpoints."""
        arc = self.characteristic_arc
        if arc is None:
            raise NotDividing("portrait with valence 1 has no characteristic arc")
        for j, cl in enumerate(self.classes):
            if arc[0] in cl:
                return j
        raise AssertionError("characteristic arc endpoints not in any class")

    def to_json_dict(self) -> dict:
        d = {
            "classes": [[str(a) for a in cl] for cl in self.classes],
            "t": self.period_t,
            "s": self.valence_s,
            "r": self.ray_count_r,
        }
        if self.characteristic_arc is not None:
            d["char_arc"] = [str(a) for a in self.characteristic_arc]
        else:
            d["char_arc"] = None
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "OrbitPortrait":
        return validate_portrait([[Angle(s) for s in cl] for cl in d["classes"]])


def _as_classes(classes: Iterable[Iterable]) -> list[tuple[Angle, ...]]:
    out = []
    for cl in classes:
        angles = tuple(sorted(a if isinstance(a, Angle) else Angle(a) for a in cl))
        if not angles:
            raise PortraitError("empty class")
        out.append(angles)
    if not out:
        raise PortraitError("no classes given")
    return out


def _gap_index(angles: Sequence[Angle], x: Angle) -> int:
    """Which complementary arc of `angles` (sorted) contains x."""
    if len(angles) == 1:
        return 0  # a single angle leaves one gap: the rest of the circle
    for i, a in enumerate(angles):
        b = angles[(i + 1) % len(angles)]
        if in_arc(x, a, b):
            return i
    raise AssertionError(f"{x} coincides with a class angle")


def validate_portrait(classes: Iterable[Iterable]) -> OrbitPortrait:
    """Check admissibility of candidate landing classes and seal a portrait.

    The admissibility conditions implemented here (and fixed as this
    module's definition of "admissible") are:

      * every angle is periodic under doubling;
      * no angle appears in two classes;
      * doubling maps each class bijectively onto another, and the induced
        permutation of classes is a single cycle;
      * doubling preserves the cyclic order of the angles within a class;
      * all classes have the same cardinality (the valence);
      * distinct classes are unlinked on the circle.

    On success the characteristic arc (shortest complementary arc over all
    classes) is computed; it is checked to contain no other portrait angle,
    which is what makes the critical value piece a one-vertex sector.
    Raises a PortraitError subclass naming the failing condition otherwise.
    """
    cls_list = _as_classes(classes)

    seen: dict[Angle, int] = {}
    for j, cl in enumerate(cls_list):
        for a in cl:
            if not is_periodic(a):
                raise NotDoublingInvariant(f"angle {a} is not periodic under doubling")
            if a in seen:
                raise NotDoublingInvariant(f"angle {a} appears in classes {seen[a]} and {j}")
            seen[a] = j

    t = len(cls_list)
    sizes = {len(cl) for cl in cls_list}
    if len(sizes) != 1:
        raise UnequalValence(f"class sizes differ: {sorted(len(c) for c in cls_list)}")
    s = sizes.pop()

    # Doubling must send class j onto a single class sigma(j), bijectively.
    sigma: list[int] = []
    for j, cl in enumerate(cls_list):
        images = [double(a) for a in cl]
        targets = {seen.get(b) for b in images}
        if None in targets:
            missing = next(b for b in images if b not in seen)
            raise NotDoublingInvariant(f"2*(angle of class {j}) = {missing} is absent from all classes")
        if len(targets) != 1:
            raise NotDoublingInvariant(f"doubling scatters class {j} over classes {sorted(targets)}")
        k = targets.pop()
        if set(images) != set(cls_list[k]):
            raise NotDoublingInvariant(f"doubling maps class {j} into, but not onto, class {k}")
        sigma.append(k)

    # The induced permutation must be one t-cycle.
    visited = [False] * t
    j, count = 0, 0
    while not visited[j]:
        visited[j] = True
        count += 1
        j = sigma[j]
    if count != t:
        raise NotDoublingInvariant("classes split into several doubling cycles")

    # Cyclic order within a class must be preserved by doubling.
    for j, cl in enumerate(cls_list):
        target = cls_list[sigma[j]]
        images = [double(a) for a in cl]
        idx = target.index(images[0])
        for i, b in enumerate(images):
            if target[(idx + i) % s] != b:
                raise NotDoublingInvariant(f"doubling reverses the cyclic order of class {j}")

    # Pairwise unlinking: each class must sit inside one gap of any other.
    for j in range(t):
        for k in range(j + 1, t):
            gaps = {_gap_index(cls_list[j], x) for x in cls_list[k]}
            if len(gaps) != 1:
                raise UnlinkedViolation(f"classes {j} and {k} are linked on the circle")

    # Reorder classes along the doubling cycle, starting at the global min.
    start = min(range(t), key=lambda j: cls_list[j][0])
    order = [start]
    while len(order) < t:
        order.append(sigma[order[-1]])
    ordered = tuple(cls_list[j] for j in order)

    char_arc = None
    if s >= 2:
        candidates = []
        for cl in ordered:
            for i in range(s):
                lo, hi = cl[i], cl[(i + 1) % s]
                candidates.append((arc_length(lo, hi), lo, hi))
        candidates.sort()
        if len(candidates) > 1 and candidates[0][0] == candidates[1][0]:
            raise PortraitError("characteristic arc is not unique (tied shortest arcs)")
        _, lo, hi = candidates[0]
        inside = [a for a in seen if in_arc(a, lo, hi)]
        if inside:
            raise PortraitError(
                f"shortest class arc ({lo},{hi}) contains other portrait angles {inside}; "
                "the critical value sector would have more than one vertex"
            )
        char_arc = (lo, hi)

    return OrbitPortrait(
        classes=ordered,
        period_t=t,
        valence_s=s,
        ray_count_r=t * s,
        characteristic_arc=char_arc,
    )


def characteristic_arc(p: OrbitPortrait) -> tuple[Angle, Angle]:
    """The angle pair bounding the critical value piece of the puzzle.

    Rejects non-dividing portraits: with a single ray per point there is
    no pair of rays cutting out a critical value sector.
    """
    if p.valence_s < 2:
        raise NotDividing("a dividing portrait needs valence >= 2")
    assert p.characteristic_arc is not None
    return p.characteristic_arc


def antipode(a: Angle) -> Angle:
    """The angle a + 1/2, i.e. the external angle of the ray at -z."""
    return Angle(Fraction(a) + Fraction(1, 2))
