import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yoccoz.angles import (
    Angle,
    NotDividing,
    NotDoublingInvariant,
    OrbitPortrait,
    PortraitError,
    UnequalValence,
    UnlinkedViolation,
    antipode,
    arc_length,
    characteristic_arc,
    double,
    exact_period,
    halves,
    in_arc,
    orbit,
    periodic_angles,
    validate_portrait,
)

# ---------------------------------------------------------------------------
# Independent brute-force admissibility oracle.  Deliberately written in a
# different style from the library (quadruple enumeration for linking, full
# rotation search for cyclic order) so the two can check each other.


def _crossed(a1, a2, b1, b2):
    # chords a1a2 and b1b2 cross iff exactly one of b1,b2 is inside arc (a1,a2)
    inside1 = in_arc(b1, a1, a2)
    inside2 = in_arc(b2, a1, a2)
    return inside1 != inside2


def brute_force_admissible(classes):
    """Return (ok, reason) for the same condition list as validate_portrait."""
    classes = [tuple(sorted(Angle(a) for a in cl)) for cl in classes]
    allang = [a for cl in classes for a in cl]
    if len(set(allang)) != len(allang):
        return False, "duplicate angle"
    for a in allang:
        if a.denominator % 2 == 0:
            return False, "not periodic"
    if len({len(cl) for cl in classes}) != 1:
        return False, "valence"
    # linking: any crossing pair of chords between two different classes
    for (i, A), (j, B) in itertools.combinations(enumerate(classes), 2):
        for a1, a2 in itertools.combinations(A, 2):
            for b1, b2 in itertools.combinations(B, 2):
                if _crossed(a1, a2, b1, b2):
                    return False, "linked"
    # doubling: bijection class -> class, single cycle, order preserved
    lookup = {a: i for i, cl in enumerate(classes) for a in cl}
    sigma = {}
    for i, cl in enumerate(classes):
        img = [double(a) for a in cl]
        tgt = set()
        for b in img:
            if b not in lookup:
                return False, "doubling image missing"
            tgt.add(lookup[b])
        if len(tgt) != 1:
            return False, "doubling scatters class"
        (k,) = tgt
        if sorted(img) != list(classes[k]):
            return False, "doubling not bijective"
        sigma[i] = k
        # order: some rotation of the target matches the image sequence
        s = len(cl)
        ok = False
        for r in range(s):
            if all(img[m] == classes[k][(r + m) % s] for m in range(s)):
                ok = True
        if not ok:
            return False, "cyclic order"
    seen = set()
    i = 0
    while i not in seen:
        seen.add(i)
        i = sigma[i]
    if len(seen) != len(classes):
        return False, "several cycles"
    # characteristic arc uniqueness / innermost check (valence >= 2)
    if len(classes[0]) >= 2:
        arcs = []
        for cl in classes:
            s = len(cl)
            for i in range(s):
                arcs.append((arc_length(cl[i], cl[(i + 1) % s]), cl[i], cl[(i + 1) % s]))
        arcs.sort()
        if len(arcs) > 1 and arcs[0][0] == arcs[1][0]:
            return False, "tie"
        _, lo, hi = arcs[0]
        if any(in_arc(a, lo, hi) for a in allang):
            return False, "arc not innermost"
    return True, ""


def doubling_orbits(n):
    """All doubling orbits of exact period n, each as an ordered cycle."""
    seen = set()
    orbits = []
    for a in periodic_angles(n):
        if a in seen or exact_period(a) != n:
            continue
        _, _, pts = orbit(a)
        orbits.append(pts)
        seen.update(pts)
    return orbits


def assembled_candidates(max_period):
    """Candidate portraits from periodic angles of period <= max_period.

    Single-orbit candidates: one doubling orbit of length n split into t
    classes (t | n) by index mod t.  Orbit-pair candidates: two distinct
    orbits of equal length n paired offset-wise into n classes of size 2.
    These cover all genuine portraits (a class of valence >= 3 is a single
    orbit of its t-th power; valence 2 may pair two orbits), plus plenty of
    inadmissible junk for the rejection side.
    """
    for n in range(1, max_period + 1):
        orbs = doubling_orbits(n)
        for pts in orbs:
            for t in range(1, n + 1):
                if n % t:
                    continue
                yield [tuple(pts[j] for j in range(i, n, t)) for i in range(t)]
        for o1, o2 in itertools.combinations(orbs, 2):
            for off in range(n):
                yield [(o1[j], o2[(j + off) % n]) for j in range(n)]


# ---------------------------------------------------------------------------
# Angle basics


def test_angle_normalization():
    assert Angle(4, 6) == Fraction(2, 3)
    assert Angle(7, 3) == Fraction(1, 3)
    assert Angle(-1, 3) == Fraction(2, 3)
    assert Angle("2/6") == Fraction(1, 3)
    assert str(Angle(1, 3)) == "1/3"


def test_double_examples():
    assert double(Angle(1, 3)) == Angle(2, 3)
    assert double(Angle(2, 3)) == Angle(1, 3)
    assert double(Angle(0)) == Angle(0)


def test_periodic_angles_small():
    assert periodic_angles(1) == [Angle(0)]
    assert periodic_angles(2) == [Angle(0), Angle(1, 3), Angle(2, 3)]
    assert periodic_angles(3) == [Angle(k, 7) for k in range(7)]
    with pytest.raises(ValueError):
        periodic_angles(0)


@pytest.mark.parametrize("n", range(1, 13))
def test_periodic_angle_count(n):
    angs = periodic_angles(n)
    assert len(angs) == 2**n - 1
    assert len(set(angs)) == len(angs)
    assert all(double(a) in set(angs) for a in angs)


def test_orbit_examples():
    assert orbit(Angle(1, 3)) == (0, 2, [Angle(1, 3), Angle(2, 3)])
    assert orbit(Angle(1, 6)) == (1, 2, [Angle(1, 6), Angle(1, 3), Angle(2, 3)])
    assert orbit(Angle(1, 7)) == (0, 3, [Angle(1, 7), Angle(2, 7), Angle(4, 7)])


@given(st.fractions(min_value=0, max_value=1, max_denominator=3000))
def test_halves_are_preimages(f):
    a = Angle(f)
    h0, h1 = halves(a)
    assert double(h0) == a
    assert double(h1) == a
    assert h1 == antipode(h0)


@given(st.fractions(min_value=0, max_value=1, max_denominator=10000))
def test_preperiod_parity(f):
    a = Angle(f)
    pre, per, pts = orbit(a)
    # odd denominator <=> periodic; the tail length is the 2-adic valuation
    assert (pre == 0) == (a.denominator % 2 == 1)
    assert double(pts[-1]) == pts[pre]


# ---------------------------------------------------------------------------
# Portrait validation


def test_basilica_portrait():
    p = validate_portrait([["1/3", "2/3"]])
    assert (p.period_t, p.valence_s, p.ray_count_r) == (1, 2, 2)
    assert p.characteristic_arc == (Angle(1, 3), Angle(2, 3))
    assert p.ray_period == 2


def test_rabbit_portrait():
    p = validate_portrait([["1/7", "2/7", "4/7"]])
    assert (p.period_t, p.valence_s, p.ray_count_r) == (1, 3, 3)
    assert p.characteristic_arc == (Angle(1, 7), Angle(2, 7))
    assert p.ray_period == 3


def test_airplane_wake_portrait():
    # period-3 point with two rays each: three classes pairing two orbits
    p = validate_portrait([["3/7", "4/7"], ["6/7", "1/7"], ["5/7", "2/7"]])
    assert (p.period_t, p.valence_s, p.ray_count_r) == (3, 2, 6)
    assert p.characteristic_arc == (Angle(3, 7), Angle(4, 7))
    assert p.ray_period == 3  # angles have exact period 3, not t*s


def test_period_two_cycle_portrait():
    p = validate_portrait([["1/5", "4/5"], ["2/5", "3/5"]])
    assert (p.period_t, p.valence_s, p.ray_count_r) == (2, 2, 4)
    assert p.characteristic_arc == (Angle(2, 5), Angle(3, 5))
    assert p.ray_period == 4


def test_trivial_fixed_portrait():
    p = validate_portrait([["0"]])
    assert (p.period_t, p.valence_s) == (1, 1)
    assert p.characteristic_arc is None
    with pytest.raises(NotDividing):
        characteristic_arc(p)


def test_rejections():
    with pytest.raises(NotDoublingInvariant):
        validate_portrait([["1/3", "1/7"]])  # 2/3 missing
    with pytest.raises(UnequalValence):
        validate_portrait([["1/7", "2/7", "4/7"], ["3/7", "5/7"]])
    with pytest.raises(UnlinkedViolation):
        # two period-4 orbit classes that interleave on the circle
        validate_portrait([["1/15", "4/15"], ["2/15", "8/15"]])
    with pytest.raises(NotDoublingInvariant):
        validate_portrait([["1/6", "1/3"]])  # 1/6 not periodic
    with pytest.raises(PortraitError):
        validate_portrait([])


def test_portrait_json_roundtrip():
    p = validate_portrait([["1/3", "2/3"]])
    d = p.to_json_dict()
    assert d == {
        "classes": [["1/3", "2/3"]],
        "t": 1,
        "s": 2,
        "r": 2,
        "char_arc": ["1/3", "2/3"],
    }
    q = OrbitPortrait.from_json_dict(d)
    assert q == p


def test_characteristic_arc_endpoints_in_one_class():
    for n in range(2, 7):
        for cand in assembled_candidates(n):
            try:
                p = validate_portrait(cand)
            except PortraitError:
                continue
            if p.valence_s < 2:
                continue
            lo, hi = p.characteristic_arc
            assert any(lo in cl and hi in cl for cl in p.classes)
            assert p.ray_count_r == p.period_t * p.valence_s


def test_validate_agrees_with_brute_force_oracle():
    checked = accepted = 0
    for n in range(1, 7):
        for cand in assembled_candidates(n):
            checked += 1
            ok, reason = brute_force_admissible(cand)
            try:
                validate_portrait(cand)
                lib_ok = True
            except PortraitError:
                lib_ok = False
            assert lib_ok == ok, f"disagreement on {cand}: oracle={ok} ({reason})"
            accepted += lib_ok
    assert checked > 200
    assert accepted > 10


def test_validate_rejects_junk_classes():
    # random-ish unions that are not portraits at all
    junk = [
        [["1/3", "2/3"], ["1/7", "2/7", "4/7"]],
        [["1/15", "2/15"], ["4/15", "8/15"]],
        [["1/7", "6/7"]],
    ]
    for cand in junk:
        ok, _ = brute_force_admissible(cand)
        try:
            validate_portrait(cand)
            lib_ok = True
        except PortraitError:
            lib_ok = False
        assert lib_ok == ok
