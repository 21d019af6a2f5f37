"""Acceptance suite: one test per release criterion, one line per verdict.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS lines.
"""
import json
import math
import time

import numpy as np
import pytest

from yoccoz.angles import Angle, PortraitError, double, periodic_angles, validate_portrait
from yoccoz.cli import main as cli_main
from yoccoz.dynamics import QuadraticMap, land_ray, trace_ray
from yoccoz.modulus import (
    annulus_domain,
    extremal_distance,
    extremal_width,
    grid_modulus,
    rectangle_domain,
)
from yoccoz.puzzle import build_puzzle
from yoccoz.registry import run_verification
from yoccoz.renorm import molecule_check

from test_angles import assembled_candidates, brute_force_admissible

ALPHA_BASILICA = (1 - math.sqrt(5)) / 2


def report(n, text):
    print(f"\nACCEPTANCE {n} PASS: {text}")


def test_criterion_1_angle_engine_exactness():
    t0 = time.time()
    for n in range(1, 11):
        assert len(periodic_angles(n)) == 2**n - 1
    checked = 0
    for n in range(1, 7):
        for cand in assembled_candidates(n):
            ok, reason = brute_force_admissible(cand)
            try:
                validate_portrait(cand)
                lib_ok = True
            except PortraitError:
                lib_ok = False
            assert lib_ok == ok, f"{cand}: oracle={ok} ({reason})"
            checked += 1
    dt = time.time() - t0
    assert dt < 10.0, f"criterion 1 runtime {dt:.1f}s exceeds 10s"
    report(1, f"2^n-1 counts for n<=10; oracle agreement on {checked} assembled "
              f"portraits of period <= 6 in {dt:.1f}s")


def test_criterion_2_ray_tracing_calibration():
    m = QuadraticMap(0)
    worst = 0.0
    for k in range(64):
        a = Angle(k, 64)
        tr = trace_ray(m, a, 1e-3)
        for z, g in zip(tr.points, tr.potentials):
            ref = math.exp(g) * complex(math.cos(2 * math.pi * a.turns),
                                        math.sin(2 * math.pi * a.turns))
            worst = max(worst, abs(z - ref))
    assert worst < 1e-9, f"radial deviation {worst}"

    mm = QuadraticMap(-1)
    rng = np.random.default_rng(11)
    residual = 0.0
    n = 0
    while n < 1000:
        z = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
        g = mm.green(z)
        if g.censored or g.value == 0:
            continue
        n += 1
        residual = max(residual, abs(mm.green(mm.f(z)).value - 2 * g.value))
    assert residual < 1e-8, f"functional-equation residual {residual}"
    report(2, f"64 radial rays deviate < {worst:.1e}; potential functional "
              f"equation residual < {residual:.1e} on 1000 escaping points")


def test_criterion_3_landing_correctness(centers):
    t0 = time.time()
    m = QuadraticMap(-1)
    t1 = land_ray(m, Angle(1, 3))
    t2 = land_ray(m, Angle(2, 3))
    assert t1.landed and t2.landed
    assert abs(t1.landing_point - ALPHA_BASILICA) < 1e-6
    assert abs(t2.landing_point - ALPHA_BASILICA) < 1e-6
    from yoccoz.dynamics import cluster_landings

    cl = cluster_landings(QuadraticMap(centers["rabbit"]),
                          [Angle(1, 7), Angle(2, 7), Angle(4, 7)])
    assert len(cl) == 1 and cl[0].resolved
    dt = time.time() - t0
    assert dt < 30.0, f"criterion 3 runtime {dt:.1f}s exceeds 30s"
    report(3, f"1/3 and 2/3 land at (1-sqrt5)/2 within 1e-6; rabbit triple "
              f"clusters to one class in {dt:.1f}s")


def test_criterion_4_puzzle_structure(centers):
    basilica = build_puzzle(QuadraticMap(-1), validate_portrait([["1/3", "2/3"]]))
    rabbit = build_puzzle(QuadraticMap(centers["rabbit"]),
                          validate_portrait([["1/7", "2/7", "4/7"]]))
    assert len(basilica.layer(0)) == 1 * (2 - 1) + 1
    assert len(rabbit.layer(0)) == 1 * (3 - 1) + 1
    for puz in (basilica, rabbit):
        for d in range(0, 7):
            layer = puz.layer(d)
            arcs = [a for p in layer for a in p.arcs]
            assert len(arcs) == len(set(arcs))  # tiling of the circle arcs
            assert len(arcs) == puz.portrait.ray_count_r * 2**d
        for d in range(1, 7):
            parents = {p.key for p in puz.layer(d - 1)}
            images = set()
            for child in puz.layer(d):
                containing = [q for q in puz.layer(d - 1) if child.support_inside(q)]
                assert len(containing) == 1  # refinement
                img = child.image()
                assert img.key in parents  # covering
                expected_degree = 2 if child == puz.critical_piece(d) else 1
                assert child.mapping_degree == expected_degree
                images.add(img.key)
            assert images == parents
    report(4, "depth-0 counts t(s-1)+1 for basilica and rabbit; tiling, "
              "refinement and covering degrees hold to depth 6")


def test_criterion_5_lemma_registry(centers):
    t0 = time.time()
    needed = (
        "critical_value_piece_single_vertex",
        "cycle_stars_disjoint",
        "buffers_disjoint_univalent",
        "nest_annulus_nondegenerate",
    )
    for name in ("airplane", "kokopelli", "period5"):
        rep = run_verification(QuadraticMap(centers[name]), (4, 4, 4))
        assert rep.decision.satisfied, name
        statuses = rep.statuses()
        for eid in needed:
            assert statuses[eid] == "pass", f"{name}: {eid} = {statuses[eid]}"
    dt = time.time() - t0
    assert dt < 300.0, f"criterion 5 runtime {dt:.1f}s exceeds 5 min"
    report(5, f"single-vertex value piece, disjoint stars, disjoint univalent "
              f"buffers, and the nondegenerate nest annulus pass on 3 "
              f"primitive centers (p = 3, 4, 5) in {dt:.1f}s")


def test_criterion_6_modulus_calibration():
    worst_annulus = 0.0
    for R in (math.e, math.e**2, 10.0):
        t0 = time.time()
        est = grid_modulus(annulus_domain(1.0, R, 512))
        dt = time.time() - t0
        true = math.log(R) / (2 * math.pi)
        rel = abs(est.value - true) / true
        worst_annulus = max(worst_annulus, rel)
        assert rel < 0.02, f"R={R}: rel error {rel}"
        assert dt < 60.0, f"R={R}: solve took {dt:.1f}s"
    sq = extremal_distance(rectangle_domain(1.0, 1.0, 512))
    r_long = extremal_distance(rectangle_domain(2.0, 1.0, 512, across="x"))
    r_short = extremal_distance(rectangle_domain(2.0, 1.0, 512, across="y"))
    assert abs(sq.value - 1.0) < 0.01
    assert abs(r_long.value - 2.0) / 2.0 < 0.01
    assert abs(r_short.value - 0.5) / 0.5 < 0.01
    d_each = extremal_distance(rectangle_domain(1.0, 1.0, 512, across="y"))
    d_series = extremal_distance(rectangle_domain(1.0, 2.0, 512, across="y"))
    series_res = abs(d_series.value - 2 * d_each.value) / d_series.value
    w_each = extremal_width(rectangle_domain(1.0, 1.0, 512, across="y"))
    w_par = extremal_width(rectangle_domain(2.0, 1.0, 512, across="y"))
    par_res = abs(w_par.value - 2 * w_each.value) / w_par.value
    assert series_res < 0.03 and par_res < 0.03
    report(6, f"round annuli within {100 * worst_annulus:.2f}% (< 2%); "
              f"rectangles within 1%; series/parallel residuals "
              f"{100 * series_res:.2f}%/{100 * par_res:.2f}% (< 3%)")


def test_criterion_7_molecule_decision_regression(centers):
    assert molecule_check(QuadraticMap(centers["airplane"]), (4, 4, 4)).satisfied
    assert not molecule_check(QuadraticMap(-1), (10, 10, 10)).satisfied

    params = [
        centers["airplane"],
        centers["kokopelli"],
        centers["period5"],
        -1.0,
        0.0,
        0.2,
        0.3,
        1j,
        -1.4011551890920505,  # infinitely satellite-renormalizable cascade
        -0.5 + 0.5j,
    ]

    def leq(a, b):
        return all(x <= y for x, y in zip(a, b))

    for c in params:
        m = QuadraticMap(c)
        lattice = {}
        for r in range(1, 6):
            for q in range(1, 6):
                for n in range(1, 6):
                    lattice[(r, q, n)] = molecule_check(m, (r, q, n)).satisfied
        for b1, v1 in lattice.items():
            if not v1:
                continue
            for b2, v2 in lattice.items():
                if leq(b1, b2):
                    assert v2, f"c={c}: satisfied at {b1} but not at larger {b2}"
    report(7, "airplane true at (4,4,4), basilica false at (10,10,10); "
              "decision monotone over the 5x5x5 bound lattice for 10 parameters")


def test_criterion_8_moduli_table_schema_determinism_gating(centers, tmp_path, capsys):
    c = centers["airplane"]
    flag = f"{c.real},{c.imag}"
    d1, d2 = tmp_path / "m1", tmp_path / "m2"
    for d in (d1, d2):
        code = cli_main(["moduli", "--c", flag, "--bounds", "4,4,4",
                         "--resolution", "128", "--out", str(d)])
        capsys.readouterr()
        assert code == 0
    b1 = (d1 / "moduli.json").read_bytes()
    assert b1 == (d2 / "moduli.json").read_bytes(), "moduli.json not byte-identical"
    doc = json.loads(b1)
    for key in ("c", "bounds", "parameters", "nest", "moduli", "bigon_distance",
                "transfer", "label", "config_hash"):
        assert key in doc, f"missing key {key}"
    for row in doc["moduli"]:
        assert set(row) == {"pair", "value", "refinement_delta", "resolution"}
        assert row["value"] > 0
    assert ("mod_ZY" in doc["transfer"]) or ("bullet" in doc["transfer"])
    # hypothesis gating: a parameter without the bounded combinatorics exits 4
    code = cli_main(["moduli", "--c", "-1,0", "--bounds", "4,4,4",
                     "--resolution", "128"])
    capsys.readouterr()
    assert code == 4
    report(8, "moduli table is schema-valid, byte-deterministic, and "
              "hypothesis-gated (exit 4 without the bounded combinatorics)")
