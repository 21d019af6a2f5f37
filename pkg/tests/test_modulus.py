import math

import numpy as np
import pytest

from yoccoz.dynamics import QuadraticMap, find_center
from yoccoz.modulus import (
    DiskFamily,
    Disconnected,
    HypothesisFailure,
    InconclusiveContainment,
    annulus_domain,
    bigon_distance,
    disks_domain,
    eccentric_annulus_modulus,
    extremal_distance,
    extremal_width,
    grid_modulus,
    piece_modulus,
    quasi_additivity_report,
    rectangle_domain,
    transfer_default_configuration,
    transfer_report,
)
from yoccoz.renorm import alpha_puzzle, build_nest, renorm_params

N = 512


@pytest.fixture(scope="module")
def airplane_setup():
    m = QuadraticMap(find_center(3, -1.8))
    data = renorm_params(m, (4, 4, 4))
    puz = alpha_puzzle(m, data)
    nest = build_nest(m, data, puzzle=puz)
    return m, data, puz, nest


class TestCalibration:
    @pytest.mark.parametrize("R", [math.e, math.e**2, 10.0])
    def test_round_annulus(self, R):
        est = grid_modulus(annulus_domain(1.0, R, N))
        true = math.log(R) / (2 * math.pi)
        assert abs(est.value - true) / true < 0.02
        assert est.refinement_delta < 0.05 * est.value

    def test_unit_square(self):
        est = extremal_distance(rectangle_domain(1.0, 1.0, N))
        assert abs(est.value - 1.0) < 0.01

    def test_rectangle_and_reciprocal(self):
        d_long = extremal_distance(rectangle_domain(2.0, 1.0, N, across="x"))
        d_short = extremal_distance(rectangle_domain(2.0, 1.0, N, across="y"))
        assert abs(d_long.value - 2.0) < 0.02
        assert abs(d_short.value - 0.5) < 0.005
        # swapping the side pairs gives the conjugate quadrilateral
        assert abs(d_long.value * d_short.value - 1.0) < 0.02

    def test_width_is_reciprocal_of_distance(self):
        dom = rectangle_domain(2.0, 1.0, N, across="x")
        d = extremal_distance(dom)
        w = extremal_width(dom)
        assert d.value * w.value == pytest.approx(1.0, abs=1e-12)

    def test_eccentric_annulus_formula(self):
        # concentric case reduces to log(R/r)/2pi
        assert eccentric_annulus_modulus(5.0, 1.0, 0.0) == pytest.approx(
            math.log(5.0) / (2 * math.pi), abs=1e-12
        )
        # grid cross-check of the off-center formula
        est = grid_modulus(disks_domain(5.0, [(1.5 + 0j, 1.0)], N))
        assert abs(est.value - eccentric_annulus_modulus(5.0, 1.0, 1.5)) < 0.02 * est.value


class TestLaws:
    def test_series_law(self):
        # two stacked 1x1 squares = a 1x2 rectangle across y
        d_each = extremal_distance(rectangle_domain(1.0, 1.0, N, across="y"))
        d_stack = extremal_distance(rectangle_domain(1.0, 2.0, N, across="y"))
        assert abs(d_stack.value - 2 * d_each.value) / d_stack.value < 0.03

    def test_parallel_law(self):
        # two side-by-side 1x1 squares = a 2x1 rectangle across y: widths add
        w_each = extremal_width(rectangle_domain(1.0, 1.0, N, across="y"))
        w_two = extremal_width(rectangle_domain(2.0, 1.0, N, across="y"))
        assert abs(w_two.value - 2 * w_each.value) / w_two.value < 0.03

    def test_monotone_in_inner_continuum(self):
        # enlarging the inner disk never increases the modulus (exact in
        # the discrete setting: more Dirichlet constraints)
        vals = [grid_modulus(annulus_domain(r, 10.0, 256)).value for r in (1.0, 2.0, 3.0)]
        assert vals[0] >= vals[1] >= vals[2]

    def test_degree_two_cover_halves_modulus(self):
        # the square map carries A(1, sqrt(R)) onto A(1, R) as a double
        # cover, so the modulus halves
        R = 16.0
        big = grid_modulus(annulus_domain(1.0, R, N)).value
        half = grid_modulus(annulus_domain(1.0, math.sqrt(R), N)).value
        assert abs(half - big / 2) / big < 0.03

    def test_grotzsch_superadditivity(self):
        # disjoint nested annuli: mod(1,9) >= mod(1,3) + mod(3,9)
        m_full = grid_modulus(annulus_domain(1.0, 9.0, N)).value
        m1 = grid_modulus(annulus_domain(1.0, 3.0, N)).value
        m2 = grid_modulus(annulus_domain(3.0, 9.0, N)).value
        delta = 2 * grid_modulus(annulus_domain(1.0, 9.0, N)).refinement_delta
        assert m_full >= m1 + m2 - 2 * delta - 0.01 * m_full

    def test_disconnected(self):
        with pytest.raises(Disconnected):
            grid_modulus(annulus_domain(1.02, 1.0, 128))


class TestQuasiAdditivity:
    def test_two_symmetric_disks(self):
        rep = quasi_additivity_report(
            DiskFamily(10.0, ((4 + 0j, 0.5), (-4 + 0j, 0.5)), eta=0.25), resolution=384
        )
        assert rep["hypothesis_met"]
        assert rep["conclusion_holds"]
        assert rep["m"] == 2

    def test_single_disk_sanity(self):
        rep = quasi_additivity_report(DiskFamily(10.0, ((0j, 0.5),), eta=0.5), resolution=384)
        assert rep["m"] == 1
        assert rep["conclusion_holds"]  # mod < 2 delta / eta with eta <= 1/2

    def test_hypothesis_violating_row(self):
        # a huge collar demand: eta * delta exceeds every collar modulus
        rep = quasi_additivity_report(
            DiskFamily(10.0, ((4 + 0j, 0.5), (-4 + 0j, 0.5)), eta=0.999), resolution=256
        )
        assert not rep["hypothesis_met"]
        assert rep["status"] == "hypothesis not met"


class TestPieceModuli:
    def test_nest_annulus_positive(self, airplane_setup):
        m, data, puz, nest = airplane_setup
        est = piece_modulus(puz, nest.levels[0], nest.levels[1], resolution=384)
        assert est.value > 0
        assert "planar" in est.label

    def test_monotone_under_inclusion(self, airplane_setup):
        # deeper inner piece -> larger annulus modulus
        m, data, puz, nest = airplane_setup
        e0 = nest.levels[0]
        e1 = nest.levels[1]
        deeper = nest.little_julia_proxy()
        m1 = piece_modulus(puz, e0, e1, resolution=256).value
        m2 = piece_modulus(puz, e0, deeper, resolution=256).value
        assert m2 >= m1 - 0.01 * m1

    def test_inconclusive_containment(self, airplane_setup):
        m, data, puz, nest = airplane_setup
        y2 = puz.critical_piece(2)
        y1 = puz.critical_piece(1)
        with pytest.raises(InconclusiveContainment):
            piece_modulus(puz, y1, y2, resolution=128)  # shares boundary rays

    def test_bigon_positive_and_symmetric(self, airplane_setup):
        m, data, puz, nest = airplane_setup
        y1 = puz.critical_piece(1).at_equipotential(3)
        a = data.alpha_point.location
        d1 = bigon_distance(puz, y1, a, -a, resolution=384)
        assert 0 < d1.value < math.inf
        d2 = bigon_distance(puz, y1, -a, a, resolution=384)
        assert d2.value == pytest.approx(d1.value, rel=1e-9)
        # refinement trend recorded
        assert d1.refinement_delta >= 0


class TestTransfer:
    def test_report_rows(self, airplane_setup):
        m, data, puz, nest = airplane_setup
        Y, Z, times = transfer_default_configuration(puz, data, nest)
        rep = transfer_report(m, data, nest, puz, Y, Z, times, resolution=256)
        assert rep["p"] == 3
        assert rep["mod_ZY"] > 0 and rep["mod_Echi_K"] > 0
        assert rep["m"] == len(times)
        assert all(row["degree"] <= 1024 for row in rep["pullbacks"])

    def test_time_window_violation(self, airplane_setup):
        m, data, puz, nest = airplane_setup
        Y, Z, times = transfer_default_configuration(puz, data, nest)
        with pytest.raises(HypothesisFailure):
            transfer_report(m, data, nest, puz, Y, Z, [times[0], times[0] + 2 * 3], resolution=128)

    def test_degree_cap_violation(self, airplane_setup):
        m, data, puz, nest = airplane_setup
        Y, Z, times = transfer_default_configuration(puz, data, nest)
        with pytest.raises(HypothesisFailure):
            transfer_report(m, data, nest, puz, Y, Z, times, degree_cap=1, resolution=128)
