import numpy as np
import pytest

from lyapmotion import geometry as geo
from lyapmotion.errors import (
    DegenerateConfigurationError,
    InvalidArgumentError,
)

import oracles


def square(cx, cy, side=1.0):
    h = side / 2.0
    return geo.ConvexHull(np.array([
        [cx - h, cy - h], [cx + h, cy - h], [cx + h, cy + h], [cx - h, cy + h]]))


def box3(cx, cy, cz, side=1.0):
    h = side / 2.0
    corners = [[cx + sx * h, cy + sy * h, cz + sz * h]
               for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    return geo.ConvexHull(np.array(corners, dtype=float))


class TestConvexHull:
    def test_centroid_reference_default(self):
        h = square(1.0, 2.0)
        assert np.allclose(h.reference_point, [1.0, 2.0])

    def test_reference_outside_rejected(self):
        with pytest.raises(InvalidArgumentError):
            geo.ConvexHull(np.array([[0.0, 0], [1, 0], [0, 1]]), np.array([2.0, 2.0]))

    def test_reference_inside_accepted(self):
        h = geo.ConvexHull(np.array([[0.0, 0], [1, 0], [0, 1]]), np.array([0.25, 0.25]))
        assert np.allclose(h.reference_point, [0.25, 0.25])

    def test_degenerate_flagged_and_rejected(self):
        seg = geo.ConvexHull(np.array([[0.0, 0], [1, 0]]))
        assert seg.degenerate
        with pytest.raises(InvalidArgumentError):
            geo.signed_distance(seg, square(3, 0))

    def test_collinear_flagged(self):
        h = geo.ConvexHull(np.array([[0.0, 0], [1, 1], [2, 2]]))
        assert h.degenerate

    def test_translated(self):
        h = square(0, 0).translated(np.array([1.0, 1.0]))
        assert np.allclose(h.reference_point, [1.0, 1.0])
        assert np.allclose(h.vertices.mean(axis=0), [1.0, 1.0])


class TestSupport:
    def test_tie_breaks_to_lowest_index(self):
        # stored order puts (0.5, -0.5) before (0.5, 0.5)
        assert np.allclose(geo.support(square(0, 0), np.array([1.0, 0.0])), [0.5, -0.5])

    def test_triangle(self):
        tri = geo.ConvexHull(np.array([[0.0, 0], [1, 0], [0, 1]]))
        assert np.allclose(geo.support(tri, np.array([0.0, 1.0])), [0.0, 1.0])

    def test_zero_direction_rejected(self):
        with pytest.raises(InvalidArgumentError):
            geo.support(square(0, 0), np.array([0.0, 0.0]))


class TestGjkSeparation:
    def test_separated_squares(self):
        dist, wit, _ = geo.gjk_separation(square(0, 0), square(3, 0))
        assert dist == pytest.approx(2.0, abs=1e-9)
        assert np.linalg.norm(wit.point_on_a - wit.point_on_b) == pytest.approx(dist, abs=1e-6)

    def test_touching_squares(self):
        dist, _, _ = geo.gjk_separation(square(0, 0), square(1, 0))
        assert dist == 0.0

    def test_self_intersection(self):
        dist, _, _ = geo.gjk_separation(square(0, 0), square(0, 0))
        assert dist == 0.0


class TestEpaPenetration:
    def test_half_overlap(self):
        a, b = square(0, 0), square(0.5, 0)
        _, _, simplex = geo.gjk_separation(a, b)
        depth, wit = geo.epa_penetration(a, b, simplex)
        assert depth == pytest.approx(0.5, abs=1e-9)
        assert np.linalg.norm(wit.point_on_a - wit.point_on_b) == pytest.approx(depth, abs=1e-6)

    def test_full_overlap(self):
        a = square(0, 0)
        _, _, simplex = geo.gjk_separation(a, square(0, 0))
        depth, _ = geo.epa_penetration(a, square(0, 0), simplex)
        assert depth == pytest.approx(1.0, abs=1e-9)

    def test_non_enclosing_simplex_rejected(self):
        a, b = square(0, 0), square(3, 0)
        _, _, simplex = geo.gjk_separation(a, b)
        with pytest.raises(InvalidArgumentError):
            geo.epa_penetration(a, b, simplex)


class TestSignedDistance:
    def test_trio(self):
        a = square(0, 0)
        assert geo.signed_distance(a, square(3, 0)).signed_distance == pytest.approx(2.0, abs=1e-9)
        assert geo.signed_distance(a, square(0.5, 0)).signed_distance == pytest.approx(-0.5, abs=1e-9)
        assert geo.signed_distance(a, square(1, 0)).signed_distance == 0.0

    def test_3d_boxes(self):
        assert geo.signed_distance(box3(0, 0, 0), box3(3, 0, 0)).signed_distance == pytest.approx(2.0, abs=1e-9)
        assert geo.signed_distance(box3(0, 0, 0), box3(0.5, 0, 0)).signed_distance == pytest.approx(-0.5, abs=1e-9)
        assert geo.signed_distance(box3(0, 0, 0), box3(1, 0, 0)).signed_distance == 0.0

    def test_witness_consistency_separated(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            va = oracles.random_convex_polygon(rng, center=(-1.5, 0))
            vb = oracles.random_convex_polygon(rng, center=(1.5, 0))
            wit = geo.signed_distance(geo.ConvexHull(va), geo.ConvexHull(vb))
            if wit.signed_distance > 0:
                gap = np.linalg.norm(wit.point_on_a - wit.point_on_b)
                assert gap == pytest.approx(wit.signed_distance, abs=1e-6)

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            off = rng.uniform(-2, 2, size=2)
            va = oracles.random_convex_polygon(rng)
            vb = oracles.random_convex_polygon(rng, center=off)
            a, b = geo.ConvexHull(va), geo.ConvexHull(vb)
            sab = geo.signed_distance(a, b).signed_distance
            sba = geo.signed_distance(b, a).signed_distance
            assert abs(sab - sba) <= 1e-6

    def test_translation_invariance(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            va = oracles.random_convex_polygon(rng)
            vb = oracles.random_convex_polygon(rng, center=rng.uniform(-2, 2, size=2))
            t = rng.uniform(-5, 5, size=2)
            s0 = geo.signed_distance(geo.ConvexHull(va), geo.ConvexHull(vb)).signed_distance
            s1 = geo.signed_distance(geo.ConvexHull(va + t), geo.ConvexHull(vb + t)).signed_distance
            assert abs(s0 - s1) <= 1e-6

    def test_oracle_equivalence_2d_sample(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            off = rng.uniform(-2.5, 2.5, size=2)
            va = oracles.random_convex_polygon(rng)
            vb = oracles.random_convex_polygon(rng, center=off)
            sd = geo.signed_distance(geo.ConvexHull(va), geo.ConvexHull(vb)).signed_distance
            ref = oracles.signed_distance_oracle(va, vb)
            assert sd == pytest.approx(ref, abs=1e-3)

    def test_oracle_equivalence_3d_sample(self):
        rng = np.random.default_rng(19)
        for _ in range(12):
            off = rng.uniform(-2.2, 2.2, size=3)
            va = oracles.random_convex_polytope(rng)
            vb = oracles.random_convex_polytope(rng, center=off)
            sd = geo.signed_distance(geo.ConvexHull(va), geo.ConvexHull(vb)).signed_distance
            ref = oracles.signed_distance_oracle(va, vb)
            assert sd == pytest.approx(ref, abs=1e-3)

    def test_normal_is_sd_gradient(self):
        # finite-difference check of the increasing-sd convention, both branches
        rng = np.random.default_rng(23)
        h = 1e-6
        for off in ([2.4, 0.3], [0.4, 0.1], [0.0, 0.55]):
            a, b = square(0, 0), square(*off)
            wit = geo.signed_distance(a, b)
            for k in range(2):
                e = np.zeros(2)
                e[k] = h
                up = geo.signed_distance(a.translated(e), b).signed_distance
                dn = geo.signed_distance(a.translated(-e), b).signed_distance
                fd = (up - dn) / (2 * h)
                assert fd == pytest.approx(wit.normal[k], abs=1e-4)


class TestGamma:
    def test_separated(self):
        assert geo.gamma(square(0, 0), square(3, 0)) == pytest.approx(3.0, abs=1e-9)

    def test_touching_is_one(self):
        assert geo.gamma(square(0, 0), square(1, 0)) == pytest.approx(1.0, abs=1e-6)

    def test_penetrating_below_one(self):
        assert geo.gamma(square(0, 0), square(0.5, 0)) == pytest.approx(0.5, abs=1e-9)

    def test_coincident_references_rejected(self):
        with pytest.raises(InvalidArgumentError):
            geo.gamma(square(0, 0), square(0, 0, side=2.0))

    def test_non_positive_denominator_rejected(self):
        with pytest.raises(DegenerateConfigurationError):
            geo.gamma_from_sd(np.zeros(2), np.array([1.0, 0.0]), 1.5)

    def test_monotone_in_separation(self):
        rng = np.random.default_rng(29)
        for _ in range(10):
            va = oracles.random_convex_polygon(rng)
            vb = oracles.random_convex_polygon(rng)
            ray = rng.normal(size=2)
            ray /= np.linalg.norm(ray)
            gammas = []
            for c in np.linspace(2.5, 8.0, 12):
                a = geo.ConvexHull(va)
                b = geo.ConvexHull(vb + c * ray)
                if geo.signed_distance(a, b).signed_distance < 0:
                    continue
                gammas.append(geo.gamma(a, b))
            diffs = np.diff(gammas)
            assert np.all(diffs >= -1e-9)
