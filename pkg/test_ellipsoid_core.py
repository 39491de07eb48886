"""Tests for ellipsoid_core: ball automorphisms, Aut(E_p) and proper maps between ellipsoids"""

import mpmath
import numpy as np
import pytest

from ellipsoid_core import (
    BallAut,
    EllipsoidAut,
    EllipsoidDomain,
    EllipsoidProperMap,
    EllipsoidVerdict,
    ball_aut,
    disc_mobius,
    ep_aut,
    ep_aut_eval,
    ep_exists,
    ep_membership,
    ep_modulus_residual,
    ep_preimage_candidates,
    ep_proper,
    ep_proper_canonical,
    ep_proper_eval,
    ep_proper_mixed,
    identity_aut,
    landucci_residual,
    mixing_r,
    random_ball_point,
    random_ellipsoid_aut,
    random_unitary,
)
from exponent_core import parse_exponent_vec
from hartogs_errors import CenterTooCloseToSphere, InvalidMap, NoProperMap, NotInDomain


def ellipsoid(text):
    return EllipsoidDomain(parse_exponent_vec(text))


def boundary_points(E, rng, count):
    points = []
    for _ in range(count):
        direction = rng.normal(size=E.n) + 1j * rng.normal(size=E.n)
        s = E.modulus_sum(direction)
        points.append(direction / s ** (1.0 / (2.0 * E.values)))
    return points


def recentred_counterexample():
    """Ψ_(2,2) ∘ φ ∘ Ψ_(2,2) with φ a recentred ball automorphism"""
    source, target = ellipsoid("2,2"), ellipsoid("1/2,1/2")
    ball = ellipsoid("1,1")
    phi = ep_aut(ball, ball_aut([0.3, 0.0]), [], (0, 1))
    return ep_proper(source, target, (0, 1), (2, 2), phi)


class TestMembership:
    def test_examples(self):
        assert ep_membership(ellipsoid("1,1"), [0.6, 0.8]) == EllipsoidVerdict.BOUNDARY
        assert ep_membership(ellipsoid("1,1"), [0, 0]) == EllipsoidVerdict.INTERIOR
        assert ep_membership(ellipsoid("2,2"), [0.9, 0.9]) == EllipsoidVerdict.OUTSIDE

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            ep_membership(ellipsoid("1,1"), [0.1])

    def test_exists(self):
        assert ep_exists(parse_exponent_vec("2,2"), parse_exponent_vec("1/2,1/2")) == (0, 1)
        assert ep_exists(parse_exponent_vec("3,5"), parse_exponent_vec("3,5")) == (0, 1)
        assert ep_exists(parse_exponent_vec("2,3"), parse_exponent_vec("2,2")) is None


class TestBallAut:
    def test_zero_center_is_identity(self):
        H = ball_aut([0.0, 0.0])
        assert H.fixes_origin
        np.testing.assert_allclose(H.Q, np.eye(2))
        np.testing.assert_allclose(H([0.2, -0.1j]), [0.2, -0.1j])

    def test_sends_center_to_origin(self):
        H = ball_aut([0.5, 0.0])
        assert np.linalg.norm(H([0.5, 0.0])) < 1e-12
        assert H.identity_residual() < 1e-12

    def test_matrix_identity_for_random_centers(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a = random_ball_point(3, rng, radius=0.95)
            H = ball_aut(a, random_unitary(3, rng))
            assert H.identity_residual() < 1e-12
            assert np.linalg.norm(H(a)) < 1e-12

    def test_maps_ball_into_ball(self):
        rng = np.random.default_rng(11)
        H = ball_aut(random_ball_point(2, rng, radius=0.8), random_unitary(2, rng))
        for _ in range(100):
            assert np.linalg.norm(H(random_ball_point(2, rng))) < 1.0

    def test_center_too_close(self):
        with pytest.raises(CenterTooCloseToSphere):
            ball_aut([1.0, 0.0])

    def test_inverse_and_compose(self):
        rng = np.random.default_rng(3)
        G = ball_aut(random_ball_point(2, rng, 0.6), random_unitary(2, rng))
        H = ball_aut(random_ball_point(2, rng, 0.6), random_unitary(2, rng))
        composed = G.compose(H)
        assert composed.identity_residual() < 1e-10
        for _ in range(20):
            z = random_ball_point(2, rng, 0.9)
            np.testing.assert_allclose(G.inverse()(G(z)), z, atol=1e-10)
            np.testing.assert_allclose(composed(z), G(H(z)), atol=1e-10)

    def test_disc_mobius(self):
        phi = disc_mobius(0.5)
        assert phi([0.2])[0] == pytest.approx((0.2 - 0.5) / (1 - 0.1))

    def test_round_trip_through_dict(self):
        rng = np.random.default_rng(5)
        H = ball_aut(random_ball_point(2, rng, 0.5), random_unitary(2, rng))
        restored = BallAut.from_dict(H.to_dict(), 2)
        z = random_ball_point(2, rng, 0.9)
        np.testing.assert_allclose(restored(z), H(z), atol=1e-14)


class TestEllipsoidAut:
    def test_identity(self):
        E = ellipsoid("1,3/2,2")
        A = identity_aut(E)
        assert A.is_identity
        np.testing.assert_allclose(A([0.1, 0.2j, 0.3]), [0.1, 0.2j, 0.3])

    def test_recentred_value(self):
        E = ellipsoid("1,2")
        A = ep_aut(E, ball_aut([0.5]), [1.0], (0, 1))
        z1, z2 = mpmath.mpf("0.5"), mpmath.mpf("0.3")
        a = mpmath.mpf("0.5")
        factor = mpmath.sqrt(1 - a ** 2) / (1 - z1 * a)
        expected = [0.0, float(z2 * mpmath.sqrt(factor))]
        np.testing.assert_allclose(ep_aut_eval(A, [0.5, 0.3]), expected, atol=1e-14)

    def test_outside_point(self):
        A = identity_aut(ellipsoid("1,2"))
        with pytest.raises(NotInDomain):
            ep_aut_eval(A, [1.0, 1.0])

    def test_sigma_must_fix_exponents(self):
        E = ellipsoid("2,3")
        with pytest.raises(InvalidMap) as info:
            ep_aut(E, BallAut.identity(0), [1.0, 1.0], (1, 0))
        assert any("sigma" in v for v in info.value.violations)

    def test_non_unimodular_scalar(self):
        with pytest.raises(InvalidMap):
            ep_aut(ellipsoid("2,3"), BallAut.identity(0), [2.0, 1.0], (0, 1))

    @pytest.mark.parametrize("text", ["1,1,2", "1,2,2", "3/2,1,L"])
    def test_preserves_boundary(self, text):
        E = ellipsoid(text)
        rng = np.random.default_rng(17)
        A = random_ellipsoid_aut(E, rng, fix_origin=False)
        for z in boundary_points(E, rng, 50):
            assert abs(E.modulus_sum(A(z)) - 1.0) < 1e-10

    def test_inverse_and_compose(self):
        E = ellipsoid("1,1,2,2")
        rng = np.random.default_rng(23)
        A = random_ellipsoid_aut(E, rng, fix_origin=False)
        B = random_ellipsoid_aut(E, rng, fix_origin=False)
        inverse, composed = A.inverse(), A.compose(B)
        for z in boundary_points(E, rng, 100):
            z = 0.9 * z
            np.testing.assert_allclose(inverse(A(z)), z, atol=1e-10)
            np.testing.assert_allclose(composed(z), A(B(z)), atol=1e-10)

    def test_round_trip_through_dict(self):
        E = ellipsoid("1,1,3")
        rng = np.random.default_rng(29)
        A = random_ellipsoid_aut(E, rng, fix_origin=False)
        restored = EllipsoidAut.from_dict(E, A.to_dict())
        z = np.array([0.2, 0.1j, 0.3])
        np.testing.assert_allclose(restored(z), A(z), atol=1e-14)


class TestProperMaps:
    def test_canonical_powers(self):
        M = ep_proper_canonical(parse_exponent_vec("4,2"), parse_exponent_vec("2,1"))
        assert M.sigma == (0, 1) and M.r == (2, 2)
        assert M.is_canonical
        z = np.array([0.3 + 0.1j, -0.4j])
        np.testing.assert_allclose(ep_proper_eval(M, z), z ** 2, atol=1e-14)

    def test_canonical_identity(self):
        p = parse_exponent_vec("3,1/2")
        M = ep_proper_canonical(p, p)
        np.testing.assert_allclose(M([0.2, 0.3j]), [0.2, 0.3j], atol=1e-14)

    def test_no_map(self):
        with pytest.raises(NoProperMap):
            ep_proper_canonical(parse_exponent_vec("2,3"), parse_exponent_vec("2,2"))

    def test_recentred_map_is_proper(self):
        M = recentred_counterexample()
        rng = np.random.default_rng(31)
        for z in boundary_points(M.source, rng, 100):
            assert abs(M.target.modulus_sum(M(z)) - 1.0) < 1e-8
            assert M.target.modulus_sum(M(0.8 * z)) < 1.0

    def test_recentred_map_escapes_landucci_form(self):
        M = recentred_counterexample()
        rng = np.random.default_rng(37)
        samples = [0.7 * z for z in boundary_points(M.source, rng, 40)]
        assert landucci_residual(M, samples) > 1e-6

    def test_canonical_map_has_landucci_form(self):
        M = ep_proper_canonical(parse_exponent_vec("4,2"), parse_exponent_vec("2,1"))
        rng = np.random.default_rng(41)
        samples = [0.7 * z for z in boundary_points(M.source, rng, 40)]
        assert landucci_residual(M, samples) < 1e-9

    def test_invalid_r(self):
        source, target = ellipsoid("2,2"), ellipsoid("1/2,1/2")
        intermediate = ellipsoid("2/3,2/3")
        with pytest.raises(InvalidMap) as info:
            ep_proper(source, target, (0, 1), (3, 3), identity_aut(intermediate))
        assert any("not a natural number" in v for v in info.value.violations)

    def test_mixing_r(self):
        p, q = parse_exponent_vec("2,3"), parse_exponent_vec("1,1")
        assert mixing_r(p, q, (0, 1), [True, True]) == (2, 3)
        assert mixing_r(p, q, (0, 1), [False, True]) == (2, 3)
        with pytest.raises(InvalidMap):
            mixing_r(parse_exponent_vec("3/2,1"), q, (0, 1), [True, False])

    def test_mixed_constructor_matches_explicit_map(self):
        M = ep_proper_mixed(parse_exponent_vec("2,2"), parse_exponent_vec("1/2,1/2"), (0, 1), [True, True],
                            ball_aut([0.3, 0.0]))
        reference = recentred_counterexample()
        assert M.r == (2, 2) and not M.fixes_origin
        rng = np.random.default_rng(43)
        for z in boundary_points(M.source, rng, 20):
            np.testing.assert_allclose(M(0.9 * z), reference(0.9 * z), atol=1e-14)

    def test_mixed_constructor_with_scalars(self):
        p, q = parse_exponent_vec("1,3/2"), parse_exponent_vec("1,3/4")
        M = ep_proper_mixed(p, q, (0, 1), [True, False], ball_aut([0.4j]), [1j])
        assert M.r == (1, 2)
        assert M.phi.domain.p == parse_exponent_vec("1,3/4")
        rng = np.random.default_rng(47)
        for z in boundary_points(M.source, rng, 50):
            assert abs(M.target.modulus_sum(M(z)) - 1.0) < 1e-9
            assert ep_modulus_residual(M, 0.7 * z) < 1e-12

    def test_mixed_constructor_checks_ball_size(self):
        with pytest.raises(InvalidMap):
            ep_proper_mixed(parse_exponent_vec("1,3/2"), parse_exponent_vec("1,3/4"), (0, 1), [True, False],
                            ball_aut([0.3, 0.0]))
        with pytest.raises(InvalidMap):
            ep_proper_mixed(parse_exponent_vec("2,2"), parse_exponent_vec("1/2,1/2"), (0, 0), [True, True],
                            BallAut.identity(2))

    def test_modulus_identity(self):
        rng = np.random.default_rng(53)
        recentred = recentred_counterexample()
        canonical = ep_proper_canonical(parse_exponent_vec("4,2"), parse_exponent_vec("2,1"))
        for M in (recentred, canonical):
            for z in boundary_points(M.source, rng, 50):
                assert ep_modulus_residual(M, 0.8 * z) < 1e-12
        assert canonical.modulus_factor(np.array([0.3, 0.2])) == 1.0
        z = np.array([0.9, 0.1])
        assert recentred.modulus_factor(z) == pytest.approx(0.91 / (1.0 - 0.3 * 0.81) ** 2)
        assert ep_modulus_residual(recentred, z, 0.5 * recentred(z)) > 0.1

    def test_round_trip_through_dict(self):
        M = recentred_counterexample()
        restored = EllipsoidProperMap.from_dict(M.to_dict())
        z = np.array([0.4, 0.2j])
        np.testing.assert_allclose(restored(z), M(z), atol=1e-14)

    def test_preimages(self):
        M = recentred_counterexample()
        z = np.array([0.3 + 0.2j, -0.25j])
        candidates = ep_preimage_candidates(M, M(z))
        # c = (2,2) and r = (2,2): sixteen branches before filtering
        assert len(candidates) == 16
        assert any(np.allclose(c, z, atol=1e-9) for c in candidates)
        for c in candidates:
            np.testing.assert_allclose(M(c), M(z), atol=1e-9)
