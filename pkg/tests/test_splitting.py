import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amacsim.infocore import Distribution, DmcChannel, ProductInput, ValidationError
from amacsim.regions import Ordering, dominant_face_contains, polytope, vertex
from amacsim.splitting import (
    SweepRangeError,
    lift_channel,
    lifted_inputs,
    max_law,
    split_distribution,
    split_for_edge,
    two_sender_split_point,
)

from conftest import (
    EX4_B12,
    example4_channel,
    random_channel,
    random_distribution,
    uniform_inputs,
)


class TestSplitDistribution:
    def test_theta_one(self):
        p = Distribution.uniform(2)
        p_a, p_b = split_distribution(p, 1.0)
        np.testing.assert_allclose(p_a.probs, p.probs, atol=1e-15)
        np.testing.assert_allclose(p_b.probs, [1.0, 0.0], atol=1e-15)

    def test_theta_half_binary(self):
        p = Distribution.uniform(2)
        p_a, p_b = split_distribution(p, 0.5)
        np.testing.assert_allclose(p_a.probs, [1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(p_b.probs, p.probs, atol=1e-15)

    def test_theta_07(self):
        p = Distribution.uniform(2)
        p_a, p_b = split_distribution(p, 0.7)
        assert p_a.cdf()[0] == pytest.approx(5 / 7, abs=1e-15)
        assert p_b.cdf()[0] == pytest.approx(0.7, abs=1e-15)
        assert max_law(p_a, p_b)[0] == pytest.approx(0.5, abs=1e-15)

    def test_theta_bounds(self):
        p = Distribution.uniform(2)
        with pytest.raises(ValidationError):
            split_distribution(p, 0.0)
        with pytest.raises(ValidationError):
            split_distribution(p, 1.2)

    def test_zero_prefix_handled(self):
        p = Distribution(np.array([0.0, 0.4, 0.6]))
        p_a, p_b = split_distribution(p, 0.3)
        np.testing.assert_allclose(max_law(p_a, p_b), p.probs, atol=1e-12)

    def test_recombination_100_random(self):
        rng = np.random.default_rng(4242)
        for _ in range(100):
            m = int(rng.integers(2, 7))
            raw = rng.gamma(1.0, size=m)
            p = Distribution(raw / raw.sum())
            theta = float(rng.uniform(1e-6, 1.0))
            p_a, p_b = split_distribution(p, theta)
            np.testing.assert_allclose(max_law(p_a, p_b), p.probs, atol=1e-12)
            # CDF factorization exact up to float rounding
            np.testing.assert_allclose(p_a.cdf() * p_b.cdf(), p.cdf(), atol=1e-15)


class TestLiftChannel:
    def test_xb_zero_recovers_base(self, rng):
        w = random_channel(rng, (3, 2), 3)
        lifted = lift_channel(w, 0)
        for xa in range(3):
            np.testing.assert_allclose(
                lifted.channel.transition[xa, 0], w.transition[xa], atol=1e-15
            )

    def test_saturated_input(self):
        w = example4_channel()
        lifted = lift_channel(w, 0)
        for xb in range(2):
            np.testing.assert_allclose(
                lifted.channel.transition[1, xb], w.transition[1], atol=1e-15
            )

    def test_exact_max_equality(self, rng):
        w = random_channel(rng, (2, 2), 2)
        lifted = lift_channel(w, 1)
        for x1 in range(2):
            for xa in range(2):
                for xb in range(2):
                    np.testing.assert_array_equal(
                        lifted.channel.transition[x1, xa, xb],
                        w.transition[x1, max(xa, xb)],
                    )

    def test_output_distribution_preserved(self, rng):
        # split inputs pushed through the lifted channel reproduce the base
        # output law exactly
        w = random_channel(rng, (4, 2), 3)
        p = random_distribution(rng, 4)
        q = random_distribution(rng, 2)
        p_a, p_b = split_distribution(p, 0.7)
        lifted = lift_channel(w, 0)
        base = np.einsum("i,j,ijy->y", p.probs, q.probs, w.transition)
        got = np.einsum("a,b,j,abjy->y", p_a.probs, p_b.probs, q.probs, lifted.channel.transition)
        np.testing.assert_allclose(got, base, atol=1e-12)

    def test_sum_bound_preserved(self, rng):
        # b_{W'}([K+1]) under (p_a, p_b, rest) equals b_W([K]) under (p, rest)
        for _ in range(5):
            w = random_channel(rng, (3, 2), 3)
            p = random_distribution(rng, 3)
            q = random_distribution(rng, 2)
            theta = float(rng.uniform(0.05, 1.0))
            p_a, p_b = split_distribution(p, theta)
            base = polytope(w, ProductInput((p, q)))
            lifted = lift_channel(w, 0)
            lp = polytope(lifted.channel, ProductInput((p_a, p_b, q)))
            assert lp.sum_bound() == pytest.approx(base.sum_bound(), abs=1e-9)

    def test_bad_index(self):
        with pytest.raises(ValidationError):
            lift_channel(example4_channel(), 5)


class TestTwoSenderSplitPoint:
    def test_vertex_targets_degenerate(self):
        w = example4_channel()
        p = q = Distribution.uniform(2)
        poly = polytope(w, ProductInput((p, q)))
        v12 = vertex(poly, Ordering((0, 1)))
        theta, (ra, rb), order, full = two_sender_split_point(w, p, q, v12)
        # one virtual sender carries (almost) zero rate
        assert min(ra, rb) == pytest.approx(0.0, abs=1e-3)
        assert ra + rb == pytest.approx(v12[0], abs=1e-4)
        v21 = vertex(poly, Ordering((1, 0)))
        theta2, (ra2, rb2), _, _ = two_sender_split_point(w, p, q, v21)
        assert min(ra2, rb2) == pytest.approx(0.0, abs=1e-3)
        assert theta != pytest.approx(theta2, abs=1e-3)

    def test_face_midpoint(self):
        w = example4_channel()
        p = q = Distribution.uniform(2)
        target = (EX4_B12 / 2, EX4_B12 / 2)
        theta, (ra, rb), order, full = two_sender_split_point(w, p, q, target)
        assert ra + rb == pytest.approx(target[0], abs=1e-4)
        assert full[2] == pytest.approx(target[1], abs=1e-4)
        # the returned point is the ordering vertex of the lifted polytope
        p_a, p_b = split_distribution(p, theta)
        lifted = lift_channel(w, 0)
        lp = polytope(lifted.channel, ProductInput((p_a, p_b, q)))
        np.testing.assert_allclose(vertex(lp, order), full, atol=1e-9)
        assert dominant_face_contains(lp, full, 1e-6)

    def test_off_face_target_rejected(self):
        w = example4_channel()
        p = q = Distribution.uniform(2)
        with pytest.raises(ValidationError):
            two_sender_split_point(w, p, q, (0.0, 0.0))

    def test_50_random_targets(self):
        rng = np.random.default_rng(515)
        done = 0
        while done < 50:
            w = random_channel(rng, (2, 2), int(rng.integers(2, 4)))
            p = random_distribution(rng, 2)
            q = random_distribution(rng, 2)
            poly = polytope(w, ProductInput((p, q)))
            v1 = vertex(poly, Ordering((0, 1)))
            v2 = vertex(poly, Ordering((1, 0)))
            lam = float(rng.uniform())
            target = lam * v1 + (1 - lam) * v2
            theta, (ra, rb), order, full = two_sender_split_point(w, p, q, target)
            assert ra + rb == pytest.approx(target[0], abs=1e-4)
            assert full[2] == pytest.approx(target[1], abs=1e-4)
            done += 1


def random_edge_instance(rng):
    """Random 3-sender channel with a type-(0,2) edge point sampled mid-edge."""
    w = random_channel(rng, (2, 2, 2), int(rng.integers(2, 5)))
    pin = ProductInput(tuple(random_distribution(rng, 2) for _ in range(3)))
    poly = polytope(w, pin)
    # the type-(0,2) edge runs between the (1,0,2)- and (1,2,0)-ordering vertices
    va = vertex(poly, Ordering((1, 0, 2)))
    vb = vertex(poly, Ordering((1, 2, 0)))
    lam = float(rng.uniform(0.25, 0.75))
    r = lam * va + (1 - lam) * vb
    return w, pin, poly, r


class TestSplitForEdge:
    def test_type_02_ordering(self, rng):
        w, pin, poly, r = random_edge_instance(rng)
        lifted, lp, ordering, v = split_for_edge(w, pin, r, (0, 2))
        # paper's case: split the first sender, decode (2, 1a, 3, 1b)
        assert lifted.split_sender == 0
        assert ordering.pi == (2, 0, 3, 1)
        assert v[lifted.index_a] + v[lifted.index_b] == pytest.approx(r[0], abs=1e-4)
        assert v.sum() == pytest.approx(poly.sum_bound(), abs=1e-4)

    def test_vertex_degenerate_theta(self, rng):
        w = random_channel(rng, (2, 2, 2), 3)
        pin = ProductInput(tuple(random_distribution(rng, 2) for _ in range(3)))
        poly = polytope(w, pin)
        r = vertex(poly, Ordering((1, 0, 2)))
        lifted, lp, ordering, v = split_for_edge(w, pin, r, (0, 2))
        virtual = sorted([v[lifted.index_a], v[lifted.index_b]])
        assert virtual[0] == pytest.approx(0.0, abs=1e-3)

    def test_regroup_and_lifted_vertex(self, rng):
        for _ in range(5):
            w, pin, poly, r = random_edge_instance(rng)
            lifted, lp, ordering, v = split_for_edge(w, pin, r, (0, 2))
            lpoly = polytope(lifted.channel, lp)
            np.testing.assert_allclose(vertex(lpoly, ordering), v, atol=1e-6)
            regrouped = [v[0] + v[1], v[2], v[3]]
            np.testing.assert_allclose(regrouped, r, atol=1e-4)

    def test_other_edge_types(self, rng):
        w = random_channel(rng, (2, 2, 2), 4)
        pin = ProductInput(tuple(random_distribution(rng, 2) for _ in range(3)))
        poly = polytope(w, pin)
        cases = [
            ((1, 2), (0, 1, 2), (1, 2, 0)),
            ((0, 1), (2, 0, 1), (2, 1, 0)),
            ((2,), (2, 0, 1), (2, 1, 0)),
        ]
        for s, oa, ob in cases:
            va, vb = vertex(poly, Ordering(oa)), vertex(poly, Ordering(ob))
            r = 0.5 * va + 0.5 * vb
            if abs(r[list(s)].sum() - poly.bounds[s]) > 1e-9:
                continue  # degenerate polytope: that edge collapsed
            lifted, lp, ordering, v = split_for_edge(w, pin, r, s)
            regrouped = np.array(
                [
                    v[lifted.index_a] + v[lifted.index_b]
                    if i == lifted.split_sender
                    else v[lifted.lifted_index(i)]
                    for i in range(3)
                ]
            )
            np.testing.assert_allclose(regrouped, r, atol=1e-4)

    def test_not_on_edge_rejected(self, rng):
        w = random_channel(rng, (2, 2, 2), 3)
        pin = ProductInput(tuple(random_distribution(rng, 2) for _ in range(3)))
        poly = polytope(w, pin)
        va = vertex(poly, Ordering((1, 0, 2)))
        vb = vertex(poly, Ordering((2, 0, 1)))
        vc = vertex(poly, Ordering((0, 1, 2)))
        r = (va + vb + vc) / 3.0
        if edge_free := all(
            abs(r[list(s)].sum() - poly.bounds[s]) > 1e-6
            for s in [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]
        ):
            with pytest.raises(ValidationError):
                split_for_edge(w, pin, r, (0, 2))

    def test_unsupported_type(self, rng):
        w = random_channel(rng, (2, 2, 2), 3)
        pin = uniform_inputs([2, 2, 2])
        with pytest.raises(ValidationError):
            split_for_edge(w, pin, [0.1, 0.1, 0.1], (0, 1, 2))


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.floats(min_value=1e-6, max_value=1.0))
def test_cdf_factorization_property(seed, theta):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 7))
    raw = rng.gamma(1.0, size=m)
    p = Distribution(raw / raw.sum())
    p_a, p_b = split_distribution(p, theta)
    np.testing.assert_allclose(p_a.cdf() * p_b.cdf(), p.cdf(), atol=1e-15)
    np.testing.assert_allclose(max_law(p_a, p_b), p.probs, atol=1e-12)
