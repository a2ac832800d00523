import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amacsim.infocore import (
    Distribution,
    DmcChannel,
    JointSystem,
    ProductInput,
    ValidationError,
    conditional_mutual_information,
    density_table,
    entropy,
    entropy_bits,
    information_density_sum,
    mutual_information_bits,
    output_distribution,
    pair_law,
    stage_channel,
)

from conftest import (
    BSC01_CAPACITY,
    EX4_B1,
    EX4_B12,
    bsc,
    cmi_oracle,
    example4_channel,
    identity_channel,
    joint_table_oracle,
    random_channel,
    random_distribution,
    uniform_inputs,
)


class TestDistribution:
    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            Distribution(np.array([1.1, -0.1]))

    def test_rejects_bad_sum(self):
        with pytest.raises(ValidationError):
            Distribution(np.array([0.5, 0.4]))

    def test_immutable(self):
        d = Distribution.uniform(3)
        with pytest.raises(ValueError):
            d.probs[0] = 0.7


class TestEntropy:
    def test_uniform_binary(self):
        assert entropy(Distribution.uniform(2)) == pytest.approx(1.0, abs=1e-12)

    def test_point_mass(self):
        assert entropy(Distribution.point_mass(1, 4)) == 0.0

    def test_quarter(self):
        # direct evaluation of -sum p log2 p
        expected = -(0.75 * np.log2(0.75) + 0.25 * np.log2(0.25))
        assert expected == pytest.approx(0.8112781244591328, abs=1e-12)
        assert entropy(Distribution(np.array([0.75, 0.25]))) == pytest.approx(expected, abs=1e-12)


class TestJointSystem:
    def test_marginal_recovers_product(self, rng):
        w = random_channel(rng, (2, 3), 2)
        p = ProductInput((random_distribution(rng, 2), random_distribution(rng, 3)))
        js = JointSystem.from_channel(w, p)
        assert js.table.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(js.input_marginal(), p.table(), atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            JointSystem.from_channel(example4_channel(), uniform_inputs([2, 3]))


class TestConditionalMutualInformation:
    def test_example4_single(self):
        js = JointSystem.from_channel(example4_channel(), uniform_inputs([2, 2]))
        oracle = cmi_oracle(joint_table_oracle(example4_channel(), uniform_inputs([2, 2])), (0,))
        assert oracle == pytest.approx(EX4_B1, abs=1e-12)
        assert conditional_mutual_information(js, [0]) == pytest.approx(oracle, abs=1e-12)
        assert conditional_mutual_information(js, [1]) == pytest.approx(oracle, abs=1e-12)

    def test_example4_pair(self):
        js = JointSystem.from_channel(example4_channel(), uniform_inputs([2, 2]))
        oracle = cmi_oracle(js.table, (0, 1))
        # closed form h(5/8) - 1/4
        h58 = -(5 / 8) * np.log2(5 / 8) - (3 / 8) * np.log2(3 / 8)
        assert oracle == pytest.approx(h58 - 0.25, abs=1e-12)
        assert conditional_mutual_information(js, [0, 1]) == pytest.approx(EX4_B12, abs=1e-12)

    def test_identity_channel(self):
        js = JointSystem.from_channel(identity_channel(), ProductInput((Distribution.uniform(2),)))
        assert conditional_mutual_information(js, [0]) == pytest.approx(1.0, abs=1e-12)

    def test_empty_subset_rejected(self):
        js = JointSystem.from_channel(example4_channel(), uniform_inputs([2, 2]))
        with pytest.raises(ValidationError):
            conditional_mutual_information(js, [])

    def test_random_channels_match_oracle(self, rng):
        for _ in range(10):
            w = random_channel(rng, (2, 2, 3), 2)
            p = ProductInput(tuple(random_distribution(rng, s) for s in (2, 2, 3)))
            js = JointSystem.from_channel(w, p)
            for s in [(0,), (2,), (0, 1), (1, 2), (0, 1, 2)]:
                assert conditional_mutual_information(js, s) == pytest.approx(
                    cmi_oracle(js.table, s), abs=1e-9
                )

    def test_bounds(self, rng):
        # 0 <= I(X_S; Y | X_Sc) <= min(H(X_S), H(Y))
        for _ in range(10):
            w = random_channel(rng, (3, 2), 3)
            p = ProductInput((random_distribution(rng, 3), random_distribution(rng, 2)))
            js = JointSystem.from_channel(w, p)
            hy = entropy(output_distribution(js))
            for s in [(0,), (1,), (0, 1)]:
                v = conditional_mutual_information(js, s)
                hx = entropy_bits(js.input_marginal().sum(axis=tuple(i for i in range(2) if i not in s)))
                assert -1e-9 <= v <= min(hx, hy) + 1e-9

    def test_chain_rule(self, rng):
        # b(A u B) = b(A) + I(X_B ; Y | X_{(A u B)^c}) with X_A folded into the
        # noise of the second term -- the identity behind vertex sums
        for _ in range(10):
            w = random_channel(rng, (2, 3, 2), 3)
            p = ProductInput(tuple(random_distribution(rng, s) for s in (2, 3, 2)))
            js = JointSystem.from_channel(w, p)
            a, b = (0,), (2,)
            lhs = conditional_mutual_information(js, a + b)
            term1 = conditional_mutual_information(js, a)
            marginalized = JointSystem(js.table.sum(axis=a))  # axes now (x1, x2, y)
            term2 = conditional_mutual_information(marginalized, [1])
            assert lhs == pytest.approx(term1 + term2, abs=1e-9)


class TestOutputDistribution:
    def test_example4(self):
        js = JointSystem.from_channel(example4_channel(), uniform_inputs([2, 2]))
        np.testing.assert_allclose(output_distribution(js).probs, [3 / 8, 5 / 8], atol=1e-12)

    def test_identity_uniform(self):
        js = JointSystem.from_channel(identity_channel(3), ProductInput((Distribution.uniform(3),)))
        np.testing.assert_allclose(output_distribution(js).probs, np.full(3, 1 / 3), atol=1e-12)

    def test_constant_channel(self):
        w = DmcChannel(np.array([[1.0, 0.0], [1.0, 0.0]]))
        js = JointSystem.from_channel(w, ProductInput((Distribution.uniform(2),)))
        np.testing.assert_allclose(output_distribution(js).probs, [1.0, 0.0], atol=1e-12)


class TestStageChannel:
    def test_k1_noop(self):
        w = bsc(0.1)
        out = stage_channel(w, ProductInput((Distribution.uniform(2),)), decoded=(), target=0)
        np.testing.assert_allclose(out.transition, w.transition, atol=1e-15)

    def test_example4_noise_stage(self):
        w = example4_channel()
        out = stage_channel(w, uniform_inputs([2, 2]), decoded=(), target=0)
        np.testing.assert_allclose(out.transition, [[0.5, 0.5], [0.25, 0.75]], atol=1e-12)

    def test_example4_decoded_stage(self):
        w = example4_channel()
        out = stage_channel(w, uniform_inputs([2, 2]), decoded=(0,), target=1)
        assert out.input_sizes == (2,)
        assert out.output_size == 4  # (y, x1) flattened
        # capacity-relevant I(X2 ; (Y, X1)) equals the conditional MI b({2})
        j = pair_law(out, Distribution.uniform(2))
        assert mutual_information_bits(j) == pytest.approx(EX4_B1, abs=1e-9)

    def test_overlap_rejected(self):
        with pytest.raises(ValidationError):
            stage_channel(example4_channel(), uniform_inputs([2, 2]), decoded=(1,), target=1)

    def test_output_marginal_consistency(self, rng):
        # pushing the target marginal through the stage channel reproduces the
        # joint (y, x_decoded) law of the original system
        w = random_channel(rng, (2, 2, 2), 3)
        p = ProductInput(tuple(random_distribution(rng, 2) for _ in range(3)))
        stage = stage_channel(w, p, decoded=(0, 2), target=1)
        out = pair_law(stage, p.marginals[1]).sum(axis=0)  # composite marginal
        js = JointSystem.from_channel(w, p)
        expected = js.table.sum(axis=1)  # over (x0, x2, y)
        expected = np.transpose(expected, (2, 0, 1)).ravel()  # (y, x0, x2) flattened
        np.testing.assert_allclose(out, expected, atol=1e-12)


class TestInformationDensitySum:
    def test_noiseless_constant(self):
        law = pair_law(identity_channel(), Distribution.uniform(2))
        xs = [0, 1, 1, 0]
        assert information_density_sum([law] * 4, xs, xs) == pytest.approx(1.0, abs=1e-12)

    def test_zero_mass_is_neg_inf(self):
        law = pair_law(identity_channel(), Distribution.uniform(2))
        assert information_density_sum([law] * 2, [0, 0], [0, 1]) == float("-inf")

    def test_bsc_example(self):
        law = pair_law(bsc(0.1), Distribution.uniform(2))
        got = information_density_sum([law] * 4, [0, 0, 0, 0], [0, 0, 0, 1])
        expected = (3 * np.log2(0.9 / 0.5) + np.log2(0.1 / 0.5)) / 4
        assert expected == pytest.approx(0.05551565619437204, abs=1e-12)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_length_mismatch(self):
        law = pair_law(bsc(0.1), Distribution.uniform(2))
        with pytest.raises(ValidationError):
            information_density_sum([law] * 3, [0, 0, 0], [0, 0])


class TestDensityTable:
    def test_zero_cells(self):
        law = pair_law(identity_channel(), Distribution(np.array([1.0, 0.0])))
        d = density_table(law)
        assert d[0, 0] == 0.0  # log2(1/(1*1))
        assert d[1, 1] == float("-inf")


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_cmi_nonnegative_random(seed):
    rng = np.random.default_rng(seed)
    w = random_channel(rng, (2, 2), 2)
    p = ProductInput((random_distribution(rng, 2), random_distribution(rng, 2)))
    js = JointSystem.from_channel(w, p)
    for s in [(0,), (1,), (0, 1)]:
        assert conditional_mutual_information(js, s) >= -1e-9


def test_table_cap():
    with pytest.raises(ValidationError):
        DmcChannel(np.full((500, 500, 500), 1 / 500))
