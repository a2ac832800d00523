"""Shared channels and independent brute-force oracles used across test modules.

The oracles here deliberately avoid the library's code paths: conditional
mutual information is evaluated by looping over table cells, marginals by
explicit sums, so library results are checked against a second derivation.
"""

from itertools import product

import numpy as np
import pytest

from amacsim.infocore import Distribution, DmcChannel, ProductInput


def example4_channel() -> DmcChannel:
    """Binary 2-sender channel W(0|0,0)=1, W(1|1,0)=W(1|0,1)=1, W(1|1,1)=1/2."""
    w = np.zeros((2, 2, 2))
    w[0, 0, 0] = 1.0
    w[1, 0, 1] = 1.0
    w[0, 1, 1] = 1.0
    w[1, 1, 0] = 0.5
    w[1, 1, 1] = 0.5
    return DmcChannel(w)


def bsc(eps: float) -> DmcChannel:
    return DmcChannel(np.array([[1 - eps, eps], [eps, 1 - eps]]))


def identity_channel(m: int = 2) -> DmcChannel:
    return DmcChannel(np.eye(m))


def uniform_inputs(sizes) -> ProductInput:
    return ProductInput(tuple(Distribution.uniform(s) for s in sizes))


def random_channel(rng: np.random.Generator, input_sizes, output_size) -> DmcChannel:
    shape = (*input_sizes, output_size)
    t = rng.gamma(1.0, size=shape)
    t /= t.sum(axis=-1, keepdims=True)
    return DmcChannel(t)


def random_distribution(rng: np.random.Generator, m: int) -> Distribution:
    p = rng.gamma(1.0, size=m)
    return Distribution(p / p.sum())


def joint_table_oracle(channel: DmcChannel, inputs: ProductInput) -> np.ndarray:
    """Joint law over (x_1..x_K, y) by explicit looping."""
    sizes = channel.input_sizes
    out = np.zeros((*sizes, channel.output_size))
    for xs in product(*(range(s) for s in sizes)):
        px = 1.0
        for m, x in zip(inputs.marginals, xs):
            px *= m.probs[x]
        for y in range(channel.output_size):
            out[(*xs, y)] = px * channel.transition[(*xs, y)]
    return out


def cmi_oracle(joint: np.ndarray, senders) -> float:
    """I(X_S ; Y | X_{S^c}) by direct cell-wise summation of p log p(a,y|z)/(p(a|z)p(y|z))."""
    k = joint.ndim - 1
    senders = tuple(sorted(senders))
    sc = tuple(i for i in range(k) if i not in senders)
    total = 0.0
    for idx in product(*(range(s) for s in joint.shape)):
        p = joint[idx]
        if p == 0.0:
            continue
        xz = tuple(idx[i] for i in sc)
        # p(z), p(a, z), p(z, y)
        pz = _marginal_at(joint, sc, xz)
        paz = _marginal_at(joint, sc + senders, xz + tuple(idx[i] for i in senders))
        pzy = _marginal_at(joint, sc + (k,), xz + (idx[k],))
        total += p * np.log2(p * pz / (paz * pzy))
    return total


def _marginal_at(joint: np.ndarray, axes, values) -> float:
    k = joint.ndim
    sl = [slice(None)] * k
    for a, v in zip(axes, values):
        sl[a] = v
    return float(joint[tuple(sl)].sum())


# frozen anchor values, computed with the oracles above (see test_infocore)
EX4_B1 = 0.6556390622295662
EX4_B12 = 0.7044340029249652
EX4_VERTEX12 = (0.04879494069539869, 0.6556390622295662)
BSC01_CAPACITY = 0.5310044064107188


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
