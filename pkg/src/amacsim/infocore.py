"""Exact finite-alphabet probability and information measures.

Everything downstream (rate regions, splits, decoders, converse bounds) is
built on the four value types defined here: single-symbol distributions,
K-sender channels, product inputs and the joint law they induce.  All logs
are base 2, rates are bits/symbol, and 0*log 0 = 0.  Values are immutable
after construction; every operation is pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

PROB_ATOL = 1e-12
DERIVED_ATOL = 1e-9
MAX_TABLE_ENTRIES = 10**7

NEG_INF = float("-inf")


class ValidationError(ValueError):
    """A probability object violates its construction contract."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def entropy_bits(table: np.ndarray) -> float:
    """Shannon entropy in bits of an arbitrary-shaped probability table."""
    p = np.asarray(table, dtype=np.float64).ravel()
    nz = p[p > 0.0]
    return float(-(nz * np.log2(nz)).sum())


@dataclass(frozen=True)
class Distribution:
    """Probability distribution over a finite alphabet {0..m-1}."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError("distribution must be a non-empty vector")
        if np.any(p < 0.0):
            raise ValidationError("negative probability entry")
        if abs(p.sum() - 1.0) > PROB_ATOL:
            raise ValidationError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", _freeze(p))

    @property
    def size(self) -> int:
        return self.probs.size

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    @staticmethod
    def uniform(m: int) -> "Distribution":
        return Distribution(np.full(m, 1.0 / m))

    @staticmethod
    def point_mass(i: int, m: int) -> "Distribution":
        p = np.zeros(m)
        p[i] = 1.0
        return Distribution(p)


def entropy(d: Distribution) -> float:
    """H(d) in bits."""
    return entropy_bits(d.probs)


@dataclass(frozen=True)
class DmcChannel:
    """K-sender DMC: stochastic matrix W(y | x_1..x_K) over finite alphabets.

    ``transition`` has shape (|X_1|, ..., |X_K|, |Y|); each row over y is a
    probability vector.  Dense tables are capped at MAX_TABLE_ENTRIES.
    """

    transition: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=np.float64)
        if t.ndim < 2:
            raise ValidationError("transition needs >= 1 sender axis plus the output axis")
        if t.size > MAX_TABLE_ENTRIES:
            raise ValidationError(
                f"transition table with {t.size} entries exceeds the cap {MAX_TABLE_ENTRIES}"
            )
        if np.any(t < 0.0):
            raise ValidationError("negative transition probability")
        rows = t.sum(axis=-1)
        bad = np.abs(rows - 1.0) > PROB_ATOL
        if np.any(bad):
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ValidationError(f"transition row {idx} sums to {rows[bad][0]!r}, not 1")
        object.__setattr__(self, "transition", _freeze(t))

    @property
    def num_senders(self) -> int:
        return self.transition.ndim - 1

    @property
    def input_sizes(self) -> tuple[int, ...]:
        return self.transition.shape[:-1]

    @property
    def output_size(self) -> int:
        return self.transition.shape[-1]

    @property
    def alphabet_sizes(self) -> tuple[int, ...]:
        return self.transition.shape


@dataclass(frozen=True)
class ProductInput:
    """Independent per-sender input distributions p_1 x ... x p_K."""

    marginals: tuple[Distribution, ...]

    def __post_init__(self):
        ms = tuple(self.marginals)
        if not ms:
            raise ValidationError("at least one marginal required")
        object.__setattr__(self, "marginals", ms)

    @property
    def num_senders(self) -> int:
        return len(self.marginals)

    def check_shapes(self, channel: DmcChannel) -> None:
        sizes = tuple(m.size for m in self.marginals)
        if sizes != channel.input_sizes:
            raise ValidationError(
                f"input sizes {sizes} do not match channel inputs {channel.input_sizes}"
            )

    def table(self) -> np.ndarray:
        """Dense product table over (x_1, ..., x_K)."""
        out = self.marginals[0].probs
        for m in self.marginals[1:]:
            out = np.multiply.outer(out, m.probs)
        return out

    @staticmethod
    def uniform(sizes: Sequence[int]) -> "ProductInput":
        return ProductInput(tuple(Distribution.uniform(s) for s in sizes))


@dataclass(frozen=True)
class JointSystem:
    """Joint law of (X_1..X_K, Y) induced by a ProductInput and a DmcChannel."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float64)
        if t.ndim < 2:
            raise ValidationError("joint table needs >= 1 sender axis plus the output axis")
        if np.any(t < 0.0):
            raise ValidationError("negative joint probability")
        if abs(t.sum() - 1.0) > PROB_ATOL:
            raise ValidationError(f"joint table sums to {t.sum()!r}, not 1")
        object.__setattr__(self, "table", _freeze(t))

    @staticmethod
    def from_channel(channel: DmcChannel, inputs: ProductInput) -> "JointSystem":
        inputs.check_shapes(channel)
        return JointSystem(inputs.table()[..., None] * channel.transition)

    @property
    def num_senders(self) -> int:
        return self.table.ndim - 1

    def input_marginal(self) -> np.ndarray:
        return self.table.sum(axis=-1)


def _check_subset(senders: Sequence[int], k: int) -> tuple[int, ...]:
    s = tuple(sorted(set(int(i) for i in senders)))
    if not s:
        raise ValidationError("sender subset must be non-empty")
    if s[0] < 0 or s[-1] >= k:
        raise ValidationError(f"sender subset {s} out of range for K={k}")
    return s


def conditional_mutual_information(js: JointSystem, senders: Sequence[int]) -> float:
    """I(X_S ; Y | X_{S^c}) in bits, exactly from the joint table.

    Senders are 0-based.  Uses the entropy identity
    I(A;B|C) = H(A,C) + H(B,C) - H(C) - H(A,B,C) with A=X_S, B=Y, C=X_{S^c}.
    """
    k = js.num_senders
    s = _check_subset(senders, k)
    y_axis = k
    h_inputs = entropy_bits(js.table.sum(axis=y_axis))
    h_scy = entropy_bits(js.table.sum(axis=s))
    h_sc = entropy_bits(js.table.sum(axis=s + (y_axis,)))
    h_all = entropy_bits(js.table)
    return h_inputs + h_scy - h_sc - h_all


def output_distribution(js: JointSystem) -> Distribution:
    """Marginal law of Y."""
    k = js.num_senders
    return Distribution(js.table.sum(axis=tuple(range(k))))


def composite_output_index(
    y: np.ndarray | int,
    decoded_symbols: Sequence[np.ndarray | int],
    output_size: int,
    decoded_sizes: Sequence[int],
) -> np.ndarray | int:
    """Flatten (y, x_{a_1}, ..., x_{a_r}) into a stage-channel output symbol.

    The convention matches stage_channel: y is the slowest-varying axis,
    decoded senders follow in the order they were passed.
    """
    shape = (output_size, *decoded_sizes)
    return np.ravel_multi_index((y, *decoded_symbols), shape)


def reduced_channel(
    channel: DmcChannel,
    inputs: ProductInput,
    keep: Sequence[int],
    append: Sequence[int] = (),
) -> DmcChannel:
    """Channel over the `keep` senders with the `append` senders' symbols
    moved to the output (weighted by their laws) and everyone else absorbed
    as noise.  Output alphabet: Y x X_{append[0]} x ... flattened C-order
    with y slowest (see composite_output_index)."""
    inputs.check_shapes(channel)
    k = channel.num_senders
    kept = tuple(int(a) for a in keep)
    app = tuple(int(a) for a in append)
    seen = kept + app
    if len(set(seen)) != len(seen):
        raise ValidationError("keep and append sets must be disjoint and distinct")
    for a in seen:
        if a < 0 or a >= k:
            raise ValidationError(f"sender {a} out of range")
    if not kept:
        raise ValidationError("at least one kept sender required")

    others = [i for i in range(k) if i not in seen]
    y_axis = k
    # sum out the noise senders weighted by their marginals
    operands = [channel.transition, list(range(k + 1))]
    for o in others:
        operands.append(inputs.marginals[o].probs)
        operands.append([o])
    out_axes = [a for a in range(k) if a not in others] + [y_axis]
    table = np.einsum(*operands, out_axes)  # axes: kept+append senders (sorted), y

    remaining = [a for a in range(k) if a not in others]
    pos = {a: i for i, a in enumerate(remaining)}
    for a in app:
        shape = [1] * table.ndim
        shape[pos[a]] = inputs.marginals[a].size
        table = table * inputs.marginals[a].probs.reshape(shape)
    # reorder to (x_keep..., y, x_append...) then flatten the output block
    order = [pos[a] for a in kept] + [len(remaining)] + [pos[a] for a in app]
    table = np.transpose(table, order)
    in_shape = tuple(inputs.marginals[a].size for a in kept)
    return DmcChannel(table.reshape(*in_shape, -1))


def stage_channel(
    channel: DmcChannel,
    inputs: ProductInput,
    decoded: Sequence[int],
    target: int,
) -> DmcChannel:
    """Single-sender channel seen by `target` at one successive-decoding step.

    Senders in `decoded` (an ordered subset, 0-based) have known codewords:
    their symbols are appended to the output, weighted by their input laws.
    The remaining senders are absorbed as noise.
    """
    m = int(target)
    if m in tuple(int(a) for a in decoded):
        raise ValidationError("target sender cannot be in the decoded set")
    return reduced_channel(channel, inputs, keep=(m,), append=decoded)


def pair_law(channel: DmcChannel, p: Distribution) -> np.ndarray:
    """Joint (x, y) table p(x) W(y|x) for a single-sender channel."""
    if channel.num_senders != 1:
        raise ValidationError("pair_law expects a single-sender channel")
    if p.size != channel.input_sizes[0]:
        raise ValidationError("input size mismatch")
    return p.probs[:, None] * channel.transition


def density_table(joint_xy: np.ndarray) -> np.ndarray:
    """log2( P(x,y) / (p(x) q(y)) ) with -inf wherever P(x,y) = 0."""
    j = np.asarray(joint_xy, dtype=np.float64)
    if j.ndim != 2:
        raise ValidationError("pair law must be 2-D")
    if abs(j.sum() - 1.0) > PROB_ATOL:
        raise ValidationError(f"pair law sums to {j.sum()!r}, not 1")
    px = j.sum(axis=1)
    qy = j.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.log2(j) - np.log2(px)[:, None] - np.log2(qy)[None, :]
    d[j == 0.0] = NEG_INF
    # a zero marginal makes the whole row/column unreachable; keep -inf there
    d[np.isnan(d)] = NEG_INF
    return d


def mutual_information_bits(joint_xy: np.ndarray) -> float:
    """I(X;Y) of a 2-D pair law."""
    j = np.asarray(joint_xy, dtype=np.float64)
    return entropy_bits(j.sum(axis=1)) + entropy_bits(j.sum(axis=0)) - entropy_bits(j)


def information_density_sum(
    laws: Sequence[np.ndarray],
    xs: Sequence[int],
    ys: Sequence[int],
) -> float:
    """Average information density (1/n) sum_i log2 P_i(x_i,y_i)/(p_i(x_i) q_i(y_i)).

    ``laws`` carries one pair law per position (two-segment schedules just
    repeat two tables).  Returns -inf if any position has zero joint mass.
    """
    xs = np.asarray(xs, dtype=np.intp)
    ys = np.asarray(ys, dtype=np.intp)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValidationError("xs and ys must be equal-length vectors")
    if len(laws) != xs.size:
        raise ValidationError(f"{len(laws)} position laws for {xs.size} symbols")
    total = 0.0
    for law, x, y in zip(laws, xs, ys):
        d = density_table(law)[x, y]
        if d == NEG_INF:
            return NEG_INF
        total += d
    return total / xs.size
