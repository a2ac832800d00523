"""Rate splitting: max-combiner distribution splits and edge-type splits.

One sender with law p is replaced by two virtual senders (a, b) on the same
alphabet whose symbols enter the channel through max(x_a, x_b).  The split
laws come from the CDF factorization

    F_a(x) = min(F(x)/theta, 1),   F_b(x) = max(F(x), theta),

so F_a * F_b = F pointwise and max(X_a, X_b) has exactly the law p.  Sweeping
theta in (0, 1] slides the split vertex of the lifted channel along the
dominant face, which is what lets successive decoding reach non-vertex points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from amacsim.infocore import (
    Distribution,
    DmcChannel,
    ProductInput,
    ValidationError,
    reduced_channel,
)
from amacsim.regions import Ordering, dominant_face_contains, polytope, vertex

RECOMBINE_ATOL = 1e-12
SPLIT_POINT_ATOL = 1e-4


class SweepRangeError(RuntimeError):
    """The requested target is outside the theta sweep range (degenerate face)."""


def max_law(p_a: Distribution, p_b: Distribution) -> np.ndarray:
    """Exact law of max(X_a, X_b) for independent X_a ~ p_a, X_b ~ p_b."""
    fa, fb = p_a.cdf(), p_b.cdf()
    f = fa * fb
    return np.diff(f, prepend=0.0)


@dataclass(frozen=True)
class SplitSpec:
    """A validated individual split of one sender."""

    sender: int
    theta: float
    p_a: Distribution
    p_b: Distribution

    def __post_init__(self):
        got = max_law(self.p_a, self.p_b)
        # the original law is implied by the factorization; check consistency
        if np.any(got < -RECOMBINE_ATOL):
            raise ValidationError("max law has a negative entry")


def split_distribution(p: Distribution, theta: float) -> tuple[Distribution, Distribution]:
    """CDF-factorization split: max(X_a, X_b) recombines to p exactly.

    theta in (0, 1]; theta = 1 gives (p, point mass at 0), and any theta at
    or below F(0) gives (point mass at 0, p).
    """
    if not (0.0 < theta <= 1.0):
        raise ValidationError(f"theta must be in (0, 1], got {theta}")
    f = p.cdf()
    fa = np.minimum(f / theta, 1.0)
    fb = np.maximum(f, theta)
    p_a = Distribution(np.diff(fa, prepend=0.0))
    p_b = Distribution(np.diff(fb, prepend=0.0))
    return p_a, p_b


@dataclass(frozen=True)
class LiftedChannel:
    """K+1-sender channel with sender `split_sender` replaced by a max pair.

    In the lifted index space the virtual senders sit at positions
    split_sender (the "a" half) and split_sender + 1 (the "b" half); senders
    after the split shift up by one.
    """

    base: DmcChannel
    split_sender: int
    channel: DmcChannel

    def lifted_index(self, base_sender: int) -> int:
        if base_sender == self.split_sender:
            raise ValidationError("the split sender maps to two lifted indices")
        return base_sender if base_sender < self.split_sender else base_sender + 1

    @property
    def index_a(self) -> int:
        return self.split_sender

    @property
    def index_b(self) -> int:
        return self.split_sender + 1


def lift_channel(channel: DmcChannel, sender: int) -> LiftedChannel:
    """Replace `sender` by virtual senders (a, b) feeding max(x_a, x_b)."""
    k = channel.num_senders
    if not (0 <= sender < k):
        raise ValidationError(f"sender {sender} out of range for K={k}")
    m = channel.input_sizes[sender]
    moved = np.moveaxis(channel.transition, sender, 0)
    pair = np.maximum.outer(np.arange(m), np.arange(m))
    lifted = moved[pair]  # axes: (x_a, x_b, other senders..., y)
    lifted = np.moveaxis(lifted, (0, 1), (sender, sender + 1))
    return LiftedChannel(base=channel, split_sender=sender, channel=DmcChannel(lifted))


def lifted_inputs(
    inputs: ProductInput, sender: int, p_a: Distribution, p_b: Distribution
) -> ProductInput:
    ms = list(inputs.marginals)
    ms[sender : sender + 1] = [p_a, p_b]
    return ProductInput(tuple(ms))


def two_sender_split_point(
    channel: DmcChannel,
    p: Distribution,
    q: Distribution,
    target: Sequence[float],
    atol: float = SPLIT_POINT_ATOL,
    scan_points: int = 64,
) -> tuple[float, tuple[float, float], Ordering, np.ndarray]:
    """Split sender 1 of a 2-sender channel to hit a dominant-face point.

    Bisects theta so that the (1a, 2, 1b)-ordering vertex of the lifted
    channel has middle coordinate target[1]; then R_a + R_b = target[0]
    automatically (the face sum is invariant).  Returns
    (theta, (R_a, R_b), the lifted ordering, the full 3-dim vertex).
    """
    if channel.num_senders != 2:
        raise ValidationError("two_sender_split_point expects a 2-sender channel")
    target = np.asarray(target, dtype=np.float64)
    base_poly = polytope(channel, ProductInput((p, q)))
    if not dominant_face_contains(base_poly, target, 1e-6):
        raise ValidationError("target must lie on the dominant face of the base polytope")

    lifted = lift_channel(channel, 0)
    order = Ordering((0, 2, 1))  # (1a, 2, 1b) in lifted indices

    def split_vertex(theta: float) -> np.ndarray:
        p_a, p_b = split_distribution(p, theta)
        pin = ProductInput((p_a, p_b, q))
        return vertex(polytope(lifted.channel, pin), order)

    def middle(theta: float) -> float:
        return float(split_vertex(theta)[2])

    t2 = float(target[1])
    thetas = np.linspace(1e-9, 1.0, scan_points)
    values = np.array([middle(t) for t in thetas])
    # the sweep should be monotone in theta; tolerate float-level wiggles
    diffs = np.diff(values)
    if np.any(diffs < -1e-7):
        raise SweepRangeError("middle coordinate is not monotone over the theta scan")
    if t2 < values[0] - atol or t2 > values[-1] + atol:
        raise SweepRangeError(
            f"target middle coordinate {t2} outside sweep range "
            f"[{values[0]}, {values[-1]}]"
        )
    # vertex targets get the endpoint theta (trivial split): preferred when
    # the swept coordinate plateaus there
    theta = None
    for endpoint in (1.0, float(thetas[0])):
        v = split_vertex(endpoint)
        if abs(v[2] - t2) <= atol and abs(v[0] + v[1] - target[0]) <= atol:
            theta = endpoint
            break
    if theta is None:
        lo_i = int(np.searchsorted(values, t2, side="right")) - 1
        lo_i = max(0, min(lo_i, scan_points - 2))
        lo, hi = thetas[lo_i], thetas[lo_i + 1]
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if middle(mid) < t2:
                lo = mid
            else:
                hi = mid
        theta = 0.5 * (lo + hi)
        v = split_vertex(theta)
    if abs(v[2] - t2) > atol or abs(v[0] + v[1] - target[0]) > atol:
        raise SweepRangeError(
            f"bisection ended at {theta} with vertex {v}, target {target}"
        )
    return theta, (float(v[0]), float(v[1])), order, v


# Lemma-3 case table, 0-based senders (paper senders 1,2,3 = indices 0,1,2).
# For each edge type S: which sender to split, the 2-sender reduction
# (pair of kept senders, appended-first-decoded senders), and the full
# 4-sender decode ordering in lifted indices.
_EDGE_CASES = {
    (0, 2): dict(split=0, pair=(0, 2), append=(1,), ordering=(2, 0, 3, 1)),  # (2,1a,3,1b)
    (1, 2): dict(split=1, pair=(1, 2), append=(0,), ordering=(0, 1, 3, 2)),  # (1,2a,3,2b)
    (0, 1): dict(split=0, pair=(0, 1), append=(2,), ordering=(3, 0, 2, 1)),  # (3,1a,2,1b)
    (0,): dict(split=1, pair=(1, 2), append=(), ordering=(1, 3, 2, 0)),      # (2a,3,2b,1)
    (1,): dict(split=0, pair=(0, 2), append=(), ordering=(0, 3, 1, 2)),      # (1a,3,1b,2)
    (2,): dict(split=0, pair=(0, 1), append=(), ordering=(0, 2, 1, 3)),      # (1a,2,1b,3)
}


def split_for_edge(
    channel: DmcChannel,
    inputs: ProductInput,
    r: Sequence[float],
    edge: Sequence[int],
    atol: float = SPLIT_POINT_ATOL,
) -> tuple[LiftedChannel, ProductInput, Ordering, np.ndarray]:
    """Split one of senders 0/1 of a 3-sender channel so the edge point r
    becomes a vertex of the lifted 4-sender dominant face.

    `edge` is the tight proper subset (the edge type) at r.  Returns the
    lifted channel, the 4 split input laws, the decode ordering and the
    4-dim vertex; virtual-sender coordinates regroup to r within atol.
    """
    if channel.num_senders != 3:
        raise ValidationError("split_for_edge expects a 3-sender channel")
    s = tuple(sorted(int(i) for i in edge))
    if s not in _EDGE_CASES:
        raise ValidationError(f"unsupported edge type {s}")
    rates = np.asarray(r, dtype=np.float64)
    base_poly = polytope(channel, inputs)
    if not dominant_face_contains(base_poly, rates, 1e-6):
        raise ValidationError("r must lie on the dominant face")
    if abs(rates[list(s)].sum() - base_poly.bounds[s]) > 1e-6:
        raise ValidationError(f"r is not on an edge of type {s}")

    case = _EDGE_CASES[s]
    split = case["split"]
    pair = case["pair"]
    other = pair[1] if pair[0] == split else pair[0]
    # 2-sender reduction: keep (split, other), append the first-decoded sender
    # (if any), absorb the rest as noise
    reduced = reduced_channel(channel, inputs, keep=(split, other), append=case["append"])
    theta, _, _, _ = two_sender_split_point(
        reduced,
        inputs.marginals[split],
        inputs.marginals[other],
        (rates[split], rates[other]),
        atol=atol,
    )
    p_a, p_b = split_distribution(inputs.marginals[split], theta)
    lifted = lift_channel(channel, split)
    lifted_p = lifted_inputs(inputs, split, p_a, p_b)
    ordering = Ordering(case["ordering"])
    v = vertex(polytope(lifted.channel, lifted_p), ordering)

    regrouped = np.array(
        [
            v[lifted.index_a] + v[lifted.index_b] if i == split else v[lifted.lifted_index(i)]
            for i in range(3)
        ]
    )
    if np.max(np.abs(regrouped - rates)) > atol:
        raise SweepRangeError(
            f"split vertex {v} regroups to {regrouped}, expected {rates}"
        )
    return lifted, lifted_p, ordering, v
