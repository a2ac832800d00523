"""Rate regions for K-sender multiple-access channels.

A single product input p induces the polytope of rate vectors with
R(S) <= b(S) = I(X_S ; Y | X_{S^c}) for every non-empty S.  The union of
these polytopes over product inputs, written C below, has no closed form,
so membership in C (and in the larger even-delay and partly-asynchronous
regions built from convex combinations of its points) is decided by witness
search over a deterministic grid with local refinement.  A not-found answer
is a search failure at the given budget, never a certificate of
non-membership.

Sender indices are 0-based throughout; subsets are canonical sorted tuples
and "lexicographically smallest" compares those tuples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from amacsim.infocore import (
    Distribution,
    DmcChannel,
    JointSystem,
    ProductInput,
    ValidationError,
    conditional_mutual_information,
)

MEMBERSHIP_TOL = 1e-6
POLYMATROID_TOL = 1e-9


class RegionSearchError(RuntimeError):
    """A geometric search procedure stalled or received degenerate input."""


def subsets(k: int, proper: bool = False) -> list[tuple[int, ...]]:
    """All non-empty subsets of range(k) as sorted tuples, lexicographic."""
    out = []
    for r in range(1, k + 1):
        if proper and r == k:
            continue
        out.extend(combinations(range(k), r))
    return sorted(out)


@dataclass(frozen=True)
class RateVector:
    rates: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=np.float64)
        if r.ndim != 1 or r.size == 0:
            raise ValidationError("rates must be a non-empty vector")
        if np.any(r < -MEMBERSHIP_TOL):
            raise ValidationError("negative rate coordinate")
        r = np.ascontiguousarray(r)
        r.setflags(write=False)
        object.__setattr__(self, "rates", r)

    @property
    def k(self) -> int:
        return self.rates.size

    def subset_sum(self, s: Sequence[int]) -> float:
        return float(self.rates[list(s)].sum())


def _as_rates(r, k: int) -> np.ndarray:
    arr = r.rates if isinstance(r, RateVector) else np.asarray(r, dtype=np.float64)
    if arr.shape != (k,):
        raise ValidationError(f"rate vector has shape {arr.shape}, expected ({k},)")
    return arr


@dataclass(frozen=True)
class RatePolytope:
    """Subset-bound polytope b(S) = I(X_S ; Y | X_{S^c}) for one (W, p)."""

    k: int
    bounds: dict[tuple[int, ...], float]
    channel: Optional[DmcChannel] = None
    inputs: Optional[ProductInput] = None

    def __post_init__(self):
        expected = subsets(self.k)
        if sorted(self.bounds) != expected:
            raise ValidationError("bounds must cover every non-empty subset exactly once")
        for s, v in self.bounds.items():
            if v < -POLYMATROID_TOL:
                raise ValidationError(f"negative bound b({s}) = {v}")
        for s in expected:
            for t in expected:
                if set(s) <= set(t) and self.bounds[s] > self.bounds[t] + POLYMATROID_TOL:
                    raise ValidationError(f"monotonicity fails: b({s}) > b({t})")
        for s in expected:
            for t in expected:
                u = tuple(sorted(set(s) | set(t)))
                n = tuple(sorted(set(s) & set(t)))
                rhs = self.bounds[u] + (self.bounds[n] if n else 0.0)
                if self.bounds[s] + self.bounds[t] < rhs - POLYMATROID_TOL:
                    raise ValidationError(f"submodularity fails at {s}, {t}")

    @property
    def full_set(self) -> tuple[int, ...]:
        return tuple(range(self.k))

    def sum_bound(self) -> float:
        return self.bounds[self.full_set]

    def bound_vector(self, order: Sequence[tuple[int, ...]] | None = None) -> np.ndarray:
        order = subsets(self.k) if order is None else list(order)
        return np.array([self.bounds[s] for s in order])


@dataclass(frozen=True)
class Ordering:
    pi: tuple[int, ...]

    def __post_init__(self):
        p = tuple(int(i) for i in self.pi)
        if sorted(p) != list(range(len(p))):
            raise ValidationError(f"{p} is not a permutation of 0..{len(p) - 1}")
        object.__setattr__(self, "pi", p)


@dataclass(frozen=True)
class EdgeType:
    """Proper non-empty subset whose bound is tight on the dominant face."""

    senders: tuple[int, ...]

    def __post_init__(self):
        s = tuple(sorted(int(i) for i in self.senders))
        if not s:
            raise ValidationError("edge type cannot be empty")
        object.__setattr__(self, "senders", s)


@dataclass(frozen=True)
class ComboPolytope:
    """Weighted combination: bounds are sum_i alpha_i b_i(S) (Lemma-2 region)."""

    components: tuple[RatePolytope, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        ks = {p.k for p in self.components}
        if len(ks) != 1:
            raise ValidationError("mixed dimensions in combination")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.size != len(self.components) or np.any(w < 0):
            raise ValidationError("need one non-negative weight per component")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @property
    def k(self) -> int:
        return self.components[0].k

    @property
    def bounds(self) -> dict[tuple[int, ...], float]:
        out = {}
        for s in subsets(self.k):
            out[s] = sum(w * p.bounds[s] for w, p in zip(self.weights, self.components))
        return out

    def sum_bound(self) -> float:
        return self.bounds[tuple(range(self.k))]


def polytope(channel: DmcChannel, inputs: ProductInput) -> RatePolytope:
    """b(S) for all 2^K - 1 subsets, computed exactly from the joint law."""
    inputs.check_shapes(channel)
    js = JointSystem.from_channel(channel, inputs)
    k = channel.num_senders
    bounds = {s: conditional_mutual_information(js, s) for s in subsets(k)}
    # clamp tiny negatives from float cancellation
    bounds = {s: max(v, 0.0) for s, v in bounds.items()}
    return RatePolytope(k=k, bounds=bounds, channel=channel, inputs=inputs)


def contains(poly: RatePolytope | ComboPolytope, r, tol: float = MEMBERSHIP_TOL) -> bool:
    rates = _as_rates(r, poly.k)
    if np.any(rates < -tol):
        return False
    bounds = poly.bounds
    return all(rates[list(s)].sum() <= bounds[s] + tol for s in subsets(poly.k))


def vertex(poly: RatePolytope, pi: Ordering | Sequence[int]) -> np.ndarray:
    """Dominant-face vertex for an ordering: coordinate pi_i gets
    I(X_{pi_i} ; Y | X_{pi_1..pi_{i-1}}), evaluated exactly from provenance."""
    if poly.channel is None or poly.inputs is None:
        raise ValidationError("vertex needs a polytope with (channel, inputs) provenance")
    order = pi.pi if isinstance(pi, Ordering) else Ordering(tuple(pi)).pi
    if len(order) != poly.k:
        raise ValidationError("ordering length mismatch")
    js = JointSystem.from_channel(poly.channel, poly.inputs)
    out = np.zeros(poly.k)
    for i, sender in enumerate(order):
        prefix = order[:i]
        # I(X_sender ; Y | X_prefix) with the remaining senders as noise:
        # marginalize the not-yet-decoded senders out of the joint table
        later = [s for s in order[i + 1 :]]
        table = js.table.sum(axis=tuple(later)) if later else js.table
        kept = [s for s in range(poly.k) if s not in later]
        js_stage = JointSystem(table)
        pos = kept.index(sender)
        out[sender] = conditional_mutual_information(js_stage, [pos])
    return out


def dominant_face_contains(poly: RatePolytope | ComboPolytope, r, tol: float = MEMBERSHIP_TOL) -> bool:
    rates = _as_rates(r, poly.k)
    return contains(poly, rates, tol) and abs(rates.sum() - poly.sum_bound()) <= tol


def edge_type(poly: RatePolytope | ComboPolytope, r, tol: float = MEMBERSHIP_TOL) -> Optional[EdgeType]:
    """Smallest (lexicographic) proper subset tight at r, or None if r is
    interior to the dominant face.  r must lie on the dominant face."""
    rates = _as_rates(r, poly.k)
    if not dominant_face_contains(poly, rates, tol):
        raise ValidationError("edge_type requires a point on the dominant face")
    bounds = poly.bounds
    for s in subsets(poly.k, proper=True):
        if abs(rates[list(s)].sum() - bounds[s]) <= tol:
            return EdgeType(s)
    return None


def combo_polytope(
    components: Sequence[tuple[DmcChannel, ProductInput]] | Sequence[RatePolytope],
    weights: Sequence[float],
) -> ComboPolytope:
    polys = tuple(
        c if isinstance(c, RatePolytope) else polytope(c[0], c[1]) for c in components
    )
    return ComboPolytope(components=polys, weights=tuple(weights))


# ---------------------------------------------------------------------------
# product-distribution grids and witness search
# ---------------------------------------------------------------------------

def simplex_grid(m: int, denom: int) -> Iterator[np.ndarray]:
    """All probability vectors on m symbols with entries i/denom."""
    if m == 1:
        yield np.array([1.0])
        return
    for comp in _compositions(denom, m):
        yield np.array(comp, dtype=np.float64) / denom


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head, *rest)


def product_input_grid(sizes: Sequence[int], denom: int) -> Iterator[ProductInput]:
    grids = [[Distribution(p) for p in simplex_grid(m, denom)] for m in sizes]
    for combo in product(*grids):
        yield ProductInput(tuple(combo))


@dataclass
class SearchBudget:
    """Caps the number of polytope evaluations in a region search."""

    evaluations: int = 20000
    used: int = 0

    def spend(self, n: int = 1) -> bool:
        self.used += n
        return self.used <= self.evaluations


def _violation(channel: DmcChannel, inputs: ProductInput, rates: np.ndarray) -> float:
    poly = polytope(channel, inputs)
    return max(rates[list(s)].sum() - poly.bounds[s] for s in subsets(poly.k))


def union_contains(
    channel: DmcChannel,
    r,
    budget: SearchBudget | int | None = None,
    tol: float = MEMBERSHIP_TOL,
    grid_denom: int = 16,
) -> Optional[ProductInput]:
    """Search for a witness p with r in R[W;p].

    Deterministic simplex grid (step 1/grid_denom) followed by pattern-search
    refinement from the least-violating grid point.  None means "not found at
    this budget", never a disproof.
    """
    rates = _as_rates(r, channel.num_senders)
    if isinstance(budget, int):
        budget = SearchBudget(evaluations=budget)
    budget = budget or SearchBudget()
    if np.all(np.abs(rates) <= tol):
        return ProductInput.uniform(channel.input_sizes)

    best: tuple[float, ProductInput] | None = None
    for p in product_input_grid(channel.input_sizes, grid_denom):
        if not budget.spend():
            break
        v = _violation(channel, p, rates)
        if v <= tol:
            return p
        if best is None or v < best[0]:
            best = (v, p)
    if best is None:
        return None
    return _refine_witness(channel, best[1], rates, tol, budget)


def _refine_witness(
    channel: DmcChannel,
    start: ProductInput,
    rates: np.ndarray,
    tol: float,
    budget: SearchBudget,
) -> Optional[ProductInput]:
    """Pattern search over per-sender simplices, shrinking the step."""
    current = [m.probs.copy() for m in start.marginals]
    value = _violation(channel, ProductInput(tuple(Distribution(p) for p in current)), rates)
    step = 1.0 / 32
    while step > 1e-4 and budget.spend(0) and budget.used < budget.evaluations:
        improved = False
        for sender, p in enumerate(current):
            m = p.size
            for i in range(m):
                for j in range(m):
                    if i == j or p[j] < step:
                        continue
                    if not budget.spend():
                        return None
                    trial = p.copy()
                    trial[j] -= step
                    trial[i] += step
                    cand = [q.copy() for q in current]
                    cand[sender] = trial
                    pi = ProductInput(tuple(Distribution(q) for q in cand))
                    v = _violation(channel, pi, rates)
                    if v < value - 1e-15:
                        current, value = cand, v
                        improved = True
                        if v <= tol:
                            return pi
        if not improved:
            step /= 2
    return None


# ---------------------------------------------------------------------------
# certificates and the specialized delay regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionCertificate:
    """Witness for membership: k = 1 is plain union membership, k >= 2 is a
    convex combination of dominant-region points of the listed polytopes."""

    witnesses: tuple[ProductInput, ...]
    weights: tuple[float, ...]
    points: tuple[np.ndarray, ...]

    @property
    def k(self) -> int:
        return len(self.witnesses)

    def combined_point(self) -> np.ndarray:
        return sum(w * p for w, p in zip(self.weights, self.points))


def _decompose_in_combo(
    polys: Sequence[RatePolytope],
    weights: Sequence[float],
    rates: np.ndarray,
    tol: float = MEMBERSHIP_TOL,
    extra_eq: Sequence[tuple[int, tuple[int, ...], float]] = (),
) -> Optional[list[np.ndarray]]:
    """Find x_i in P_i with sum_i alpha_i x_i = rates (Lemma-2 decomposition).

    extra_eq pins additional per-component subset sums: entries are
    (component index, subset, value) equality constraints.
    """
    k = polys[0].k
    n = len(polys)
    a_ub, b_ub = [], []
    for i, poly in enumerate(polys):
        for s in subsets(k):
            row = np.zeros(n * k)
            row[i * k + np.array(s)] = 1.0
            a_ub.append(row)
            b_ub.append(poly.bounds[s] + tol)
    a_eq, b_eq = [], []
    for j in range(k):
        row = np.zeros(n * k)
        for i, w in enumerate(weights):
            row[i * k + j] = w
        a_eq.append(row)
        b_eq.append(rates[j])
    for (i, s, val) in extra_eq:
        row = np.zeros(n * k)
        row[i * k + np.array(s)] = 1.0
        a_eq.append(row)
        b_eq.append(val)
    res = linprog(
        c=np.zeros(n * k),
        A_ub=np.array(a_ub),
        b_ub=np.array(b_ub),
        A_eq=np.array(a_eq),
        b_eq=np.array(b_eq),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        return None
    return [res.x[i * k : (i + 1) * k].copy() for i in range(n)]


def even_delay_region_contains(
    channel: DmcChannel,
    r,
    budget: SearchBudget | int | None = None,
    tol: float = MEMBERSHIP_TOL,
    grid_denom: int = 8,
) -> tuple[bool, Optional[RegionCertificate]]:
    """Membership in the even-delays region: C plus 1/2,1/2 combinations of
    points of C.  Returns a witness certificate when found within budget."""
    if channel.num_senders != 2:
        raise ValidationError("even-delay region is defined for K = 2")
    rates = _as_rates(r, 2)
    if isinstance(budget, int):
        budget = SearchBudget(evaluations=budget)
    budget = budget or SearchBudget()

    single = union_contains(channel, rates, budget=budget, tol=tol, grid_denom=grid_denom)
    if single is not None:
        return True, RegionCertificate((single,), (1.0,), (rates.copy(),))

    grid = []
    for p in product_input_grid(channel.input_sizes, grid_denom):
        if not budget.spend():
            break
        grid.append(polytope(channel, p))
    order = subsets(2)
    bvecs = np.array([g.bound_vector(order) for g in grid])
    rvec = np.array([rates[list(s)].sum() for s in order])
    # all pairs (i, j): (b_i + b_j)/2 >= rvec
    ok = (bvecs[:, None, :] + bvecs[None, :, :]) / 2.0 >= rvec[None, None, :] - tol
    ok = ok.all(axis=2)
    for i, j in sorted(zip(*np.nonzero(ok))):
        pts = _decompose_in_combo([grid[i], grid[j]], (0.5, 0.5), rates, tol)
        if pts is not None:
            return True, RegionCertificate(
                (grid[i].inputs, grid[j].inputs), (0.5, 0.5), tuple(pts)
            )
    return False, None


def partly_async_region_contains(
    channel: DmcChannel,
    r,
    budget: SearchBudget | int | None = None,
    tol: float = MEMBERSHIP_TOL,
    grid_denom: int = 4,
    max_components: int = 3,
    weight_denom: int = 4,
) -> tuple[bool, Optional[RegionCertificate]]:
    """Membership in union over p3 of the convex hull of same-p3 polytopes.

    Searches k <= 3 combinations (by Caratheodory three suffice) of polytopes
    R[W; p1 x p2 x p3] sharing the third distribution.
    """
    if channel.num_senders != 3:
        raise ValidationError("partly-asynchronous region is defined for K = 3")
    rates = _as_rates(r, 3)
    if isinstance(budget, int):
        budget = SearchBudget(evaluations=budget)
    budget = budget or SearchBudget()
    order = subsets(3)
    rvec = np.array([rates[list(s)].sum() for s in order])

    p3_grid = [Distribution(p) for p in simplex_grid(channel.input_sizes[2], grid_denom)]
    pair_grid = list(
        product(
            [Distribution(p) for p in simplex_grid(channel.input_sizes[0], grid_denom)],
            [Distribution(p) for p in simplex_grid(channel.input_sizes[1], grid_denom)],
        )
    )
    weight_steps = [w / weight_denom for w in range(weight_denom + 1)]

    for p3 in p3_grid:
        polys = []
        for p1, p2 in pair_grid:
            if not budget.spend():
                return False, None
            polys.append(polytope(channel, ProductInput((p1, p2, p3))))
        bvecs = np.array([g.bound_vector(order) for g in polys])
        # k = 1
        hit = np.nonzero((bvecs >= rvec[None, :] - tol).all(axis=1))[0]
        if hit.size:
            g = polys[int(hit[0])]
            return True, RegionCertificate((g.inputs,), (1.0,), (rates.copy(),))
        # k = 2
        for i, j in combinations(range(len(polys)), 2):
            for w in weight_steps:
                if not budget.spend():
                    return False, None
                combo = w * bvecs[i] + (1 - w) * bvecs[j]
                if (combo >= rvec - tol).all():
                    pts = _decompose_in_combo([polys[i], polys[j]], (w, 1 - w), rates, tol)
                    if pts is not None:
                        return True, RegionCertificate(
                            (polys[i].inputs, polys[j].inputs), (w, 1 - w), tuple(pts)
                        )
        # k = 3
        if max_components >= 3:
            for i, j, l in combinations(range(len(polys)), 3):
                for wi in weight_steps:
                    for wj in weight_steps:
                        if wi + wj > 1:
                            continue
                        if not budget.spend():
                            return False, None
                        wl = 1 - wi - wj
                        combo = wi * bvecs[i] + wj * bvecs[j] + wl * bvecs[l]
                        if (combo >= rvec - tol).all():
                            pts = _decompose_in_combo(
                                [polys[i], polys[j], polys[l]], (wi, wj, wl), rates, tol
                            )
                            if pts is not None:
                                return True, RegionCertificate(
                                    (polys[i].inputs, polys[j].inputs, polys[l].inputs),
                                    (wi, wj, wl),
                                    tuple(pts),
                                )
    return False, None


# ---------------------------------------------------------------------------
# Lemma-4 weight shifting: dominate with same-type edge points
# ---------------------------------------------------------------------------

def dominate_on_common_edges(
    polys: Sequence[RatePolytope],
    points: Sequence[np.ndarray],
    weights: Sequence[float],
    tol: float = 1e-7,
    max_steps: int = 10**4,
) -> tuple[tuple[float, ...], tuple[np.ndarray, ...], EdgeType]:
    """Adjust weights so the target is dominated by a same-type edge combination.

    Implements the weight-shifting from the convex-combination dominance
    argument: move weight toward higher-sum-rate components until the target
    lies on an edge of the combination's dominant face, then decompose along
    that edge type.  Raises RegionSearchError with a diagnostic if the
    iteration cannot make progress (degenerate inputs).
    """
    k = polys[0].k
    pts = [np.asarray(p, dtype=np.float64) for p in points]
    for poly, p in zip(polys, pts):
        if not dominant_face_contains(poly, p, 1e-6):
            raise ValidationError("every input point must lie on its dominant face")
    alpha = np.asarray(weights, dtype=np.float64)
    if abs(alpha.sum() - 1.0) > 1e-12 or np.any(alpha < 0):
        raise ValidationError("weights must be a probability vector")
    target = sum(a * p for a, p in zip(alpha, pts))
    order = subsets(k, proper=True)

    # trivial case: some proper subset already tight for every point
    for s in order:
        if all(abs(p[list(s)].sum() - poly.bounds[s]) <= 1e-6 for p, poly in zip(pts, polys)):
            return tuple(alpha), tuple(pts), EdgeType(s)

    heights = np.array([poly.sum_bound() for poly in polys])
    active = alpha > 1e-12
    steps = 0

    def combo_bound(a, s):
        return sum(ai * poly.bounds[s] for ai, poly in zip(a, polys))

    while steps < max_steps:
        steps += 1
        live = np.nonzero(active)[0]
        if live.size == 0:
            raise RegionSearchError("all weights vanished before an edge was reached")
        hmax, hmin = heights[live].max(), heights[live].min()
        if hmax - hmin > tol:
            m = live[np.argmax(heights[live])]
            l = live[np.argmin(heights[live])]
            # largest eps keeping target inside the shifted combination
            eps_cap = alpha[l]
            eps_star, s_star = eps_cap, None
            for s in order:
                slope = polys[m].bounds[s] - polys[l].bounds[s]
                gap = combo_bound(alpha, s) - target[list(s)].sum()
                if slope < -tol and gap / (-slope) < eps_star - 1e-15:
                    eps_star, s_star = gap / (-slope), s
            alpha = alpha.copy()
            alpha[m] += eps_star
            alpha[l] -= eps_star
            if alpha[l] <= 1e-12:
                alpha[l] = 0.0
                active[l] = False
            if s_star is not None:
                return _edge_decomposition(polys, alpha, target, s_star, tol)
            continue
        # equal heights: slide toward the first live component until a proper
        # bound pinches (linear in t, so the root is exact)
        i0 = live[0]
        t_star, s_star = None, None
        for s in order:
            g0 = combo_bound(alpha, s) - target[list(s)].sum()
            e = np.zeros_like(alpha)
            e[i0] = 1.0
            g1 = polys[i0].bounds[s] - target[list(s)].sum()
            if g1 < g0 - 1e-15:
                t = g0 / (g0 - g1)
                if 0 <= t <= 1 and (t_star is None or t < t_star):
                    t_star, s_star = t, s
        if s_star is None:
            raise RegionSearchError(
                "target interior to every slide direction: cannot reach an edge "
                "(is the combination already inside a single polytope?)"
            )
        e = np.zeros_like(alpha)
        e[i0] = 1.0
        alpha = (1 - t_star) * alpha + t_star * e
        return _edge_decomposition(polys, alpha, target, s_star, tol)
    raise RegionSearchError(f"no edge reached after {max_steps} steps (tol={tol})")


def _edge_decomposition(polys, alpha, target, s_star, tol):
    """Find a dominating point on the type-s_star combo edge and split it into
    per-component edge points."""
    k = polys[0].k
    live = [i for i, a in enumerate(alpha) if a > 1e-12]
    live_polys = [polys[i] for i in live]
    live_alpha = [alpha[i] for i in live]
    combo_sum = sum(a * p.sum_bound() for a, p in zip(live_alpha, live_polys))
    combo_s = sum(a * p.bounds[s_star] for a, p in zip(live_alpha, live_polys))
    # dominating y: y >= target, on the combo dominant face, type-s_star tight
    rows, rhs = [], []
    for s in subsets(k):
        row = np.zeros(k)
        row[list(s)] = 1.0
        rows.append(row)
        rhs.append(sum(a * p.bounds[s] for a, p in zip(live_alpha, live_polys)) + tol)
    res = linprog(
        c=np.zeros(k),
        A_ub=np.vstack([np.array(rows), -np.eye(k)]),
        b_ub=np.array(rhs + list(-target)),
        A_eq=np.array([[1.0] * k, [1.0 if i in s_star else 0.0 for i in range(k)]]),
        b_eq=np.array([combo_sum, combo_s]),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise RegionSearchError(f"no dominating point on the type-{s_star} edge")
    y = res.x
    extra = [(i, s_star, p.bounds[s_star]) for i, p in enumerate(live_polys)]
    extra += [(i, tuple(range(k)), p.sum_bound()) for i, p in enumerate(live_polys)]
    pts = _decompose_in_combo(live_polys, live_alpha, y, tol=tol, extra_eq=extra)
    if pts is None:
        raise RegionSearchError(f"edge decomposition infeasible for type {s_star}")
    out_alpha = tuple(float(a) for a in live_alpha)
    return out_alpha, tuple(pts), EdgeType(s_star)
