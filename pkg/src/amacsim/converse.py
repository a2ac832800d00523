"""Single-letter converse bounds evaluated from codebook statistics.

For a codebook system in use under a delay system, the rate sum over any
sender subset S is bounded by

    v(S) = I(X_{S,Q+D_S} ; Y_Q | X_{S^c,Q+D_{S^c}}, Q, D) + eps_n,

with Q uniform over positions, indices mod n, and eps_n = R([K]) P_e + 1/n.
Because messages are uniform and independent, the law of the symbol at a
shifted position is the codeword-averaged per-position marginal, so the
conditional mutual information is an exact weighted average over (q, d)
cells -- no simulation involved.  Virtual codebooks use their generating laws
(the codeword average converges to them at rate 2^{-nR/2}, far below any
reported tolerance).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence

import numpy as np

from amacsim.infocore import DmcChannel, ValidationError, entropy_bits
from amacsim.regions import subsets
from amacsim.simkernel import Codebook, CodebookSystem, DelaySystem

EXACT_CELL_CAP = 10**6


def position_marginals(cb: Codebook) -> np.ndarray:
    """Codeword-averaged symbol law per position, shape (n, |X|).

    Exact empirical average for materialized codebooks; the generating law
    for virtual ones (exact in the ensemble limit).
    """
    size = cb.schedule.alphabet_size
    if cb.materialized is not None:
        out = np.zeros((cb.n, size))
        for x in range(size):
            out[:, x] = (cb.materialized == x).mean(axis=0)
        return out
    out = np.zeros((cb.n, size))
    for i in range(cb.n):
        out[i] = cb.schedule.law_at(i, cb.n).probs
    return out


def _batch_cmi(tables: np.ndarray, senders: tuple[int, ...], k: int) -> np.ndarray:
    """I(X_S ; Y | X_{S^c}) for a batch of joint tables (batch, x_1..x_k, y)."""
    y_axis = k + 1
    s_axes = tuple(a + 1 for a in senders)

    def ent(t: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
        if axes:
            t = t.sum(axis=axes)
        flat = t.reshape(t.shape[0], -1)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(flat > 0, flat * np.log2(flat), 0.0)
        return -terms.sum(axis=1)

    h_inputs = ent(tables, (y_axis,))
    h_scy = ent(tables, s_axes)
    h_sc = ent(tables, s_axes + (y_axis,))
    h_all = ent(tables, ())
    return h_inputs + h_scy - h_sc - h_all


def _cell_tables(
    marginals: Sequence[np.ndarray],
    channel: DmcChannel,
    qs: np.ndarray,
    d: Sequence[int],
) -> np.ndarray:
    """Joint (x_1..x_K, y) tables for positions (q + d_m) mod n, batched over qs."""
    n = marginals[0].shape[0]
    k = len(marginals)
    batch = None
    for m in range(k):
        pm = marginals[m][(qs + d[m]) % n]  # (B, |X_m|)
        shape = [pm.shape[0]] + [1] * k
        shape[m + 1] = pm.shape[1]
        pm = pm.reshape(shape)
        batch = pm if batch is None else batch * pm
    return batch[..., None] * channel.transition[None]


@dataclass
class EmpiricalBoundReport:
    """v(S) per subset plus the epsilon term and evaluation metadata."""

    n: int
    delay_kind: str
    values: dict[tuple[int, ...], float]
    epsilon: Optional[float]
    exact: bool
    cells_evaluated: int
    flags: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "delay_kind": self.delay_kind,
                "values": {"+".join(str(i) for i in s): v for s, v in self.values.items()},
                "epsilon": self.epsilon,
                "exact": self.exact,
                "cells_evaluated": self.cells_evaluated,
                "flags": self.flags,
            },
            indent=2,
        )

    def csv_rows(self) -> list[dict]:
        return [
            {"subset": "+".join(str(i) for i in s), "bound_bits": v}
            for s, v in sorted(self.values.items())
        ]


def relative_vector_law(ds: DelaySystem, n: int) -> dict[tuple[int, ...], float]:
    """Law of (0, D_2 - D_1, ..., D_K - D_1) mod n.

    Because Q is uniform mod n and independent of D, conditioning on (Q, D)
    collapses exactly to conditioning on (Q', relative vector) with
    Q' = Q + D_1: the substitution behind the two-sender relative-delay form.
    """
    if ds.kind == "totally_async":
        weight = 1.0 / n ** (ds.k - 1)
        return {(0, *rel): weight for rel in product(range(n), repeat=ds.k - 1)}
    if ds.kind == "partly_async3":
        return {(0, 0, r): 1.0 / n for r in range(n)}
    if ds.kind == "sync_groups":
        others = ds.groups[1:]
        out: dict[tuple[int, ...], float] = {}
        weight = 1.0 / n ** len(others)
        for rels in product(range(n), repeat=len(others)):
            vec = [0] * ds.k
            for g, r in zip(others, rels):
                for i in g:
                    vec[i] = r
            out[tuple(vec)] = out.get(tuple(vec), 0.0) + weight
        return out
    out = {}
    for d in ds.support(n):
        rel = tuple((x - d[0]) % n for x in d)
        out[rel] = out.get(rel, 0.0) + ds.probability(d, n)
    return out


def empirical_bound(
    cb: CodebookSystem,
    ds: DelaySystem,
    channel: DmcChannel,
    senders: Sequence[int],
    condition_on_delay: bool = True,
    cell_cap: int = EXACT_CELL_CAP,
) -> tuple[float, dict]:
    """v(S): exact weighted average of per-cell conditional mutual
    informations; the (q, d) double sum is collapsed mod n to the relative
    delay vector first, so the exact cell count is n x |relative support|.

    condition_on_delay=False evaluates the weaker delay-marginalized bound
    (the per-q mixture law), which can only be larger.
    Returns (bits, info) where info carries exactness and cell counts.
    """
    k = channel.num_senders
    s = tuple(sorted(int(i) for i in senders))
    if not s or s[0] < 0 or s[-1] >= k:
        raise ValidationError(f"bad sender subset {senders}")
    if cb.num_senders != k:
        raise ValidationError("codebook/channel sender mismatch")
    n = cb.n
    marginals = [position_marginals(book) for book in cb.codebooks]

    rel_law = relative_vector_law(ds, n)
    atoms = sorted(rel_law.items())
    flags = {}
    if len(atoms) * n > cell_cap:
        stride = int(np.ceil(len(atoms) * n / cell_cap))
        atoms = atoms[::stride]
        flags["subsampled_support"] = len(atoms)
    weights = np.array([w for _, w in atoms])
    weights = weights / weights.sum()

    qs = np.arange(n)
    if condition_on_delay:
        total = 0.0
        for (rel, _), wgt in zip(atoms, weights):
            tables = _cell_tables(marginals, channel, qs, rel)
            total += wgt * _batch_cmi(tables, s, k).mean()
        value = total
    else:
        # drop the delay from the condition (keep the position): the per-q
        # mixture over relative vectors; can only overestimate
        mix = None
        for (rel, _), wgt in zip(atoms, weights):
            tables = wgt * _cell_tables(marginals, channel, qs, rel)
            mix = tables if mix is None else mix + tables
        value = float(_batch_cmi(mix, s, k).mean())
    info = {
        "exact": "subsampled_support" not in flags,
        "cells": len(atoms) * n,
        "flags": flags,
    }
    return float(value), info


def epsilon_n(rates: Sequence[float], p_e: float, n: int) -> float:
    """eps_n = R([K]) P_e + 1/n."""
    return float(sum(rates) * p_e + 1.0 / n)


def bound_report(
    cb: CodebookSystem,
    ds: DelaySystem,
    channel: DmcChannel,
    p_e: Optional[float] = None,
    condition_on_delay: bool = True,
) -> EmpiricalBoundReport:
    """v(S) for every non-empty subset, plus eps_n when an error estimate is
    supplied (otherwise epsilon stays None: a symbolic addend)."""
    k = channel.num_senders
    values = {}
    info = {}
    for s in subsets(k):
        values[s], info = empirical_bound(cb, ds, channel, s, condition_on_delay)
    eps = None if p_e is None else epsilon_n(cb.spec.rates, p_e, cb.n)
    return EmpiricalBoundReport(
        n=cb.n,
        delay_kind=ds.kind,
        values=values,
        epsilon=eps,
        exact=info.get("exact", True),
        cells_evaluated=info.get("cells", 0),
        flags=info.get("flags", {}),
    )


def relative_delay_bound(
    cb: CodebookSystem,
    relative_pmf: dict[int, float],
    channel: DmcChannel,
    senders: Sequence[int],
) -> float:
    """Two-sender bound in relative-delay form: positions (q, q - d mod n)
    weighted by the relative-delay law.  Equals the joint-delay evaluation
    whenever the joint system induces the same relative-delay law."""
    if channel.num_senders != 2 or cb.num_senders != 2:
        raise ValidationError("relative-delay form is for two senders")
    s = tuple(sorted(int(i) for i in senders))
    n = cb.n
    total = sum(relative_pmf.values())
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"relative-delay pmf sums to {total!r}")
    marginals = [position_marginals(book) for book in cb.codebooks]
    qs = np.arange(n)
    value = 0.0
    for d, w in sorted(relative_pmf.items()):
        if w == 0:
            continue
        tables = _cell_tables(marginals, channel, qs, (0, (-d) % n))
        value += w * _batch_cmi(tables, s, 2).mean()
    return float(value)


def relative_delay_law(ds: DelaySystem, n: int) -> dict[int, float]:
    """Law of D_1 - D_2 mod n under a two-sender delay system."""
    if ds.k != 2:
        raise ValidationError("relative delay needs K = 2")
    out: dict[int, float] = {}
    for d in ds.support(n):
        rel = (d[0] - d[1]) % n
        out[rel] = out.get(rel, 0.0) + ds.probability(d, n)
    return out
