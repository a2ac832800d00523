"""Sliding-window typicality decoders and the successive-decoding pipelines.

The receiver never knows the frame delays: to estimate a sender's block-0
message it scans the n candidate start positions, testing each codeword for
typicality (average information density within delta of the reference mutual
information, per segment when codewords have two-segment laws).  A decode
succeeds when exactly one message survives; the surviving offset reveals the
delay, which later successive stages reuse (synchronized senders share it).

Codebooks can be virtual (2^{nR} codewords, far beyond materialization).
The scan then covers exactly those codewords present in the window; the
remaining i.i.d. competitors are handled statistically: the probability that
a fresh codeword lands in the typicality band is computed exactly by grouped
convolution over output-symbol classes when the alphabets permit, otherwise
bracketed by Chernoff upper and tilted-Chebyshev lower bounds.  When the
expected spurious count is conclusively tiny or huge the outcome is forced;
in between it is Bernoulli-sampled (flagged), and if only loose brackets are
available the trial is flagged indeterminate and scored as an error.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from amacsim.infocore import (
    Distribution,
    DmcChannel,
    ProductInput,
    ValidationError,
    density_table,
    mutual_information_bits,
    pair_law,
    stage_channel,
)
from amacsim.regions import Ordering, polytope, vertex
from amacsim.simkernel import (
    Codebook,
    CodebookSpec,
    CodebookSystem,
    DelaySystem,
    InterleavedCodebook,
    SymbolSchedule,
    TransmissionWindow,
    TrialDecode,
    generate_codebooks,
    philox_stream,
)
from amacsim.splitting import LiftedChannel, split_for_edge

NEG_CLAMP = -1e12          # stands in for -inf inside prefix sums
LOG2_NO_SPURIOUS = -20.0   # lambda below 2^-20: no spurious survivor
SPURIOUS_CERTAIN = 32.0    # lambda above 32: some spurious survivor certain
EXACT_CONV_CAP = 300_000   # atom budget for exact band probabilities
_LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class TypicalityParams:
    """delta: half-width of the typicality band in bits/symbol (applied per
    segment for two-segment laws); informed decoders skip the offset scan."""

    delta: float
    informed: bool = False

    def __post_init__(self):
        if self.delta <= 0:
            raise ValidationError("delta must be positive")


def default_delta(mutual_info: float) -> float:
    """Default band half-width: a tenth of the relevant mutual information."""
    return 0.1 * mutual_info


@dataclass(frozen=True)
class SeparatingPattern:
    """ceil(alpha*n) consecutive codeword indices (mod n) that passed through
    the first segment channel."""

    start: int
    length: int
    n: int

    def __post_init__(self):
        if not (0 <= self.start < self.n) or not (0 < self.length <= self.n):
            raise ValidationError("separating pattern out of range")

    def indices(self) -> np.ndarray:
        return (self.start + np.arange(self.length)) % self.n


@dataclass
class DecodeOutcome:
    """Result of decoding one sender's block(s): either messages or a failure."""

    messages: dict[int, int] = field(default_factory=dict)  # block index -> message
    delay: Optional[int] = None
    pattern: Optional[int] = None
    failure: Optional[str] = None
    flags: set[str] = field(default_factory=set)
    tests: int = 0
    tests_per_candidate_max: int = 0

    @property
    def ok(self) -> bool:
        return self.failure is None

    def __post_init__(self):
        if self.failure is not None and self.messages:
            raise ValidationError("an outcome carries either messages or a failure")


# ---------------------------------------------------------------------------
# stage laws
# ---------------------------------------------------------------------------

class SegmentLaw:
    """One segment's pair law with cached density table and moments."""

    def __init__(self, joint_xy: np.ndarray):
        self.joint = np.asarray(joint_xy, dtype=np.float64)
        raw = density_table(self.joint)
        mask = self.joint > 0
        self.mutual_info = float((self.joint[mask] * raw[mask]).sum())
        self.density = np.where(np.isfinite(raw), raw, NEG_CLAMP)
        self.px = self.joint.sum(axis=1)
        self.num_outputs = self.joint.shape[1]


class StageLaw:
    """Reference law for one decoding stage: single- or two-segment.

    `boundary(n)` gives the number of codeword positions under the first law.
    """

    def __init__(self, first: np.ndarray, second: Optional[np.ndarray] = None,
                 alpha: float = 1.0):
        self.a = SegmentLaw(first)
        self.b = SegmentLaw(second) if second is not None else None
        self.alpha = alpha
        if self.b is not None and not (0 < alpha < 1):
            raise ValidationError("two-segment law needs alpha in (0, 1)")
        if self.b is not None and self.b.joint.shape != self.a.joint.shape:
            raise ValidationError("segment laws must share alphabets")

    @property
    def two_segment(self) -> bool:
        return self.b is not None

    def boundary(self, n: int) -> int:
        return n if self.b is None else int(np.ceil(self.alpha * n))

    def average_mutual_info(self, n: int) -> float:
        bnd = self.boundary(n)
        if self.b is None:
            return self.a.mutual_info
        return (bnd * self.a.mutual_info + (n - bnd) * self.b.mutual_info) / n


def stage_law_from(channel: DmcChannel, p: Distribution) -> StageLaw:
    return StageLaw(pair_law(channel, p))


# ---------------------------------------------------------------------------
# fresh-codeword hit probabilities (virtual competitors)
# ---------------------------------------------------------------------------

def _multinomial_atoms(values: np.ndarray, probs: np.ndarray, count: int):
    """Sum distribution of `count` i.i.d. draws over finite atoms.

    Returns (sums, natural-log weights); excluded (zero-probability or
    zero-joint-mass) atoms simply lose their weight, which is exactly the
    probability that the sum stays finite and in range.
    """
    keep = (probs > 0) & (values > NEG_CLAMP / 2)
    values = values[keep]
    probs = probs[keep]
    m = values.size
    if m == 0:
        return np.array([]), np.array([])
    if m == 1:
        return np.array([values[0] * count]), np.array([count * np.log(probs[0])])
    if m == 2:
        a = np.arange(count + 1)
        sums = a * values[0] + (count - a) * values[1]
        logw = (
            gammaln(count + 1)
            - gammaln(a + 1)
            - gammaln(count - a + 1)
            + a * np.log(probs[0])
            + (count - a) * np.log(probs[1])
        )
        return sums, logw
    # small alphabets only: enumerate compositions recursively
    sums_list, logw_list = [], []

    def rec(idx, remaining, s, lw):
        if idx == m - 1:
            sums_list.append(s + remaining * values[idx])
            logw_list.append(lw + remaining * np.log(probs[idx]) - gammaln(remaining + 1))
            return
        for c in range(remaining + 1):
            rec(idx + 1, remaining - c, s + c * values[idx], lw + c * np.log(probs[idx]) - gammaln(c + 1))

    rec(0, count, 0.0, gammaln(count + 1))
    return np.array(sums_list), np.array(logw_list)


def _convolve_atoms(a, b):
    va, la = a
    vb, lb = b
    if va.size == 0 or vb.size == 0:
        return np.array([]), np.array([])
    v = (va[:, None] + vb[None, :]).ravel()
    l = (la[:, None] + lb[None, :]).ravel()
    return v, l


def band_logprob_exact(
    law: SegmentLaw, counts: np.ndarray, lo: float, hi: float, cap: int = EXACT_CONV_CAP
) -> Optional[float]:
    """log2 P(sum of densities in [lo, hi]) for a fresh codeword against a
    window with `counts[y]` positions showing output symbol y.  Exact up to
    float rounding; None when the atom budget is exceeded."""
    groups = []
    for y in range(law.num_outputs):
        c = int(counts[y])
        if c == 0:
            continue
        atoms = _multinomial_atoms(law.density[:, y], law.px, c)
        if atoms[0].size == 0:
            return -np.inf  # every draw at this symbol kills the sum
        groups.append(atoms)
    if not groups:
        return -np.inf
    groups.sort(key=lambda g: g[0].size)
    head = groups[0]
    for g in groups[1:-1] if len(groups) > 1 else []:
        if head[0].size * g[0].size > cap:
            return None
        head = _convolve_atoms(head, g)
    if len(groups) == 1:
        vals, logw = head
        mask = (vals >= lo - 1e-12) & (vals <= hi + 1e-12)
        if not mask.any():
            return -np.inf
        return float(logsumexp(logw[mask]) / _LN2)
    tail_v, tail_l = groups[-1]
    if head[0].size * 4 > cap * 64:
        return None
    order = np.argsort(tail_v)
    tail_v = tail_v[order]
    tail_l = tail_l[order]
    cum = np.logaddexp.accumulate(tail_l)
    hv, hl = head
    i1 = np.searchsorted(tail_v, lo - hv - 1e-12, side="left")
    i2 = np.searchsorted(tail_v, hi - hv + 1e-12, side="right")
    terms = []
    for j in range(hv.size):
        if i2[j] <= i1[j]:
            continue
        upper = cum[i2[j] - 1]
        if i1[j] == 0:
            mass = upper
        else:
            ratio = np.exp(cum[i1[j] - 1] - upper)
            if ratio >= 1.0 - 1e-15:
                continue  # interval carries no mass
            mass = upper + np.log1p(-ratio)
        terms.append(hl[j] + mass)
    if not terms:
        return -np.inf
    return float(logsumexp(np.array(terms)) / _LN2)


class MgfTables:
    """Base-2 cumulant tables of the fresh-codeword density per output symbol,
    on a fixed tilt grid.  Everything needed for Chernoff/tilted bounds."""

    T_GRID = np.concatenate([np.linspace(0.0, 2.0, 17), np.linspace(2.5, 12.0, 20)])

    def __init__(self, law: SegmentLaw):
        d = law.density  # (x, y), NEG_CLAMP for impossible cells
        p = law.px
        ts = self.T_GRID
        dt = d.T[None, :, :]  # (1, y, x)
        with np.errstate(over="ignore", under="ignore"):
            w = p[None, None, :] * np.exp2(ts[:, None, None] * np.clip(dt, -1e6, None))
        # w: (t, y, x); impossible cells contribute exp2(t*NEG)=0 for t>0;
        # at t=0 they must be excluded too (the draw happens, the sum is
        # effectively -inf, never inside a finite band)
        w = np.where(dt <= NEG_CLAMP / 2, 0.0, w)
        mass = w.sum(axis=2)
        safe = np.maximum(mass, 1e-300)
        self.g = np.log2(safe)  # (t, y): log2 MGF contribution
        m1 = (w * d.T[None]).sum(axis=2) / safe
        m2 = (w * (d.T[None] ** 2)).sum(axis=2) / safe
        self.m1 = m1
        self.varc = np.maximum(m2 - m1**2, 0.0)
        self.ts = ts


def chernoff_upper_log2(
    tables: MgfTables, prefix_g: np.ndarray, starts: np.ndarray, stops: np.ndarray, lo: float
) -> np.ndarray:
    """log2 P(sum over [start, stop) >= lo), minimized over the tilt grid.

    prefix_g has shape (t, len+1): running sums of tables.g over the window.
    """
    lam = prefix_g[:, stops] - prefix_g[:, starts]  # (t, m)
    bound = lam - tables.ts[:, None] * lo
    return np.minimum(bound.min(axis=0), 0.0)


def tilted_lower_log2(
    tables: MgfTables,
    prefix_g: np.ndarray,
    prefix_m1: np.ndarray,
    prefix_var: np.ndarray,
    start: int,
    stop: int,
    lo: float,
    hi: float,
) -> float:
    """log2 lower bound on P(sum over [start, stop) in [lo, hi]) by tilting
    into the band and bounding the tilted mass with Chebyshev."""
    lam = prefix_g[:, stop] - prefix_g[:, start]
    mu = prefix_m1[:, stop] - prefix_m1[:, start]
    var = prefix_var[:, stop] - prefix_var[:, start]
    inside = (mu > lo) & (mu < hi)
    if not inside.any():
        return -np.inf
    a = np.minimum(mu - lo, hi - mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        mass = 1.0 - var / np.maximum(a**2, 1e-300)
    ok = inside & (mass > 0)
    if not ok.any():
        return -np.inf
    vals = lam - tables.ts * hi + np.where(ok, np.log2(np.maximum(mass, 1e-300)), -np.inf)
    return float(vals[ok].max() if np.isfinite(vals[ok]).any() else -np.inf)


# ---------------------------------------------------------------------------
# candidate sets
# ---------------------------------------------------------------------------

@dataclass
class CandidateSet:
    """Codewords scanned exactly, plus the count of unscanned competitors."""

    messages: list[int]
    rows: np.ndarray  # (k, n) int
    total_codewords: int

    @property
    def virtual_count(self) -> int:
        return self.total_codewords - len(self.messages)


def candidates_from_codebook(cb: Codebook, window_messages: Sequence[int]) -> CandidateSet:
    """All rows when materialized; otherwise exactly the window's codewords."""
    if cb.materialized is not None:
        msgs = list(range(cb.num_codewords))
        return CandidateSet(msgs, np.asarray(cb.materialized), cb.num_codewords)
    msgs = sorted(set(int(m) for m in window_messages))
    rows = np.vstack([cb.row(m) for m in msgs]) if msgs else np.zeros((0, cb.n), dtype=np.int64)
    return CandidateSet(msgs, rows, cb.num_codewords)


# ---------------------------------------------------------------------------
# the scan engine
# ---------------------------------------------------------------------------

class BlockScanner:
    """Scans one composite sequence for one sender's codewords.

    seq: composite output symbols over times [t0, t0 + len).
    All offsets are absolute times; the scanner translates internally.
    """

    def __init__(self, seq: np.ndarray, t0: int, law: StageLaw, n: int, delta: float):
        self.seq = np.asarray(seq, dtype=np.intp)
        self.t0 = t0
        self.law = law
        self.n = n
        self.delta = delta
        b = law.boundary(n)
        self.bnd = b
        self.lo_a = b * (law.a.mutual_info - delta)
        self.hi_a = b * (law.a.mutual_info + delta)
        if law.two_segment:
            self.lo_b = (n - b) * (law.b.mutual_info - delta)
            self.hi_b = (n - b) * (law.b.mutual_info + delta)
        self._mgf_a: Optional[MgfTables] = None
        self._mgf_b: Optional[MgfTables] = None
        self._prefix: dict[str, np.ndarray] = {}

    # -- exact candidate densities ------------------------------------------

    def _window_view(self, starts: np.ndarray) -> np.ndarray:
        idx = (starts - self.t0)[:, None] + np.arange(self.n)[None, :]
        if idx.min() < 0 or idx.max() >= self.seq.size:
            raise ValidationError("scan window leaves the composite sequence")
        return self.seq[idx]  # (m, n)

    def candidate_survivors(
        self, cands: CandidateSet, offsets: np.ndarray
    ) -> tuple[list[tuple[int, int]], int]:
        """(message, offset) pairs passing the band test; plus test count."""
        if cands.rows.shape[0] == 0:
            return [], 0
        win = self._window_view(offsets)  # (m, n)
        survivors = []
        tests = 0
        cols = np.arange(self.n)
        for row, msg in zip(cands.rows, cands.messages):
            da = self.law.a.density[row[None, :], win]  # (m, n)
            if not self.law.two_segment:
                sums = da.sum(axis=1)
                ok = (sums >= self.lo_a) & (sums <= self.hi_a)
            else:
                db = self.law.b.density[row[None, :], win]
                sa = da[:, : self.bnd].sum(axis=1)
                sb = db[:, self.bnd :].sum(axis=1)
                ok = (
                    (sa >= self.lo_a)
                    & (sa <= self.hi_a)
                    & (sb >= self.lo_b)
                    & (sb <= self.hi_b)
                )
            tests += offsets.size
            for i in np.nonzero(ok)[0]:
                survivors.append((msg, int(offsets[i])))
        return survivors, tests

    def pattern_survivors(
        self, cands: CandidateSet, offsets: np.ndarray
    ) -> tuple[list[tuple[int, int, int]], int]:
        """(message, offset, pattern) triples for the unknown-pattern scan."""
        if not self.law.two_segment:
            raise ValidationError("pattern scan requires a two-segment law")
        if cands.rows.shape[0] == 0:
            return [], 0
        win = self._window_view(offsets)  # (m, n)
        n, b = self.n, self.bnd
        survivors = []
        tests = 0
        for row, msg in zip(cands.rows, cands.messages):
            da = self.law.a.density[row[None, :], win]
            db = self.law.b.density[row[None, :], win]
            pa = np.concatenate([np.zeros((offsets.size, 1)), np.cumsum(np.tile(da, 2), axis=1)], axis=1)
            pb = np.concatenate([np.zeros((offsets.size, 1)), np.cumsum(np.tile(db, 2), axis=1)], axis=1)
            t0s = np.arange(n)
            sa = pa[:, t0s + b] - pa[:, t0s]  # circular interval sums of law A
            sb_tot = pb[:, n] - pb[:, 0]
            sb = sb_tot[:, None] - (pb[:, t0s + b] - pb[:, t0s])
            ok = (
                (sa >= self.lo_a)
                & (sa <= self.hi_a)
                & (sb >= self.lo_b)
                & (sb <= self.hi_b)
            )
            tests += offsets.size * n
            for i, t0 in zip(*np.nonzero(ok)):
                survivors.append((msg, int(offsets[i]), int(t0)))
        return survivors, tests

    # -- virtual-competitor accounting ----------------------------------------

    def _prefix_tables(self, which: str) -> tuple[MgfTables, np.ndarray, np.ndarray, np.ndarray]:
        if which == "a":
            if self._mgf_a is None:
                self._mgf_a = MgfTables(self.law.a)
            mgf = self._mgf_a
        else:
            if self._mgf_b is None:
                self._mgf_b = MgfTables(self.law.b)
            mgf = self._mgf_b
        key_g = which + "_g"
        if key_g not in self._prefix:
            g = mgf.g[:, self.seq]
            m1 = mgf.m1[:, self.seq]
            vc = mgf.varc[:, self.seq]
            z = np.zeros((mgf.ts.size, 1))
            self._prefix[key_g] = np.concatenate([z, np.cumsum(g, axis=1)], axis=1)
            self._prefix[which + "_m"] = np.concatenate([z, np.cumsum(m1, axis=1)], axis=1)
            self._prefix[which + "_v"] = np.concatenate([z, np.cumsum(vc, axis=1)], axis=1)
        return mgf, self._prefix[key_g], self._prefix[which + "_m"], self._prefix[which + "_v"]

    def _counts_for(self, start: int, stop: int, num_outputs: int) -> np.ndarray:
        return np.bincount(self.seq[start:stop], minlength=num_outputs)

    def fresh_logq_exact(self, offsets: np.ndarray) -> Optional[np.ndarray]:
        """Exact log2 per-offset fresh-codeword hit probabilities, or None."""
        out = np.empty(offsets.size)
        for i, o in enumerate(offsets):
            s = o - self.t0
            if not self.law.two_segment:
                q = band_logprob_exact(
                    self.law.a, self._counts_for(s, s + self.n, self.law.a.num_outputs),
                    self.lo_a, self.hi_a,
                )
                if q is None:
                    return None
            else:
                qa = band_logprob_exact(
                    self.law.a, self._counts_for(s, s + self.bnd, self.law.a.num_outputs),
                    self.lo_a, self.hi_a,
                )
                qb = band_logprob_exact(
                    self.law.b, self._counts_for(s + self.bnd, s + self.n, self.law.b.num_outputs),
                    self.lo_b, self.hi_b,
                )
                if qa is None or qb is None:
                    return None
                q = qa + qb
            out[i] = q
        return out

    def fresh_logq_upper(self, offsets: np.ndarray) -> np.ndarray:
        starts = offsets - self.t0
        mgf_a, pg_a, _, _ = self._prefix_tables("a")
        ua = chernoff_upper_log2(mgf_a, pg_a, starts, starts + self.bnd, self.lo_a)
        if not self.law.two_segment:
            return ua
        mgf_b, pg_b, _, _ = self._prefix_tables("b")
        ub = chernoff_upper_log2(mgf_b, pg_b, starts + self.bnd, starts + self.n, self.lo_b)
        return ua + ub

    def fresh_logq_lower(self, offsets: np.ndarray) -> np.ndarray:
        out = np.empty(offsets.size)
        mgf_a, pg_a, pm_a, pv_a = self._prefix_tables("a")
        if self.law.two_segment:
            mgf_b, pg_b, pm_b, pv_b = self._prefix_tables("b")
        for i, o in enumerate(offsets):
            s = o - self.t0
            la = tilted_lower_log2(
                mgf_a, pg_a, pm_a, pv_a, s, s + self.bnd, self.lo_a, self.hi_a
            )
            if self.law.two_segment:
                lb = tilted_lower_log2(
                    mgf_b, pg_b, pm_b, pv_b, s + self.bnd, s + self.n, self.lo_b, self.hi_b
                )
                la = la + lb
            out[i] = la
        return out

    def pattern_logq_upper(self, offsets: np.ndarray) -> float:
        """log2 sum over (offset, pattern) of fresh hit probability bounds."""
        starts = offsets - self.t0
        mgf_a, pg_a, _, _ = self._prefix_tables("a")
        mgf_b, pg_b, _, _ = self._prefix_tables("b")
        n, b = self.n, self.bnd
        total = -np.inf
        t0s = np.arange(n)
        for s in starts:
            ua = _interval_chernoff_pattern(mgf_a, pg_a, int(s), n, t0s, b, self.lo_a)
            ub = _interval_chernoff_pattern(mgf_b, pg_b, int(s), n, t0s, b, self.lo_b, complement=True)
            total = np.logaddexp2(total, logsumexp((ua + ub) * _LN2) / _LN2)
        return float(total)


def _circular_interval_sums(prefix: np.ndarray, s: int, n: int, t0s: np.ndarray, b: int) -> np.ndarray:
    """Sums over the circular codeword interval [t0, t0+b) mod n inside the
    window starting at prefix position s; shape (t, len(t0s))."""
    wrap = t0s + b > n
    plain = prefix[:, np.minimum(s + t0s + b, s + n)] - prefix[:, s + t0s]
    extra = prefix[:, s + np.maximum(t0s + b - n, 0)] - prefix[:, [s]]
    return np.where(wrap[None, :], plain + extra, plain)


def _interval_chernoff_pattern(mgf, prefix, s, n, t0s, b, lo, complement=False):
    seg = _circular_interval_sums(prefix, s, n, t0s, b)
    if complement:
        total = (prefix[:, [s + n]] - prefix[:, [s]])
        seg = total - seg
    return np.minimum((seg - mgf.ts[:, None] * lo).min(axis=0), 0.0)


# ---------------------------------------------------------------------------
# spurious-competitor resolution
# ---------------------------------------------------------------------------

@dataclass
class SpuriousCall:
    present: bool
    flags: set[str] = field(default_factory=set)


def resolve_spurious(
    scanner: BlockScanner,
    offsets: np.ndarray,
    virtual_count: int,
    rng: Optional[np.random.Generator],
    pattern_scan: bool = False,
) -> SpuriousCall:
    """Decide whether any unscanned competitor would survive the scan."""
    if virtual_count <= 0:
        return SpuriousCall(False)
    log2_m = math.log2(virtual_count)
    if pattern_scan:
        log2_sum = scanner.pattern_logq_upper(offsets)
        log2_lam_ub = log2_m + log2_sum
        if log2_lam_ub <= LOG2_NO_SPURIOUS:
            return SpuriousCall(False)
        lbs = scanner.fresh_logq_lower(offsets)  # aligned-pattern lower bound would
        log2_lam_lb = log2_m + (lbs.max() if lbs.size else -np.inf)
        if log2_lam_lb >= np.log2(SPURIOUS_CERTAIN):
            return SpuriousCall(True, {"spurious_certain"})
        return SpuriousCall(True, {"spurious_indeterminate"})
    exact = scanner.fresh_logq_exact(offsets)
    if exact is not None:
        log2_lam = log2_m + logsumexp(exact * _LN2) / _LN2
        if log2_lam <= LOG2_NO_SPURIOUS:
            return SpuriousCall(False)
        if log2_lam >= np.log2(SPURIOUS_CERTAIN):
            return SpuriousCall(True, {"spurious_certain"})
        lam = float(2.0**log2_lam)
        p_hit = 1.0 - np.exp(-lam)
        if rng is None:
            return SpuriousCall(True, {"spurious_indeterminate"})
        hit = bool(rng.random() < p_hit)
        return SpuriousCall(hit, {"spurious_sampled"} if hit else set())
    ub = scanner.fresh_logq_upper(offsets)
    log2_lam_ub = log2_m + logsumexp(ub * _LN2) / _LN2
    if log2_lam_ub <= LOG2_NO_SPURIOUS:
        return SpuriousCall(False)
    lb = scanner.fresh_logq_lower(offsets)
    log2_lam_lb = log2_m + (lb.max() if lb.size else -np.inf)
    if log2_lam_lb >= np.log2(SPURIOUS_CERTAIN):
        return SpuriousCall(True, {"spurious_certain"})
    return SpuriousCall(True, {"spurious_indeterminate"})


# ---------------------------------------------------------------------------
# block decoding on top of the scanner
# ---------------------------------------------------------------------------

def decode_block(
    scanner: BlockScanner,
    cands: CandidateSet,
    offsets: np.ndarray,
    rng: Optional[np.random.Generator],
    block: int = 0,
    pattern_scan: bool = False,
) -> DecodeOutcome:
    """Unique-survivor rule over (candidates x offsets [x patterns]) plus the
    virtual-competitor call.  The surviving offset yields the delay estimate
    (smallest qualifying offset when several offsets fit the same message)."""
    if pattern_scan:
        survivors, tests = scanner.pattern_survivors(cands, offsets)
    else:
        raw, tests = scanner.candidate_survivors(cands, offsets)
        survivors = [(m, o, None) for m, o in raw]
    per_cand = tests // max(1, len(cands.messages))
    spur = resolve_spurious(scanner, offsets, cands.virtual_count, rng, pattern_scan)
    flags = set(spur.flags)
    if spur.present:
        return DecodeOutcome(
            failure="ambiguous", flags=flags, tests=tests, tests_per_candidate_max=per_cand
        )
    if not survivors:
        return DecodeOutcome(
            failure="none_typical", flags=flags, tests=tests, tests_per_candidate_max=per_cand
        )
    messages = {s[0] for s in survivors}
    if len(messages) > 1:
        return DecodeOutcome(
            failure="ambiguous", flags=flags, tests=tests, tests_per_candidate_max=per_cand
        )
    msg = survivors[0][0]
    offsets_hit = sorted({s[1] for s in survivors})
    if len(offsets_hit) > 1:
        flags.add("delay_ambiguous")
    chosen = min(s[2] if s[2] is not None else 0 for s in survivors if s[1] == offsets_hit[0])
    return DecodeOutcome(
        messages={block: msg},
        delay=block * scanner.n - offsets_hit[0],
        pattern=chosen if pattern_scan else None,
        flags=flags,
        tests=tests,
        tests_per_candidate_max=per_cand,
    )


# ---------------------------------------------------------------------------
# window views and composite sequences
# ---------------------------------------------------------------------------

_P_SPURIOUS = 5


@dataclass
class WindowView:
    """Decoder-side view of a received stream: symbols over [t_lo, t_lo+len),
    the per-(sender, block) message table for candidate construction, and the
    seed for the decoder's own sampling stream."""

    n: int
    y: np.ndarray
    t_lo: int
    messages: dict[tuple[int, int], int]
    seed: int
    delays: Optional[np.ndarray] = None  # informed decoding only

    @staticmethod
    def from_window(w: TransmissionWindow, informed: bool = False) -> "WindowView":
        return WindowView(
            n=w.n,
            y=w.y,
            t_lo=w.t_min,
            messages=dict(w.messages),
            seed=w.seed,
            delays=(np.asarray(w.delays) if informed else None),
        )


@dataclass
class _DecodedSender:
    sender: int
    delay: int
    blocks: dict[int, int]  # block index -> message
    codebook: Codebook
    alphabet: int

    def stream(self) -> tuple[np.ndarray, int]:
        """Reconstructed symbol stream and its starting input index."""
        lo = min(self.blocks)
        hi = max(self.blocks)
        n = self.codebook.n
        out = np.empty((hi - lo + 1) * n, dtype=np.int64)
        for j in range(lo, hi + 1):
            out[(j - lo) * n : (j - lo + 1) * n] = self.codebook.row(self.blocks[j])
        return out, lo * n


def build_composite(
    view: WindowView,
    decoded: Sequence[_DecodedSender],
    output_size: int,
) -> tuple[np.ndarray, int]:
    """Composite sequence (y_t, x_a(t + D_a), ...) over the t-range where all
    decoded streams are defined; returns (symbols, t_lo)."""
    t_lo = view.t_lo
    t_hi = view.t_lo + view.y.size  # exclusive
    parts = []
    for d in decoded:
        stream, start = d.stream()
        lo = start - d.delay
        hi = lo + stream.size
        t_lo = max(t_lo, lo)
        t_hi = min(t_hi, hi)
        parts.append((d, stream, start))
    if t_hi <= t_lo:
        raise ValidationError("decoded streams do not overlap the window")
    length = t_hi - t_lo
    y_part = view.y[t_lo - view.t_lo : t_hi - view.t_lo]
    cols = [y_part]
    sizes = [output_size]
    for d, stream, start in parts:
        a = t_lo + d.delay - start
        cols.append(stream[a : a + length])
        sizes.append(d.alphabet)
    comp = np.ravel_multi_index(tuple(cols), tuple(sizes))
    return comp.astype(np.intp), t_lo


# ---------------------------------------------------------------------------
# one-sender decoding (the sliding-window sync + typicality construction)
# ---------------------------------------------------------------------------

def decode_single_sender(
    window: TransmissionWindow | WindowView,
    codebook: Codebook | np.ndarray,
    law: StageLaw | np.ndarray,
    params: TypicalityParams,
) -> DecodeOutcome:
    """Estimate the block-0 message of a single sender.

    Scans the n start positions (Y_{-n+1}..Y_0) through (Y_0..Y_{n-1}); the
    estimate is the unique message typical at some scanned position.  The
    surviving position reveals the delay; if several positions fit the same
    message the smallest is reported and the outcome flagged delay_ambiguous.
    """
    view = window if isinstance(window, WindowView) else WindowView.from_window(window, params.informed)
    slaw = law if isinstance(law, StageLaw) else StageLaw(law)
    if isinstance(codebook, np.ndarray):
        cands = CandidateSet(list(range(codebook.shape[0])), np.asarray(codebook), codebook.shape[0])
    else:
        msgs = [m for (s, j), m in view.messages.items() if s == codebook.sender]
        cands = candidates_from_codebook(codebook, msgs)
    n = view.n
    scanner = BlockScanner(view.y, view.t_lo, slaw, n, params.delta)
    if params.informed and view.delays is not None:
        offsets = np.array([-int(view.delays[0])])
    else:
        offsets = np.arange(-n + 1, 1)
    rng = philox_stream(view.seed, _P_SPURIOUS, 0, 0)
    return decode_block(scanner, cands, offsets, rng, block=0)


def single_sender_decoder_factory(
    channel: DmcChannel, p: Distribution, params: TypicalityParams
) -> Callable[[CodebookSystem], Callable[[TransmissionWindow], TrialDecode]]:
    """run_trials adapter for the one-sender construction."""
    law = StageLaw(pair_law(channel, p))

    def factory(cb: CodebookSystem):
        def decode(window: TransmissionWindow) -> TrialDecode:
            out = decode_single_sender(window, cb.codebooks[0], law, params)
            return TrialDecode(
                messages={0: out.messages.get(0) if out.ok else None},
                flags=frozenset(out.flags),
            )

        return decode

    return factory


# ---------------------------------------------------------------------------
# successive decoding
# ---------------------------------------------------------------------------

@dataclass
class StagePlan:
    """One successive-decoding stage: which sender, its reference law(s),
    how many neighbor blocks to decode, and how the scan learns the delay."""

    sender: int
    law: StageLaw
    radius: int
    alphabet: int
    delay_from: Optional[int] = None  # reuse another sender's delay (synced)
    pattern_scan: bool = False


class SuccessiveDecoder:
    """Runs stages in order, feeding decoded codewords (and their discovered
    delays) into the next stage's composite output.

    Each sender's delay is discovered once -- by scanning all n offsets for
    its block 0 (or all n offsets x n patterns for a separating-pattern
    stage) -- and reused for its neighbor blocks; synchronized senders can
    inherit a previously discovered delay instead of scanning.
    """

    def __init__(
        self,
        plans: Sequence[StagePlan],
        codebooks: CodebookSystem,
        output_size: int,
        params: TypicalityParams,
    ):
        self.plans = list(plans)
        self.cbs = codebooks
        self.output_size = output_size
        self.params = params

    def decode(self, view: WindowView) -> tuple[dict[int, Optional[int]], set[str], dict[str, DecodeOutcome]]:
        n = view.n
        decoded: list[_DecodedSender] = []
        results: dict[int, Optional[int]] = {}
        flags: set[str] = set()
        outcomes: dict[str, DecodeOutcome] = {}
        for stage_idx, plan in enumerate(self.plans):
            m = plan.sender
            cb = self.cbs.codebooks[m]
            msgs = [msg for (s, j), msg in view.messages.items() if s == m]
            cands = candidates_from_codebook(cb, msgs)
            comp, comp_t0 = build_composite(view, decoded, self.output_size)
            scanner = BlockScanner(comp, comp_t0, plan.law, n, self.params.delta)
            rng = philox_stream(view.seed, _P_SPURIOUS, stage_idx, 0)

            if self.params.informed and view.delays is not None:
                delay = int(view.delays[m])
                pattern = None
            elif plan.delay_from is not None:
                prev = next(d for d in decoded if d.sender == plan.delay_from)
                delay = prev.delay
                pattern = None
            else:
                offsets = np.arange(-n + 1, 1)
                first = decode_block(
                    scanner, cands, offsets, rng, block=0, pattern_scan=plan.pattern_scan
                )
                outcomes[f"stage{stage_idx}:block0"] = first
                flags |= first.flags
                if not first.ok:
                    results[m] = None
                    self._fail_rest(results, stage_idx)
                    return results, flags | {f"stage{stage_idx}_failed"}, outcomes
                delay = first.delay
                pattern = first.pattern

            blocks: dict[int, int] = {}
            for j in range(-plan.radius, plan.radius + 1):
                key = f"stage{stage_idx}:block{j}"
                if key in outcomes:
                    out = outcomes[key]
                else:
                    offs = np.array([j * n - delay])
                    out = decode_block(
                        scanner, cands, offs, rng, block=j, pattern_scan=plan.pattern_scan
                    )
                    outcomes[key] = out
                    flags |= out.flags
                if not out.ok:
                    results[m] = None
                    self._fail_rest(results, stage_idx)
                    return results, flags | {f"stage{stage_idx}_failed"}, outcomes
                blocks[j] = out.messages[j]
            results[m] = blocks[0]
            decoded.append(
                _DecodedSender(
                    sender=m, delay=delay, blocks=blocks, codebook=cb, alphabet=plan.alphabet
                )
            )
        return results, flags, outcomes

    def _fail_rest(self, results: dict, stage_idx: int) -> None:
        for plan in self.plans[stage_idx:]:
            results.setdefault(plan.sender, None)


def successive_decode(
    window: TransmissionWindow | WindowView,
    codebooks: CodebookSystem,
    channel: DmcChannel,
    inputs: ProductInput,
    pi: Ordering | Sequence[int],
    params: TypicalityParams,
    radii: Optional[Sequence[int]] = None,
) -> tuple[dict[int, Optional[int]], set[str], dict[str, DecodeOutcome]]:
    """Successive decoding over the ordering pi: stage i decodes sender pi_i
    against its stage channel, treating later senders as noise and earlier
    decoded codewords as part of the output."""
    order = pi.pi if isinstance(pi, Ordering) else tuple(pi)
    k = channel.num_senders
    if sorted(order) != list(range(k)):
        raise ValidationError("ordering must permute the senders")
    view = window if isinstance(window, WindowView) else WindowView.from_window(window, params.informed)
    plans = []
    for i, m in enumerate(order):
        stage = stage_channel(channel, inputs, decoded=order[:i], target=m)
        law = StageLaw(pair_law(stage, inputs.marginals[m]))
        radius = radii[i] if radii is not None else (k - 1 - i)
        plans.append(
            StagePlan(sender=m, law=law, radius=radius, alphabet=channel.input_sizes[m])
        )
    dec = SuccessiveDecoder(plans, codebooks, channel.output_size, params)
    return dec.decode(view)


def successive_decoder_factory(
    channel: DmcChannel,
    inputs: ProductInput,
    pi: Sequence[int],
    params: TypicalityParams,
    radii: Optional[Sequence[int]] = None,
):
    def factory(cb: CodebookSystem):
        def decode(window: TransmissionWindow) -> TrialDecode:
            results, flags, _ = successive_decode(
                window, cb, channel, inputs, pi, params, radii
            )
            return TrialDecode(messages=results, flags=frozenset(flags))

        return decode

    return factory


# ---------------------------------------------------------------------------
# interleaved (even/odd) time sharing for the even-delays model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatingPoint:
    """A rate pair inside the polytope of `witness`, decoded by successive
    decoding with the given ordering (rates must not exceed that vertex)."""

    rates: tuple[float, float]
    witness: ProductInput
    ordering: tuple[int, int]


def interleaved_codec(
    channel: DmcChannel,
    point_even: OperatingPoint,
    point_odd: OperatingPoint,
    n: int,
    params: TypicalityParams,
    seed: int,
) -> tuple[CodebookSystem, Callable[[TransmissionWindow], TrialDecode]]:
    """Time sharing over even/odd symbol positions (even relative delays keep
    the two sub-streams coherent).  Builds two independent half-length
    codebook pairs and a decoder that runs successive decoding per sub-stream
    and merges; the achieved rate is the average of the two operating points.
    """
    if channel.num_senders != 2:
        raise ValidationError("interleaved codec is a 2-sender construction")
    if n % 2 != 0:
        raise ValidationError("interleaved codec needs even blocklength")
    half = n // 2
    for point in (point_even, point_odd):
        poly = polytope(channel, point.witness)
        v = vertex(poly, Ordering(point.ordering))
        if np.any(np.asarray(point.rates) > v + 1e-9):
            raise ValidationError(
                f"operating rates {point.rates} exceed the {point.ordering} vertex {v}"
            )

    def half_books(point: OperatingPoint, tag: int) -> list[Codebook]:
        from amacsim.simkernel import codeword_count

        books = []
        for m in range(2):
            count = codeword_count(half, point.rates[m])
            sched = SymbolSchedule(point.witness.marginals[m])
            books.append(Codebook(2 * m + tag, half, count, sched, seed))
        return books

    even_books = half_books(point_even, 0)
    odd_books = half_books(point_odd, 1)
    spec = CodebookSpec(
        n=n,
        rates=tuple(
            (point_even.rates[m] + point_odd.rates[m]) / 2.0 for m in range(2)
        ),
        schedules=tuple(SymbolSchedule(point_even.witness.marginals[m]) for m in range(2)),
    )
    full = CodebookSystem(
        spec=spec,
        seed=seed,
        codebooks=tuple(
            InterleavedCodebook(even_books[m], odd_books[m], sender=m) for m in range(2)
        ),
    )

    def sub_view(view: WindowView, parity: int, point: OperatingPoint, books) -> WindowView:
        t_lo = view.t_lo
        first = t_lo + ((parity - t_lo) % 2)
        sub_y = view.y[first - t_lo :: 2]
        sub_t_lo = (first - parity) // 2
        msgs = {}
        for (m, j), full_msg in view.messages.items():
            cb: InterleavedCodebook = full.codebooks[m]
            me, mo = cb.split_message(full_msg)
            msgs[(m, j)] = me if parity == 0 else mo
        delays = None
        if view.delays is not None:
            delays = np.asarray(view.delays) // 2
        return WindowView(
            n=half, y=sub_y, t_lo=sub_t_lo, messages=msgs,
            seed=view.seed ^ (0x5EED + parity), delays=delays,
        )

    def decode(window: TransmissionWindow) -> TrialDecode:
        view = WindowView.from_window(window, params.informed)
        merged: dict[int, Optional[int]] = {}
        flags: set[str] = set()
        partial: dict[int, dict[int, Optional[int]]] = {}
        for parity, point, books in ((0, point_even, even_books), (1, point_odd, odd_books)):
            sv = sub_view(view, parity, point, books)
            sub_system = CodebookSystem(
                spec=CodebookSpec(
                    n=half,
                    rates=point.rates,
                    schedules=tuple(SymbolSchedule(point.witness.marginals[m]) for m in range(2)),
                ),
                seed=seed,
                codebooks=tuple(books),
            )
            results, f, _ = successive_decode(
                sv, sub_system, channel, point.witness, point.ordering, params
            )
            partial[parity] = results
            flags |= f
        for m in range(2):
            me, mo = partial[0].get(m), partial[1].get(m)
            cb: InterleavedCodebook = full.codebooks[m]
            if me is None or mo is None:
                merged[m] = None
            else:
                merged[m] = me * cb.odd.num_codewords + mo
        return TrialDecode(messages=merged, flags=frozenset(flags))

    return full, decode


# ---------------------------------------------------------------------------
# separating-pattern decoding and the partly-asynchronous pipeline
# ---------------------------------------------------------------------------

def decode_two_segment(
    window: TransmissionWindow | WindowView,
    codebook: Codebook | np.ndarray,
    law: StageLaw,
    params: TypicalityParams,
) -> DecodeOutcome:
    """One-sender decoding when an unknown consecutive-mod-n run of
    ceil(alpha*n) codeword positions went through the first segment channel:
    every (offset, separating pattern) pair is checked -- n^2 scans."""
    view = window if isinstance(window, WindowView) else WindowView.from_window(window, params.informed)
    if not law.two_segment:
        # alpha = 1 degenerates to the single-law decoder
        return decode_single_sender(view, codebook, law, params)
    if isinstance(codebook, np.ndarray):
        cands = CandidateSet(list(range(codebook.shape[0])), np.asarray(codebook), codebook.shape[0])
    else:
        msgs = [m for (s, j), m in view.messages.items() if s == codebook.sender]
        cands = candidates_from_codebook(codebook, msgs)
    n = view.n
    scanner = BlockScanner(view.y, view.t_lo, law, n, params.delta)
    if params.informed and view.delays is not None:
        offsets = np.array([-int(view.delays[0])])
    else:
        offsets = np.arange(-n + 1, 1)
    rng = philox_stream(view.seed, _P_SPURIOUS, 0, 0)
    return decode_block(scanner, cands, offsets, rng, block=0, pattern_scan=True)


@dataclass
class PipelineConfig:
    """Everything the partly-asynchronous pipeline run needs."""

    lifted: LiftedChannel
    inputs_first: ProductInput   # lifted input laws, first segment
    inputs_second: ProductInput  # lifted input laws, second segment
    alpha: float                 # rounded to ceil(alpha*n)/n
    rates: tuple[float, ...]     # per lifted sender, backoff applied
    spec: CodebookSpec
    delay_system: DelaySystem
    stage_order: tuple[int, ...]
    radii: tuple[int, ...]
    vertices: tuple[np.ndarray, np.ndarray]


def plan_partly_async_pipeline(
    channel: DmcChannel,
    inputs_a: ProductInput,
    inputs_b: ProductInput,
    r_a: Sequence[float],
    r_b: Sequence[float],
    alpha: float,
    n: int,
    backoff: float = 1.0,
) -> PipelineConfig:
    """Build the split channel, two-segment codebook spec and stage schedule
    for a same-third-law convex combination of two common-type edge points.

    Only the written stage order (2, 1a, 3, 1b) -- common edge type {0, 2} in
    0-based labels -- is supported; relabel senders 0 and 1 for the mirror
    case.
    """
    if channel.num_senders != 3:
        raise ValidationError("pipeline expects a 3-sender channel")
    if not np.allclose(
        inputs_a.marginals[2].probs, inputs_b.marginals[2].probs, atol=1e-12
    ):
        raise ValidationError("combination points must share the third input law")
    lifted_a, lp_a, ordering_a, v_a = split_for_edge(channel, inputs_a, r_a, (0, 2))
    lifted_b, lp_b, ordering_b, v_b = split_for_edge(channel, inputs_b, r_b, (0, 2))
    if ordering_a.pi != ordering_b.pi:
        raise ValidationError("edge points resolved to different stage orders")
    bnd = int(np.ceil(alpha * n))
    if not (0 < bnd < n):
        raise ValidationError("alpha*n must round inside (0, n)")
    alpha_eff = bnd / n
    rates = tuple(
        float(backoff * (alpha_eff * v_a[v] + (1 - alpha_eff) * v_b[v])) for v in range(4)
    )
    schedules = []
    for v in range(4):
        pa, pb = lp_a.marginals[v], lp_b.marginals[v]
        if np.allclose(pa.probs, pb.probs, atol=1e-12):
            schedules.append(SymbolSchedule(pa))
        else:
            schedules.append(SymbolSchedule(pa, pb, alpha=alpha_eff))
    spec = CodebookSpec(n=n, rates=rates, schedules=tuple(schedules))
    # virtual senders of the split sender plus the untouched sender 1 of the
    # base channel stay synchronized; base sender 2 drifts on its own
    sync = (lifted_a.index_a, lifted_a.index_b, lifted_a.lifted_index(1))
    ds = DelaySystem.sync_groups([sync, (lifted_a.lifted_index(2),)], k=4)
    return PipelineConfig(
        lifted=lifted_a,
        inputs_first=lp_a,
        inputs_second=lp_b,
        alpha=alpha_eff,
        rates=rates,
        spec=spec,
        delay_system=ds,
        stage_order=ordering_a.pi,
        radii=(2, 2, 1, 0),
        vertices=(v_a, v_b),
    )


def partly_async_pipeline_decoder(
    config: PipelineConfig, params: TypicalityParams
):
    """Decoder factory for the (2, 1a, 3, 1b) successive schedule: stages 1-2
    use two-segment typicality at the known (synchronized) boundary, stage 3
    scans offsets x separating patterns, stage 4 is fully conditioned."""
    w4 = config.lifted.channel
    order = config.stage_order

    def stage_law_for(idx: int) -> StageLaw:
        decoded = order[:idx]
        target = order[idx]
        ch_a = stage_channel(w4, config.inputs_first, decoded=decoded, target=target)
        ch_b = stage_channel(w4, config.inputs_second, decoded=decoded, target=target)
        pa = pair_law(ch_a, config.inputs_first.marginals[target])
        pb = pair_law(ch_b, config.inputs_second.marginals[target])
        if np.allclose(pa, pb, atol=1e-15):
            return StageLaw(pa)
        return StageLaw(pa, pb, alpha=config.alpha)

    plans = []
    sync_anchor = order[0]
    for idx, target in enumerate(order):
        law = stage_law_for(idx)
        pattern = target == config.lifted.lifted_index(2)  # the drifting sender
        delay_from = None
        if idx > 0 and not pattern:
            delay_from = sync_anchor  # synchronized with the first-decoded sender
        plans.append(
            StagePlan(
                sender=target,
                law=law,
                radius=config.radii[idx],
                alphabet=w4.input_sizes[target],
                delay_from=delay_from,
                pattern_scan=pattern,
            )
        )

    def factory(cb: CodebookSystem):
        dec = SuccessiveDecoder(plans, cb, w4.output_size, params)

        def decode(window: TransmissionWindow) -> TrialDecode:
            results, flags, outcomes = dec.decode(WindowView.from_window(window, params.informed))
            stage3_tests = max(
                (o.tests_per_candidate_max for key, o in outcomes.items() if key.startswith("stage2:")),
                default=0,
            )
            td = TrialDecode(messages=results, flags=frozenset(flags))
            td.stage_outcomes = outcomes  # diagnostic attachment
            td.stage3_tests_per_candidate = stage3_tests
            return td

        return decode

    return factory
