"""Monte Carlo machinery: delays, codebooks, transmission windows, trials.

Randomness is counter-based (numpy Philox, 64-bit words) so every draw is a
pure function of (seed, purpose, indices): codeword j of sender m is the same
whether the codebook is materialized up front or generated lazily, trials can
run in any order, and reports are bit-identical across thread counts.

Codebooks have max(1, floor(2^{nR})) codewords.  When that count exceeds the
materialization cap the codebook becomes *virtual*: only the codewords that
actually enter the transmission window are generated, and decoders account
for the remaining i.i.d. competitors statistically (see decoders module).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from amacsim.infocore import Distribution, DmcChannel, ValidationError

MATERIALIZE_MAX_CODEWORDS = 4096
MATERIALIZE_MAX_ENTRIES = 10**7

_P_CODEWORD = 1
_P_MESSAGES = 2
_P_DELAYS = 3
_P_NOISE = 4


def philox_stream(seed: int, *counter: int) -> np.random.Generator:
    """Deterministic stream for (seed, counter words); order-independent."""
    words = list(counter)[:3]
    words += [0] * (3 - len(words))
    bg = np.random.Philox(key=np.uint64(seed & (2**64 - 1)), counter=[0] + [w & (2**64 - 1) for w in words])
    return np.random.Generator(bg)


def sample_from(dist: Distribution, size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling; deterministic given the stream state."""
    u = rng.random(size)
    return np.searchsorted(dist.cdf(), u, side="right").astype(np.int64)


def _uniform_big_int(rng: np.random.Generator, m: int) -> int:
    """Uniform draw from range(m) for m far beyond 2^64 (negligible mod bias)."""
    if m <= 2**63:
        return int(rng.integers(0, m))
    words = rng.integers(0, 2**63, size=3, dtype=np.int64)
    big = (int(words[0]) << 126) | (int(words[1]) << 63) | int(words[2])
    return big % m


# ---------------------------------------------------------------------------
# symbol schedules and codebooks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymbolSchedule:
    """Per-position symbol law: one distribution, or two segments with the
    first ceil(alpha*n) positions under `first` and the rest under `second`."""

    first: Distribution
    second: Optional[Distribution] = None
    alpha: float = 1.0

    def __post_init__(self):
        if self.second is None and self.alpha != 1.0:
            raise ValidationError("alpha without a second segment law")
        if self.second is not None:
            if not (0.0 < self.alpha < 1.0):
                raise ValidationError("two-segment alpha must be in (0, 1)")
            if self.second.size != self.first.size:
                raise ValidationError("segment laws must share the alphabet")

    @property
    def alphabet_size(self) -> int:
        return self.first.size

    def boundary(self, n: int) -> int:
        """Number of positions drawn from the first law."""
        return n if self.second is None else int(np.ceil(self.alpha * n))

    def law_at(self, i: int, n: int) -> Distribution:
        return self.first if i < self.boundary(n) else (self.second or self.first)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        b = self.boundary(n)
        out = np.empty(n, dtype=np.int64)
        out[:b] = sample_from(self.first, b, rng)
        if b < n:
            out[b:] = sample_from(self.second, n - b, rng)
        return out


def codeword_count(n: int, rate: float) -> int:
    """max(1, floor(2^{n rate})); exact for small exponents, float-rounded
    above 2^53 where only the magnitude matters."""
    if rate < 0:
        raise ValidationError("negative rate")
    exponent = n * rate
    if exponent > 512:
        raise ValidationError(f"codeword count 2^{exponent:.0f} is out of supported range")
    if exponent <= 53:
        return max(1, int(np.floor(2.0**exponent)))
    whole = int(np.floor(exponent))
    frac = exponent - whole
    return max(1, (2**whole * int(np.floor(2.0**frac * 2**52))) >> 52)


@dataclass(frozen=True)
class CodebookSpec:
    n: int
    rates: tuple[float, ...]
    schedules: tuple[SymbolSchedule, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("blocklength must be >= 1")
        if len(self.rates) != len(self.schedules):
            raise ValidationError("one schedule per sender required")

    @property
    def num_senders(self) -> int:
        return len(self.rates)

    def codeword_counts(self) -> tuple[int, ...]:
        return tuple(codeword_count(self.n, r) for r in self.rates)


class Codebook:
    """One sender's codebook: rows are a pure function of (seed, sender, j)."""

    def __init__(
        self,
        sender: int,
        n: int,
        num_codewords: int,
        schedule: SymbolSchedule,
        seed: int,
        materialize: str = "auto",
    ):
        self.sender = sender
        self.n = n
        self.num_codewords = num_codewords
        self.schedule = schedule
        self.seed = seed
        self._cache: dict[int, np.ndarray] = {}
        small = (
            num_codewords <= MATERIALIZE_MAX_CODEWORDS
            and num_codewords * n <= MATERIALIZE_MAX_ENTRIES
        )
        if materialize == "always" and not small:
            raise ValidationError(
                f"codebook with {num_codewords} codewords of length {n} "
                f"overflows the materialization cap"
            )
        self.materialized: Optional[np.ndarray] = None
        if small and materialize in ("auto", "always"):
            self.materialized = np.vstack([self._gen_row(j) for j in range(num_codewords)])
            self.materialized.setflags(write=False)

    @property
    def is_virtual(self) -> bool:
        return self.materialized is None

    def _gen_row(self, j: int) -> np.ndarray:
        rng = philox_stream(self.seed, _P_CODEWORD, self.sender, j)
        row = self.schedule.draw(self.n, rng)
        row.setflags(write=False)
        return row

    def row(self, j: int) -> np.ndarray:
        if not (0 <= j < self.num_codewords):
            raise ValidationError(f"codeword index {j} out of range")
        if self.materialized is not None:
            return self.materialized[j]
        if j not in self._cache:
            self._cache[j] = self._gen_row(j)
        return self._cache[j]

    def draw_message(self, rng: np.random.Generator) -> int:
        return _uniform_big_int(rng, self.num_codewords)


class InterleavedCodebook(Codebook):
    """Zips two half-length codebooks onto even/odd positions; the message
    index is (even_message * M_odd + odd_message)."""

    def __init__(self, even: Codebook, odd: Codebook, sender: int):
        if even.n != odd.n:
            raise ValidationError("half codebooks must share the blocklength")
        self.even = even
        self.odd = odd
        self.sender = sender
        self.n = 2 * even.n
        self.num_codewords = even.num_codewords * odd.num_codewords
        self.schedule = even.schedule
        self.seed = even.seed
        self._cache = {}
        self.materialized = None
        small = (
            self.num_codewords <= MATERIALIZE_MAX_CODEWORDS
            and self.num_codewords * self.n <= MATERIALIZE_MAX_ENTRIES
        )
        if small:
            self.materialized = np.vstack([self._gen_row(j) for j in range(self.num_codewords)])
            self.materialized.setflags(write=False)

    def split_message(self, j: int) -> tuple[int, int]:
        return j // self.odd.num_codewords, j % self.odd.num_codewords

    def _gen_row(self, j: int) -> np.ndarray:
        je, jo = self.split_message(j)
        row = np.empty(self.n, dtype=np.int64)
        row[0::2] = self.even.row(je)
        row[1::2] = self.odd.row(jo)
        row.setflags(write=False)
        return row


@dataclass(frozen=True)
class CodebookSystem:
    spec: CodebookSpec
    seed: int
    codebooks: tuple[Codebook, ...]

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def num_senders(self) -> int:
        return len(self.codebooks)


def generate_codebooks(
    spec: CodebookSpec, seed: int, materialize: str = "auto"
) -> CodebookSystem:
    """i.i.d. codebooks per the schedules; deterministic given the seed."""
    counts = spec.codeword_counts()
    books = tuple(
        Codebook(m, spec.n, counts[m], spec.schedules[m], seed, materialize)
        for m in range(spec.num_senders)
    )
    return CodebookSystem(spec=spec, seed=seed, codebooks=books)


# ---------------------------------------------------------------------------
# delay systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DelaySystem:
    """Family of joint delay distributions over {0..n-1}^K.

    kinds: totally_async, even_delays (K=2, even values), partly_async3
    (K=3, D1=D2), fixed, custom (explicit sparse pmf for one blocklength),
    sync_groups (one independent uniform delay per group of senders -- the
    delay law a split sender inherits: its virtual halves share the delay).
    """

    kind: str
    k: int
    fixed: Optional[tuple[int, ...]] = None
    pmf: Optional[dict[tuple[int, ...], float]] = None
    groups: Optional[tuple[tuple[int, ...], ...]] = None

    def __post_init__(self):
        kinds = ("totally_async", "even_delays", "partly_async3", "fixed", "custom", "sync_groups")
        if self.kind not in kinds:
            raise ValidationError(f"unknown delay system kind {self.kind!r}")
        if self.kind == "even_delays" and self.k != 2:
            raise ValidationError("even_delays requires K = 2")
        if self.kind == "partly_async3" and self.k != 3:
            raise ValidationError("partly_async3 requires K = 3")
        if self.kind == "fixed":
            if self.fixed is None or len(self.fixed) != self.k:
                raise ValidationError("fixed delay system needs a K-vector")
        if self.kind == "custom":
            if not self.pmf:
                raise ValidationError("custom delay system needs a pmf")
            total = sum(self.pmf.values())
            if abs(total - 1.0) > 1e-12:
                raise ValidationError(f"custom pmf sums to {total!r}, not 1")
            for d, p in self.pmf.items():
                if len(d) != self.k or p < 0:
                    raise ValidationError("custom pmf malformed")
        if self.kind == "sync_groups":
            if not self.groups or sorted(i for g in self.groups for i in g) != list(range(self.k)):
                raise ValidationError("sync groups must partition the senders")

    @staticmethod
    def totally_async(k: int) -> "DelaySystem":
        return DelaySystem(kind="totally_async", k=k)

    @staticmethod
    def even_delays() -> "DelaySystem":
        return DelaySystem(kind="even_delays", k=2)

    @staticmethod
    def partly_async3() -> "DelaySystem":
        return DelaySystem(kind="partly_async3", k=3)

    @staticmethod
    def fixed_delays(d: Sequence[int]) -> "DelaySystem":
        return DelaySystem(kind="fixed", k=len(d), fixed=tuple(int(x) for x in d))

    @staticmethod
    def custom(pmf: dict[tuple[int, ...], float], k: int) -> "DelaySystem":
        return DelaySystem(kind="custom", k=k, pmf=dict(pmf))

    @staticmethod
    def sync_groups(groups: Sequence[Sequence[int]], k: int) -> "DelaySystem":
        return DelaySystem(
            kind="sync_groups", k=k, groups=tuple(tuple(int(i) for i in g) for g in groups)
        )

    def _check_n(self, n: int) -> None:
        if self.kind == "fixed" and any(not (0 <= d < n) for d in self.fixed):
            raise ValidationError(f"fixed delays {self.fixed} outside 0..{n - 1}")
        if self.kind == "custom":
            for d in self.pmf:
                if any(not (0 <= x < n) for x in d):
                    raise ValidationError(f"custom support point {d} outside 0..{n - 1}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        self._check_n(n)
        if self.kind == "totally_async":
            return rng.integers(0, n, size=self.k)
        if self.kind == "even_delays":
            evens = np.arange(0, n, 2)
            return evens[rng.integers(0, evens.size, size=2)]
        if self.kind == "partly_async3":
            d12 = int(rng.integers(0, n))
            d3 = int(rng.integers(0, n))
            return np.array([d12, d12, d3])
        if self.kind == "fixed":
            return np.array(self.fixed, dtype=np.int64)
        if self.kind == "sync_groups":
            out = np.zeros(self.k, dtype=np.int64)
            for g in self.groups:
                d = int(rng.integers(0, n))
                out[list(g)] = d
            return out
        atoms = sorted(self.pmf.items())
        probs = np.array([p for _, p in atoms])
        idx = int(rng.choice(len(atoms), p=probs / probs.sum()))
        return np.array(atoms[idx][0], dtype=np.int64)

    def support(self, n: int) -> Iterator[tuple[int, ...]]:
        self._check_n(n)
        if self.kind == "totally_async":
            yield from _product_range(n, self.k)
        elif self.kind == "even_delays":
            evens = range(0, n, 2)
            for a in evens:
                for b in evens:
                    yield (a, b)
        elif self.kind == "partly_async3":
            for d12 in range(n):
                for d3 in range(n):
                    yield (d12, d12, d3)
        elif self.kind == "fixed":
            yield self.fixed
        elif self.kind == "sync_groups":
            for combo in _product_range(n, len(self.groups)):
                out = [0] * self.k
                for g, d in zip(self.groups, combo):
                    for i in g:
                        out[i] = d
                yield tuple(out)
        else:
            for d, p in sorted(self.pmf.items()):
                if p > 0:
                    yield d

    def support_size(self, n: int) -> int:
        if self.kind == "totally_async":
            return n**self.k
        if self.kind == "even_delays":
            return len(range(0, n, 2)) ** 2
        if self.kind == "partly_async3":
            return n * n
        if self.kind == "fixed":
            return 1
        if self.kind == "sync_groups":
            return n ** len(self.groups)
        return sum(1 for _, p in self.pmf.items() if p > 0)

    def probability(self, d: tuple[int, ...], n: int) -> float:
        if self.kind == "totally_async":
            return 1.0 / n**self.k
        if self.kind == "even_delays":
            e = len(range(0, n, 2))
            return (1.0 / e**2) if all(x % 2 == 0 for x in d) else 0.0
        if self.kind == "partly_async3":
            return (1.0 / n**2) if d[0] == d[1] else 0.0
        if self.kind == "fixed":
            return 1.0 if tuple(d) == self.fixed else 0.0
        if self.kind == "sync_groups":
            for g in self.groups:
                if len({d[i] for i in g}) != 1:
                    return 0.0
            return 1.0 / n ** len(self.groups)
        return self.pmf.get(tuple(d), 0.0)


def _product_range(n: int, k: int) -> Iterator[tuple[int, ...]]:
    if k == 0:
        yield ()
        return
    for head in range(n):
        for rest in _product_range(n, k - 1):
            yield (head, *rest)


def sample_delays(ds: DelaySystem, n: int, seed: int) -> np.ndarray:
    """One delay vector from the system's law; deterministic given seed."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    return ds.sample(n, philox_stream(seed, _P_DELAYS, 0, 0))


# ---------------------------------------------------------------------------
# transmission
# ---------------------------------------------------------------------------

@dataclass
class TransmissionWindow:
    """Output symbols y_t for t in [-Ln, Ln] plus ground truth for scoring.

    Decoders only look at `y` (and `delays` when informed); message truth is
    for the trial runner.  `seed` feeds the decoder's own sampling stream
    (spurious-competitor resolution), keeping trials order-independent.
    """

    n: int
    big_l: int
    delays: np.ndarray
    messages: dict[tuple[int, int], int]
    y: np.ndarray
    seed: int = 0

    @property
    def t_min(self) -> int:
        return -self.big_l * self.n

    @property
    def t_max(self) -> int:
        return self.big_l * self.n

    def y_at(self, t_from: int, t_to: int) -> np.ndarray:
        """Slice y over output times [t_from, t_to)."""
        if t_from < self.t_min or t_to > self.t_max + 1:
            raise ValidationError("window slice out of range")
        return self.y[t_from - self.t_min : t_to - self.t_min]


def transmit(
    cb: CodebookSystem,
    ds: DelaySystem,
    channel: DmcChannel,
    big_l: int,
    seed: int,
    delays: Optional[Sequence[int]] = None,
) -> TransmissionWindow:
    """Random messages through the channel with per-sender delays.

    Messages cover blocks -(L+1)..(L+1) (one guard block past each end of the
    L-block window) so every delayed input index is defined.  Output symbol
    Y_t is drawn from W(. | X_{1,t+D_1}, ..., X_{K,t+D_K}).
    """
    if big_l < 1:
        raise ValidationError("L must be >= 1")
    n, k = cb.n, cb.num_senders
    if channel.num_senders != k:
        raise ValidationError("channel/codebook sender count mismatch")
    if delays is None:
        d = sample_delays(ds, n, seed)
    else:
        d = np.asarray(delays, dtype=np.int64)
        if d.shape != (k,):
            raise ValidationError("explicit delay vector has wrong shape")

    blocks = range(-(big_l + 1), big_l + 2)
    messages: dict[tuple[int, int], int] = {}
    for m in range(k):
        rng = philox_stream(seed, _P_MESSAGES, m, 0)
        for j in blocks:
            messages[(m, j)] = cb.codebooks[m].draw_message(rng)

    # input symbol streams over the needed index range
    t_lo, t_hi = -big_l * n, big_l * n
    idx_lo, idx_hi = t_lo, t_hi + n  # t + d_m <= t_hi + n - 1
    length = idx_hi - idx_lo
    streams = np.empty((k, length), dtype=np.int64)
    for m in range(k):
        for j in blocks:
            start = j * n - idx_lo
            if start >= length or start + n <= 0:
                continue
            row = cb.codebooks[m].row(messages[(m, j)])
            a = max(0, start)
            b = min(length, start + n)
            streams[m, a:b] = row[a - start : b - start]

    ts = np.arange(t_lo, t_hi + 1)
    symbol_cols = np.vstack([streams[m, ts + int(d[m]) - idx_lo] for m in range(k)])
    rows = np.ravel_multi_index(tuple(symbol_cols), channel.input_sizes)
    w_cdf = np.cumsum(channel.transition.reshape(-1, channel.output_size), axis=1)
    u = philox_stream(seed, _P_NOISE, 0, 0).random(ts.size)
    y = (u[:, None] > w_cdf[rows]).sum(axis=1).astype(np.int64)

    return TransmissionWindow(n=n, big_l=big_l, delays=d, messages=messages, y=y, seed=seed)


# ---------------------------------------------------------------------------
# trial running and reports
# ---------------------------------------------------------------------------

@dataclass
class TrialDecode:
    """What a decoder hands back for one window: block-0 message estimates
    per sender (None = failure) and diagnostic flags."""

    messages: dict[int, Optional[int]]
    flags: frozenset[str] = frozenset()


DecoderFactory = Callable[[CodebookSystem], Callable[[TransmissionWindow], TrialDecode]]


@dataclass
class TrialReport:
    config: dict
    seed: int
    trials: int
    errors: int
    average_error: float
    average_half_width: float
    maximal_error: float
    maximal_half_width: float
    mode: str
    cells: list[dict]
    flags: dict[str, int]

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config,
                "seed": self.seed,
                "trials": self.trials,
                "errors": self.errors,
                "average_error": self.average_error,
                "average_half_width": self.average_half_width,
                "maximal_error": self.maximal_error,
                "maximal_half_width": self.maximal_half_width,
                "mode": self.mode,
                "cells": self.cells,
                "flags": self.flags,
            },
            indent=2,
        )

    def csv_rows(self) -> list[dict]:
        return [
            {
                "cell": c["cell"],
                "trials": c["trials"],
                "errors": c["errors"],
                "error_rate": c["error_rate"],
            }
            for c in self.cells
        ]


def _half_width(errors: int, trials: int) -> float:
    if trials == 0:
        return float("nan")
    p = errors / trials
    return 1.96 * float(np.sqrt(max(p * (1 - p), 1e-12) / trials))


def run_trials(
    cb: CodebookSystem | CodebookSpec,
    ds: DelaySystem,
    channel: DmcChannel,
    decoder_factory: DecoderFactory,
    trials: int,
    big_l: int,
    seed: int,
    enumerate_delays: bool = False,
    bins_per_sender: int = 4,
    min_cell_trials: int = 10,
    config_echo: Optional[dict] = None,
) -> TrialReport:
    """Monte Carlo error estimation: average error (union over senders of a
    block-0 message mismatch) and maximal error over delay cells.

    Exhaustive mode assigns trials round-robin over the support; sampled mode
    bins realized delays.  Per-trial seeds are seed^trial so results do not
    depend on execution order.
    """
    if isinstance(cb, CodebookSpec):
        cb = generate_codebooks(cb, seed)
    decoder = decoder_factory(cb)
    n = cb.n

    if enumerate_delays:
        cells_list = list(ds.support(n))
        if not cells_list:
            raise ValidationError("empty delay support")
        mode = "exhaustive"
    else:
        cells_list = None
        mode = "binned"

    cell_stats: dict[tuple, list[int]] = {}
    flags: dict[str, int] = {}
    total_errors = 0
    for t in range(trials):
        trial_seed = seed ^ t
        if enumerate_delays:
            d = np.array(cells_list[t % len(cells_list)], dtype=np.int64)
            cell_key = tuple(int(x) for x in d)
        else:
            d = sample_delays(ds, n, trial_seed)
            cell_key = tuple(int(x) * bins_per_sender // n for x in d)
        window = transmit(cb, ds, channel, big_l, trial_seed, delays=d)
        result = decoder(window)
        err = any(
            result.messages.get(m) is None or result.messages[m] != window.messages[(m, 0)]
            for m in range(cb.num_senders)
        )
        for f in result.flags:
            flags[f] = flags.get(f, 0) + 1
        stats = cell_stats.setdefault(cell_key, [0, 0])
        stats[0] += 1
        stats[1] += int(err)
        total_errors += int(err)

    cells = [
        {
            "cell": list(key),
            "trials": s[0],
            "errors": s[1],
            "error_rate": s[1] / s[0],
            "half_width": _half_width(s[1], s[0]),
        }
        for key, s in sorted(cell_stats.items())
    ]
    undersampled = [c for c in cells if c["trials"] < min_cell_trials]
    if undersampled:
        flags["undersampled_cells"] = len(undersampled)
    worst = max(cells, key=lambda c: c["error_rate"])
    return TrialReport(
        config=config_echo or {},
        seed=seed,
        trials=trials,
        errors=total_errors,
        average_error=total_errors / trials,
        average_half_width=_half_width(total_errors, trials),
        maximal_error=worst["error_rate"],
        maximal_half_width=worst["half_width"],
        mode=mode,
        cells=cells,
        flags=flags,
    )
