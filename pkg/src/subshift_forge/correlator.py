"""Coded-system route to a guaranteed correlation floor.

Pick two allowable words of the same length whose overlaps (mutual and self)
all stay below a third of their length, and space their concatenations by a
fixed gap no bigger than a third as well. Concatenations then parse uniquely:
an occurrence of either word pins the block grid, so a sliding observer can
recover which word sits in each slot. Coding the signal's signs into the
choice of word produces a point whose correlation with the signal is, at
every prefix, exactly the signal mass sitting on block starts; one phase out
of l+u must carry at least its share of the total mass, and that is the
correlation floor.

The observable evaluated here reports +1 where a block carrying the
nonnegative-sign word starts, -1 where the other starts, and 0 elsewhere.
"""

from fractions import Fraction

import numpy as np

from .automaton import (
    _advance_live,
    _retreat_live,
    entropy,
    essentialize,
    fill_between,
    is_allowable,
    sample_point,
)
from .errors import AmbiguousParseError, InputError, NotInCodedSystemError
from .words import Word, occurrences, overlap, self_overlap

ONE_THIRD = Fraction(1, 3)


def _readable_from(E, w: Word) -> np.ndarray:
    """States from which the whole of w can be read."""
    live = np.ones(E.n_states, dtype=bool)
    for c in reversed(w.data):
        live = _retreat_live(E.table, live, c)
    return live


def _run_forward(E, live: np.ndarray, codes) -> np.ndarray:
    for c in codes:
        live = _advance_live(E.table, live, int(c))
    return live


class CorrelatorPlan:
    """Two interchangeable code words over an ambient subshift, with the gap
    and phase that make their concatenations parse uniquely.

    The overlap numbers are recomputed here, never taken on faith from
    whatever search produced the pair, and the defining inequalities are
    checked exactly (as rationals). The l >= 3u requirement is what kills
    any second parsing schedule.
    """

    def __init__(self, automaton, alpha: Word, beta: Word, u: int, t: int = 0,
                 origin: str = "caller"):
        E = essentialize(automaton)
        l = len(alpha)
        if len(beta) != l or l == 0:
            raise InputError("code words must share a positive length")
        if alpha == beta:
            raise InputError("code words must differ")
        u = int(u)
        if u < 0:
            raise InputError("gap must be nonnegative")
        if l < 3 * u:
            raise InputError(
                f"unique parsing needs l >= 3u; got l={l} against u={u}"
            )
        t = int(t)
        if not 0 <= t < l + u:
            raise InputError(f"phase must lie in [0, {l + u})")
        if not (is_allowable(E, alpha) and is_allowable(E, beta)):
            raise InputError("code words must be allowable in the ambient")
        report = {
            "overlap": overlap(alpha, beta),
            "self_alpha": self_overlap(alpha),
            "self_beta": self_overlap(beta),
        }
        for name, k in report.items():
            if not Fraction(k, l) < ONE_THIRD:
                raise InputError(f"{name} is {k}, not below l/3 with l={l}")
        self.automaton = E
        self.alpha = alpha
        self.beta = beta
        self.u = u
        self.t = t
        self.overlap_report = report
        self.origin = origin

    @property
    def l(self) -> int:
        return len(self.alpha)

    @property
    def period(self) -> int:
        return self.l + self.u

    def to_json_dict(self) -> dict:
        return {
            "kind": "correlator-plan",
            "alpha": self.alpha.names(),
            "beta": self.beta.names(),
            "l": self.l,
            "u": self.u,
            "t": self.t,
            "overlap_report": dict(self.overlap_report),
            "origin": self.origin,
            "automaton": self.automaton.to_json_dict(),
        }


def find_low_overlap_pair(A, l: int, r=ONE_THIRD, seed: int = 0,
                          attempts: int = 256):
    """A pair of allowable length-l words with all three overlaps below r*l,
    or None when the sampling budget runs dry ("none at this length";
    retry with a larger l, which is guaranteed to work eventually).

    Candidates are cut from long sampled paths first, preferring paths whose
    short prefix recurs late, then fall back to independently sampled words
    with rejection. Deterministic for a fixed seed; all bounds are
    re-verified on the way out.
    """
    if l < 1:
        raise InputError("word length must be positive")
    if not 0 < r < 1:
        raise InputError("overlap ratio must sit strictly between 0 and 1")
    E = essentialize(A)
    if E.n_states == 0 or entropy(E) <= 0.0:
        raise InputError("pair search needs positive entropy")

    def good(a: Word, b: Word) -> bool:
        return (
            a != b
            and Fraction(overlap(a, b), l) < r
            and Fraction(self_overlap(a), l) < r
            and Fraction(self_overlap(b), l) < r
            and is_allowable(E, a)
            and is_allowable(E, b)
        )

    k = max(1, int(r * l))
    ranked = []
    for i in range(min(attempts, 32)):
        x = sample_point(E, 2 * l, seed=seed * 7919 + i)
        returns = [q for q in occurrences(x[:k], x) if q > 0]
        recurrence = returns[0] if returns else 2 * l
        ranked.append((-recurrence, i, x))
    ranked.sort()
    for _, _, x in ranked:
        a, b = x[:l], x[l : 2 * l]
        if good(a, b):
            return a, b
    for i in range(attempts):
        a = sample_point(E, l, seed=seed * 104729 + 2 * i)
        b = sample_point(E, l, seed=seed * 104729 + 2 * i + 1)
        if good(a, b):
            return a, b
    return None


def make_plan(A, l: int, seed: int = 0, attempts: int = 256,
              u: int | None = None) -> CorrelatorPlan:
    """Search a pair at ratio 1/3 and wrap it with the ambient's certified
    trivial gap (0 on a full shift). Raises when the budget finds nothing."""
    from .automaton import gap_constant

    E = essentialize(A)
    pair = find_low_overlap_pair(E, l, ONE_THIRD, seed=seed, attempts=attempts)
    if pair is None:
        raise InputError(
            f"no low-overlap pair at length {l}; retry with a larger length"
        )
    if u is None:
        u = gap_constant(E).constant
    return CorrelatorPlan(E, pair[0], pair[1], u=u, origin=f"sampled(seed={seed})")


def unique_parse(plan: CorrelatorPlan, w: Word) -> list[tuple[int, int]]:
    """The unique block decomposition of w: [(start, 0|1), ...] for every
    fully contained block, 0 meaning alpha and 1 meaning beta.

    Occurrences of the code words pin the grid. Under the plan invariants a
    code word cannot occur off-grid in a coded point, so demanding that one
    periodic schedule hold every occurrence and fill every slot either
    identifies the grid or proves w is no coded point. Partial blocks
    hanging off either end are tolerated and not reported.
    """
    P, l, n = plan.period, plan.l, len(w)
    occ: dict[int, int] = {}
    for p in occurrences(plan.alpha, w):
        occ[p] = 0
    for p in occurrences(plan.beta, w):
        occ[p] = 1
    if not occ:
        raise NotInCodedSystemError("neither code word occurs")
    consistent = []
    for c in range(P):
        slots = range(c, n - l + 1, P)
        if len(slots) and all(q in occ for q in slots):
            consistent.append(c)
    if not consistent:
        raise NotInCodedSystemError("no complete block schedule fits")
    if len(consistent) > 1:
        raise AmbiguousParseError(
            f"{len(consistent)} block schedules fit at phases {consistent}"
        )
    c = consistent[0]
    stray = sorted(p for p in occ if (p - c) % P)
    if stray:
        raise NotInCodedSystemError(
            f"a code word occurs off the block grid at {stray[0]}"
        )
    return [(q, occ[q]) for q in range(c, n - l + 1, P)]


class CodedPoint:
    """A finite coded point: sign-chosen blocks on a fixed phase, lex-least
    fills everywhere else."""

    def __init__(self, point: Word, block_symbols: tuple[int, ...],
                 fills: tuple[Word, ...], t: int, period: int):
        self.point = point
        self.block_symbols = block_symbols
        self.fills = fills
        self.t = t
        self.period = period

    @property
    def block_starts(self) -> np.ndarray:
        return self.t + self.period * np.arange(len(self.block_symbols))

    def to_json_dict(self) -> dict:
        return {
            "kind": "coded-point",
            "t": self.t,
            "period": self.period,
            "block_symbols": list(self.block_symbols),
            "point": self.point.names(),
            "fills": [f.names() for f in self.fills],
        }


def build_coded_point(plan: CorrelatorPlan, signal, horizon: int) -> CodedPoint:
    """Assemble the coded point for the signal over [0, horizon).

    The phase t is the one whose block starts carry the most average |a|
    (exhaustive scan, ties to the lowest); block m shows beta when
    a_{t+(l+u)m} >= 0 and alpha otherwise. Gaps, the lead-in below t, and
    the tail stub are lex-least allowable fills for their contexts.
    """
    E, P, l = plan.automaton, plan.period, plan.l
    if horizon > len(signal):
        raise InputError("horizon passes the end of the signal")
    if horizon < P:
        raise InputError(
            f"horizon {horizon} is shorter than one block period {P}"
        )
    a = signal.samples
    scores = [float(np.abs(a[t:horizon:P]).mean()) for t in range(P)]
    t = int(np.argmax(scores))  # argmax keeps the lowest tied phase

    starts = np.arange(t, horizon, P)
    syms = (a[starts] >= 0).astype(np.int64)  # 1 codes beta
    words = {0: plan.alpha, 1: plan.beta}
    readable = {s: _readable_from(E, words[s]) for s in (0, 1)}

    out: list[int] = []
    fills: list[Word] = []
    cache: dict[tuple, Word] = {}
    live = np.ones(E.n_states, dtype=bool)
    pos = 0
    for q, sym in zip(starts.tolist(), syms.tolist()):
        if pos < q:
            key = (live.tobytes(), sym, q - pos)
            fill = cache.get(key)
            if fill is None:
                fill = fill_between(
                    E, np.flatnonzero(live), np.flatnonzero(readable[sym]),
                    q - pos,
                )
                cache[key] = fill
            out.extend(fill.data)
            live = _run_forward(E, live, fill.data)
            fills.append(fill)
            pos = q
        block = words[sym]
        take = min(l, horizon - pos)
        out.extend(block.data[:take])
        pos += take
        if take < l:
            break
        live = _run_forward(E, live, block.data)
    if pos < horizon:
        # horizon falls inside a trailing gap: any legal continuation works
        stub = fill_between(
            E, np.flatnonzero(live), np.arange(E.n_states), horizon - pos
        )
        out.extend(stub.data)
        fills.append(stub)
    block_symbols = tuple(
        int(s) for q, s in zip(starts.tolist(), syms.tolist()) if q + l <= horizon
    )
    return CodedPoint(
        point=Word(E.alphabet, tuple(out)),
        block_symbols=block_symbols,
        fills=tuple(fills),
        t=t,
        period=P,
    )


def evaluate_correlation(plan: CorrelatorPlan, coded: CodedPoint, signal,
                         prefixes) -> list[tuple[int, float, float, float]]:
    """Rows (N, corr, abs_avg, bound) with corr = (1/N) sum a_n f_n.

    f is +1 at beta block starts, -1 at alpha starts, 0 elsewhere; by the
    sign coding, a_n f_n at a block start is |a_n|, so corr*N equals the
    signal mass on block starts below N, exactly. The bound column is the
    pigeonhole floor 0.9/(l+u) of the running mean of |a|.
    """
    n = len(coded.point)
    a = signal.samples
    prefixes = [int(N) for N in prefixes]
    if any(N < 1 or N > n or N > a.size for N in prefixes):
        raise InputError("prefixes must lie within the coded horizon")
    starts = np.arange(coded.t, n, coded.period)
    f = np.zeros(n, dtype=np.float64)
    f[starts] = np.where(a[starts] >= 0, 1.0, -1.0)
    prods = np.cumsum(a[:n] * f)
    absol = np.cumsum(np.abs(a[:n]))
    rows = []
    for N in prefixes:
        abs_avg = float(absol[N - 1]) / N
        rows.append(
            (
                N,
                float(prods[N - 1]) / N,
                abs_avg,
                0.9 / plan.period * abs_avg,
            )
        )
    return rows


def write_correlation_csv(rows, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "corr", "abs_avg", "bound"])
        for N, corr, abs_avg, bound in rows:
            w.writerow([N, repr(corr), repr(abs_avg), repr(bound)])
