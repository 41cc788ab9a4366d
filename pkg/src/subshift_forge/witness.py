"""Level-by-level refinement of a sign point against the tower.

Start from the pointwise sign of the signal, which correlates perfectly with
it. Each tower level then splits the horizon into blocks of half its window
length, and rewrites exactly one length-K sub-word per block with a fill
that shows the previous level's marker, so the point enters the next level
of the tower. The rewritten sub-word is chosen where |signal| mass is
smallest among candidates that dodge the checkpoints, which is what keeps
every checkpoint correlation above the advertised bound: each level can
only spend 16/L_i of the total mass.

Everything here is deterministic: fills are lexicographically least for
their contexts, the final partial block is padded by a walk seeded with the
level index, and ties in the candidate choice break toward the lowest
index. Identical inputs give identical reports, bit for bit.
"""

import numpy as np

from .automaton import (
    ShiftAutomaton,
    _advance_live,
    _retreat_live,
    essentialize,
    fill_between,
    is_allowable,
)
from .errors import ContractError, InputError, ResourceCapError
from .layered import LayeredShift
from .tower import TowerLevel, TowerSpec
from .words import PM_ONE, Word

# blocks are padded to full length before processing; a block longer than
# this means the level was built far past what a witness run can afford
PAD_CAP = 1 << 22


def default_checkpoints(N: int) -> tuple[int, ...]:
    """3, 6, 12, ... doubling while they fit inside the horizon."""
    out = []
    n = 3
    while n <= N:
        out.append(n)
        n *= 2
    return tuple(out)


class SignalSeries:
    """Bounded real samples plus the checkpoint subsequence.

    Checkpoints must at least double (N_k >= 2 N_{k-1}); the doubling is
    what makes the per-block checkpoint case analysis exhaustive.
    """

    def __init__(self, samples, checkpoints=None, bound: float | None = None):
        a = np.asarray(samples, dtype=np.float64)
        if a.ndim != 1 or a.size == 0:
            raise InputError("signal must be a nonempty 1-d sequence")
        if not np.isfinite(a).all():
            raise InputError("signal contains non-finite samples")
        if bound is None:
            bound = float(np.abs(a).max())
        if not np.isfinite(bound) or bound < 0:
            raise InputError("bound must be a finite nonnegative real")
        if (np.abs(a) > bound).any():
            raise InputError("a sample exceeds the declared bound")
        if checkpoints is None:
            checkpoints = default_checkpoints(a.size)
        cps = tuple(int(c) for c in checkpoints)
        if any(c != float(orig) for c, orig in zip(cps, checkpoints)):
            raise InputError("checkpoints must be integers")
        for k, c in enumerate(cps):
            if c < 1:
                raise InputError("checkpoints start at 1")
            if k > 0 and c < 2 * cps[k - 1]:
                raise InputError("checkpoints must at least double")
        if cps and cps[-1] > a.size:
            raise InputError("checkpoints must not pass the horizon")
        self.samples = a
        self.samples.setflags(write=False)
        self.checkpoints = cps
        self.bound = float(bound)

    def __len__(self) -> int:
        return self.samples.size


def initial_point(signal: SignalSeries) -> Word:
    """Pointwise sign of the signal, with sign(0) taken as +1. Multiplying
    back by the samples reproduces |a_n| exactly in floating point."""
    codes = (signal.samples >= 0).astype(np.int64)
    return Word(PM_ONE, tuple(int(c) for c in codes))


def _signs(w: Word) -> np.ndarray:
    return 2 * np.asarray(w.data, dtype=np.float64) - 1


def _pad_walk(E: ShiftAutomaton, start: int, length: int, seed: int) -> list[int]:
    """Uniform seeded walk; every essential state has an out-edge, so the
    walk cannot die and the result extends to a legal point."""
    rng = np.random.default_rng(seed)
    rows = E.table.tolist()
    codes = []
    s = start
    for _ in range(length):
        opts = [a for a, t in enumerate(rows[s]) if t >= 0]
        a = opts[int(rng.integers(len(opts)))]
        codes.append(a)
        s = rows[s][a]
    return codes


def _candidate_range(level: TowerLevel, block: int, block_start: int, cps) -> range:
    """1-based V indices eligible for rewriting, per the checkpoint cases."""
    K, L = level.K, level.L
    b = K * L // 2
    inside = [c for c in cps if block_start < c < block_start + b]
    if not inside:
        return range(1, L // 2 + 1)
    if block > 0:
        if len(inside) > 1:
            raise InputError(
                "two checkpoints share one block; the doubling precondition "
                f"is broken (block {block}: {inside})"
            )
        rel = inside[0] - block_start
        if rel < b // 2:
            return range(L // 4 + 1, L // 2 + 1)
        return range(1, L // 4 + 1)
    # first block: candidates always live in the upper half, so checkpoints
    # below K*L/4 are never touched; a checkpoint in the upper half picks
    # the quarter that dodges it
    late = [c for c in inside if c >= b // 2]
    if not late:
        return range(L // 4 + 1, L // 2 + 1)
    if len(late) > 1:
        raise InputError(
            f"two checkpoints in the upper half of block 0: {late}"
        )
    if late[0] - block_start < 3 * b // 4:
        return range(3 * L // 8 + 1, L // 2 + 1)
    return range(L // 4 + 1, 3 * L // 8 + 1)


def refine_level(
    x_prev: Word, signal: SignalSeries, level: TowerLevel, ambient
) -> tuple[Word, list[dict], dict]:
    """Rewrite one V per block so the point enters this level's subshift.

    ambient is the predecessor automaton the fills are computed against;
    it must be explicit, because the fill contexts are its live state sets.
    Returns the processed point padded to whole blocks, the modification
    log, and the pad recipe; the caller truncates.
    """
    if isinstance(ambient, LayeredShift):
        raise ResourceCapError(
            "witness refinement needs an explicit predecessor automaton; "
            f"level {level.index} sits on a layered one"
        )
    if level.index < 1:
        raise InputError("refinement starts at level 1")
    E = essentialize(ambient)
    K, L, W = level.K, level.L, level.W_prev
    b = K * L // 2
    if b > PAD_CAP:
        raise InputError(f"block length {b} exceeds the pad cap {PAD_CAP}")
    N = len(x_prev)
    T = -(-N // b) * b
    S = E.n_states
    rows_list = E.table.tolist()

    def advance(cur, seq, lo, hi, err):
        """Forward live sweep over seq[lo:hi]. The set only shrinks under a
        right-resolving step, so once it is a single state the sweep drops
        to a plain table walk."""
        n = lo
        while n < hi and not isinstance(cur, int):
            cur = _advance_live(E.table, cur, seq[n])
            n += 1
            alive = int(cur.sum())
            if alive == 0:
                raise err
            if alive == 1:
                cur = int(np.flatnonzero(cur)[0])
        row = rows_list
        while n < hi:
            cur = row[cur][seq[n]]
            if cur < 0:
                raise err
            n += 1
        return cur

    bad_input = InputError("previous point is not allowable in the ambient")
    cur = advance(np.ones(S, dtype=bool), list(x_prev.data), 0, N, bad_input)
    pad_start = cur if isinstance(cur, int) else int(np.flatnonzero(cur)[0])
    pad_codes = _pad_walk(E, pad_start, T - N, seed=level.index)
    x = np.concatenate(
        [np.asarray(x_prev.data, dtype=np.int64), np.asarray(pad_codes, dtype=np.int64)]
    ) if pad_codes else np.asarray(x_prev.data, dtype=np.int64)
    x_list = x.tolist()

    a_abs = np.zeros(T, dtype=np.float64)
    a_abs[:N] = np.abs(signal.samples)

    # backward-readability sets at every multiple of K, taken on the point
    # before any rewrite: blocks are processed left to right, so the suffix
    # right of each fill is still the original content when the fill is cut
    n_marks = T // K
    backward = np.ones((n_marks + 1, S), dtype=bool)
    if S > 1:
        live = np.ones(S, dtype=bool)
        for n in range(T - 1, -1, -1):
            live = _retreat_live(E.table, live, x_list[n])
            if n % K == 0:
                backward[n // K] = live

    log: list[dict] = []
    fills: dict[tuple, Word] = {}
    lost = ContractError(
        "refined point lost allowability in the ambient",
        details={"level": level.index},
    )
    cur = np.ones(S, dtype=bool)
    pos = 0
    for block in range(T // b):
        start = block * b
        cand = _candidate_range(level, block, start, signal.checkpoints)
        costs = a_abs[start : start + b].reshape(L // 2, K).sum(axis=1)
        offsets = np.fromiter(cand, dtype=np.int64) - 1
        j = int(offsets[np.argmin(costs[offsets])])  # argmin keeps lowest index
        p = start + j * K

        cur = advance(cur, x_list, pos, p, lost)
        sources = [cur] if isinstance(cur, int) else np.flatnonzero(cur)
        targets = backward[p // K + 1]
        key = (
            cur if isinstance(cur, int) else cur.tobytes(),
            targets.tobytes(),
        )
        fill = fills.get(key)
        if fill is None:
            fill = fill_between(E, sources, np.flatnonzero(targets), K, W)
            fills[key] = fill
        x[p : p + K] = fill.data
        x_list[p : p + K] = fill.data
        log.append(
            {"level": level.index, "block": block, "v_index": j + 1, "fill": fill.names()}
        )
        pos = p
    advance(cur, x_list, pos, T, lost)

    pad_info = {
        "level": level.index,
        "length": T - N,
        "seed": level.index,
        "start_state": E.state_ids[pad_start],
    }
    return Word(PM_ONE, tuple(int(c) for c in x)), log, pad_info


class WitnessReport:
    """Everything build_witness proved, in one bundle."""

    def __init__(self, point, depth, rows, bound_factor, modifications, pads, checkpoints):
        self.point = point
        self.depth = depth
        self.rows = rows  # (level, k, N_k, dot, abs, bound)
        self.bound_factor = bound_factor
        self.modifications = modifications
        self.pads = pads
        self.checkpoints = checkpoints

    def level_rows(self, level: int):
        return [r for r in self.rows if r[0] == level]

    def to_json_dict(self) -> dict:
        return {
            "kind": "witness-report",
            "depth": self.depth,
            "bound_factor": [
                self.bound_factor.numerator,
                self.bound_factor.denominator,
            ],
            "checkpoints": list(self.checkpoints),
            "point": self.point.names(),
            "per_checkpoint": [
                {
                    "level": lvl,
                    "k": k,
                    "N_k": nk,
                    "dot_sum": dot,
                    "abs_sum": ab,
                    "bound": bound,
                }
                for (lvl, k, nk, dot, ab, bound) in self.rows
            ],
            "modifications": self.modifications,
            "pads": self.pads,
        }


def write_checkpoint_csv(report: WitnessReport, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "k", "N_k", "dot_sum", "abs_sum", "bound"])
        for lvl, k, nk, dot, ab, bound in report.rows:
            w.writerow([lvl, k, nk, repr(dot), repr(ab), repr(bound)])


def _checkpoint_sums(signal: SignalSeries, x: Word):
    a = signal.samples
    prods = np.cumsum(a * _signs(x)[: a.size])
    absol = np.cumsum(np.abs(a))
    return (
        [float(prods[c - 1]) for c in signal.checkpoints],
        [float(absol[c - 1]) for c in signal.checkpoints],
    )


def build_witness(signal: SignalSeries, spec: TowerSpec) -> WitnessReport:
    """Chain the refinements through the whole built tower and audit the
    correlation bound at every level and checkpoint; any miss aborts."""
    depth = spec.depth
    x = initial_point(signal)
    rows = []
    modifications: list[dict] = []
    pads: list[dict] = []
    padded = x

    for i in range(depth + 1):
        if i > 0:
            ambient = spec.levels[i - 1].automaton
            padded, log, pad_info = refine_level(x, signal, spec.levels[i], ambient)
            modifications.extend(log)
            pads.append(pad_info)
            x = padded[: len(x)]
        factor = spec.bound_factor(i)
        dots, absols = _checkpoint_sums(signal, x)
        for k, (nk, dot, ab) in enumerate(
            zip(signal.checkpoints, dots, absols), start=1
        ):
            bound = float(factor) * ab
            rows.append((i, k, nk, dot, ab, bound))
            ok = dot > bound if ab > 0 and i > 0 else dot >= bound
            if not ok:
                raise ContractError(
                    "correlation dropped below the bound",
                    details={
                        "level": i,
                        "k": k,
                        "N_k": nk,
                        "dot_sum": dot,
                        "abs_sum": ab,
                        "bound": bound,
                        "factor": str(factor),
                    },
                )

    final = spec.levels[depth].automaton
    if isinstance(final, LayeredShift):
        final.certify_point(padded)
    elif not is_allowable(final, padded):
        raise ContractError(
            "final point is not allowable at the deepest level",
            details={"depth": depth},
        )
    return WitnessReport(
        point=x,
        depth=depth,
        rows=rows,
        bound_factor=spec.bound_factor(depth),
        modifications=modifications,
        pads=pads,
        checkpoints=signal.checkpoints,
    )
