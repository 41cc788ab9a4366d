"""The nested window tower.

Level 0 is the full shift on two symbols. Each later level restricts its
predecessor: every window of length L_i * K_i must contain the previous
level's marker word, where K_i is the predecessor's gluing gap through that
marker. The schedule (L_1, L_2, ...) controls how much room each level
leaves; the running sum of 16 / L_i must stay below one, checked in exact
rational arithmetic because the slack it leaves is exactly what the witness
construction later spends.

Every level carries a marker word W_i built to contain every allowable
(i+1)-block of that level, so the markers themselves witness the nesting.
Levels are represented explicitly while the window product fits in memory
and as layered rule stacks beyond that; the switch is recorded per level in
gap_mode, since layered levels use a certified upper bound for K instead of
the exact dynamic program.
"""

from dataclasses import dataclass
from fractions import Fraction

from .automaton import (
    PRODUCT_STATE_CAP,
    ShiftAutomaton,
    allowable_words,
    context_states,
    entropy,
    essentialize,
    fill_between,
    full_shift,
    gap_constant,
    is_allowable,
    is_mixing,
    window_restriction,
)
from .errors import ContractError, InputError
from .layered import LayeredShift, WindowRule
from .words import PM_ONE, Word, occurrences

Automaton = ShiftAutomaton | LayeredShift


def default_schedule(depth: int) -> list[int]:
    """L_i = 2^(i+5): 64, 128, 256, ... The tail sum of 16 / L_i over all
    i >= 1 is exactly 1/2, so any prefix leaves the witness bound positive."""
    if depth < 1:
        raise InputError("schedule depth must be at least 1")
    return [2 ** (i + 5) for i in range(1, depth + 1)]


def validate_schedule(schedule) -> Fraction:
    """Check multiples-of-eight and the rational budget; returns the sum
    of 16 / L_i, which callers reuse as the witness bound deficit."""
    total = Fraction(0)
    for L in schedule:
        if not isinstance(L, int) or L <= 0 or L % 8 != 0:
            raise InputError(f"window factor {L!r} is not a positive multiple of 8")
        total += Fraction(16, L)
    if total >= 1:
        raise InputError(f"sum of 16/L_i is {total}, must stay below 1")
    return total


def build_minimality_word(A: Automaton, n: int) -> Word:
    """Shortest-effort word containing every allowable n-block of A.

    Chains the allowable n-words in lexicographic order; each junction fill
    takes the least length the trivial-gap certificate proves feasible for
    the pinned context states, so repeated builds are bit-identical.
    """
    if n < 0:
        raise InputError("block length must be nonnegative")
    if isinstance(A, LayeredShift):
        blocks = A.allowable_words(n)
        B = A.base
        cert = A.trivial_certificate()
    else:
        B = essentialize(A)
        blocks = allowable_words(B, n)
        cert = gap_constant(B)
    if n == 0:
        return Word(B.alphabet, ())
    if not blocks:
        raise ContractError("no allowable blocks at this length", details={"n": n})
    chain = blocks[0]
    for w in blocks[1:]:
        sources, targets = context_states(B, chain, w)
        l = cert.min_length(sources, targets)
        chain = chain + fill_between(B, sources, targets, l) + w
    for w in blocks:
        if not occurrences(w, chain):
            raise ContractError(
                "marker word lost a block it was built to contain",
                details={"block": w.text()},
            )
    if isinstance(A, LayeredShift):
        if not A.is_allowable(chain):
            raise ContractError("marker word is not allowable in its own level")
    elif not is_allowable(B, chain):
        raise ContractError("marker word is not allowable in its own level")
    return chain


@dataclass(frozen=True)
class TowerLevel:
    """One rung: the subshift, its window parameters, and its marker word.

    gap_mode records how K was obtained: "exact" from the dynamic program on
    the explicit predecessor, "certified-upper" from the layered schedule
    bound. Level 0 has L = K = 0 and no predecessor marker.
    """

    index: int
    automaton: Automaton
    L: int
    K: int
    W_prev: Word | None
    W: Word
    gap_mode: str = "exact"

    def __post_init__(self):
        if self.index < 0:
            raise InputError("level index must be nonnegative")
        if self.index == 0:
            if self.W_prev is not None or self.L or self.K:
                raise InputError("level 0 carries no window parameters")
        else:
            if self.W_prev is None:
                raise InputError("restricted levels need the predecessor marker")
            if self.L <= 0 or self.K <= 0:
                raise InputError("restricted levels need positive L and K")

    @property
    def window(self) -> int:
        return self.L * self.K

    def entropy_range(self) -> tuple[float, float]:
        """Exact entropy as a degenerate interval, or certified bounds."""
        if isinstance(self.automaton, LayeredShift):
            return self.automaton.entropy_bounds()
        h = entropy(self.automaton)
        return h, h

    def to_json_dict(self) -> dict:
        auto = self.automaton.to_json_dict()
        if "kind" not in auto:
            auto = {"kind": "explicit", **auto}
        return {
            "index": self.index,
            "L": self.L,
            "K": self.K,
            "gap_mode": self.gap_mode,
            "W_prev": None if self.W_prev is None else self.W_prev.names(),
            "W": self.W.names(),
            "automaton": auto,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TowerLevel":
        auto_doc = doc["automaton"]
        if auto_doc.get("kind") == "layered":
            auto = LayeredShift.from_json_dict(auto_doc)
            alphabet = auto.alphabet
        else:
            auto = ShiftAutomaton.from_json_dict(
                {k: v for k, v in auto_doc.items() if k != "kind"}
            )
            alphabet = auto.alphabet
        W_prev = doc["W_prev"]
        return cls(
            index=doc["index"],
            automaton=auto,
            L=doc["L"],
            K=doc["K"],
            W_prev=None if W_prev is None else Word.from_names(alphabet, W_prev),
            W=Word.from_names(alphabet, doc["W"]),
            gap_mode=doc.get("gap_mode", "exact"),
        )


class TowerSpec:
    """A built tower prefix plus the schedule it is committed to."""

    def __init__(self, levels: list[TowerLevel], schedule: list[int]):
        validate_schedule(schedule)
        if not levels:
            raise InputError("tower needs at least the base level")
        if len(levels) - 1 > len(schedule):
            raise InputError("more built levels than the schedule provides")
        for i, lv in enumerate(levels):
            if lv.index != i:
                raise InputError("level indices must be contiguous from 0")
            if i > 0 and lv.L != schedule[i - 1]:
                raise InputError(f"level {i} was built with L={lv.L}, schedule says {schedule[i - 1]}")
        self.levels = list(levels)
        self.schedule = list(schedule)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def bound_factor(self, depth: int | None = None) -> Fraction:
        """1 - sum of 16/L_j over built levels up to depth; the witness
        inequality's right-hand coefficient."""
        if depth is None:
            depth = self.depth
        if not (0 <= depth <= self.depth):
            raise InputError("depth outside the built tower")
        return 1 - sum((Fraction(16, L) for L in self.schedule[:depth]), Fraction(0))

    def to_json_dict(self) -> dict:
        return {
            "kind": "tower",
            "schedule": self.schedule,
            "levels": [lv.to_json_dict() for lv in self.levels],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TowerSpec":
        if doc.get("kind") != "tower":
            raise InputError("not a tower document")
        levels = [TowerLevel.from_json_dict(d) for d in doc["levels"]]
        return cls(levels, [int(L) for L in doc["schedule"]])


def make_base_level() -> TowerLevel:
    full2 = full_shift(PM_ONE)
    return TowerLevel(
        index=0,
        automaton=full2,
        L=0,
        K=0,
        W_prev=None,
        W=build_minimality_word(full2, 1),
    )


def extend_tower(spec: TowerSpec, gap_bound: int | None = None) -> TowerSpec:
    """Build the next level on top of spec, explicit while the window
    product fits under the state cap and layered beyond.

    gap_bound caps the dynamic program's search; exceeding it raises
    GapBoundExceededError rather than silently truncating, since a wrong K
    would corrupt every later level.
    """
    i = spec.depth + 1
    if i > len(spec.schedule):
        raise InputError("schedule exhausted; extend the schedule first")
    prev = spec.levels[-1]
    A_prev = prev.automaton
    W_prev = prev.W
    L = spec.schedule[i - 1]

    if isinstance(A_prev, LayeredShift):
        if not A_prev.is_mixing():
            raise InputError("predecessor level lost its mixing certificate")
        K = A_prev.gap_bound_through(W_prev)
        gap_mode = "certified-upper"
        auto = A_prev.with_rule(
            WindowRule(W_prev, L * K, L=L, K=K), name=f"tower[{i}]"
        )
        if not auto.is_mixing():
            raise ContractError(
                "layered level lost positive slack, carrier certificate gone",
                details={"level": i, "slack": auto.slack},
            )
    else:
        if not is_mixing(A_prev):
            raise InputError("predecessor level is not mixing")
        cert = (
            gap_constant(A_prev, W_prev)
            if gap_bound is None
            else gap_constant(A_prev, W_prev, bound=gap_bound)
        )
        K = cert.constant
        gap_mode = "exact"
        M = L * K
        E_prev = essentialize(A_prev)
        raw = E_prev.n_states * len(W_prev) * (M - len(W_prev) + 1)
        if raw <= PRODUCT_STATE_CAP:
            auto = window_restriction(A_prev, W_prev, M)
            if not is_mixing(auto):
                raise ContractError(
                    "window restriction is not mixing", details={"level": i}
                )
        else:
            auto = LayeredShift(
                A_prev, [WindowRule(W_prev, M, L=L, K=K)], name=f"tower[{i}]"
            )
            gap_mode = "exact"  # K itself came from the DP; only storage is layered
            if not auto.is_mixing():
                raise ContractError(
                    "layered level lost positive slack, carrier certificate gone",
                    details={"level": i, "slack": auto.slack},
                )

    level = TowerLevel(
        index=i,
        automaton=auto,
        L=L,
        K=K,
        W_prev=W_prev,
        W=build_minimality_word(auto, i + 1),
        gap_mode=gap_mode,
    )
    return TowerSpec(spec.levels + [level], spec.schedule)


def build_tower(
    depth: int, schedule: list[int] | None = None, gap_bound: int | None = None
) -> TowerSpec:
    if depth < 0:
        raise InputError("depth must be nonnegative")
    if schedule is None:
        schedule = default_schedule(depth) if depth >= 1 else []
    if len(schedule) < depth:
        raise InputError("schedule shorter than the requested depth")
    spec = TowerSpec([make_base_level()], schedule)
    for _ in range(depth):
        spec = extend_tower(spec, gap_bound=gap_bound)
    return spec
