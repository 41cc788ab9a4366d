"""Labeled transition graphs presenting subshifts of finite type.

A ShiftAutomaton is a right-resolving presentation: a finite directed graph
with symbol-labeled edges, at most one outgoing edge per (state, symbol).
The bi-infinite label sequences of its essential part form the subshift.
Every structural question the pipeline asks (allowability, mixing, entropy,
uniform gluing gaps, constrained fills, window restrictions) reduces to a
path question on this graph.

Window constraints are handled as counter products rather than forbidden-word
lists: forbidding all W-free windows of length M costs exponentially many
words but only O(states * |W| * M) product states.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    AlphabetMismatchError,
    ContractError,
    EmptySubshiftError,
    FillNotFoundError,
    GapBoundExceededError,
    InputError,
    ResourceCapError,
)
from .words import Alphabet, Word, _failure_table, occurrences

# Desk-scale caps. Dense S x S work (primitivity powers, entropy blocks) is
# quadratic in memory; product constructions are linear but can be asked for
# absurd sizes. Exceeding a cap raises ResourceCapError, never a silent hang.
DENSE_STATE_CAP = 4_096
PRODUCT_STATE_CAP = 500_000
ENUMERATION_CAP = 2_000_000

_POWER_TOL = 1e-12
_POWER_MAX_ITER = 1_000_000


class ShiftAutomaton:
    """Immutable right-resolving transition graph over a named alphabet.

    table[s, a] holds the target state index for symbol code a, or -1 when
    the edge is absent. States carry string ids so products and restrictions
    stay inspectable.
    """

    def __init__(self, alphabet: Alphabet, state_ids, table, name: str | None = None):
        self.alphabet = alphabet
        self.state_ids = tuple(str(s) for s in state_ids)
        if len(set(self.state_ids)) != len(self.state_ids):
            raise InputError("state ids must be unique")
        tbl = np.array(table, dtype=np.int32, copy=True)
        if tbl.shape != (len(self.state_ids), len(alphabet)):
            raise InputError(
                f"transition table shape {tbl.shape} does not match "
                f"{len(self.state_ids)} states x {len(alphabet)} symbols"
            )
        if tbl.size and (tbl.min() < -1 or tbl.max() >= len(self.state_ids)):
            raise InputError("transition table references states out of range")
        tbl.setflags(write=False)
        self.table = tbl
        self.name = name

    @property
    def n_states(self) -> int:
        return len(self.state_ids)

    def step(self, state: int, code: int) -> int:
        """Target state index, or -1 when no edge carries this symbol."""
        return int(self.table[state, code])

    def run_states(self, start: int, codes) -> list[int] | None:
        """States visited reading the code sequence from `start` (length+1
        entries including the start), or None if the run falls off."""
        if isinstance(codes, Word):
            codes = codes.data
        rows = self.table.tolist()
        out = [start]
        s = start
        for c in codes:
            s = rows[s][c]
            if s < 0:
                return None
            out.append(s)
        return out

    def edges(self) -> list[tuple[str, str, str]]:
        out = []
        for s in range(self.n_states):
            for a in range(len(self.alphabet)):
                t = self.table[s, a]
                if t >= 0:
                    out.append((self.state_ids[s], self.alphabet.symbols[a], self.state_ids[int(t)]))
        return out

    def count_matrix(self) -> np.ndarray:
        """State adjacency with multiplicity: entry (i,j) = number of symbols i->j."""
        C = np.zeros((self.n_states, self.n_states), dtype=np.float64)
        for a in range(len(self.alphabet)):
            col = self.table[:, a]
            src = np.flatnonzero(col >= 0)
            np.add.at(C, (src, col[src]), 1.0)
        return C

    def bool_matrix(self) -> np.ndarray:
        # float32, not uint8: powers are taken by matmul and uint8 sums can
        # wrap to a false zero once S >= 256.
        return (self.count_matrix() > 0).astype(np.float32)

    def to_json_dict(self) -> dict:
        return {
            "alphabet": list(self.alphabet.symbols),
            "states": list(self.state_ids),
            "edges": [list(e) for e in self.edges()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, doc: dict, name: str | None = None) -> "ShiftAutomaton":
        try:
            alphabet = Alphabet(tuple(doc["alphabet"]))
            ids = list(doc["states"])
            edge_list = doc["edges"]
        except (KeyError, TypeError):
            raise InputError("automaton JSON needs keys alphabet/states/edges") from None
        index = {s: i for i, s in enumerate(ids)}
        if len(index) != len(ids):
            raise InputError("duplicate state id in automaton JSON")
        table = np.full((len(ids), len(alphabet)), -1, dtype=np.int32)
        for edge in edge_list:
            if not (isinstance(edge, (list, tuple)) and len(edge) == 3):
                raise InputError(f"malformed edge {edge!r}")
            frm, sym, to = edge
            if frm not in index or to not in index:
                raise InputError(f"edge {edge!r} references unknown state")
            a = alphabet.index(sym)
            if table[index[frm], a] != -1:
                raise InputError(f"two edges from {frm!r} on {sym!r}: not right-resolving")
            table[index[frm], a] = index[to]
        return cls(alphabet, ids, table, name=name)

    @classmethod
    def from_json(cls, text: str, name: str | None = None) -> "ShiftAutomaton":
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise InputError("automaton JSON must be an object")
        return cls.from_json_dict(doc, name=name)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShiftAutomaton):
            return NotImplemented
        return (
            self.alphabet == other.alphabet
            and self.state_ids == other.state_ids
            and np.array_equal(self.table, other.table)
        )

    def __hash__(self):
        return hash((self.alphabet, self.state_ids, self.table.tobytes()))

    def __repr__(self) -> str:
        label = self.name or "?"
        return f"ShiftAutomaton({label}: {self.n_states} states, {len(self.alphabet)} symbols)"


def full_shift(alphabet: Alphabet, name: str | None = None) -> ShiftAutomaton:
    """Single-state automaton with one loop per symbol."""
    table = np.zeros((1, len(alphabet)), dtype=np.int32)
    return ShiftAutomaton(alphabet, ("",), table, name=name or f"full-{len(alphabet)}")


def from_forbidden_words(alphabet: Alphabet, forbidden, name: str | None = None) -> ShiftAutomaton:
    """Essential automaton of the sequences avoiding every forbidden word.

    States are the Aho-Corasick prefix states that do not contain a forbidden
    factor; the follower transition (longest-suffix fallback) makes the
    presentation right-resolving. Raises EmptySubshiftError when nothing
    survives essentialization.
    """
    forbidden = list(forbidden)
    for w in forbidden:
        if w.alphabet != alphabet:
            raise AlphabetMismatchError("forbidden word uses a different alphabet")
        if len(w) == 0:
            raise InputError("forbidden words must have length >= 1")

    # Trie over the forbidden-word prefixes; node 0 is the empty prefix.
    children: list[dict[int, int]] = [{}]
    parent_sym: list[tuple[int, int]] = [(-1, -1)]
    terminal = [False]
    for w in forbidden:
        node = 0
        for c in w.data:
            nxt = children[node].get(c)
            if nxt is None:
                nxt = len(children)
                children[node][c] = nxt
                children.append({})
                parent_sym.append((node, c))
                terminal.append(False)
            node = nxt
        terminal[node] = True

    n = len(children)
    fail = [0] * n
    order = []
    queue = list(children[0].values())
    order.extend(queue)
    for node in queue:
        fail[node] = 0
    i = 0
    while i < len(order):
        node = order[i]
        i += 1
        for c, nxt in children[node].items():
            f = fail[node]
            while f and c not in children[f]:
                f = fail[f]
            fail[nxt] = children[f].get(c, 0)
            order.append(nxt)

    dead = terminal[:]
    for node in order:
        dead[node] = dead[node] or dead[fail[node]]

    # Full goto function (falls back along fail links), then restrict to the
    # alive prefix states; transitions into dead states are simply absent.
    A = len(alphabet)
    goto = np.zeros((n, A), dtype=np.int32)
    for a in range(A):
        goto[0, a] = children[0].get(a, 0)
    for node in order:
        for a in range(A):
            goto[node, a] = children[node].get(a, goto[fail[node], a])

    alive = [i for i in range(n) if not dead[i]]
    alive_index = {node: k for k, node in enumerate(alive)}

    def prefix_text(node: int) -> str:
        parts = []
        while node:
            node, c = parent_sym[node]
            parts.append(alphabet.symbols[c])
        return " ".join(reversed(parts))

    ids = [prefix_text(node) for node in alive]
    table = np.full((len(alive), A), -1, dtype=np.int32)
    for k, node in enumerate(alive):
        for a in range(A):
            t = int(goto[node, a])
            if not dead[t]:
                table[k, a] = alive_index[t]

    raw = ShiftAutomaton(alphabet, ids, table, name=name)
    ess = essentialize(raw)
    if ess.n_states == 0:
        raise EmptySubshiftError("forbidden words leave no bi-infinite sequence")
    return ess


def essentialize(A: ShiftAutomaton) -> ShiftAutomaton:
    """Iteratively drop states with in-degree or out-degree zero.

    Returns A itself when it is already essential; may return an automaton
    with zero states (the empty-subshift outcome).
    """
    S = A.n_states
    keep = np.ones(S, dtype=bool)
    table = A.table
    while True:
        idx = np.flatnonzero(keep)
        if idx.size == 0:
            break
        sub = table[idx]
        has_edge = sub >= 0
        alive_target = np.zeros_like(has_edge)
        alive_target[has_edge] = keep[sub[has_edge]]
        out_ok = alive_target.any(axis=1)
        seen_in = np.zeros(S, dtype=bool)
        seen_in[sub[has_edge]] = True
        new_rows = out_ok & seen_in[idx]
        if new_rows.all():
            break
        keep[idx] = new_rows
    if keep.all():
        return A
    kept = np.flatnonzero(keep)
    remap = np.full(S, -1, dtype=np.int32)
    remap[kept] = np.arange(kept.size, dtype=np.int32)
    new_table = table[kept].copy()
    live = new_table >= 0
    new_table[live] = remap[new_table[live]]
    ids = tuple(A.state_ids[i] for i in kept)
    return ShiftAutomaton(A.alphabet, ids, new_table, name=A.name)


def _advance_live(table: np.ndarray, live: np.ndarray, code: int) -> np.ndarray:
    targets = table[live, code]
    targets = targets[targets >= 0]
    out = np.zeros(live.shape, dtype=bool)
    out[targets] = True
    return out


def _retreat_live(table: np.ndarray, live: np.ndarray, code: int) -> np.ndarray:
    col = table[:, code]
    ok = col >= 0
    out = np.zeros(live.shape, dtype=bool)
    out[ok] = live[col[ok]]
    return out


def is_allowable(A: ShiftAutomaton, w: Word) -> bool:
    """True iff some path in the essential part of A is labeled w."""
    if w.alphabet != A.alphabet:
        raise AlphabetMismatchError("word alphabet differs from automaton alphabet")
    E = essentialize(A)
    if E.n_states == 0:
        return False
    live = np.ones(E.n_states, dtype=bool)
    for c in w.data:
        live = _advance_live(E.table, live, c)
        if not live.any():
            return False
    return True


def allowable_words(A: ShiftAutomaton, n: int, cap: int = ENUMERATION_CAP) -> list[Word]:
    """All distinct length-n labels of paths in the essential part, in
    lexicographic (symbol-code) order.

    Walks the determinized live-set graph, so cost is proportional to the
    answer, not to |alphabet|^n.
    """
    if n < 0:
        raise InputError("word length must be >= 0")
    E = essentialize(A)
    if E.n_states == 0:
        return []
    if n == 0:
        return [Word(E.alphabet, ())]
    A_sz = len(E.alphabet)

    # Determinized transitions between live sets, discovered on demand.
    subset_index: dict[bytes, int] = {}
    subsets: list[np.ndarray] = []
    trans: list[list[int]] = []

    def intern(live: np.ndarray) -> int:
        key = np.packbits(live).tobytes()
        got = subset_index.get(key)
        if got is not None:
            return got
        subset_index[key] = len(subsets)
        subsets.append(live)
        trans.append([-2] * A_sz)  # -2 unexplored, -1 dead
        return len(subsets) - 1

    root = intern(np.ones(E.n_states, dtype=bool))
    rows = np.array([root], dtype=np.int64)
    prefixes = np.zeros((1, 0), dtype=np.int8)
    for _ in range(n):
        k = rows.size
        if k * A_sz > cap:
            raise ResourceCapError(f"allowable-word enumeration exceeds cap {cap}")
        for u in np.unique(rows):
            for a in range(A_sz):
                if trans[u][a] == -2:
                    nxt = _advance_live(E.table, subsets[u], a)
                    trans[u][a] = intern(nxt) if nxt.any() else -1
        lookup = np.array([trans[u] for u in range(len(subsets))], dtype=np.int64)
        child_rows = lookup[rows].reshape(-1)
        syms = np.tile(np.arange(A_sz, dtype=np.int8), k)
        parents = np.repeat(np.arange(k), A_sz)
        ok = child_rows >= 0
        rows = child_rows[ok]
        prefixes = np.concatenate([prefixes[parents[ok]], syms[ok, None]], axis=1)
    return [Word(E.alphabet, tuple(int(c) for c in row)) for row in prefixes]


def _bool_power(B: np.ndarray, k: int, doublings: list[np.ndarray]) -> np.ndarray:
    """Boolean k-th power from the cached doubling ladder (doublings[t] = B^(2^t))."""
    acc = None
    t = 0
    while k:
        if k & 1:
            while t >= len(doublings):
                nxt = (doublings[-1] @ doublings[-1]) > 0
                doublings.append(nxt.astype(np.float32))
            P = doublings[t]
            acc = P if acc is None else ((acc @ P) > 0).astype(np.float32)
        k >>= 1
        t += 1
    return acc


def _least_primitive_power(B: np.ndarray) -> int | None:
    """Least gamma with B^gamma all-positive, or None when B is not primitive.

    B must come from an essential automaton (no zero rows or columns); then
    all-positivity is monotone in the exponent, so a doubling ladder plus
    bisection decides primitivity within the Wielandt bound (S-1)^2 + 1.
    """
    S = B.shape[0]
    if S > DENSE_STATE_CAP:
        raise ResourceCapError(f"primitivity check needs dense powers of a {S}x{S} matrix (cap {DENSE_STATE_CAP})")
    wielandt = (S - 1) ** 2 + 1
    doublings = [B]
    k = 1
    while not doublings[-1].all() and k < wielandt:
        nxt = ((doublings[-1] @ doublings[-1]) > 0).astype(np.float32)
        doublings.append(nxt)
        k *= 2
    if not doublings[-1].all():
        return None
    lo, hi = k // 2, k  # B^lo not all-positive (or lo=0), B^hi all-positive
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if _bool_power(B, mid, doublings).all():
            hi = mid
        else:
            lo = mid
    return hi


def is_mixing(A: ShiftAutomaton) -> bool:
    """Topological mixing of the presented SFT: primitivity of the essential
    adjacency relation, decided within the Wielandt bound."""
    E = essentialize(A)
    if E.n_states == 0:
        raise EmptySubshiftError("mixing is undefined for the empty subshift")
    return _least_primitive_power(E.bool_matrix()) is not None


def _perron_root_irreducible(M: np.ndarray) -> float:
    """Spectral radius of an irreducible nonnegative matrix.

    Power-iterates M + I (primitive whenever M is irreducible, and
    rho(M + I) = rho(M) + 1 exactly for nonnegative M, which rescues
    periodic matrices where plain iteration never settles) and stops when
    the Collatz-Wielandt bracket closes to relative width 1e-12.
    """
    v = np.ones(M.shape[0], dtype=np.float64)
    for _ in range(_POWER_MAX_ITER):
        w = M @ v + v
        ratios = w / v
        lo = float(ratios.min())
        hi = float(ratios.max())
        if hi - lo <= _POWER_TOL * hi:
            return 0.5 * (lo + hi) - 1.0
        v = w / w.max()
    raise ContractError(
        "power iteration failed to converge",
        {"size": int(M.shape[0]), "bracket": (lo, hi)},
    )


def entropy(A: ShiftAutomaton) -> float:
    """Topological entropy: natural log of the Perron root of the essential
    count matrix. The radius is the max over strongly connected components,
    each handled by shifted power iteration."""
    E = essentialize(A)
    if E.n_states == 0:
        raise EmptySubshiftError("entropy is undefined for the empty subshift")
    if E.n_states > DENSE_STATE_CAP:
        raise ResourceCapError(f"dense entropy capped at {DENSE_STATE_CAP} states")
    C = E.count_matrix()
    n_comp, labels = connected_components(sp.csr_matrix(C > 0), directed=True, connection="strong")
    rho = 0.0
    for comp in range(n_comp):
        members = np.flatnonzero(labels == comp)
        if members.size == 1:
            rho = max(rho, float(C[members[0], members[0]]))
            continue
        block = C[np.ix_(members, members)]
        rho = max(rho, _perron_root_irreducible(block))
    if rho < 1.0 - 1e-9:
        raise ContractError("essential automaton must have spectral radius >= 1", {"rho": rho})
    return math.log(rho)


def _kmp_step_table(w: Word) -> np.ndarray:
    """step[p, a] = KMP progress after reading symbol a at progress p; row m
    (a completed match) continues exactly like the border row."""
    m = len(w)
    A_sz = len(w.alphabet)
    fail = _failure_table(w.data)
    step = np.zeros((m + 1, A_sz), dtype=np.int32)
    for p in range(m + 1):
        for a in range(A_sz):
            if p < m and a == w.data[p]:
                step[p, a] = p + 1
            elif p > 0:
                step[p, a] = step[fail[p], a]
    return step


def _occurrence_product(E: ShiftAutomaton, W: Word):
    """Deterministic product of E with the W-pattern automaton plus a sticky
    "W completed" flag. Progress is collapsed to [0, m) by rerouting a
    completed match to its border continuation.

    Returns (next_by_symbol: (A, P) int64 with -1 for absent edges, P).
    """
    S = E.n_states
    m = len(W)
    A_sz = len(E.alphabet)
    step = _kmp_step_table(W)
    border = _failure_table(W.data)[m]
    P = S * m * 2
    nxt = np.full((A_sz, P), -1, dtype=np.int64)
    q = np.arange(S)
    for a in range(A_sz):
        q2 = E.table[:, a].astype(np.int64)
        for p in range(m):
            p2 = int(step[p, a])
            completed = p2 == m
            p2c = border if completed else p2
            for seen in (0, 1):
                seen2 = 1 if (seen or completed) else 0
                u = (q * m + p) * 2 + seen
                v = (q2 * m + p2c) * 2 + seen2
                ok = q2 >= 0
                nxt[a, u[ok]] = v[ok]
    return nxt, P


def _product_sparse_transpose(nxt: np.ndarray) -> sp.csr_matrix:
    """Transposed adjacency of a deterministic product: entry (v, u) = 1 iff
    some symbol sends u to v."""
    A_sz, P = nxt.shape
    rows = []
    cols = []
    for a in range(A_sz):
        u = np.flatnonzero(nxt[a] >= 0)
        rows.append(nxt[a, u])
        cols.append(u)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.ones(rows.size, dtype=np.float32)
    return sp.csr_matrix((data, (rows, cols)), shape=(P, P))


@dataclass(frozen=True, eq=False)
class GapCertificate:
    """Finite certificate for the uniform gluing gap of W in an automaton.

    constant is the least K such that for every ordered pair of essential
    states and every l with K <= l <= verified_bound there is a length-l
    connecting path whose label contains `word`. Lengths beyond
    verified_bound = 2 * primitive_power + |word| are covered by routing
    through an all-positive power, so the finite table certifies all l >= K.

    word=None asks for pure transitivity (no containment requirement); that
    variant is what specification-style coding needs for its gap u.
    """

    word: Word | None
    constant: int
    verified_bound: int
    primitive_power: int
    state_ids: tuple[str, ...]
    table: np.ndarray  # packed bits, shape (verified_bound+1, S, ceil(S/8))

    def pair_feasible(self, i: int, j: int, l: int) -> bool:
        """Flag for a length-l W-containing path from state i to state j."""
        if not (0 <= l <= self.verified_bound):
            raise InputError(f"certificate covers lengths 0..{self.verified_bound}")
        byte = self.table[l, i, j >> 3]
        return bool((int(byte) >> (7 - (j & 7))) & 1)

    def feasible_matrix(self, l: int) -> np.ndarray:
        """Dense (S, S) bool view of the length-l pair table."""
        if not (0 <= l <= self.verified_bound):
            raise InputError(f"certificate covers lengths 0..{self.verified_bound}")
        S = len(self.state_ids)
        return np.unpackbits(self.table[l], axis=1, count=S).astype(bool)

    def min_length(self, sources, targets) -> int:
        """Least l at which some source-target pair is certified feasible.

        This is the per-junction minimum the minimality-word builder uses;
        it exists because everything is feasible at verified_bound.
        """
        src = np.asarray(list(sources), dtype=np.intp)
        tgt = np.asarray(list(targets), dtype=np.intp)
        if src.size == 0 or tgt.size == 0:
            raise InputError("empty context state set")
        for l in range(self.verified_bound + 1):
            if self.feasible_matrix(l)[np.ix_(src, tgt)].any():
                return l
        raise ContractError(
            "certificate has no feasible length, contradicting its own bound",
            details={"verified_bound": self.verified_bound},
        )

    def to_json_dict(self) -> dict:
        return {
            "word": None if self.word is None else self.word.names(),
            "constant": self.constant,
            "verified_bound": self.verified_bound,
            "primitive_power": self.primitive_power,
            "states": len(self.state_ids),
        }


def gap_constant(
    A: ShiftAutomaton,
    W: Word | None = None,
    bound: int | None = None,
) -> GapCertificate:
    """Least certified uniform gap for gluing through a copy of W.

    The default bound 10 * S * max(|W|, 1) is a pragmatic cap, not a theorem.
    Raises GapBoundExceededError when the least K exceeds it and InputError
    when A is not mixing or W is not allowable (no K exists at all).
    """
    E = essentialize(A)
    if E.n_states == 0:
        raise EmptySubshiftError("gap constants are undefined for the empty subshift")
    if W is not None and len(W) == 0:
        W = None
    if W is not None:
        if W.alphabet != E.alphabet:
            raise AlphabetMismatchError("W uses a different alphabet")
        if not is_allowable(E, W):
            raise InputError("W is not allowable, so no fill can contain it")
    S = E.n_states
    m = len(W) if W is not None else 0
    if bound is None:
        bound = 10 * S * max(m, 1)

    gamma = _least_primitive_power(E.bool_matrix())
    if gamma is None:
        raise InputError("gap constants exist only for mixing automata")
    vb = 2 * gamma + m

    if W is None:
        # Pure transitivity: pair feasibility at length l is positivity of
        # the boolean l-th power.
        F = np.eye(S, dtype=np.float32)
        Tt = sp.csr_matrix(E.bool_matrix().T)
        pair_tables = []
        all_flags = np.zeros(vb + 1, dtype=bool)
        for l in range(vb + 1):
            pairs = F.T > 0
            pair_tables.append(np.packbits(pairs, axis=-1))
            all_flags[l] = bool(pairs.all())
            if l < vb:
                F = (Tt @ F) > 0
                F = F.astype(np.float32)
    else:
        nxt, P = _occurrence_product(E, W)
        Tt = _product_sparse_transpose(nxt)
        F = np.zeros((P, S), dtype=np.float32)
        start = (np.arange(S) * m * 2).astype(np.int64)  # (q=s, p=0, seen=0)
        F[start, np.arange(S)] = 1.0
        pair_tables = []
        all_flags = np.zeros(vb + 1, dtype=bool)
        for l in range(vb + 1):
            F4 = F.reshape(S, m, 2, S) > 0
            pairs = F4[:, :, 1, :].any(axis=1).T  # [from, to]
            pair_tables.append(np.packbits(pairs, axis=-1))
            all_flags[l] = bool(pairs.all())
            if l < vb:
                F = (Tt @ F) > 0
                F = F.astype(np.float32)

    if not all_flags[vb]:
        raise ContractError(
            "primitivity argument failed: verified bound is not all-feasible",
            {"verified_bound": vb, "gamma": gamma},
        )
    not_ok = np.flatnonzero(~all_flags)
    K = int(not_ok[-1] + 1) if not_ok.size else 0
    if K > bound:
        raise GapBoundExceededError(f"gap constant {K} exceeds the requested bound {bound}")
    return GapCertificate(
        word=W,
        constant=K,
        verified_bound=vb,
        primitive_power=gamma,
        state_ids=E.state_ids,
        table=np.stack(pair_tables),
    )


def fill_between(
    A: ShiftAutomaton,
    source_states,
    target_states,
    l: int,
    W: Word | None = None,
) -> Word:
    """Lexicographically least length-l word routing some source state to some
    target state, containing W when given. Engine behind find_fill; operates
    on A exactly as handed in (callers pre-essentialize), with state indices
    into A.state_ids.

    The greedy symbol choice is filtered by exact backward reachability, so
    the first feasible symbol at each position is provably extendable; the
    result is the lex-least valid fill.
    """
    if l < 0:
        raise InputError("fill length must be >= 0")
    if W is not None and len(W) == 0:
        W = None
    if W is not None and W.alphabet != A.alphabet:
        raise AlphabetMismatchError("W uses a different alphabet")
    m = len(W) if W is not None else 0
    if l < m:
        raise FillNotFoundError(f"a length-{l} fill cannot contain a length-{m} word")
    S = A.n_states
    A_sz = len(A.alphabet)

    if W is None:
        nxt = A.table.astype(np.int64).T.copy()  # (A, S)
        P = S
        start = np.asarray(sorted(set(int(s) for s in source_states)), dtype=np.int64)
        accept = np.zeros(P, dtype=bool)
        accept[np.asarray(sorted(set(int(s) for s in target_states)), dtype=np.int64)] = True
    else:
        nxt, P = _occurrence_product(A, W)
        start = np.asarray(sorted(set((int(s) * m) * 2 for s in source_states)), dtype=np.int64)
        accept = np.zeros(P, dtype=bool)
        for q in set(int(s) for s in target_states):
            base = (q * m) * 2
            accept[base + 1 : base + 2 * m : 2] = True  # any progress, seen=1

    if (l + 1) * P > 200_000_000:
        raise ResourceCapError("fill search table too large at this length")

    # reach[t] = product states that can still hit an accepting state in l-t steps
    reach = np.zeros((l + 1, P), dtype=bool)
    reach[l] = accept
    for t in range(l - 1, -1, -1):
        acc = np.zeros(P, dtype=bool)
        for a in range(A_sz):
            ok = nxt[a] >= 0
            hit = ok.copy()
            hit[ok] = reach[t + 1][nxt[a, ok]]
            acc |= hit
        reach[t] = acc

    cur = np.zeros(P, dtype=bool)
    cur[start] = True
    cur &= reach[0]
    if not cur.any():
        raise FillNotFoundError("no fill of this length connects the given contexts")
    codes = []
    for t in range(l):
        for a in range(A_sz):
            stepped = nxt[a, cur]
            stepped = stepped[stepped >= 0]
            if stepped.size == 0:
                continue
            candidate = np.zeros(P, dtype=bool)
            candidate[stepped] = True
            candidate &= reach[t + 1]
            if candidate.any():
                codes.append(a)
                cur = candidate
                break
        else:
            raise ContractError("backward-filtered fill search dead-ended", {"position": t})
    fill = Word(A.alphabet, tuple(codes))
    if W is not None and not occurrences(W, fill):
        raise ContractError("fill search returned a word without the required factor")
    return fill


def context_states(
    A: ShiftAutomaton, left: Word, right: Word
) -> tuple[np.ndarray, np.ndarray]:
    """(states reachable after reading left, states from which right is
    readable) in the essentialized automaton. Raises FillNotFoundError when
    either context is not allowable."""
    for ctx in (left, right):
        if ctx.alphabet != A.alphabet:
            raise AlphabetMismatchError("context word uses a different alphabet")
    E = essentialize(A)
    if E.n_states == 0:
        raise EmptySubshiftError("cannot fill inside the empty subshift")
    live = np.ones(E.n_states, dtype=bool)
    for c in left.data:
        live = _advance_live(E.table, live, c)
    if not live.any():
        raise FillNotFoundError("left context is not allowable")
    sources = np.flatnonzero(live)
    live = np.ones(E.n_states, dtype=bool)
    for c in reversed(right.data):
        live = _retreat_live(E.table, live, c)
    if not live.any():
        raise FillNotFoundError("right context is not allowable")
    return sources, np.flatnonzero(live)


def find_fill(
    A: ShiftAutomaton,
    left: Word,
    right: Word,
    l: int,
    W: Word | None = None,
) -> Word:
    """Lexicographically least length-l word w containing W such that
    left + w + right is allowable. FillNotFoundError signals a caller bug:
    l below the certified gap constant, or contexts that are not allowable."""
    E = essentialize(A)
    sources, targets = context_states(E, left, right)
    return fill_between(E, sources, targets, l, W)


def window_restriction(A: ShiftAutomaton, W: Word, M: int) -> ShiftAutomaton:
    """Subshift of X_A in which every length-M window contains W.

    Product of A with (KMP progress, symbols since the last completed
    occurrence). A window misses W exactly when some gap between consecutive
    occurrence ends exceeds M - |W| + 1, so the counter is capped at M - |W|
    and the overflowing transition is dropped. Result is essentialized;
    raises EmptySubshiftError when no bi-infinite point survives.
    """
    if W.alphabet != A.alphabet:
        raise AlphabetMismatchError("W uses a different alphabet")
    m = len(W)
    if m == 0:
        raise InputError("window word must be nonempty")
    if M < m:
        raise InputError("window length must be at least |W|")
    E = essentialize(A)
    if E.n_states == 0:
        raise EmptySubshiftError("ambient subshift is empty")
    if not is_allowable(E, W):
        raise InputError("W is not allowable in the ambient subshift")
    S = E.n_states
    A_sz = len(E.alphabet)
    D = M - m  # max steps since the last completed occurrence
    raw_states = S * m * (D + 1)
    if raw_states > PRODUCT_STATE_CAP:
        raise ResourceCapError(f"window product needs {raw_states} states (cap {PRODUCT_STATE_CAP})")

    step = _kmp_step_table(W)
    border = _failure_table(W.data)[m]
    table = np.full((raw_states, A_sz), -1, dtype=np.int32)
    d_axis = np.arange(D + 1)
    for a in range(A_sz):
        q2 = E.table[:, a].astype(np.int64)  # (S,)
        for p in range(m):
            p2 = int(step[p, a])
            completed = p2 == m
            p2c = border if completed else p2
            if completed:
                d2 = np.zeros(D + 1, dtype=np.int64)
                d_ok = np.ones(D + 1, dtype=bool)
            else:
                d2 = d_axis + 1
                d_ok = d2 <= D
            u = ((np.arange(S)[:, None] * m + p) * (D + 1) + d_axis[None, :])
            v = ((q2[:, None] * m + p2c) * (D + 1) + d2[None, :])
            ok = (q2[:, None] >= 0) & d_ok[None, :]
            table[u[ok], a] = v[ok].astype(np.int32)

    ids = [
        f"{E.state_ids[q]}|{p}|{d}"
        for q in range(S)
        for p in range(m)
        for d in range(D + 1)
    ]
    product = ShiftAutomaton(E.alphabet, ids, table, name=None)
    out = essentialize(product)
    if out.n_states == 0:
        raise EmptySubshiftError(f"no point repeats {W.text()!r} inside every window of {M}")
    name = f"{A.name or 'X'}|window({W.text()},{M})"
    return ShiftAutomaton(out.alphabet, out.state_ids, out.table, name=name)


def sample_point(A: ShiftAutomaton, length: int, seed: int) -> Word:
    """Label of a seeded random walk of the given length on the essential part
    (uniform over available edges at each step)."""
    if length < 0:
        raise InputError("length must be >= 0")
    E = essentialize(A)
    if E.n_states == 0:
        raise EmptySubshiftError("cannot sample from the empty subshift")
    rng = np.random.default_rng(seed)
    rows = E.table.tolist()
    s = int(rng.integers(E.n_states))
    codes = []
    for _ in range(length):
        opts = [a for a, t in enumerate(rows[s]) if t >= 0]
        a = opts[int(rng.integers(len(opts)))]
        codes.append(a)
        s = rows[s][a]
    return Word(E.alphabet, tuple(codes))
