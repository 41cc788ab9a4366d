"""Window restrictions too large to materialize as explicit products.

A LayeredShift is an explicit base automaton plus a stack of window rules
(every length-M window must contain W). The deep tower levels live here:
their product state counts grow past any reasonable cap, but every question
the pipeline actually asks can be answered from the base automaton together
with finite gluing certificates.

The workhorse idea is the sprinkled carrier: a periodic base path that shows
every rule word with period far below every window length. Short words embed
into a carrier, which makes allowability of words below the slack threshold
equal to base allowability; long words are certified by checking that their
own occurrence gaps, extended by routed sprinkles on both sides, never starve
a window. The certificate direction is sufficiency: a True answer is backed
by an explicit bi-infinite construction, a False answer by a violated
necessary condition, and the undecidable middle raises ResourceCapError
instead of guessing.
"""

import math

import numpy as np

from .automaton import (
    ShiftAutomaton,
    allowable_words,
    context_states,
    entropy,
    essentialize,
    fill_between,
    gap_constant,
    is_allowable,
)
from .errors import ContractError, InputError, ResourceCapError
from .words import Word, occurrences


class WindowRule:
    """One layer: every window of `window` symbols contains `word`."""

    def __init__(self, word: Word, window: int, L: int | None = None, K: int | None = None):
        if len(word) == 0:
            raise InputError("window rule needs a nonempty word")
        if window < len(word):
            raise InputError("window shorter than its required word")
        self.word = word
        self.window = int(window)
        self.L = L
        self.K = K

    @property
    def cap(self) -> int:
        # largest legal distance between consecutive occurrence ends
        return self.window - len(self.word) + 1

    def to_json_dict(self) -> dict:
        return {
            "word": self.word.names(),
            "window": self.window,
            "L": self.L,
            "K": self.K,
        }


class LayeredShift:
    """Stack of window rules over an explicit, mixing base automaton."""

    def __init__(
        self,
        base: ShiftAutomaton,
        rules: list[WindowRule],
        name: str | None = None,
        _constants: dict | None = None,
    ):
        base = essentialize(base)
        if base.n_states == 0:
            raise InputError("layered shift needs a nonempty base")
        if not rules:
            raise InputError("layered shift needs at least one window rule")
        for r in rules:
            if r.word.alphabet != base.alphabet:
                raise InputError("rule word uses a different alphabet")
            if not is_allowable(base, r.word):
                raise InputError(f"rule word {r.word.text()!r} is not base-allowable")
        self.base = base
        self.rules = list(rules)
        self.name = name
        self._cert = None
        self._anchors_cached = None
        self._junctions_cached = None
        if _constants is not None:
            # reloads and rule extensions carry the base constants forward,
            # so the gluing DP reruns only when a junction length is needed
            self._u = int(_constants["trivial_gap"])
            self._gamma = int(_constants["primitive_power"])
            cp = _constants.get("carrier_period")
            self._carrier_period_cached = None if cp is None else int(cp)
        else:
            cert = self._trivial_cert()
            self._u = cert.constant
            self._gamma = cert.primitive_power
            self._carrier_period_cached = None

    # --- certified constants --------------------------------------------

    def _trivial_cert(self):
        if self._cert is None:
            self._cert = gap_constant(self.base)
        return self._cert

    def trivial_certificate(self):
        """Gluing certificate of the base automaton (computed on demand)."""
        return self._trivial_cert()

    @property
    def _anchors(self) -> list[tuple[int, int]]:
        if self._anchors_cached is None:
            self._anchors_cached = [self._anchor(r.word) for r in self.rules]
        return self._anchors_cached

    @property
    def _junctions(self) -> list[int]:
        if self._junctions_cached is None:
            self._junctions_cached = self._junction_lengths()
        return self._junctions_cached

    @property
    def _carrier_period(self) -> int:
        if self._carrier_period_cached is None:
            self._carrier_period_cached = sum(len(r.word) for r in self.rules) + sum(
                self._junctions
            )
        return self._carrier_period_cached

    def _anchor(self, W: Word) -> tuple[int, int]:
        """(entry state, exit state) of the canonical base run through W."""
        _, readable = context_states(self.base, Word(self.base.alphabet, ()), W)
        s = int(readable[0])
        run = self.base.run_states(s, W)
        return s, run[-1]

    def _junction_lengths(self) -> list[int]:
        """Certified minimal fill length from each anchor exit to the next
        anchor entry, cyclically; these pin the carrier period."""
        cert = self._trivial_cert()
        out = []
        k = len(self.rules)
        for i in range(k):
            t = self._anchors[i][1]
            s = self._anchors[(i + 1) % k][0]
            out.append(cert.min_length([t], [s]))
        return out

    @property
    def alphabet(self):
        return self.base.alphabet

    @property
    def trivial_gap(self) -> int:
        return self._u

    @property
    def slack(self) -> int:
        """Longest word length for which base allowability decides layered
        allowability: the word plus routing on both sides still fits between
        two carrier sprinkles of every rule."""
        overhead = 2 * self._u + 2 * self._carrier_period + max(
            len(r.word) for r in self.rules
        )
        return min(r.cap for r in self.rules) - overhead

    def is_mixing(self) -> bool:
        """Certified by construction: the base is mixing (it carries an
        all-positive power) and every rule leaves positive slack, so carrier
        sprinkles glue any two certified contexts at every large length."""
        return self.slack > 0

    # --- word-level operations -------------------------------------------

    def allowable_words(self, n: int):
        if n > max(self.slack, 0):
            raise ResourceCapError(
                f"length {n} exceeds the delegation slack {self.slack}; "
                "the explicit product is past the state cap"
            )
        return allowable_words(self.base, n)

    def _gap_certified(self, w: Word, rule: WindowRule) -> bool:
        """Occurrence-end gaps of rule.word in w, with u-routed sprinkles
        assumed just outside both boundaries, never exceed the rule cap."""
        m = len(rule.word)
        ends = [o + m for o in occurrences(rule.word, w)]
        bounds = [-self._u] + ends + [len(w) + m + self._u]
        return all(b - a <= rule.cap for a, b in zip(bounds, bounds[1:]))

    def _windows_covered(self, w: Word, rule: WindowRule) -> bool:
        """Necessary condition: every full window inside w has the word."""
        n, M, m = len(w), rule.window, len(rule.word)
        if n < M:
            return True
        ends = np.asarray([o + m for o in occurrences(rule.word, w)])
        t = np.arange(n - M + 1)
        lo = np.searchsorted(ends, t + m - 1, side="right")
        hi = np.searchsorted(ends, t + M, side="right")
        return bool((hi > lo).all())

    def is_allowable(self, w: Word) -> bool:
        """Exact below the slack threshold; above it, True means certified
        embeddable and False means a necessary condition failed. The
        remaining sliver raises rather than guessing."""
        if w.alphabet != self.alphabet:
            raise InputError("word uses a different alphabet")
        if len(w) <= max(self.slack, 0):
            return is_allowable(self.base, w)
        if not is_allowable(self.base, w):
            return False
        if not all(self._windows_covered(w, r) for r in self.rules):
            return False
        if all(self._gap_certified(w, r) for r in self.rules):
            return True
        raise ResourceCapError(
            "word passes necessary window checks but its boundary gaps are "
            "not certificate-coverable; deciding needs the explicit product"
        )

    def certify_point(self, w: Word) -> None:
        """Assert the sufficiency certificate, with forensics on failure."""
        if not is_allowable(self.base, w):
            raise ContractError("point is not allowable in the base automaton")
        for idx, rule in enumerate(self.rules):
            if not self._gap_certified(w, rule):
                m = len(rule.word)
                ends = [o + m for o in occurrences(rule.word, w)]
                raise ContractError(
                    "occurrence gaps starve a window rule",
                    details={
                        "rule": idx,
                        "word": rule.word.text(),
                        "window": rule.window,
                        "occurrences": len(ends),
                        "worst_gap": max(
                            b - a
                            for a, b in zip(
                                [-self._u] + ends,
                                ends + [len(w) + m + self._u],
                            )
                        ),
                    },
                )

    # --- construction helpers ---------------------------------------------

    def sample_point(self, length: int, seed: int) -> Word:
        """Seeded carrier walk: rule words in rotation, junction fills drawn
        uniformly among legal paths of twice the primitive power (so every
        junction has at least one choice per base state)."""
        if length < 0:
            raise InputError("length must be nonnegative")
        rng = np.random.default_rng(seed)
        fill_len = 2 * self._gamma
        period = sum(len(r.word) for r in self.rules) + len(self.rules) * fill_len
        if period + max(len(r.word) for r in self.rules) > min(r.cap for r in self.rules):
            fill_len = None  # fall back to the minimal certified junctions
        codes: list[int] = []
        k = len(self.rules)
        i = 0
        while len(codes) < length:
            rule = self.rules[i % k]
            codes.extend(rule.word.data)
            t = self._anchors[i % k][1]
            s = self._anchors[(i + 1) % k][0]
            l = fill_len if fill_len is not None else self._junctions[i % k]
            codes.extend(self._random_path(t, s, l, rng))
            i += 1
        return Word(self.alphabet, tuple(codes[:length]))

    def _random_path(self, src: int, tgt: int, l: int, rng) -> list[int]:
        """Uniform-ish random label path src -> tgt of exact length l."""
        table = self.base.table
        S = self.base.n_states
        reach = np.zeros((l + 1, S), dtype=bool)
        reach[l, tgt] = True
        for t in range(l - 1, -1, -1):
            nxt = reach[t + 1]
            ok = np.zeros(S, dtype=bool)
            for a in range(len(self.alphabet)):
                col = table[:, a]
                ok |= (col >= 0) & nxt[np.clip(col, 0, S - 1)]
            reach[t] = ok
        if not reach[0, src]:
            raise ContractError(
                "junction not connectable at the requested length",
                details={"src": src, "tgt": tgt, "length": l},
            )
        out = []
        s = src
        for t in range(l):
            choices = [
                a
                for a in range(len(self.alphabet))
                if table[s, a] >= 0 and reach[t + 1, table[s, a]]
            ]
            a = int(choices[rng.integers(len(choices))])
            out.append(a)
            s = int(table[s, a])
        return out

    def gap_bound_through(self, W: Word) -> int:
        """Upper bound on the gluing gap through W, replacing the product DP
        when the product does not materialize.

        The schedule behind it: absorb the left context's pending window
        obligations most-urgent-first (each costs at most a routing plus one
        rule word; urgency order keeps every other window within budget),
        sprinkle a carrier period, show W, sprinkle again, then spend up to
        max gap-cap symbols rebuilding the right context's occurrence
        pattern, with a word-length pad for boundary occurrence alignment.
        Junction routings accept every length at least the trivial gap, so
        each length at or above the bound is met, not just one.

        The rebuild step assumes the right context's occurrence profile is
        one this package constructs (carrier-reachable); tests pin the bound
        above the exact DP value at every scale where the product fits.
        """
        if W.alphabet != self.alphabet:
            raise InputError("word uses a different alphabet")
        if not is_allowable(self.base, W):
            raise InputError(f"{W.text()!r} is not base-allowable, nothing can contain it")
        u, p_c = self._u, self._carrier_period
        k = len(self.rules)
        max_m = max(len(r.word) for r in self.rules)
        min_cap = min(r.cap for r in self.rules)
        absorb = k * (u + max_m) + u
        if absorb + u + p_c + max_m > min_cap or p_c + 2 * u + len(W) + max_m > min_cap:
            raise ResourceCapError(
                "gluing schedule does not fit under the window caps; the "
                "parameters are outside the certified regime"
            )
        rebuild = max(r.cap - 1 for r in self.rules) + 2 * max_m
        return absorb + 5 * u + 2 * p_c + len(W) + rebuild

    def entropy_bounds(self) -> tuple[float, float]:
        """(certified lower, upper) bounds on the entropy.

        Lower: carrier points whose junction fills have length twice the
        primitive power. The count matrix power gives the exact number of
        paths per junction, and distinct paths from a pinned state have
        distinct labels (the automaton is right-resolving), so the word
        count per carrier period is the product of the junction counts.
        Upper: dropping the rules only adds points, so base entropy wins.
        """
        k = len(self.rules)
        fill_len = 2 * self._gamma
        period = sum(len(r.word) for r in self.rules) + k * fill_len
        if period + max(len(r.word) for r in self.rules) > min(r.cap for r in self.rules):
            return 0.0, entropy(self.base)
        # exact integer counts in float64 until 2^53, then a close
        # approximation; only the log enters, so drift is harmless
        P = np.linalg.matrix_power(self.base.count_matrix(), fill_len)
        log_choices = 0.0
        for i in range(k):
            c = P[self._anchors[i][1], self._anchors[(i + 1) % k][0]]
            if not np.isfinite(c):
                c = np.finfo(np.float64).max
            if c < 1.0:
                raise ContractError(
                    "all-positive power lost a junction path",
                    details={"junction": i, "fill_length": fill_len},
                )
            log_choices += math.log(c)
        return log_choices / period, entropy(self.base)

    def with_rule(self, rule: WindowRule, name: str | None = None) -> "LayeredShift":
        out = LayeredShift(
            self.base,
            self.rules + [rule],
            name=name or self.name,
            _constants={"trivial_gap": self._u, "primitive_power": self._gamma},
        )
        out._cert = self._cert
        return out

    # --- gluing ------------------------------------------------------------

    def junction_fill(self, sources, targets, l: int, rng=None) -> Word:
        """Base fill between pinned base states, lex-least (or seeded)."""
        if rng is None:
            return fill_between(self.base, sources, targets, l)
        src = int(np.asarray(sources)[0])
        tgt = int(np.asarray(targets)[0])
        return Word(self.alphabet, tuple(self._random_path(src, tgt, l, rng)))

    # --- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "kind": "layered",
            "name": self.name,
            "base": self.base.to_json_dict(),
            "rules": [r.to_json_dict() for r in self.rules],
            "certificates": {
                "trivial_gap": self._u,
                "primitive_power": self._gamma,
                "carrier_period": self._carrier_period,
            },
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LayeredShift":
        if doc.get("kind") != "layered":
            raise InputError("not a layered-shift document")
        base = ShiftAutomaton.from_json_dict(doc["base"])
        rules = []
        for r in doc["rules"]:
            rules.append(
                WindowRule(
                    Word.from_names(base.alphabet, r["word"]),
                    r["window"],
                    L=r.get("L"),
                    K=r.get("K"),
                )
            )
        return cls(
            base,
            rules,
            name=doc.get("name"),
            _constants=doc["certificates"],
        )
