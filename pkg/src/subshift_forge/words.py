"""Finite words over small named alphabets.

Symbols are named strings ("0", "1", "-1", "a", ...); a Word stores integer
codes into its Alphabet. The operations here are the combinatorial workhorses
for everything else: suffix/prefix overlaps (block-coding bounds), first
recurrence times, and overlapping pattern occurrences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import AlphabetMismatchError, InputError


@dataclass(frozen=True)
class Alphabet:
    """Ordered collection of at least two distinct symbol names."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(self.symbols) < 2:
            raise InputError("alphabet needs at least 2 symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise InputError("alphabet symbols must be distinct")

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, name: str) -> int:
        try:
            return self.symbols.index(name)
        except ValueError:
            raise InputError(f"symbol {name!r} not in alphabet {self.symbols}") from None

    def to_json(self) -> str:
        return json.dumps(list(self.symbols))

    @classmethod
    def from_json(cls, text: str) -> "Alphabet":
        names = json.loads(text)
        if not isinstance(names, list) or not all(isinstance(s, str) for s in names):
            raise InputError("alphabet JSON must be an array of symbol names")
        return cls(tuple(names))


BINARY = Alphabet(("0", "1"))
PM_ONE = Alphabet(("-1", "1"))


@dataclass(frozen=True)
class Word:
    """Immutable word: an alphabet plus a tuple of symbol codes."""

    alphabet: Alphabet
    data: tuple[int, ...]

    def __post_init__(self):
        n = len(self.alphabet)
        if any(not (0 <= c < n) for c in self.data):
            raise InputError("word contains codes outside its alphabet")

    @classmethod
    def from_names(cls, alphabet: Alphabet, names) -> "Word":
        return cls(alphabet, tuple(alphabet.index(s) for s in names))

    @classmethod
    def from_text(cls, alphabet: Alphabet, text: str) -> "Word":
        """Parse either whitespace-separated names or, if every symbol name is a
        single character, a bare string like "0110"."""
        text = text.strip()
        if text == "":
            return cls(alphabet, ())
        if any(ch.isspace() for ch in text):
            return cls.from_names(alphabet, text.split())
        if all(len(s) == 1 for s in alphabet.symbols):
            return cls.from_names(alphabet, list(text))
        return cls.from_names(alphabet, [text])

    def names(self) -> list[str]:
        return [self.alphabet.symbols[c] for c in self.data]

    def text(self) -> str:
        return " ".join(self.names())

    def __len__(self) -> int:
        return len(self.data)

    def __getitem__(self, item) -> "Word":
        if isinstance(item, slice):
            return Word(self.alphabet, self.data[item])
        return Word(self.alphabet, (self.data[item],))

    def __add__(self, other: "Word") -> "Word":
        _require_same_alphabet(self, other)
        return Word(self.alphabet, self.data + other.data)

    def to_json(self) -> str:
        return json.dumps(self.names())

    @classmethod
    def from_json(cls, alphabet: Alphabet, text: str) -> "Word":
        names = json.loads(text)
        if not isinstance(names, list):
            raise InputError("word JSON must be an array of symbol names")
        return cls.from_names(alphabet, names)


def _require_same_alphabet(a: Word, b: Word) -> None:
    if a.alphabet != b.alphabet:
        raise AlphabetMismatchError("words use different alphabets")


def overlap(a: Word, b: Word) -> int:
    """Largest k such that a suffix of one word of length k equals a prefix of
    the other, in either direction; 0 if none.

    Requires a != b (use self_overlap for a word against itself).
    """
    _require_same_alphabet(a, b)
    if a.data == b.data:
        raise InputError("overlap of a word with itself: use self_overlap")
    if len(a) == 0 or len(b) == 0:
        raise InputError("overlap needs nonempty words")
    for k in range(min(len(a), len(b)), 0, -1):
        if a.data[len(a) - k:] == b.data[:k] or b.data[len(b) - k:] == a.data[:k]:
            return k
    return 0


def self_overlap(a: Word) -> int:
    """Largest k < len(a) with suffix_k(a) == prefix_k(a); 0 if none."""
    if len(a) == 0:
        raise InputError("self_overlap of the empty word")
    for k in range(len(a) - 1, 0, -1):
        if a.data[len(a) - k:] == a.data[:k]:
            return k
    return 0


def _failure_table(pattern: tuple[int, ...]) -> list[int]:
    # fail[i] = length of the longest proper border of pattern[:i]
    fail = [0] * (len(pattern) + 1)
    k = 0
    for i in range(1, len(pattern)):
        while k and pattern[i] != pattern[k]:
            k = fail[k]
        if pattern[i] == pattern[k]:
            k += 1
        fail[i + 1] = k
    return fail


def occurrences(pattern: Word, text: Word) -> list[int]:
    """All start indices (ascending, overlapping included) of pattern in text."""
    _require_same_alphabet(pattern, text)
    if len(pattern) == 0:
        raise InputError("occurrences of the empty pattern")
    pat = pattern.data
    fail = _failure_table(pat)
    out: list[int] = []
    k = 0
    for i, c in enumerate(text.data):
        while k and c != pat[k]:
            k = fail[k]
        if c == pat[k]:
            k += 1
        if k == len(pat):
            out.append(i - len(pat) + 1)
            k = fail[k]
    return out


def recurrence_time(x: Word, n: int, *, skip_initial: bool = False) -> int | None:
    """First k > 0 with x[k:k+n] == x[:n], scanning within x; None if no
    recurrence completes inside x.

    With skip_initial=True only k > n-1 counts (the variant that ignores
    returns overlapping the initial window).
    """
    if not 1 <= n <= len(x):
        raise InputError(f"window length n={n} out of range for |x|={len(x)}")
    lo = n if skip_initial else 1
    for k in occurrences(x[:n], x):
        if k >= lo:
            return k
    return None
