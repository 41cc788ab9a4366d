"""Coded-point correlation: pair search, plan invariants, unique parsing,
assembly, and the exact block-mass identity. Search outputs are always
re-verified with the word operations; nothing is trusted from the sampler.
"""

import csv
from fractions import Fraction

import numpy as np
import pytest

from subshift_forge.automaton import (
    allowable_words,
    from_forbidden_words,
    full_shift,
    gap_constant,
    is_allowable,
)
from subshift_forge.correlator import (
    CodedPoint,
    CorrelatorPlan,
    build_coded_point,
    evaluate_correlation,
    find_low_overlap_pair,
    make_plan,
    unique_parse,
    write_correlation_csv,
)
from subshift_forge.errors import (
    AmbiguousParseError,
    InputError,
    NotInCodedSystemError,
)
from subshift_forge.witness import SignalSeries
from subshift_forge.words import BINARY, PM_ONE, Word, occurrences, overlap, self_overlap

pm = lambda text: Word.from_text(PM_ONE, text)
b = lambda text: Word.from_text(BINARY, text)

FULL2 = full_shift(PM_ONE)
GOLDEN = from_forbidden_words(BINARY, [b("11")])


@pytest.fixture(scope="module")
def golden_plan():
    return make_plan(GOLDEN, 12, seed=0)


def low_overlap(a: Word, bw: Word, l: int, r=Fraction(1, 3)) -> bool:
    return (
        Fraction(overlap(a, bw), l) < r
        and Fraction(self_overlap(a), l) < r
        and Fraction(self_overlap(bw), l) < r
    )


class TestPairSearch:
    def test_full_shift_l9_against_exhaustive_oracle(self):
        # the sampler's answer must satisfy bounds that exhaustive search
        # proves satisfiable at this length
        words = allowable_words(FULL2, 9)
        assert len(words) == 512
        small_self = [w for w in words if Fraction(self_overlap(w), 9) < Fraction(1, 3)]
        exists = any(
            low_overlap(a, c, 9)
            for i, a in enumerate(small_self)
            for c in small_self[i + 1 :]
        )
        assert exists
        pair = find_low_overlap_pair(FULL2, 9)
        assert pair is not None
        a, c = pair
        assert a != c and len(a) == len(c) == 9
        assert low_overlap(a, c, 9)
        assert is_allowable(FULL2, a) and is_allowable(FULL2, c)

    def test_golden_mean_l12_verified_post_hoc(self):
        pair = find_low_overlap_pair(GOLDEN, 12, seed=3)
        assert pair is not None
        a, c = pair
        assert low_overlap(a, c, 12)
        assert is_allowable(GOLDEN, a) and is_allowable(GOLDEN, c)

    def test_none_at_impossible_length(self):
        # l=2 at r=1/3 demands overlap 0 everywhere; on two symbols the only
        # borderless words are the two alternating ones, which overlap
        assert find_low_overlap_pair(FULL2, 2, attempts=64) is None

    def test_deterministic_under_seed(self):
        assert find_low_overlap_pair(FULL2, 9, seed=5) == find_low_overlap_pair(
            FULL2, 9, seed=5
        )

    def test_input_validation(self):
        with pytest.raises(InputError):
            find_low_overlap_pair(FULL2, 0)
        with pytest.raises(InputError, match="between 0 and 1"):
            find_low_overlap_pair(FULL2, 9, r=1.0)
        zero_entropy = from_forbidden_words(BINARY, [b("11"), b("00")])
        with pytest.raises(InputError, match="entropy"):
            find_low_overlap_pair(zero_entropy, 9)


class TestPlanInvariants:
    def test_golden_plan_shape(self, golden_plan):
        p = golden_plan
        assert p.l == 12 and p.u == gap_constant(GOLDEN).constant == 2
        assert p.period == 14
        assert 0 <= p.t < 14
        assert low_overlap(p.alpha, p.beta, 12)

    def test_overlap_report_is_recomputed(self, golden_plan):
        p = golden_plan
        assert p.overlap_report == {
            "overlap": overlap(p.alpha, p.beta),
            "self_alpha": self_overlap(p.alpha),
            "self_beta": self_overlap(p.beta),
        }

    def test_rejects_short_words_for_gap(self):
        # the defining inequality l >= 3u, cited in the error
        with pytest.raises(InputError, match="l >= 3u"):
            CorrelatorPlan(GOLDEN, b("10010"), b("01000"), u=2)

    def test_rejects_equal_or_mismatched_words(self):
        a = pm("-1 -1 1 -1 1 1 -1 1 -1")
        with pytest.raises(InputError, match="differ"):
            CorrelatorPlan(FULL2, a, a, u=0)
        with pytest.raises(InputError, match="length"):
            CorrelatorPlan(FULL2, a, a[:5], u=0)

    def test_rejects_big_overlaps(self):
        with pytest.raises(InputError, match="self_alpha"):
            CorrelatorPlan(FULL2, pm("1 1 1 1"), pm("-1 1 -1 -1"), u=0)

    def test_rejects_disallowed_words(self):
        with pytest.raises(InputError, match="allowable"):
            CorrelatorPlan(GOLDEN, b("110100010000"), b("001000100001"), u=2)

    def test_rejects_bad_phase_and_gap(self):
        a, c = pm("-1 -1 1 -1 1 1 -1 1 -1"), pm("1 1 1 1 1 -1 -1 1 1")
        with pytest.raises(InputError, match="phase"):
            CorrelatorPlan(FULL2, a, c, u=0, t=9)
        with pytest.raises(InputError, match="nonnegative"):
            CorrelatorPlan(FULL2, a, c, u=-1)

    def test_json_shape(self, golden_plan):
        d = golden_plan.to_json_dict()
        assert d["kind"] == "correlator-plan"
        assert d["l"] == 12 and d["u"] == 2
        assert set(d["overlap_report"]) == {"overlap", "self_alpha", "self_beta"}


class TestUniqueParse:
    def test_two_block_construction(self, golden_plan):
        p = golden_plan
        w = p.alpha + b("0 0") + p.beta
        assert unique_parse(p, w) == [(0, 0), (14, 1)]

    def test_round_trips_with_random_fills(self, golden_plan):
        p = golden_plan
        words = {0: p.alpha, 1: p.beta}
        # all length-2 gap words legal between each ordered block pair
        gaps = {}
        for s1 in (0, 1):
            for s2 in (0, 1):
                gaps[s1, s2] = [
                    g
                    for g in allowable_words(GOLDEN, 2)
                    if is_allowable(GOLDEN, words[s1] + g + words[s2])
                ]
                assert gaps[s1, s2]
        rng = np.random.default_rng(12)
        for _ in range(1000):
            syms = rng.integers(0, 2, size=20).tolist()
            parts = [words[syms[0]]]
            for prev, cur in zip(syms, syms[1:]):
                opts = gaps[prev, cur]
                parts.append(opts[int(rng.integers(len(opts)))])
                parts.append(words[cur])
            w = parts[0]
            for part in parts[1:]:
                w = w + part
            parsed = unique_parse(p, w)
            assert [s for _, s in parsed] == syms
            assert [q for q, _ in parsed] == [14 * m for m in range(20)]

    def test_neither_word_present(self, golden_plan):
        with pytest.raises(NotInCodedSystemError, match="neither"):
            unique_parse(golden_plan, b("0" * 30))

    def test_missing_slot_rejected(self, golden_plan):
        p = golden_plan
        w = p.alpha + b("0 0") + b("0" * 12) + b("0 0") + p.beta
        with pytest.raises(NotInCodedSystemError, match="schedule"):
            unique_parse(p, w)

    def test_back_to_back_blocks_are_ambiguous(self, golden_plan):
        # with no gap in between, each occurrence tiles its own one-slot
        # schedule; the parser refuses to pick
        p = golden_plan
        with pytest.raises(AmbiguousParseError):
            unique_parse(p, p.alpha + p.alpha)

    def test_off_grid_occurrence_rejected(self, golden_plan):
        # beta's border lets a stray copy start 9 past the last block; the
        # grid is complete, so the stray itself is what the parser reports
        p = golden_plan
        assert self_overlap(p.beta) == 3
        g = b("0 0")
        w = p.alpha + g + p.beta + g + p.beta + p.beta[3:]
        assert sorted(occurrences(p.beta, w)) == [14, 28, 37]
        with pytest.raises(NotInCodedSystemError, match="off the block grid"):
            unique_parse(p, w)

    def test_partial_end_blocks_tolerated(self, golden_plan):
        p = golden_plan
        w = p.alpha[6:] + b("0 0") + p.alpha + b("0 0") + p.beta
        assert unique_parse(p, w) == [(8, 0), (22, 1)]


class TestBuildCodedPoint:
    def test_constant_positive_signal_is_all_beta(self, golden_plan):
        sig = SignalSeries(np.ones(200))
        coded = build_coded_point(golden_plan, sig, 200)
        assert coded.t == 0
        assert set(coded.block_symbols) == {1}
        assert len(coded.point) == 200

    def test_alternating_blocks(self, golden_plan):
        P = golden_plan.period
        n = np.arange(20 * P)
        sig = SignalSeries(np.where((n // P) % 2 == 0, 1.0, -1.0))
        coded = build_coded_point(golden_plan, sig, 20 * P)
        assert coded.t == 0
        assert list(coded.block_symbols) == [1, 0] * 10

    def test_blocks_sit_at_their_starts(self, golden_plan):
        p = golden_plan
        rng = np.random.default_rng(4)
        sig = SignalSeries(rng.normal(size=611))
        coded = build_coded_point(p, sig, 611)
        assert is_allowable(GOLDEN, coded.point)
        words = {0: p.alpha, 1: p.beta}
        for q, sym in zip(coded.block_starts.tolist(), coded.block_symbols):
            assert coded.point[q : q + p.l] == words[sym]
            assert (sig.samples[q] >= 0) == bool(sym)

    def test_phase_maximizes_start_mass(self, golden_plan):
        P = golden_plan.period
        N = 70 * P
        rng = np.random.default_rng(9)
        a = rng.normal(size=N)
        coded = build_coded_point(golden_plan, SignalSeries(a), N)
        scores = [np.abs(a[t:N:P]).mean() for t in range(P)]
        assert scores[coded.t] == max(scores)
        # pigeonhole floor: the best phase carries at least the mean share
        assert max(scores) >= np.abs(a).mean() / P

    def test_round_trip_through_parser(self, golden_plan):
        rng = np.random.default_rng(2)
        sig = SignalSeries(rng.choice([-1.0, 1.0], size=1500))
        coded = build_coded_point(golden_plan, sig, 1400)
        parsed = unique_parse(golden_plan, coded.point)
        assert tuple(s for _, s in parsed) == coded.block_symbols
        assert [q for q, _ in parsed] == coded.block_starts.tolist()

    def test_full_shift_plan_has_no_gaps(self):
        plan = make_plan(FULL2, 9, seed=1)
        assert plan.u == 0
        sig = SignalSeries(np.ones(100))
        coded = build_coded_point(plan, sig, 100)
        assert coded.fills == ()
        assert len(coded.point) == 100

    def test_horizon_validation(self, golden_plan):
        sig = SignalSeries(np.ones(50))
        with pytest.raises(InputError, match="shorter than one block"):
            build_coded_point(golden_plan, sig, 10)
        with pytest.raises(InputError, match="passes the end"):
            build_coded_point(golden_plan, sig, 60)


class TestEvaluateCorrelation:
    def test_exactness_identity(self, golden_plan):
        p = golden_plan
        rng = np.random.default_rng(7)
        N = 30 * 14
        sig = SignalSeries(rng.normal(size=N))
        coded = build_coded_point(p, sig, N)
        rows = evaluate_correlation(p, coded, sig, [50, 200, N])
        starts = np.arange(coded.t, N, p.period)
        for (n_, corr, abs_avg, _) in rows:
            mass = float(np.sum(np.abs(sig.samples[starts[starts < n_]])))
            assert corr * n_ == pytest.approx(mass, abs=1e-12 * max(1.0, mass))
            assert abs_avg == pytest.approx(np.abs(sig.samples[:n_]).mean())

    def test_zero_signal_zero_rows(self, golden_plan):
        sig = SignalSeries(np.zeros(140))
        coded = build_coded_point(golden_plan, sig, 140)
        rows = evaluate_correlation(golden_plan, coded, sig, [70, 140])
        assert all(r[1] == 0.0 and r[3] == 0.0 for r in rows)

    def test_pm_one_signal_beats_bound(self, golden_plan):
        rng = np.random.default_rng(21)
        N = 20000
        sig = SignalSeries(rng.choice([-1.0, 1.0], size=N))
        coded = build_coded_point(golden_plan, sig, N)
        cps = [1000 * 2**k for k in range(5)] + [N]
        rows = evaluate_correlation(golden_plan, coded, sig, cps)
        for (_, corr, abs_avg, bound) in rows:
            assert bound == pytest.approx(0.9 / 14 * abs_avg)
            assert corr > bound > 0.0

    def test_observable_is_local(self, golden_plan):
        # f at n is recoverable from the window of radius l+u around n
        p = golden_plan
        rng = np.random.default_rng(3)
        N, P = 1400, p.period
        sig = SignalSeries(rng.choice([-1.0, 1.0], size=N))
        coded = build_coded_point(p, sig, N)
        n_pt = len(coded.point)
        f = np.zeros(n_pt)
        starts = coded.block_starts
        f[starts] = np.where(sig.samples[starts] >= 0, 1.0, -1.0)
        for n in range(P + p.l, n_pt - 2 * (p.l + p.u), 17):
            lo = n - (p.l + p.u)
            window = coded.point[lo : n + p.l + p.u]
            try:
                local = dict(unique_parse(p, window))
            except NotInCodedSystemError:
                local = {}
            sym = local.get(n - lo)
            expect = 0.0 if sym is None else (1.0 if sym else -1.0)
            assert f[n] == expect

    def test_prefix_validation(self, golden_plan):
        sig = SignalSeries(np.ones(140))
        coded = build_coded_point(golden_plan, sig, 140)
        with pytest.raises(InputError):
            evaluate_correlation(golden_plan, coded, sig, [0])
        with pytest.raises(InputError):
            evaluate_correlation(golden_plan, coded, sig, [141])

    def test_csv_round_trip(self, golden_plan, tmp_path):
        sig = SignalSeries(np.ones(140))
        coded = build_coded_point(golden_plan, sig, 140)
        rows = evaluate_correlation(golden_plan, coded, sig, [70, 140])
        path = tmp_path / "corr.csv"
        write_correlation_csv(rows, path)
        with open(path, newline="", encoding="utf-8") as fh:
            got = list(csv.reader(fh))
        assert got[0] == ["N", "corr", "abs_avg", "bound"]
        assert [int(r[0]) for r in got[1:]] == [70, 140]
        assert [float(r[1]) for r in got[1:]] == [r[1] for r in rows]
