"""Witness construction: the sign start, per-level block surgery, and the
checkpoint audit. Correlation sums asserted here are recomputed from scratch
out of the returned point, never read back from the builder's own arithmetic.
"""

import csv

import numpy as np
import pytest

from subshift_forge.automaton import full_shift, is_allowable
from subshift_forge.errors import ContractError, InputError, ResourceCapError
from subshift_forge.layered import LayeredShift, WindowRule
from subshift_forge.tower import TowerLevel, build_tower
from subshift_forge.witness import (
    SignalSeries,
    build_witness,
    default_checkpoints,
    initial_point,
    refine_level,
    write_checkpoint_csv,
)
from subshift_forge.words import PM_ONE, Word, occurrences

pm = lambda text: Word.from_text(PM_ONE, text)

FULL2 = full_shift(PM_ONE)
W0 = pm("-1 1")


@pytest.fixture(scope="module")
def tower1():
    return build_tower(1)


@pytest.fixture(scope="module")
def tower2():
    return build_tower(2)


def pm1_signal(seed: int, N: int, cps=None) -> SignalSeries:
    rng = np.random.default_rng(seed)
    return SignalSeries(rng.choice([-1.0, 1.0], size=N), checkpoints=cps)


def signs(w: Word) -> np.ndarray:
    return 2.0 * np.asarray(w.data, dtype=np.float64) - 1.0


def dot_from_scratch(a: np.ndarray, w: Word, upto: int) -> float:
    # independent of the builder's cumsum: explicit slice and np.sum
    return float(np.sum(a[:upto] * signs(w)[:upto]))


def windows_all_contain(w: Word, marker: Word, M: int, N: int) -> bool:
    """Every window [s, s+M) with s + M <= N holds an occurrence of marker."""
    occ = np.asarray(occurrences(marker, w), dtype=np.int64)
    starts = np.arange(N - M + 1, dtype=np.int64)
    if occ.size == 0:
        return starts.size == 0
    idx = np.searchsorted(occ, starts)
    ok = idx < occ.size
    ok[ok] = occ[idx[ok]] <= starts[ok] + M - len(marker)
    return bool(ok.all())


class TestDefaultCheckpoints:
    def test_doubles_from_three(self):
        assert default_checkpoints(100) == (3, 6, 12, 24, 48, 96)
        assert default_checkpoints(3) == (3,)

    def test_empty_below_three(self):
        assert default_checkpoints(2) == ()


class TestSignalSeries:
    def test_defaults(self):
        sig = SignalSeries([1.0, -2.5, 0.5])
        assert sig.bound == 2.5
        assert sig.checkpoints == (3,)
        assert len(sig) == 3
        assert sig.samples.dtype == np.float64

    def test_samples_are_frozen(self):
        sig = SignalSeries([1.0, -1.0])
        with pytest.raises(ValueError):
            sig.samples[0] = 7.0

    def test_rejects_empty_and_2d(self):
        with pytest.raises(InputError):
            SignalSeries([])
        with pytest.raises(InputError):
            SignalSeries([[1.0, 2.0], [3.0, 4.0]])

    def test_rejects_non_finite(self):
        with pytest.raises(InputError, match="non-finite"):
            SignalSeries([1.0, np.nan])
        with pytest.raises(InputError, match="non-finite"):
            SignalSeries([np.inf, 0.0])

    def test_bound_validation(self):
        with pytest.raises(InputError, match="exceeds"):
            SignalSeries([3.0, -1.0], bound=2.0)
        with pytest.raises(InputError):
            SignalSeries([1.0], bound=-1.0)
        with pytest.raises(InputError):
            SignalSeries([1.0], bound=float("nan"))
        assert SignalSeries([3.0, -1.0], bound=5.0).bound == 5.0

    def test_checkpoint_validation(self):
        a = np.ones(64)
        with pytest.raises(InputError, match="integers"):
            SignalSeries(a, checkpoints=(2.5,))
        with pytest.raises(InputError, match="start at 1"):
            SignalSeries(a, checkpoints=(0, 10))
        with pytest.raises(InputError, match="double"):
            SignalSeries(a, checkpoints=(3, 5))
        with pytest.raises(InputError, match="horizon"):
            SignalSeries(a, checkpoints=(40, 80))
        # exact doubling is allowed; the acceptance schedule 3*2^k needs it
        sig = SignalSeries(a, checkpoints=(3, 6, 12))
        assert sig.checkpoints == (3, 6, 12)

    def test_numpy_integer_checkpoints_pass(self):
        sig = SignalSeries(np.ones(64), checkpoints=np.array([3, 6, 12]))
        assert sig.checkpoints == (3, 6, 12)


class TestInitialPoint:
    def test_sign_map_example(self):
        sig = SignalSeries([1.0, -2.0, 0.0, 3.0])
        assert initial_point(sig) == pm("1 -1 1 1")

    def test_all_positives_give_all_ones(self):
        rng = np.random.default_rng(5)
        sig = SignalSeries(rng.uniform(0.1, 4.0, size=64))
        assert set(initial_point(sig).data) == {1}

    def test_zero_maps_to_plus_one(self):
        assert initial_point(SignalSeries([0.0, -0.0])) == pm("1 1")

    def test_perfect_correlation_is_bitwise(self):
        # a_n * sign(a_n) equals |a_n| exactly in IEEE arithmetic, so the
        # partial sums agree bit for bit, not just within tolerance
        rng = np.random.default_rng(11)
        a = rng.normal(size=4097)
        x0 = initial_point(SignalSeries(a))
        assert np.array_equal(np.cumsum(a * signs(x0)), np.cumsum(np.abs(a)))


class TestCandidateSelection:
    """Block/checkpoint case analysis, read off the modification logs.

    Level 1 has K=2, L=64, so blocks are 64 long and V_j covers indices
    [2(j-1), 2j) within its block.
    """

    def run_level1(self, tower1, sig):
        x0 = initial_point(sig)
        _, log, _ = refine_level(x0, sig, tower1.levels[1], tower1.levels[0].automaton)
        return log

    def test_no_checkpoint_block_allows_lowest(self, tower1):
        # checkpoints sitting exactly on block boundaries belong to no block
        sig = SignalSeries(np.ones(128), checkpoints=(64,))
        log = self.run_level1(tower1, sig)
        assert [e["v_index"] for e in log] == [1, 1]

    def test_unique_checkpoint_lower_half_picks_upper(self, tower1):
        sig = SignalSeries(np.ones(256), checkpoints=(130,))
        entry = self.run_level1(tower1, sig)[2]
        assert 17 <= entry["v_index"] <= 32

    def test_unique_checkpoint_upper_half_picks_lower(self, tower1):
        sig = SignalSeries(np.ones(256), checkpoints=(190,))
        entry = self.run_level1(tower1, sig)[2]
        assert 1 <= entry["v_index"] <= 16

    def test_block_zero_early_checkpoint_upper_half(self, tower1):
        sig = SignalSeries(np.ones(64), checkpoints=(3,))
        assert 17 <= self.run_level1(tower1, sig)[0]["v_index"] <= 32

    def test_block_zero_late_checkpoint_third_quarter(self, tower1):
        sig = SignalSeries(np.ones(64), checkpoints=(33,))
        assert 25 <= self.run_level1(tower1, sig)[0]["v_index"] <= 32

    def test_block_zero_late_checkpoint_last_quarter(self, tower1):
        sig = SignalSeries(np.ones(64), checkpoints=(50,))
        assert 17 <= self.run_level1(tower1, sig)[0]["v_index"] <= 24

    def test_minimal_mass_wins_and_ties_break_low(self, tower1):
        a = np.ones(64)
        a[8:10] = 0.0  # V_5
        a[40:42] = 0.0  # V_21
        sig = SignalSeries(a, checkpoints=(64,))
        assert self.run_level1(tower1, sig)[0]["v_index"] == 5

    def test_untouched_prefix(self, tower1):
        # with any checkpoint present in block 0, candidates start at K*L/4
        sig = pm1_signal(3, 1 << 10)
        log = self.run_level1(tower1, sig)
        first = min(64 * e["block"] + 2 * (e["v_index"] - 1) for e in log)
        assert first >= 32

    def test_two_checkpoints_one_block_rejected(self, tower1):
        sig = SignalSeries(np.ones(256), checkpoints=(65, 130))
        sig.checkpoints = (65, 100)  # plant what the validator forbids
        with pytest.raises(InputError, match="share one block"):
            self.run_level1(tower1, sig)

    def test_two_late_checkpoints_block_zero_rejected(self, tower1):
        sig = SignalSeries(np.ones(64), checkpoints=(33,))
        sig.checkpoints = (33, 50)
        with pytest.raises(InputError, match="upper half"):
            self.run_level1(tower1, sig)


class TestRefineLevel:
    def test_rejects_level_zero(self, tower1):
        sig = SignalSeries(np.ones(16))
        with pytest.raises(InputError, match="level 1"):
            refine_level(initial_point(sig), sig, tower1.levels[0], FULL2)

    def test_rejects_layered_ambient(self, tower1):
        lay = LayeredShift(FULL2, [WindowRule(W0, 24)])
        lvl = TowerLevel(index=2, automaton=lay, L=8, K=2, W_prev=W0, W=W0)
        sig = SignalSeries(np.ones(16))
        with pytest.raises(ResourceCapError, match="explicit"):
            refine_level(initial_point(sig), sig, lvl, lay)

    def test_rejects_oversized_block(self, tower1):
        lvl = TowerLevel(
            index=1, automaton=tower1.levels[1].automaton,
            L=8, K=1 << 22, W_prev=W0, W=W0,
        )
        sig = SignalSeries(np.ones(16))
        with pytest.raises(InputError, match="pad cap"):
            refine_level(initial_point(sig), sig, lvl, FULL2)

    def test_rejects_disallowed_previous_point(self, tower2):
        # a constant word shows no marker, so it sits outside level 1
        sig = SignalSeries(np.zeros(300))
        x_prev = Word(PM_ONE, (1,) * 300)
        with pytest.raises(InputError, match="not allowable"):
            refine_level(
                x_prev, sig, tower2.levels[2], tower2.levels[1].automaton
            )

    def test_window_property_level1(self, tower1):
        sig = pm1_signal(17, 1 << 12)
        padded, _, _ = refine_level(
            initial_point(sig), sig, tower1.levels[1], tower1.levels[0].automaton
        )
        assert windows_all_contain(padded, W0, 128, len(sig))

    def test_pad_to_whole_blocks(self, tower1):
        sig = pm1_signal(8, 100)
        padded, _, pad = refine_level(
            initial_point(sig), sig, tower1.levels[1], tower1.levels[0].automaton
        )
        assert len(padded) == 128
        assert pad["level"] == 1 and pad["seed"] == 1
        assert pad["length"] == 28
        assert isinstance(pad["start_state"], str)

    def test_one_rewrite_per_block(self, tower1):
        sig = pm1_signal(9, 1 << 10)
        _, log, _ = refine_level(
            initial_point(sig), sig, tower1.levels[1], tower1.levels[0].automaton
        )
        assert [e["block"] for e in log] == list(range(16))
        assert all(len(e["fill"]) == 2 for e in log)


class TestBuildWitness:
    def test_depth1_bound_from_scratch(self, tower1):
        # random signs, default checkpoints: every checkpoint must clear
        # 1 - 16/64 = 0.75, recomputed directly from the returned point
        sig = pm1_signal(7, 1 << 12)
        rep = build_witness(sig, tower1)
        a = sig.samples
        for (_, k, nk, dot, ab, bound) in rep.level_rows(1):
            fresh = dot_from_scratch(a, rep.point, nk)
            assert fresh > 0.75 * float(np.sum(np.abs(a[:nk])))
            assert fresh == pytest.approx(dot, abs=1e-9)
            assert bound == pytest.approx(0.75 * ab)

    def test_level0_rows_are_exact(self):
        rng = np.random.default_rng(23)
        sig = SignalSeries(rng.normal(size=2048))
        rep = build_witness(sig, build_tower(0))
        assert rep.depth == 0
        for (_, _, _, dot, ab, bound) in rep.level_rows(0):
            assert dot == ab == bound  # factor 1, bitwise equality

    def test_per_level_damage_budget(self, tower2):
        # each level may spend at most 16/L_i of the mass at any checkpoint
        sig = pm1_signal(13, 1 << 14)
        rep = build_witness(sig, tower2)
        rows = {(r[0], r[1]): r for r in rep.rows}
        for k in range(1, len(sig.checkpoints) + 1):
            ab = rows[(0, k)][4]
            assert rows[(1, k)][3] - rows[(0, k)][3] >= -(16 / 64) * ab - 1e-9
            assert rows[(2, k)][3] - rows[(1, k)][3] >= -(16 / 128) * ab - 1e-9

    def test_depth2_realistic_run(self, tower2):
        sig = pm1_signal(1, 1 << 15, cps=[3 * 2**k for k in range(14)])
        rep = build_witness(sig, tower2)
        assert len(rep.point) == 1 << 15
        a = sig.samples
        for (_, _, nk, _, _, _) in rep.level_rows(2):
            fresh = dot_from_scratch(a, rep.point, nk)
            assert fresh > 0.625 * float(np.sum(np.abs(a[:nk])))
        # every full window inside the horizon shows the required markers
        lv2 = tower2.levels[2]
        assert windows_all_contain(
            rep.point, tower2.levels[1].W, lv2.window, len(rep.point)
        )
        assert windows_all_contain(rep.point, W0, 128, len(rep.point))

    def test_window_properties_inside_horizon(self, tower2):
        # refine levels by hand to inspect the intermediate points
        sig = pm1_signal(29, 1 << 15)
        x0 = initial_point(sig)
        p1, _, _ = refine_level(x0, sig, tower2.levels[1], tower2.levels[0].automaton)
        assert windows_all_contain(p1, W0, 128, len(sig))
        p2, _, _ = refine_level(
            p1[: len(sig)], sig, tower2.levels[2], tower2.levels[1].automaton
        )
        W1 = tower2.levels[1].W
        assert windows_all_contain(p2, W1, tower2.levels[2].window, len(sig))
        # level-2 fills were computed against level 1, so membership there
        # survives in full
        assert is_allowable(tower2.levels[1].automaton, p2)

    def test_zero_cost_rewrites_leave_sums_alone(self, tower1):
        # mass on one V per block, checkpoints on boundaries: the chosen V
        # is always free and the correlation stays exactly perfect
        a = np.zeros(512)
        a[16::64] = 3.0
        sig = SignalSeries(a, checkpoints=(512,))
        rep = build_witness(sig, tower1)
        (_, _, _, dot, ab, _) = rep.level_rows(1)[0]
        assert dot == ab == 24.0

    def test_zero_signal_degenerates_to_equality(self, tower1):
        sig = SignalSeries(np.zeros(256), checkpoints=(256,))
        rep = build_witness(sig, tower1)
        assert all(r[3] == r[4] == 0.0 for r in rep.rows)
        assert is_allowable(tower1.levels[1].automaton, rep.point)

    def test_nonnegative_signal_keeps_half(self, tower2):
        rng = np.random.default_rng(31)
        sig = SignalSeries(rng.uniform(0.0, 1.0, size=1 << 13))
        rep = build_witness(sig, tower2)
        for (_, _, nk, dot, ab, _) in rep.level_rows(2):
            assert dot >= 0.5 * ab
            assert dot > 0.625 * ab

    def test_cosine_signal_stays_positive(self, tower2):
        theta = (np.sqrt(5.0) - 1.0) / 2.0
        n = np.arange(1 << 13)
        sig = SignalSeries(
            np.cos(2.0 * np.pi * theta * n),
            checkpoints=[c for c in default_checkpoints(1 << 13)],
        )
        rep = build_witness(sig, tower2)
        for (_, _, nk, dot, ab, _) in rep.level_rows(2):
            assert ab > 0.0 and dot > 0.625 * ab > 0.0

    def test_determinism(self, tower2):
        reps = [
            build_witness(pm1_signal(42, 1 << 13), tower2).to_json_dict()
            for _ in range(2)
        ]
        assert reps[0] == reps[1]

    def test_depth3_needs_explicit_ambient(self):
        spec3 = build_tower(3)
        sig = pm1_signal(2, 256)
        with pytest.raises(ResourceCapError, match="explicit"):
            build_witness(sig, spec3)

    def test_report_json_shape(self, tower2):
        sig = pm1_signal(3, 1 << 13)
        d = build_witness(sig, tower2).to_json_dict()
        assert d["kind"] == "witness-report"
        assert d["depth"] == 2
        assert d["bound_factor"] == [5, 8]
        assert len(d["per_checkpoint"]) == 3 * len(sig.checkpoints)
        assert len(d["point"]) == len(sig)
        assert {p["level"] for p in d["pads"]} == {1, 2}

    def test_checkpoint_csv_round_trip(self, tower1, tmp_path):
        rep = build_witness(pm1_signal(4, 1 << 10), tower1)
        path = tmp_path / "checkpoints.csv"
        write_checkpoint_csv(rep, path)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["level", "k", "N_k", "dot_sum", "abs_sum", "bound"]
        assert len(rows) == len(rep.rows) + 1
        for got, want in zip(rows[1:], rep.rows):
            assert int(got[0]) == want[0] and int(got[2]) == want[2]
            assert float(got[3]) == want[3]  # repr round-trips exactly
            assert float(got[5]) == want[5]
