from __future__ import annotations

import numpy as np
import pytest

from oracles import six_player_rotation_oracle
from setsense.rotation import (
    OppositeRowTracker,
    RoundKey,
    RoundKeyError,
    Team,
    is_back_row,
    parse_round_key,
    rotate_back,
    rotation_check,
)


class TestParseRoundKey:
    def test_basic(self):
        key = parse_round_key("3_2_a")
        assert (key.score, key.round, key.team) == (3, 2, Team.A)

    def test_team_b(self):
        key = parse_round_key("1_1_b")
        assert (key.score, key.round, key.team) == (1, 1, Team.B)

    def test_uppercase_team_normalized(self):
        assert parse_round_key("2_1_B").team is Team.B

    def test_wrong_delimiter(self):
        with pytest.raises(RoundKeyError, match="3-2-a"):
            parse_round_key("3-2-a")

    @pytest.mark.parametrize("bad", ["", "1_2", "1_2_c", "x_2_a", "1_2_a_b", "0_1_a", "1_0_b"])
    def test_malformed(self, bad):
        with pytest.raises(RoundKeyError):
            parse_round_key(bad)


class TestRotateBack:
    def test_simple_step(self):
        assert rotate_back(2) == 1

    def test_wraps_to_six(self):
        assert rotate_back(1) == 6

    def test_six_steps_is_identity(self):
        for start in range(1, 7):
            pos = start
            for _ in range(6):
                pos = rotate_back(pos)
            assert pos == start

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            rotate_back(0)
        with pytest.raises(ValueError):
            rotate_back(7)


class TestIsBackRow:
    @pytest.mark.parametrize("pos,expected", [(1, True), (2, False), (3, False), (4, False), (5, True), (6, True)])
    def test_rows(self, pos, expected):
        assert is_back_row(pos) is expected

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            is_back_row(9)


class TestRotationCheck:
    def test_side_out_rotates_new_server(self):
        # Rally 2 received by b means a won rally 1 as the receiver and now
        # serves, so a's opposite rotates 2 -> 1 (back row) before round 2.
        flags = rotation_check(2, 4, ["1_1_a", "2_1_b"])
        assert flags.back_row_a == (False, True)
        assert flags.back_row_b == (False, False)

    def test_side_out_other_direction(self):
        # Mirror case: receiver flips b -> a, so b gained serve and rotates.
        flags = rotation_check(4, 2, ["1_1_b", "2_1_a"])
        assert flags.back_row_b == (False, True)
        assert flags.back_row_a == (False, False)

    def test_same_rally_never_rotates(self):
        flags = rotation_check(4, 2, ["1_1_a", "1_2_a"])
        assert flags.back_row_a == (False, False)
        assert flags.back_row_b == (False, False)

    def test_same_receiver_next_rally_no_rotation(self):
        # Serving team kept the serve; nobody rotates.
        flags = rotation_check(4, 2, ["1_1_a", "2_1_a"])
        assert flags.back_row_a == (False, False)
        assert flags.back_row_b == (False, False)

    def test_team_flip_without_score_change_ignored(self):
        # Malformed metadata: both trigger conditions are required.
        flags = rotation_check(4, 2, ["1_1_a", "1_2_b"])
        assert flags.back_row_a == (False, False)
        assert flags.back_row_b == (False, False)

    def test_empty_input(self):
        flags = rotation_check(3, 3, [])
        assert len(flags) == 0

    def test_output_lengths_match_input(self):
        files = ["1_1_a", "1_2_a", "2_1_b", "3_1_b", "4_1_a"]
        flags = rotation_check(1, 1, files)
        assert len(flags.back_row_a) == len(files)
        assert len(flags.back_row_b) == len(files)

    def test_accepts_round_key_objects(self):
        keys = [RoundKey(1, 1, Team.A), RoundKey(2, 1, Team.B)]
        flags = rotation_check(2, 4, keys)
        assert flags.back_row_a == (False, True)

    def test_position_changes_at_most_one_step_per_round(self):
        keys = _random_script(np.random.default_rng(7), rallies=60)
        tracker = OppositeRowTracker(3, 5)
        previous = tracker.state
        for key in keys:
            tracker.step(key)
            current = tracker.state
            for prev_pos, cur_pos in ((previous.opp_a, current.opp_a), (previous.opp_b, current.opp_b)):
                assert cur_pos == prev_pos or cur_pos == (6 if prev_pos == 1 else prev_pos - 1)
            previous = current

    def test_flags_ignore_round_ordinals_within_rally(self):
        # Flags depend only on the (score, team) sequence.
        base = ["1_1_a", "1_2_a", "2_1_b", "2_2_b"]
        renumbered = ["1_3_a", "1_1_a", "2_2_b", "2_5_b"]
        f1 = rotation_check(2, 6, base)
        f2 = rotation_check(2, 6, renumbered)
        assert f1 == f2


def _random_script(rng: np.random.Generator, rallies: int) -> list[RoundKey]:
    """A well-formed random match script: team constant per rally, scores increasing."""
    keys: list[RoundKey] = []
    score = 0
    for _ in range(rallies):
        score += int(rng.integers(1, 3))  # occasionally skip a rally ordinal
        team = Team.A if rng.random() < 0.5 else Team.B
        for rnd in range(1, int(rng.integers(1, 5)) + 1):
            keys.append(RoundKey(score=score, round=rnd, team=team))
    return keys


class TestAgainstSixPlayerOracle:
    def test_single_match_script(self):
        rng = np.random.default_rng(42)
        keys = _random_script(rng, rallies=100)
        flags = rotation_check(4, 2, keys)
        oracle_a, oracle_b = six_player_rotation_oracle(
            4, 2, [(k.score, k.round, k.team.value) for k in keys]
        )
        assert list(flags.back_row_a) == oracle_a
        assert list(flags.back_row_b) == oracle_b

    def test_many_scripts(self):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            pos_a = int(rng.integers(1, 7))
            pos_b = int(rng.integers(1, 7))
            keys = _random_script(rng, rallies=int(rng.integers(1, 40)))
            flags = rotation_check(pos_a, pos_b, keys)
            oracle_a, oracle_b = six_player_rotation_oracle(
                pos_a, pos_b, [(k.score, k.round, k.team.value) for k in keys]
            )
            assert list(flags.back_row_a) == oracle_a
            assert list(flags.back_row_b) == oracle_b
