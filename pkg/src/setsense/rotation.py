"""Opposite-hitter rotation tracking from rally metadata.

Round clips carry a `score_round_team` key: the rally ordinal within the set,
the round ordinal within the rally, and the team that received serve first in
that rally. Serve changing hands (a side-out) makes the newly serving team
rotate clockwise, which steps its opposite hitter's position down by one.
Positions 1, 5 and 6 are the back row; 2, 3 and 4 the front row.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

BACK_ROW_POSITIONS = frozenset({1, 5, 6})

_KEY_RE = re.compile(r"^(\d+)_(\d+)_([abAB])$")


class RoundKeyError(ValueError):
    """A round key string does not match the `score_round_team` pattern."""


class Team(str, Enum):
    A = "a"
    B = "b"

    @property
    def other(self) -> "Team":
        return Team.B if self is Team.A else Team.A


@dataclass(frozen=True, order=True)
class RoundKey:
    """Identifies one round: rally ordinal, round ordinal, first-receiving team."""

    score: int
    round: int
    team: Team

    def __post_init__(self) -> None:
        if self.score < 1 or self.round < 1:
            raise RoundKeyError(
                f"score and round must be >= 1, got {self.score}_{self.round}"
            )

    def __str__(self) -> str:
        return f"{self.score}_{self.round}_{self.team.value}"


def parse_round_key(name: str) -> RoundKey:
    """Parse a `score_round_team` string such as "3_2_a".

    The team letter is case-insensitive and normalized to lowercase.
    Raises RoundKeyError naming the offending string on any mismatch.
    """
    m = _KEY_RE.match(name)
    if m is None:
        raise RoundKeyError(f"malformed round key {name!r}: expected <score>_<round>_<a|b>")
    score, rnd = int(m.group(1)), int(m.group(2))
    if score < 1 or rnd < 1:
        raise RoundKeyError(f"malformed round key {name!r}: score and round start at 1")
    return RoundKey(score=score, round=rnd, team=Team(m.group(3).lower()))


def rotate_back(pos: int) -> int:
    """Step a rotation position one place clockwise: 2 -> 1, 1 -> 6, etc."""
    _check_position(pos)
    nxt = (pos - 1) % 6
    return 6 if nxt == 0 else nxt


def is_back_row(pos: int) -> bool:
    """True for positions 1, 5 and 6."""
    _check_position(pos)
    return pos in BACK_ROW_POSITIONS


def _check_position(pos: int) -> None:
    if not 1 <= pos <= 6:
        raise ValueError(f"rotation position must be in 1..6, got {pos}")


@dataclass(frozen=True)
class RotationState:
    """Current opposite-hitter positions for both teams."""

    opp_a: int
    opp_b: int

    def __post_init__(self) -> None:
        _check_position(self.opp_a)
        _check_position(self.opp_b)


@dataclass(frozen=True)
class BackRowFlags:
    """Per-round back-row booleans for each team's opposite hitter."""

    back_row_a: tuple[bool, ...]
    back_row_b: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.back_row_a) != len(self.back_row_b):
            raise ValueError("flag lists must have equal length")

    def __len__(self) -> int:
        return len(self.back_row_a)


class OppositeRowTracker:
    """Steps both opposites' positions through a chronological stream of round keys.

    The first round adopts the supplied initial positions. For every later
    round, if both the rally ordinal and the receiving team changed relative
    to the immediately preceding round, the previous rally's receiver won the
    serve (a side-out) and is now serving, so that team's opposite rotates
    back one position. Rounds within the same rally never trigger a rotation,
    and a team flip without a rally change is treated as metadata noise.
    """

    def __init__(self, pos_a: int, pos_b: int) -> None:
        _check_position(pos_a)
        _check_position(pos_b)
        self._opp_a = pos_a
        self._opp_b = pos_b
        self._prev: RoundKey | None = None

    @property
    def state(self) -> RotationState:
        return RotationState(opp_a=self._opp_a, opp_b=self._opp_b)

    def step(self, key: RoundKey) -> tuple[bool, bool]:
        """Consume one round key; return (back_row_a, back_row_b) for that round."""
        prev = self._prev
        if prev is not None and key.score != prev.score and key.team != prev.team:
            # The current receiver's opponent just gained serve and rotates.
            if key.team is Team.A:
                self._opp_b = rotate_back(self._opp_b)
            else:
                self._opp_a = rotate_back(self._opp_a)
        self._prev = key
        return is_back_row(self._opp_a), is_back_row(self._opp_b)


def rotation_check(
    pos_a: int, pos_b: int, files: Iterable[RoundKey | str] | Sequence[RoundKey | str]
) -> BackRowFlags:
    """Run the opposite back-row check over a full, chronologically sorted set.

    Args:
        pos_a: initial rotation position of team A's opposite (1..6).
        pos_b: initial rotation position of team B's opposite (1..6).
        files: round keys (or `score_round_team` strings) in chronological order.

    Returns:
        One back-row boolean per input round for each team.
    """
    tracker = OppositeRowTracker(pos_a, pos_b)
    flags_a: list[bool] = []
    flags_b: list[bool] = []
    for item in files:
        key = parse_round_key(item) if isinstance(item, str) else item
        a, b = tracker.step(key)
        flags_a.append(a)
        flags_b.append(b)
    return BackRowFlags(back_row_a=tuple(flags_a), back_row_b=tuple(flags_b))
