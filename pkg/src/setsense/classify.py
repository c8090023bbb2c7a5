"""Setting-trajectory features and the heuristic tactic rule chain.

The classifier reads three things off a setting trajectory: where the set
started (setter x), where it ended (hitter x), and how high it flew (mean y
of the highest points), all scaled against the calibrated net. Rules are
evaluated in a fixed order and the first match wins. The chain is written
for a team receiving on side "b"; side "a" evaluates the identical chain
with x reflected about the net midline.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .geometry import CourtSections, NetCalibration, TacticCoefficients
from .rotation import Team
from .track import Trajectory


class NoSettingTrajectoryError(ValueError):
    """Raised when asked to featurize a sentinel (no-set) trajectory."""


class TacticLabel(str, Enum):
    QUICK = "quick"
    THIRTY_ONE = "thirty_one"
    BACK_ONE = "back_one"
    SHORT = "short"
    OUTSIDE = "outside"
    BIC = "bic"
    D_BALL = "d_ball"
    OPPO = "oppo"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class TrajectoryFeatures:
    """Derived set features: setter x, hitter x, apex height, their difference, net span."""

    sp: float
    hp: float
    hya: float
    xd: float
    nw: float

    def __post_init__(self) -> None:
        if self.xd != self.hp - self.sp:
            raise ValueError(f"xd must equal hp - sp, got {self.xd} != {self.hp - self.sp}")
        if self.nw <= 0:
            raise ValueError(f"nw must be positive, got {self.nw}")


@dataclass(frozen=True)
class SetContext:
    """Receiving team plus each team's opposite-hitter back-row flag for the round."""

    tr: Team
    bra: bool
    brb: bool


def compute_features(b: Trajectory, cal: NetCalibration) -> TrajectoryFeatures:
    """Featurize a valid setting trajectory.

    sp/hp are the mean x of the first/last three points; hya the mean y of
    the five highest points (court view, so highest means largest y).
    """
    if not b.valid:
        raise NoSettingTrajectoryError("round has no valid setting trajectory to classify")
    pts = b.points
    if len(pts) < 5:
        raise NoSettingTrajectoryError(
            f"setting trajectory too short to featurize ({len(pts)} points)"
        )
    sp = sum(p.x for p in pts[:3]) / 3.0
    hp = sum(p.x for p in pts[-3:]) / 3.0
    top5 = sorted((p.y for p in pts), reverse=True)[:5]
    hya = sum(top5) / 5.0
    return TrajectoryFeatures(sp=sp, hp=hp, hya=hya, xd=hp - sp, nw=cal.net_width)


def contact_heights(b: Trajectory) -> tuple[float, float]:
    """Best-effort setter and hitter contact heights.

    Mean y of the first three and last three points. Auxiliary diagnostic
    output; not part of the classification contract.
    """
    if not b.valid or len(b.points) < 3:
        raise NoSettingTrajectoryError("contact heights need a valid trajectory")
    setter_y = sum(p.y for p in b.points[:3]) / 3.0
    hitter_y = sum(p.y for p in b.points[-3:]) / 3.0
    return setter_y, hitter_y


def mirror_features(f: TrajectoryFeatures, cal: NetCalibration) -> TrajectoryFeatures:
    """Reflect the x features about the net midline (x -> lnx + rnx - x)."""
    sp = cal.mirror_axis - f.sp
    hp = cal.mirror_axis - f.hp
    return TrajectoryFeatures(sp=sp, hp=hp, hya=f.hya, xd=hp - sp, nw=f.nw)


def classify(
    f: TrajectoryFeatures,
    sec: CourtSections,
    coef: TacticCoefficients,
    ctx: SetContext,
    cal: NetCalibration,
) -> TacticLabel:
    """Classify a featurized set into a tactic label; first matching rule wins.

    Side "a" is handled by reflecting the features and consulting that team's
    back-row flag; the rule chain itself is shared. Never fails: anything that
    matches no rule is labeled unknown.
    """
    if ctx.tr is Team.A:
        f = mirror_features(f, cal)
        back_row = ctx.bra
    else:
        back_row = ctx.brb

    width = cal.court_width
    inner_left = sec.p1 + 0.5 * (sec.p2 - sec.p1)
    outer_right = sec.p3 + 0.5 * (sec.p4 - sec.p3)

    if 0 < f.xd <= width / 5.0 and f.hya > coef.q * f.nw:
        return TacticLabel.QUICK
    if (
        width / 2.0 < f.xd <= 1.5 * width
        and 1.5 * sec.p1 < f.hp < sec.p4
        and f.hya > coef.m * f.nw
    ):
        return TacticLabel.THIRTY_ONE
    if f.xd < 0 and abs(f.xd) <= width / 3.0 and f.hya > coef.q * f.nw:
        return TacticLabel.BACK_ONE
    if sec.p1 < f.sp < sec.p3 and sec.p3 < f.hp < sec.p4 and f.hya > coef.s * f.nw:
        return TacticLabel.SHORT
    if f.hp > outer_right:
        return TacticLabel.OUTSIDE
    if inner_left < f.hp < outer_right and f.hya < coef.c * f.nw:
        return TacticLabel.BIC
    if f.hp < inner_left:
        return TacticLabel.D_BALL if back_row else TacticLabel.OPPO
    return TacticLabel.UNKNOWN
