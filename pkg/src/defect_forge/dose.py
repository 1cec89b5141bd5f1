"""Fluence-response calibration and write/erase/rewrite regime classification.

The dose model is deliberately non-parametric: a piecewise-linear
interpolant through the calibration points, split into rising and falling
segments at interior extrema.  Regimes follow the emitter-programming
vocabulary: the first rising segment writes emitters, falling segments
erase them, and a rising segment after a fall rewrites them.  Fluences at
or above the damage threshold form lattice-damage (W-center) conditions
regardless of the calibration.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = ["DoseCurve", "Segment", "calibrate", "classify",
           "REGIME_BELOW", "REGIME_WRITE", "REGIME_ERASE", "REGIME_REWRITE", "REGIME_DAMAGE"]

REGIME_BELOW = "below-calibration"
REGIME_WRITE = "write"
REGIME_ERASE = "erase"
REGIME_REWRITE = "rewrite"
REGIME_DAMAGE = "near-damage(W-forming)"


@dataclass(frozen=True)
class Segment:
    lo: float       # fluence range, mJ/cm^2
    hi: float
    direction: str  # "rising" | "falling"
    regime: str


@dataclass(frozen=True, eq=False)
class DoseCurve:
    """Piecewise-linear (fluence, intensity) calibration for one emitter species."""

    label: str
    fluences: np.ndarray
    intensities: np.ndarray
    segments: tuple[Segment, ...]
    boundaries: tuple[float, ...]  # interior extrema

    def __eq__(self, other):
        if not isinstance(other, DoseCurve):
            return NotImplemented
        return (self.label == other.label
                and np.array_equal(self.fluences, other.fluences)
                and np.array_equal(self.intensities, other.intensities)
                and self.segments == other.segments)

    def interpolate(self, fluence: float) -> float:
        if fluence < self.fluences[0] or fluence > self.fluences[-1]:
            raise ValidationError(
                f"fluence {fluence:g} outside the calibrated range "
                f"[{self.fluences[0]:g}, {self.fluences[-1]:g}] mJ/cm^2"
            )
        return float(np.interp(fluence, self.fluences, self.intensities))


def calibrate(points, label: str = "") -> DoseCurve:
    """Build a DoseCurve from (fluence mJ/cm^2, peak intensity) pairs.

    Points are sorted by fluence; duplicate fluences are rejected.  Plateau
    steps extend the preceding segment.
    """
    pts = sorted((float(f), float(i)) for f, i in points)
    if len(pts) < 3:
        raise ValidationError(f"calibration needs >= 3 points, got {len(pts)}")
    flu = np.array([p[0] for p in pts])
    inten = np.array([p[1] for p in pts])
    if np.any(np.diff(flu) <= 1e-12):
        raise ValidationError("duplicate fluences in calibration data")
    if np.any(inten < 0):
        raise ValidationError("intensities must be >= 0")

    directions = []
    last = "rising"
    for d in np.diff(inten):
        if d > 0:
            last = "rising"
        elif d < 0:
            last = "falling"
        directions.append(last)

    # merge runs of equal direction into segments
    seg_spans = []
    start = 0
    for k in range(1, len(directions)):
        if directions[k] != directions[k - 1]:
            seg_spans.append((start, k, directions[k - 1]))
            start = k
    seg_spans.append((start, len(directions), directions[-1]))

    segments = []
    seen_fall = False
    for a, b, direction in seg_spans:
        if direction == "rising":
            regime = REGIME_REWRITE if seen_fall else REGIME_WRITE
        else:
            regime = REGIME_ERASE
            seen_fall = True
        segments.append(Segment(lo=float(flu[a]), hi=float(flu[b]), direction=direction,
                                regime=regime))
    boundaries = tuple(s.hi for s in segments[:-1])

    flu.flags.writeable = False
    inten.flags.writeable = False
    return DoseCurve(label=label, fluences=flu, intensities=inten,
                     segments=tuple(segments), boundaries=boundaries)


def classify(curve: DoseCurve, fluence: float, damage_threshold: float) -> str:
    """Regime label for one fluence given a damage threshold (mJ/cm^2).

    A fluence at an interior boundary belongs to the segment on its left,
    so the apex of the first rise still classifies as write.  Fluences above
    the calibrated range but below the threshold extend the last segment.
    """
    if fluence < 0:
        raise ValidationError(f"fluence must be >= 0, got {fluence}")
    if damage_threshold <= curve.fluences[-1]:
        raise ValidationError(
            f"damage threshold {damage_threshold:g} must exceed the largest "
            f"calibrated fluence {curve.fluences[-1]:g}"
        )
    if fluence >= damage_threshold:
        return REGIME_DAMAGE
    if fluence < curve.fluences[0]:
        return REGIME_BELOW
    idx = min(bisect_right([s.lo for s in curve.segments], fluence) - 1,
              len(curve.segments) - 1)
    seg = curve.segments[idx]
    if fluence == seg.lo and idx > 0:
        return curve.segments[idx - 1].regime
    return seg.regime


def classify_with_segment(curve: DoseCurve, fluence: float, damage_threshold: float):
    """(regime, segment index) pair; index is None outside the calibration."""
    regime = classify(curve, fluence, damage_threshold)
    if regime in (REGIME_BELOW, REGIME_DAMAGE):
        return regime, None
    idx = min(bisect_right([s.lo for s in curve.segments], fluence) - 1,
              len(curve.segments) - 1)
    if fluence == curve.segments[idx].lo and idx > 0:
        idx -= 1
    return regime, idx
