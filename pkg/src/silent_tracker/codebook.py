"""Uniform azimuth codebooks and the adjacency the switching rules walk."""

from __future__ import annotations

import math
from dataclasses import dataclass

from silent_tracker.channel import beam_gain, wrap_deg

OMNI = "omni"
_TIE_DB = 1e-9


class CodebookError(ValueError):
    pass


@dataclass(frozen=True)
class Beam:
    id: int
    boresight: float  # degrees, relative to the owner's heading
    theta_3db: float
    peak_gain: float
    omni: bool = False


@dataclass(frozen=True)
class Codebook:
    beams: tuple[Beam, ...]
    beamwidth: float  # degrees; 360 for omni

    def __len__(self) -> int:
        return len(self.beams)

    def __getitem__(self, i: int) -> Beam:
        return self.beams[i]

    @property
    def omni(self) -> bool:
        return self.beams[0].omni

    @property
    def label(self) -> str:
        return OMNI if self.omni else f"{self.beamwidth:g}"


def peak_gain_for(theta_3db: float) -> float:
    return 10.0 * math.log10(360.0 / theta_3db)


def make_codebook(beamwidth: float | str) -> Codebook:
    """Build a uniform codebook tiling the azimuth circle.

    ``beamwidth`` is the half-power width in degrees, or ``"omni"`` for a single
    isotropic element.
    """
    if beamwidth == OMNI:
        return Codebook((Beam(0, 0.0, 360.0, 0.0, omni=True),), 360.0)
    try:
        bw = float(beamwidth)
    except (TypeError, ValueError):
        raise CodebookError(f"beamwidth must be a number or 'omni', got {beamwidth!r}") from None
    if not (0.0 < bw <= 360.0) or not math.isfinite(bw):
        raise CodebookError(f"beamwidth must lie in (0, 360], got {bw}")
    # ceil keeps the half-power sectors covering the circle when bw does not divide 360
    n = max(1, math.ceil(360.0 / bw - 1e-9))
    spacing = 360.0 / n
    peak = peak_gain_for(bw)
    return Codebook(tuple(Beam(i, i * spacing, bw, peak) for i in range(n)), bw)


def adjacent(codebook: Codebook, beam_id: int) -> tuple[int, int]:
    n = len(codebook)
    if not (0 <= beam_id < n):
        raise CodebookError(f"beam id {beam_id} out of range for {n}-beam codebook")
    return (beam_id - 1) % n, (beam_id + 1) % n


def best_beam_oracle(codebook: Codebook, direction: float) -> int:
    """Index of the beam with the highest gain toward ``direction`` (relative
    to the owner's heading). Ties go to the lowest id."""
    if not math.isfinite(direction):
        raise CodebookError("direction must be finite")
    direction = wrap_deg(direction)
    best, best_g = 0, -math.inf
    for b in codebook.beams:
        g = beam_gain(b, direction - b.boresight)
        if g > best_g + _TIE_DB:
            best, best_g = b.id, g
    return best
