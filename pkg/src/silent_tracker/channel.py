"""Azimuth-only 60 GHz link model: antenna pattern, free-space loss, RSS."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from silent_tracker.codebook import Beam

SPEED_OF_LIGHT = 299_792_458.0  # m/s
SIDELOBE_FLOOR_DB = 20.0


class ChannelError(ValueError):
    pass


def wrap_deg(angle: float) -> float:
    """Wrap an angle to [0, 360)."""
    a = math.fmod(angle, 360.0)
    if a < 0.0:
        a += 360.0
    if a >= 360.0:  # fmod of tiny negatives can round up to 360
        a = 0.0
    return a


def angular_offset(a: float, b: float) -> float:
    """Unsigned angular distance between two directions, in [0, 180]."""
    d = wrap_deg(a - b)
    return 360.0 - d if d > 180.0 else d


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ChannelError(f"non-finite pose {self!r}")
        object.__setattr__(self, "heading", wrap_deg(self.heading))


@dataclass(frozen=True)
class ChannelParams:
    carrier_freq: float = 60e9  # Hz
    tx_power: float = 10.0  # dBm
    noise_floor: float = -90.0  # dBm
    sensitivity: float = -62.0  # dBm
    shadowing_sigma: float = 0.0  # dB

    def __post_init__(self):
        if not self.carrier_freq > 0:
            raise ChannelError("carrier_freq must be positive")
        if self.sensitivity < self.noise_floor:
            raise ChannelError("sensitivity must not be below the noise floor")
        if self.shadowing_sigma < 0:
            raise ChannelError("shadowing_sigma must be non-negative")


def fspl(distance: float, freq: float) -> float:
    """Free-space path loss in dB, 20 log10(4 pi d f / c)."""
    if not (distance > 0 and freq > 0):
        raise ChannelError(f"fspl needs positive distance and frequency, got {distance}, {freq}")
    return 20.0 * math.log10(4.0 * math.pi * distance * freq / SPEED_OF_LIGHT)


def beam_gain(beam: Beam, offset: float) -> float:
    """Gain in dBi of `beam` at `offset` degrees from boresight.

    Parabolic main lobe in dB, clamped at a flat sidelobe floor 20 dB below peak.
    """
    if beam.omni:
        return 0.0
    off = angular_offset(offset, 0.0)
    att = 12.0 * (off / beam.theta_3db) ** 2
    return beam.peak_gain - (att if att < SIDELOBE_FLOOR_DB else SIDELOBE_FLOOR_DB)


def bearing(src: Pose, dst: Pose) -> float:
    """Absolute direction from src to dst, degrees in [0, 360)."""
    return wrap_deg(math.degrees(math.atan2(dst.y - src.y, dst.x - src.x)))


def distance(a: Pose, b: Pose) -> float:
    return math.hypot(b.x - a.x, b.y - a.y)


def rss(
    tx_pose: Pose,
    rx_pose: Pose,
    tx_beam: Beam,
    rx_beam: Beam,
    params: ChannelParams,
    noise_draw: float = 0.0,
) -> float:
    """Received power in dBm over a line-of-sight link.

    Beam boresights are relative to the owning node's heading.
    """
    d = distance(tx_pose, rx_pose)
    if d == 0.0:
        raise ChannelError("transmitter and receiver poses coincide")
    to_rx = bearing(tx_pose, rx_pose)
    to_tx = wrap_deg(to_rx + 180.0)
    g_tx = beam_gain(tx_beam, to_rx - tx_pose.heading - tx_beam.boresight)
    g_rx = beam_gain(rx_beam, to_tx - rx_pose.heading - rx_beam.boresight)
    return params.tx_power + g_tx + g_rx - fspl(d, params.carrier_freq) + noise_draw
