"""In-band beam management for mm-wave soft handover: protocol FSM plus a
deterministic cell-edge simulator."""

from silent_tracker.channel import ChannelParams, Pose, beam_gain, fspl, rss
from silent_tracker.codebook import Beam, Codebook, adjacent, best_beam_oracle, make_codebook
from silent_tracker.mobility import MobilityModel, pose_at

__all__ = [
    "Beam",
    "ChannelParams",
    "Codebook",
    "MobilityModel",
    "Pose",
    "adjacent",
    "beam_gain",
    "best_beam_oracle",
    "fspl",
    "make_codebook",
    "pose_at",
    "rss",
]

__version__ = "0.1.0"
