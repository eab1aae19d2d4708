"""Mobile-side beam management state machine for soft handover.

`step` is a pure transition function: it never mutates its input state, and the
same (state, input) pair always yields the same (state, actions). Its only
sensory input is RSS; it tracks the serving cell (receive beam plus
uplink-requested transmit beam) and one neighbor cell (receive beam only, no
uplink until the serving link is declared lost).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Union

from silent_tracker.codebook import Codebook, adjacent

_TIE_DB = 1e-9


class ProtocolError(RuntimeError):
    pass


class Phase(str, Enum):
    SEARCH = "SEARCH"
    TRACK_SERVING_ONLY = "TRACK_SERVING_ONLY"
    DUAL_TRACK = "DUAL_TRACK"
    RADIO_LINK_FAILURE = "RADIO_LINK_FAILURE"
    RANDOM_ACCESS = "RANDOM_ACCESS"
    HANDOVER_COMPLETE = "HANDOVER_COMPLETE"
    HARD_HANDOVER = "HARD_HANDOVER"


TERMINAL = frozenset({Phase.HANDOVER_COMPLETE, Phase.HARD_HANDOVER})
ACCESSING = frozenset({Phase.RADIO_LINK_FAILURE, Phase.RANDOM_ACCESS})


# --- inputs ---------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementReport:
    t_ms: int
    cell_id: str
    tx_beam: int
    rx_beam: int
    rss_dbm: float


@dataclass(frozen=True)
class SlotTick:
    t_ms: int


@dataclass(frozen=True)
class UplinkAck:
    t_ms: int
    cell_id: str


@dataclass(frozen=True)
class UplinkNack:
    t_ms: int
    cell_id: str


@dataclass(frozen=True)
class RaResponse:
    t_ms: int
    success: bool


ProtocolInput = Union[MeasurementReport, SlotTick, UplinkAck, UplinkNack, RaResponse]


# --- actions --------------------------------------------------------------


class ActionKind(str, Enum):
    SET_RX_BEAM = "SetRxBeam"
    REQUEST_TX_BEAM_SWITCH = "RequestTxBeamSwitch"
    START_NEIGHBOR_SEARCH = "StartNeighborSearch"
    SEND_PREAMBLE = "SendPreamble"
    DECLARE_SERVING_SWITCH = "DeclareServingSwitch"
    DECLARE_SOFT_HANDOVER = "DeclareSoftHandover"
    DECLARE_HARD_HANDOVER = "DeclareHardHandover"


UPLINK_ACTIONS = frozenset({ActionKind.REQUEST_TX_BEAM_SWITCH, ActionKind.SEND_PREAMBLE})


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    cell_id: str | None = None
    beam: int | None = None  # rx beam, or the requested tx beam for RequestTxBeamSwitch
    tx_beam: int | None = None  # SendPreamble only


# --- state ----------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolParams:
    sensitivity: float = -62.0  # dBm
    drop_db: float = 3.0
    failure_samples: int = 3  # K: consecutive below-sensitivity samples
    max_unacked: int = 3  # M: consecutive unacknowledged uplink requests
    max_preambles: int = 4  # R_max
    edge_threshold: float | None = None  # dBm; None means sensitivity + 10
    search_backoff_ms: int = 60
    meas_period_ms: int = 20
    ewma_alpha: float | None = None  # None: instantaneous samples

    def __post_init__(self):
        if self.failure_samples < 1 or self.max_unacked < 1 or self.max_preambles < 1:
            raise ProtocolError("K, M and R_max must be at least 1")
        if self.meas_period_ms <= 0 or self.search_backoff_ms < 0:
            raise ProtocolError("periods must be positive")
        if self.ewma_alpha is not None and not 0.0 < self.ewma_alpha <= 1.0:
            raise ProtocolError("ewma_alpha must lie in (0, 1]")

    @property
    def edge(self) -> float:
        return self.sensitivity + 10.0 if self.edge_threshold is None else self.edge_threshold


DEFAULT_PARAMS = ProtocolParams()


@dataclass(frozen=True)
class Books:
    """Codebooks the FSM needs: the mobile's receive book and each cell's
    transmit book (the keys double as the set of known cells)."""

    rx: Codebook
    tx: Mapping[str, Codebook]


@dataclass
class CellTrack:
    cell_id: str
    rx_beam: int
    tx_beam: int
    ref_rss: float | None  # None: reset to the next sample
    last_rss: float | None
    timing_known: bool = True
    below: int = 0  # consecutive samples under sensitivity
    last_switch_dir: int = 0  # +1/-1 direction of the previous rx switch
    tx_switch_dir: int = 0
    filtered: float | None = None
    side: dict[int, tuple[int, float]] = field(default_factory=dict)  # tx -> (t_ms, rss)

    def copy(self) -> CellTrack:
        c = copy.copy(self)
        c.side = dict(self.side)
        return c


@dataclass
class SearchCursor:
    start_beam: int
    index: int  # dwell number within the current sweep
    started_ms: int
    best: tuple[float, str, int, int] | None = None  # (rss, cell, tx, rx)

    def beam(self, n_rx: int) -> int:
        return (self.start_beam + self.index) % n_rx


@dataclass
class Probe:
    cell_id: str
    candidates: tuple[int, ...]
    opened_ms: int
    trigger_ref: float
    current_rss: float
    samples: dict[int, float] = field(default_factory=dict)  # candidate rx -> rss on the tracked tx
    side: dict[tuple[int, int], float] = field(default_factory=dict)  # (rx, other tx) -> rss

    def next_candidate(self) -> int | None:
        for c in self.candidates:
            if c not in self.samples:
                return c
        return None


@dataclass
class ProtocolState:
    phase: Phase
    serving: CellTrack
    neighbor: CellTrack | None = None
    search: SearchCursor | None = None
    probe: Probe | None = None
    ra_attempts: int = 0
    unacked_requests: int = 0
    pending_request: int | None = None
    holdoff_until_ms: int = 0
    last_t_ms: int | None = None
    ignored: int = 0  # measurements for unknown cells
    probe_count: int = 0

    @property
    def failure_count(self) -> int:
        return self.serving.below

    def track(self, cell_id: str) -> CellTrack | None:
        if self.serving.cell_id == cell_id and self.phase not in ACCESSING:
            return self.serving
        if self.neighbor is not None and self.neighbor.cell_id == cell_id:
            return self.neighbor
        return None

    def copy(self) -> ProtocolState:
        s = copy.copy(self)
        s.serving = self.serving.copy()
        if self.neighbor is not None:
            s.neighbor = self.neighbor.copy()
        if self.search is not None:
            s.search = copy.copy(self.search)
        if self.probe is not None:
            s.probe = copy.copy(self.probe)
            s.probe.samples = dict(self.probe.samples)
            s.probe.side = dict(self.probe.side)
        return s


def initial_state(cell_id: str, rx_beam: int, tx_beam: int, rss_dbm: float | None = None) -> ProtocolState:
    """State of a mobile attached to ``cell_id`` on the given beam pair."""
    return ProtocolState(Phase.TRACK_SERVING_ONLY, CellTrack(cell_id, rx_beam, tx_beam, rss_dbm, rss_dbm))


def update_reference(track: CellTrack, sample: float) -> CellTrack:
    """Upward-ratcheting reference: ref follows the running maximum since the
    last switch. Returns a new track."""
    if not math.isfinite(sample):
        raise ProtocolError(f"non-finite sample {sample}")
    t = track.copy()
    t.ref_rss = sample if t.ref_rss is None else max(t.ref_rss, sample)
    t.last_rss = sample
    return t


def trigger_level(track: CellTrack, p: ProtocolParams) -> float:
    """RSS at or below which a probe opens: ``drop_db`` under the reference."""
    return track.ref_rss - p.drop_db


def search_schedule(codebook: Codebook | int, ssb_period: float) -> float:
    """Worst-case neighbor discovery time: every rx beam held for one full
    SSB sweep period."""
    if not ssb_period > 0:
        raise ProtocolError("ssb_period must be positive")
    n = codebook if isinstance(codebook, int) else len(codebook)
    return n * ssb_period


# --- transition function ----------------------------------------------------


def step(
    state: ProtocolState,
    inp: ProtocolInput,
    books: Books,
    params: ProtocolParams = DEFAULT_PARAMS,
) -> tuple[ProtocolState, list[Action]]:
    t = inp.t_ms
    if state.last_t_ms is not None and t < state.last_t_ms:
        raise ProtocolError(f"timestamp {t} ms precedes {state.last_t_ms} ms")
    s = state.copy()
    s.last_t_ms = t
    out: list[Action] = []
    if s.phase in TERMINAL:
        return s, out
    if isinstance(inp, MeasurementReport):
        _on_measurement(s, inp, books, params, out)
    elif isinstance(inp, SlotTick):
        _on_tick(s, t, books, params, out)
    elif isinstance(inp, UplinkAck):
        _on_ack(s, inp, books)
    elif isinstance(inp, UplinkNack):
        _on_nack(s, inp, params, out)
    elif isinstance(inp, RaResponse):
        _on_ra(s, inp, params, out)
    else:
        raise ProtocolError(f"unknown input {inp!r}")
    return s, out


def _on_measurement(s: ProtocolState, m: MeasurementReport, books: Books, p: ProtocolParams, out: list[Action]) -> None:
    if m.cell_id not in books.tx:
        s.ignored += 1
        return
    if s.phase is Phase.SEARCH:
        if m.cell_id == s.serving.cell_id:
            _track_sample(s, s.serving, m, True, books, p, out, allow_probe=False)
        elif m.rx_beam == s.search.beam(len(books.rx)) and m.rss_dbm >= p.sensitivity:
            best = s.search.best
            if best is None or m.rss_dbm > best[0]:
                s.search.best = (m.rss_dbm, m.cell_id, m.tx_beam, m.rx_beam)
        return
    track = s.track(m.cell_id)
    if track is not None:
        _track_sample(s, track, m, track is s.serving, books, p, out)


def _track_sample(
    s: ProtocolState,
    track: CellTrack,
    m: MeasurementReport,
    is_serving: bool,
    books: Books,
    p: ProtocolParams,
    out: list[Action],
    allow_probe: bool = True,
) -> None:
    probe = s.probe if s.probe is not None and s.probe.cell_id == track.cell_id else None
    if probe is not None and not is_serving and m.tx_beam != track.tx_beam and m.rx_beam in probe.candidates:
        probe.side[(m.rx_beam, m.tx_beam)] = m.rss_dbm
        return
    if m.tx_beam != track.tx_beam:
        if m.rx_beam == track.rx_beam:
            track.side[m.tx_beam] = (m.t_ms, m.rss_dbm)
        return
    in_probe = probe is not None and m.rx_beam in probe.candidates and m.rx_beam not in probe.samples
    if m.rx_beam != track.rx_beam and not in_probe:
        return

    track.below = track.below + 1 if m.rss_dbm < p.sensitivity else 0
    if track.below >= p.failure_samples:
        if is_serving:
            _serving_failure(s, out)
        else:
            _neighbor_failure(s, out)
        return

    if in_probe:
        probe.samples[m.rx_beam] = m.rss_dbm
        if probe.next_candidate() is None:
            _resolve_probe(s, track, probe, is_serving, books, p, out)
        return

    x = m.rss_dbm
    if p.ewma_alpha is not None:
        x = x if track.filtered is None else p.ewma_alpha * x + (1.0 - p.ewma_alpha) * track.filtered
        track.filtered = x
    if track.ref_rss is None:
        track.ref_rss = track.last_rss = x
        return

    if not is_serving and probe is None:
        # neighbor SSB index re-selection: purely local, nothing is sent
        best_tx, best_x = None, x
        for tx, (ts, v) in sorted(track.side.items()):
            if ts == m.t_ms and v > best_x + _TIE_DB:
                best_tx, best_x = tx, v
        if best_tx is not None:
            track.tx_beam = best_tx
            track.ref_rss = track.last_rss = best_x
            track.filtered = None
            track.side.clear()
            return

    track.ref_rss = max(track.ref_rss, x)
    track.last_rss = x
    if x <= trigger_level(track, p) and allow_probe and s.probe is None:
        _open_probe(s, track, m.t_ms, is_serving, books, p, out)


def _open_probe(s: ProtocolState, track: CellTrack, t: int, is_serving: bool, books: Books, p: ProtocolParams, out: list[Action]) -> None:
    rx = track.rx_beam
    cands = tuple(c for c in dict.fromkeys(adjacent(books.rx, rx)) if c != rx)
    s.probe_count += 1
    probe = Probe(track.cell_id, cands, t, track.ref_rss, track.last_rss)
    if cands:
        s.probe = probe
    else:
        _resolve_probe(s, track, probe, is_serving, books, p, out)


def _pick(cands: dict[int, float], prev: int, n: int, origin: int) -> int:
    """Highest value; ties keep the previous switch direction, else lower id."""
    best = max(cands.values())
    tied = sorted(c for c, v in cands.items() if v >= best - _TIE_DB)
    if len(tied) > 1 and prev:
        forward = (origin + prev) % n
        if forward in tied:
            return forward
    return tied[0]


def _resolve_probe(s: ProtocolState, track: CellTrack, probe: Probe, is_serving: bool, books: Books, p: ProtocolParams, out: list[Action]) -> None:
    s.probe = None
    n = len(books.rx)
    achieved = probe.current_rss
    request = None
    if is_serving and s.pending_request is None:
        request = _choose_tx(track, books.tx[track.cell_id], probe)
    if probe.samples:
        # per candidate rx beam, the best tx seen with it (neighbor probes also sample adjacent SSBs)
        value = dict(probe.samples)
        tx_for = {c: track.tx_beam for c in value}
        for (c, tx), v in sorted(probe.side.items()):
            if c in value and v > value[c] + _TIE_DB:
                value[c], tx_for[c] = v, tx
        best = _pick(value, track.last_switch_dir, n, track.rx_beam)
        if value[best] > probe.current_rss:
            track.last_switch_dir = 1 if best == (track.rx_beam + 1) % n else -1
            track.rx_beam = best
            track.tx_beam = tx_for[best]
            achieved = value[best]
            track.side.clear()
            track.filtered = None
            out.append(Action(ActionKind.SET_RX_BEAM, track.cell_id, best))
    track.ref_rss = track.last_rss = achieved
    # the mobile-side switch did not recover the drop: ask the BS for an adjacent tx beam
    if request is not None and achieved <= probe.trigger_ref - p.drop_db:
        s.pending_request = request
        out.append(Action(ActionKind.REQUEST_TX_BEAM_SWITCH, track.cell_id, request))


def _choose_tx(track: CellTrack, tx_book: Codebook, probe: Probe) -> int | None:
    n = len(tx_book)
    cands = [c for c in dict.fromkeys(adjacent(tx_book, track.tx_beam)) if c != track.tx_beam]
    if not cands:
        return None
    seen = {c: track.side[c][1] for c in cands if c in track.side and track.side[c][0] >= probe.opened_ms}
    if seen:
        c = _pick(seen, track.tx_switch_dir, n, track.tx_beam)
        return c if seen[c] > probe.current_rss else None
    return (track.tx_beam + (track.tx_switch_dir or 1)) % n


def _serving_failure(s: ProtocolState, out: list[Action]) -> None:
    s.probe = None
    s.pending_request = None
    nb = s.neighbor
    if nb is not None and s.phase is Phase.DUAL_TRACK:
        s.phase = Phase.RADIO_LINK_FAILURE
        s.ra_attempts = 0
        out.append(Action(ActionKind.DECLARE_SERVING_SWITCH, nb.cell_id))
        out.append(Action(ActionKind.SEND_PREAMBLE, nb.cell_id, nb.rx_beam, nb.tx_beam))
    else:
        s.phase = Phase.HARD_HANDOVER
        s.search = None
        out.append(Action(ActionKind.DECLARE_HARD_HANDOVER))


def _neighbor_failure(s: ProtocolState, out: list[Action]) -> None:
    if s.probe is not None and s.probe.cell_id == s.neighbor.cell_id:
        s.probe = None
    if s.phase in ACCESSING:
        s.phase = Phase.HARD_HANDOVER
        out.append(Action(ActionKind.DECLARE_HARD_HANDOVER))
    else:
        s.neighbor = None
        s.phase = Phase.TRACK_SERVING_ONLY


def _on_tick(s: ProtocolState, t: int, books: Books, p: ProtocolParams, out: list[Action]) -> None:
    if s.phase is Phase.SEARCH:
        sr = s.search
        if sr.best is not None:
            rss, cell, tx, rx = sr.best
            s.neighbor = CellTrack(cell, rx, tx, rss, rss)
            s.search = None
            s.phase = Phase.DUAL_TRACK
            out.append(Action(ActionKind.SET_RX_BEAM, cell, rx))
            return
        sr.index += 1
        if sr.index >= len(books.rx):
            s.search = None
            s.phase = Phase.TRACK_SERVING_ONLY
            s.holdoff_until_ms = t + p.search_backoff_ms
    elif s.phase is Phase.TRACK_SERVING_ONLY:
        last = s.serving.last_rss
        if s.probe is None and last is not None and last < p.edge and t >= s.holdoff_until_ms:
            s.phase = Phase.SEARCH
            s.search = SearchCursor(s.serving.rx_beam, 0, t)
            out.append(Action(ActionKind.START_NEIGHBOR_SEARCH))


def _on_ack(s: ProtocolState, a: UplinkAck, books: Books) -> None:
    if s.phase in ACCESSING or s.pending_request is None or a.cell_id != s.serving.cell_id:
        return
    srv = s.serving
    n = len(books.tx[srv.cell_id])
    srv.tx_switch_dir = 1 if s.pending_request == (srv.tx_beam + 1) % n else -1
    srv.tx_beam = s.pending_request
    srv.ref_rss = None
    srv.filtered = None
    srv.side.clear()
    if s.probe is not None and s.probe.cell_id == srv.cell_id:
        s.probe = None
    s.pending_request = None
    s.unacked_requests = 0


def _on_nack(s: ProtocolState, a: UplinkNack, p: ProtocolParams, out: list[Action]) -> None:
    if s.phase in ACCESSING or s.pending_request is None or a.cell_id != s.serving.cell_id:
        return
    s.unacked_requests += 1
    if s.unacked_requests >= p.max_unacked:
        _serving_failure(s, out)
    else:
        out.append(Action(ActionKind.REQUEST_TX_BEAM_SWITCH, s.serving.cell_id, s.pending_request))


def _on_ra(s: ProtocolState, r: RaResponse, p: ProtocolParams, out: list[Action]) -> None:
    if s.phase not in ACCESSING:
        return
    nb = s.neighbor
    if r.success:
        s.phase = Phase.HANDOVER_COMPLETE
        s.serving, s.neighbor = nb, None
        s.probe = None
        out.append(Action(ActionKind.DECLARE_SOFT_HANDOVER, nb.cell_id))
        return
    s.ra_attempts += 1
    if s.ra_attempts >= p.max_preambles:
        s.phase = Phase.HARD_HANDOVER
        out.append(Action(ActionKind.DECLARE_HARD_HANDOVER))
    else:
        s.phase = Phase.RANDOM_ACCESS
        out.append(Action(ActionKind.SEND_PREAMBLE, nb.cell_id, nb.rx_beam, nb.tx_beam))
