"""Slotted discrete-event simulator driving the protocol state machine.

Time is integer milliseconds. Every measurement period one slot is granted
to at most one cell; the slot lands on that cell's SSB burst. Events at the
same millisecond run in the order: uplink/RACH responses, slot tick, measurements.
"""

from __future__ import annotations

import heapq
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from silent_tracker.channel import Pose, bearing, distance, rss
from silent_tracker.codebook import Codebook, best_beam_oracle
from silent_tracker.config import ConfigError, SimConfig, validate
from silent_tracker.mobility import pose_at
from silent_tracker.protocol import (
    ACCESSING,
    TERMINAL,
    Action,
    ActionKind,
    Books,
    MeasurementReport,
    Phase,
    ProtocolInput,
    ProtocolState,
    RaResponse,
    SlotTick,
    UplinkAck,
    UplinkNack,
    initial_state,
    step,
)

RSS_MIN, RSS_MAX = -150.0, 30.0
_CTRL, _TICK, _MEAS = 0, 1, 2
_NOISE_BLOCK = 1024


@dataclass(frozen=True)
class ServingInit:
    """First record of a trace: the beam pair the mobile starts attached on."""

    t_ms: int
    cell_id: str
    tx_beam: int
    rx_beam: int
    rss_dbm: float


@dataclass(frozen=True)
class ActionRecord:
    t_ms: int
    phase: str
    action: str
    cell_id: str | None
    beam_id: int | None


@dataclass
class TrialReport:
    trial_index: int
    seed: int
    scenario: str
    codebook: str
    outcome: str  # soft | hard | fail
    success: bool
    discovery_latency_s: float | None
    discovery_time_s: float | None
    discovered_cell: str | None
    alignment_ratio: float | None
    rx_switch_count: dict[str, int]
    tx_switch_requests: int
    interruption_s: float | None
    handover_time_s: float | None
    end_time_s: float
    ignored_measurements: int
    trace: list = field(default_factory=list)
    actions: list[ActionRecord] = field(default_factory=list)


@dataclass
class SweepCell:
    scenario: str
    codebook: str
    trials: int
    success_rate: float
    mean_latency_s: float | None
    p95_latency_s: float | None
    soft_rate: float
    hard_rate: float
    fail_rate: float
    mean_alignment: float | None


@dataclass
class SweepReport:
    seed: int
    trials: int
    cells: list[SweepCell]


def action_records(t: int, phase: Phase, actions: Sequence[Action]) -> list[ActionRecord]:
    return [ActionRecord(t, phase.value, a.kind.value, a.cell_id, a.beam) for a in actions]


def make_books(cfg: SimConfig) -> Books:
    return Books(cfg.mobile.book, {c.id: c.book for c in cfg.cells})


def _rng(seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial_index])


class _Noise:
    def __init__(self, rng: np.random.Generator, sigma: float):
        self.rng, self.sigma = rng, sigma
        self.buf: list[float] = []
        self.i = 0

    def draw(self) -> float:
        if self.sigma == 0.0:
            return 0.0
        if self.i == len(self.buf):
            self.buf = (self.rng.standard_normal(_NOISE_BLOCK) * self.sigma).tolist()
            self.i = 0
        self.i += 1
        return self.buf[self.i - 1]


def _quantize(x: float) -> float:
    return round(min(max(x, RSS_MIN), RSS_MAX), 3)


def run_trial(config: SimConfig, trial_index: int = 0, keep_traces: bool = True) -> TrialReport:
    """Simulate one trial. The result depends only on (config, trial_index)."""
    cfg = validate(config)
    rng = _rng(cfg.seed, trial_index)
    ch = cfg.mobile.channel
    noise = _Noise(rng, ch.shadowing_sigma)
    books = make_books(cfg)
    rx_book = books.rx
    cells = {c.id: c for c in cfg.cells}
    periods = {c.id: int(round(c.ssb_period_s * 1000)) for c in cfg.cells}
    phases = {}
    for c in cfg.cells:
        if c.ssb_phase_s is None:
            phases[c.id] = int(rng.integers(0, periods[c.id]))
        else:
            phases[c.id] = int(round(c.ssb_phase_s * 1000))
    P = int(round(cfg.schedule.meas_period_s * 1000))
    n_srv, n_nb = cfg.schedule.serving_to_neighbor_ratio
    ra_ms = int(round(cfg.ra_retry_period_s * 1000))
    dur_ms = int(round(cfg.duration_s * 1000))
    params = cfg.protocol
    mob = cfg.mobile.mobility

    pose_cache: dict[int, Pose] = {}

    def pose(t: int) -> Pose:
        p = pose_cache.get(t)
        if p is None:
            p = pose_cache[t] = pose_at(mob, t / 1000.0)
        return p

    def link(cell_id: str, tx: int, rx: int, t: int) -> float:
        c = cells[cell_id]
        return rss(c.pose, pose(t), books.tx[cell_id][tx], rx_book[rx], ch, noise.draw())

    def oracle_rx(cell_id: str, t: int) -> int:
        me = pose(t)
        return best_beam_oracle(rx_book, bearing(me, cells[cell_id].pose) - me.heading)

    srv_id = cfg.serving_id
    me0 = pose(0)
    srv_cell = cells[srv_id]
    tx0 = best_beam_oracle(books.tx[srv_id], bearing(srv_cell.pose, me0) - srv_cell.pose.heading)
    rx0 = oracle_rx(srv_id, 0)
    rss0 = _quantize(rss(srv_cell.pose, me0, books.tx[srv_id][tx0], rx_book[rx0], ch))
    state = initial_state(srv_id, rx0, tx0, rss0)

    trace: list = [ServingInit(0, srv_id, tx0, rx0, rss0)]
    log: list[ActionRecord] = []
    heap: list[tuple[int, int, int, Any]] = []
    seq = 0

    def push(t: int, prio: int, ev: Any) -> None:
        nonlocal seq
        heapq.heappush(heap, (t, prio, seq, ev))
        seq += 1

    slot_counter = 0
    search_start = discovery_t = rlf_t = soft_t = hard_t = None
    discovered = None
    aligned = counted = 0
    rx_switches: dict[str, int] = {}
    tx_requests = 0

    def feed(inp: ProtocolInput) -> None:
        nonlocal state, search_start, discovery_t, discovered, rlf_t, soft_t, hard_t, tx_requests
        prev = state.phase
        state, actions = step(state, inp, books, params)
        if keep_traces:
            trace.append(inp)
        t = inp.t_ms
        if prev is Phase.SEARCH and state.phase is Phase.DUAL_TRACK and discovery_t is None:
            discovery_t, discovered = t, state.neighbor.cell_id
        if not actions:
            return
        log.extend(action_records(t, state.phase, actions))
        for a in actions:
            k = a.kind
            if k is ActionKind.SET_RX_BEAM:
                rx_switches[a.cell_id] = rx_switches.get(a.cell_id, 0) + 1
            elif k is ActionKind.START_NEIGHBOR_SEARCH:
                if search_start is None:
                    search_start = t
            elif k is ActionKind.REQUEST_TX_BEAM_SWITCH:
                tx_requests += 1
                c = cells[a.cell_id]
                # reverse link: mobile sends on its serving rx beam, BS listens on its current beam
                up = rss(pose(t), c.pose, rx_book[state.serving.rx_beam], books.tx[a.cell_id][state.serving.tx_beam], ch, noise.draw())
                t_resp = (t // P + 1) * P
                ev = UplinkAck(t_resp, a.cell_id) if up >= ch.sensitivity else UplinkNack(t_resp, a.cell_id)
                push(t_resp, _CTRL, ev)
            elif k is ActionKind.SEND_PREAMBLE:
                c = cells[a.cell_id]
                up = rss(pose(t), c.pose, rx_book[a.beam], books.tx[a.cell_id][a.tx_beam], ch, noise.draw())
                push(t + ra_ms, _CTRL, RaResponse(t + ra_ms, up >= cfg.rach_threshold))
            elif k is ActionKind.DECLARE_SERVING_SWITCH:
                rlf_t = t
            elif k is ActionKind.DECLARE_SOFT_HANDOVER:
                soft_t = t
            elif k is ActionKind.DECLARE_HARD_HANDOVER:
                hard_t = t

    def slot_time(cell_id: str, t: int) -> int | None:
        T = periods[cell_id]
        off = (phases[cell_id] - t) % T
        return t + off if off < P else None

    def grant(cell_id: str, t: int) -> None:
        ts = slot_time(cell_id, t)
        if ts is None:
            return
        track = state.track(cell_id)
        pr = state.probe
        n_tx = len(books.tx[cell_id])
        tx = track.tx_beam
        # adjacent SSB indices first, the tracked one last
        txs = tuple(x for x in dict.fromkeys(((tx - 1) % n_tx, (tx + 1) % n_tx)) if x != tx) + (tx,)
        if pr is not None and pr.cell_id == cell_id:
            if track is state.serving:
                txs = (tx,)
            push(ts, _MEAS, (cell_id, txs, pr.next_candidate()))
            return
        push(ts, _MEAS, (cell_id, txs, track.rx_beam))

    push(0, _TICK, None)
    end_t = 0
    while heap:
        t, prio, _, ev = heapq.heappop(heap)
        if t > dur_ms:
            break
        end_t = t
        if prio == _CTRL:
            feed(ev)
        elif prio == _TICK:
            nb = state.neighbor
            if discovery_t is not None and nb is not None:
                counted += 1
                o = oracle_rx(nb.cell_id, t)
                n = len(rx_book)
                if (nb.rx_beam - o) % n in (0, 1, n - 1):
                    aligned += 1
            feed(SlotTick(t))
            ph = state.phase
            if ph is Phase.SEARCH:
                rx = state.search.beam(len(rx_book))
                for c in cfg.cells:
                    if c.id == state.serving.cell_id:
                        continue
                    T = periods[c.id]
                    for j in range(len(books.tx[c.id])):
                        off = (phases[c.id] + j - t) % T
                        if off < P:
                            push(t + off, _MEAS, (c.id, (j,), rx))
            elif ph is Phase.TRACK_SERVING_ONLY:
                grant(state.serving.cell_id, t)
            elif ph is Phase.DUAL_TRACK:
                # a probe borrows slots from the other cell, except the neighbor's own turn
                pr = state.probe
                use_nb = slot_counter % (n_srv + n_nb) >= n_srv
                slot_counter += 1
                if use_nb or pr is None:
                    grant(state.neighbor.cell_id if use_nb else state.serving.cell_id, t)
                else:
                    grant(pr.cell_id, t)
            elif ph in ACCESSING:
                grant(state.neighbor.cell_id, t)
            push(t + P, _TICK, None)
        else:
            cell_id, txs, rx = ev
            for tx in txs:
                feed(MeasurementReport(t, cell_id, tx, rx, _quantize(link(cell_id, tx, rx, t))))
                if state.phase in TERMINAL:
                    break
        if state.phase in TERMINAL:
            break

    if soft_t is not None:
        outcome = "soft"
    elif hard_t is not None:
        outcome = "hard"
    else:
        outcome = "fail"
    success = False
    if outcome != "fail" and discovery_t is not None:
        here = pose(discovery_t)
        success = all(distance(here, cells[c].pose) <= cells[c].radius_m for c in (srv_id, discovered))

    def sec(ms: int | None) -> float | None:
        return None if ms is None else ms / 1000.0

    return TrialReport(
        trial_index=trial_index,
        seed=cfg.seed,
        scenario=cfg.scenario,
        codebook=rx_book.label,
        outcome=outcome,
        success=success,
        discovery_latency_s=sec(None if discovery_t is None else discovery_t - search_start),
        discovery_time_s=sec(discovery_t),
        discovered_cell=discovered,
        alignment_ratio=aligned / counted if counted else None,
        rx_switch_count=dict(sorted(rx_switches.items())),
        tx_switch_requests=tx_requests,
        interruption_s=sec(None if soft_t is None else soft_t - rlf_t),
        handover_time_s=sec(soft_t if soft_t is not None else hard_t),
        end_time_s=end_t / 1000.0,
        ignored_measurements=state.ignored,
        trace=trace if keep_traces else [],
        actions=log,
    )


# --- sweeps -------------------------------------------------------------------


def _summary_trial(args: tuple[SimConfig, int]) -> TrialReport:
    return run_trial(args[0], args[1], keep_traces=False)


def default_workers() -> int:
    env = os.environ.get("SILENT_TRACKER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("SILENT_TRACKER_THREADS", f"expected an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_trials(cfg: SimConfig, indices: Sequence[int], workers: int = 1) -> list[TrialReport]:
    jobs = [(cfg, i) for i in indices]
    if workers <= 1 or len(jobs) < 2:
        return [_summary_trial(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_summary_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def aggregate(scenario: str, codebook: str, reports: Sequence[TrialReport]) -> SweepCell:
    """Aggregate in trial-index order, so execution order never matters."""
    reports = sorted(reports, key=lambda r: r.trial_index)
    n = len(reports)
    lat = [r.discovery_latency_s for r in reports if r.discovery_latency_s is not None]
    ali = [r.alignment_ratio for r in reports if r.alignment_ratio is not None]
    return SweepCell(
        scenario=scenario,
        codebook=codebook,
        trials=n,
        success_rate=sum(r.success for r in reports) / n,
        mean_latency_s=float(np.mean(lat)) if lat else None,
        p95_latency_s=float(np.percentile(lat, 95)) if lat else None,
        soft_rate=sum(r.outcome == "soft" for r in reports) / n,
        hard_rate=sum(r.outcome == "hard" for r in reports) / n,
        fail_rate=sum(r.outcome == "fail" for r in reports) / n,
        mean_alignment=float(np.mean(ali)) if ali else None,
    )


def run_sweep(
    base: SimConfig,
    scenarios: Sequence[str],
    codebooks: Sequence[float | str],
    trials: int,
    workers: int | None = None,
    order: Sequence[int] | None = None,
) -> SweepReport:
    """Cross product scenario x mobile codebook, ``trials`` trials each.

    ``order`` permutes trial execution (testing hook); the report does not
    depend on it.
    """
    if not scenarios:
        raise ConfigError("scenarios", "empty scenario list")
    if not codebooks:
        raise ConfigError("codebooks", "empty codebook list")
    if trials < 1:
        raise ConfigError("trials", f"must be >= 1, got {trials}")
    workers = default_workers() if workers is None else workers
    indices = list(range(trials)) if order is None else list(order)
    if sorted(indices) != list(range(trials)):
        raise ConfigError("order", "must be a permutation of the trial indices")
    cells = []
    for scen in scenarios:
        for cb in codebooks:
            cfg = validate(base.with_scenario(scen, cb))
            reps = run_trials(cfg, indices, workers)
            cells.append(aggregate(scen, cfg.mobile.book.label, reps))
    return SweepReport(base.seed, trials, cells)

