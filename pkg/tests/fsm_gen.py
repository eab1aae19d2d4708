"""Random input sequences for the state machine, plus the invariant checker.

The generator is steered by the current state so that probes, searches,
failures and random access all get exercised. Choices go through a small
``Chooser`` so the same code runs under hypothesis or a seeded ``random.Random``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from silent_tracker.codebook import adjacent, make_codebook
from silent_tracker.protocol import (
    ACCESSING,
    TERMINAL,
    UPLINK_ACTIONS,
    ActionKind,
    Books,
    MeasurementReport,
    Phase,
    ProtocolParams,
    ProtocolState,
    RaResponse,
    SlotTick,
    UplinkAck,
    UplinkNack,
    initial_state,
    step,
)

BOOKS = Books(make_codebook(20), {"A": make_codebook(20), "B": make_codebook(20), "C": make_codebook(60)})
PARAMS = ProtocolParams()


class Chooser:
    def choice(self, seq: Sequence[Any]) -> Any: ...
    def uniform(self, lo: float, hi: float) -> float: ...
    def integer(self, lo: int, hi: int) -> int: ...


class RandomChooser(Chooser):
    def __init__(self, seed: int):
        self.r = random.Random(seed)

    def choice(self, seq):
        return seq[self.r.randrange(len(seq))]

    def uniform(self, lo, hi):
        return round(self.r.uniform(lo, hi), 3)

    def integer(self, lo, hi):
        return self.r.randint(lo, hi)


class DataChooser(Chooser):
    """Backed by hypothesis ``st.data()``."""

    def __init__(self, data):
        from hypothesis import strategies as st

        self.data, self.st = data, st

    def choice(self, seq):
        return self.data.draw(self.st.sampled_from(list(seq)))

    def uniform(self, lo, hi):
        return round(self.data.draw(self.st.floats(lo, hi)), 3)

    def integer(self, lo, hi):
        return self.data.draw(self.st.integers(lo, hi))


@dataclass
class Step:
    before: ProtocolState
    inp: Any
    after: ProtocolState
    actions: list


@dataclass
class Run:
    steps: list[Step] = field(default_factory=list)


def _rss(c: Chooser, ref: float | None) -> float:
    base = -55.0 if ref is None else ref
    kind = c.choice(["near", "near", "drop", "edge", "deep", "any"])
    if kind == "near":
        return base + c.uniform(-2.5, 3.0)
    if kind == "drop":
        return base - c.choice([2.9, 2.999, 3.0, 3.001, 3.1, 4.0, 6.0])
    if kind == "edge":
        return PARAMS.sensitivity + c.uniform(-1.0, 1.0)
    if kind == "deep":
        return PARAMS.sensitivity - c.uniform(1.0, 25.0)
    return c.uniform(-90.0, -40.0)


def _measurement(c: Chooser, s: ProtocolState, t: int) -> MeasurementReport:
    n_rx = len(BOOKS.rx)
    cell = c.choice(["A", "B", "B", "C", "Z"] if s.serving.cell_id == "A" else ["A", "B", "C", "C", "Z"])
    track = s.track(cell) if cell != "Z" else None
    n_tx = len(BOOKS.tx.get(cell, BOOKS.rx))
    if s.phase is Phase.SEARCH and s.search is not None and c.choice([True, True, False]):
        rx = s.search.beam(n_rx)
        tx = c.integer(0, n_tx - 1)
    elif track is not None:
        rx, tx = track.rx_beam, track.tx_beam
        mode = c.choice(["track", "track", "probe", "side", "random"])
        if mode == "probe" and s.probe is not None and s.probe.cell_id == cell and s.probe.next_candidate() is not None:
            rx = s.probe.next_candidate()
        elif mode == "side":
            tx = c.choice(adjacent(BOOKS.tx[cell], tx))
        elif mode == "random":
            rx, tx = c.integer(0, n_rx - 1), c.integer(0, n_tx - 1)
    else:
        rx, tx = c.integer(0, n_rx - 1), c.integer(0, n_tx - 1)
    ref = track.ref_rss if track is not None else None
    return MeasurementReport(t, cell, tx, rx, _rss(c, ref))


def random_run(c: Chooser, max_steps: int = 60, params: ProtocolParams = PARAMS) -> Run:
    s = initial_state("A", c.integer(0, 17), c.integer(0, 17), -50.0 + c.uniform(-8.0, 3.0))
    t = 0
    run = Run()
    for _ in range(max_steps):
        if s.phase in TERMINAL:
            break
        t += c.choice([0, 0, 1, 3, 10, 20])
        kind = c.choice(["meas"] * 12 + ["tick"] * 4 + ["ack", "nack"] + ["ra"] * 2)
        if kind == "meas":
            inp = _measurement(c, s, t)
        elif kind == "tick":
            inp = SlotTick(t)
        elif kind in ("ack", "nack"):
            cell = c.choice([s.serving.cell_id, s.serving.cell_id, "B"])
            inp = UplinkAck(t, cell) if kind == "ack" else UplinkNack(t, cell)
        else:
            inp = RaResponse(t, c.choice([False, False, True]))
        new, acts = step(s, inp, BOOKS, params)
        run.steps.append(Step(s, inp, new, acts))
        s = new
    return run


# --- invariants -------------------------------------------------------------


def check_locality(run: Run) -> list[str]:
    """Outside SEARCH every SetRxBeam moves the cell's rx beam by one position."""
    bad = []
    for st_ in run.steps:
        if st_.before.phase is Phase.SEARCH:
            continue
        for a in st_.actions:
            if a.kind is not ActionKind.SET_RX_BEAM:
                continue
            old = st_.before.track(a.cell_id) or (
                st_.before.serving if st_.before.serving.cell_id == a.cell_id else None
            )
            if old is None or a.beam == old.rx_beam or a.beam not in adjacent(BOOKS.rx, old.rx_beam):
                bad.append(f"non-local {a} from {old and old.rx_beam} at {st_.inp}")
    return bad


def _opens_probe(st_: Step, params: ProtocolParams) -> bool | None:
    """Oracle for whether this step must open a probe (None: the step is not a
    plain tracked sample, so the rule does not apply)."""
    b, m = st_.before, st_.inp
    if not isinstance(m, MeasurementReport) or m.cell_id not in BOOKS.tx:
        return None
    if b.phase is Phase.SEARCH or b.probe is not None:
        return False
    track = b.track(m.cell_id)
    if track is None or (m.tx_beam, m.rx_beam) != (track.tx_beam, track.rx_beam) or track.ref_rss is None:
        return False if track is None or track.ref_rss is None else None
    if m.rss_dbm < params.sensitivity and track.below + 1 >= params.failure_samples:
        return False  # consumed by the failure rule
    if track is b.neighbor and any(ts == m.t_ms and v > m.rss_dbm + 1e-9 for ts, v in track.side.values()):
        return False  # silent SSB reselection instead
    return m.rss_dbm <= track.ref_rss - params.drop_db


def check_soundness(run: Run, params: ProtocolParams = PARAMS) -> list[str]:
    """A probe opens exactly on a tracked sample at or below ref - 3 dB."""
    bad = []
    for st_ in run.steps:
        opened = st_.after.probe_count > st_.before.probe_count
        expect = _opens_probe(st_, params)
        if opened:
            m = st_.inp
            track = st_.before.track(getattr(m, "cell_id", None)) if isinstance(m, MeasurementReport) else None
            if track is None or track.ref_rss is None or m.rss_dbm > track.ref_rss - params.drop_db:
                bad.append(f"probe without a 3 dB drop at {m}")
        if expect is not None and expect != opened:
            bad.append(f"expected probe={expect} at {st_.inp} (ref {st_.before.track(st_.inp.cell_id).ref_rss})")
    return bad


def check_silence(run: Run) -> list[str]:
    """Nothing is ever sent to the neighbor before the serving switch."""
    bad = []
    declared: set[str] = set()
    for st_ in run.steps:
        for a in st_.actions:
            if a.kind is ActionKind.DECLARE_SERVING_SWITCH:
                declared.add(a.cell_id)
            elif a.kind in UPLINK_ACTIONS:
                if a.kind is ActionKind.REQUEST_TX_BEAM_SWITCH and a.cell_id != st_.before.serving.cell_id:
                    bad.append(f"tx request to non-serving {a}")
                if a.kind is ActionKind.SEND_PREAMBLE and a.cell_id not in declared:
                    bad.append(f"preamble before serving switch {a}")
    return bad


def check_progress(run: Run, params: ProtocolParams = PARAMS) -> list[str]:
    """From any access state, R_max failed responses end in a handover decision."""
    bad = []
    for st_ in run.steps:
        s = st_.after
        if s.ra_attempts > params.max_preambles:
            bad.append(f"ra_attempts {s.ra_attempts} > R_max")
        if s.phase in ACCESSING:
            if s.neighbor is None:
                bad.append("access state without a neighbor")
                continue
            t = s.last_t_ms
            for k in range(params.max_preambles):
                t += 10
                s, _ = step(s, RaResponse(t, False), BOOKS, params)
                if s.phase in TERMINAL:
                    break
            if s.phase is not Phase.HARD_HANDOVER:
                bad.append(f"no decision after R_max failures from {st_.after.phase}")
    preambles = 0
    for st_ in run.steps:
        preambles += sum(a.kind is ActionKind.SEND_PREAMBLE for a in st_.actions)
    if preambles > params.max_preambles:
        bad.append(f"{preambles} preambles sent")
    return bad


def check_purity(run: Run, params: ProtocolParams = PARAMS) -> list[str]:
    bad = []
    for st_ in run.steps:
        again, acts = step(st_.before, st_.inp, BOOKS, params)
        if again != st_.after or acts != st_.actions:
            bad.append(f"nondeterministic step at {st_.inp}")
    return bad


CHECKS: dict[str, Callable[[Run], list[str]]] = {
    "locality": check_locality,
    "soundness": check_soundness,
    "silence": check_silence,
    "progress": check_progress,
}
