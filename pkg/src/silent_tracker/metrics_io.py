"""Trace and report serialization, plus open-loop replay of RSS traces.

Trace CSV columns are ``t_ms,cell_id,tx_beam,rx_beam,rss_dbm``. Besides plain
measurement rows a trace may carry control rows whose ``cell_id`` starts with
``@`` (other columns empty unless noted)::

    @serving:<cell>   initial attachment; tx_beam, rx_beam, rss_dbm filled in
    @tick             measurement-slot boundary
    @ack:<cell>       uplink request acknowledged
    @nack:<cell>      uplink request not acknowledged
    @ra:1 / @ra:0     random-access response (success / failure)

A trace without ``@tick`` rows gets a tick at every measurement-period
boundary up to its last row. Without an ``@serving`` row the first measured
cell, on the beams of its first row, is taken as serving.

Reports are written with keys in dataclass field order and reals printed
with three decimals, so equal reports produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import fields
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

from silent_tracker.engine import (
    RSS_MAX,
    RSS_MIN,
    ActionRecord,
    ServingInit,
    SweepCell,
    SweepReport,
    TrialReport,
    action_records,
)
from silent_tracker.protocol import (
    DEFAULT_PARAMS,
    TERMINAL,
    Books,
    MeasurementReport,
    ProtocolError,
    ProtocolInput,
    ProtocolParams,
    RaResponse,
    SlotTick,
    UplinkAck,
    UplinkNack,
    initial_state,
    step,
)

TRACE_HEADER = ("t_ms", "cell_id", "tx_beam", "rx_beam", "rss_dbm")
ACTION_HEADER = ("t_ms", "phase", "action", "cell_id", "beam_id")
SWEEP_CSV_HEADER = ("scenario", "codebook", "success_rate", "mean_latency_s", "p95_latency_s", "soft_rate")

TraceRecord = Union[ServingInit, ProtocolInput]


class TraceError(ValueError):
    """Malformed or inconsistent trace; ``line`` is 1-based (the header is line 1)."""

    def __init__(self, path: str, line: int | None, msg: str):
        self.path, self.line = path, line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {msg}")


class ReportError(OSError):
    pass


# --- traces -------------------------------------------------------------------


def _fmt_rss(x: float) -> str:
    return f"{x:.3f}"


def trace_rows(trace: Iterable[TraceRecord]) -> list[tuple[str, ...]]:
    rows = []
    for r in trace:
        if isinstance(r, MeasurementReport):
            rows.append((str(r.t_ms), r.cell_id, str(r.tx_beam), str(r.rx_beam), _fmt_rss(r.rss_dbm)))
        elif isinstance(r, SlotTick):
            rows.append((str(r.t_ms), "@tick", "", "", ""))
        elif isinstance(r, ServingInit):
            rows.append((str(r.t_ms), f"@serving:{r.cell_id}", str(r.tx_beam), str(r.rx_beam), _fmt_rss(r.rss_dbm)))
        elif isinstance(r, UplinkAck):
            rows.append((str(r.t_ms), f"@ack:{r.cell_id}", "", "", ""))
        elif isinstance(r, UplinkNack):
            rows.append((str(r.t_ms), f"@nack:{r.cell_id}", "", "", ""))
        elif isinstance(r, RaResponse):
            rows.append((str(r.t_ms), f"@ra:{int(r.success)}", "", "", ""))
        else:
            raise TypeError(f"not a trace record: {r!r}")
    return rows


def _write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    try:
        Path(path).write_text(buf.getvalue(), encoding="utf-8")
    except OSError as e:
        raise ReportError(f"{path}: cannot write ({e.strerror or e})") from None


def write_trace(trace: Iterable[TraceRecord], path: str | os.PathLike) -> None:
    _write_csv(path, TRACE_HEADER, trace_rows(trace))


def _int(v: str, what: str, path: str, line: int) -> int:
    try:
        return int(v)
    except ValueError:
        raise TraceError(path, line, f"{what} is not an integer: {v!r}") from None


def _parse_row(row: list[str], path: str, line: int) -> TraceRecord:
    if len(row) != len(TRACE_HEADER):
        raise TraceError(path, line, f"expected {len(TRACE_HEADER)} fields, got {len(row)}")
    t_s, cell, tx_s, rx_s, rss_s = (x.strip() for x in row)
    t = _int(t_s, "t_ms", path, line)
    if t < 0:
        raise TraceError(path, line, f"negative t_ms {t}")
    if not cell:
        raise TraceError(path, line, "empty cell_id")
    if cell.startswith("@"):
        kind, _, arg = cell[1:].partition(":")
        if kind == "tick" and not arg:
            return SlotTick(t)
        if kind == "ack" and arg:
            return UplinkAck(t, arg)
        if kind == "nack" and arg:
            return UplinkNack(t, arg)
        if kind == "ra" and arg in ("0", "1"):
            return RaResponse(t, arg == "1")
        if kind != "serving" or not arg:
            raise TraceError(path, line, f"unknown control row {cell!r}")
    tx = _int(tx_s, "tx_beam", path, line)
    rx = _int(rx_s, "rx_beam", path, line)
    if tx < 0 or rx < 0:
        raise TraceError(path, line, "beam indices must be non-negative")
    try:
        rss = float(rss_s)
    except ValueError:
        raise TraceError(path, line, f"rss_dbm is not a number: {rss_s!r}") from None
    if not (RSS_MIN <= rss <= RSS_MAX):
        raise TraceError(path, line, f"rss_dbm {rss} outside [{RSS_MIN:g}, {RSS_MAX:g}]")
    if cell.startswith("@"):
        return ServingInit(t, cell.partition(":")[2], tx, rx, rss)
    return MeasurementReport(t, cell, tx, rx, rss)


def parse_trace(text: str, path: str = "<trace>") -> list[TraceRecord]:
    lines = text.splitlines()
    if not lines or tuple(h.strip() for h in lines[0].split(",")) != TRACE_HEADER:
        raise TraceError(path, 1, f"header must be {','.join(TRACE_HEADER)}")
    out: list[TraceRecord] = []
    last_t = None
    for line, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        rec = _parse_row(row, path, line)
        if isinstance(rec, ServingInit) and out:
            raise TraceError(path, line, "@serving must be the first row")
        if last_t is not None and rec.t_ms < last_t:
            raise TraceError(path, line, f"t_ms goes backwards ({rec.t_ms} after {last_t})")
        last_t = rec.t_ms
        out.append(rec)
    return out


def load_trace(path: str | os.PathLike) -> list[TraceRecord]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise TraceError(str(path), None, f"cannot read ({e.strerror or e})") from None
    return parse_trace(text, str(path))


# --- replay -------------------------------------------------------------------


def _with_ticks(inputs: list[ProtocolInput], period_ms: int) -> list[ProtocolInput]:
    if not inputs or any(isinstance(r, SlotTick) for r in inputs):
        return inputs
    out: list[ProtocolInput] = []
    next_tick = 0
    for r in inputs:
        while next_tick <= r.t_ms:
            out.append(SlotTick(next_tick))
            next_tick += period_ms
        out.append(r)
    return out


def _check_beams(r: MeasurementReport | ServingInit, books: Books, i: int) -> None:
    n_tx = len(books.tx[r.cell_id]) if r.cell_id in books.tx else None
    if r.rx_beam >= len(books.rx) or (n_tx is not None and r.tx_beam >= n_tx):
        raise TraceError(
            "<trace>", None,
            f"record {i}: beam pair ({r.tx_beam}, {r.rx_beam}) outside the codebooks of {r.cell_id!r}",
        )


def replay(
    trace: Sequence[TraceRecord],
    books: Books,
    params: ProtocolParams = DEFAULT_PARAMS,
    serving: ServingInit | None = None,
) -> list[ActionRecord]:
    """Feed a trace through the state machine and return the action log.

    Stops at the first terminal phase, like the simulator does.
    """
    records = list(trace)
    if records and isinstance(records[0], ServingInit):
        serving = records.pop(0)
    if serving is None:
        first = next((r for r in records if isinstance(r, MeasurementReport)), None)
        if first is None:
            return []
        serving = ServingInit(0, first.cell_id, first.tx_beam, first.rx_beam, first.rss_dbm)
    if serving.cell_id not in books.tx:
        raise ProtocolError(f"serving cell {serving.cell_id!r} has no codebook")
    for i, r in enumerate([serving, *records]):
        if isinstance(r, (MeasurementReport, ServingInit)):
            _check_beams(r, books, i)
    state = initial_state(serving.cell_id, serving.rx_beam, serving.tx_beam, serving.rss_dbm)
    log: list[ActionRecord] = []
    for i, inp in enumerate(_with_ticks(records, params.meas_period_ms)):
        try:
            state, actions = step(state, inp, books, params)
        except ProtocolError as e:
            raise ProtocolError(f"trace record {i + 1} ({inp!r}): {e}") from None
        log.extend(action_records(inp.t_ms, state.phase, actions))
        if state.phase in TERMINAL:
            break
    return log


def action_rows(log: Iterable[ActionRecord]) -> list[tuple[str, ...]]:
    return [
        (str(a.t_ms), a.phase, a.action, a.cell_id or "", "" if a.beam_id is None else str(a.beam_id))
        for a in log
    ]


def write_actions(log: Iterable[ActionRecord], path: str | os.PathLike) -> None:
    _write_csv(path, ACTION_HEADER, action_rows(log))


def load_actions(path: str | os.PathLike) -> list[ActionRecord]:
    rows = list(csv.reader(Path(path).read_text(encoding="utf-8").splitlines()))
    if not rows or tuple(rows[0]) != ACTION_HEADER:
        raise TraceError(str(path), 1, f"header must be {','.join(ACTION_HEADER)}")
    return [
        ActionRecord(int(t), ph, act, cell or None, int(beam) if beam else None)
        for t, ph, act, cell, beam in rows[1:]
    ]


# --- reports ------------------------------------------------------------------

# Field order of the serialized forms; trace and actions go to sibling CSVs.
TRIAL_FIELDS = tuple(f.name for f in fields(TrialReport) if f.name not in ("trace", "actions"))
SWEEP_CELL_FIELDS = tuple(f.name for f in fields(SweepCell))


def _json(v: Any, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    if v is None or isinstance(v, (bool, str)):
        return json.dumps(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"cannot serialize non-finite value {v}")
        s = f"{v:.3f}"
        return "0.000" if s == "-0.000" else s
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json(x, indent + 1)}" for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        return "[\n" + ",\n".join(pad + _json(x, indent + 1) for x in v) + "\n" + "  " * indent + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _trial_dict(r: TrialReport) -> dict[str, Any]:
    return {k: getattr(r, k) for k in TRIAL_FIELDS}


def _sweep_dict(r: SweepReport) -> dict[str, Any]:
    return {"seed": r.seed, "trials": r.trials, "cells": [{k: getattr(c, k) for k in SWEEP_CELL_FIELDS} for c in r.cells]}


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        s = f"{v:.3f}"
        return "0.000" if s == "-0.000" else s
    if isinstance(v, dict):
        return ";".join(f"{k}:{x}" for k, x in v.items())
    return str(v)


Report = Union[TrialReport, SweepReport, Sequence[TrialReport]]


def dumps_report(report: Report) -> str:
    """Canonical JSON text of a report (without traces)."""
    if isinstance(report, SweepReport):
        body = _sweep_dict(report)
    elif isinstance(report, TrialReport):
        body = _trial_dict(report)
    else:
        body = {"trials": [_trial_dict(r) for r in report]}
    return _json(body) + "\n"


def sibling(path: str | os.PathLike, suffix: str) -> Path:
    """``out/run.json`` -> ``out/run.<suffix>.csv``."""
    p = Path(path)
    return p.with_name(f"{p.stem}.{suffix}.csv")


def write_report(report: Report, fmt: str, path: str | os.PathLike, traces: bool = True) -> list[Path]:
    """Write a report; returns every file written (report first).

    Trial reports that carry traces also get ``<stem>.trace.csv`` and
    ``<stem>.actions.csv`` (suffixed with the trial index for several trials).
    """
    if fmt not in ("json", "csv"):
        raise ValueError(f"format must be json or csv, got {fmt!r}")
    path = Path(path)
    written = [path]
    if isinstance(report, SweepReport):
        if fmt == "json":
            _write_text(path, dumps_report(report))
        else:
            _write_csv(path, SWEEP_CSV_HEADER, ([_csv_cell(getattr(c, k)) for k in SWEEP_CSV_HEADER] for c in report.cells))
        return written

    many = not isinstance(report, TrialReport)
    trials = list(report) if many else [report]
    if fmt == "json":
        _write_text(path, dumps_report(report))
    else:
        _write_csv(path, TRIAL_FIELDS, ([_csv_cell(getattr(r, k)) for k in TRIAL_FIELDS] for r in trials))
    if traces:
        for r in trials:
            if not r.trace and not r.actions:
                continue
            tag = f"{r.trial_index}." if many else ""
            tp, ap = sibling(path, tag + "trace"), sibling(path, tag + "actions")
            write_trace(r.trace, tp)
            write_actions(r.actions, ap)
            written += [tp, ap]
    return written


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise ReportError(f"{path}: cannot write ({e.strerror or e})") from None


def _trial_from(d: dict[str, Any]) -> TrialReport:
    missing = [k for k in TRIAL_FIELDS if k not in d]
    if missing:
        raise ValueError(f"trial report missing {missing}")
    return TrialReport(**{k: d[k] for k in TRIAL_FIELDS})


def read_report(path: str | os.PathLike) -> Report:
    """Inverse of ``write_report(..., "json", ...)`` (traces are not reloaded)."""
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if "cells" in d:
        return SweepReport(d["seed"], d["trials"], [SweepCell(**c) for c in d["cells"]])
    if "trials" in d and isinstance(d["trials"], list):
        return [_trial_from(x) for x in d["trials"]]
    return _trial_from(d)
