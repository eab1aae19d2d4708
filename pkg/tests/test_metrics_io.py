from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from silent_tracker.codebook import make_codebook
from silent_tracker.config import default_config
from silent_tracker.engine import ServingInit, make_books, run_sweep, run_trial, run_trials
from silent_tracker.metrics_io import (
    SWEEP_CSV_HEADER,
    TraceError,
    dumps_report,
    load_actions,
    load_trace,
    parse_trace,
    read_report,
    replay,
    write_actions,
    write_report,
    write_trace,
)
from silent_tracker.protocol import Books, MeasurementReport, RaResponse, SlotTick, UplinkAck, UplinkNack

HEADER = "t_ms,cell_id,tx_beam,rx_beam,rss_dbm\n"
BOOKS = Books(make_codebook(20), {"A": make_codebook(20), "B": make_codebook(20)})


def trace(*rows):
    return HEADER + "".join(r + "\n" for r in rows)


class TestParse:
    def test_three_rows(self):
        recs = parse_trace(trace("0,A,0,9,-50.0", "20,B,3,4,-61.5", "40,A,0,9,-50.25"))
        assert recs == [
            MeasurementReport(0, "A", 0, 9, -50.0),
            MeasurementReport(20, "B", 3, 4, -61.5),
            MeasurementReport(40, "A", 0, 9, -50.25),
        ]

    def test_header_only(self):
        assert parse_trace(HEADER) == []

    def test_control_rows(self):
        recs = parse_trace(trace("0,@serving:A,1,2,-50", "0,@tick,,,", "5,@ack:A,,,", "6,@nack:A,,,", "7,@ra:1,,,", "8,@ra:0,,,"))
        assert recs == [
            ServingInit(0, "A", 1, 2, -50.0),
            SlotTick(0),
            UplinkAck(5, "A"),
            UplinkNack(6, "A"),
            RaResponse(7, True),
            RaResponse(8, False),
        ]

    def test_time_regression_names_the_line(self):
        with pytest.raises(TraceError) as e:
            parse_trace(trace("0,A,0,9,-50", "40,A,0,9,-50", "20,A,0,9,-50"), "t.csv")
        assert e.value.line == 4 and "t.csv:4" in str(e.value)

    @pytest.mark.parametrize(
        "text, line",
        [
            ("time,cell,tx,rx,rss\n0,A,0,0,-50\n", 1),
            ("", 1),
            (trace("0,A,0,9"), 2),
            (trace("0,A,0,9,-50", "x,A,0,9,-50"), 3),
            (trace("0,A,zero,9,-50"), 2),
            (trace("0,A,0,9,loud"), 2),
            (trace("0,A,0,9,-200"), 2),
            (trace("0,A,0,9,31"), 2),
            (trace("0,A,-1,9,-50"), 2),
            (trace("-5,A,0,9,-50"), 2),
            (trace("0,,0,9,-50"), 2),
            (trace("0,@warp,,,"), 2),
            (trace("0,@ra:2,,,"), 2),
            (trace("0,A,0,9,-50", "0,@serving:A,0,9,-50"), 3),
        ],
    )
    def test_rejects(self, text, line):
        with pytest.raises(TraceError) as e:
            parse_trace(text)
        assert e.value.line == line

    def test_missing_file(self, tmp_path):
        with pytest.raises(TraceError):
            load_trace(tmp_path / "none.csv")


measurement = st.builds(
    MeasurementReport,
    st.integers(0, 10_000),
    st.sampled_from(["A", "B", "cell-7"]),
    st.integers(0, 17),
    st.integers(0, 17),
    st.integers(-150_000, 0).map(lambda x: x / 1000),
)
control = st.one_of(
    st.builds(SlotTick, st.integers(0, 10_000)),
    st.builds(UplinkAck, st.integers(0, 10_000), st.just("A")),
    st.builds(UplinkNack, st.integers(0, 10_000), st.just("B")),
    st.builds(RaResponse, st.integers(0, 10_000), st.booleans()),
)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.one_of(measurement, control), max_size=30))
def test_write_load_round_trip(tmp_path_factory, recs):
    recs = sorted(recs, key=lambda r: r.t_ms)
    p = tmp_path_factory.mktemp("rt") / "t.csv"
    write_trace(recs, p)
    assert load_trace(p) == recs


class TestReplay:
    def test_constant_trace_never_moves(self):
        rows = ["0,@serving:A,0,9,-50"] + [f"{t},A,0,9,-50" for t in range(0, 400, 20)]
        assert replay(parse_trace(trace(*rows)), BOOKS) == []

    def test_empty(self):
        assert replay([], BOOKS) == []

    def test_serving_drop_gives_one_local_switch(self):
        rows = ["0,@serving:A,0,9,-50", "20,A,0,9,-50", "40,A,0,9,-53.1", "60,A,0,8,-51", "80,A,0,10,-52", "100,A,0,8,-51"]
        log = replay(parse_trace(trace(*rows)), BOOKS)
        assert [(a.action, a.cell_id, a.beam_id) for a in log] == [("SetRxBeam", "A", 8)]

    def test_neighbor_step_gives_one_probe_then_switch(self):
        rows = [
            "0,@serving:A,0,9,-55",
            "0,A,0,9,-55",
            "10,B,4,9,-50",  # heard on the first search dwell
            "30,B,4,9,-50",
            "50,B,4,9,-53.1",
            "70,B,4,8,-51",
            "90,B,4,10,-52",
            "110,B,4,8,-51",
            "150,B,4,8,-51",
        ]
        log = replay(parse_trace(trace(*rows)), BOOKS)
        assert [(a.t_ms, a.action, a.cell_id, a.beam_id) for a in log] == [
            (0, "StartNeighborSearch", None, None),
            (20, "SetRxBeam", "B", 9),
            (90, "SetRxBeam", "B", 8),
        ]

    def test_explicit_ticks_suppress_synthesis(self):
        # with an explicit tick only at 100 the search cannot start before it
        rows = ["0,@serving:A,0,9,-55", "0,A,0,9,-55", "100,@tick,,,"]
        log = replay(parse_trace(trace(*rows)), BOOKS)
        assert [(a.t_ms, a.action) for a in log] == [(100, "StartNeighborSearch")]

    def test_first_measurement_is_serving(self):
        rows = [f"{t},A,0,9,-50" for t in range(0, 100, 20)]
        assert replay(parse_trace(trace(*rows)), BOOKS) == []

    @pytest.mark.parametrize("scenario", ["walk", "rotation", "vehicular"])
    def test_open_loop_matches_closed_loop(self, scenario, tmp_path):
        cfg = default_config(scenario)
        for idx in range(2):
            r = run_trial(cfg, idx)
            p = tmp_path / f"{idx}.csv"
            write_trace(r.trace, p)
            assert replay(load_trace(p), make_books(cfg), cfg.protocol) == r.actions


class TestReports:
    def test_actions_round_trip(self, tmp_path):
        r = run_trial(default_config("walk"), 0)
        write_actions(r.actions, tmp_path / "a.csv")
        assert load_actions(tmp_path / "a.csv") == r.actions

    def test_trial_files_are_byte_identical(self, tmp_path):
        cfg = default_config("vehicular", seed=7)
        paths = []
        for d in ("x", "y"):
            (tmp_path / d).mkdir()
            paths.append(write_report(run_trial(cfg, 0), "json", tmp_path / d / "run.json"))
        assert [p.name for p in paths[0]] == ["run.json", "run.trace.csv", "run.actions.csv"]
        for a, b in zip(*paths):
            assert a.read_bytes() == b.read_bytes()

    def test_json_round_trip(self, tmp_path):
        r = run_trial(default_config("rotation"), 1)
        write_report(r, "json", tmp_path / "r.json", traces=False)
        back = read_report(tmp_path / "r.json")
        assert dumps_report(back) == dumps_report(r)
        assert back.outcome == r.outcome and back.trial_index == 1

    def test_many_trials(self, tmp_path):
        rs = [run_trial(default_config("walk"), i) for i in range(3)]
        written = write_report(rs, "json", tmp_path / "m.json")
        assert len(written) == 7 and (tmp_path / "m.2.trace.csv").exists()
        assert [r.trial_index for r in read_report(tmp_path / "m.json")] == [0, 1, 2]

    def test_trial_csv(self, tmp_path):
        rs = run_trials(default_config("walk"), [0, 1])
        write_report(rs, "csv", tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert len(lines) == 3 and lines[0].startswith("trial_index,seed,scenario,")

    def test_sweep_csv_one_row_per_cell(self, tmp_path):
        rep = run_sweep(default_config(), ["walk", "rotation"], [20.0, "omni"], 2, workers=1)
        write_report(rep, "csv", tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == ",".join(SWEEP_CSV_HEADER)
        assert [tuple(x.split(",")[:2]) for x in lines[1:]] == [
            ("walk", "20"), ("walk", "omni"), ("rotation", "20"), ("rotation", "omni")
        ]
        write_report(rep, "json", tmp_path / "s.json")
        assert read_report(tmp_path / "s.json") == replace(rep)

    def test_bad_format(self, tmp_path):
        with pytest.raises(ValueError):
            write_report(run_trial(default_config(), 0, keep_traces=False), "xml", tmp_path / "r")
