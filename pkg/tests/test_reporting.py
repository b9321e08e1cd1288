"""Sweep parsing, aggregation, tables, and experiment file output."""

import json
import os

import pytest

from conftest import tiny_model

from consolve.checkpoint import save_model
from consolve.errors import ContractError, DataError
from consolve.instances import LabeledSample, write_jsonl
from consolve.objectives import mis_solution, tour_solution
from consolve.reporting import (
    CSV_HEADER,
    MIS_HEADERS,
    MISSING,
    TSP_HEADERS,
    ExperimentSpec,
    ResultRow,
    SweepItem,
    evaluate,
    make_table,
    parse_sweep,
    run_experiment,
)
from consolve.solver import SolveReport


# ---------------------------------------------------------------- sweep items


def test_parse_sweep_single_item():
    items = parse_sweep("1:0")
    assert items == [SweepItem(sample_steps=1, search_steps=0)]


def test_parse_sweep_defaults_fill_in():
    # ts alone: no search, one chain, no 2-opt
    assert parse_sweep("3") == [SweepItem(sample_steps=3)]


def test_parse_sweep_full_form_and_whitespace():
    items = parse_sweep(" 1:0, 1:1 ,3:3:4:1")
    assert len(items) == 3
    assert items[2] == SweepItem(
        sample_steps=3, search_steps=3, parallel_samples=4, use_two_opt=True
    )


@pytest.mark.parametrize("bad", ["", "  ,  ", "1:2:3:4:5", "a:b", "1:x"])
def test_parse_sweep_rejects_malformed(bad):
    with pytest.raises(DataError):
        parse_sweep(bad)


def test_sweep_item_method_names():
    assert SweepItem(1).method == "Ts1"
    assert SweepItem(1, search_steps=2).method == "Ts1+Tg2"
    assert SweepItem(3, search_steps=3, parallel_samples=4, use_two_opt=True).method == (
        "Ts3+Tg3x4+2opt"
    )


@pytest.mark.parametrize(
    "kwargs",
    [dict(sample_steps=0), dict(sample_steps=1, search_steps=-1), dict(sample_steps=1, parallel_samples=0)],
)
def test_sweep_item_rejects_invalid(kwargs):
    with pytest.raises(ContractError):
        SweepItem(**kwargs)


# ------------------------------------------------------------------ rows


@pytest.fixture(scope="module")
def dummy_solutions(corners, path5):
    return {"tsp": tour_solution(corners, [0, 1, 2, 3]), "mis": mis_solution(path5, [0, 2, 4])}


@pytest.fixture()
def report_factory(dummy_solutions):
    def _report(instance_id, objective, reference, kind="tsp"):
        drop = None if reference is None else (objective - reference) / abs(reference)
        return SolveReport(
            instance_id=instance_id,
            objective=objective,
            reference=reference,
            drop=drop,
            time_ms=1.0,
            sample_steps=1,
            search_steps=0,
            samples=1,
            seed=0,
            solution=dummy_solutions[kind],
        )

    return _report


def test_result_row_aggregates_means(report_factory):
    row = ResultRow.from_reports(
        "Ts1", "tsp", [report_factory("a", 5.0, 4.0), report_factory("b", 3.0, 3.0)]
    )
    assert row.mean_objective == pytest.approx(4.0)
    assert row.mean_drop == pytest.approx((0.25 + 0.0) / 2)
    assert row.total_time_s == pytest.approx(0.002)
    assert len(row.records) == 2


def test_result_row_drop_absent_when_any_reference_missing(report_factory):
    row = ResultRow.from_reports(
        "Ts1", "tsp", [report_factory("a", 5.0, 4.0), report_factory("b", 3.0, None)]
    )
    assert row.mean_drop is None


def test_result_row_rejects_empty():
    with pytest.raises(ContractError):
        ResultRow.from_reports("Ts1", "tsp", [])


def test_display_objective_negates_set_sizes(report_factory):
    row = ResultRow.from_reports("Ts1", "mis", [report_factory("a", -4.0, -4.0, kind="mis")])
    assert row.display_objective == pytest.approx(4.0)
    tsp = ResultRow.from_reports("Ts1", "tsp", [report_factory("a", 4.0, 4.0)])
    assert tsp.display_objective == pytest.approx(4.0)


# ------------------------------------------------------------------ tables


def test_table_headers_match_problem_kind(report_factory):
    tsp_row = ResultRow.from_reports("Ts1", "tsp", [report_factory("a", 5.0, 4.0)])
    text, csv_text = make_table([tsp_row])
    for header in TSP_HEADERS:
        assert header in text.splitlines()[0]
    assert csv_text.splitlines()[0] == CSV_HEADER

    mis_row = ResultRow.from_reports("Ts1", "mis", [report_factory("a", -4.0, -4.0, kind="mis")])
    text, _ = make_table([mis_row])
    for header in MIS_HEADERS:
        assert header in text.splitlines()[0]


def test_table_renders_missing_values_as_dash(report_factory):
    row = ResultRow.from_reports("Ts1", "tsp", [report_factory("a", 5.0, None)])
    text, csv_text = make_table([row])
    assert MISSING in text
    assert MISSING in csv_text


def test_table_rejects_mixed_kinds_and_empty(report_factory):
    tsp_row = ResultRow.from_reports("Ts1", "tsp", [report_factory("a", 5.0, 4.0)])
    mis_row = ResultRow.from_reports("Ts1", "mis", [report_factory("a", -4.0, -4.0, kind="mis")])
    with pytest.raises(ContractError):
        make_table([tsp_row, mis_row])
    with pytest.raises(ContractError):
        make_table([])


def test_table_row_count_and_values(report_factory):
    rows = [
        ResultRow.from_reports("Ts1", "tsp", [report_factory("a", 5.0, 4.0)]),
        ResultRow.from_reports("Ts1+Tg1", "tsp", [report_factory("a", 4.0, 4.0)]),
    ]
    text, csv_text = make_table(rows)
    lines = text.splitlines()
    assert len(lines) == 2 + len(rows)  # header + rule + one line per row
    assert lines[2].startswith("Ts1 ")
    assert "25.00%" in lines[2]
    assert csv_text.splitlines()[1] == "Ts1,5.00,25.00%,0.00s"


# ------------------------------------------------------------------ evaluate


def test_evaluate_prepends_oracle_row(tsp_batch):
    model = tiny_model("tsp")
    rows = evaluate(model, tsp_batch, [SweepItem(1)], seed=5)
    assert [r.method for r in rows] == ["oracle", "Ts1"]
    assert rows[0].mean_drop == 0.0
    assert rows[0].total_time_s is None
    assert len(rows[1].records) == len(tsp_batch)
    assert all(r.drop is not None for r in rows[1].records)


def test_evaluate_without_labels_has_no_reference(tsp_batch):
    model = tiny_model("tsp")
    unlabeled = [LabeledSample(instance=s.instance) for s in tsp_batch]
    rows = evaluate(model, unlabeled, [SweepItem(1)], seed=5)
    assert [r.method for r in rows] == ["Ts1"]
    assert rows[0].mean_drop is None


def test_evaluate_is_deterministic(tsp_batch):
    model = tiny_model("tsp")
    rows_a = evaluate(model, tsp_batch, [SweepItem(1), SweepItem(1, search_steps=1)], seed=5)
    rows_b = evaluate(model, tsp_batch, [SweepItem(1), SweepItem(1, search_steps=1)], seed=5)
    for a, b in zip(rows_a, rows_b):
        assert a.mean_objective == b.mean_objective
        assert [r.objective for r in a.records] == [r.objective for r in b.records]


def test_evaluate_rejects_empty():
    with pytest.raises(ContractError):
        evaluate(tiny_model("tsp"), [], [SweepItem(1)], seed=0)


# ------------------------------------------------------------- experiments


def test_experiment_spec_checks_paths(tmp_path):
    data = tmp_path / "data.jsonl"
    data.write_text("")
    with pytest.raises(DataError):
        ExperimentSpec(
            dataset=str(data), checkpoint=str(tmp_path / "no.ckpt"), sweep=(SweepItem(1),),
            seed=0, out_dir=str(tmp_path),
        )
    with pytest.raises(ContractError):
        ExperimentSpec(dataset=str(data), checkpoint=str(data), sweep=(), seed=0, out_dir=str(tmp_path))


@pytest.fixture()
def experiment_inputs(tmp_path, tsp_batch):
    data = tmp_path / "tsp6.jsonl"
    ckpt = tmp_path / "tsp6.ckpt"
    write_jsonl(data, tsp_batch[:4])
    save_model(tiny_model("tsp"), ckpt)
    return str(data), str(ckpt)


def test_run_experiment_writes_all_files(tmp_path, experiment_inputs):
    data, ckpt = experiment_inputs
    out = tmp_path / "out"
    spec = ExperimentSpec(
        dataset=data, checkpoint=ckpt, sweep=tuple(parse_sweep("1:0,1:1")),
        seed=3, out_dir=str(out),
    )
    rows = run_experiment(spec)
    assert [r.method for r in rows] == ["oracle", "Ts1", "Ts1+Tg1"]
    for name in (
        "results.csv", "summary.txt", "summary.csv", "curve.csv", "config.txt",
        "reports-Ts1.jsonl", "reports-Ts1+Tg1.jsonl",
    ):
        assert (out / name).exists(), name
    # per-instance reports parse back and carry the full schema
    with open(out / "reports-Ts1.jsonl", encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh]
    assert len(records) == 4
    assert set(records[0]) == {
        "instance_id", "objective", "reference", "drop", "time_ms", "Ts", "Tg", "samples", "seed",
    }


def test_run_experiment_results_csv_is_byte_deterministic(tmp_path, experiment_inputs):
    data, ckpt = experiment_inputs
    blobs = []
    for sub in ("one", "two"):
        out = tmp_path / sub
        spec = ExperimentSpec(
            dataset=data, checkpoint=ckpt, sweep=tuple(parse_sweep("1:0,1:1")),
            seed=3, out_dir=str(out),
        )
        run_experiment(spec)
        blobs.append((out / "results.csv").read_bytes())
        # config echo is timing-free too; only its out_dir line may differ here
        config = (out / "config.txt").read_text(encoding="utf-8").splitlines()
        blobs.append([l for l in config if not l.startswith("out_dir=")])
    assert blobs[0] == blobs[2]
    assert blobs[1] == blobs[3]


def test_results_csv_drops_recompute_from_raw_columns(tmp_path, experiment_inputs):
    data, ckpt = experiment_inputs
    out = tmp_path / "out"
    spec = ExperimentSpec(
        dataset=data, checkpoint=ckpt, sweep=(SweepItem(1),), seed=3, out_dir=str(out),
    )
    run_experiment(spec)
    with open(out / "results.csv", encoding="utf-8") as fh:
        header = fh.readline().strip()
        assert header == "method,instance_id,objective,reference,drop"
        for line in fh:
            method, _, obj, ref, drop = line.strip().split(",")
            if method == "oracle" or not ref:
                continue
            expected = (float(obj) - float(ref)) / abs(float(ref))
            assert abs(float(drop) - expected) < 1e-12
