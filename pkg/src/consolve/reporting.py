"""Evaluation sweeps and report tables.

An evaluation run takes a trained model, a (possibly labeled) instance
file, and a sweep of solve settings; it solves every instance under
every setting and writes:

- ``results.csv``    per-instance objectives and drops (no timing, so
                     bytes reproduce exactly under fixed seeds)
- ``reports-<method>.jsonl``  full per-instance solve reports, timing included
- ``summary.csv`` / ``summary.txt``  the aggregate table (machine / aligned text)
- ``curve.csv``      two columns (time, drop) per sweep setting, plot-ready
- ``config.txt``     flat key=value echo of the resolved run settings

Objectives follow the minimization convention everywhere in memory
(independent-set objectives are negated sizes); tables display sets by
their size with a "Size^" header instead.
"""

from __future__ import annotations

import os
import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .errors import ContractError, DataError
from .instances import LabeledSample, read_jsonl
from .checkpoint import load_model
from .network import Model
from .solver import SamplerConfig, SearchConfig, SolveReport, solve

TSP_HEADERS = ("Method", "Length↓", "Drop↓", "Time↓")
MIS_HEADERS = ("Method", "Size↑", "Drop↓", "Time↓")
CSV_HEADER = "method,objective,drop_pct,time"
MISSING = "—"


@dataclass(frozen=True)
class SweepItem:
    """One solve setting: sampling steps, search steps, chains, 2-opt."""

    sample_steps: int = 1
    search_steps: int = 0
    parallel_samples: int = 1
    use_two_opt: bool = False

    def __post_init__(self):
        if self.sample_steps < 1 or self.search_steps < 0 or self.parallel_samples < 1:
            raise ContractError(f"invalid sweep item {self}")

    @property
    def method(self) -> str:
        label = f"Ts{self.sample_steps}"
        if self.search_steps > 0:
            label += f"+Tg{self.search_steps}"
        if self.parallel_samples > 1:
            label += f"x{self.parallel_samples}"
        if self.use_two_opt:
            label += "+2opt"
        return label


def parse_sweep(text: str) -> List[SweepItem]:
    """Parse "ts:tg[:samples[:two_opt]]" items separated by commas.

    Example: "1:0,1:1,3:3:4:1" — the last item uses 4 parallel chains
    with 2-opt enabled.
    """
    items: List[SweepItem] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if not 1 <= len(parts) <= 4:
            raise DataError(f"sweep item {chunk!r} is not ts:tg[:samples[:two_opt]]")
        try:
            nums = [int(p) for p in parts]
        except ValueError as err:
            raise DataError(f"sweep item {chunk!r}: {err}") from None
        nums += [0, 1, 0][len(nums) - 1 :]
        items.append(
            SweepItem(
                sample_steps=nums[0],
                search_steps=nums[1],
                parallel_samples=nums[2],
                use_two_opt=bool(nums[3]),
            )
        )
    if not items:
        raise DataError("sweep is empty")
    return items


@dataclass(frozen=True)
class ResultRow:
    """Aggregate of one method over an instance set, plus raw records."""

    method: str
    kind: str
    mean_objective: float
    mean_drop: Optional[float]
    total_time_s: Optional[float]
    records: Tuple[SolveReport, ...] = ()

    @classmethod
    def from_reports(cls, method: str, kind: str, reports: Sequence[SolveReport]) -> "ResultRow":
        if not reports:
            raise ContractError("cannot aggregate zero reports")
        drops = [r.drop for r in reports]
        mean_drop = None if any(d is None for d in drops) else sum(drops) / len(drops)
        return cls(
            method=method,
            kind=kind,
            mean_objective=sum(r.objective for r in reports) / len(reports),
            mean_drop=mean_drop,
            total_time_s=sum(r.time_ms for r in reports) / 1000.0,
            records=tuple(reports),
        )

    @property
    def display_objective(self) -> float:
        """Objective as tables show it: tour length, or set size (positive)."""
        return -self.mean_objective if self.kind == "mis" else self.mean_objective


def _fmt_drop(drop: Optional[float]) -> str:
    return MISSING if drop is None else f"{100.0 * drop:.2f}%"


def _fmt_time(seconds: Optional[float]) -> str:
    return MISSING if seconds is None else f"{seconds:.2f}s"


def make_table(rows: Sequence[ResultRow]) -> Tuple[str, str]:
    """Aligned text table and machine CSV for a homogeneous row list.

    Columns: method, mean objective (set size shown positive), mean drop
    as a two-decimal percentage, total solve wall time.  Missing values
    render as an em dash.
    """
    rows = list(rows)
    if not rows:
        raise ContractError("table needs at least one row")
    if len({r.kind for r in rows}) != 1:
        raise ContractError("table rows must share one problem kind")
    headers = MIS_HEADERS if rows[0].kind == "mis" else TSP_HEADERS
    cells = [
        (r.method, f"{r.display_objective:.2f}", _fmt_drop(r.mean_drop), _fmt_time(r.total_time_s))
        for r in rows
    ]
    widths = [max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    text = "\n".join(lines) + "\n"
    csv_lines = [CSV_HEADER] + [",".join(row) for row in cells]
    csv_text = "\n".join(csv_lines) + "\n"
    return text, csv_text


@dataclass(frozen=True)
class ExperimentSpec:
    """A full evaluation run: data, model, sweep, seed, output directory."""

    dataset: str
    checkpoint: str
    sweep: Tuple[SweepItem, ...]
    seed: int
    out_dir: str

    def __post_init__(self):
        if not self.sweep:
            raise ContractError("sweep must be nonempty")
        for path, what in ((self.dataset, "dataset"), (self.checkpoint, "checkpoint")):
            if not os.path.exists(path):
                raise DataError(f"{what} file not found: {path}")


def evaluate(
    model: Model,
    samples: Sequence[LabeledSample],
    sweep: Sequence[SweepItem],
    seed: int,
    include_reference: bool = True,
) -> List[ResultRow]:
    """Solve every instance under every sweep setting; aggregate per setting.

    Instances are processed in ascending id order so aggregates and
    emitted files are order-deterministic.  A reference row (exact
    objectives, zero drop, no timing) is prepended when every sample
    carries a solution.
    """
    samples = sorted(samples, key=lambda s: s.instance.id)
    if not samples:
        raise ContractError("evaluation needs at least one instance")
    kind = samples[0].instance.kind
    rows: List[ResultRow] = []
    have_refs = all(s.solution is not None for s in samples)
    if include_reference and have_refs:
        ref_mean = sum(s.solution.objective for s in samples) / len(samples)
        rows.append(
            ResultRow(
                method="oracle",
                kind=kind,
                mean_objective=ref_mean,
                mean_drop=0.0,
                total_time_s=None,
            )
        )
    for item in sweep:
        reports = [
            solve(
                model,
                s.instance,
                sampler_cfg=SamplerConfig(steps=item.sample_steps, seed=seed),
                search_cfg=SearchConfig(steps=item.search_steps),
                use_two_opt=item.use_two_opt,
                parallel_samples=item.parallel_samples,
                reference=None if s.solution is None else s.solution.objective,
            )
            for s in samples
        ]
        rows.append(ResultRow.from_reports(item.method, kind, reports))
    return rows


def _float_cell(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def write_results_csv(rows: Sequence[ResultRow], path) -> None:
    """Per-instance records without timing: byte-stable under fixed seeds."""
    lines = ["method,instance_id,objective,reference,drop"]
    for row in rows:
        for rec in row.records:
            lines.append(
                ",".join(
                    (
                        row.method,
                        rec.instance_id,
                        _float_cell(rec.objective),
                        _float_cell(rec.reference),
                        _float_cell(rec.drop),
                    )
                )
            )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_curve_csv(rows: Sequence[ResultRow], path) -> None:
    """Plot-ready (time, drop) pairs, one per timed row with a known drop."""
    lines = ["time,drop"]
    for row in rows:
        if row.total_time_s is None or row.mean_drop is None:
            continue
        lines.append(f"{repr(row.total_time_s)},{repr(row.mean_drop)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_reports_jsonl(row: ResultRow, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in row.records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


def write_config_echo(pairs: dict, path) -> None:
    """Flat key=value echo of the resolved run settings."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(pairs):
            fh.write(f"{key}={pairs[key]}\n")


def run_experiment(spec: ExperimentSpec) -> List[ResultRow]:
    """Load data and model, run the sweep, write all output files."""
    samples = read_jsonl(spec.dataset)
    model = load_model(spec.checkpoint)
    rows = evaluate(model, samples, spec.sweep, spec.seed)
    os.makedirs(spec.out_dir, exist_ok=True)
    write_results_csv(rows, os.path.join(spec.out_dir, "results.csv"))
    text, csv_text = make_table(rows)
    with open(os.path.join(spec.out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(os.path.join(spec.out_dir, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    write_curve_csv(rows, os.path.join(spec.out_dir, "curve.csv"))
    for row in rows:
        if row.records:
            write_reports_jsonl(row, os.path.join(spec.out_dir, f"reports-{row.method}.jsonl"))
    write_config_echo(
        {
            "dataset": spec.dataset,
            "checkpoint": spec.checkpoint,
            "seed": spec.seed,
            "sweep": ",".join(
                f"{i.sample_steps}:{i.search_steps}:{i.parallel_samples}:{int(i.use_two_opt)}"
                for i in spec.sweep
            ),
            "out_dir": spec.out_dir,
            "model.kind": model.config.kind,
            "model.n_layers": model.config.n_layers,
            "model.hidden_dim": model.config.hidden_dim,
            "model.time_dim": model.config.time_dim,
            "model.norm": model.config.norm,
            "model.horizon": model.schedule.T,
        },
        os.path.join(spec.out_dir, "config.txt"),
    )
    return rows
