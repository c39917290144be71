"""Report assembly, serialization and comparison-table rendering."""

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import ContractError
from ..metrics import CaseMetrics, RoundLog, dice_growth_per_point
from .manifest import ExperimentConfig

SCHEMA_VERSION = 1

CSV_COLUMNS = ("case_id", "dice", "nsd", "hd95", "salient_dice", "salient_nsd", "rounds_used")


def load_baselines(path: str | Path | None = None) -> dict:
    """Load the static reference-results file (the packaged copy by default)."""
    if path is None:
        text = resources.files("stackseg.bench").joinpath("baselines.json").read_text()
    else:
        text = Path(path).read_text()
    return json.loads(text)


@dataclass
class CaseResult:
    case_id: str
    status: str  # ok | partial | failed
    error: str | None = None
    axis: int | None = None
    center_slice: int | None = None
    metrics: CaseMetrics | None = None
    rounds: list[dict] = field(default_factory=list)
    provenance_gaps: int = 0
    seconds: float | None = None

    def to_dict(self) -> dict:
        metrics = None
        if self.metrics is not None:
            m = self.metrics
            metrics = {
                "dice": m.dice,
                "nsd": m.nsd,
                "hd95": m.hd95,
                "salient_dice": m.salient_dice,
                "salient_nsd": m.salient_nsd,
                "salient_fallback": m.salient_fallback,
            }
        return {
            "case_id": self.case_id,
            "status": self.status,
            "error": self.error,
            "axis": self.axis,
            "center_slice": self.center_slice,
            "metrics": metrics,
            "rounds": self.rounds,
            "rounds_used": len(self.rounds) if self.rounds else None,
            "provenance_gaps": self.provenance_gaps,
            "timing": {"seconds": self.seconds},
        }


@dataclass
class Report:
    config: ExperimentConfig
    cases: list[CaseResult]
    aggregate: dict | None
    baselines: dict

    def to_dict(self, include_timing: bool = False) -> dict:
        cases = []
        for c in self.cases:
            d = c.to_dict()
            if not include_timing:
                d.pop("timing")
            cases.append(d)
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "cases": cases,
            "aggregate": self.aggregate,
        }

    @property
    def ok_count(self) -> int:
        return sum(1 for c in self.cases if c.status == "ok")


def canonical_json(report: Report) -> str:
    """Deterministic serialization: stable key order, timing excluded."""
    return json.dumps(report.to_dict(include_timing=False), sort_keys=True, indent=2) + "\n"


def _fmt(v, digits=4) -> str:
    if v is None:
        return ""
    return f"{v:.{digits}f}"


def _csv_text(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for c in report.cases:
        m = c.metrics
        writer.writerow(
            [
                c.case_id,
                _fmt(m.dice) if m else "",
                _fmt(m.nsd) if m else "",
                _fmt(m.hd95) if m else "",
                _fmt(m.salient_dice) if m else "",
                _fmt(m.salient_nsd) if m else "",
                len(c.rounds) if c.rounds else "",
            ]
        )
    return buf.getvalue()


def delta_percent(ours: float, best: float) -> str:
    """(ours - best)/best * 100, two decimals, sign preserved."""
    return f"{(ours - best) / best * 100.0:.2f}"


def comparison_rows(rows: list[dict], table: dict) -> list[dict]:
    """Compute percent deltas against the best baseline value per column.

    ``rows`` is a list of {"method", "values"} aligned with table["columns"];
    the return value adds a "deltas" list of two-decimal percent strings.
    """
    columns = table["columns"]
    best = [
        max(entry["values"][i] for entry in table["baselines"])
        for i in range(len(columns))
    ]
    out = []
    for row in rows:
        values = row["values"]
        if len(values) != len(columns):
            raise ContractError(
                f"row {row.get('method')!r} has {len(values)} values for {len(columns)} columns"
            )
        out.append(
            {
                "method": row["method"],
                "values": list(values),
                "deltas": [delta_percent(v, b) for v, b in zip(values, best)],
            }
        )
    return out


def render_comparison_table(table: dict, extra_rows: list[dict] | None = None) -> str:
    """Markdown grid in the published layout: baseline rows, then each compared
    method followed by its delta-vs-best row."""
    columns = table["columns"]
    header = ["Method"] + [f"{c['task']} {c['metric'].upper()}" for c in columns]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for entry in table["baselines"]:
        cells = [entry["method"]] + [f"{v:.2f}" for v in entry["values"]]
        lines.append("| " + " | ".join(cells) + " |")
    rows = [dict(r) for r in table.get("reference_rows", [])]
    if extra_rows:
        rows.extend(extra_rows)
    for row in comparison_rows(rows, table):
        cells = [row["method"]] + [f"{v:.2f}" for v in row["values"]]
        lines.append("| " + " | ".join(cells) + " |")
        delta_cells = ["vs best"] + [f"{d}%" for d in row["deltas"]]
        lines.append("| " + " | ".join(delta_cells) + " |")
    return "\n".join(lines) + "\n"


def _markdown_text(report: Report) -> str:
    parts = ["# Benchmark report", ""]
    cfg = report.config
    parts.append(
        f"mode: **{cfg.mode}**"
        + (f" (k={cfg.clicks_k})" if cfg.mode == "clicks" else "")
        + f", propagator: **{cfg.propagator}**, nsd delta: {cfg.nsd_delta} mm, seed: {cfg.rng_seed}"
    )
    parts.append("")
    parts.append("| case | status | dice | nsd | hd95 (mm) | salient dice | salient nsd | rounds |")
    parts.append("|---|---|---|---|---|---|---|---|")
    for c in report.cases:
        m = c.metrics
        parts.append(
            "| "
            + " | ".join(
                [
                    c.case_id,
                    c.status,
                    _fmt(m.dice) if m else "",
                    _fmt(m.nsd) if m else "",
                    _fmt(m.hd95) if m else "",
                    _fmt(m.salient_dice) if m else "",
                    _fmt(m.salient_nsd) if m else "",
                    str(len(c.rounds)) if c.rounds else "",
                ]
            )
            + " |"
        )
    if report.aggregate:
        agg = report.aggregate
        parts.append("")
        parts.append(
            f"aggregate over {agg['n_cases']} case(s): "
            f"dice {_fmt(agg['dice'].get('mean'))} ± {_fmt(agg['dice'].get('std'))}, "
            f"nsd {_fmt(agg['nsd'].get('mean'))} ± {_fmt(agg['nsd'].get('std'))}"
            + (
                f", hd95 {_fmt(agg['hd95'].get('mean'))} mm ({agg['hd95']['excluded']} undefined)"
                if agg["hd95"].get("count")
                else ""
            )
        )
    for name, table in report.baselines.get("tables", {}).items():
        parts.append("")
        parts.append(f"## {table.get('title', name)}")
        parts.append("")
        parts.append(render_comparison_table(table))
    return "\n".join(parts) + "\n"


def emit_report(report: Report, fmt: str, path: str | Path) -> None:
    """Write the report as canonical json, csv, or markdown."""
    if fmt == "json":
        text = canonical_json(report)
    elif fmt == "csv":
        text = _csv_text(report)
    elif fmt in ("md", "markdown"):
        text = _markdown_text(report)
    else:
        raise ContractError(f"unknown report format {fmt!r}")
    Path(path).write_text(text)


def growth_report(report: Report, baselines: dict | None = None) -> dict:
    """Average dice growth per added point, per round, across clicks-mode
    cases; published interaction protocols ride along for side-by-side
    rendering."""
    if report.config.mode != "clicks":
        raise ContractError("growth_report needs a clicks-mode report")
    per_round: dict[int, list[float]] = {}
    for case in report.cases:
        if not case.rounds:
            continue
        log = RoundLog(tuple((r["points_added"], r["dice_after"]) for r in case.rounds))
        for i, g in enumerate(dice_growth_per_point(log)):
            per_round.setdefault(i + 1, []).append(g)
    rounds = sorted(per_round)
    data = baselines if baselines is not None else report.baselines
    return {
        "rounds": rounds,
        "mean_growth": [sum(per_round[r]) / len(per_round[r]) for r in rounds],
        "n_cases": [len(per_round[r]) for r in rounds],
        "protocols": data.get("interaction_protocols", {}),
    }
