"""Four-level diagnostics over episode records.

Per tool call: effectiveness E_t (did the feasible count strictly drop)
and information gain IG_t (log-ratio of consecutive counts).  Per
episode: EffRate over all tool calls, interaction ratios against the
certified minimum k_star, and the insufficiency flag.  Per group: mean
columns in the published layout.  Invalid calls keep E_t = 0 and are
excluded from ig_mean; calls whose counts overflowed the cap are scored
from witnesses when decidable and flagged otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .core import ZebraSimError


class IncompleteRecord(ZebraSimError):
    pass


REPORT_COLUMNS = (
    "Insuf%",
    "Steps",
    "Acc",
    "TC",
    "SuccTC",
    "EffQ",
    "EffRate",
    "IG_μ",
    "IR",
    "IR_eff",
    "K*",
)


@dataclass(frozen=True)
class EpisodeMetrics:
    puzzle_id: str
    accuracy: int
    status: str
    steps: int
    tool_calls: int
    valid_calls: int
    effective_calls: int
    eff_rate: float
    eff_rate_valid: float
    ig_series: tuple
    ig_mean: float
    ir: float
    ir_eff: float
    k_star: int
    insufficient: bool
    undecided_calls: int
    log_base: str
    group_keys: dict = field(default_factory=dict)


def _log(value: float, base: str) -> float:
    return math.log2(value) if base == "2" else math.log(value)


def score_episode(record: dict, log_base: str = "e") -> EpisodeMetrics:
    """Compute per-episode metrics from a finished EpisodeRecord."""
    if log_base not in ("e", "2"):
        raise ValueError(f"log base must be 'e' or '2', got {log_base!r}")
    required = ("status", "k_star", "query_log", "steps", "tool_calls", "valid_calls", "accuracy")
    missing = [key for key in required if key not in record]
    if missing:
        raise IncompleteRecord(f"record lacks fields: {missing}")
    if record["status"] == "running":
        raise IncompleteRecord("episode is still running")

    k_star = record["k_star"]
    if k_star < 1:
        raise IncompleteRecord(f"k_star must be >= 1, got {k_star}")

    effective = 0
    undecided = 0
    ig_series = []
    for entry in record["query_log"]:
        if not entry["valid"]:
            continue  # E_t = 0 by definition; excluded from ig_mean
        before, after = entry["count_before"], entry["count_after"]
        if before is not None and after is not None:
            if after < before:
                effective += 1
                ig_series.append(_log(before, log_base) - _log(after, log_base))
            else:
                ig_series.append(0.0)
        elif before is None and after is not None:
            # The count fell from above the cap to an exact value: a
            # strict decrease, but the log-ratio is undefined, so the
            # call stays out of ig_mean.
            effective += 1
        else:
            # Both sides overflowed: neither E_t nor IG_t is decidable.
            undecided += 1

    tool_calls = record["tool_calls"]
    valid_calls = record["valid_calls"]
    eff_rate = effective / tool_calls if tool_calls else 0.0
    eff_rate_valid = effective / valid_calls if valid_calls else 0.0
    ig_mean = sum(ig_series) / len(ig_series) if ig_series else 0.0

    return EpisodeMetrics(
        puzzle_id=record.get("puzzle_id", ""),
        accuracy=record["accuracy"],
        status=record["status"],
        steps=record["steps"],
        tool_calls=tool_calls,
        valid_calls=valid_calls,
        effective_calls=effective,
        eff_rate=eff_rate,
        eff_rate_valid=eff_rate_valid,
        ig_series=tuple(ig_series),
        ig_mean=ig_mean,
        ir=tool_calls / k_star,
        ir_eff=effective / k_star,
        k_star=k_star,
        insufficient=valid_calls < k_star,
        undecided_calls=undecided,
        log_base=log_base,
        group_keys={
            "model": record.get("model") or record.get("agent") or "unknown",
            "agent": record.get("agent") or "unknown",
            "size": record.get("size", "unknown"),
            "n_missing": record.get("k_star"),
            "env_type": record.get("env_type", "normal"),
            "condition": _condition_label(record),
        },
    )


def _condition_label(record: dict) -> str:
    pricing = record.get("pricing") or {}
    if pricing.get("condition"):
        return pricing["condition"]
    if record.get("budget_condition"):
        return record["budget_condition"]
    if record.get("budget_limit") is not None:
        return f"budget={record['budget_limit']}"
    return "none"


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def aggregate(episodes, group_by=("size", "n_missing")) -> dict:
    """Group episode metrics and average the published columns per cell.

    Returns {"log_base", "group_by", "rows": [...]}; each row carries the
    key values, the column means, episode count n, ΔAcc (accuracy gap of
    sufficient minus insufficient episodes, None when one side is empty),
    and the secondary EffRateValid column.
    """
    episodes = list(episodes)
    if not episodes:
        raise ValueError("no episodes to aggregate")
    bases = {m.log_base for m in episodes}
    if len(bases) != 1:
        raise ValueError(f"episodes scored with mixed log bases: {sorted(bases)}")
    groups: dict = {}
    for m in episodes:
        key = tuple(m.group_keys.get(k, "unknown") for k in group_by)
        groups.setdefault(key, []).append(m)

    rows = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        cell = groups[key]
        sufficient = [m.accuracy for m in cell if not m.insufficient]
        insufficient = [m.accuracy for m in cell if m.insufficient]
        delta_acc = None
        if sufficient and insufficient:
            delta_acc = 100.0 * (_mean(sufficient) - _mean(insufficient))
        row = {name: value for name, value in zip(group_by, key)}
        row.update(
            {
                "n": len(cell),
                "Insuf%": 100.0 * _mean(m.insufficient for m in cell),
                "Steps": _mean(m.steps for m in cell),
                "Acc": 100.0 * _mean(m.accuracy for m in cell),
                "TC": _mean(m.tool_calls for m in cell),
                "SuccTC": _mean(m.valid_calls for m in cell),
                "EffQ": _mean(m.effective_calls for m in cell),
                "EffRate": _mean(m.eff_rate for m in cell),
                "IG_μ": _mean(m.ig_mean for m in cell),
                "IR": _mean(m.ir for m in cell),
                "IR_eff": _mean(m.ir_eff for m in cell),
                "K*": _mean(m.k_star for m in cell),
                "ΔAcc": delta_acc,
                "EffRateValid": _mean(m.eff_rate_valid for m in cell),
            }
        )
        rows.append(row)
    return {"log_base": episodes[0].log_base, "group_by": list(group_by), "rows": rows}


_FORMATS = {
    "Insuf%": "{:.1f}",
    "Steps": "{:.2f}",
    "Acc": "{:.1f}",
    "TC": "{:.2f}",
    "SuccTC": "{:.2f}",
    "EffQ": "{:.2f}",
    "EffRate": "{:.3f}",
    "IG_μ": "{:.3f}",
    "IR": "{:.2f}",
    "IR_eff": "{:.2f}",
    "K*": "{:.2f}",
    "EffRateValid": "{:.3f}",
}


def render_table(report: dict, delimiter: str = "\t") -> str:
    """Delimiter-separated table with the published column layout."""
    group_by = report["group_by"]
    header = list(group_by) + ["n"] + list(REPORT_COLUMNS) + ["ΔAcc", "EffRateValid"]
    lines = [delimiter.join(header), delimiter.join(["(log base " + report["log_base"] + ")"] + [""] * (len(header) - 1))]
    for row in report["rows"]:
        cells = [str(row[k]) for k in group_by] + [str(row["n"])]
        for column in REPORT_COLUMNS:
            cells.append(_FORMATS[column].format(row[column]))
        cells.append("--" if row["ΔAcc"] is None else "{:+.1f}".format(row["ΔAcc"]))
        cells.append(_FORMATS["EffRateValid"].format(row["EffRateValid"]))
        lines.append(delimiter.join(cells))
    return "\n".join(lines) + "\n"


def score_records_file(path, log_base: str = "e"):
    """Score every record in a JSONL file; malformed lines are reported."""
    episodes = []
    problems = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                episodes.append(score_episode(record, log_base=log_base))
            except (json.JSONDecodeError, IncompleteRecord, KeyError, TypeError) as exc:
                problems.append(f"{path}:{line_no}: {exc}")
    return episodes, problems
