"""Scoring of model replies against a QA shard.

A reply file is JSONL with one object per line: {"id": ..., "response": ...}.
Records without a reply are scored as wrong and counted as missing.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .parsing import ParseFailure, parse_response
from .types import SUPERTYPE, QARecord


@dataclass
class SliceStats:
    total: int = 0
    correct: int = 0
    parse_failures: int = 0
    missing: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    @property
    def parse_fail_rate(self) -> float:
        return self.parse_failures / self.total if self.total else 0.0

    def to_json_obj(self) -> dict:
        return {
            "total": self.total,
            "correct": self.correct,
            "accuracy": round(self.accuracy, 6),
            "parse_failures": self.parse_failures,
            "parse_fail_rate": round(self.parse_fail_rate, 6),
            "missing": self.missing,
        }


@dataclass
class ScoreReport:
    overall: SliceStats = field(default_factory=SliceStats)
    by_type: dict[str, SliceStats] = field(default_factory=dict)
    by_supertype: dict[str, SliceStats] = field(default_factory=dict)
    by_domain: dict[str, SliceStats] = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "overall": self.overall.to_json_obj(),
            "by_type": {k: v.to_json_obj() for k, v in sorted(self.by_type.items())},
            "by_supertype": {k: v.to_json_obj() for k, v in sorted(self.by_supertype.items())},
            "by_domain": {k: v.to_json_obj() for k, v in sorted(self.by_domain.items())},
        }


def load_replies(path: str | Path) -> dict[str, str]:
    """Read a reply JSONL file into {record id: raw response text}.

    Later lines win when an id repeats.
    """
    replies: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if not isinstance(obj, dict) or "id" not in obj or "response" not in obj:
                raise ValueError(f"reply line {lineno} needs 'id' and 'response' keys")
            replies[str(obj["id"])] = str(obj["response"])
    return replies


def score_records(records: list[QARecord], replies: dict[str, str]) -> ScoreReport:
    """Accuracy over the records, sliced by type, supertype, and domain.

    Every record counts toward the denominator: unanswered records and
    unparseable replies both score zero.
    """
    report = ScoreReport()

    def bucket(table: dict[str, SliceStats], key: str) -> SliceStats:
        if key not in table:
            table[key] = SliceStats()
        return table[key]

    for rec in records:
        slices = [
            report.overall,
            bucket(report.by_type, rec.qtype),
            bucket(report.by_supertype, SUPERTYPE[rec.qtype]),
            bucket(report.by_domain, rec.domain),
        ]
        raw = replies.get(rec.id)
        parsed: str | ParseFailure
        if raw is None:
            parsed = ParseFailure("no reply")
        else:
            parsed = parse_response(raw, rec.options)
        for s in slices:
            s.total += 1
            if raw is None:
                s.missing += 1
            elif isinstance(parsed, ParseFailure):
                s.parse_failures += 1
            if parsed == rec.answer:
                s.correct += 1
    return report
