"""Benchmark loading and evaluation-record persistence.

Benchmark files are UTF-8 JSON lines, one problem per line; the records file
is UTF-8 JSON lines, one scored response per line, with an explicit schema
version. Users supply benchmark files; the shipped registry maps the common
benchmark names to their source field names and answer kind.
"""

from __future__ import annotations

import io
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .judge import AnswerKind, Judgment
from .prompts import PromptStrategy
from .traces import FormatReport

SCHEMA_VERSION = 1


class DatasetError(Exception):
    """Base class for dataset and record-file failures."""


class MalformedLine(DatasetError):
    def __init__(self, path, line_no: int, detail: str):
        super().__init__(f"{path}:{line_no}: malformed line: {detail}")
        self.line_no = line_no


class MissingField(DatasetError):
    def __init__(self, path, line_no: int, key: str):
        super().__init__(f"{path}:{line_no}: missing field {key!r}")
        self.line_no = line_no
        self.key = key


class DuplicateId(DatasetError):
    def __init__(self, path, line_no: int, problem_id: str):
        super().__init__(f"{path}:{line_no}: duplicate problem id {problem_id!r}")
        self.line_no = line_no
        self.problem_id = problem_id


class IoFailure(DatasetError):
    pass


class SchemaMismatch(DatasetError):
    def __init__(self, path, line_no: int, detail: str):
        super().__init__(f"{path}:{line_no}: {detail}")
        self.line_no = line_no


@dataclass(frozen=True)
class Problem:
    """One benchmark item."""

    id: str
    benchmark: str
    statement: str
    gold_answer: str
    kind: AnswerKind


@dataclass(frozen=True)
class FieldMap:
    """Names of the source keys carrying the statement and gold answer."""

    statement: str
    answer: str
    id: Optional[str] = None


@dataclass(frozen=True)
class BenchmarkSpec:
    field_map: FieldMap
    kind: AnswerKind


def load_registry(path: Optional[str | Path] = None) -> dict:
    """Benchmark name -> BenchmarkSpec, from ``path`` or the packaged default."""
    if path is None:
        text = resources.files("hicot").joinpath("data", "benchmarks.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    raw = json.loads(text)
    registry = {}
    for name, entry in raw.items():
        registry[name] = BenchmarkSpec(
            field_map=FieldMap(
                statement=entry["statement_field"],
                answer=entry["answer_field"],
                id=entry.get("id_field"),
            ),
            kind=AnswerKind(entry.get("kind", "math_expression")),
        )
    return registry


def load_dataset(
    path: str | Path,
    benchmark: str,
    field_map: FieldMap,
    kind: AnswerKind,
) -> list:
    """Parse a JSON-lines benchmark file into Problems, preserving file order.

    Ids come from ``field_map.id`` when named and present, else are assigned
    sequentially from 1. Blank lines are skipped. Raises MalformedLine,
    MissingField, or DuplicateId with the offending line number.
    """
    problems = []
    seen_ids = set()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot open dataset {path}: {exc}") from exc
    with fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except ValueError as exc:
                raise MalformedLine(path, line_no, str(exc)) from exc
            if not isinstance(row, dict):
                raise MalformedLine(path, line_no, "expected a JSON object")

            statement = _required(row, field_map.statement, path, line_no)
            answer = _required(row, field_map.answer, path, line_no)
            if field_map.id and field_map.id in row:
                problem_id = str(row[field_map.id])
            else:
                problem_id = str(len(problems) + 1)
            if not problem_id:
                raise MalformedLine(path, line_no, "empty problem id")
            if problem_id in seen_ids:
                raise DuplicateId(path, line_no, problem_id)
            seen_ids.add(problem_id)
            problems.append(
                Problem(
                    id=problem_id,
                    benchmark=benchmark,
                    statement=statement,
                    gold_answer=answer,
                    kind=kind,
                )
            )
    return problems


def _required(row: dict, key: str, path, line_no: int) -> str:
    if key not in row:
        raise MissingField(path, line_no, key)
    value = str(row[key])
    if not value.strip():
        raise MalformedLine(path, line_no, f"field {key!r} is empty")
    return value


@dataclass(frozen=True)
class EvalRecord:
    """One scored model response to one benchmark problem.

    Exactly one record per (problem_id, benchmark, model_id, strategy) may
    exist in a run output; ``client_error`` is set (and the judgment is a
    no-answer miss) when the completion could not be obtained.
    """

    problem_id: str
    benchmark: str
    model_id: str
    strategy: PromptStrategy
    completion_text: str
    completion_tokens: int
    token_source: str
    judgment: Judgment
    format_report: FormatReport
    compliant: bool
    timestamp: str = ""
    client_error: Optional[str] = None
    schema_version: int = SCHEMA_VERSION

    def key(self) -> tuple:
        return (self.problem_id, self.benchmark, self.model_id, self.strategy.value)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "problem_id": self.problem_id,
            "benchmark": self.benchmark,
            "model_id": self.model_id,
            "strategy": self.strategy.value,
            "completion_text": self.completion_text,
            "completion_tokens": self.completion_tokens,
            "token_source": self.token_source,
            "judgment": self.judgment.to_dict(),
            "format_report": {
                "alternation_ok": self.format_report.alternation_ok,
                "step_alignment_ok": self.format_report.step_alignment_ok,
                "boxed_present": self.format_report.boxed_present,
                "compliant": self.format_report.compliant,
                "instruction_count": self.format_report.instruction_count,
                "execution_count": self.format_report.execution_count,
            },
            "compliant": self.compliant,
            "timestamp": self.timestamp,
            "client_error": self.client_error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalRecord":
        report = data["format_report"]
        return cls(
            problem_id=data["problem_id"],
            benchmark=data["benchmark"],
            model_id=data["model_id"],
            strategy=PromptStrategy(data["strategy"]),
            completion_text=data["completion_text"],
            completion_tokens=data["completion_tokens"],
            token_source=data["token_source"],
            judgment=Judgment.from_dict(data["judgment"]),
            format_report=FormatReport(
                alternation_ok=report["alternation_ok"],
                step_alignment_ok=report["step_alignment_ok"],
                boxed_present=report["boxed_present"],
                compliant=report["compliant"],
                instruction_count=report.get("instruction_count", 0),
                execution_count=report.get("execution_count", 0),
            ),
            compliant=data["compliant"],
            timestamp=data.get("timestamp", ""),
            client_error=data.get("client_error"),
            schema_version=data["schema_version"],
        )


def now_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _record_line(record: EvalRecord) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True)


def _parse_record_line(line: str, path, line_no: int) -> EvalRecord:
    try:
        data = json.loads(line)
    except ValueError as exc:
        raise SchemaMismatch(path, line_no, f"corrupted record line: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaMismatch(path, line_no, "record line is not a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaMismatch(path, line_no, f"unknown record version {version!r}")
    try:
        return EvalRecord.from_dict(data)
    except (KeyError, ValueError) as exc:
        raise SchemaMismatch(path, line_no, f"bad record: {exc}") from exc


def write_records(records: Iterable[EvalRecord], path: str | Path) -> None:
    """Write records as JSON lines (overwrites ``path``)."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(_record_line(record) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write records to {path}: {exc}") from exc


def read_records(path: str | Path) -> list:
    """Read a records file strictly; any corrupt line raises SchemaMismatch."""
    records = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read records from {path}: {exc}") from exc
    with fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            records.append(_parse_record_line(line, path, line_no))
    return records


def load_resumable(path: str | Path) -> list:
    """Read records for resume, repairing a torn final line.

    A run killed mid-append can leave one incomplete line at the end of the
    file; that record was not durably written, so it is dropped and the file
    is truncated back to the last complete line. Corruption anywhere else
    still raises SchemaMismatch.
    """
    path = Path(path)
    if not path.exists():
        return []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read records from {path}: {exc}") from exc

    records = []
    offset = 0
    for line_no, line in enumerate(io.StringIO(text), start=1):
        stripped = line.strip()
        if stripped:
            try:
                records.append(_parse_record_line(stripped, path, line_no))
            except SchemaMismatch:
                if offset + len(line) >= len(text) and not line.endswith("\n"):
                    # Torn tail from an interrupted append: truncate it away.
                    with open(path, "r+", encoding="utf-8") as fh:
                        fh.seek(0)
                        fh.write(text[:offset])
                        fh.truncate()
                    return records
                raise
        offset += len(line)
    return records


class RecordWriter:
    """Append-only records writer; safe for use from many worker threads."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        try:
            self._fh = open(self.path, "a", encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot open records file {path}: {exc}") from exc

    def append(self, record: EvalRecord) -> None:
        line = _record_line(record) + "\n"
        with self._lock:
            self._fh.write(line)
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        with self._lock:
            self._fh.close()

    def __enter__(self) -> "RecordWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
