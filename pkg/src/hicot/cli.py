"""Command-line entry points: run, score, report, validate.

Progress and diagnostics go to standard error; machine-readable results go
to files or standard output, so output can be piped. Exit codes: 0 success,
1 validation failure (non-compliant trace), 2 invalid configuration or
usage, 3 file/schema errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .client import (
    ChatClient,
    ClientError,
    CompletionRequest,
    SamplingParams,
    TokenSource,
)
from .datasets import (
    BenchmarkSpec,
    DatasetError,
    EvalRecord,
    FieldMap,
    Problem,
    RecordWriter,
    load_dataset,
    load_registry,
    load_resumable,
    now_timestamp,
    read_records,
)
from .judge import AnswerKind, judge as judge_completion
from .metrics import (
    DuplicateKey,
    PlotKind,
    TableFormat,
    aggregate,
    emit_plot_data,
    emit_table,
    macro_average,
)
from .prompts import PromptStrategy, build_prompt
from .traces import (
    DEFAULT_THINK_CLOSE,
    DEFAULT_THINK_OPEN,
    FormatReport,
    compliance_mode,
    scan_blocks,
    validate_format,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_IO = 3


class ConfigInvalid(Exception):
    """Run configuration is missing, malformed, or inconsistent."""


@dataclass
class ModelOverride:
    prompt_as_system: bool = False
    sampling: Optional[SamplingParams] = None
    extra_body: Optional[dict] = None


@dataclass
class RunConfig:
    base_url: str
    models: list
    strategies: list
    benchmarks: dict  # name -> (path, BenchmarkSpec)
    output_dir: Path
    cache_dir: Path
    sampling: SamplingParams = field(default_factory=SamplingParams)
    concurrency: int = 4
    api_key_env: Optional[str] = None
    timeout_s: float = 120.0
    max_attempts: int = 4
    backoff_base_s: float = 0.5
    think_open: str = DEFAULT_THINK_OPEN
    think_close: str = DEFAULT_THINK_CLOSE
    model_overrides: dict = field(default_factory=dict)

    @property
    def records_path(self) -> Path:
        return self.output_dir / "records.jsonl"


def _sampling_from(data: dict, base: SamplingParams) -> SamplingParams:
    return SamplingParams(
        temperature=data.get("temperature", base.temperature),
        top_p=data.get("top_p", base.top_p),
        max_tokens=data.get("max_tokens", base.max_tokens),
        seed=data.get("seed", base.seed),
    )


def load_run_config(path: str | Path) -> RunConfig:
    """Parse and validate a run configuration file (JSON)."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigInvalid(f"config {path} is not valid JSON: {exc}") from exc

    endpoint = raw.get("endpoint") or {}
    base_url = endpoint.get("base_url")
    if not base_url:
        raise ConfigInvalid("endpoint.base_url is required")

    models = raw.get("models") or []
    if not models:
        raise ConfigInvalid("at least one model is required")

    try:
        strategies = [PromptStrategy.parse(s) for s in raw.get("strategies") or []]
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from exc
    if not strategies:
        raise ConfigInvalid("at least one strategy is required")

    registry = load_registry(raw["registry"]) if raw.get("registry") else load_registry()

    benchmarks = {}
    for name, entry in (raw.get("benchmarks") or {}).items():
        if isinstance(entry, str):
            dataset_path = entry
            spec = registry.get(name)
            if spec is None:
                spec = BenchmarkSpec(
                    field_map=FieldMap(statement="problem", answer="answer"),
                    kind=AnswerKind.MATH_EXPRESSION,
                )
        else:
            dataset_path = entry.get("path")
            base_spec = registry.get(name)
            spec = BenchmarkSpec(
                field_map=FieldMap(
                    statement=entry.get(
                        "statement_field",
                        base_spec.field_map.statement if base_spec else "problem",
                    ),
                    answer=entry.get(
                        "answer_field", base_spec.field_map.answer if base_spec else "answer"
                    ),
                    id=entry.get("id_field", base_spec.field_map.id if base_spec else None),
                ),
                kind=AnswerKind(
                    entry.get("kind", (base_spec.kind if base_spec else AnswerKind.MATH_EXPRESSION).value)
                ),
            )
        if not dataset_path:
            raise ConfigInvalid(f"benchmark {name!r} has no dataset path")
        if not Path(dataset_path).exists():
            raise ConfigInvalid(f"dataset for benchmark {name!r} not found: {dataset_path}")
        benchmarks[name] = (Path(dataset_path), spec)
    if not benchmarks:
        raise ConfigInvalid("at least one benchmark is required")

    output_dir = Path(raw.get("output_dir") or "run_output")
    cache_dir = Path(raw.get("cache_dir") or output_dir / "cache")
    sampling = _sampling_from(raw.get("sampling") or {}, SamplingParams())

    concurrency = raw.get("concurrency", 4)
    if not isinstance(concurrency, int) or concurrency < 1:
        raise ConfigInvalid("concurrency must be a positive integer")

    think = raw.get("think_tags") or [DEFAULT_THINK_OPEN, DEFAULT_THINK_CLOSE]
    if len(think) != 2:
        raise ConfigInvalid("think_tags must be a [open, close] pair")

    overrides = {}
    for model_id, entry in (raw.get("model_overrides") or {}).items():
        overrides[model_id] = ModelOverride(
            prompt_as_system=entry.get("prompt_as_system", False),
            sampling=_sampling_from(entry["sampling"], sampling) if "sampling" in entry else None,
            extra_body=entry.get("extra_body"),
        )

    return RunConfig(
        base_url=base_url,
        models=list(models),
        strategies=strategies,
        benchmarks=benchmarks,
        output_dir=output_dir,
        cache_dir=cache_dir,
        sampling=sampling,
        concurrency=concurrency,
        api_key_env=endpoint.get("api_key_env"),
        timeout_s=endpoint.get("timeout_s", 120.0),
        max_attempts=endpoint.get("max_attempts", 4),
        backoff_base_s=endpoint.get("backoff_base_s", 0.5),
        think_open=think[0],
        think_close=think[1],
        model_overrides=overrides,
    )


def _progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def _evaluate_one(
    config: RunConfig,
    client: ChatClient,
    model_id: str,
    strategy: PromptStrategy,
    problem: Problem,
) -> EvalRecord:
    override = config.model_overrides.get(model_id, ModelOverride())
    bundle = build_prompt(strategy, problem)
    request = CompletionRequest(
        model_id=model_id,
        prompt=bundle,
        sampling=override.sampling or config.sampling,
        as_system=override.prompt_as_system,
        extra_body=override.extra_body,
    )

    client_error = None
    try:
        result = client.complete(request)
        text = result.text
        tokens = result.completion_tokens
        token_source = result.token_source.value
    except ClientError as exc:
        client_error = f"{type(exc).__name__}: {exc}"
        text = ""
        tokens = 0
        token_source = TokenSource.APPROXIMATE.value

    trace = scan_blocks(text, config.think_open, config.think_close)
    report = validate_format(trace)
    return EvalRecord(
        problem_id=problem.id,
        benchmark=problem.benchmark,
        model_id=model_id,
        strategy=strategy,
        completion_text=text,
        completion_tokens=tokens,
        token_source=token_source,
        judgment=judge_completion(text, problem),
        format_report=report,
        compliant=compliance_mode(strategy, report),
        timestamp=now_timestamp(),
        client_error=client_error,
    )


def cmd_run(config: RunConfig) -> Path:
    """Run the (model x strategy x benchmark x problem) grid, resume-safe.

    Existing records (matched by their uniqueness key) are skipped, so an
    interrupted run picks up where it stopped. Per-item client failures are
    recorded as incorrect rather than aborting the grid.
    """
    problems = {
        name: load_dataset(path, name, spec.field_map, spec.kind)
        for name, (path, spec) in config.benchmarks.items()
    }

    config.output_dir.mkdir(parents=True, exist_ok=True)
    existing = {record.key() for record in load_resumable(config.records_path)}

    tasks = []
    for model_id in config.models:
        for strategy in config.strategies:
            for benchmark in config.benchmarks:
                for problem in problems[benchmark]:
                    key = (problem.id, benchmark, model_id, strategy.value)
                    if key not in existing:
                        tasks.append((model_id, strategy, problem))

    total = len(tasks)
    _progress(
        f"run grid: {len(config.models)} models x {len(config.strategies)} strategies x "
        f"{sum(len(p) for p in problems.values())} problems; "
        f"{len(existing)} records resumed, {total} to do"
    )

    client = ChatClient(
        base_url=config.base_url,
        cache_dir=config.cache_dir,
        api_key=os.environ.get(config.api_key_env) if config.api_key_env else None,
        concurrency=config.concurrency,
        max_attempts=config.max_attempts,
        backoff_base_s=config.backoff_base_s,
        timeout_s=config.timeout_s,
    )

    done = 0
    with RecordWriter(config.records_path) as writer:
        if tasks:
            with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
                futures = [
                    pool.submit(_evaluate_one, config, client, model_id, strategy, problem)
                    for model_id, strategy, problem in tasks
                ]
                for future in futures:
                    record = future.result()
                    writer.append(record)
                    done += 1
                    if done % 10 == 0 or done == total:
                        _progress(f"progress: {done}/{total}")

    all_records = read_records(config.records_path)
    for summary in aggregate(all_records):
        conditional = (
            "-"
            if summary.conditional_pass_at_1 is None
            else f"{summary.conditional_pass_at_1:.1f}"
        )
        _progress(
            f"cell model={summary.model_id} strategy={summary.strategy.value} "
            f"benchmark={summary.benchmark} n={summary.n} "
            f"pass@1={summary.pass_at_1:.1f} compliance={summary.compliance_rate:.1f} "
            f"conditional={conditional}"
        )
    return config.records_path


def cmd_score(records_path: str | Path) -> dict:
    """Aggregate a records file and return the summary payload."""
    records = read_records(records_path)
    summaries = aggregate(records)
    macro = macro_average(summaries)
    return {
        "summaries": [s.to_dict() for s in summaries],
        "macro": [m.to_dict() for m in macro],
    }


_TABLE_SUFFIX = {
    TableFormat.MARKDOWN: "md",
    TableFormat.CSV: "csv",
    TableFormat.JSON: "json",
}


def cmd_report(records_path: str | Path, fmt: TableFormat, output_dir: str | Path) -> list:
    """Write the accuracy table and plot-data files; returns written paths."""
    records = read_records(records_path)
    summaries = aggregate(records)
    macro = macro_average(summaries)

    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = []

    table_path = output_dir / f"table_accuracy.{_TABLE_SUFFIX[fmt]}"
    table_path.write_text(emit_table(summaries, macro, fmt), encoding="utf-8")
    written.append(table_path)

    tokens_path = output_dir / "plot_tokens.csv"
    tokens_path.write_text(
        emit_plot_data(summaries, PlotKind.AVG_TOKENS_BY_BENCHMARK), encoding="utf-8"
    )
    written.append(tokens_path)

    conditional_path = output_dir / "plot_format_conditional.csv"
    conditional_path.write_text(
        emit_plot_data(summaries, PlotKind.FORMAT_CONDITIONAL), encoding="utf-8"
    )
    written.append(conditional_path)
    return written


def cmd_validate(text: str, think_open: str, think_close: str) -> FormatReport:
    trace = scan_blocks(text, think_open, think_close)
    return validate_format(trace)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hicot",
        description="Prompting and evaluation harness for hierarchical reasoning traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the evaluation grid from a config file")
    run.add_argument("--config", required=True, help="path to the run config (JSON)")

    score = sub.add_parser("score", help="aggregate a records file to summaries")
    score.add_argument("records", help="path to a records JSONL file")

    report = sub.add_parser("report", help="emit the accuracy table and plot data")
    report.add_argument("records", help="path to a records JSONL file")
    report.add_argument("--format", choices=["md", "csv", "json"], default="md")
    report.add_argument("--output-dir", default=None, help="defaults to the records directory")

    validate = sub.add_parser("validate", help="validate one completion (file or stdin)")
    validate.add_argument("file", nargs="?", help="completion text file; stdin when omitted")
    validate.add_argument("--think-open", default=DEFAULT_THINK_OPEN)
    validate.add_argument("--think-close", default=DEFAULT_THINK_CLOSE)

    return parser


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK

    try:
        if args.command == "run":
            config = load_run_config(args.config)
            records_path = cmd_run(config)
            print(records_path)
            return EXIT_OK

        if args.command == "score":
            payload = cmd_score(args.records)
            print(json.dumps(payload, indent=2, sort_keys=True))
            return EXIT_OK

        if args.command == "report":
            fmt = TableFormat(args.format)
            output_dir = args.output_dir or Path(args.records).parent
            for path in cmd_report(args.records, fmt, output_dir):
                print(path)
            return EXIT_OK

        if args.command == "validate":
            if args.file:
                try:
                    text = Path(args.file).read_text(encoding="utf-8")
                except OSError as exc:
                    print(f"error: {exc}", file=sys.stderr)
                    return EXIT_IO
            else:
                text = sys.stdin.read()
            report = cmd_validate(text, args.think_open, args.think_close)
            print(json.dumps(report.as_json_dict()))
            return EXIT_OK if report.compliant else EXIT_VALIDATION

    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, DuplicateKey, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # e.g. reporting over an empty records file
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    parser.error(f"unknown command {args.command!r}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
