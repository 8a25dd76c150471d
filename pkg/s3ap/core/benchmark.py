# benchmark.py
"""
Benchmark harness: dataset loading, QA prompt assembly with and without the
structured trajectory as extra information, answer scoring and run reports.

Datasets are JSONL files in one of two formats:
- S3apSynthetic: lines written by `generate_corpus`, each carrying the oracle
  scenario the question was asked about.
- GenericJsonl: {context_id, context, question, ...} with one answer form,
  see `GenericLine`. Adapters for other benchmarks convert into this format.
"""

import hashlib
import logging
import re
import string
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from s3ap.config import DEFAULT_MAX_RETRIES, DEFAULT_PARALLELISM
from s3ap.core import S3apError, Trajectory
from s3ap.core.belief_oracle import (
    OracleScenario,
    ScenarioParams,
    dump_scenario,
    generate_questions,
    generate_scenario,
    ground_truth_trajectory,
    has_false_belief,
    parse_question,
    query_belief,
    scenario_from_trajectory,
    simulate,
)
from s3ap.core.file_handling import FileHandler, FileHandlerError
from s3ap.core.input_validation import GenericLine, ScenarioParamsInput, SyntheticLine, ValidationError
from s3ap.core.llm_backend import CompletionBackend, CompletionRequest, OracleBackedBackend, ResponseCache
from s3ap.core.narrative_parser import ParseTask, parse_narrative, reference_parse
from s3ap.core.narrative_templates import render_narrative
from s3ap.core.prompt_templates import DEFAULT_VERSION, get_prompt_template
from s3ap.core.step_schema import TRAJECTORY_SUFFIX, WireForm, decode_trajectory, encode_steps, write_trajectory

logger = logging.getLogger(__name__)

QA_TEMPLATE = "answer_question"
NO_EXTRA_INFO = "(none)"
OPTION_LETTERS = string.ascii_uppercase
REPORT_JSON = "report.json"
REPORT_MD = "report.md"
CORPUS_QA = "qa.jsonl"
CORPUS_MANIFEST = "manifest.json"
SEED_STRIDE = 100_000


class DatasetFormatError(S3apError):
    """Raised when a dataset line cannot be turned into a QA item."""

    def __init__(self, message, line=None, path=None):
        super().__init__(message)
        self.line = line
        self.path = path

    def __str__(self):
        return f"{self.args[0]} (File: {self.path}, Line: {self.line})"


class MissingGroupError(S3apError):
    """Raised when All-Qs is asked for records without a group id."""

    def __init__(self, message, question_ids: Sequence[str] = ()):
        super().__init__(message)
        self.question_ids = list(question_ids)

    def __str__(self):
        shown = ", ".join(self.question_ids[:5])
        return f"{self.args[0]} (Questions: {shown}{', ...' if len(self.question_ids) > 5 else ''})"


class DatasetFormat(str, Enum):
    S3AP_SYNTHETIC = "S3apSynthetic"
    GENERIC_JSONL = "GenericJsonl"


class Condition(str, Enum):
    BASELINE = "Baseline"
    WITH_S3AP = "WithS3ap"


# ---------------------------------------------------------------- items


@dataclass(frozen=True)
class MultipleChoice:
    options: tuple[str, ...]
    gold_index: int

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if not 2 <= len(self.options) <= len(OPTION_LETTERS):
            raise ValueError(f"Multiple choice needs 2..{len(OPTION_LETTERS)} options")
        if not 0 <= self.gold_index < len(self.options):
            raise ValueError("gold_index is past the option list")

    @property
    def gold(self) -> str:
        return self.options[self.gold_index]


@dataclass(frozen=True)
class ListAnswer:
    gold_set: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "gold_set", frozenset(normalize_answer(g) for g in self.gold_set))
        if not self.gold_set or "" in self.gold_set:
            raise ValueError("A list answer needs nonempty gold entries")


@dataclass(frozen=True)
class ExactText:
    gold: str

    def __post_init__(self):
        if not normalize_answer(self.gold):
            raise ValueError("An exact-text answer needs a nonempty gold text")


AnswerSpec = Union[MultipleChoice, ListAnswer, ExactText]


@dataclass(frozen=True)
class QAItem:
    context_id: str
    question_id: str
    context: str
    question: str
    answer_spec: AnswerSpec
    group_id: Optional[str] = None
    category: Optional[str] = None
    scenario: Optional[OracleScenario] = None

    def __post_init__(self):
        if not self.context.strip() or not self.question.strip():
            raise ValueError(f"Item {self.question_id} needs a context and a question")

    def task_text(self) -> str:
        """The question as shown to the answering model."""
        spec = self.answer_spec
        if isinstance(spec, MultipleChoice):
            options = "\n".join(f"{OPTION_LETTERS[i]}. {option}" for i, option in enumerate(spec.options))
            return f"{self.question}\nOptions:\n{options}\nAnswer with the letter of the correct option."
        if isinstance(spec, ListAnswer):
            return f"{self.question}\nAnswer with a comma-separated list of names."
        return self.question


def _synthetic_item(value: Any) -> QAItem:
    line = SyntheticLine.model_validate(value)
    return QAItem(
        context_id=line.context_id,
        question_id=line.question_id,
        context=line.context,
        question=line.question,
        answer_spec=MultipleChoice(tuple(line.options), line.gold_index),
        category=f"order-{line.order}",
        scenario=OracleScenario.from_dict(line.scenario.model_dump()),
    )


def _generic_item(value: Any, line_number: int) -> QAItem:
    line = GenericLine.model_validate(value)
    if line.options is not None:
        spec: AnswerSpec = MultipleChoice(tuple(line.options), line.gold_index)
    elif line.gold_list is not None:
        spec = ListAnswer(frozenset(line.gold_list))
    else:
        spec = ExactText(line.answer)
    return QAItem(
        context_id=line.context_id,
        question_id=line.question_id or f"{line.context_id}:{line_number}",
        context=line.context,
        question=line.question,
        answer_spec=spec,
        group_id=line.group_id,
        category=line.category,
    )


def load_dataset(path: str | Path, format: DatasetFormat | str) -> list[QAItem]:
    """
    Load a JSONL dataset.

    Raises:
        DatasetFormatError: for a line that is not JSON or does not validate,
            a repeated question id, or a context id used for two different
            contexts.
        FileHandlerError: if the file does not exist.
    """
    format = DatasetFormat(format)
    items: list[QAItem] = []
    contexts: dict[str, str] = {}
    question_ids: set[str] = set()
    try:
        for line_number, value in FileHandler.iter_jsonl(path):
            try:
                if format is DatasetFormat.S3AP_SYNTHETIC:
                    item = _synthetic_item(value)
                else:
                    item = _generic_item(value, line_number)
            except (ValidationError, ValueError, S3apError) as e:
                raise DatasetFormatError(f"Invalid {format.value} line: {e}", line_number, path)
            if item.question_id in question_ids:
                raise DatasetFormatError(f"Question id '{item.question_id}' is repeated", line_number, path)
            if contexts.setdefault(item.context_id, item.context) != item.context:
                raise DatasetFormatError(
                    f"Context id '{item.context_id}' is used for two different contexts", line_number, path
                )
            question_ids.add(item.question_id)
            items.append(item)
    except FileHandlerError as e:
        if e.line is None:
            raise
        raise DatasetFormatError(e.message, e.line, path)
    logger.info(f"Loaded {len(items)} item(s) over {len(contexts)} context(s) from {path}")
    return items


# ---------------------------------------------------------------- prompts and scoring


def build_qa_prompt(
    context: str, extra_info: Optional[str], question: str, version: str = DEFAULT_VERSION
) -> str:
    if not context.strip() or not question.strip():
        raise ValueError("A QA prompt needs a context and a question")
    if extra_info is None or not extra_info.strip():
        extra_info = NO_EXTRA_INFO
    return get_prompt_template(QA_TEMPLATE, version).render(
        context=context, extra_info=extra_info, question=question
    )


_PUNCTUATION = re.compile(f"[{re.escape(string.punctuation)}]")
_EXPLICIT_CHOICE = re.compile(
    r"\b(?i:answer|option|choice)(?:\s+is)?\s*[:\-]?\s*"
    r"(?:\(([A-Za-z]|\d{1,2})\)|([A-Z]|\d{1,2}))(?![A-Za-z0-9])"
)
_LEADING_CHOICE = re.compile(r"\s*(?:\(([A-Za-z]|\d{1,2})\)|([A-Za-z]|\d{1,2})\s*[.)]?\s*$)")
_CHOICE_TOKEN = re.compile(r"(?<![A-Za-z0-9'])([A-Z]|\d{1,2})(?![A-Za-z0-9'])")
_ARTICLE = re.compile(r"A [a-z]")


def normalize_answer(text: str) -> str:
    """Lowercase, punctuation stripped, whitespace collapsed."""
    return " ".join(_PUNCTUATION.sub(" ", text.lower()).split())


def chosen_option(response: str, options: Sequence[str]) -> Optional[int]:
    """
    Index of the option a response picks.

    In order of preference: an explicit "Answer: X" or "option 2", a response
    that opens with a parenthesized choice or is nothing but one, the first
    standalone capital option letter or 1-based number, and finally the only
    option whose text the response contains. Lowercase letters only count in
    the first two forms, and a capital "A" opening a phrase is an article.
    """
    candidates = [m.group(1) or m.group(2) for m in _EXPLICIT_CHOICE.finditer(response)]
    if leading := _LEADING_CHOICE.match(response):
        candidates.append(leading.group(1) or leading.group(2))
    candidates += [
        m.group(1) for m in _CHOICE_TOKEN.finditer(response) if not _ARTICLE.match(response, m.start())
    ]
    for token in candidates:
        index = int(token) - 1 if token.isdigit() else OPTION_LETTERS.find(token.upper())
        if 0 <= index < len(options):
            return index
    words = f" {normalize_answer(response)} "
    named = [i for i, option in enumerate(options) if f" {normalize_answer(option)} " in words]
    return named[0] if len(named) == 1 else None


def score_answer(item: QAItem, response: str) -> bool:
    if not response or not response.strip():
        return False
    spec = item.answer_spec
    if isinstance(spec, MultipleChoice):
        return chosen_option(response, spec.options) == spec.gold_index
    if isinstance(spec, ListAnswer):
        given = {normalize_answer(part) for part in re.split(r"[,\n]", response)}
        given.discard("")
        return given == spec.gold_set
    return normalize_answer(response) == normalize_answer(spec.gold)


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class ItemRecord:
    question_id: str
    context_id: str
    prompt_digest: str
    answer: str
    correct: bool
    group_id: Optional[str] = None
    category: Optional[str] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "context_id": self.context_id,
            "group_id": self.group_id,
            "category": self.category,
            "prompt_digest": self.prompt_digest,
            "answer": self.answer,
            "correct": self.correct,
            "error": self.error,
        }


def all_qs(records: Sequence[ItemRecord]) -> float:
    """
    Fraction of groups in which every question is answered correctly.

    Raises:
        MissingGroupError: if a record has no group id.
    """
    missing = [r.question_id for r in records if r.group_id is None]
    if missing:
        raise MissingGroupError("All-Qs needs a group id on every record", missing)
    if not records:
        return 0.0
    frame = pd.DataFrame({"group_id": [r.group_id for r in records], "correct": [r.correct for r in records]})
    return float(frame.groupby("group_id")["correct"].all().mean())


@dataclass(frozen=True)
class RunReport:
    task: str
    condition: Condition
    records: tuple[ItemRecord, ...]
    accuracy: float
    all_qs: Optional[float] = None
    parser_calls: int = 0
    config: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def from_records(
        cls,
        task: str,
        condition: Condition,
        records: Iterable[ItemRecord],
        parser_calls: int = 0,
        config: Optional[Mapping[str, Any]] = None,
    ) -> "RunReport":
        records = tuple(records)
        accuracy = sum(r.correct for r in records) / len(records) if records else 0.0
        grouped = bool(records) and all(r.group_id is not None for r in records)
        return cls(
            task=task,
            condition=Condition(condition),
            records=records,
            accuracy=accuracy,
            all_qs=all_qs(records) if grouped else None,
            parser_calls=parser_calls,
            config=dict(config or {}),
        )

    @property
    def errors(self) -> int:
        return sum(r.error is not None for r in self.records)

    def frame(self) -> pd.DataFrame:
        columns = ["question_id", "context_id", "group_id", "category", "prompt_digest", "answer", "correct", "error"]
        return pd.DataFrame([r.to_dict() for r in self.records], columns=columns)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "condition": self.condition.value,
            "items": len(self.records),
            "accuracy": round(self.accuracy, 6),
            "all_qs": None if self.all_qs is None else round(self.all_qs, 6),
            "errors": self.errors,
            "parser_calls": self.parser_calls,
            "config": dict(self.config),
            "records": [r.to_dict() for r in sorted(self.records, key=lambda r: r.question_id)],
        }


def _metric_cell(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def report_markdown(report: RunReport) -> str:
    summary = pd.DataFrame(
        [
            {
                "Task": report.task,
                "Condition": report.condition.value,
                "Items": len(report.records),
                "Accuracy": _metric_cell(report.accuracy),
                "All Qs": _metric_cell(report.all_qs),
                "Errors": report.errors,
            }
        ]
    )
    frame = report.frame().sort_values("question_id")
    if frame.empty:
        by_category = "(no items)"
    else:
        grouped = frame.fillna({"category": "-"}).groupby("category")["correct"].agg(["count", "mean"])
        by_category = grouped.rename(columns={"count": "Items", "mean": "Accuracy"}).to_markdown(floatfmt=".3f")
    records = frame.drop(columns=["prompt_digest"]).fillna("").to_markdown(index=False) if not frame.empty else "(no items)"
    return (
        f"# {report.task} ({report.condition.value})\n\n"
        f"{summary.to_markdown(index=False)}\n\n"
        f"## By category\n\n{by_category}\n\n"
        f"## Items\n\n{records}\n"
    )


def write_report(report: RunReport, directory: str | Path) -> tuple[Path, Path]:
    """Write report.json and report.md; both are byte-identical for identical runs."""
    directory = Path(directory)
    json_path = FileHandler.write_json(directory / REPORT_JSON, report.to_dict())
    md_path = FileHandler.write_text(directory / REPORT_MD, report_markdown(report))
    logger.info(f"Report written to {directory}")
    return json_path, md_path


def comparison_markdown(baseline: RunReport, with_s3ap: RunReport) -> str:
    """With/without table for one task."""
    rows = []
    for label, a, b in (
        ("Accuracy", baseline.accuracy, with_s3ap.accuracy),
        ("All Qs", baseline.all_qs, with_s3ap.all_qs),
    ):
        delta = None if a is None or b is None else b - a
        rows.append(
            {
                "Metric": label,
                "Baseline": _metric_cell(a),
                "With S3AP": _metric_cell(b),
                "Change": "n/a" if delta is None else f"{delta:+.3f}",
            }
        )
    return f"# {with_s3ap.task}\n\n{pd.DataFrame(rows).to_markdown(index=False)}\n"


# ---------------------------------------------------------------- running


@dataclass(frozen=True)
class ParserConfig:
    """
    How contexts are turned into trajectories. Without a backend, contexts
    are parsed by the deterministic reference grammar.
    """

    task: ParseTask
    backend: Optional[CompletionBackend] = None
    max_retries: int = DEFAULT_MAX_RETRIES
    form: WireForm = WireForm.OBJECT_MAP

    @property
    def name(self) -> str:
        return "reference" if self.backend is None else self.backend.identity

    def parse(self, context: str) -> Trajectory:
        if self.backend is None:
            return reference_parse(context)
        traj, _ = parse_narrative(context, self.task, self.backend, self.max_retries, self.form)
        return traj

    def snapshot(self) -> dict:
        return {
            "parser": self.name,
            "parse_task": self.task.name.value,
            "max_retries": self.max_retries,
            "form": self.form.value,
        }


def extra_info_text(traj: Trajectory) -> str:
    """Serialized trajectory placed in the Extra Info section."""
    return encode_steps(traj.steps, traj.agents, WireForm.STRING_LIST)


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def run_benchmark(
    items: Sequence[QAItem],
    condition: Condition | str,
    answer_backend: CompletionBackend,
    parser: Optional[ParserConfig] = None,
    parallelism: int = DEFAULT_PARALLELISM,
    task_name: str = "Generic",
    version: str = DEFAULT_VERSION,
) -> RunReport:
    """
    Answer every item and score it.

    Under WithS3ap each distinct context is parsed exactly once, however many
    questions it has; Baseline never touches the parser. A failing item is
    recorded as incorrect with its error and the run goes on.

    Raises:
        ValueError: for WithS3ap without a parser.
    """
    condition = Condition(condition)
    if condition is Condition.WITH_S3AP and parser is None:
        raise ValueError("The WithS3ap condition needs a parser")

    registry_lock = threading.Lock()
    context_locks: dict[str, threading.Lock] = {}
    parsed: dict[str, Union[Trajectory, Exception]] = {}
    parser_calls = 0

    def extra_info(item: QAItem) -> str:
        nonlocal parser_calls
        with registry_lock:
            lock = context_locks.setdefault(item.context_id, threading.Lock())
        with lock:
            if item.context_id not in parsed:
                with registry_lock:
                    parser_calls += 1
                try:
                    parsed[item.context_id] = parser.parse(item.context)
                except Exception as e:
                    parsed[item.context_id] = e
            result = parsed[item.context_id]
        if isinstance(result, Exception):
            raise result
        return extra_info_text(result)

    def answer(item: QAItem) -> ItemRecord:
        digest = ""
        try:
            extra = extra_info(item) if condition is Condition.WITH_S3AP else None
            prompt = build_qa_prompt(item.context, extra, item.task_text(), version)
            digest = _digest(prompt)
            response = answer_backend.complete(CompletionRequest.from_prompt(answer_backend.model_id, prompt))
        except Exception as e:
            logger.warning(f"Item {item.question_id} failed: {e}")
            return ItemRecord(item.question_id, item.context_id, digest, "", False, item.group_id, item.category, str(e))
        correct = score_answer(item, response)
        logger.debug(f"Item {item.question_id}: {'correct' if correct else 'wrong'}")
        return ItemRecord(item.question_id, item.context_id, digest, response, correct, item.group_id, item.category)

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        records = list(pool.map(answer, items))

    template = get_prompt_template(QA_TEMPLATE, version)
    config = {
        "answer_backend": answer_backend.identity,
        "prompt_template": template.key,
        "prompt_digest": template.digest,
    }
    if condition is Condition.WITH_S3AP:
        config.update(parser.snapshot())
    report = RunReport.from_records(task_name, condition, records, parser_calls, config)
    logger.info(
        f"{task_name} ({condition.value}): accuracy {report.accuracy:.3f} over {len(records)} item(s), "
        f"{report.errors} error(s), {parser_calls} parse(s)"
    )
    return report


# ---------------------------------------------------------------- rule reader

_SECTION = re.compile(r"^## (?P<name>.+)$", re.MULTILINE)
_OPTION_LINE = re.compile(r"^(?P<letter>[A-Z])\. (?P<text>.+)$", re.MULTILINE)
DONT_KNOW = "I don't know."


def prompt_sections(prompt: str) -> dict[str, str]:
    """Body of every '## Name' section of a QA prompt."""
    matches = list(_SECTION.finditer(prompt))
    sections = {}
    for match, following in zip(matches, matches[1:] + [None]):
        end = following.start() if following else len(prompt)
        sections[match["name"].strip()] = prompt[match.end():end].strip("\n")
    return sections


def answer_from_trajectory(prompt: str) -> str:
    """
    Answer a belief question from the trajectory in the Extra Info section:
    the trajectory is turned back into a scenario, simulated, and the belief
    is read off the final world.
    """
    sections = prompt_sections(prompt)
    task = sections.get("Task", "")
    if (question := parse_question(task)) is None:
        return DONT_KNOW
    chain, obj = question
    extra = sections.get("Extra Info", "")
    start = extra.find("[")
    if start < 0:
        return DONT_KNOW
    traj, issues = decode_trajectory(extra[start:])
    if issues:
        return DONT_KNOW
    try:
        snapshots = simulate(scenario_from_trajectory(traj))
        belief = query_belief(snapshots, chain, obj, len(snapshots) - 1)
    except (S3apError, ValueError, KeyError):
        return DONT_KNOW
    for match in _OPTION_LINE.finditer(task):
        if match["text"].strip() == belief:
            return f"({match['letter']}) {belief}"
    return belief


class BeliefRuleReader(OracleBackedBackend):
    """Answering backend that reads beliefs off the Extra Info trajectory."""

    def __init__(self, cache: Optional[ResponseCache] = None):
        super().__init__(lambda request: answer_from_trajectory(request.prompt), "belief-rule-reader", cache)


# ---------------------------------------------------------------- synthetic corpus


def corpus_seed(seed: int, index: int) -> int:
    return seed * SEED_STRIDE + index


def generate_corpus(
    seed: int, count: int, params: ScenarioParamsInput, out_dir: str | Path
) -> dict:
    """
    Write a synthetic corpus: per scenario the scenario file, the narrative
    and the ground-truth trajectory, plus the QA lines and a manifest with a
    digest of every file.

    Raises:
        InfeasibleParamsError: if the parameters cannot be satisfied.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    out_dir = Path(out_dir)
    scenario_params = ScenarioParams(
        n_agents=params.n_agents,
        n_locations=params.n_locations,
        n_containers=params.n_containers,
        n_objects=params.n_objects,
        n_events=params.n_events,
        force_false_belief=params.force_false_belief,
        allow_claims=params.allow_claims,
    )
    scenario_params.check()

    files: dict[str, str] = {}

    def record(path: Path) -> None:
        files[path.relative_to(out_dir).as_posix()] = hashlib.sha256(path.read_bytes()).hexdigest()

    lines = []
    false_beliefs = 0
    for index in range(count):
        item_seed = corpus_seed(seed, index)
        context_id = f"ctx-{index:05d}"
        scenario = generate_scenario(item_seed, scenario_params)
        false_beliefs += has_false_belief(scenario)
        narrative = render_narrative(scenario, item_seed if params.paraphrase else None)

        scenario_path = out_dir / "scenarios" / f"{context_id}.json"
        dump_scenario(scenario, scenario_path)
        record(scenario_path)
        record(FileHandler.write_text(out_dir / "narratives" / f"{context_id}.txt", narrative + "\n"))
        trajectory_path = out_dir / "trajectories" / f"{context_id}{TRAJECTORY_SUFFIX}"
        write_trajectory(ground_truth_trajectory(scenario), trajectory_path)
        record(trajectory_path)

        rng = np.random.default_rng([seed, index])
        questions = generate_questions(scenario, rng, params.questions_per_scenario, params.max_question_order)
        for q, question in enumerate(questions):
            lines.append(
                {
                    "context_id": context_id,
                    "question_id": f"{context_id}-q{q}",
                    "context": narrative,
                    "question": question.text,
                    "options": list(question.options),
                    "gold_index": question.gold_index,
                    "order": question.order,
                    "scenario": scenario.to_dict(),
                }
            )

    qa_path = FileHandler.write_jsonl(out_dir / CORPUS_QA, lines)
    record(qa_path)
    manifest = {
        "seed": seed,
        "count": count,
        "questions": len(lines),
        "false_belief_scenarios": false_beliefs,
        "params": params.model_dump(),
        "files": dict(sorted(files.items())),
    }
    FileHandler.write_json(out_dir / CORPUS_MANIFEST, manifest)
    logger.info(f"Generated {count} scenario(s) and {len(lines)} question(s) in {out_dir}")
    return manifest
