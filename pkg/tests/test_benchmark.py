import json
import threading
from collections import Counter

import pytest

from s3ap.core.belief_oracle import ground_truth_trajectory
from s3ap.core.benchmark import (
    CORPUS_MANIFEST,
    CORPUS_QA,
    DONT_KNOW,
    BeliefRuleReader,
    Condition,
    DatasetFormat,
    DatasetFormatError,
    ExactText,
    ItemRecord,
    ListAnswer,
    MissingGroupError,
    MultipleChoice,
    ParserConfig,
    QAItem,
    RunReport,
    all_qs,
    answer_from_trajectory,
    build_qa_prompt,
    chosen_option,
    comparison_markdown,
    extra_info_text,
    generate_corpus,
    load_dataset,
    run_benchmark,
    score_answer,
    write_report,
)
from s3ap.core.file_handling import FileHandlerError
from s3ap.core.input_validation import ScenarioParamsInput
from s3ap.core.llm_backend import OracleBackedBackend
from s3ap.core.narrative_parser import ParseTask
from s3ap.core.narrative_templates import render_narrative


def _item(spec, question_id="q1", context_id="c1", group_id=None):
    return QAItem(context_id, question_id, "Some story.", "Some question?", spec, group_id=group_id)


class CountingParser:
    """Parser double: counts parses per context and fails for chosen contexts."""

    def __init__(self, trajectory, failing=()):
        self.trajectory = trajectory
        self.failing = set(failing)
        self.calls = Counter()
        self._lock = threading.Lock()

    def parse(self, context):
        with self._lock:
            self.calls[context] += 1
        if context in self.failing:
            raise RuntimeError("parser down")
        return self.trajectory

    def snapshot(self):
        return {"parser": "counting"}


MC = MultipleChoice(("basket", "box", "unknown"), 1)


@pytest.mark.parametrize(
    "response, correct",
    [
        ("B", True),
        ("(B) box", True),
        ("The answer is B.", True),
        ("2", True),
        ("box", True),
        ("The marble is in the box.", True),
        ("it's a box", True),
        ("A box, I think.", True),
        ("answer: (b)", True),
        ("(b) the box", True),
        ("basket or box", False),
        ("Answer: C", False),
        ("C", False),
        ("", False),
        ("   ", False),
    ],
)
def test_multiple_choice_scoring(response, correct):
    assert score_answer(_item(MC), response) is correct



def test_chosen_option_prefers_explicit_answers():
    options = ("basket", "box", "unknown")
    assert chosen_option("Answer: C", options) == 2
    assert chosen_option("I think it is a box, so the answer is B", options) == 1
    assert chosen_option("It's in a basket.", options) == 0
    assert chosen_option("a", options) == 0
    assert chosen_option("Answer: Z", options) is None

def test_list_and_exact_scoring():
    names = _item(ListAnswer(frozenset({"Kate", "David"})))
    assert score_answer(names, "david, Kate.")
    assert score_answer(names, "Kate\nDavid")
    assert not score_answer(names, "Kate")
    assert not score_answer(names, "Kate, David, Omar")
    exact = _item(ExactText("Anne"))
    assert score_answer(exact, " anne. ")
    assert not score_answer(exact, "Sally")


def test_answer_spec_checks():
    with pytest.raises(ValueError):
        MultipleChoice(("only",), 0)
    with pytest.raises(ValueError):
        MultipleChoice(("a", "b"), 2)
    with pytest.raises(ValueError):
        ListAnswer(frozenset({"!!"}))
    with pytest.raises(ValueError):
        ExactText("...")


def test_task_text_lists_options():
    assert _item(MC).task_text() == (
        "Some question?\nOptions:\nA. basket\nB. box\nC. unknown\nAnswer with the letter of the correct option."
    )


def test_qa_prompt_defaults_extra_info():
    prompt = build_qa_prompt("Story.", None, "Where?")
    assert prompt == "## Context\nStory.\n## Extra Info\n(to help you better understand the meeting)\n(none)\n## Task\nWhere?"
    assert build_qa_prompt("Story.", "  ", "Where?") == prompt
    with pytest.raises(ValueError):
        build_qa_prompt("", None, "Where?")


def _record(qid, correct, group):
    return ItemRecord(qid, "c", "d", "a", correct, group)


def test_all_qs():
    records = [_record("1", True, "g1"), _record("2", True, "g1"), _record("3", True, "g2"), _record("4", False, "g2")]
    assert all_qs(records) == 0.5
    assert all_qs([]) == 0.0
    with pytest.raises(MissingGroupError):
        all_qs([_record("1", True, None)])


def test_report_all_qs_only_with_groups():
    grouped = RunReport.from_records("T", Condition.BASELINE, [_record("1", True, "g")])
    assert grouped.all_qs == 1.0
    ungrouped = RunReport.from_records("T", Condition.BASELINE, [_record("1", True, None)])
    assert ungrouped.all_qs is None
    assert ungrouped.to_dict()["all_qs"] is None


def _write_lines(path, lines):
    path.write_text("".join(json.dumps(line) + "\n" for line in lines), encoding="utf-8")


def test_load_generic_dataset(tmp_path):
    path = tmp_path / "data.jsonl"
    _write_lines(
        path,
        [
            {"context_id": "c1", "context": "Story one.", "question": "Who?", "answer": "Anne", "group_id": "g"},
            {"context_id": "c1", "context": "Story one.", "question": "Which?", "options": ["a", "b"], "gold_index": 0},
            {"context_id": "c2", "question_id": "x", "context": "Story two.", "question": "Who all?", "gold_list": ["A", "B"]},
        ],
    )
    items = load_dataset(path, "GenericJsonl")
    assert [item.question_id for item in items] == ["c1:1", "c1:2", "x"]
    assert isinstance(items[1].answer_spec, MultipleChoice)
    assert isinstance(items[2].answer_spec, ListAnswer)
    assert items[0].group_id == "g"


@pytest.mark.parametrize(
    "second, line",
    [
        ({"context_id": "c1", "question_id": "q", "context": "Story one.", "question": "Again?", "answer": "x"}, 2),
        ({"context_id": "c1", "context": "Other story.", "question": "Who?", "answer": "x"}, 2),
        ({"context_id": "c2", "context": "Story.", "question": "Who?", "answer": "x", "gold_list": ["x"]}, 2),
        ({"context_id": "c2", "context": "Story.", "question": "Who?", "options": ["a", "b"], "gold_index": 5}, 2),
    ],
)
def test_bad_generic_lines(tmp_path, second, line):
    path = tmp_path / "data.jsonl"
    first = {"context_id": "c1", "question_id": "q", "context": "Story one.", "question": "Who?", "answer": "Anne"}
    _write_lines(path, [first, second])
    with pytest.raises(DatasetFormatError) as info:
        load_dataset(path, DatasetFormat.GENERIC_JSONL)
    assert info.value.line == line


def test_dataset_file_errors(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text('{"context_id": "c1"\n', encoding="utf-8")
    with pytest.raises(DatasetFormatError) as info:
        load_dataset(path, "GenericJsonl")
    assert info.value.line == 1
    with pytest.raises(FileHandlerError):
        load_dataset(tmp_path / "missing.jsonl", "GenericJsonl")
    with pytest.raises(ValueError):
        load_dataset(path, "Parquet")


def test_each_context_is_parsed_once(two_step_trajectory):
    items = [
        QAItem(f"c{c}", f"c{c}-q{q}", f"Story {c}.", "Who?", ExactText("Alice"))
        for c in range(3)
        for q in range(4)
    ]
    parser = CountingParser(two_step_trajectory, failing={"Story 2."})
    backend = OracleBackedBackend(lambda request: "Alice", "echo")
    report = run_benchmark(items, Condition.WITH_S3AP, backend, parser, parallelism=8)

    assert parser.calls == {"Story 0.": 1, "Story 1.": 1, "Story 2.": 1}
    assert report.parser_calls == 3
    assert report.errors == 4
    assert report.accuracy == pytest.approx(8 / 12)
    failed = [r for r in report.records if r.error]
    assert {r.context_id for r in failed} == {"c2"}
    assert all("parser down" in r.error for r in failed)


def test_baseline_never_parses(two_step_trajectory):
    items = [QAItem("c1", "q1", "Story.", "Who?", ExactText("Alice"))]
    parser = CountingParser(two_step_trajectory)
    backend = OracleBackedBackend(lambda request: request.prompt, "echo")
    report = run_benchmark(items, "Baseline", backend, parser)
    assert parser.calls == {}
    assert report.parser_calls == 0
    assert "(none)" in report.records[0].answer
    assert "parser" not in report.config


def test_with_s3ap_extra_info_is_the_trajectory(two_step_trajectory):
    items = [QAItem("c1", "q1", "Story.", "Who?", ExactText("Alice"))]
    backend = OracleBackedBackend(lambda request: request.prompt, "echo")
    report = run_benchmark(items, "WithS3ap", backend, CountingParser(two_step_trajectory))
    assert extra_info_text(two_step_trajectory) in report.records[0].answer
    assert report.config["parser"] == "counting"
    assert report.config["prompt_template"] == "answer_question.v1"
    with pytest.raises(ValueError):
        run_benchmark(items, "WithS3ap", backend, None)


def test_reader_answers_from_the_trajectory(sally_anne):
    extra = extra_info_text(ground_truth_trajectory(sally_anne))
    question = QAItem("c", "q", "Story.", "Where does Sally think the marble is?", MC).task_text()
    assert answer_from_trajectory(build_qa_prompt("Story.", extra, question)) == "(A) basket"
    assert answer_from_trajectory(build_qa_prompt("Story.", None, question)) == DONT_KNOW
    assert answer_from_trajectory(build_qa_prompt("Story.", extra, "Who left?")) == DONT_KNOW


def test_reader_runs_the_reference_parse(sally_anne):
    narrative = render_narrative(sally_anne)
    question = QAItem("c", "q", narrative, "Where does Anne think Sally thinks the marble is?", MC)
    items = [QAItem("c", "q", narrative, question.question, MultipleChoice(MC.options, 0))]
    report = run_benchmark(items, "WithS3ap", BeliefRuleReader(), ParserConfig(ParseTask.named("ToMi")))
    assert report.accuracy == 1.0
    assert report.config["parser"] == "reference"


@pytest.mark.parametrize("paraphrase", [False, True])
def test_generated_corpus_is_solved_by_the_reader(tmp_path, paraphrase):
    params = ScenarioParamsInput(n_agents=3, n_containers=3, n_events=5, paraphrase=paraphrase)
    manifest = generate_corpus(seed=3, count=6, params=params, out_dir=tmp_path)
    items = load_dataset(tmp_path / CORPUS_QA, "S3apSynthetic")
    assert len(items) == manifest["questions"] == 24

    parser = ParserConfig(ParseTask.named("ToMi"))
    with_s3ap = run_benchmark(items, "WithS3ap", BeliefRuleReader(), parser, task_name="ToMi")
    assert with_s3ap.accuracy == 1.0
    assert with_s3ap.parser_calls == 6

    baseline = run_benchmark(items, "Baseline", BeliefRuleReader(), task_name="ToMi")
    assert baseline.accuracy == 0.0
    assert "+1.000" in comparison_markdown(baseline, with_s3ap)



def test_reader_solves_a_large_false_belief_corpus(tmp_path):
    params = ScenarioParamsInput(force_false_belief=True)
    manifest = generate_corpus(seed=11, count=500, params=params, out_dir=tmp_path)
    assert manifest["false_belief_scenarios"] == 500
    items = load_dataset(tmp_path / CORPUS_QA, "S3apSynthetic")
    report = run_benchmark(items, "WithS3ap", BeliefRuleReader(), ParserConfig(ParseTask.named("ToMi")), task_name="ToMi")
    assert len(items) == manifest["questions"]
    assert report.parser_calls == 500
    assert report.accuracy == 1.0


def test_corpus_is_deterministic(tmp_path):
    params = ScenarioParamsInput(force_false_belief=True)
    first = generate_corpus(7, 4, params, tmp_path / "a")
    second = generate_corpus(7, 4, params, tmp_path / "b")
    assert first == second
    assert first["false_belief_scenarios"] == 4
    assert "scenarios/ctx-00000.json" in first["files"]
    assert "trajectories/ctx-00003.s3ap.json" in first["files"]
    for name in first["files"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert json.loads((tmp_path / "a" / CORPUS_MANIFEST).read_text(encoding="utf-8")) == first


def test_reports_are_byte_identical(tmp_path):
    generate_corpus(1, 3, ScenarioParamsInput(), tmp_path / "corpus")
    items = load_dataset(tmp_path / "corpus" / CORPUS_QA, "S3apSynthetic")
    parser = ParserConfig(ParseTask.named("ToMi"))
    paths = []
    for run, parallelism in (("one", 1), ("two", 4)):
        report = run_benchmark(items, "WithS3ap", BeliefRuleReader(), parser, parallelism=parallelism, task_name="ToMi")
        paths.append(write_report(report, tmp_path / run))
    for a, b in zip(*paths):
        assert a.read_bytes() == b.read_bytes()
    summary = json.loads(paths[0][0].read_text(encoding="utf-8"))
    assert summary["accuracy"] == 1.0
    assert summary["condition"] == "WithS3ap"
