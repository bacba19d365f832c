"""Multiple-choice decision rule and accuracy bookkeeping.

A completion is chosen by cosine similarity against the image in the joint
space. Accuracy is aggregated per (category, task); the overall figure per
task is the unweighted mean over the categories present, mirroring the usual
per-category reporting layout for this task family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .cca import CcaModel, project
from .errors import InvalidInputError, NoDecisionError, ShapeError, UnencodableAnswerError, ZeroNormError
from .pooling import BLANK_TOKEN, EmbeddingTable, encode_answer, tokenize

__all__ = [
    "CATEGORIES",
    "TASKS",
    "MadlibInstance",
    "CategoryResult",
    "EvalReport",
    "cosine_similarity",
    "choose_completion",
    "evaluate",
    "aggregate_outcomes",
    "merge_reports",
    "render_report_table",
    "report_records",
    "report_from_records",
]

CATEGORIES = (
    "scenes",
    "emotion",
    "past",
    "future",
    "interesting",
    "object attribute",
    "object affordance",
    "object position",
    "person attribute",
    "person activity",
    "person location",
    "pair relationship",
)

TASKS = ("easy", "hard")


@dataclass(frozen=True)
class MadlibInstance:
    """One fill-in-the-blank question: a prompt, four candidates, one truth."""

    image_id: str
    category: str
    prompt: tuple[str, ...]
    candidates: tuple[str, str, str, str]
    truth_index: int
    task: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise InvalidInputError(f"unknown category {self.category!r}")
        if self.task not in TASKS:
            raise InvalidInputError(f"task must be one of {TASKS}, got {self.task!r}")
        if len(self.candidates) != 4:
            raise InvalidInputError(f"need exactly 4 candidates, got {len(self.candidates)}")
        if not 0 <= self.truth_index <= 3:
            raise InvalidInputError(f"truth_index must be in [0, 3], got {self.truth_index}")
        if sum(1 for t in self.prompt if t == BLANK_TOKEN) != 1:
            raise InvalidInputError(f"prompt must contain exactly one {BLANK_TOKEN} token")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped into [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"dims differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine similarity undefined for zero-norm input")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def choose_completion(image_embed: np.ndarray, candidate_embeds: Sequence[Optional[np.ndarray]]) -> int:
    """Index of the candidate most cosine-similar to the image embedding.

    ``None`` entries (unencodable candidates) and zero-norm vectors rank
    strictly below every scored candidate; similarity ties go to the lowest
    index. Raises :class:`NoDecisionError` when nothing can be scored.
    """
    image_embed = np.asarray(image_embed, dtype=np.float64)
    if np.linalg.norm(image_embed) == 0.0:
        raise ZeroNormError("image embedding has zero norm")
    best_index = None
    best_sim = -np.inf
    for i, cand in enumerate(candidate_embeds):
        if cand is None:
            continue
        cand = np.asarray(cand, dtype=np.float64)
        if np.linalg.norm(cand) == 0.0:
            continue
        sim = cosine_similarity(image_embed, cand)
        if sim > best_sim:
            best_sim = sim
            best_index = i
    if best_index is None:
        raise NoDecisionError("no candidate could be scored")
    return best_index


@dataclass(frozen=True)
class CategoryResult:
    category: str
    task: str
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total


@dataclass
class EvalReport:
    """Per-(category, task) accuracies plus per-instance data errors."""

    results: list[CategoryResult] = field(default_factory=list)
    data_errors: list[tuple[str, str]] = field(default_factory=list)  # (image_id, reason)

    def averages(self) -> dict[str, float]:
        """Unweighted mean accuracy over the categories present, per task."""
        per_task: dict[str, list[float]] = {}
        for r in self.results:
            per_task.setdefault(r.task, []).append(r.accuracy)
        return {task: sum(vals) / len(vals) for task, vals in sorted(per_task.items())}

    def accuracy(self, category: str, task: str) -> float:
        for r in self.results:
            if r.category == category and r.task == task:
                return r.accuracy
        raise KeyError((category, task))


def _row_key(category: str, task: str) -> tuple[int, str, int, str]:
    cat_rank = CATEGORIES.index(category) if category in CATEGORIES else len(CATEGORIES)
    task_rank = TASKS.index(task) if task in TASKS else len(TASKS)
    return (cat_rank, category, task_rank, task)


def aggregate_outcomes(
    outcomes: Sequence[tuple[str, str, bool]],
    data_errors: Sequence[tuple[str, str]] = (),
) -> EvalReport:
    """Fold (category, task, correct) outcomes into a report.

    Aggregation is a commutative count, so any outcome order yields the same
    report; rows follow the canonical category order.
    """
    counts: dict[tuple[str, str], list[int]] = {}
    for category, task, correct in outcomes:
        cell = counts.setdefault((category, task), [0, 0])
        cell[0] += int(bool(correct))
        cell[1] += 1
    results = [
        CategoryResult(category=c, task=t, correct=hits, total=tot)
        for (c, t), (hits, tot) in sorted(counts.items(), key=lambda kv: _row_key(*kv[0]))
    ]
    return EvalReport(results=results, data_errors=list(data_errors))


def merge_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """Concatenate per-category reports into one, re-sorted canonically."""
    results: list[CategoryResult] = []
    errors: list[tuple[str, str]] = []
    for rep in reports:
        results.extend(rep.results)
        errors.extend(rep.data_errors)
    results.sort(key=lambda r: _row_key(r.category, r.task))
    return EvalReport(results=results, data_errors=errors)


def evaluate(
    instances: Sequence[MadlibInstance],
    model: CcaModel,
    features: Mapping[str, np.ndarray],
    table: EmbeddingTable,
) -> EvalReport:
    """Score instances with the joint embedding model.

    Each image representation and each encodable candidate answer is
    projected into the joint space; the instance is correct when the most
    similar candidate is the ground-truth one. Instances whose image feature
    is missing are excluded from the totals and listed as data errors;
    undecidable instances count as incorrect.
    """
    outcomes: list[tuple[str, str, bool]] = []
    data_errors: list[tuple[str, str]] = []
    for inst in instances:
        feat = features.get(inst.image_id)
        if feat is None:
            data_errors.append((inst.image_id, "missing image feature"))
            continue
        image_embed = project(model, feat, view="image")
        cand_embeds: list[Optional[np.ndarray]] = []
        for cand in inst.candidates:
            try:
                cand_embeds.append(project(model, encode_answer(tokenize(cand), table), view="text"))
            except UnencodableAnswerError:
                cand_embeds.append(None)
        try:
            chosen = choose_completion(image_embed, cand_embeds)
            correct = chosen == inst.truth_index
        except (NoDecisionError, ZeroNormError):
            correct = False
        outcomes.append((inst.category, inst.task, correct))
    return aggregate_outcomes(outcomes, data_errors)


def render_report_table(report: EvalReport) -> str:
    """Aligned text table: one category per row, one task per column, in %."""
    tasks = [t for t in TASKS if any(r.task == t for r in report.results)]
    tasks += sorted({r.task for r in report.results} - set(tasks))
    categories: list[str] = []
    for r in report.results:
        if r.category not in categories:
            categories.append(r.category)
    cells = {(r.category, r.task): r for r in report.results}

    width = max([len("Category")] + [len(c) for c in categories] + [len("Average")]) + 2
    header = "Category".ljust(width) + "".join(t.capitalize().rjust(8) for t in tasks)
    lines = [header]
    for c in categories:
        row = c.ljust(width)
        for t in tasks:
            r = cells.get((c, t))
            row += (f"{100.0 * r.accuracy:.1f}" if r else "-").rjust(8)
        lines.append(row)
    averages = report.averages()
    row = "Average".ljust(width)
    for t in tasks:
        row += (f"{100.0 * averages[t]:.1f}" if t in averages else "-").rjust(8)
    lines.append(row)
    if report.data_errors:
        lines.append(f"data errors: {len(report.data_errors)}")
        for image_id, reason in report.data_errors:
            lines.append(f"  {image_id}: {reason}")
    return "\n".join(lines)


def report_records(report: EvalReport) -> list[dict]:
    """Structured records for machine consumption, one per category x task."""
    records: list[dict] = []
    for r in report.results:
        records.append(
            {
                "type": "category",
                "category": r.category,
                "task": r.task,
                "correct": r.correct,
                "total": r.total,
                "accuracy": r.accuracy,
            }
        )
    for task, acc in report.averages().items():
        records.append(
            {
                "type": "average",
                "task": task,
                "categories": sum(1 for r in report.results if r.task == task),
                "accuracy": acc,
            }
        )
    for image_id, reason in report.data_errors:
        records.append({"type": "data_error", "image_id": image_id, "reason": reason})
    return records


def report_from_records(records: Sequence[Mapping]) -> EvalReport:
    """Rebuild a report from its structured records (averages are recomputed)."""
    results = []
    errors = []
    for rec in records:
        if rec.get("type") == "category":
            results.append(
                CategoryResult(
                    category=str(rec["category"]),
                    task=str(rec["task"]),
                    correct=int(rec["correct"]),
                    total=int(rec["total"]),
                )
            )
        elif rec.get("type") == "data_error":
            errors.append((str(rec["image_id"]), str(rec["reason"])))
    results.sort(key=lambda r: _row_key(r.category, r.task))
    return EvalReport(results=results, data_errors=errors)
