"""File formats and ingestion: manifests, feature stores, report records.

All formats are plain text so fixtures can be produced and checked by any
tooling. Floats are written in shortest round-trip form, which makes
write -> read bitwise lossless and repeated runs byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .boxes import ScoredBox, greedy_nms_indices
from .errors import DataError, InvalidInputError, ParseError, ShapeError, UnencodableAnswerError
from .lstm import LstmExample, sum_word_vectors
from .pooling import EmbeddingTable, build_image_representation, encode_answer, tokenize, tokenize_prompt
from .selection import EvalReport, MadlibInstance, report_from_records, report_records

__all__ = [
    "ManifestRecord",
    "ImageFeatures",
    "FeatureStore",
    "parse_manifest",
    "write_manifest",
    "load_feature_store",
    "save_feature_store",
    "pool_image",
    "pool_store",
    "build_cca_training",
    "build_lstm_examples",
    "write_report_jsonl",
    "read_report_jsonl",
]


@dataclass(frozen=True)
class ManifestRecord:
    """One manifest line: an instance plus optional scored proposal boxes."""

    image_id: str
    category: str
    task: str
    prompt: str
    candidates: tuple[str, str, str, str]
    truth_index: int
    boxes: tuple[ScoredBox, ...] = ()

    def to_instance(self) -> MadlibInstance:
        return MadlibInstance(
            image_id=self.image_id,
            category=self.category,
            prompt=tuple(tokenize_prompt(self.prompt)),
            candidates=self.candidates,
            truth_index=self.truth_index,
            task=self.task,
        )


def parse_manifest(path: str | Path) -> list[ManifestRecord]:
    """Read newline-delimited JSON records, validating each instance."""
    records: list[ManifestRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON: {exc.msg}", lineno) from None
            try:
                boxes = tuple(
                    ScoredBox(x=b["x"], y=b["y"], w=b["w"], h=b["h"], score=b["score"])
                    for b in obj.get("boxes", [])
                )
                record = ManifestRecord(
                    image_id=str(obj["image_id"]),
                    category=str(obj["category"]),
                    task=str(obj["task"]),
                    prompt=str(obj["prompt"]),
                    candidates=tuple(str(c) for c in obj["candidates"]),
                    truth_index=int(obj["truth_index"]),
                    boxes=boxes,
                )
                record.to_instance()  # semantic validation
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad record: {exc}", lineno) from None
            records.append(record)
    return records


def write_manifest(records: Sequence[ManifestRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj: dict = {
                "image_id": rec.image_id,
                "category": rec.category,
                "task": rec.task,
                "prompt": rec.prompt,
                "candidates": list(rec.candidates),
                "truth_index": rec.truth_index,
            }
            if rec.boxes:
                obj["boxes"] = [
                    {"x": b.x, "y": b.y, "w": b.w, "h": b.h, "score": b.score} for b in rec.boxes
                ]
            fh.write(json.dumps(obj) + "\n")


@dataclass
class ImageFeatures:
    """Global image vector plus (box, vector) pairs for its proposals."""

    global_vec: np.ndarray
    proposals: list[tuple[ScoredBox, np.ndarray]] = field(default_factory=list)


class FeatureStore:
    """Map image_id -> features; every vector in a store shares one dim."""

    def __init__(self, dim: int):
        if dim <= 0:
            raise InvalidInputError(f"feature dim must be positive, got {dim}")
        self.dim = int(dim)
        self.images: dict[str, ImageFeatures] = {}

    def add_image(
        self,
        image_id: str,
        global_vec: np.ndarray,
        proposals: Sequence[tuple[ScoredBox, np.ndarray]] = (),
    ) -> None:
        global_vec = np.asarray(global_vec, dtype=np.float64)
        if global_vec.shape != (self.dim,):
            raise ShapeError(f"global vector for {image_id!r} has shape {global_vec.shape}")
        checked = []
        for box, vec in proposals:
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (self.dim,):
                raise ShapeError(f"proposal vector for {image_id!r} has shape {vec.shape}")
            checked.append((box, vec))
        self.images[image_id] = ImageFeatures(global_vec=global_vec, proposals=checked)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self.images

    def __getitem__(self, image_id: str) -> ImageFeatures:
        return self.images[image_id]

    def __len__(self) -> int:
        return len(self.images)

    def global_map(self) -> dict[str, np.ndarray]:
        """image_id -> global vector view, e.g. for evaluation over pooled stores."""
        return {image_id: img.global_vec for image_id, img in self.images.items()}


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_feature_store(store: FeatureStore, path: str | Path) -> None:
    """Write the text layout: header ``dim count``, then per-image blocks."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{store.dim} {len(store)}\n")
        for image_id, img in store.images.items():
            fh.write(image_id + "\n")
            fh.write(_fmt(img.global_vec) + "\n")
            fh.write(f"{len(img.proposals)}\n")
            for box, vec in img.proposals:
                fh.write(_fmt((box.x, box.y, box.w, box.h, box.score)) + " " + _fmt(vec) + "\n")


def load_feature_store(path: str | Path) -> FeatureStore:
    """Read a store written by :func:`save_feature_store`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    cursor = 0

    def next_line(what: str) -> str:
        nonlocal cursor
        if cursor >= len(lines):
            raise ParseError(f"unexpected end of file, expected {what}", cursor + 1)
        line = lines[cursor]
        cursor += 1
        return line

    def parse_floats(line: str, expected: int, what: str) -> np.ndarray:
        parts = line.split()
        if len(parts) != expected:
            raise ParseError(f"{what}: expected {expected} values, got {len(parts)}", cursor)
        try:
            values = np.array([float(p) for p in parts], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"{what}: {exc}", cursor) from None
        if not np.all(np.isfinite(values)):
            raise ParseError(f"{what}: non-finite value", cursor)
        return values

    header = next_line("header").split()
    if len(header) != 2:
        raise ParseError("header must be '<dim> <count>'", 1)
    try:
        dim, count = int(header[0]), int(header[1])
    except ValueError as exc:
        raise ParseError(f"bad header: {exc}", 1) from None
    if dim <= 0 or count < 0:
        raise ParseError(f"bad header counts dim={dim}, count={count}", 1)

    store = FeatureStore(dim)
    for _ in range(count):
        image_id = next_line("image id").strip()
        if not image_id:
            raise ParseError("empty image id", cursor)
        global_vec = parse_floats(next_line("global vector"), dim, f"global vector of {image_id!r}")
        try:
            n_props = int(next_line("proposal count"))
        except ValueError as exc:
            raise ParseError(f"bad proposal count: {exc}", cursor) from None
        proposals = []
        for _ in range(n_props):
            values = parse_floats(next_line("proposal"), 5 + dim, f"proposal of {image_id!r}")
            try:
                box = ScoredBox(x=values[0], y=values[1], w=values[2], h=values[3], score=values[4])
            except InvalidInputError as exc:
                raise ParseError(f"bad proposal box of {image_id!r}: {exc}", cursor) from None
            proposals.append((box, values[5:]))
        store.add_image(image_id, global_vec, proposals)
    return store


def pool_image(
    img: ImageFeatures,
    beta: float = 0.75,
    top_k: int = 100,
    mode: str = "mean",
    l2_normalize: bool = False,
) -> np.ndarray:
    """NMS, then top-k by score, then pool survivors with the global vector."""
    if top_k < 0:
        raise InvalidInputError(f"top_k must be >= 0, got {top_k}")
    boxes = [box for box, _ in img.proposals]
    kept = greedy_nms_indices(boxes, beta)[:top_k]
    feats = [img.proposals[i][1] for i in kept]
    return build_image_representation(img.global_vec, feats, mode=mode, l2_normalize=l2_normalize)


def pool_store(
    store: FeatureStore,
    beta: float = 0.75,
    top_k: int = 100,
    mode: str = "mean",
    l2_normalize: bool = False,
) -> FeatureStore:
    """Pool every image of a store into a proposal-free store of representations."""
    pooled = FeatureStore(store.dim)
    for image_id, img in store.images.items():
        pooled.add_image(image_id, pool_image(img, beta=beta, top_k=top_k, mode=mode, l2_normalize=l2_normalize))
    return pooled


def build_cca_training(
    instances: Sequence[MadlibInstance],
    features: Mapping[str, np.ndarray],
    table: EmbeddingTable,
) -> tuple[np.ndarray, np.ndarray, list[tuple[str, str]]]:
    """Paired view matrices from ground-truth completions.

    One row per unique (image, truth answer) pair, first-seen order; easy and
    hard variants of the same question therefore contribute a single pair.
    Pairs with a missing image feature or an unencodable answer are skipped
    and reported.
    """
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    skipped: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for inst in instances:
        truth = inst.candidates[inst.truth_index]
        key = (inst.image_id, truth)
        if key in seen:
            continue
        seen.add(key)
        feat = features.get(inst.image_id)
        if feat is None:
            skipped.append((inst.image_id, "missing image feature"))
            continue
        try:
            ys.append(encode_answer(tokenize(truth), table))
        except UnencodableAnswerError:
            skipped.append((inst.image_id, f"unencodable answer {truth!r}"))
            continue
        xs.append(np.asarray(feat, dtype=np.float64))
    if not xs:
        raise DataError("no usable training pairs")
    return np.stack(xs), np.stack(ys), skipped


def build_lstm_examples(
    instances: Sequence[MadlibInstance],
    features: Mapping[str, np.ndarray],
    table: EmbeddingTable,
) -> tuple[list[LstmExample], list[tuple[str, str]]]:
    """Training examples with word-vector-sum targets; unencodable ones skipped."""
    examples: list[LstmExample] = []
    skipped: list[tuple[str, str]] = []
    seen: set[tuple[str, tuple[str, ...], str]] = set()
    for inst in instances:
        truth = inst.candidates[inst.truth_index]
        key = (inst.image_id, inst.prompt, truth)
        if key in seen:
            continue
        seen.add(key)
        feat = features.get(inst.image_id)
        if feat is None:
            skipped.append((inst.image_id, "missing image feature"))
            continue
        try:
            target = sum_word_vectors(tokenize(truth), table)
        except UnencodableAnswerError:
            skipped.append((inst.image_id, f"unencodable answer {truth!r}"))
            continue
        if np.linalg.norm(target) == 0.0:
            skipped.append((inst.image_id, f"zero-norm target for {truth!r}"))
            continue
        examples.append(LstmExample(image_feat=np.asarray(feat, dtype=np.float64), prompt=inst.prompt, target=target))
    return examples, skipped


def write_report_jsonl(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in report_records(report):
            fh.write(json.dumps(rec) + "\n")


def read_report_jsonl(path: str | Path) -> EvalReport:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                records.append(json.loads(raw))
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON: {exc.msg}", lineno) from None
    return report_from_records(records)
