"""Preference-study bookkeeping: sets, randomized presentation, aggregation.

Annotations are appended to a JSONL log and re-validated on reload; the
report keeps full precision and rounds only when rendered.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateSubmission,
    EmptyStudy,
    RankViolation,
    RatingOutOfRange,
    UnknownSet,
)

RATING_ASPECTS = ("object_identity", "scene_identity", "overall_quality")
VIDEOS_PER_SET = 4


@dataclass(frozen=True)
class StudySet:
    set_id: str
    prompt: str
    reference_image: str
    videos: tuple[tuple[str, str], ...]  # (model_id, path), exactly four

    def __post_init__(self):
        models = [m for m, _ in self.videos]
        if len(models) != VIDEOS_PER_SET or len(set(models)) != VIDEOS_PER_SET:
            raise ValueError(
                f"set {self.set_id!r} needs {VIDEOS_PER_SET} distinct models, got {models}"
            )

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(m for m, _ in self.videos)


@dataclass(frozen=True)
class AnnotationRecord:
    participant_id: str
    set_id: str
    ranks: dict[str, int]
    ratings: dict[str, dict[str, int]]
    display_order: tuple[str, ...]

    def to_record(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "set_id": self.set_id,
            "ranks": self.ranks,
            "ratings": self.ratings,
            "display_order": list(self.display_order),
        }

    @classmethod
    def from_record(cls, record: dict) -> "AnnotationRecord":
        return cls(
            participant_id=record["participant_id"],
            set_id=record["set_id"],
            ranks={m: int(v) for m, v in record["ranks"].items()},
            ratings={
                m: {a: int(v) for a, v in aspects.items()}
                for m, aspects in record["ratings"].items()
            },
            display_order=tuple(record["display_order"]),
        )


def validate_annotation(record: AnnotationRecord) -> None:
    """Raise on any invariant violation; silent when the record is valid."""
    models = sorted(record.ranks)
    if sorted(record.ranks.values()) != list(range(1, VIDEOS_PER_SET + 1)):
        raise RankViolation(
            f"ranks must be a bijection onto 1..{VIDEOS_PER_SET}, got {record.ranks}"
        )
    if sorted(record.ratings) != models:
        raise RatingOutOfRange(
            f"ratings cover {sorted(record.ratings)}, ranks cover {models}"
        )
    for model, aspects in record.ratings.items():
        for aspect in RATING_ASPECTS:
            if aspect not in aspects:
                raise RatingOutOfRange(f"{model} is missing the {aspect} rating")
            value = aspects[aspect]
            if not isinstance(value, int) or not 1 <= value <= 5:
                raise RatingOutOfRange(f"{model} {aspect} rating {value!r} not in 1..5")
    if sorted(record.display_order) != models:
        raise RankViolation(
            f"display_order {record.display_order} does not match the ranked models"
        )


def _draw_below(material: bytes, counter: int, bound: int) -> tuple[int, int]:
    # rejection sampling over a keyed hash stream; no modulo bias
    limit = 256 - (256 % bound)
    while True:
        byte = hashlib.blake2b(
            counter.to_bytes(8, "little"), key=material, digest_size=1
        ).digest()[0]
        counter += 1
        if byte < limit:
            return byte % bound, counter


def assign_presentation(
    participant_id: str, set_id: str, seed: int, model_ids: tuple[str, ...]
) -> tuple[str, ...]:
    """Deterministic per-(participant, set) shuffle of the candidate videos."""
    key = hashlib.blake2b(digest_size=32)
    for part in (str(seed), participant_id, set_id):
        data = part.encode("utf-8")
        key.update(len(data).to_bytes(8, "little"))
        key.update(data)
    material = key.digest()

    order = list(model_ids)
    counter = 0
    for i in range(len(order) - 1, 0, -1):
        j, counter = _draw_below(material, counter, i + 1)
        order[i], order[j] = order[j], order[i]
    return tuple(order)


class StudyStore:
    """Study sets plus an append-only annotation log with an in-memory index."""

    def __init__(self, sets: list[StudySet], log_path: str | Path, seed: int = 0):
        self.seed = seed
        self.sets = {s.set_id: s for s in sets}
        self.log_path = Path(log_path)
        self._lock = threading.Lock()
        self._annotations: list[AnnotationRecord] = []
        self._submitted: set[tuple[str, str]] = set()
        if self.log_path.exists():
            for line in self.log_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                record = AnnotationRecord.from_record(json.loads(line))
                validate_annotation(record)
                self._annotations.append(record)
                self._submitted.add((record.participant_id, record.set_id))

    @classmethod
    def from_dir(cls, data_dir: str | Path, seed: int = 0) -> "StudyStore":
        data_dir = Path(data_dir)
        raw = json.loads((data_dir / "sets.json").read_text(encoding="utf-8"))
        sets = [
            StudySet(
                set_id=entry["set_id"],
                prompt=entry["prompt"],
                reference_image=entry["reference_image"],
                videos=tuple((v["model_id"], v["path"]) for v in entry["videos"]),
            )
            for entry in raw
        ]
        return cls(sets, data_dir / "annotations.jsonl", seed=seed)

    def presentation(self, participant_id: str, set_id: str) -> tuple[str, ...]:
        if set_id not in self.sets:
            raise UnknownSet(f"no study set named {set_id!r}")
        return assign_presentation(
            participant_id, set_id, self.seed, self.sets[set_id].model_ids
        )

    def session(self, participant_id: str) -> list[dict]:
        """Per-set presentation payloads for one participant, stable order."""
        out = []
        for set_id in sorted(self.sets):
            sset = self.sets[set_id]
            order = self.presentation(participant_id, set_id)
            paths = dict(sset.videos)
            out.append(
                {
                    "set_id": set_id,
                    "prompt": sset.prompt,
                    "reference_image": sset.reference_image,
                    "display_order": list(order),
                    "videos": [{"model_id": m, "path": paths[m]} for m in order],
                    "submitted": (participant_id, set_id) in self._submitted,
                }
            )
        return out

    def submit_annotation(self, record: AnnotationRecord) -> int:
        validate_annotation(record)
        if self.sets and record.set_id not in self.sets:
            raise UnknownSet(f"no study set named {record.set_id!r}")
        with self._lock:
            if (record.participant_id, record.set_id) in self._submitted:
                raise DuplicateSubmission(
                    f"{record.participant_id} already annotated {record.set_id}"
                )
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_record(), ensure_ascii=False) + "\n")
                fh.flush()
            self._annotations.append(record)
            self._submitted.add((record.participant_id, record.set_id))
            return len(self._annotations)

    @property
    def annotations(self) -> tuple[AnnotationRecord, ...]:
        with self._lock:
            return tuple(self._annotations)


@dataclass(frozen=True)
class ModelScore:
    overall_quality: float
    object_identity: float
    scene_identity: float
    avg_rank: float
    pct_ranked_first: float


@dataclass(frozen=True)
class StudyReport:
    models: dict[str, ModelScore]
    n_annotations: int
    n_participants: int

    def to_json(self) -> str:
        payload = {
            "n_annotations": self.n_annotations,
            "n_participants": self.n_participants,
            "models": {
                m: {
                    "overall_quality": s.overall_quality,
                    "object_identity": s.object_identity,
                    "scene_identity": s.scene_identity,
                    "avg_rank": s.avg_rank,
                    "pct_ranked_first": s.pct_ranked_first,
                }
                for m, s in sorted(self.models.items())
            },
        }
        return json.dumps(payload, indent=2) + "\n"


def aggregate(annotations: list[AnnotationRecord] | tuple[AnnotationRecord, ...]) -> StudyReport:
    """Mean ratings, mean rank, and first-place share per model, full precision."""
    if not annotations:
        raise EmptyStudy("no annotations to aggregate")
    models: dict[str, dict] = {}
    for record in annotations:
        for model, rank in record.ranks.items():
            bucket = models.setdefault(
                model, {"ranks": [], "first": 0, **{a: [] for a in RATING_ASPECTS}}
            )
            bucket["ranks"].append(rank)
            if rank == 1:
                bucket["first"] += 1
            for aspect in RATING_ASPECTS:
                bucket[aspect].append(record.ratings[model][aspect])

    n = len(annotations)
    scores = {}
    for model, bucket in models.items():
        scores[model] = ModelScore(
            overall_quality=sum(bucket["overall_quality"]) / len(bucket["overall_quality"]),
            object_identity=sum(bucket["object_identity"]) / len(bucket["object_identity"]),
            scene_identity=sum(bucket["scene_identity"]) / len(bucket["scene_identity"]),
            avg_rank=sum(bucket["ranks"]) / len(bucket["ranks"]),
            pct_ranked_first=100.0 * bucket["first"] / n,
        )
    participants = {r.participant_id for r in annotations}
    return StudyReport(models=scores, n_annotations=n, n_participants=len(participants))


_COLUMNS = (
    ("Overall Quality", "overall_quality", "{:.2f}"),
    ("Object Identity", "object_identity", "{:.2f}"),
    ("Scene Identity", "scene_identity", "{:.2f}"),
    ("Avg. Rank", "avg_rank", "{:.2f}"),
    ("% Ranked 1st", "pct_ranked_first", "{:.1f}%"),
)


def render_report(report: StudyReport) -> str:
    """Fixed-width table, best model (lowest mean rank) first."""
    rows = sorted(report.models.items(), key=lambda kv: (kv[1].avg_rank, kv[0]))
    names = [model or "(unnamed)" for model, _ in rows]
    model_width = max([len("Model")] + [len(n) for n in names])

    header_cells = ["Model".ljust(model_width)]
    header_cells += [title for title, _, _ in _COLUMNS]
    lines = ["  ".join(header_cells)]
    for name, (_, score) in zip(names, rows):
        cells = [name.ljust(model_width)]
        for title, attr, fmt in _COLUMNS:
            cells.append(fmt.format(getattr(score, attr)).rjust(len(title)))
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"
