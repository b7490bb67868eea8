"""Curated training set: validated JSONL records, category stats, trainer config.

The manifest is append-only, one JSON object per line with a stable field
order so diffs stay readable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from PIL import Image

from .errors import (
    AlreadyPrefixed,
    DuplicateId,
    EmptyCaption,
    EmptyManifest,
    InvalidOverride,
    ValidationFailed,
)

TRANSITION_PHRASE = "ad23r2 the camera view suddenly changes."
TRANSITION_PREFIX = TRANSITION_PHRASE + " "

CATEGORIES = ("human_object", "human_human", "element_insertion", "robot_manipulation")

REQUIRED_FRAME_COUNT = 81
REQUIRED_COMPOSITE_SIZE = (1280, 720)

MANIFEST_FIELDS = (
    "id",
    "composite_path",
    "caption",
    "category",
    "source_video",
    "frame_count",
    "element_labels",
)


def has_transition_prefix(text: str) -> bool:
    return text.startswith(TRANSITION_PREFIX) and len(text) > len(TRANSITION_PREFIX)


def prefix_transition(caption: str) -> str:
    """Prepend the transition phrase; refuses empty or already-prefixed captions."""
    if not caption.strip():
        raise EmptyCaption("cannot prefix an empty caption")
    if caption.startswith(TRANSITION_PHRASE):
        raise AlreadyPrefixed("caption already carries the transition phrase")
    return TRANSITION_PREFIX + caption


@dataclass(frozen=True)
class TrainingSample:
    composite_path: str
    caption: str
    category: str
    source_video: str
    frame_count: int
    element_labels: tuple[str, ...]
    id: int | None = None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "composite_path": self.composite_path,
            "caption": self.caption,
            "category": self.category,
            "source_video": self.source_video,
            "frame_count": self.frame_count,
            "element_labels": list(self.element_labels),
        }

    @classmethod
    def from_record(cls, record: dict) -> "TrainingSample":
        return cls(
            id=record["id"],
            composite_path=record["composite_path"],
            caption=record["caption"],
            category=record["category"],
            source_video=record["source_video"],
            frame_count=record["frame_count"],
            element_labels=tuple(record["element_labels"]),
        )


def validate_sample(sample: TrainingSample, check_files: bool = True) -> list[str]:
    """Return the list of violated invariants, empty when the sample is clean."""
    report = []
    if sample.frame_count != REQUIRED_FRAME_COUNT:
        report.append(
            f"frame_count is {sample.frame_count}, expected {REQUIRED_FRAME_COUNT}"
        )
    if not sample.caption.strip():
        report.append("caption is empty")
    elif sample.caption.startswith(TRANSITION_PHRASE):
        report.append("caption already starts with the transition phrase")
    if sample.category not in CATEGORIES:
        report.append(f"unknown category {sample.category!r}")
    if check_files:
        path = Path(sample.composite_path)
        if not path.is_file():
            report.append(f"composite not found: {sample.composite_path}")
        else:
            with Image.open(path) as img:
                if img.size != REQUIRED_COMPOSITE_SIZE:
                    report.append(
                        f"composite is {img.size[0]}x{img.size[1]}, expected "
                        f"{REQUIRED_COMPOSITE_SIZE[0]}x{REQUIRED_COMPOSITE_SIZE[1]}"
                    )
    return report


class Manifest:
    """Append-only JSONL store of training samples; ids never reused."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._samples: list[TrainingSample] = []
        self._next_id = 1
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                sample = TrainingSample.from_record(json.loads(line))
                self._samples.append(sample)
                self._next_id = max(self._next_id, (sample.id or 0) + 1)

    def __len__(self) -> int:
        return len(self._samples)

    @property
    def samples(self) -> tuple[TrainingSample, ...]:
        return tuple(self._samples)

    def add_sample(self, sample: TrainingSample, check_files: bool = True) -> int:
        report = validate_sample(sample, check_files=check_files)
        if report:
            raise ValidationFailed(report)
        if sample.id is None:
            sample = replace(sample, id=self._next_id)
        elif any(s.id == sample.id for s in self._samples):
            raise DuplicateId(f"id {sample.id} already in manifest")
        self._next_id = max(self._next_id, sample.id + 1)
        line = json.dumps(sample.to_record(), ensure_ascii=False)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
        self._samples.append(sample)
        return sample.id


def category_stats(manifest: Manifest) -> dict[str, float]:
    """Percent of samples per category, one decimal, summing to exactly 100.0.

    Largest-remainder allocation over tenths of a percent, so the rounded
    shares always add up.
    """
    if len(manifest) == 0:
        raise EmptyManifest("cannot compute stats for an empty manifest")
    counts = {cat: 0 for cat in CATEGORIES}
    for sample in manifest.samples:
        counts[sample.category] = counts.get(sample.category, 0) + 1
    total = len(manifest)

    tenths = {cat: counts[cat] * 1000 // total for cat in counts}
    remainders = {cat: counts[cat] * 1000 % total for cat in counts}
    leftover = 1000 - sum(tenths.values())
    for cat in sorted(counts, key=lambda c: (-remainders[c], list(counts).index(c)))[:leftover]:
        tenths[cat] += 1
    return {cat: tenths[cat] / 10.0 for cat in counts}


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters emitted for the external trainer.

    ``lora_alpha`` has no default on purpose: no canonical value exists, so
    callers must choose one explicitly.
    """

    lora_alpha: float
    lora_rank: int = 128
    learning_rate: float = 1e-4
    adam_epsilon: float = 1e-10
    weight_decay: float = 3e-2
    batch_size: int = 4
    resolution: tuple[int, int] = (1344, 768)
    frames: int = 81
    transition_phrase: str = TRANSITION_PHRASE

    def __post_init__(self):
        numeric = {
            "lora_alpha": self.lora_alpha,
            "lora_rank": self.lora_rank,
            "learning_rate": self.learning_rate,
            "adam_epsilon": self.adam_epsilon,
            "weight_decay": self.weight_decay,
            "batch_size": self.batch_size,
            "frames": self.frames,
        }
        for name, value in numeric.items():
            if value <= 0:
                raise InvalidOverride(f"{name} must be positive, got {value}")
        if self.resolution[0] <= 0 or self.resolution[1] <= 0:
            raise InvalidOverride(f"resolution must be positive, got {self.resolution}")
        if self.transition_phrase != TRANSITION_PHRASE:
            raise InvalidOverride("transition_phrase must equal the canonical constant")


_OVERRIDE_FIELDS = frozenset(
    {
        "lora_alpha",
        "lora_rank",
        "learning_rate",
        "adam_epsilon",
        "weight_decay",
        "batch_size",
        "resolution",
        "frames",
    }
)


def emit_train_config(
    manifest: Manifest | None,
    overrides: dict | None = None,
    lora_alpha: float | None = None,
) -> str:
    """Serialize the trainer configuration as JSON text.

    Both denoiser targets (high and low noise) receive an identical adapter
    spec. Unknown or non-positive overrides raise InvalidOverride.
    """
    overrides = dict(overrides or {})
    if lora_alpha is not None:
        overrides.setdefault("lora_alpha", lora_alpha)
    unknown = set(overrides) - _OVERRIDE_FIELDS
    if unknown:
        raise InvalidOverride(f"unknown config fields: {sorted(unknown)}")
    if "lora_alpha" not in overrides:
        raise InvalidOverride("lora_alpha has no default and must be supplied")
    if "resolution" in overrides:
        overrides["resolution"] = tuple(overrides["resolution"])
    config = TrainConfig(**overrides)

    adapter_spec = {"rank": config.lora_rank, "alpha": config.lora_alpha}
    payload = {
        "lora_rank": config.lora_rank,
        "lora_alpha": config.lora_alpha,
        "learning_rate": config.learning_rate,
        "adam_epsilon": config.adam_epsilon,
        "weight_decay": config.weight_decay,
        "batch_size": config.batch_size,
        "resolution": list(config.resolution),
        "frames": config.frames,
        "transition_phrase": config.transition_phrase,
        "targets": {"high_noise": adapter_spec, "low_noise": dict(adapter_spec)},
    }
    return json.dumps(payload, indent=2) + "\n"
