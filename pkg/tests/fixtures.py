"""Deterministic fixtures shared by the test suite and the golden scripts."""

from __future__ import annotations

import numpy as np

from ffgo.raster import byte_stream
from ffgo.study import AnnotationRecord, ModelScore, StudyReport

GOLDEN_CANVAS = (1280, 720)


def _block_noise(w: int, h: int, tag: str, block: int = 8) -> np.ndarray:
    """Coarse RGB noise so golden composites are reviewable by eye."""
    bw = (w + block - 1) // block
    bh = (h + block - 1) // block
    raw = byte_stream(bw * bh * 3, "golden-block", tag, w, h)
    tile = np.frombuffer(raw, dtype=np.uint8).reshape(bh, bw, 3)
    return tile[np.arange(h) // block][:, np.arange(w) // block]


def golden_elements() -> list[np.ndarray]:
    """Three RGBA cut-outs with transparent margins of different widths."""
    specs = [("lamp", 60, 90, 6), ("crate", 120, 44, 4), ("banner", 33, 77, 3)]
    layers = []
    for tag, w, h, margin in specs:
        rgba = np.zeros((h, w, 4), dtype=np.uint8)
        rgba[..., :3] = _block_noise(w, h, tag)
        rgba[margin : h - margin, margin : w - margin, 3] = 255
        layers.append(rgba)
    return layers


def golden_background() -> np.ndarray:
    return _block_noise(320, 180, "background", block=16)


def published_report() -> StudyReport:
    """Four-model study summary used for the table-rendering golden."""
    return StudyReport(
        models={
            "FFGo": ModelScore(4.28, 4.53, 4.58, 1.21, 81.2),
            "VACE": ModelScore(3.00, 3.50, 3.66, 2.50, 11.1),
            "SkyReels-A2": ModelScore(2.34, 2.89, 3.43, 3.02, 4.3),
            "Wan2.2-I2V-A14B": ModelScore(2.09, 3.32, 3.01, 3.27, 3.4),
        },
        n_annotations=200,
        n_participants=40,
    )


STUDY_MODELS = ("alpha", "bravo", "charlie", "delta")


def twelve_annotations() -> list[AnnotationRecord]:
    """Hand-built 12-record study; expected metrics in TWELVE_EXPECTED."""
    records = []
    for j in range(12):
        if j < 9:
            ranks = {"alpha": 1, "bravo": 2, "charlie": 3, "delta": 4}
        else:
            ranks = {"alpha": 2, "bravo": 1, "charlie": 3, "delta": 4}
        ratings = {
            "alpha": {
                "overall_quality": 5 if j < 9 else 4,
                "object_identity": 5,
                "scene_identity": 4 if j < 6 else 5,
            },
            "bravo": {
                "overall_quality": 4,
                "object_identity": 3 if j < 3 else 4,
                "scene_identity": 4,
            },
            "charlie": {
                "overall_quality": 3,
                "object_identity": 3,
                "scene_identity": 3,
            },
            "delta": {
                "overall_quality": 1 if j < 6 else 2,
                "object_identity": 2,
                "scene_identity": 1 if j < 3 else 2,
            },
        }
        order = STUDY_MODELS[j % 4 :] + STUDY_MODELS[: j % 4]
        records.append(
            AnnotationRecord(
                participant_id=f"p{j // 4 + 1}",
                set_id=f"s{j % 4 + 1}",
                ranks=ranks,
                ratings=ratings,
                display_order=order,
            )
        )
    return records


# every value below is hand arithmetic over the 12 records above:
# alpha ranks: nine 1s + three 2s = 15/12; overall: nine 5s + three 4s = 57/12;
# scene: six 4s + six 5s = 54/12; bravo object: three 3s + nine 4s = 45/12;
# delta overall: six 1s + six 2s = 18/12; delta scene: three 1s + nine 2s = 21/12
TWELVE_EXPECTED = {
    "alpha": ModelScore(
        overall_quality=4.75, object_identity=5.0, scene_identity=4.5,
        avg_rank=1.25, pct_ranked_first=75.0,
    ),
    "bravo": ModelScore(
        overall_quality=4.0, object_identity=3.75, scene_identity=4.0,
        avg_rank=1.75, pct_ranked_first=25.0,
    ),
    "charlie": ModelScore(
        overall_quality=3.0, object_identity=3.0, scene_identity=3.0,
        avg_rank=3.0, pct_ranked_first=0.0,
    ),
    "delta": ModelScore(
        overall_quality=1.5, object_identity=2.0, scene_identity=1.75,
        avg_rank=4.0, pct_ranked_first=0.0,
    ),
}

MANIFEST_50_COUNTS = {
    "human_object": 30,
    "human_human": 7,
    "element_insertion": 10,
    "robot_manipulation": 3,
}


def manifest_50_records() -> list[dict]:
    records = []
    sample_id = 0
    for category, count in MANIFEST_50_COUNTS.items():
        for i in range(count):
            sample_id += 1
            records.append(
                {
                    "id": sample_id,
                    "composite_path": f"composites/{category}_{i:02d}.png",
                    "caption": f"Sample {sample_id}: a {category.replace('_', ' ')} scene.",
                    "category": category,
                    "source_video": f"frames/{category}_{i:02d}",
                    "frame_count": 81,
                    "element_labels": ["subject", "background prop"],
                }
            )
    return records
