#!/usr/bin/env python3
"""Regenerate the checked-in golden files under tests/data/.

The composite golden is produced by the per-pixel reference compositor in
tests/reference.py (not the library) and should be reviewed visually after
any regeneration. Run from the repository root:

    python3 scripts/make_goldens.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))
sys.path.insert(0, str(ROOT / "src"))

from ffgo.manifest import emit_train_config  # noqa: E402
from ffgo.raster import save_png  # noqa: E402
from ffgo.study import render_report  # noqa: E402

from tests.fixtures import (  # noqa: E402
    golden_background,
    golden_elements,
    manifest_50_records,
    published_report,
)
from tests.reference import ref_render  # noqa: E402


def main() -> None:
    golden_dir = ROOT / "tests" / "data" / "golden"
    fixture_dir = ROOT / "tests" / "data" / "fixtures"
    golden_dir.mkdir(parents=True, exist_ok=True)
    fixture_dir.mkdir(parents=True, exist_ok=True)

    print("rendering composite golden with the reference compositor (slow)...")
    composite = ref_render(golden_elements(), golden_background(), 1280, 720)
    save_png(golden_dir / "composite_3elem.png", composite)
    print(f"  wrote {golden_dir / 'composite_3elem.png'}")

    config = emit_train_config(None, {}, lora_alpha=1.0)
    (golden_dir / "train_config.json").write_text(config, encoding="utf-8")
    print(f"  wrote {golden_dir / 'train_config.json'}")

    table = render_report(published_report())
    (golden_dir / "study_table.txt").write_text(table, encoding="utf-8")
    print(f"  wrote {golden_dir / 'study_table.txt'}")

    lines = [json.dumps(r, ensure_ascii=False) for r in manifest_50_records()]
    (fixture_dir / "manifest_50.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"  wrote {fixture_dir / 'manifest_50.jsonl'}")


if __name__ == "__main__":
    main()
