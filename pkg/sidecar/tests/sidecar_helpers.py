"""Constants and loaders shared across the sidecar suite."""

from __future__ import annotations

import json
from pathlib import Path

CASES_PATH = Path(__file__).resolve().parents[2] / "tests/fixtures/protocol/cases.json"

MODEL_ID = "hash:16"


def protocol_cases() -> list[dict]:
    return json.loads(CASES_PATH.read_text(encoding="utf-8"))["cases"]
