"""Suite-wide fixtures; reusable builders live in helpers.py."""

from __future__ import annotations

import numpy as np
import pytest

from elnkit.core import seeded_rng


@pytest.fixture
def rng() -> np.random.Generator:
    return seeded_rng(20240815)
