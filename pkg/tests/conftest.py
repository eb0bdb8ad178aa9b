from pathlib import Path

import numpy as np
import pytest

from evtkit.events import make_events
from evtkit.geometry import GridGeometry

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURE_MODEL_DIR = REPO_ROOT / "models" / "evnet16-n2"


@pytest.fixture
def geometry():
    return GridGeometry()


@pytest.fixture(scope="session")
def fixture_model_dir():
    return str(FIXTURE_MODEL_DIR)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_events(rng, n, t_max=(1 << 24) - 1, width=1280, height=720):
    """Sorted in-bounds random event batch."""
    t = np.sort(rng.integers(0, t_max, n))
    return make_events(
        rng.integers(0, width, n),
        rng.integers(0, height, n),
        rng.integers(0, 2, n),
        t,
    )


def clustered_events(rng, n, banks=6, rows=4, t_steps=50):
    """Events bunched into few banks/rows/timestamps so runs vectorize."""
    bank = rng.integers(0, banks, n) * 32
    x = bank + rng.integers(0, 32, n)
    y = rng.integers(0, rows, n)
    p = rng.integers(0, 2, n)
    t = np.sort(rng.integers(0, t_steps, n) * 1000)
    ev = make_events(x, y, p, t)
    # canonical sensor readout order inside a timestamp: row, polarity, column
    order = np.lexsort((ev["x"], ev["p"], ev["y"], ev["t"]))
    ev = ev[order]
    # drop exact duplicates; a bank vector cannot express repeats
    dup = np.zeros(len(ev), dtype=bool)
    dup[1:] = ev[1:] == ev[:-1]
    return ev[~dup]
