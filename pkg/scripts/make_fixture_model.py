#!/usr/bin/env python3
"""Regenerate the checked-in fixture model bundle (models/evnet16-n2).

The bundle carries random-but-valid weights from a fixed seed so the
acceptance suite and `evtkit bench` run without a trained model.
"""

from pathlib import Path

from evtkit.model_io import save_model
from evtkit.models import FIXTURE_SEED, fixture_model

if __name__ == "__main__":
    out = Path(__file__).resolve().parent.parent / "models" / "evnet16-n2"
    model = fixture_model()
    path = save_model(model, out)
    print(f"seed {FIXTURE_SEED}: {model.param_count} params -> {path}")
