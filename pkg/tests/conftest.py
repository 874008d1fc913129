"""Shared fixtures: sys.path setup plus a small trained pipeline."""
from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import helpers
import synthdata
from querysmt import PipelineConfig, train_all

DATA_DIR = Path(__file__).resolve().parent / "data"


@pytest.fixture()
def toy_bundle():
    return helpers.make_toy_bundle()


@pytest.fixture(scope="session")
def mini_trained(tmp_path_factory):
    """A full train_all run on a small synthetic corpus, shared read-only.

    Returns (cfg, workdir, bundle, synonym_map). Tests must not modify the
    workdir; anything destructive gets its own copy.
    """
    root = tmp_path_factory.mktemp("mini_train")
    rows, synonym_map = synthdata.make_pairs(250, seed=11)
    raw = synthdata.write_tsv(rows, root / "raw.tsv")
    wd = root / "work"
    cfg = PipelineConfig(
        raw_tsv=str(raw),
        workdir=str(wd),
        seed=42,
        dev_cap=40,
        mert_max_iters=2,
        mert_nbest=30,
    )
    bundle = train_all(cfg)
    return cfg, wd, bundle, synonym_map
