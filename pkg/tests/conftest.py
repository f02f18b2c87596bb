"""Shared fixtures: a small synthetic dataset in-memory and on disk.

The full-size public CSV is not redistributable, so tests that need real
data look for it via the MALMEM_DATA environment variable and skip politely
when it is absent.
"""
import os
from pathlib import Path

import pytest

from _synth import small_counts, synth_table, write_synth_csv


@pytest.fixture(scope="session")
def small_frame():
    return synth_table(small_counts(), seed=5)


@pytest.fixture(scope="session")
def small_table(small_csv):
    from malmem.ingest import load_csv

    return load_csv(small_csv)


@pytest.fixture(scope="session")
def small_csv(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "synth.csv"
    write_synth_csv(path, small_counts(), seed=5)
    return path


@pytest.fixture(scope="session")
def tiny_csv(tmp_path_factory) -> Path:
    """Very small table for CLI and runner round trips."""
    path = tmp_path_factory.mktemp("data") / "tiny.csv"
    write_synth_csv(path, small_counts(scale=200), seed=9, n_features=12)
    return path


def real_dataset_path() -> Path | None:
    value = os.environ.get("MALMEM_DATA", "").strip()
    if not value:
        return None
    path = Path(value)
    return path if path.is_file() else None
