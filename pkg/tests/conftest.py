"""Shared fixtures: the bundled desk dataset, loaded once per session."""

from __future__ import annotations

import warnings

import pytest

from nodepower import ingest
from nodepower.data import desk_exclusions, desk_manifest
from nodepower.flops import FlopsMismatchWarning


@pytest.fixture(scope="session")
def desk_records_and_dataset():
    with warnings.catch_warnings():
        # the bundled dataset includes the workload with the documented
        # operation-count inconsistency; its warning is expected
        warnings.simplefilter("ignore", FlopsMismatchWarning)
        records, dataset = ingest.load_and_assemble(desk_manifest())
    return records, dataset


@pytest.fixture(scope="session")
def desk_dataset(desk_records_and_dataset):
    return desk_records_and_dataset[1]


@pytest.fixture(scope="session")
def desk_records(desk_records_and_dataset):
    return desk_records_and_dataset[0]


@pytest.fixture(scope="session")
def desk_exclusion_policy():
    return ingest.load_exclusions(desk_exclusions())
