import numpy as np
import pytest

from majorness.comparisons import Choice, ComparisonRecord, ComparisonSet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_records(spec, start_ts=0.0):
    """spec: list of (rater, left, right, choice) tuples; timestamps increase."""
    records = []
    for i, (rater, left, right, choice) in enumerate(spec):
        records.append(ComparisonRecord(rater, left, right, Choice(choice), start_ts + i))
    return records


def comparison_set(spec):
    return ComparisonSet(tuple(make_records(spec)))
