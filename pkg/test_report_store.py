"""Tests for the SQLite report ledger"""

import pytest

from conftest import domain
from hartogs_core import canonical_proper
from report_store import ReportStore
from verify_core import VerificationReport, run_suite


@pytest.fixture
def store(tmp_path):
    return ReportStore(str(tmp_path / "reports" / "ledger.db"))


@pytest.fixture
def descriptor():
    return canonical_proper(domain(["2"], ["3"]), domain(["2"], ["5"])).to_dict()


def test_record_run_round_trip(store, descriptor):
    reports = [
        VerificationReport("proper_form", 1, 0.0, 0.0, True, 11),
        VerificationReport("interior_mapping", 40, 0.25, 1e-10, False, 12, {"min_image_gap": -0.25}),
    ]
    assert store.record_run(descriptor, reports) == 2

    rows = store.recent_runs()
    assert [row["property"] for row in rows] == ["interior_mapping", "proper_form"]
    latest = rows[0]
    assert latest["case"] == "11"
    assert latest["src"] == {"p": ["2"], "q": ["3"]}
    assert latest["pass"] is False
    assert latest["details"] == {"min_image_gap": -0.25}
    assert latest["session_id"] == store.session_id


def test_filter_and_limit(store, descriptor):
    store.record_run(descriptor, run_suite(canonical_proper(domain(["1"], ["1"]), domain(["1"], ["1"])),
                                           "proper_form,interior_mapping", count=10, seed=1))
    store.record_run(descriptor, [VerificationReport("proper_form", 1, 0.0, 0.0, True)])
    assert len(store.recent_runs(property_name="proper_form")) == 2
    assert len(store.recent_runs(limit=1)) == 1


def test_failure_count_is_per_session(tmp_path, descriptor):
    path = str(tmp_path / "ledger.db")
    first, second = ReportStore(path), ReportStore(path)
    second.session_id = first.session_id + "_other"
    failing = [VerificationReport("holomorphy_fd", 5, 1.0, 1e-5, False)]
    first.record_run(descriptor, failing)
    assert first.failure_count() == 1
    assert second.failure_count() == 0
    assert second.failure_count(first.session_id) == 1


def test_record_map(store, descriptor):
    first = store.record_map(descriptor)
    second = store.record_map(descriptor)
    assert second == first + 1
