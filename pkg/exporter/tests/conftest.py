"""Session fixtures and the acceptance summary hook.

Helper functions live in exp_fixtures (a uniquely named module) so test
modules can import them without colliding with the sibling test suite's
conftest in a combined run.
"""

import pytest

from exp_fixtures import (
    ACCEPTANCE_RESULTS,
    build_tiny_checkpoint,
    make_corpus_records,
    write_corpus,
)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("exporter acceptance criteria")
    for cid, status, detail in ACCEPTANCE_RESULTS:
        line = f"{cid} {status}"
        if detail:
            line += f" {detail}"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    return build_tiny_checkpoint(tmp_path_factory.mktemp("tiny_ckpt"))


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """(path, records) for a 50 document corpus file."""
    records = make_corpus_records(50, seed=23)
    path = write_corpus(records, tmp_path_factory.mktemp("corpus") / "docs.json")
    return path, records
