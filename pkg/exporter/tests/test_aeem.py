"""Binary embedding file writer.

The consumer package ships its own writer and reader for the same format;
these tests pin byte-for-byte agreement with that writer and verify the
consumer's reader accepts everything ours produces.
"""

import numpy as np
import pytest
from acroex import embeddings as consumer

from acroex_exporter.aeem import FORMAT_VERSION, MAGIC, write_embedding_file
from acroex_exporter.errors import ExporterError


def sample_records():
    rng = np.random.default_rng(17)
    return [
        ("doc-000", rng.normal(size=(4, 3))),
        ("doc-001", rng.normal(size=(1, 3))),
        ("tétè-ید", rng.normal(size=(2, 3))),
        ("doc-003", np.zeros((0, 3))),
    ]


def test_magic_and_version():
    assert MAGIC == b"AEEM"
    assert FORMAT_VERSION == 1


def test_bytes_identical_to_consumer_writer(tmp_path):
    records = sample_records()
    ours = tmp_path / "ours.bin"
    theirs = tmp_path / "theirs.bin"
    write_embedding_file(ours, 3, records)
    consumer.write_embedding_file(theirs, 3, records)
    assert ours.read_bytes() == theirs.read_bytes()


def test_consumer_reads_our_file(tmp_path):
    records = sample_records()
    path = tmp_path / "e.bin"
    write_embedding_file(path, 3, records)
    table = consumer.open_embedding_file(path)
    assert table.dim == 3
    for doc_id, matrix in records:
        got = table.lookup(doc_id, expected_token_count=matrix.shape[0])
        np.testing.assert_array_equal(got, matrix.astype("<f4").astype(np.float64))


def test_empty_file_is_header_only_and_readable(tmp_path):
    path = tmp_path / "empty.bin"
    write_embedding_file(path, 5, [])
    raw = path.read_bytes()
    assert raw == b"AEEM" + (1).to_bytes(4, "little") + (5).to_bytes(4, "little")
    table = consumer.open_embedding_file(path)
    assert table.dim == 5


def test_float32_cast_is_applied(tmp_path):
    value = 0.1  # not exactly representable; storage rounds to float32
    path = tmp_path / "e.bin"
    write_embedding_file(path, 1, [("d", np.array([[value]]))])
    got = consumer.open_embedding_file(path).lookup("d", expected_token_count=1)
    assert got[0, 0] == np.float32(value)
    assert got[0, 0] != value


def test_rejects_nonpositive_dim(tmp_path):
    with pytest.raises(ExporterError, match="dim"):
        write_embedding_file(tmp_path / "e.bin", 0, [])


def test_rejects_wrong_row_width(tmp_path):
    with pytest.raises(ExporterError, match="doc-000"):
        write_embedding_file(tmp_path / "e.bin", 3, [("doc-000", np.zeros((2, 4)))])


def test_rejects_wrong_rank(tmp_path):
    with pytest.raises(ExporterError, match="doc-000"):
        write_embedding_file(tmp_path / "e.bin", 3, [("doc-000", np.zeros(3))])


def test_accepts_generator_input(tmp_path):
    path = tmp_path / "e.bin"
    write_embedding_file(path, 2, (("d%d" % i, np.full((1, 2), i)) for i in range(3)))
    table = consumer.open_embedding_file(path)
    assert table.lookup("d2", expected_token_count=1)[0, 0] == 2.0
