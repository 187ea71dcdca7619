"""Embedding table I/O: bit-exact binary round-trips, text parsing, lookup."""

import struct

import numpy as np
import pytest

from semlink.embed_io import (
    EmbeddingTable,
    VectorRef,
    load_binary,
    load_text,
    lookup,
    save_binary,
    save_text,
)
from semlink.errors import (
    DuplicateLabelError,
    FormatError,
    MissingLabelError,
    TruncatedError,
)


def write_reference_binary(path, entries, per_entry_newline=False):
    """Independent writer used as the round-trip oracle: struct.pack only."""
    dim = len(entries[0][1]) if entries else 0
    with open(path, "wb") as fh:
        fh.write(f"{len(entries)} {dim}\n".encode("ascii"))
        for label, values in entries:
            fh.write(label.encode("utf-8") + b" ")
            fh.write(struct.pack(f"<{len(values)}f", *values))
            if per_entry_newline:
                fh.write(b"\n")


class TestBinary:
    def test_minimal_well_formed_file(self, tmp_path):
        p = tmp_path / "t.bin"
        write_reference_binary(p, [("a", [1, 2, 3]), ("b", [4, 5, 6])])
        table = load_binary(p)
        assert table.dim == 3
        assert len(table) == 2
        assert table.labels == ["a", "b"]
        np.testing.assert_array_equal(table.vector("a"), np.float32([1, 2, 3]))

    def test_empty_table(self, tmp_path):
        p = tmp_path / "t.bin"
        p.write_bytes(b"0 300\n")
        table = load_binary(p)
        assert len(table) == 0
        assert table.dim == 300

    def test_save_empty_table_is_header_only(self, tmp_path):
        p = tmp_path / "t.bin"
        save_binary(EmbeddingTable(300), p)
        assert p.read_bytes() == b"0 300\n"

    def test_round_trip_is_byte_identical(self, tmp_path, rng):
        entries = [
            (f"w{i}", [float(np.float32(x)) for x in rng.standard_normal(5)])
            for i in range(20)
        ]
        src = tmp_path / "src.bin"
        dst = tmp_path / "dst.bin"
        write_reference_binary(src, entries)
        save_binary(load_binary(src), dst)
        assert src.read_bytes() == dst.read_bytes()

    def test_per_entry_newlines_accepted_and_normalized(self, tmp_path):
        entries = [("a", [1.0, 2.0]), ("b", [3.0, 4.0])]
        with_nl = tmp_path / "nl.bin"
        plain = tmp_path / "plain.bin"
        write_reference_binary(with_nl, entries, per_entry_newline=True)
        write_reference_binary(plain, entries)
        t1 = load_binary(with_nl)
        t2 = load_binary(plain)
        assert t1 == t2
        out = tmp_path / "out.bin"
        save_binary(t1, out)
        assert out.read_bytes() == plain.read_bytes()

    def test_load_save_load_fixpoint(self, tmp_path, make_table):
        table = make_table(50, 7)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_binary(table, p1)
        again = load_binary(p1)
        assert again == table
        save_binary(again, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_malformed_headers(self, tmp_path):
        for payload in (b"", b"nope\nrest", b"2\n", b"2 3 4\n", b"-1 3\n", b"a b\n"):
            p = tmp_path / "bad.bin"
            p.write_bytes(payload)
            with pytest.raises(FormatError):
                load_binary(p)

    def test_truncated_body(self, tmp_path):
        p = tmp_path / "t.bin"
        write_reference_binary(p, [("a", [1.0, 2.0]), ("b", [3.0, 4.0])])
        whole = p.read_bytes()
        for cut in (len(whole) - 3, len(whole) - 9):
            p.write_bytes(whole[:cut])
            with pytest.raises(TruncatedError):
                load_binary(p)

    def test_trailing_garbage(self, tmp_path):
        p = tmp_path / "t.bin"
        write_reference_binary(p, [("a", [1.0, 2.0])])
        p.write_bytes(p.read_bytes() + b"xx")
        with pytest.raises(FormatError):
            load_binary(p)

    def test_duplicate_label(self, tmp_path):
        p = tmp_path / "t.bin"
        write_reference_binary(p, [("a", [1.0]), ("a", [2.0])])
        with pytest.raises(DuplicateLabelError):
            load_binary(p)

    def test_non_finite_rejected(self, tmp_path):
        p = tmp_path / "t.bin"
        write_reference_binary(p, [("a", [1.0, float("nan")])])
        with pytest.raises(ValueError):
            load_binary(p)
        write_reference_binary(p, [("a", [float("inf"), 0.0])])
        with pytest.raises(ValueError):
            load_binary(p)

    def test_label_bytes_survive_round_trip(self, tmp_path):
        # labels are raw bytes apart from space/newline
        raw = b"1 2\n" + b"caf\xe9\xff " + struct.pack("<2f", 1.0, 2.0)
        p = tmp_path / "t.bin"
        p.write_bytes(raw)
        table = load_binary(p)
        out = tmp_path / "o.bin"
        save_binary(table, out)
        assert out.read_bytes() == raw

    def test_save_rejects_whitespace_labels(self, tmp_path):
        table = EmbeddingTable.from_pairs([("a b", [1.0])])
        with pytest.raises(FormatError):
            save_binary(table, tmp_path / "x.bin")

    def test_normalize_flag(self, tmp_path):
        p = tmp_path / "t.bin"
        write_reference_binary(p, [("a", [3.0, 4.0]), ("z", [0.0, 0.0])])
        table = load_binary(p, normalize=True)
        np.testing.assert_allclose(table.vector("a"), [0.6, 0.8], atol=1e-7)
        np.testing.assert_array_equal(table.vector("z"), [0.0, 0.0])


class TestText:
    def test_simple_parse(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("a 1.0 2.0\n", "utf-8")
        table = load_text(p)
        assert table.dim == 2
        np.testing.assert_array_equal(table.vector("a"), np.float32([1, 2]))

    def test_ragged_rows(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("a 1.0 2.0 3.0\nb 1.0 2.0\n", "utf-8")
        with pytest.raises(FormatError):
            load_text(p)

    def test_bad_float(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("a 1.0 zap\n", "utf-8")
        with pytest.raises(FormatError):
            load_text(p)

    def test_text_round_trip_exact_for_float32(self, tmp_path, make_table):
        table = make_table(30, 6)
        p = tmp_path / "t.txt"
        save_text(table, p)
        again = load_text(p)
        # 9 significant digits round-trip float32 exactly
        assert again == table

    def test_text_binary_cross_round_trip(self, tmp_path, make_table):
        table = make_table(25, 4)
        pb, pt = tmp_path / "t.bin", tmp_path / "t.txt"
        save_binary(table, pb)
        save_text(table, pt)
        tb, tt = load_binary(pb), load_text(pt)
        assert tb.labels == tt.labels
        np.testing.assert_allclose(tb.matrix, tt.matrix, atol=1e-6)

    def test_empty_needs_dim(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("", "utf-8")
        with pytest.raises(FormatError):
            load_text(p)
        assert len(load_text(p, dim=4)) == 0


class TestLookup:
    def test_hit_and_miss(self):
        table = EmbeddingTable.from_pairs([("a", [1.0])])
        ref = lookup(table, "a")
        assert isinstance(ref, VectorRef)
        np.testing.assert_array_equal(ref.values, np.float32([1.0]))
        assert lookup(table, "b") is None

    def test_lookup_matches_raw_bytes(self, tmp_path, rng):
        values = {f"w{i}": rng.standard_normal(3).astype(np.float32) for i in range(10)}
        entries = [(k, [float(x) for x in v]) for k, v in values.items()]
        p = tmp_path / "t.bin"
        write_reference_binary(p, entries)
        table = load_binary(p)
        raw = p.read_bytes()
        body = raw[raw.find(b"\n") + 1 :]
        offset = 0
        for label, _vals in entries:
            offset += len(label.encode()) + 1
            expected = np.frombuffer(body, dtype="<f4", count=3, offset=offset)
            np.testing.assert_array_equal(lookup(table, label).values, expected)
            offset += 12

    def test_lookup_independent_of_insertion_order(self, rng):
        pairs = [(f"w{i}", rng.standard_normal(4)) for i in range(30)]
        want = {label: np.asarray(v, dtype=np.float32) for label, v in pairs}
        for _ in range(5):
            perm = rng.permutation(len(pairs))
            table = EmbeddingTable.from_pairs([pairs[i] for i in perm])
            for label, expected in want.items():
                np.testing.assert_array_equal(table.vector(label), expected)

    def test_vector_raises_missing_label(self):
        table = EmbeddingTable.from_pairs([("a", [1.0])])
        with pytest.raises(MissingLabelError):
            table.vector("nope")


class TestTableInvariants:
    def test_dim_mismatch_rejected(self):
        with pytest.raises(FormatError):
            EmbeddingTable.from_pairs([("a", [1.0, 2.0]), ("b", [1.0])])

    def test_duplicate_rejected(self):
        with pytest.raises(DuplicateLabelError):
            EmbeddingTable.from_pairs([("a", [1.0]), ("a", [2.0])])

    def test_rows_are_read_only(self):
        table = EmbeddingTable.from_pairs([("a", [1.0])])
        with pytest.raises(ValueError):
            table.matrix[0, 0] = 5.0
