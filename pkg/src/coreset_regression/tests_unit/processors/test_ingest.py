"""Unit tests for CSV ingestion."""

import numpy as np
import pytest

from coreset_regression.core.exceptions import CsvIngestionError
from coreset_regression.processors.ingest import ingest_csv, read_labelled_csv
from turnstile_sketch.utils.stream_io import parse_stream, replay_dense


@pytest.fixture
def labelled_csv(tmp_path):
    """Four rows, two features and a 0/1 label in the middle column."""
    path = tmp_path / "data.csv"
    path.write_text("x1,label,x2\n1.0,1,2.0\n-0.5,0,3.0\n\n2.0,1,0.0\n0.25,0,-1.5\n")
    return path


class TestReadLabelledCsv:
    """Test reading features and labels."""

    def test_label_by_name(self, labelled_csv):
        """Test the named column becomes y and is removed from X."""
        X, y = read_labelled_csv(labelled_csv, "label")
        np.testing.assert_array_equal(y, [1.0, 0.0, 1.0, 0.0])
        np.testing.assert_array_equal(X, [[1.0, 2.0], [-0.5, 3.0], [2.0, 0.0], [0.25, -1.5]])

    @pytest.mark.parametrize("label_column", [1, "1", -2])
    def test_label_by_position(self, labelled_csv, label_column):
        """Test positions, given as int or string and counted from either end."""
        _, y = read_labelled_csv(labelled_csv, label_column)
        np.testing.assert_array_equal(y, [1.0, 0.0, 1.0, 0.0])

    def test_without_header(self, tmp_path):
        """Test a file whose first row is data."""
        path = tmp_path / "plain.csv"
        path.write_text("1,2,3\n4,5,6\n")
        X, y = read_labelled_csv(path, 2, has_header=False)
        np.testing.assert_array_equal(y, [3.0, 6.0])
        assert X.shape == (2, 2)

    def test_non_numeric_cell_names_line_and_column(self, tmp_path):
        """Test the error points at the offending cell."""
        path = tmp_path / "bad.csv"
        path.write_text("a,b,y\n1,2,1\n3,oops,0\n")
        with pytest.raises(CsvIngestionError, match="line 3, column 2"):
            read_labelled_csv(path, "y")

    def test_ragged_row(self, tmp_path):
        """Test a row with a missing cell."""
        path = tmp_path / "ragged.csv"
        path.write_text("a,b,y\n1,2,1\n3,0\n")
        with pytest.raises(CsvIngestionError, match="line 3: expected 3 cells, got 2"):
            read_labelled_csv(path, "y")

    def test_non_finite_cell(self, tmp_path):
        """Test inf and nan cells are rejected."""
        path = tmp_path / "inf.csv"
        path.write_text("a,y\ninf,1\n")
        with pytest.raises(CsvIngestionError, match="non-finite"):
            read_labelled_csv(path, "y")

    def test_unknown_label_column(self, labelled_csv):
        """Test missing names and out-of-range positions."""
        with pytest.raises(CsvIngestionError, match="no column named"):
            read_labelled_csv(labelled_csv, "target")
        with pytest.raises(CsvIngestionError, match="outside"):
            read_labelled_csv(labelled_csv, 3)

    def test_no_data_rows(self, tmp_path):
        """Test a header-only file."""
        path = tmp_path / "empty.csv"
        path.write_text("a,y\n")
        with pytest.raises(CsvIngestionError, match="no data rows"):
            read_labelled_csv(path, "y")

    def test_missing_file(self, tmp_path):
        """Test unreadable paths."""
        with pytest.raises(CsvIngestionError, match="cannot read"):
            read_labelled_csv(tmp_path / "absent.csv", "y")


class TestIngestCsv:
    """Test folding a CSV into a stream."""

    def test_logistic_fold(self, labelled_csv, tmp_path):
        """Test rows -y x with 0/1 labels mapped to -1/+1."""
        path, header = ingest_csv(labelled_csv, "label", "logistic", tmp_path / "out.txt")
        assert (header.n, header.d) == (4, 2)
        expected = np.array([[-1.0, -2.0], [-0.5, 3.0], [-2.0, 0.0], [0.25, -1.5]])
        np.testing.assert_array_equal(replay_dense(path), expected)

    def test_lp_fold_appends_minus_y(self, tmp_path):
        """Test regression rows [x, -y]."""
        csv_path = tmp_path / "reg.csv"
        csv_path.write_text("x,y\n1.5,2.0\n-1.0,0.5\n")
        path, header = ingest_csv(csv_path, "y", "lp", tmp_path / "reg.txt")
        assert header.d == 2
        np.testing.assert_array_equal(replay_dense(path), [[1.5, -2.0], [-1.0, -0.5]])

    def test_relu_fold_appends_ones(self, labelled_csv, tmp_path):
        """Test the relu fold adds a constant column."""
        path, header = ingest_csv(labelled_csv, "label", "relu", tmp_path / "relu.txt")
        assert header.d == 3
        np.testing.assert_array_equal(replay_dense(path)[:, -1], np.ones(4))

    def test_zero_entries_are_not_streamed(self, labelled_csv, tmp_path):
        """Test one update per nonzero entry."""
        path, _ = ingest_csv(labelled_csv, "label", "logistic", tmp_path / "out.txt")
        with parse_stream(path) as reader:
            updates = list(reader)
        assert len(updates) == 7

    def test_binary_output(self, labelled_csv, tmp_path):
        """Test the binary format holds the same matrix."""
        text, _ = ingest_csv(labelled_csv, "label", "probit", tmp_path / "out.txt")
        binary, _ = ingest_csv(labelled_csv, "label", "probit", tmp_path / "out.bin", binary=True)
        np.testing.assert_array_equal(replay_dense(text), replay_dense(binary))

    def test_bad_labels_for_classification(self, tmp_path):
        """Test labels outside {0, 1} and {-1, +1} cannot be folded."""
        csv_path = tmp_path / "multi.csv"
        csv_path.write_text("x,y\n1,0\n2,1\n3,2\n")
        with pytest.raises(CsvIngestionError, match="labels"):
            ingest_csv(csv_path, "y", "logistic", tmp_path / "out.txt")

    def test_unknown_fold(self, labelled_csv, tmp_path):
        """Test an unknown loss name."""
        with pytest.raises(CsvIngestionError):
            ingest_csv(labelled_csv, "label", "hinge", tmp_path / "out.txt")
