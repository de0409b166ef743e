import numpy as np
import pytest

from hullnet.dataio import (
    DataError,
    LabeledDataset,
    load_csv,
    load_idx,
    split_binary,
    write_idx,
)


@pytest.fixture
def idx_pair(tmp_path):
    rng = np.random.default_rng(0)
    imgs = rng.integers(0, 256, size=(30, 4, 5), dtype=np.uint8)
    labs = rng.integers(0, 3, size=30).astype(np.uint8)
    # make images unique so the two-label check cannot trip
    imgs[:, 0, 0] = np.arange(30)
    ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
    write_idx(ip, lp, imgs, labs)
    return ip, lp, imgs, labs


class TestIdx:
    def test_round_trip_raw(self, idx_pair):
        ip, lp, imgs, labs = idx_pair
        d = load_idx(ip, lp, raw=True)
        np.testing.assert_array_equal(d.points, imgs.reshape(30, -1))
        np.testing.assert_array_equal(d.labels, labs)
        assert d.dim == 20

    def test_scaled_to_unit_interval(self, idx_pair):
        ip, lp, imgs, _ = idx_pair
        d = load_idx(ip, lp)
        assert d.points.min() >= 0 and d.points.max() <= 1
        np.testing.assert_allclose(d.points * 255, imgs.reshape(30, -1))

    def test_keep_labels(self, idx_pair):
        ip, lp, _, labs = idx_pair
        d = load_idx(ip, lp, keep_labels={0, 2})
        assert len(d) == int(np.isin(labs, [0, 2]).sum())
        assert set(d.label_universe) <= {0, 2}

    def test_bad_magic(self, idx_pair):
        ip, lp, _, _ = idx_pair
        with pytest.raises(DataError, match="magic"):
            load_idx(lp, ip)

    def test_truncated(self, idx_pair, tmp_path):
        ip, lp, _, _ = idx_pair
        raw = ip.read_bytes()
        bad = tmp_path / "cut.idx"
        bad.write_bytes(raw[:100])
        with pytest.raises(DataError, match="byte offset 100"):
            load_idx(bad, lp)
        bad.write_bytes(raw[:6])
        with pytest.raises(DataError, match="byte offset 6"):
            load_idx(bad, lp)

    def test_count_mismatch(self, idx_pair, tmp_path):
        ip, _, imgs, labs = idx_pair
        ip2, lp2 = tmp_path / "a.idx", tmp_path / "b.idx"
        write_idx(ip2, lp2, imgs[:10], labs[:10])
        with pytest.raises(DataError, match="30 images but 10 labels"):
            load_idx(ip, lp2)


class TestCsv:
    def test_basic(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("x,y,label\n0,1,a\n2,3,b\n4,5,a\n")
        d = load_csv(p, "label")
        assert d.points.shape == (3, 2)
        assert d.labels.tolist() == ["a", "b", "a"]
        assert d.label_universe == ("a", "b")

    def test_label_in_middle_and_no_header(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,0,5\n2,1,6\n")
        d = load_csv(p, 1)
        np.testing.assert_array_equal(d.points, [[1, 5], [2, 6]])

    def test_conflicting_labels(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("x,label\n1,a\n1,b\n")
        with pytest.raises(DataError, match="two different labels"):
            load_csv(p, "label")

    def test_duplicate_same_label_is_fine(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("x,label\n1,a\n1,a\n2,b\n")
        assert len(load_csv(p, "label")) == 3

    @pytest.mark.parametrize("text,match", [
        ("", "empty"),
        ("x,label\n", "no data"),
        ("x,label\n1,a\n2\n", "fields"),
        ("x,label\n1,a\nfoo,b\n", "line 3"),
    ])
    def test_errors(self, tmp_path, text, match):
        p = tmp_path / "a.csv"
        p.write_text(text)
        with pytest.raises(DataError, match=match):
            load_csv(p, "label")

    def test_missing_column(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("x,label\n1,a\n")
        with pytest.raises(DataError, match="no column"):
            load_csv(p, "class")


class TestSplit:
    def test_order_and_missing(self):
        d = LabeledDataset(np.arange(8.0).reshape(4, 2), np.array([0, 1, 0, 1]))
        X, Y = split_binary(d, 1, 0)
        np.testing.assert_array_equal(X, [[2, 3], [6, 7]])
        np.testing.assert_array_equal(Y, [[0, 1], [4, 5]])
        with pytest.raises(DataError):
            split_binary(d, 0, 7)

    def test_text_labels_match_integers(self):
        d = LabeledDataset(np.array([[0.0], [1.0]]), np.array([3, 8]))
        X, Y = split_binary(d, "3", "8")
        assert X.tolist() == [[0.0]] and Y.tolist() == [[1.0]]

    def test_singletons(self):
        d = LabeledDataset(np.array([[0.0], [1.0]]), np.array(["p", "q"]))
        X, Y = split_binary(d, "p", "q")
        assert len(X) == len(Y) == 1

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            LabeledDataset(np.zeros((3, 2)), np.zeros(2))
