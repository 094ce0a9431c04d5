"""TaskData containers, stream generators, and the CSV / IDX ingest paths."""

import struct

import numpy as np
import pytest

from fairstream import data
from fairstream.data import ParseError, Sample, TaskData


def test_task_data_validation():
    with pytest.raises(ValueError):
        TaskData(np.zeros((3, 2)), np.zeros(2, dtype=int))
    with pytest.raises(ValueError):
        TaskData(np.zeros(3), np.zeros(3, dtype=int))
    with pytest.raises(ValueError):
        TaskData(np.zeros((3, 2)), np.zeros(3, dtype=int), np.zeros(4, dtype=int))


def test_subset_and_select_classes():
    d = TaskData(np.arange(8.0).reshape(4, 2), np.array([0, 1, 0, 2]), np.array([1, 0, 1, 1]))
    sub = d.subset(np.array([1, 3]))
    np.testing.assert_array_equal(sub.y, [1, 2])
    np.testing.assert_array_equal(sub.z, [0, 1])
    picked = d.select_classes([0])
    assert len(picked) == 2
    np.testing.assert_array_equal(picked.x, [[0, 1], [4, 5]])


def test_samples_round_trip():
    d = TaskData(np.arange(6.0).reshape(3, 2), np.array([2, 0, 1]), np.array([0, 1, 0]))
    back = data.from_samples(d.to_samples())
    np.testing.assert_array_equal(back.x, d.x)
    np.testing.assert_array_equal(back.y, d.y)
    np.testing.assert_array_equal(back.z, d.z)


def test_from_samples_rejects_mixed_groups():
    samples = [Sample(np.zeros(2), 0, 1), Sample(np.zeros(2), 1, None)]
    with pytest.raises(ValueError):
        data.from_samples(samples)


def test_concat_preserves_order():
    a = TaskData(np.zeros((2, 1)), np.array([0, 0]))
    b = TaskData(np.ones((3, 1)), np.array([1, 1, 1]))
    merged = data.concat([a, b])
    np.testing.assert_array_equal(merged.y, [0, 0, 1, 1, 1])
    with pytest.raises(ValueError):
        data.concat([a, TaskData(np.zeros((1, 1)), np.array([0]), np.array([0]))])


def test_toy_stream_layout():
    stream = data.gen_toy_gaussians(50, 20, seed=3)
    assert stream.n_classes == 3
    assert [t.classes for t in stream.tasks] == [(0, 1), (2,)]
    assert not stream.has_group
    assert len(stream.tasks[0].train) == 100
    assert len(stream.tasks[1].train) == 50
    assert len(stream.tasks[1].test) == 20
    assert stream.classes_until(0) == [0, 1]
    assert stream.classes_until(1) == [0, 1, 2]


def test_toy_stream_deterministic():
    a = data.gen_toy_gaussians(30, 10, seed=5)
    b = data.gen_toy_gaussians(30, 10, seed=5)
    np.testing.assert_array_equal(a.tasks[0].train.x, b.tasks[0].train.x)
    c = data.gen_toy_gaussians(30, 10, seed=6)
    assert not np.array_equal(a.tasks[0].train.x, c.tasks[0].train.x)


def test_toy_stream_blob_separation():
    """Each blob's train points stay near its configured mean."""
    stream = data.gen_toy_gaussians(200, 10, seed=0)
    merged = data.concat([t.train for t in stream.tasks])
    for c, mean in enumerate(data.TOY_MEANS):
        centroid = merged.x[merged.y == c].mean(axis=0)
        assert np.linalg.norm(centroid - mean) < 0.5


def test_toy_stream_grouped():
    stream = data.gen_toy_gaussians(40, 10, seed=1, grouped=True)
    assert stream.has_group
    assert stream.n_classes == 2
    assert [t.classes for t in stream.tasks] == [(0,), (1,)]
    assert stream.z_values == [0, 1]
    t1 = stream.tasks[0].train
    # class 0 folds blobs 0 (z=0) and 1 (z=1) together
    assert set(np.unique(t1.z)) == {0, 1}
    t2 = stream.tasks[1].train
    np.testing.assert_array_equal(np.unique(t2.z), [1])


def test_color_biased_stream():
    stream = data.gen_color_biased(100, n_classes=4, n_features=3, seed=2)
    assert stream.n_classes == 4
    assert len(stream.tasks) == 2
    train = data.concat([t.train for t in stream.tasks])
    assert train.x.shape[1] == 4  # bias channel appended
    # z=1 samples carry their own class value in the channel
    own = train.x[train.z == 1, -1] == train.y[train.z == 1]
    assert np.all(own)
    other = train.x[train.z == 0, -1] == train.y[train.z == 0]
    assert not np.any(other)
    # the train split is heavily biased toward z=1
    assert train.z.mean() > 0.9


def test_color_biased_rejects_bad_bias():
    with pytest.raises(ValueError):
        data.gen_color_biased(10, bias_train=1.5)


def test_split_tasks_remainder_goes_last():
    train = TaskData(np.zeros((5, 1)), np.arange(5))
    test = TaskData(np.zeros((5, 1)), np.arange(5))
    stream = data.split_tasks(train, test, 2)
    assert [t.classes for t in stream.tasks] == [(0, 1), (2, 3, 4)]


def test_split_tasks_errors():
    train = TaskData(np.zeros((3, 1)), np.arange(3))
    test = TaskData(np.zeros((3, 1)), np.arange(3))
    with pytest.raises(ValueError):
        data.split_tasks(train, test, 0)
    with pytest.raises(ValueError):
        data.split_tasks(train, test, 4)
    holey = TaskData(np.zeros((2, 1)), np.array([0, 2]))
    with pytest.raises(ValueError):
        data.split_tasks(holey, holey, 1)


def test_csv_round_trip(tmp_path):
    d = TaskData(
        np.array([[0.125, -3.0], [1e-9, 2.5]]), np.array([0, 1]), np.array([1, 0])
    )
    path = tmp_path / "data.csv"
    data.save_csv(path, d)
    back = data.load_csv(path, has_group=True)
    np.testing.assert_array_equal(back.x, d.x)
    np.testing.assert_array_equal(back.y, d.y)
    np.testing.assert_array_equal(back.z, d.z)


def test_csv_header_detection(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("f1,f2,label\n0.5,1.5,0\n1.0,2.0,1\n")
    d = data.load_csv(path)
    assert len(d) == 2
    np.testing.assert_array_equal(d.y, [0, 1])
    assert d.z is None


def test_csv_ragged_row_reports_line(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("0.5,1.5,0\n1.0,2.0\n")
    with pytest.raises(ParseError, match=":2:"):
        data.load_csv(path)


def test_csv_rejects_empty_and_negative(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("\n\n")
    with pytest.raises(ParseError):
        data.load_csv(empty)
    neg = tmp_path / "neg.csv"
    neg.write_text("0.5,-1\n")
    with pytest.raises(ParseError):
        data.load_csv(neg)


def _write_idx_images(path, arr):
    n, rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">llll", data.IDX_IMAGE_MAGIC, n, rows, cols))
        fh.write(arr.astype(np.uint8).tobytes())


def _write_idx_labels(path, labels):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">ll", data.IDX_LABEL_MAGIC, len(labels)))
        fh.write(np.asarray(labels, dtype=np.uint8).tobytes())


def test_idx_round_trip(tmp_path):
    images = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
    labels = np.array([7, 1], dtype=np.uint8)
    img_path, lab_path = tmp_path / "img.idx", tmp_path / "lab.idx"
    _write_idx_images(img_path, images)
    _write_idx_labels(lab_path, labels)
    d = data.load_idx_pair(img_path, lab_path)
    assert d.x.shape == (2, 12)
    assert d.x.max() <= 1.0
    np.testing.assert_allclose(d.x[1, 0], 12 / 255.0)
    np.testing.assert_array_equal(d.y, [7, 1])


def test_idx_bad_magic(tmp_path):
    path = tmp_path / "bad.idx"
    with open(path, "wb") as fh:
        fh.write(struct.pack(">llll", 1234, 1, 2, 2))
        fh.write(bytes(4))
    with pytest.raises(ParseError, match="magic"):
        data.load_idx_images(path)


def test_idx_truncated(tmp_path):
    path = tmp_path / "short.idx"
    with open(path, "wb") as fh:
        fh.write(struct.pack(">llll", data.IDX_IMAGE_MAGIC, 2, 2, 2))
        fh.write(bytes(3))  # needs 8
    with pytest.raises(ParseError, match="truncated"):
        data.load_idx_images(path)


def test_idx_pair_length_mismatch(tmp_path):
    img_path, lab_path = tmp_path / "img.idx", tmp_path / "lab.idx"
    _write_idx_images(img_path, np.zeros((2, 2, 2), dtype=np.uint8))
    _write_idx_labels(lab_path, [0])
    with pytest.raises(ParseError):
        data.load_idx_pair(img_path, lab_path)


def test_stream_to_data_round_trip(tmp_path):
    stream = data.gen_toy_gaussians(20, 8, seed=4)
    train, test = data.stream_to_data(stream)
    assert len(train) == 60
    assert len(test) == 24
    # flattened data reconstructs the same stream
    again = data.split_tasks(train, test, 2)
    assert [t.classes for t in again.tasks] == [(0,), (1, 2)]
