import json

import numpy as np
import pytest
from PIL import Image

from lddp.evaluation import rand_index, synth_image
from lddp.kernel import KernelParams
from lddp.pipeline import (Dataset, dataset_from_image, kmeans, kmeans_5d_baseline, lloyd,
                           load_image, load_label_image, load_labels_txt, load_table,
                           run_lddp, save_label_image, save_labels_txt)
from lddp.vi import LddpConfig


def write_png(path, pixels):
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="RGB").save(path)
    return path


def test_load_single_black_pixel(tmp_path):
    ds = load_image(write_png(tmp_path / "a.png", np.zeros((1, 1, 3))))
    np.testing.assert_array_equal(ds.features, [[0, 0, 0]])
    np.testing.assert_array_equal(ds.locations, [[0, 0]])
    assert ds.source_shape == (1, 1)


def test_load_two_by_two_corner_grid(tmp_path):
    px = np.arange(12).reshape(2, 2, 3) * 20
    ds = load_image(write_png(tmp_path / "b.png", px))
    np.testing.assert_array_equal(ds.locations, [[0, 0], [0, 1], [1, 0], [1, 1]])
    np.testing.assert_allclose(ds.features, px.reshape(-1, 3) / 255.0)


def test_load_128_square_has_16384_points(tmp_path):
    ds = load_image(write_png(tmp_path / "c.png", np.full((128, 128, 3), 9)))
    assert len(ds) == 16384


def test_load_ppm(tmp_path):
    path = tmp_path / "d.ppm"
    Image.fromarray(np.full((3, 4, 3), 200, dtype=np.uint8)).save(path)
    assert load_image(path).source_shape == (3, 4)


def test_load_image_error_names_path(tmp_path):
    bad = tmp_path / "junk.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(OSError, match="junk.png"):
        load_image(bad)
    with pytest.raises(OSError, match="missing.png"):
        load_image(tmp_path / "missing.png")


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros((4, 1)))
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]), np.zeros((1, 1)))


def test_load_table_normalises_locations(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b,pos\n1,2,5\n3,4,10\n5,6,15\n")
    ds = load_table(path, ["a", "b"], ["pos"])
    np.testing.assert_allclose(ds.locations[:, 0], [0, 0.5, 1])
    np.testing.assert_allclose(ds.features, [[1, 2], [3, 4], [5, 6]])
    by_index = load_table(path, ["0", "1"], ["2"])
    np.testing.assert_array_equal(by_index.features, ds.features)


def test_load_table_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty"):
        load_table(empty, ["a"], ["b"])
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("a,b\n1,2\n3\n")
    with pytest.raises(ValueError, match=":3:"):
        load_table(ragged, ["a"], ["b"])
    text = tmp_path / "text.csv"
    text.write_text("a,b\n1,2\nx,4\n")
    with pytest.raises(ValueError, match=":3:.*'x'"):
        load_table(text, ["a"], ["b"])
    with pytest.raises(ValueError, match="unknown column"):
        load_table(text, ["zzz"], ["b"])


def test_load_table_constant_location_warns(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("x\tl\n1\t7\n2\t7\n")
    with pytest.warns(UserWarning, match="constant"):
        ds = load_table(path, ["x"], ["l"], delimiter="\t")
    np.testing.assert_array_equal(ds.locations, 0)


def test_kmeans_examples(rng):
    x = rng.standard_normal((40, 3))
    res = lloyd(x, 1, seed=3)
    assert np.all(res.labels == 0)
    np.testing.assert_allclose(res.centers[0], x.mean(axis=0))

    pts = rng.random((12, 2))
    res = lloyd(pts, 12, seed=0)
    assert len(set(res.labels.tolist())) == 12
    assert res.inertia[-1] == 0.0

    blobs = np.concatenate([rng.normal(0, 0.1, 50), rng.normal(10, 0.1, 50)])[:, None]
    labels = kmeans(blobs, 2, seed=1)
    assert rand_index(labels, np.repeat([0, 1], 50)) == 1.0


def test_kmeans_inertia_non_increasing_and_deterministic(rng):
    x = rng.standard_normal((500, 3))
    res = lloyd(x, 6, seed=11)
    assert np.all(np.diff(res.inertia) <= 1e-9)
    np.testing.assert_array_equal(kmeans(x, 6, seed=11), res.labels)
    with pytest.raises(ValueError):
        kmeans(x[:3], 4)


def test_baseline_uniform_colour_splits_by_location():
    ds = dataset_from_image(np.full((10, 10, 3), 120, dtype=np.uint8))
    labels = kmeans_5d_baseline(ds, 2, seed=0)
    assert len(set(labels.tolist())) == 2
    # each cluster is one side of a straight cut through the grid
    for j in (0, 1):
        pts = ds.locations[labels == j]
        other = ds.locations[labels != j]
        centre, oc = pts.mean(axis=0), other.mean(axis=0)
        axis = oc - centre
        assert np.max(pts @ axis) <= np.min(other @ axis) + 1e-12


def test_baseline_examples():
    px = np.zeros((8, 8, 3), dtype=np.uint8)
    px[:, 4:] = 255
    ds = dataset_from_image(px)
    truth = np.tile(np.repeat([0, 1], 4), 8)
    assert rand_index(kmeans_5d_baseline(ds, 2, seed=0), truth) == 1.0
    assert np.all(kmeans_5d_baseline(ds, 1) == 0)
    with pytest.raises(ValueError):
        kmeans_5d_baseline(Dataset(ds.features, ds.locations), 2)


def test_label_round_trips(tmp_path, rng):
    labels = rng.integers(0, 25, 48)
    save_labels_txt(labels, tmp_path / "l.txt")
    np.testing.assert_array_equal(load_labels_txt(tmp_path / "l.txt"), labels)
    save_label_image(labels, (6, 8), tmp_path / "l.png")
    back = load_label_image(tmp_path / "l.png")
    assert back.shape == (6, 8)
    np.testing.assert_array_equal(back.ravel(), labels)
    (tmp_path / "bad.txt").write_text("1\nfoo\n")
    with pytest.raises(ValueError, match=":2:"):
        load_labels_txt(tmp_path / "bad.txt")


def test_image_to_label_image_round_trip(tmp_path):
    pixels, _ = synth_image(12, 9, "quadrants", seed=1)
    ds = load_image(write_png(tmp_path / "q.png", pixels))
    save_label_image(np.zeros(len(ds), dtype=int), ds.source_shape, tmp_path / "o.png")
    assert load_label_image(tmp_path / "o.png").shape == (12, 9)


def test_run_lddp_quadrants(tmp_path):
    pixels, truth = synth_image(24, 24, "quadrants", seed=0)
    ds = dataset_from_image(pixels)
    cfg = LddpConfig(k0=5, max_iters=60)
    report = run_lddp(ds, cfg, KernelParams(), seed=0, out_dir=tmp_path)
    assert report.mode == "LDDP"
    assert sum(report.usage_counts) == len(ds)
    assert report.labels.min() >= 0 and report.labels.max() < 5
    assert rand_index(report.labels, truth) >= 0.9
    saved = json.loads((tmp_path / "report.txt").read_text())
    assert saved["elbo_trace"] == [float(v) for v in report.elbo_trace]
    assert sum(saved["usage_histogram"]) == len(ds)
    np.testing.assert_array_equal(load_labels_txt(tmp_path / "labels.txt"), report.labels)
    assert load_label_image(tmp_path / "labels.png").shape == (24, 24)


def test_run_lddp_deterministic():
    ds = dataset_from_image(synth_image(16, 16, "halves-overlap", seed=4)[0])
    cfg = LddpConfig(k0=4, max_iters=25)
    a = run_lddp(ds, cfg, seed=7)
    b = run_lddp(ds, cfg, seed=7)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert a.elbo_trace == b.elbo_trace


def test_run_lddp_gmm_mode():
    ds = dataset_from_image(synth_image(12, 12, "quadrants", seed=2)[0])
    report = run_lddp(ds, LddpConfig(k0=4, gp_steps_per_iter=0, max_iters=20), seed=0)
    assert report.mode == "GMM mode"
    assert report.n_landmarks == 0
    assert np.all(report.state.f == 0)


def test_run_lddp_writes_partial_report_on_failure(tmp_path, monkeypatch):
    import lddp.pipeline as pl

    def boom(*args, **kwargs):
        raise ArithmeticError("synthetic failure")

    monkeypatch.setattr(pl, "fit", boom)
    ds = dataset_from_image(synth_image(8, 8, "quadrants")[0])
    with pytest.raises(ArithmeticError):
        run_lddp(ds, LddpConfig(k0=3, max_iters=5), out_dir=tmp_path)
    saved = json.loads((tmp_path / "report.txt").read_text())
    assert saved["error"] == "synthetic failure"
