import numpy as np
import pytest

from evistage.data import (
    TEST,
    TRAIN,
    VALIDATION,
    SyntheticConfig,
    generate_synthetic,
    load_dataset,
    normalize,
    split_dataset,
    write_dataset_csv,
)
from evistage.errors import (
    AlignmentError,
    ConfigurationError,
    ParseError,
    StratificationError,
)


def toy_dataset(n=50, seed=0, class_count=2):
    cfg = SyntheticConfig(
        n_samples=n,
        class_count=class_count,
        feature_dims=(3, 4),
        separations=(2.0, 0.0),
        noise=1.0,
        seed=seed,
    )
    return generate_synthetic(cfg)


class TestCSVRoundTrip:
    def test_round_trip_identity(self, tmp_path):
        ds = toy_dataset()
        paths = write_dataset_csv(ds, tmp_path)
        loaded = load_dataset(
            {v: paths[v] for v in ds.view_ids}, paths["labels"]
        )
        assert loaded.sample_ids == ds.sample_ids
        assert np.array_equal(loaded.labels, ds.labels)
        for v in ds.view_ids:
            assert np.allclose(loaded.views[v], ds.views[v], atol=1e-12)

    def test_row_order_policy(self, tmp_path):
        ds = toy_dataset(n=20)
        paths = write_dataset_csv(ds, tmp_path)
        # strip the id column and load positionally
        import pandas as pd

        for v in ds.view_ids:
            frame = pd.read_csv(paths[v]).drop(columns="sample_id")
            frame.to_csv(tmp_path / f"{v}_bare.csv", index=False)
        loaded = load_dataset(
            {v: tmp_path / f"{v}_bare.csv" for v in ds.view_ids},
            paths["labels"],
            id_column_policy="row-order",
        )
        for v in ds.view_ids:
            assert np.allclose(loaded.views[v], ds.views[v], atol=1e-12)

    def test_misaligned_ids_rejected(self, tmp_path):
        import pandas as pd

        ds = toy_dataset(n=10)
        paths = write_dataset_csv(ds, tmp_path)
        frame = pd.read_csv(paths["view0"])
        frame.loc[0, "sample_id"] = "stranger"
        frame.to_csv(paths["view0"], index=False)
        with pytest.raises(AlignmentError):
            load_dataset({v: paths[v] for v in ds.view_ids}, paths["labels"])

    def test_bad_cell_reports_location(self, tmp_path):
        import pandas as pd

        ds = toy_dataset(n=10)
        paths = write_dataset_csv(ds, tmp_path)
        frame = pd.read_csv(paths["view1"]).astype({"f1": object})
        frame.loc[3, "f1"] = "oops"
        frame.to_csv(paths["view1"], index=False)
        with pytest.raises(ParseError, match="row 3") as exc:
            load_dataset({v: paths[v] for v in ds.view_ids}, paths["labels"])
        assert "f1" in str(exc.value)

    def test_shuffled_view_rows_realigned(self, tmp_path):
        import pandas as pd

        ds = toy_dataset(n=12)
        paths = write_dataset_csv(ds, tmp_path)
        frame = pd.read_csv(paths["view0"]).iloc[::-1]
        frame.to_csv(paths["view0"], index=False)
        loaded = load_dataset({v: paths[v] for v in ds.view_ids}, paths["labels"])
        assert np.allclose(loaded.views["view0"], ds.views["view0"], atol=1e-12)


class TestSplit:
    def test_counts_per_class(self):
        ds = toy_dataset(n=100)
        tagged = split_dataset(ds, seed=1)
        for cls in range(ds.class_count):
            mask = tagged.labels == cls
            assert (tagged.split[mask] == TRAIN).sum() == 30
            assert (tagged.split[mask] == VALIDATION).sum() == 10
            assert (tagged.split[mask] == TEST).sum() == 10

    def test_partition_is_exact(self):
        tagged = split_dataset(toy_dataset(n=53), seed=2)
        sizes = [len(tagged.indices(s)) for s in (TRAIN, VALIDATION, TEST)]
        assert sum(sizes) == 53

    def test_deterministic_per_seed(self):
        ds = toy_dataset(n=40)
        a = split_dataset(ds, seed=5)
        b = split_dataset(ds, seed=5)
        c = split_dataset(ds, seed=6)
        assert np.array_equal(a.split, b.split)
        assert not np.array_equal(a.split, c.split)

    def test_tiny_class_rejected(self):
        ds = toy_dataset(n=4)
        with pytest.raises(StratificationError):
            split_dataset(ds, seed=0)

    def test_bad_fractions_rejected(self):
        with pytest.raises(ConfigurationError):
            split_dataset(toy_dataset(), fractions=(0.5, 0.2, 0.2))

    def test_index_file_override(self, tmp_path):
        ds = toy_dataset(n=10)
        ids = list(ds.sample_ids)
        files = {}
        for name, chunk in zip(
            (TRAIN, VALIDATION, TEST), (ids[:6], ids[6:8], ids[8:])
        ):
            path = tmp_path / f"{name}.txt"
            path.write_text("\n".join(chunk) + "\n")
            files[name] = path
        tagged = split_dataset(ds, index_files=files)
        assert list(tagged.split[:6]) == [TRAIN] * 6
        assert list(tagged.split[8:]) == [TEST] * 2

    def test_incomplete_index_files_rejected(self, tmp_path):
        ds = toy_dataset(n=10)
        ids = list(ds.sample_ids)
        files = {}
        for name, chunk in zip(
            (TRAIN, VALIDATION, TEST), (ids[:6], ids[6:8], ids[8:9])
        ):
            path = tmp_path / f"{name}.txt"
            path.write_text("\n".join(chunk) + "\n")
            files[name] = path
        with pytest.raises(AlignmentError):
            split_dataset(ds, index_files=files)


class TestNormalize:
    def test_train_split_standardized(self):
        tagged = split_dataset(toy_dataset(n=100, seed=3), seed=4)
        normed = normalize(tagged)
        idx = normed.indices(TRAIN)
        for v in normed.view_ids:
            block = normed.views[v][idx]
            assert np.allclose(block.mean(axis=0), 0.0, atol=1e-12)
            assert np.allclose(block.std(axis=0), 1.0, atol=1e-12)

    def test_statistics_come_from_train_only(self):
        tagged = split_dataset(toy_dataset(n=100, seed=5), seed=6)
        idx = tagged.indices(TRAIN)
        mean = tagged.views["view0"][idx].mean(axis=0)
        std = tagged.views["view0"][idx].std(axis=0)
        normed = normalize(tagged)
        test_idx = tagged.indices(TEST)
        expected = (tagged.views["view0"][test_idx] - mean) / std
        assert np.allclose(normed.views["view0"][test_idx], expected, atol=1e-12)

    def test_constant_column_centered_not_scaled(self):
        tagged = split_dataset(toy_dataset(n=100, seed=7), seed=8)
        views = dict(tagged.views)
        mat = views["view0"].copy()
        mat[:, 0] = 4.5
        views["view0"] = mat
        from dataclasses import replace

        constant = replace(tagged, views=views)
        normed = normalize(constant)
        assert np.allclose(normed.views["view0"][:, 0], 0.0, atol=1e-12)


class TestSynthetic:
    def test_deterministic(self):
        a = toy_dataset(seed=9)
        b = toy_dataset(seed=9)
        for v in a.view_ids:
            assert np.array_equal(a.views[v], b.views[v])
        assert np.array_equal(a.labels, b.labels)
        c = toy_dataset(seed=10)
        assert not np.array_equal(a.views["view0"], c.views["view0"])

    def test_balanced_labels(self):
        ds = toy_dataset(n=90, class_count=3)
        counts = np.bincount(ds.labels, minlength=3)
        assert counts.tolist() == [30, 30, 30]

    def test_class_mean_norm_tracks_separation(self):
        cfg = SyntheticConfig(
            n_samples=4000,
            class_count=2,
            feature_dims=(5,),
            separations=(3.0,),
            noise=0.1,
            seed=11,
        )
        ds = generate_synthetic(cfg)
        for cls in range(2):
            mean = ds.views["view0"][ds.labels == cls].mean(axis=0)
            assert np.linalg.norm(mean) == pytest.approx(3.0, abs=0.05)

    def test_zero_separation_view_is_chance(self):
        # pure-noise view: a class-mean classifier should hover near 50%
        cfg = SyntheticConfig(
            n_samples=2000,
            class_count=2,
            feature_dims=(4,),
            separations=(0.0,),
            noise=1.0,
            seed=12,
        )
        ds = generate_synthetic(cfg)
        x, y = ds.views["view0"], ds.labels
        means = np.stack([x[y == c].mean(axis=0) for c in range(2)])
        pred = np.argmin(
            np.linalg.norm(x[:, None, :] - means[None], axis=2), axis=1
        )
        assert 0.4 < (pred == y).mean() < 0.6

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            SyntheticConfig(
                n_samples=10, class_count=1, feature_dims=(3,),
                separations=(1.0,), noise=1.0, seed=0,
            )
        with pytest.raises(ConfigurationError):
            SyntheticConfig(
                n_samples=10, class_count=2, feature_dims=(3, 3),
                separations=(1.0,), noise=1.0, seed=0,
            )
