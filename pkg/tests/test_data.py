"""Synthetic data generation, CSV interchange, and label-surgery helpers."""

import numpy as np
import pytest

from lht.data import (
    BENCHMARK_D,
    BENCHMARK_LEVEL_SIZES,
    BENCHMARK_N_PER_CLASS,
    BENCHMARK_SCALES,
    BENCHMARK_SIGMA,
    Dataset,
    benchmark_datasets,
    benchmark_hierarchy,
    drop_level,
    generate_synthetic,
    load_csv,
    relabel,
    save_csv,
)
from lht.errors import (
    DimensionMismatch,
    HierarchyMismatch,
    InconsistentChain,
    InvalidLevel,
    InvalidScales,
    ParseError,
)
from lht.hierarchy import balanced


class TestGenerateSynthetic:
    def test_deterministic_per_seed(self, h842):
        first = generate_synthetic(h842, d=8, n_per_class=5, noise_sigma=1.0, seed=3)
        second = generate_synthetic(h842, d=8, n_per_class=5, noise_sigma=1.0, seed=3)
        other = generate_synthetic(h842, d=8, n_per_class=5, noise_sigma=1.0, seed=4)
        for split_a, split_b in zip(first, second):
            np.testing.assert_array_equal(split_a.features, split_b.features)
            np.testing.assert_array_equal(split_a.labels, split_b.labels)
        assert not np.array_equal(first[0].features, other[0].features)

    def test_counts_tags_and_chain_validity(self, tiny_data, h842):
        train_split, test_split = tiny_data
        assert (train_split.split, test_split.split) == ("train", "test")
        for split in tiny_data:
            assert len(split) == 8 * 12
            assert split.d == 8
            split.validate()
            np.testing.assert_array_equal(
                split.labels, h842.chain_table()[split.labels[:, 0]]
            )
            counts = np.bincount(split.labels[:, 0], minlength=8)
            assert (counts == 12).all()
        sample = train_split[0]
        assert sample.x.shape == (8,)
        assert sample.chain == tuple(train_split.labels[0])

    def test_vanishing_noise_makes_nearest_centroid_perfect(self, h842):
        train_split, test_split = generate_synthetic(
            h842, d=8, n_per_class=10, noise_sigma=1e-9, seed=1
        )
        centroids = np.stack([
            train_split.features[train_split.labels[:, 0] == c].mean(axis=0)
            for c in range(8)
        ])
        nearest = np.argmin(
            np.linalg.norm(test_split.features[:, None] - centroids[None], axis=2),
            axis=1,
        )
        predicted_chains = h842.chain_table()[nearest]
        np.testing.assert_array_equal(predicted_chains, test_split.labels)

    def test_train_and_test_share_no_rows(self, tiny_data):
        train_split, test_split = tiny_data
        train_rows = {row.tobytes() for row in train_split.features}
        test_rows = {row.tobytes() for row in test_split.features}
        assert not train_rows & test_rows

    def test_sibling_centers_sit_closer_than_cousins(self):
        train_split, _ = benchmark_datasets(0)
        hier = train_split.hierarchy
        means = np.stack([
            train_split.features[train_split.labels[:, 0] == c].mean(axis=0)
            for c in range(8)
        ])
        parents = np.asarray(hier.parents[0])
        intra, inter = [], []
        for a in range(8):
            for b in range(a + 1, 8):
                dist = float(np.linalg.norm(means[a] - means[b]))
                (intra if parents[a] == parents[b] else inter).append(dist)
        assert np.mean(intra) < np.mean(inter)

    def test_scale_and_dimension_guards(self, h842):
        with pytest.raises(InvalidScales):
            generate_synthetic(h842, 8, 5, 1.0, center_scales=(1.0, 2.0), seed=0)
        with pytest.raises(InvalidScales):
            generate_synthetic(h842, 8, 5, 1.0, center_scales=(2.0, 2.0, 1.0), seed=0)
        with pytest.raises(InvalidScales):
            generate_synthetic(h842, 8, 5, 1.0, center_scales=(-1.0, 2.0, 4.0), seed=0)
        with pytest.raises(InvalidScales):
            generate_synthetic(h842, 8, 5, 0.0, seed=0)
        with pytest.raises(DimensionMismatch):
            generate_synthetic(h842, 2, 5, 1.0, seed=0)
        with pytest.raises(DimensionMismatch):
            generate_synthetic(h842, 8, 0, 1.0, seed=0)


class TestDatasetType:
    def test_shape_agreement_enforced(self, h842):
        with pytest.raises(DimensionMismatch):
            Dataset(np.zeros((3, 4)), np.zeros((2, 3), dtype=np.int64), h842)
        with pytest.raises(DimensionMismatch):
            Dataset(np.zeros((3, 4)), np.zeros((3, 2), dtype=np.int64), h842)
        with pytest.raises(DimensionMismatch):
            Dataset(np.zeros(3), np.zeros((3, 3), dtype=np.int64), h842)

    def test_validate_spots_broken_chains(self, h842):
        labels = h842.chain_table()[np.array([0, 5])]
        labels[1, 1] = 3  # true parent of fine class 5 is 2
        dataset = Dataset(np.zeros((2, 4)), labels, h842)
        with pytest.raises(InconsistentChain):
            dataset.validate()


class TestCsvInterchange:
    def test_round_trip_is_lossless(self, tiny_data, h842, tmp_path):
        train_split, _ = tiny_data
        path = tmp_path / "train.csv"
        save_csv(train_split, path)
        loaded = load_csv(path, h842, split="train")
        np.testing.assert_array_equal(loaded.features, train_split.features)
        np.testing.assert_array_equal(loaded.labels, train_split.labels)
        assert loaded.split == "train"

    def test_header_shape(self, tiny_data, tmp_path):
        train_split, _ = tiny_data
        path = tmp_path / "out.csv"
        save_csv(train_split, path)
        header = path.read_text().splitlines()[0]
        assert header == ",".join([f"f{i}" for i in range(8)] + ["y1", "y2", "y3"])

    def test_inconsistent_chain_rejected_with_line(self, h842, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("f0,f1,y1,y2,y3\n0.0,1.0,5,3,1\n")
        with pytest.raises(InconsistentChain, match="line 2"):
            load_csv(path, h842)

    def test_parse_errors(self, h842, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        with pytest.raises(ParseError):
            load_csv(empty, h842)

        bad_header = tmp_path / "header.csv"
        bad_header.write_text("a,b,c\n")
        with pytest.raises(ParseError):
            load_csv(bad_header, h842)

        ragged = tmp_path / "ragged.csv"
        ragged.write_text("f0,f1,y1,y2,y3\n0.0,1.0,0,0\n")
        with pytest.raises(ParseError, match="line 2"):
            load_csv(ragged, h842)

        words = tmp_path / "words.csv"
        words.write_text("f0,f1,y1,y2,y3\n0.0,abc,0,0,0\n")
        with pytest.raises(ParseError, match="line 2"):
            load_csv(words, h842)

    def test_level_count_must_match_hierarchy(self, h842, tmp_path):
        path = tmp_path / "two_levels.csv"
        path.write_text("f0,f1,y1,y2\n0.0,1.0,0,0\n")
        with pytest.raises(DimensionMismatch):
            load_csv(path, h842)

    def test_fine_label_out_of_range(self, h842, tmp_path):
        path = tmp_path / "oob.csv"
        path.write_text("f0,f1,y1,y2,y3\n0.0,1.0,9,0,0\n")
        with pytest.raises(InconsistentChain):
            load_csv(path, h842)


class TestLabelSurgery:
    def test_drop_interior_level_composes_parents(self, tiny_data, h842):
        train_split, _ = tiny_data
        dropped = drop_level(train_split, 2)
        assert dropped.hierarchy.level_sizes == (8, 2)
        fine_to_mid = np.asarray(h842.parents[0])
        mid_to_top = np.asarray(h842.parents[1])
        np.testing.assert_array_equal(
            np.asarray(dropped.hierarchy.parents[0]), mid_to_top[fine_to_mid]
        )
        np.testing.assert_array_equal(dropped.labels[:, 0], train_split.labels[:, 0])
        np.testing.assert_array_equal(dropped.labels[:, 1], train_split.labels[:, 2])
        dropped.validate()

    def test_drop_then_backtrack_recovers_coarsest(self, tiny_data):
        train_split, _ = tiny_data
        dropped = drop_level(train_split, 2)
        recovered = dropped.hierarchy.chain_table()[train_split.labels[:, 0], 1]
        np.testing.assert_array_equal(recovered, train_split.labels[:, 2])

    def test_only_interior_levels_can_drop(self, tiny_data):
        train_split, _ = tiny_data
        for k in (1, 3):
            with pytest.raises(InvalidLevel):
                drop_level(train_split, k)

    def test_relabel_rederives_chains(self, tiny_data, h842):
        train_split, _ = tiny_data
        scrambled = h842.randomize(5)
        relabeled = relabel(train_split, scrambled)
        np.testing.assert_array_equal(relabeled.labels[:, 0], train_split.labels[:, 0])
        np.testing.assert_array_equal(
            relabeled.labels, scrambled.chain_table()[train_split.labels[:, 0]]
        )
        relabeled.validate()
        np.testing.assert_array_equal(relabeled.features, train_split.features)

    def test_relabel_needs_matching_fine_level(self, tiny_data):
        train_split, _ = tiny_data
        with pytest.raises(HierarchyMismatch):
            relabel(train_split, balanced((4, 2)))


class TestBenchmarkPreset:
    def test_frozen_constants(self):
        assert BENCHMARK_LEVEL_SIZES == (8, 4, 2)
        assert BENCHMARK_D == 16
        assert BENCHMARK_N_PER_CLASS == 100
        assert BENCHMARK_SCALES == (1.0, 1.4, 1.9)
        assert BENCHMARK_SIGMA == 2.5
        assert benchmark_hierarchy().level_sizes == BENCHMARK_LEVEL_SIZES

    def test_split_sizes(self):
        train_split, test_split = benchmark_datasets(0)
        assert len(train_split) == 800
        assert len(test_split) == 800
        assert train_split.d == 16
        train_split.validate()
        test_split.validate()

    def test_linear_probe_lands_in_band(self):
        # The noise level is calibrated so a plain linear classifier gets
        # 70-90% fine accuracy: hard enough that hierarchy helps, easy enough
        # that training converges.  Checked with an out-of-package learner.
        from sklearn.linear_model import LogisticRegression

        train_split, test_split = benchmark_datasets(0)
        probe = LogisticRegression(max_iter=2000)
        probe.fit(train_split.features, train_split.labels[:, 0])
        accuracy = probe.score(test_split.features, test_split.labels[:, 0])
        assert 0.70 <= accuracy <= 0.90
