"""Taxonomy structure: validation, 0/1 transitions, label chains, transforms."""

import json

import numpy as np
import pytest

from lht.errors import (
    ChildlessParent,
    IndexOutOfRange,
    InvalidLevel,
    NonDecreasingSizes,
    OrphanClass,
)
from lht.hierarchy import LabelHierarchy, balanced


class TestValidate:
    def test_balanced_three_levels_ok(self, h842):
        h842.validate()
        assert h842.num_levels == 3
        assert h842.level_sizes == (8, 4, 2)

    def test_sizes_must_strictly_decrease(self):
        hier = LabelHierarchy((8, 4, 4), ((0, 0, 1, 1, 2, 2, 3, 3), (0, 1, 2, 3)))
        with pytest.raises(NonDecreasingSizes):
            hier.validate()

    def test_zero_size_level_rejected(self):
        hier = LabelHierarchy((2, 0), ((0, 0),))
        with pytest.raises(NonDecreasingSizes):
            hier.validate()

    def test_single_level_rejected(self):
        with pytest.raises(InvalidLevel):
            LabelHierarchy((5,), ()).validate()

    def test_missing_parent_entries(self):
        hier = LabelHierarchy((4, 2), ((0, 0, 1),))
        with pytest.raises(OrphanClass):
            hier.validate()

    def test_missing_parent_map(self):
        hier = LabelHierarchy((4, 2), ())
        with pytest.raises(OrphanClass):
            hier.validate()

    def test_parent_index_out_of_range(self):
        hier = LabelHierarchy((4, 2), ((0, 0, 1, 2),))
        with pytest.raises(IndexOutOfRange):
            hier.validate()

    def test_childless_parent(self):
        hier = LabelHierarchy((4, 2), ((0, 0, 0, 0),))
        with pytest.raises(ChildlessParent):
            hier.validate()

    def test_larger_hierarchy_with_complete_maps_ok(self):
        # 200 -> 38 -> 13 with parents assigned round-robin so each coarse
        # class keeps children.
        sizes = (200, 38, 13)
        parents = (
            tuple(j % 38 for j in range(200)),
            tuple(j % 13 for j in range(38)),
        )
        LabelHierarchy(sizes, parents).validate()

    def test_size_accessor_bounds(self, h842):
        assert h842.size(1) == 8
        assert h842.size(3) == 2
        with pytest.raises(InvalidLevel):
            h842.size(0)
        with pytest.raises(InvalidLevel):
            h842.size(4)


class TestNaiveTransition:
    def test_four_to_two_grouping(self):
        # Four families grouped pairwise into two orders.
        hier = balanced((4, 2))
        t = hier.naive_transition(2)
        assert t.tolist() == [[1, 1, 0, 0], [0, 0, 1, 1]]

    def test_balanced_eight_to_four(self, h842):
        t = hier_t = h842.naive_transition(2)
        assert hier_t.shape == (4, 8)
        for j in range(8):
            col = t[:, j]
            assert col[j // 2] == 1.0 and col.sum() == 1.0

    def test_entries_are_binary_with_unit_columns(self, h842):
        for k in (2, 3):
            t = h842.naive_transition(k)
            assert set(np.unique(t)) <= {0.0, 1.0}
            np.testing.assert_array_equal(t.sum(axis=0), np.ones(t.shape[1]))

    def test_level_bounds(self, h842):
        with pytest.raises(InvalidLevel):
            h842.naive_transition(1)
        with pytest.raises(InvalidLevel):
            h842.naive_transition(4)

    def test_maps_onehot_child_to_onehot_parent(self, h842):
        # For every valid chain, the 0/1 matrix sends the child one-hot
        # exactly onto the parent one-hot.
        for fine in range(8):
            chain = h842.backtrack(fine)
            vec = np.zeros(8)
            vec[fine] = 1.0
            for k in (2, 3):
                vec = h842.naive_transition(k) @ vec
                expected = np.zeros(h842.size(k))
                expected[chain[k - 1]] = 1.0
                np.testing.assert_array_equal(vec, expected)


class TestBacktrack:
    def test_middle_label(self, h842):
        assert h842.backtrack(5) == (5, 2, 1)

    def test_zero_label(self, h842):
        assert h842.backtrack(0) == (0, 0, 0)

    def test_out_of_range(self, h842):
        with pytest.raises(IndexOutOfRange):
            h842.backtrack(8)
        with pytest.raises(IndexOutOfRange):
            h842.backtrack(-1)

    def test_chain_table_matches_backtrack(self, h842):
        table = h842.chain_table()
        assert table.shape == (8, 3)
        for fine in range(8):
            assert tuple(table[fine]) == h842.backtrack(fine)

    def test_ancestors_levels(self, h842):
        np.testing.assert_array_equal(h842.ancestors(1), np.arange(8))
        np.testing.assert_array_equal(h842.ancestors(2), [0, 0, 1, 1, 2, 2, 3, 3])
        np.testing.assert_array_equal(h842.ancestors(3), [0, 0, 0, 0, 1, 1, 1, 1])


class TestLcaHeight:
    def test_identical_is_zero(self, h842):
        assert h842.lca_height(3, 3) == 0

    def test_siblings_share_parent(self, h842):
        assert h842.lca_height(4, 5) == 1

    def test_cousins_meet_at_level_two(self, h842):
        assert h842.lca_height(0, 2) == 2

    def test_disjoint_up_to_root(self, h842):
        assert h842.lca_height(0, 7) == 3

    def test_out_of_range(self, h842):
        with pytest.raises(IndexOutOfRange):
            h842.lca_height(0, 9)


class TestRandomize:
    def test_deterministic_per_seed(self, h842):
        assert h842.randomize(11) == h842.randomize(11)

    def test_result_validates_and_keeps_sizes(self, h842):
        for seed in range(20):
            r = h842.randomize(seed)
            r.validate()
            assert r.level_sizes == h842.level_sizes

    def test_usually_differs_from_input(self, h842):
        differing = sum(h842.randomize(s).parents != h842.parents for s in range(100))
        assert differing >= 99

    def test_finest_level_untouched(self, h842):
        # Only parent maps change; the hierarchy still addresses the same
        # eight fine classes.
        r = h842.randomize(3)
        assert r.size(1) == 8
        assert len(r.parents[0]) == 8


class TestDropLevel:
    def test_drop_middle_composes_parents(self, h842):
        dropped = h842.drop_level(2)
        assert dropped.level_sizes == (8, 2)
        np.testing.assert_array_equal(dropped.ancestors(2), h842.ancestors(3))
        dropped.validate()

    def test_drop_reproduces_coarsest_chain(self, h842):
        dropped = h842.drop_level(2)
        for fine in range(8):
            assert dropped.backtrack(fine)[-1] == h842.backtrack(fine)[-1]

    def test_cannot_drop_finest_or_coarsest(self, h842):
        with pytest.raises(InvalidLevel):
            h842.drop_level(1)
        with pytest.raises(InvalidLevel):
            h842.drop_level(3)


class TestSerialization:
    def test_dict_round_trip(self, h842):
        assert LabelHierarchy.from_dict(h842.to_dict()) == h842

    def test_file_round_trip(self, h842, tmp_path):
        path = tmp_path / "hier.json"
        h842.save(path)
        assert LabelHierarchy.load(path) == h842
        # The on-disk form is plain JSON with the documented keys.
        payload = json.loads(path.read_text())
        assert payload["level_sizes"] == [8, 4, 2]
        assert len(payload["parents"]) == 2

    def test_names_preserved(self):
        hier = LabelHierarchy((4, 2), ((0, 0, 1, 1),), ("species", "order"))
        assert LabelHierarchy.from_dict(hier.to_dict()).level_names == ("species", "order")

    def test_sha_tracks_structure(self, h842):
        assert h842.sha256() == balanced((8, 4, 2)).sha256()
        assert h842.sha256() != h842.randomize(6).sha256()
