import pytest

from lowlight.dataset import (
    DatasetSplit,
    read_manifest,
    scan_lol,
    scan_lol_v2,
    write_manifest,
)
from lowlight.errors import EmptySplitError, MissingDirectoryError, UnpairedImageError


def make_tree(root, layout, n_train, n_test):
    """layout: (train_low, train_high, test_low, test_high) relative dirs."""
    tl, th, sl, sh = layout
    for sub, count in ((tl, n_train), (th, n_train), (sl, n_test), (sh, n_test)):
        d = root / sub
        d.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            (d / f"{i:04d}.png").touch()


LOL_LAYOUT = ("our485/low", "our485/high", "eval15/low", "eval15/high")
V2_LAYOUT = ("Train/Low", "Train/Normal", "Test/Low", "Test/Normal")


@pytest.fixture(scope="module")
def lol_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("lol")
    make_tree(root, LOL_LAYOUT, 485, 15)
    return root


@pytest.fixture(scope="module")
def v2_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("lolv2")
    make_tree(root, V2_LAYOUT, 689, 100)
    return root


class TestScanLol:
    def test_counts(self, lol_tree):
        split = scan_lol(lol_tree, seed=7)
        assert split.counts() == (400, 85, 15)

    def test_deterministic_per_seed(self, lol_tree):
        a = scan_lol(lol_tree, seed=3)
        b = scan_lol(lol_tree, seed=3)
        assert a.train == b.train and a.val == b.val and a.test == b.test

    def test_different_seeds_differ(self, lol_tree):
        a = scan_lol(lol_tree, seed=1)
        b = scan_lol(lol_tree, seed=2)
        assert a.val != b.val

    def test_val_disjoint_from_train(self, lol_tree):
        split = scan_lol(lol_tree, seed=5)
        assert not set(split.train) & set(split.val)
        assert not set(split.test) & (set(split.train) | set(split.val))

    def test_val_overlap_mode_keeps_full_train(self, lol_tree):
        split = scan_lol(lol_tree, seed=5, val_overlaps_train=True)
        assert split.counts() == (485, 85, 15)
        assert set(split.val) <= set(split.train)

    def test_unpaired_image_named(self, tmp_path):
        make_tree(tmp_path, LOL_LAYOUT, 10, 2)
        (tmp_path / "our485/high/0003.png").unlink()
        with pytest.raises(UnpairedImageError, match="0003.png"):
            scan_lol(tmp_path, seed=0, val_count=2)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(MissingDirectoryError):
            scan_lol(tmp_path / "absent", seed=0)

    def test_partial_tree_missing_subdir(self, tmp_path):
        (tmp_path / "our485/low").mkdir(parents=True)
        with pytest.raises(MissingDirectoryError, match="high"):
            scan_lol(tmp_path, seed=0)

    def test_val_draw_larger_than_train(self, tmp_path):
        make_tree(tmp_path, LOL_LAYOUT, 5, 1)
        with pytest.raises(EmptySplitError):
            scan_lol(tmp_path, seed=0, val_count=5)

    def test_pairs_share_basename(self, lol_tree):
        split = scan_lol(lol_tree, seed=0)
        for low, high in split.train + split.val + split.test:
            assert low.name == high.name


class TestScanLolV2:
    def test_counts(self, v2_tree):
        assert scan_lol_v2(v2_tree, seed=11).counts() == (501, 188, 100)

    def test_deterministic(self, v2_tree):
        assert scan_lol_v2(v2_tree, seed=4).val == scan_lol_v2(v2_tree, seed=4).val

    def test_empty_root(self, tmp_path):
        with pytest.raises(MissingDirectoryError):
            scan_lol_v2(tmp_path / "none", seed=0)


def test_manifest_roundtrip(tmp_path, lol_tree):
    split = scan_lol(lol_tree, seed=9)
    path = tmp_path / "manifest.json"
    write_manifest(split, path)
    back = read_manifest(path)
    assert back.seed == 9
    assert back.counts() == split.counts()
    assert back.train == split.train
    assert back.test == split.test


def test_split_constructible_directly(tmp_path):
    pair = (tmp_path / "a.png", tmp_path / "b.png")
    split = DatasetSplit(train=[pair], val=[pair], test=[], seed=1)
    assert split.counts() == (1, 1, 0)
