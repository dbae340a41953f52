import numpy as np
import pytest

from mcsr.dataset import DatasetManifest, PatchStore, build_dataset
from mcsr.kspace import DegradeSpec, degrade, normalize01, patchify, reassemble
from mcsr.phantom import make_phantom_pair


@pytest.fixture(scope="module")
def store(tmp_path_factory):
    manifest = DatasetManifest(
        train_seeds=list(range(10)), test_seeds=[100, 101], factors=[2, 4]
    )
    out = tmp_path_factory.mktemp("data")
    build_dataset(manifest, out)
    return PatchStore(out)


def test_ten_pairs_give_160_tuples(store):
    patches = store.patches("train", 2)
    assert patches["lr"].shape == (160, 64, 64)
    assert patches["hr"].shape == (160, 64, 64)
    assert patches["ref"].shape == (160, 64, 64)
    assert "lr2" not in patches


def test_factor4_carries_intermediate_targets(store):
    patches = store.patches("train", 4)
    assert patches["lr2"].shape == (160, 64, 64)


def test_lr_patches_match_independent_recompute(store):
    # recompute: degrade the full HR image, then crop the same grid cell
    pair = make_phantom_pair(3)
    lr_full = degrade(normalize01(pair.primary_hr), DegradeSpec(2))
    expected = patchify(lr_full)
    got = store.pair_patches("seed3", 2)["lr"]
    np.testing.assert_array_equal(got, expected)


def test_patches_reassemble_to_full_images(store):
    tensors = store.pair_patches("seed100", 2)
    pair = make_phantom_pair(100)
    np.testing.assert_array_equal(
        reassemble(tensors["hr"], 256, 256), normalize01(pair.primary_hr)
    )


def test_all_patches_in_unit_interval(store):
    for split in ("train", "test"):
        patches = store.patches(split, 2)
        for arr in patches.values():
            assert arr.min() >= 0.0 and arr.max() <= 1.0


def test_split_disjoint(store):
    assert set(store.pair_ids("train")).isdisjoint(store.pair_ids("test"))


def test_seed_overlap_rejected():
    with pytest.raises(ValueError, match="overlap"):
        DatasetManifest(train_seeds=[1, 2], test_seeds=[2, 3])


def test_build_deterministic(tmp_path):
    manifest = DatasetManifest(train_seeds=[7], test_seeds=[], factors=[2])
    a, b = tmp_path / "a", tmp_path / "b"
    build_dataset(manifest, a)
    build_dataset(manifest, b)
    for name in ("index.csv", "meta.txt", "seed7_f2.mcsr1"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_manifest_round_trip(tmp_path):
    manifest = DatasetManifest(
        train_seeds=[1, 2, 3],
        test_seeds=[9],
        train_files=[("p1.pgm", "r1.pgm")],
        factors=[2, 4],
    )
    path = tmp_path / "manifest.txt"
    manifest.to_file(path)
    loaded = DatasetManifest.from_file(path)
    assert loaded == manifest


def test_metadata_records_window_sides(store):
    meta = (store.root / "meta.txt").read_text()
    assert "kept_side_f2 = 128" in meta
    assert "kept_side_f4 = 64" in meta
