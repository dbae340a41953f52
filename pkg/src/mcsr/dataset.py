"""Dataset manifests and the on-disk patch store.

A manifest lists pair sources (phantom seeds or registered image files),
a train/test split, and the degradation factors to precompute. Building
it degrades each primary image in k-space, cuts everything into aligned
64x64 patches and writes one MCSR1 tensor file per (pair, factor) plus
an index CSV and a metadata echo.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import load_tensors, save_tensors
from .config import format_kv, parse_kv_file, split_list
from .kspace import DegradeSpec, degrade, normalize01, patchify
from .phantom import ContrastPair, load_pair, make_phantom_pair

__all__ = ["DatasetManifest", "PatchStore", "build_dataset"]

INDEX_NAME = "index.csv"
META_NAME = "meta.txt"


@dataclass
class DatasetManifest:
    train_seeds: list[int] = field(default_factory=list)
    test_seeds: list[int] = field(default_factory=list)
    train_files: list[tuple[str, str]] = field(default_factory=list)
    test_files: list[tuple[str, str]] = field(default_factory=list)
    factors: list[int] = field(default_factory=lambda: [2])
    side: int = 256
    patch_side: int = 64

    def __post_init__(self):
        self.validate()

    def validate(self):
        overlap = set(self.train_seeds) & set(self.test_seeds)
        if overlap:
            raise ValueError(f"train/test seed overlap: {sorted(overlap)}")
        file_overlap = {p for p, _ in self.train_files} & {p for p, _ in self.test_files}
        if file_overlap:
            raise ValueError(f"train/test file overlap: {sorted(file_overlap)}")
        for f in self.factors:
            DegradeSpec(f)
        if self.side % self.patch_side:
            raise ValueError(
                f"side {self.side} not divisible by patch side {self.patch_side}"
            )

    @classmethod
    def from_file(cls, path) -> "DatasetManifest":
        kv = parse_kv_file(path)

        def ints(key):
            return [int(v) for v in split_list(kv.get(key, ""))]

        def pairs(key):
            out = []
            for item in split_list(kv.get(key, "")):
                a, _, b = item.partition(":")
                if not b:
                    raise ValueError(f"{key}: expected 'primary:reference', got {item!r}")
                out.append((a, b))
            return out

        return cls(
            train_seeds=ints("train_seeds"),
            test_seeds=ints("test_seeds"),
            train_files=pairs("train_files"),
            test_files=pairs("test_files"),
            factors=ints("factors") or [2],
            side=int(kv.get("side", 256)),
            patch_side=int(kv.get("patch_side", 64)),
        )

    def to_file(self, path):
        kv = {
            "side": self.side,
            "patch_side": self.patch_side,
            "factors": ",".join(str(f) for f in self.factors),
            "train_seeds": ",".join(str(s) for s in self.train_seeds),
            "test_seeds": ",".join(str(s) for s in self.test_seeds),
            "train_files": ",".join(f"{a}:{b}" for a, b in self.train_files),
            "test_files": ",".join(f"{a}:{b}" for a, b in self.test_files),
        }
        Path(path).write_text(format_kv(kv), encoding="utf-8")

    def sources(self):
        """Yield (pair_id, split, loader) in deterministic order."""
        for seed in self.train_seeds:
            yield f"seed{seed}", "train", lambda s=seed: make_phantom_pair(s, self.side)
        for seed in self.test_seeds:
            yield f"seed{seed}", "test", lambda s=seed: make_phantom_pair(s, self.side)
        for prim, ref in self.train_files:
            yield Path(prim).stem, "train", lambda p=prim, r=ref: load_pair(p, r)
        for prim, ref in self.test_files:
            yield Path(prim).stem, "test", lambda p=prim, r=ref: load_pair(p, r)


def _pair_tensors(pair: ContrastPair, factor: int, patch_side: int):
    hr = normalize01(pair.primary_hr)
    ref = normalize01(pair.reference_hr)
    lr = degrade(hr, DegradeSpec(factor))
    tensors = {
        "lr": patchify(lr, patch_side),
        "hr": patchify(hr, patch_side),
        "ref": patchify(ref, patch_side),
    }
    if factor == 4:
        tensors["lr2"] = patchify(degrade(hr, DegradeSpec(2)), patch_side)
    return tensors


def build_dataset(manifest: DatasetManifest, out_dir) -> Path:
    """Write patch tensors, index.csv and meta.txt under out_dir."""
    manifest.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    cols_per_side = manifest.side // manifest.patch_side
    for pair_id, split, loader in manifest.sources():
        pair = loader()
        if pair.primary_hr.shape != (manifest.side, manifest.side):
            raise ValueError(
                f"pair {pair_id}: expected {manifest.side}x{manifest.side}, "
                f"got {pair.primary_hr.shape}"
            )
        for factor in manifest.factors:
            tensors = _pair_tensors(pair, factor, manifest.patch_side)
            fname = f"{pair_id}_f{factor}.mcsr1"
            save_tensors(out / fname, tensors)
            for idx in range(tensors["hr"].shape[0]):
                rows.append(
                    {
                        "pair_id": pair_id,
                        "split": split,
                        "patch_row": idx // cols_per_side,
                        "patch_col": idx % cols_per_side,
                        "factor": factor,
                        "file": fname,
                    }
                )
    with open(out / INDEX_NAME, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["pair_id", "split", "patch_row", "patch_col", "factor", "file"]
        )
        writer.writeheader()
        writer.writerows(rows)
    meta = {
        "side": manifest.side,
        "patch_side": manifest.patch_side,
        "factors": ",".join(str(f) for f in manifest.factors),
    }
    for f in manifest.factors:
        meta[f"kept_side_f{f}"] = DegradeSpec(f).resolve(manifest.side)
    (out / META_NAME).write_text(format_kv(meta), encoding="utf-8")
    return out


class PatchStore:
    """Read access to a built dataset directory."""

    def __init__(self, root):
        self.root = Path(root)
        if not (self.root / INDEX_NAME).exists():
            raise FileNotFoundError(f"no {INDEX_NAME} under {self.root}")
        with open(self.root / INDEX_NAME, newline="", encoding="utf-8") as fh:
            self.index = list(csv.DictReader(fh))
        meta = parse_kv_file(self.root / META_NAME)
        self.side = int(meta["side"])
        self.patch_side = int(meta["patch_side"])
        self.factors = [int(v) for v in split_list(meta["factors"])]
        self._cache: dict[str, dict[str, np.ndarray]] = {}

    def _file_tensors(self, fname):
        if fname not in self._cache:
            self._cache[fname] = load_tensors(self.root / fname)
        return self._cache[fname]

    def pair_ids(self, split: str) -> list[str]:
        seen = []
        for row in self.index:
            if row["split"] == split and row["pair_id"] not in seen:
                seen.append(row["pair_id"])
        return seen

    def patches(self, split: str, factor: int) -> dict[str, np.ndarray]:
        """Aligned patch stacks for a split/factor, index order."""
        files = []
        for row in self.index:
            if row["split"] == split and int(row["factor"]) == factor:
                if row["file"] not in files:
                    files.append(row["file"])
        if not files:
            raise ValueError(f"no patches for split={split!r} factor={factor}")
        keys = ["lr", "hr", "ref"] + (["lr2"] if factor == 4 else [])
        stacks = {k: [] for k in keys}
        for fname in files:
            tensors = self._file_tensors(fname)
            for k in keys:
                stacks[k].append(tensors[k])
        return {k: np.concatenate(v, axis=0) for k, v in stacks.items()}

    def pair_patches(self, pair_id: str, factor: int) -> dict[str, np.ndarray]:
        fname = f"{pair_id}_f{factor}.mcsr1"
        return self._file_tensors(fname)
