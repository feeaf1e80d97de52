"""Synthetic hierarchical Gaussian-mixture data plus CSV ingestion.

Class centers are drawn top-down: coarsest-level centers at the largest scale,
each child center offset from its parent at a strictly smaller scale, so
classes sharing a parent stay closer together than classes that do not.
Samples are fine-class centers plus isotropic noise, labeled with the full
chain implied by the hierarchy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DimensionMismatch,
    HierarchyMismatch,
    InconsistentChain,
    InvalidScales,
    ParseError,
)
from .hierarchy import LabelHierarchy, balanced

__all__ = [
    "Sample",
    "Dataset",
    "generate_synthetic",
    "save_csv",
    "load_csv",
    "drop_level",
    "relabel",
    "BENCHMARK_LEVEL_SIZES",
    "BENCHMARK_D",
    "BENCHMARK_N_PER_CLASS",
    "BENCHMARK_SCALES",
    "BENCHMARK_SIGMA",
    "benchmark_hierarchy",
    "benchmark_datasets",
]

# Default benchmark: an [8, 4, 2] taxonomy in 16 dimensions, 100 samples per
# fine class in each split.  Scales and noise are calibrated together so that
# a linear classifier on the fine level lands in the 70-90% accuracy band
# (0.805 at seed 0) while sibling fine classes stay close enough that the
# hierarchy carries real signal: coarse levels are much easier than the fine
# level, and scrambling the parent maps costs coarse accuracy without moving
# fine accuracy.
BENCHMARK_LEVEL_SIZES = (8, 4, 2)
BENCHMARK_D = 16
BENCHMARK_N_PER_CLASS = 100
BENCHMARK_SCALES = (1.0, 1.4, 1.9)
BENCHMARK_SIGMA = 2.5


@dataclass(frozen=True)
class Sample:
    """One feature vector with its full label chain (finest first)."""

    x: np.ndarray
    chain: tuple[int, ...]


@dataclass(frozen=True)
class Dataset:
    """Feature rows paired with K-level label chains over one hierarchy."""

    features: np.ndarray       # [n, d] float64
    labels: np.ndarray         # [n, K] int64, finest level first
    hierarchy: LabelHierarchy
    split: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if self.features.ndim != 2 or self.labels.ndim != 2:
            raise DimensionMismatch(
                f"features and labels must be 2-dimensional, got {self.features.shape} "
                f"and {self.labels.shape}"
            )
        if len(self.features) != len(self.labels):
            raise DimensionMismatch(
                f"{len(self.features)} feature rows but {len(self.labels)} label rows"
            )
        if self.labels.shape[1] != self.hierarchy.num_levels:
            raise DimensionMismatch(
                f"expected {self.hierarchy.num_levels} label levels, got {self.labels.shape[1]}"
            )

    def __len__(self) -> int:
        return len(self.features)

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.features[i], tuple(int(v) for v in self.labels[i]))

    def validate(self) -> None:
        """Check every label chain against the hierarchy's parent maps."""
        self.hierarchy.validate()
        if len(self) == 0:
            return
        fine = self.labels[:, 0]
        if fine.min() < 0 or fine.max() >= self.hierarchy.level_sizes[0]:
            raise InconsistentChain(
                f"fine labels outside [0, {self.hierarchy.level_sizes[0]})"
            )
        expected = self.hierarchy.chain_table()[fine]
        if not np.array_equal(expected, self.labels):
            bad = int(np.nonzero(np.any(expected != self.labels, axis=1))[0][0])
            raise InconsistentChain(
                f"row {bad}: chain {tuple(int(v) for v in self.labels[bad])} does not "
                f"follow the hierarchy, expected {tuple(int(v) for v in expected[bad])}"
            )


def generate_synthetic(
    hierarchy: LabelHierarchy,
    d: int,
    n_per_class: int,
    noise_sigma: float,
    center_scales=None,
    seed: int = 0,
) -> tuple[Dataset, Dataset]:
    """Draw disjoint train/test splits from a hierarchical Gaussian mixture.

    ``center_scales`` lists one scale per level, finest first, and must
    strictly increase: coarsest-level centers are drawn at the largest scale
    and each refinement adds a smaller offset.  Each fine class contributes
    ``n_per_class`` train rows and ``n_per_class`` test rows.  Deterministic
    per seed.
    """
    hierarchy.validate()
    levels = hierarchy.num_levels
    if center_scales is None:
        center_scales = tuple(float(2 ** k) for k in range(levels))
    scales = tuple(float(s) for s in center_scales)
    if len(scales) != levels:
        raise InvalidScales(f"expected {levels} center scales, got {len(scales)}")
    if any(s <= 0 for s in scales) or any(a >= b for a, b in zip(scales, scales[1:])):
        raise InvalidScales(
            f"center scales must be positive and strictly increase finest to coarsest, got {scales}"
        )
    if d < levels:
        raise DimensionMismatch(f"feature dim {d} must be at least the level count {levels}")
    if noise_sigma <= 0:
        raise InvalidScales(f"noise sigma must be positive, got {noise_sigma}")
    if n_per_class < 1:
        raise DimensionMismatch(f"need at least 1 sample per class, got {n_per_class}")

    rng = np.random.Generator(np.random.PCG64(int(seed)))
    centers = rng.normal(0.0, scales[-1], size=(hierarchy.level_sizes[-1], d))
    for k in range(levels - 1, 0, -1):  # refine level k+1 centers into level k
        parent_map = np.asarray(hierarchy.parents[k - 1])
        offsets = rng.normal(0.0, scales[k - 1], size=(hierarchy.level_sizes[k - 1], d))
        centers = centers[parent_map] + offsets
    chains = hierarchy.chain_table()

    train_rows, test_rows, train_labels, test_labels = [], [], [], []
    for c in range(hierarchy.level_sizes[0]):
        block = centers[c] + rng.normal(0.0, noise_sigma, size=(2 * n_per_class, d))
        train_rows.append(block[:n_per_class])
        test_rows.append(block[n_per_class:])
        stacked = np.tile(chains[c], (n_per_class, 1))
        train_labels.append(stacked)
        test_labels.append(stacked.copy())
    train = Dataset(np.vstack(train_rows), np.vstack(train_labels), hierarchy, split="train")
    test = Dataset(np.vstack(test_rows), np.vstack(test_labels), hierarchy, split="test")
    return train, test


# -- CSV interchange -------------------------------------------------------------
#
# Header: f0,...,f{d-1},y1,...,y{K}; one sample per line; floats written with
# Python's shortest round-trip representation so save/load is lossless.

def save_csv(dataset: Dataset, path) -> None:
    d, levels = dataset.d, dataset.hierarchy.num_levels
    header = ",".join([f"f{i}" for i in range(d)] + [f"y{k}" for k in range(1, levels + 1)])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row, chain in zip(dataset.features, dataset.labels):
            cells = [repr(float(v)) for v in row] + [str(int(v)) for v in chain]
            fh.write(",".join(cells) + "\n")


def load_csv(path, hierarchy: LabelHierarchy, split: str = "") -> Dataset:
    hierarchy.validate()
    levels = hierarchy.num_levels
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = lines[0].split(",")
    d = sum(1 for name in header if name.startswith("f"))
    expected_header = [f"f{i}" for i in range(d)] + [f"y{k}" for k in range(1, len(header) - d + 1)]
    if d == 0 or header != expected_header:
        raise ParseError(f"{path}: malformed header {lines[0]!r}")
    if len(header) - d != levels:
        raise DimensionMismatch(
            f"{path}: header declares {len(header) - d} label levels, hierarchy has {levels}"
        )
    features = np.zeros((len(lines) - 1, d))
    labels = np.zeros((len(lines) - 1, levels), dtype=np.int64)
    table = hierarchy.chain_table()
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != d + levels:
            raise ParseError(f"{path}: line {i}: expected {d + levels} cells, got {len(cells)}")
        try:
            features[i - 2] = [float(v) for v in cells[:d]]
            labels[i - 2] = [int(v) for v in cells[d:]]
        except ValueError as err:
            raise ParseError(f"{path}: line {i}: {err}") from err
        fine = labels[i - 2, 0]
        if not 0 <= fine < hierarchy.level_sizes[0]:
            raise InconsistentChain(
                f"{path}: line {i}: fine label {fine} outside [0, {hierarchy.level_sizes[0]})"
            )
        if not np.array_equal(table[fine], labels[i - 2]):
            raise InconsistentChain(
                f"{path}: line {i}: chain {tuple(int(v) for v in labels[i - 2])} does not "
                f"follow the hierarchy, expected {tuple(int(v) for v in table[fine])}"
            )
    return Dataset(features, labels, hierarchy, split=split)


# -- ablation helpers --------------------------------------------------------------

def drop_level(dataset: Dataset, k: int) -> Dataset:
    """Remove one interior label level, composing the parent maps around it."""
    new_hier = dataset.hierarchy.drop_level(k)
    new_labels = np.delete(dataset.labels, k - 1, axis=1)
    return Dataset(dataset.features, new_labels, new_hier, split=dataset.split)


def relabel(dataset: Dataset, hierarchy: LabelHierarchy) -> Dataset:
    """Re-derive every chain from the fine labels under a different hierarchy."""
    hierarchy.validate()
    if hierarchy.level_sizes[0] != dataset.hierarchy.level_sizes[0]:
        raise HierarchyMismatch(
            f"fine level has {hierarchy.level_sizes[0]} classes, dataset uses "
            f"{dataset.hierarchy.level_sizes[0]}"
        )
    new_labels = hierarchy.chain_table()[dataset.labels[:, 0]]
    return Dataset(dataset.features, new_labels, hierarchy, split=dataset.split)


# -- benchmark -----------------------------------------------------------------------

def benchmark_hierarchy() -> LabelHierarchy:
    return balanced(BENCHMARK_LEVEL_SIZES)


def benchmark_datasets(seed: int = 0) -> tuple[Dataset, Dataset]:
    """The default synthetic benchmark splits (800 train / 800 test rows)."""
    return generate_synthetic(
        benchmark_hierarchy(),
        d=BENCHMARK_D,
        n_per_class=BENCHMARK_N_PER_CLASS,
        noise_sigma=BENCHMARK_SIGMA,
        center_scales=BENCHMARK_SCALES,
        seed=seed,
    )
