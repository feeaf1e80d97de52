"""K-level label taxonomies: parent maps, 0/1 transition matrices, label chains.

Level 1 is the finest level and level K the coarsest.  Public methods take
1-based level numbers; class indices within a level are 0-based.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChildlessParent,
    IndexOutOfRange,
    InvalidLevel,
    NonDecreasingSizes,
    OrphanClass,
)

__all__ = ["LabelHierarchy", "balanced"]


@dataclass(frozen=True)
class LabelHierarchy:
    """A taxonomy of K levels joined by single-parent maps.

    ``parents[i][j]`` is the parent at level ``i + 2`` of class ``j`` at level
    ``i + 1``, so there is one map per adjacent level pair, ordered finest to
    coarsest.  Construction is permissive; call :meth:`validate` to enforce
    the structural invariants.
    """

    level_sizes: tuple[int, ...]
    parents: tuple[tuple[int, ...], ...]
    level_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "level_sizes", tuple(int(c) for c in self.level_sizes))
        object.__setattr__(self, "parents", tuple(tuple(int(p) for p in m) for m in self.parents))
        if self.level_names is not None:
            object.__setattr__(self, "level_names", tuple(str(s) for s in self.level_names))

    # -- structure ------------------------------------------------------------

    @property
    def num_levels(self) -> int:
        return len(self.level_sizes)

    def size(self, k: int) -> int:
        """Number of classes at level ``k`` (1-based)."""
        if not 1 <= k <= self.num_levels:
            raise InvalidLevel(f"level {k} outside [1, {self.num_levels}]")
        return self.level_sizes[k - 1]

    def validate(self) -> None:
        """Raise the first violated invariant, or return silently."""
        k_levels = self.num_levels
        if k_levels < 2:
            raise InvalidLevel(f"a hierarchy needs at least 2 levels, got {k_levels}")
        if any(c < 1 for c in self.level_sizes):
            raise NonDecreasingSizes(f"level sizes must be positive, got {self.level_sizes}")
        for i in range(k_levels - 1):
            if self.level_sizes[i] <= self.level_sizes[i + 1]:
                raise NonDecreasingSizes(
                    f"class counts must strictly decrease toward coarse levels: "
                    f"level {i + 1} has {self.level_sizes[i]}, level {i + 2} has {self.level_sizes[i + 1]}"
                )
        if len(self.parents) != k_levels - 1:
            raise OrphanClass(
                f"expected {k_levels - 1} parent maps for {k_levels} levels, got {len(self.parents)}"
            )
        for i, mapping in enumerate(self.parents):
            fine, coarse = self.level_sizes[i], self.level_sizes[i + 1]
            if len(mapping) != fine:
                raise OrphanClass(
                    f"parent map for levels {i + 1}->{i + 2} must assign all {fine} classes, "
                    f"got {len(mapping)} entries"
                )
            for j, p in enumerate(mapping):
                if not 0 <= p < coarse:
                    raise IndexOutOfRange(
                        f"class {j} at level {i + 1} has parent {p}, valid range is [0, {coarse})"
                    )
            missing = sorted(set(range(coarse)) - set(mapping))
            if missing:
                raise ChildlessParent(f"classes {missing} at level {i + 2} have no children")

    # -- derived structures ----------------------------------------------------

    def naive_transition(self, k: int) -> np.ndarray:
        """The 0/1 parent-indicator matrix mapping level k-1 onto level k.

        Entry ``[i, j]`` is 1 iff class ``j`` at level ``k - 1`` has parent
        ``i`` at level ``k``; each column holds exactly one 1.
        """
        if not 2 <= k <= self.num_levels:
            raise InvalidLevel(f"transition level must be in [2, {self.num_levels}], got {k}")
        fine, coarse = self.level_sizes[k - 2], self.level_sizes[k - 1]
        t = np.zeros((coarse, fine), dtype=np.float64)
        t[np.asarray(self.parents[k - 2]), np.arange(fine)] = 1.0
        return t

    def backtrack(self, fine_label: int) -> tuple[int, ...]:
        """The full label chain (finest to coarsest) implied by a fine label."""
        fine_label = int(fine_label)
        if not 0 <= fine_label < self.level_sizes[0]:
            raise IndexOutOfRange(
                f"fine label {fine_label} outside [0, {self.level_sizes[0]})"
            )
        chain = [fine_label]
        for mapping in self.parents:
            chain.append(mapping[chain[-1]])
        return tuple(chain)

    def ancestors(self, k: int) -> np.ndarray:
        """Level-k ancestor of every finest class, as an int array."""
        if not 1 <= k <= self.num_levels:
            raise InvalidLevel(f"level {k} outside [1, {self.num_levels}]")
        anc = np.arange(self.level_sizes[0])
        for mapping in self.parents[: k - 1]:
            anc = np.asarray(mapping)[anc]
        return anc

    def chain_table(self) -> np.ndarray:
        """All label chains as an int array of shape [C_1, K], finest first."""
        return np.stack([self.ancestors(k) for k in range(1, self.num_levels + 1)], axis=1)

    def lca_height(self, a: int, b: int) -> int:
        """Height of the lowest common ancestor of two finest classes.

        0 for identical classes, 1 when they share a parent, and K when they
        remain in different classes even at the coarsest level.
        """
        c1 = self.level_sizes[0]
        for label in (a, b):
            if not 0 <= int(label) < c1:
                raise IndexOutOfRange(f"fine label {label} outside [0, {c1})")
        if a == b:
            return 0
        pa, pb = int(a), int(b)
        for height, mapping in enumerate(self.parents, start=1):
            pa, pb = mapping[pa], mapping[pb]
            if pa == pb:
                return height
        return self.num_levels

    # -- transformations ---------------------------------------------------------

    def randomize(self, seed: int) -> "LabelHierarchy":
        """Redraw every parent map uniformly at random, keeping level sizes.

        Finest-level class indices are untouched.  Draws are rejected until
        every coarse class keeps at least one child, so the result always
        passes :meth:`validate`.  Deterministic per seed.
        """
        self.validate()
        rng = np.random.Generator(np.random.PCG64(int(seed)))
        new_maps = []
        for i in range(self.num_levels - 1):
            fine, coarse = self.level_sizes[i], self.level_sizes[i + 1]
            while True:
                draw = rng.integers(0, coarse, size=fine)
                if len(set(draw.tolist())) == coarse:
                    break
            new_maps.append(tuple(int(p) for p in draw))
        return dataclasses.replace(self, parents=tuple(new_maps))

    def drop_level(self, k: int) -> "LabelHierarchy":
        """Remove an interior level, composing the parent maps around it."""
        if not 2 <= k <= self.num_levels - 1:
            raise InvalidLevel(
                f"only interior levels can be dropped, got {k} with {self.num_levels} levels"
            )
        lower = self.parents[k - 2]   # level k-1 -> k
        upper = self.parents[k - 1]   # level k   -> k+1
        composed = tuple(upper[p] for p in lower)
        new_sizes = self.level_sizes[: k - 1] + self.level_sizes[k:]
        new_parents = self.parents[: k - 2] + (composed,) + self.parents[k:]
        new_names = None
        if self.level_names is not None:
            new_names = self.level_names[: k - 1] + self.level_names[k:]
        return LabelHierarchy(new_sizes, new_parents, new_names)

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "level_sizes": list(self.level_sizes),
            "parents": [list(m) for m in self.parents],
        }
        if self.level_names is not None:
            out["level_names"] = list(self.level_names)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "LabelHierarchy":
        names = d.get("level_names")
        return cls(
            level_sizes=tuple(d["level_sizes"]),
            parents=tuple(tuple(m) for m in d["parents"]),
            level_names=tuple(names) if names is not None else None,
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "LabelHierarchy":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def sha256(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def balanced(level_sizes) -> LabelHierarchy:
    """A hierarchy whose classes are grouped evenly: parent of j is j*C_up//C_low."""
    sizes = tuple(int(c) for c in level_sizes)
    parents = []
    for i in range(len(sizes) - 1):
        fine, coarse = sizes[i], sizes[i + 1]
        parents.append(tuple(j * coarse // fine for j in range(fine)))
    hier = LabelHierarchy(sizes, tuple(parents))
    hier.validate()
    return hier
