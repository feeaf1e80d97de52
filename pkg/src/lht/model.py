"""The hierarchical classifier: shared backbone, level heads, transition recursion.

A small MLP embeds the input; the embedding is split evenly into one slice per
level.  Depending on the mode, per-level probabilities come from a single head
plus a chain of input-conditioned column-stochastic transition matrices
(``lht_f2c`` upward, ``lht_c2f`` downward), from constant 0/1 parent-indicator
matrices (``lht_naive``, ``vanilla``), or from independent per-level heads
(``vanilla_single``).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from . import ops
from .autodiff import Tensor
from .errors import (
    CheckpointError,
    HierarchyMismatch,
    ModeMismatch,
    ShapeMismatch,
)
from .hierarchy import LabelHierarchy

__all__ = [
    "MODES",
    "ModelConfig",
    "TransitionRecord",
    "PredictionChain",
    "LhtModel",
    "forward_f2c",
    "forward_c2f",
    "forward_vanilla",
    "save_checkpoint",
    "load_checkpoint",
]

MODES = ("vanilla", "vanilla_single", "lht_f2c", "lht_c2f", "lht_naive")

_CHECKPOINT_MAGIC = b"LHTCKPT\x01"
_CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture sizes shared by every mode."""

    input_dim: int
    hidden_dim: int = 64
    embedding_dim: int = 60
    transition_input: str = "slice"  # feed transition heads one slice or the full embedding

    def validate(self, num_levels: int) -> None:
        if min(self.input_dim, self.hidden_dim, self.embedding_dim) < 1:
            raise ShapeMismatch(
                f"model dimensions must be positive, got input={self.input_dim}, "
                f"hidden={self.hidden_dim}, embedding={self.embedding_dim}"
            )
        if self.embedding_dim % num_levels != 0:
            raise ShapeMismatch(
                f"embedding dim {self.embedding_dim} must split evenly into {num_levels} level slices"
            )
        if self.transition_input not in ("slice", "full"):
            raise ModeMismatch(
                f"transition_input must be 'slice' or 'full', got {self.transition_input!r}"
            )


@dataclass(frozen=True)
class TransitionRecord:
    """One (batch of) column-stochastic matrices feeding one level's prediction."""

    level: int    # level whose probabilities this matrix produces
    rows: int
    cols: int
    flat: Tensor  # row-major entries, [rows*cols] or [N, rows*cols]
    learned: bool # False when the matrix is the constant 0/1 parent indicator


@dataclass(frozen=True)
class PredictionChain:
    """Per-level probabilities plus the transition matrices that produced them."""

    mode: str
    hierarchy: LabelHierarchy
    probs: tuple[Tensor, ...]                  # probs[k-1] is level k, finest first
    transitions: tuple[TransitionRecord, ...]  # creation order; empty in vanilla modes

    @property
    def batched(self) -> bool:
        return self.probs[0].ndim == 2

    @property
    def batch_size(self) -> int:
        return self.probs[0].shape[0] if self.batched else 1


class LhtModel:
    """Backbone, heads, and recursion; parameters live in named Tensors."""

    def __init__(
        self,
        hierarchy: LabelHierarchy,
        mode: str,
        config: ModelConfig,
        *,
        seed: int = 0,
    ) -> None:
        if mode not in MODES:
            raise ModeMismatch(f"unknown mode {mode!r}, expected one of {MODES}")
        hierarchy.validate()
        config.validate(hierarchy.num_levels)
        self.hierarchy = hierarchy
        self.mode = mode
        self.config = config
        self.seed = int(seed)
        self._params: list[tuple[str, Tensor, str]] = []
        rng = np.random.Generator(np.random.PCG64(self.seed))
        sizes = hierarchy.level_sizes
        levels = hierarchy.num_levels
        self._slice_dim = config.embedding_dim // levels
        self.w1, self.b1 = self._add_affine("backbone.layer1", "backbone", rng,
                                            config.hidden_dim, config.input_dim)
        self.w2, self.b2 = self._add_affine("backbone.layer2", "backbone", rng,
                                            config.embedding_dim, config.hidden_dim)
        trans_in = config.embedding_dim if config.transition_input == "full" else self._slice_dim
        self._level_heads: dict[int, tuple[Tensor, Tensor]] = {}
        self._transition_heads: dict[int, tuple[Tensor, Tensor]] = {}
        if mode in ("vanilla", "lht_naive", "lht_f2c"):
            self._level_heads[1] = self._add_affine("head.level1", "heads", rng,
                                                    sizes[0], self._slice_dim)
        elif mode == "lht_c2f":
            self._level_heads[levels] = self._add_affine(f"head.level{levels}", "heads", rng,
                                                         sizes[levels - 1], self._slice_dim)
        else:  # vanilla_single
            for k in range(1, levels + 1):
                self._level_heads[k] = self._add_affine(f"head.level{k}", "heads", rng,
                                                        sizes[k - 1], self._slice_dim)
        if mode == "lht_f2c":
            for k in range(2, levels + 1):
                rows, cols = sizes[k - 1], sizes[k - 2]
                self._transition_heads[k] = self._add_affine(f"head.transition{k}", "heads",
                                                             rng, rows * cols, trans_in)
        elif mode == "lht_c2f":
            for k in range(levels - 1, 0, -1):
                rows, cols = sizes[k - 1], sizes[k]
                self._transition_heads[k] = self._add_affine(f"head.transition{k}", "heads",
                                                             rng, rows * cols, trans_in)
        # Constant parent-indicator matrices, shared by naive and vanilla forwards.
        self._naive = {k: hierarchy.naive_transition(k) for k in range(2, levels + 1)}
        self._naive_flat = {k: Tensor(m.reshape(-1)) for k, m in self._naive.items()}

    def _add_affine(self, name: str, group: str, rng, out_dim: int, in_dim: int):
        bound = 1.0 / math.sqrt(in_dim)
        w = Tensor(rng.uniform(-bound, bound, size=(out_dim, in_dim)))
        b = Tensor(np.zeros(out_dim))
        self._params.append((f"{name}.w", w, group))
        self._params.append((f"{name}.b", b, group))
        return w, b

    # -- parameter access ------------------------------------------------------

    def named_parameters(self) -> tuple[tuple[str, Tensor], ...]:
        return tuple((name, tensor) for name, tensor, _ in self._params)

    def parameters(self) -> tuple[Tensor, ...]:
        return tuple(tensor for _, tensor, _ in self._params)

    def parameter_entries(self) -> tuple[tuple[str, Tensor, str], ...]:
        """(name, tensor, group) triples; group is 'backbone' or 'heads'."""
        return tuple(self._params)

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self.parameters())

    # -- forward passes ----------------------------------------------------------

    def forward(self, x) -> PredictionChain:
        """Dispatch to the mode's forward; accepts a vector or a batch of rows."""
        if self.mode in ("lht_f2c", "lht_naive"):
            return forward_f2c(self, x)
        if self.mode == "lht_c2f":
            return forward_c2f(self, x)
        return forward_vanilla(self, x)

    def _coerce_input(self, x) -> Tensor:
        t = x if isinstance(x, Tensor) else Tensor(x)
        if t.ndim not in (1, 2) or t.shape[-1] != self.config.input_dim:
            raise ShapeMismatch(
                f"expected features of width {self.config.input_dim}, got shape {t.shape}"
            )
        return t

    def _embed(self, x: Tensor) -> Tensor:
        hidden = ops.relu(ops.affine(x, self.w1, self.b1))
        return ops.relu(ops.affine(hidden, self.w2, self.b2))

    def _slice(self, emb: Tensor, k: int) -> Tensor:
        return ops.slice_cols(emb, (k - 1) * self._slice_dim, k * self._slice_dim)

    def _transition_source(self, emb: Tensor, k: int) -> Tensor:
        return emb if self.config.transition_input == "full" else self._slice(emb, k)

    def _learned_transition(self, emb: Tensor, p: Tensor, k: int, rows: int, cols: int):
        """Emit the level-k transition matrices and push p through them."""
        raw = ops.affine(self._transition_source(emb, k), *self._transition_heads[k])
        if p.ndim == 2:
            flat = ops.batched_column_softmax(raw, rows, cols)
            return flat, ops.apply_transition(flat, p, rows, cols)
        mat = ops.column_softmax(ops.reshape(raw, (rows, cols)))
        return ops.reshape(mat, (rows * cols,)), ops.matvec(mat, p)

    def _f2c(self, x: Tensor) -> PredictionChain:
        sizes = self.hierarchy.level_sizes
        emb = self._embed(x)
        p = ops.softmax(ops.affine(self._slice(emb, 1), *self._level_heads[1]))
        probs = [p]
        records = []
        for k in range(2, self.hierarchy.num_levels + 1):
            rows, cols = sizes[k - 1], sizes[k - 2]
            if self.mode == "lht_naive":
                p = ops.apply_constant_transition(p, self._naive[k])
                records.append(TransitionRecord(k, rows, cols, self._naive_flat[k], False))
            else:
                flat, p = self._learned_transition(emb, p, k, rows, cols)
                records.append(TransitionRecord(k, rows, cols, flat, True))
            probs.append(p)
        return PredictionChain(self.mode, self.hierarchy, tuple(probs), tuple(records))

    def _c2f(self, x: Tensor) -> PredictionChain:
        sizes = self.hierarchy.level_sizes
        levels = self.hierarchy.num_levels
        emb = self._embed(x)
        p = ops.softmax(ops.affine(self._slice(emb, levels), *self._level_heads[levels]))
        probs = {levels: p}
        records = []
        for k in range(levels - 1, 0, -1):
            rows, cols = sizes[k - 1], sizes[k]
            flat, p = self._learned_transition(emb, p, k, rows, cols)
            records.append(TransitionRecord(k, rows, cols, flat, True))
            probs[k] = p
        ordered = tuple(probs[k] for k in range(1, levels + 1))
        return PredictionChain(self.mode, self.hierarchy, ordered, tuple(records))

    def _vanilla(self, x: Tensor) -> PredictionChain:
        emb = self._embed(x)
        if self.mode == "vanilla":
            p = ops.softmax(ops.affine(self._slice(emb, 1), *self._level_heads[1]))
            probs = [p]
            for k in range(2, self.hierarchy.num_levels + 1):
                p = ops.apply_constant_transition(p, self._naive[k])
                probs.append(p)
        else:  # vanilla_single: one independent head per level
            probs = [
                ops.softmax(ops.affine(self._slice(emb, k), *self._level_heads[k]))
                for k in range(1, self.hierarchy.num_levels + 1)
            ]
        return PredictionChain(self.mode, self.hierarchy, tuple(probs), ())


def forward_f2c(model: LhtModel, x) -> PredictionChain:
    """Fine-to-coarse recursion: base head at level 1, transitions upward."""
    if model.mode not in ("lht_f2c", "lht_naive"):
        raise ModeMismatch(f"forward_f2c needs mode lht_f2c or lht_naive, model is {model.mode!r}")
    return model._f2c(model._coerce_input(x))


def forward_c2f(model: LhtModel, x) -> PredictionChain:
    """Coarse-to-fine recursion: base head at level K, transitions downward."""
    if model.mode != "lht_c2f":
        raise ModeMismatch(f"forward_c2f needs mode lht_c2f, model is {model.mode!r}")
    return model._c2f(model._coerce_input(x))


def forward_vanilla(model: LhtModel, x) -> PredictionChain:
    """Baselines: one fine head with deterministic coarsening, or K heads."""
    if model.mode not in ("vanilla", "vanilla_single"):
        raise ModeMismatch(
            f"forward_vanilla needs mode vanilla or vanilla_single, model is {model.mode!r}"
        )
    return model._vanilla(model._coerce_input(x))


# -- checkpoints ---------------------------------------------------------------
#
# Flat binary layout: magic, little-endian uint32 header length, JSON header
# (mode, config, hierarchy hash, parameter names and shapes), then raw
# little-endian float64 arrays in header order.  No timestamps, so identical
# models serialize to identical bytes.

def save_checkpoint(model: LhtModel, path) -> None:
    header = {
        "format_version": _CHECKPOINT_VERSION,
        "mode": model.mode,
        "seed": model.seed,
        "config": {
            "input_dim": model.config.input_dim,
            "hidden_dim": model.config.hidden_dim,
            "embedding_dim": model.config.embedding_dim,
            "transition_input": model.config.transition_input,
        },
        "hierarchy_sha256": model.hierarchy.sha256(),
        "params": [
            {"name": name, "shape": list(tensor.shape)}
            for name, tensor in model.named_parameters()
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, tensor in model.named_parameters():
            fh.write(tensor.data.astype("<f8").tobytes())


def load_checkpoint(path, hierarchy: LabelHierarchy) -> LhtModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CHECKPOINT_MAGIC))
        if magic != _CHECKPOINT_MAGIC:
            raise CheckpointError(f"not a model checkpoint: {path}")
        (header_len,) = struct.unpack("<I", fh.read(4))
        try:
            header = json.loads(fh.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise CheckpointError(f"corrupt checkpoint header in {path}") from err
        if header.get("format_version") != _CHECKPOINT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {header.get('format_version')!r}"
            )
        want_sha = header["hierarchy_sha256"]
        have_sha = hierarchy.sha256()
        if want_sha != have_sha:
            raise HierarchyMismatch(
                f"checkpoint was written for hierarchy {want_sha[:12]}..., "
                f"but the provided hierarchy hashes to {have_sha[:12]}..."
            )
        model = LhtModel(
            hierarchy,
            header["mode"],
            ModelConfig(**header["config"]),
            seed=int(header.get("seed", 0)),
        )
        entries = model.named_parameters()
        if len(entries) != len(header["params"]):
            raise CheckpointError(
                f"checkpoint lists {len(header['params'])} parameters, model has {len(entries)}"
            )
        for (name, tensor), meta in zip(entries, header["params"]):
            if meta["name"] != name or tuple(meta["shape"]) != tensor.shape:
                raise CheckpointError(
                    f"parameter mismatch: checkpoint has {meta['name']}{tuple(meta['shape'])}, "
                    f"model expects {name}{tensor.shape}"
                )
            count = int(np.prod(meta["shape"], dtype=np.int64)) if meta["shape"] else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise CheckpointError(f"checkpoint truncated while reading {name}")
            tensor.data = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(tensor.shape)
        if fh.read(1):
            raise CheckpointError(f"trailing bytes after parameters in {path}")
    return model
