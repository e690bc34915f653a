"""Embedding file format and the planted-correlation synthetic generator.

Files are little-endian regardless of host: a 20-byte header (magic,
version, count, dim, num_classes) followed by `count` records of a u32
label and `dim` float32 features. Features are float32 on disk and float64
in memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

MAGIC = b"EMB1"
VERSION = 1
HEADER_BYTES = 20

_MEAN_SEPARATION = 0.5
_MEAN_DRAW_CAP = 1000
_TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class EmbeddingData:
    features: np.ndarray  # (count, dim) float64
    labels: np.ndarray  # (count,) int64
    num_classes: int

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("features must be a nonempty 2-d matrix")
        if labs.shape != (feats.shape[0],):
            raise ValueError("labels must match the feature count")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if np.any(labs < 0) or np.any(labs >= self.num_classes):
            raise ValueError("labels must lie below num_classes")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def count(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("label", "<u4"), ("features", "<f4", (dim,))])


def save_embeddings(path, data: EmbeddingData) -> None:
    header = (
        MAGIC
        + np.uint32(VERSION).tobytes()
        + np.array([data.count, data.dim, data.num_classes], dtype="<u4").tobytes()
    )
    records = np.empty(data.count, dtype=_record_dtype(data.dim))
    records["label"] = data.labels.astype("<u4")
    records["features"] = data.features.astype("<f4")
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(records.tobytes())


def load_embeddings(path) -> EmbeddingData:
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < HEADER_BYTES:
        raise FormatError("truncated header", offset=len(blob))
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}", offset=0)
    version = int(np.frombuffer(blob, dtype="<u4", count=1, offset=4)[0])
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    count, dim, num_classes = (
        int(v) for v in np.frombuffer(blob, dtype="<u4", count=3, offset=8)
    )
    if count < 1 or dim < 1:
        raise FormatError(f"invalid count/dim ({count}, {dim})", offset=8)
    expected = HEADER_BYTES + count * (4 + 4 * dim)
    if len(blob) != expected:
        raise FormatError(
            f"expected {expected} bytes, file has {len(blob)}",
            offset=min(len(blob), expected),
        )
    records = np.frombuffer(blob, dtype=_record_dtype(dim), count=count, offset=HEADER_BYTES)
    labels = records["label"].astype(np.int64)
    bad = np.flatnonzero(labels >= num_classes)
    if bad.size:
        raise FormatError(
            f"record {int(bad[0])} has label {int(labels[bad[0]])} >= {num_classes}",
            offset=HEADER_BYTES + int(bad[0]) * (4 + 4 * dim),
        )
    features = records["features"].astype(np.float64)
    return EmbeddingData(features=features, labels=labels, num_classes=num_classes)


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings; target class means are mixes of source class means."""

    source_classes: int
    dim: int
    source_per_class: int
    target_count: int
    noise_sigma: float
    seed: int
    mixing: np.ndarray = field(default=None)  # (2, source_classes), rows on the simplex
    target_classes: int = 2

    def __post_init__(self):
        if self.source_classes < 2 or self.dim < 1:
            raise ValueError("need at least two source classes and one dimension")
        if self.source_per_class < 1 or self.target_count < 2:
            raise ValueError("counts too small")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.target_classes != 2:
            raise ValueError("the generator plants exactly two target classes")
        mixing = self.mixing
        if mixing is None:
            mixing = np.zeros((2, self.source_classes))
            mixing[0, 0] = 1.0
            mixing[1, 1] = 1.0
        mixing = np.asarray(mixing, dtype=np.float64)
        if mixing.shape != (2, self.source_classes):
            raise ValueError(f"mixing must be (2, {self.source_classes})")
        if np.any(mixing < 0) or np.abs(mixing.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("mixing rows must be on the simplex")
        object.__setattr__(self, "mixing", mixing)

    def as_dict(self) -> dict:
        return {
            "source_classes": self.source_classes,
            "dim": self.dim,
            "source_per_class": self.source_per_class,
            "target_count": self.target_count,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "mixing": self.mixing.tolist(),
            "target_classes": self.target_classes,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SyntheticSpec":
        mixing = payload.get("mixing")
        return cls(
            source_classes=int(payload["source_classes"]),
            dim=int(payload["dim"]),
            source_per_class=int(payload["source_per_class"]),
            target_count=int(payload["target_count"]),
            noise_sigma=float(payload["noise_sigma"]),
            seed=int(payload["seed"]),
            mixing=None if mixing is None else np.asarray(mixing, dtype=np.float64),
        )

    @classmethod
    def from_json(cls, path) -> "SyntheticSpec":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def _draw_means(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    means = []
    for _ in range(spec.source_classes):
        for _ in range(_MEAN_DRAW_CAP):
            candidate = rng.normal(size=spec.dim)
            candidate /= np.linalg.norm(candidate)
            if all(np.linalg.norm(candidate - m) >= _MEAN_SEPARATION for m in means):
                means.append(candidate)
                break
        else:
            raise RuntimeError(
                "could not place well-separated class means; use a larger dimension"
            )
    return np.stack(means)


def generate(spec: SyntheticSpec) -> tuple[EmbeddingData, EmbeddingData, EmbeddingData]:
    """Source bank plus a stratified 80/20 target train/test split.

    Source class k is an isotropic Gaussian at a unit-norm mean (pairwise
    separation enforced by rejection); target class l is a Gaussian at its
    mixing-weighted combination of source means. Deterministic per seed.
    """
    rng = np.random.default_rng(spec.seed)
    means = _draw_means(spec, rng)

    source_labels = np.repeat(np.arange(spec.source_classes), spec.source_per_class)
    source_feats = means[source_labels] + spec.noise_sigma * rng.normal(
        size=(source_labels.size, spec.dim)
    )
    source = EmbeddingData(source_feats, source_labels, spec.source_classes)

    per_class = [
        spec.target_count // 2 + (1 if l < spec.target_count % 2 else 0) for l in range(2)
    ]
    train_parts, test_parts = [], []
    for cls, cls_count in enumerate(per_class):
        center = spec.mixing[cls] @ means
        samples = center + spec.noise_sigma * rng.normal(size=(cls_count, spec.dim))
        cut = int(round(_TRAIN_FRACTION * cls_count))
        train_parts.append((samples[:cut], cls))
        test_parts.append((samples[cut:], cls))

    # Records are written class-interleaved, the layout a shuffled loader
    # would produce; label-sorted files would feed the batch-coupled
    # inference path single-class chunks, which carry no relative signal.
    def interleave(parts):
        feats, labels = [], []
        longest = max(block.shape[0] for block, _ in parts)
        for idx in range(longest):
            for block, cls in parts:
                if idx < block.shape[0]:
                    feats.append(block[idx])
                    labels.append(cls)
        return EmbeddingData(np.stack(feats), np.asarray(labels, dtype=np.int64), 2)

    return source, interleave(train_parts), interleave(test_parts)
