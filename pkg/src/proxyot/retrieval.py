"""Description retrieval and text-proxy construction.

A knowledge base pairs each class with a pool of description texts and
their precomputed unit-norm embeddings. Retrieval scores every description
of a class against the mean image embedding of the dataset, keeps the top
k, and averages the survivors into one unit proxy vector per class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, UsageError
from .numerics import as_matrix, as_vector, l2_normalize_rows

__all__ = [
    "ClassRecord",
    "KnowledgeBase",
    "RetrievalResult",
    "TextProxies",
    "mean_image_feature",
    "score_descriptions",
    "top_k",
    "retrieve",
    "build_text_proxies",
    "description_proxies",
    "name_proxies",
]

PROVENANCES = ("class_names", "description_mean", "retrieved_mean")


@dataclass(frozen=True)
class ClassRecord:
    """One class: its name, description texts, and their embedding rows."""

    name: str
    descriptions: tuple[str, ...]
    embeddings: np.ndarray
    name_embedding: np.ndarray | None = None

    def __post_init__(self):
        emb = as_matrix(self.embeddings, f"embeddings of class {self.name!r}")
        if len(self.descriptions) == 0:
            raise DataError(f"class {self.name!r} has no descriptions")
        if emb.shape[0] != len(self.descriptions):
            raise DataError(
                f"class {self.name!r}: {len(self.descriptions)} descriptions "
                f"but {emb.shape[0]} embedding rows"
            )
        norms = np.linalg.norm(emb, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            row = int(np.flatnonzero(np.abs(norms - 1.0) > 1e-6)[0])
            raise DataError(
                f"class {self.name!r}: embedding row {row} has norm "
                f"{norms[row]:.9f}, expected 1"
            )
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "descriptions", tuple(self.descriptions))
        if self.name_embedding is not None:
            ne = as_vector(self.name_embedding, f"name embedding of {self.name!r}")
            if ne.size != emb.shape[1]:
                raise DataError(
                    f"class {self.name!r}: name embedding has dim {ne.size}, "
                    f"expected {emb.shape[1]}"
                )
            object.__setattr__(self, "name_embedding", ne)

    @property
    def n_descriptions(self) -> int:
        return len(self.descriptions)


@dataclass(frozen=True)
class KnowledgeBase:
    """Ordered class records sharing one embedding dimension."""

    classes: tuple[ClassRecord, ...]
    dim: int

    def __post_init__(self):
        if len(self.classes) == 0:
            raise DataError("knowledge base has no classes")
        seen: set[str] = set()
        for rec in self.classes:
            if rec.name in seen:
                raise DataError(f"duplicate class name {rec.name!r} in knowledge base")
            seen.add(rec.name)
            if rec.embeddings.shape[1] != self.dim:
                raise DataError(
                    f"class {rec.name!r} embeddings have dim "
                    f"{rec.embeddings.shape[1]}, expected {self.dim}"
                )
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def names(self) -> list[str]:
        return [rec.name for rec in self.classes]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def name_embedding_matrix(self) -> np.ndarray:
        """Stack per-class name embeddings; error if any class lacks one."""
        missing = [rec.name for rec in self.classes if rec.name_embedding is None]
        if missing:
            raise DataError(
                f"knowledge base has no name embeddings for: {', '.join(missing)}"
            )
        return np.stack([rec.name_embedding for rec in self.classes])


@dataclass(frozen=True)
class RetrievalResult:
    """Per class: indices of the selected descriptions and their scores.

    Scores are sorted non-increasing; indices are distinct positions into the
    class's description list.
    """

    selected: tuple[np.ndarray, ...]
    scores: tuple[np.ndarray, ...]
    k: int

    def __post_init__(self):
        if len(self.selected) != len(self.scores):
            raise UsageError("selection and score lists differ in class count")
        for j, (idx, s) in enumerate(zip(self.selected, self.scores)):
            if len(idx) != self.k or len(s) != self.k:
                raise UsageError(f"class {j}: selection size differs from k={self.k}")
            if len(set(int(i) for i in idx)) != len(idx):
                raise UsageError(f"class {j}: selected indices are not distinct")
            if np.any(np.diff(s) > 0):
                raise UsageError(f"class {j}: scores are not sorted non-increasing")


@dataclass(frozen=True)
class TextProxies:
    """K x d unit-row proxy matrix plus how it was built."""

    w: np.ndarray
    provenance: str

    def __post_init__(self):
        w = as_matrix(self.w, "text proxies")
        if self.provenance not in PROVENANCES:
            raise UsageError(f"unknown proxy provenance {self.provenance!r}")
        norms = np.linalg.norm(w, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            row = int(np.flatnonzero(np.abs(norms - 1.0) > 1e-9)[0])
            raise DataError(f"proxy row {row} has norm {norms[row]!r}, expected 1")
        object.__setattr__(self, "w", w)


def mean_image_feature(images) -> np.ndarray:
    """Arithmetic mean of the image embedding rows, deliberately unnormalized."""
    mat = as_matrix(images, "image embeddings")
    if mat.shape[0] == 0:
        raise UsageError("cannot take the mean image feature of an empty dataset")
    return mat.mean(axis=0)


def score_descriptions(mean_feat, kb: KnowledgeBase, class_index: int) -> np.ndarray:
    """Cosine of the mean image feature against every description of one class."""
    feat = as_vector(mean_feat, "mean image feature")
    if not 0 <= class_index < kb.n_classes:
        raise UsageError(f"class index {class_index} out of range [0, {kb.n_classes})")
    if np.linalg.norm(feat) == 0.0:
        raise DataError(
            "mean image feature is the zero vector; scores are undefined"
        )
    emb = kb.classes[class_index].embeddings
    row_norms = np.linalg.norm(emb, axis=1)
    return (emb @ feat) / (np.linalg.norm(feat) * row_norms)


def top_k(scores, k: int) -> np.ndarray:
    """Indices of the k largest scores, best first; ties keep the lower index."""
    s = as_vector(scores, "scores")
    if k < 1 or k > s.size:
        raise UsageError(f"k must be in [1, {s.size}], got {k}")
    return np.argsort(-s, kind="stable")[:k]


def retrieve(images, kb: KnowledgeBase, k: int) -> RetrievalResult:
    """Score and select the top-k descriptions for every class."""
    feat = mean_image_feature(images)
    selected = []
    score_lists = []
    for j, rec in enumerate(kb.classes):
        if k > rec.n_descriptions:
            raise UsageError(
                f"k={k} exceeds the {rec.n_descriptions} descriptions "
                f"of class {rec.name!r}"
            )
        scores = score_descriptions(feat, kb, j)
        idx = top_k(scores, k)
        selected.append(idx)
        score_lists.append(scores[idx])
    return RetrievalResult(tuple(selected), tuple(score_lists), k)


def build_text_proxies(kb: KnowledgeBase, selection: RetrievalResult) -> TextProxies:
    """Average each class's selected description embeddings into a unit proxy row."""
    if len(selection.selected) != kb.n_classes:
        raise UsageError(
            f"selection covers {len(selection.selected)} classes, "
            f"knowledge base has {kb.n_classes}"
        )
    rows = [
        rec.embeddings[idx].mean(axis=0)
        for rec, idx in zip(kb.classes, selection.selected)
    ]
    return TextProxies(l2_normalize_rows(np.stack(rows)), "retrieved_mean")


def description_proxies(kb: KnowledgeBase) -> TextProxies:
    """Average all descriptions per class (the no-retrieval baseline proxies)."""
    rows = [rec.embeddings.mean(axis=0) for rec in kb.classes]
    return TextProxies(l2_normalize_rows(np.stack(rows)), "description_mean")


def name_proxies(names_emb) -> TextProxies:
    """Use class-name embeddings directly as proxies (the vanilla baseline)."""
    mat = as_matrix(names_emb, "name embeddings")
    if mat.shape[0] < 2:
        raise UsageError(f"need at least 2 class rows, got {mat.shape[0]}")
    return TextProxies(mat, "class_names")
