"""Bi-level thresholding of demosaiced images by k-means++ clustering.

Pixels are treated as RGB triples; all-zero triples (the manually masked
background) are excluded from clustering and labeled 0 in the output. The
two cluster labels are canonicalized by centroid luminance so that repeated
runs cannot return mutually inverted maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mosaic import RgbQuarterImage

LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])


@dataclass(frozen=True, eq=False)
class KMeansResult:
    centroids: np.ndarray        # (k, d)
    labels: np.ndarray           # (n,) intp
    inertia: float               # final total within-cluster squared distance
    n_iter: int
    inertia_history: tuple       # inertia after each assignment step


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Quarter-resolution label image: 0 excluded, 1 dark class, 2 bright class."""

    labels: np.ndarray          # (h, w) uint8 in {0, 1, 2}
    centroids: np.ndarray       # (2, 3) float64, canonical order (dark first)
    seed: int

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.uint8)
        cent = np.asarray(self.centroids, dtype=np.float64)
        if lab.ndim != 2:
            raise ValueError("label map must be 2-D")
        if not np.isin(lab, (0, 1, 2)).all():
            raise ValueError("labels must be 0, 1, or 2")
        if cent.shape != (2, 3):
            raise ValueError("centroids must be (2, 3)")
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "centroids", cent)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def kmeans_pp_init(points: np.ndarray, k: int, seed=0) -> np.ndarray:
    """Choose k initial centroids by distance-proportional seeding.

    The first centroid is drawn uniformly from the points; each subsequent
    one is drawn with probability proportional to the squared Euclidean
    distance to its nearest already chosen centroid. Deterministic for a
    given seed. Requires at least k distinct points.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be (n, d)")
    n = pts.shape[0]
    if np.unique(pts, axis=0).shape[0] < k:
        raise ValueError(f"k-means++ needs at least {k} distinct points")
    rng = _as_rng(seed)
    centroids = np.empty((k, pts.shape[1]))
    centroids[0] = pts[rng.integers(n)]
    d2 = ((pts - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        probs = d2 / d2.sum()
        centroids[i] = pts[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((pts - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(points, k: int = 2, seed=0, max_iter: int = 100, tol: float = 1e-4) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding and squared-Euclidean assignment.

    Stops when the largest centroid movement drops to `tol` or after
    `max_iter` iterations. An empty cluster is reseeded at the point
    farthest from its assigned centroid, which keeps the per-iteration
    inertia non-increasing. Degenerate inputs with fewer than k distinct
    points skip the strict seeding and start all centroids on the data.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty (n, d) array")
    n = pts.shape[0]
    rng = _as_rng(seed)
    if np.unique(pts, axis=0).shape[0] >= k:
        centroids = kmeans_pp_init(pts, k, rng)
    else:
        centroids = pts[rng.integers(n, size=k)].astype(np.float64).copy()

    history = []
    labels = np.zeros(n, dtype=np.intp)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(n), labels]
        history.append(float(point_d2.sum()))

        new_centroids = centroids.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new_centroids[c] = pts[members].mean(axis=0)
        # reseed empties at the worst-served point, one at a time
        reseed_d2 = point_d2.copy()
        for c in range(k):
            if not (labels == c).any():
                far = int(reseed_d2.argmax())
                new_centroids[c] = pts[far]
                reseed_d2[far] = -1.0

        movement = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if movement <= tol:
            break

    d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    history.append(inertia)
    return KMeansResult(centroids, labels, inertia, n_iter, tuple(history))


def binarize(img, seed: int = 0, *, max_iter: int = 100, tol: float = 1e-4) -> LabelMap:
    """Two-class threshold of a demosaiced image by k-means++ on RGB triples.

    All-zero pixels (masked background) are excluded from clustering and
    labeled 0. Of the two clusters, the one with the lower-luminance centroid
    becomes label 1 and the other label 2, so the labeling is stable under
    centroid order.
    """
    data = img.data if isinstance(img, RgbQuarterImage) else np.asarray(img, dtype=np.float64)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ValueError("expected an (h, w, 3) image")
    h, w = data.shape[:2]
    triples = data.reshape(-1, 3)
    nonzero = ~np.all(triples == 0.0, axis=1)
    live = triples[nonzero]
    if np.unique(live, axis=0).shape[0] < 2:
        raise ValueError("need at least 2 distinct nonzero pixels to threshold")

    result = kmeans(live, k=2, seed=seed, max_iter=max_iter, tol=tol)
    luma = result.centroids @ LUMA_WEIGHTS
    order = np.lexsort((result.centroids[:, 2], result.centroids[:, 1], result.centroids[:, 0], luma))
    dark = order[0]

    labels = np.zeros(h * w, dtype=np.uint8)
    labels[nonzero] = np.where(result.labels == dark, 1, 2)
    centroids = result.centroids[order]
    return LabelMap(labels.reshape(h, w), centroids, int(seed) if not isinstance(seed, np.random.Generator) else -1)


def labels_to_image(label_map: LabelMap) -> np.ndarray:
    """Render labels {0, 1, 2} as an 8-bit image {0, 128, 255}."""
    lut = np.array([0, 128, 255], dtype=np.uint8)
    return lut[label_map.labels]


def disagreement(a: LabelMap, b: LabelMap) -> float:
    """Fraction of commonly labeled (nonzero) pixels on which two maps differ."""
    la, lb = a.labels, b.labels
    if la.shape != lb.shape:
        raise ValueError("label maps must share dimensions")
    labeled = (la > 0) & (lb > 0)
    if not labeled.any():
        return 0.0
    return float(np.count_nonzero(la[labeled] != lb[labeled]) / labeled.sum())
