"""The six proxy-sampling methods and their shared cardinality rule.

Every method returns a ProxyIndex whose size is pinned exactly: the total
quota is floor(r * n), and class-conditional quotas come from floor plus
largest-remainder correction. Ties break toward the lower class id or the
lower sample index throughout, so results are platform independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import LabeledDataset, ProxyIndex

SCORE_ORIGINS = ("centroid_distance", "reconstruction_loss", "classifier_loss")


@dataclass(frozen=True)
class Quota:
    """Exact selection counts: overall and, for stratified methods, per class."""

    total: int
    per_class: tuple[int, ...] | None = None


def global_quota(n: int, r: float) -> Quota:
    _check_ratio(r)
    return Quota(int(np.floor(r * n)))


def class_quota(class_sizes, r: float) -> Quota:
    """Per-class quotas via floor + largest remainder, summing to floor(r * n).

    Remainder ties go to the lower class id.
    """
    _check_ratio(r)
    sizes = np.asarray(class_sizes, dtype=np.int64)
    total = int(np.floor(r * sizes.sum()))
    exact = r * sizes
    floors = np.floor(exact).astype(np.int64)
    short = total - int(floors.sum())
    remainders = exact - floors
    # stable sort on -remainder keeps lower class ids first among ties
    order = np.argsort(-remainders, kind="stable")
    per_class = floors.copy()
    for j in order[:short]:
        per_class[j] += 1
    return Quota(total, tuple(int(q) for q in per_class))


def _check_ratio(r: float) -> None:
    if not 0 < r <= 1:
        raise ValueError(f"ratio must lie in (0, 1], got {r}")


@dataclass(frozen=True)
class ScoreVector:
    """Per-sample scalar scores used by argmin/argmax selection."""

    scores: np.ndarray
    origin: str

    def __post_init__(self):
        if self.origin not in SCORE_ORIGINS:
            raise ValueError(f"unknown score origin {self.origin!r}")
        bad = np.flatnonzero(~np.isfinite(self.scores))
        if bad.size:
            raise ValueError(f"non-finite score at index {int(bad[0])}")


@dataclass(frozen=True)
class KMeansModel:
    """Fitted centroids plus the per-sample assignment and total inertia."""

    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _partial_shuffle_pick(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """First k entries of a Fisher-Yates shuffle of range(n)."""
    pool = np.arange(n)
    for i in range(k):
        j = int(rng.integers(i, n))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def sample_random(ds: LabeledDataset, r: float, seed: int) -> ProxyIndex:
    """Uniform sampling without replacement (RS)."""
    quota = global_quota(len(ds), r)
    rng = np.random.default_rng(seed)
    picked = _partial_shuffle_pick(len(ds), quota.total, rng)
    return ProxyIndex(tuple(sorted(int(i) for i in picked)), r, "rs", seed,
                      ds.content_hash())


def sample_cc_random(ds: LabeledDataset, r: float, seed: int) -> ProxyIndex:
    """Class-conditional uniform sampling (CC-RS): equal draw within each class."""
    if any(not idx for idx in ds.class_index):
        raise ValueError("every class must be non-empty")
    quota = class_quota([len(c) for c in ds.class_index], r)
    rng = np.random.default_rng(seed)
    picked: list[int] = []
    for cls, members in enumerate(ds.class_index):
        members = np.asarray(members)
        take = _partial_shuffle_pick(len(members), quota.per_class[cls], rng)
        picked.extend(int(i) for i in members[take])
    return ProxyIndex(tuple(sorted(picked)), r, "cc-rs", seed, ds.content_hash())


def kmeans_fit(ds_or_points, k: int, seed: int, max_iters: int = 300,
               tol: float = 1e-6) -> KMeansModel:
    """Seeded k-means++ initialization followed by Lloyd iterations.

    Distances are Euclidean on flattened pixels. Stops when the relative
    centroid shift drops below tol. An emptied cluster is re-seeded at the
    point farthest from its current centroid.
    """
    pts = (ds_or_points.flat_pixels()
           if isinstance(ds_or_points, LabeledDataset) else
           np.asarray(ds_or_points, dtype=np.float64))
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(pts, k, rng)
    for _ in range(max_iters):
        d2 = _sq_dists(pts, centroids)
        assign = np.argmin(d2, axis=1)
        new = np.empty_like(centroids)
        for j in range(k):
            members = pts[assign == j]
            if len(members) == 0:
                # re-seed at the globally farthest point from its own centroid
                far = int(np.argmax(d2[np.arange(n), assign]))
                new[j] = pts[far]
            else:
                new[j] = members.mean(axis=0)
        shift = np.linalg.norm(new - centroids)
        scale = np.linalg.norm(centroids) + 1e-12
        centroids = new
        if shift / scale < tol:
            break
    d2 = _sq_dists(pts, centroids)
    assign = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), assign].sum())
    return KMeansModel(centroids, assign, inertia)


def _kmeans_pp_init(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = pts.shape[0]
    centroids = np.empty((k, pts.shape[1]))
    centroids[0] = pts[int(rng.integers(n))]
    closest = np.sum((pts - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centroids[j] = pts[int(rng.integers(n))]
            continue
        probs = closest / total
        centroids[j] = pts[int(rng.choice(n, p=probs))]
        closest = np.minimum(closest, np.sum((pts - centroids[j]) ** 2, axis=1))
    return centroids


def _sq_dists(pts: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return np.sum((pts[:, None, :] - centroids[None, :, :]) ** 2, axis=2)


def centroid_distance_scores(ds: LabeledDataset, model: KMeansModel) -> ScoreVector:
    """Distance from each sample to its nearest fitted centroid."""
    d2 = _sq_dists(ds.flat_pixels(), model.centroids)
    return ScoreVector(np.sqrt(d2.min(axis=1)), "centroid_distance")


def sample_km_or(ds: LabeledDataset, r: float, k: int | None = None,
                 seed: int = 0, max_iters: int = 300,
                 tol: float = 1e-6) -> ProxyIndex:
    """K-means outlier removal (KM-OR): keep samples closest to their centroid."""
    _check_ratio(r)
    if k is None:
        k = ds.n_classes
    model = kmeans_fit(ds, k, seed, max_iters, tol)
    scores = centroid_distance_scores(ds, model)
    keep = _lowest_k(scores.scores, global_quota(len(ds), r).total)
    return ProxyIndex(keep, r, "km-or", seed, ds.content_hash())


def sample_cc_or(ds: LabeledDataset, r: float) -> ProxyIndex:
    """Class-conditional outlier removal (CC-OR): per class, keep the quota of
    samples closest to the class mean, then take the union."""
    _check_ratio(r)
    if any(not idx for idx in ds.class_index):
        raise ValueError("every class must be non-empty")
    quota = class_quota([len(c) for c in ds.class_index], r)
    flat = ds.flat_pixels()
    picked: list[int] = []
    for cls, members in enumerate(ds.class_index):
        members = np.asarray(members)
        mu = flat[members].mean(axis=0)
        dist = np.linalg.norm(flat[members] - mu, axis=1)
        keep_local = _lowest_k(dist, quota.per_class[cls])
        picked.extend(int(members[i]) for i in keep_local)
    return ProxyIndex(tuple(sorted(picked)), r, "cc-or", 0, ds.content_hash())


def sample_by_score(ds: LabeledDataset, scores: ScoreVector, r: float,
                    direction: str = "keep_lowest",
                    method: str | None = None, seed: int = 0) -> ProxyIndex:
    """Keep the quota of lowest- (or highest-) scoring samples."""
    _check_ratio(r)
    if len(scores.scores) != len(ds):
        raise ValueError(
            f"score length {len(scores.scores)} != dataset size {len(ds)}")
    if direction not in ("keep_lowest", "keep_highest"):
        raise ValueError(f"unknown direction {direction!r}")
    vals = scores.scores if direction == "keep_lowest" else -scores.scores
    keep = _lowest_k(vals, global_quota(len(ds), r).total)
    tag = method or {"reconstruction_loss": "ae",
                     "classifier_loss": "tl"}.get(scores.origin, "score")
    return ProxyIndex(keep, r, tag, seed, ds.content_hash())


def _lowest_k(values: np.ndarray, k: int) -> tuple[int, ...]:
    """Indices of the k smallest values; ties resolved toward the lower index."""
    if k == 0:
        return ()
    # lexsort is stable: among equal values the lower index comes first
    order = np.lexsort((np.arange(len(values)), values))
    return tuple(sorted(int(i) for i in order[:k]))
