"""LBG vector quantisation signatures and DTW similarity classification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySequence, InsufficientData, ShapeMismatch

SPLIT_EPS = 0.01
REL_TOL = 1e-4
MAX_LLOYD_ITERS = 100
DEFAULT_CODEBOOK_SIZE = 32
ORDERING = "lex"

_CHUNK = 4096


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray  # (K, dim), lexicographically sorted
    distortion: float
    history: tuple = field(default=(), repr=False)
    ordering: str = ORDERING

    @property
    def size(self) -> int:
        return self.centroids.shape[0]


def _sq_dists_fast(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2.0 * (x @ c.T) + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _nearest(x: np.ndarray, c: np.ndarray):
    d = _sq_dists_fast(x, c)
    idx = d.argmin(1)
    return idx, d[np.arange(len(x)), idx]


def _distinct_rows(x: np.ndarray, at_least: int) -> bool:
    if at_least <= 1:
        return len(x) >= 1
    return len(np.unique(x, axis=0)) >= at_least


def _update(x: np.ndarray, idx: np.ndarray, k: int) -> np.ndarray:
    """Cell means; an empty cell is re-seeded from the farthest member of the largest cell."""
    counts = np.bincount(idx, minlength=k)
    sums = np.stack([np.bincount(idx, weights=col, minlength=k) for col in x.T], axis=1)
    cent = np.zeros((k, x.shape[1]))
    full = counts > 0
    cent[full] = sums[full] / counts[full, None]
    empty = np.flatnonzero(~full)
    if empty.size:
        big = int(np.argmax(counts))
        members = np.flatnonzero(idx == big)
        spread = ((x[members] - cent[big]) ** 2).sum(1)
        chosen = []
        for m in members[np.argsort(-spread, kind="stable")]:
            if not any(np.array_equal(x[m], x[c]) for c in chosen):
                chosen.append(m)
            if len(chosen) == empty.size:
                break
        for e, m in zip(empty, chosen):
            cent[e] = x[m]
    return cent


def lbg_train(features, K: int, eps: float = SPLIT_EPS, rel_tol: float = REL_TOL,
              max_iters: int = MAX_LLOYD_ITERS) -> Codebook:
    """Binary-splitting LBG codebook of size ``K`` (a power of two).

    Every Lloyd step records the mean squared quantisation error of the
    current codebook; after a split the first partition refines the previous
    one, so the recorded history never increases.
    """
    x = np.asarray(getattr(features, "vectors", features), dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch("features must be a 2-D (frames x dim) array")
    if K < 1 or K & (K - 1):
        raise ValueError(f"codebook size must be a power of two, got {K}")
    if not _distinct_rows(x, K):
        raise InsufficientData(f"need at least {K} distinct vectors, got fewer")

    cent = x.mean(0, keepdims=True)
    idx, dmin = _nearest(x, cent)
    history = [float(dmin.mean())]
    while cent.shape[0] < K:
        k = cent.shape[0]
        children = np.concatenate([cent * (1.0 + eps), cent * (1.0 - eps)])
        # constrained first assignment: each point picks the nearer child of its own parent
        d_plus = ((x - children[idx]) ** 2).sum(1)
        d_minus = ((x - children[idx + k]) ** 2).sum(1)
        child = np.where(d_minus < d_plus, idx + k, idx)
        cent = _update(x, child, 2 * k)
        idx, dmin = _nearest(x, cent)
        history.append(float(dmin.mean()))
        for _ in range(max_iters):
            prev = history[-1]
            if prev == 0.0:
                break
            new_cent = _update(x, idx, cent.shape[0])
            new_idx, new_dmin = _nearest(x, new_cent)
            cur = float(new_dmin.mean())
            if cur > prev:  # rounding-level wobble at a fixed point
                break
            cent, idx, dmin = new_cent, new_idx, new_dmin
            history.append(cur)
            if (prev - cur) / prev < rel_tol:
                break

    order = np.lexsort(cent.T[::-1])
    return Codebook(cent[order], history[-1], tuple(history))


def quantize(features, cb: Codebook):
    """Nearest-centroid indices (lowest index on ties) and mean squared distortion."""
    x = np.asarray(getattr(features, "vectors", features), dtype=np.float64)
    c = cb.centroids
    if x.ndim != 2 or x.shape[1] != c.shape[1]:
        raise ShapeMismatch(f"features of shape {x.shape} vs centroids of dim {c.shape[1]}")
    idx = np.empty(len(x), dtype=np.int64)
    best = np.empty(len(x))
    for s in range(0, len(x), _CHUNK):
        d = ((x[s : s + _CHUNK, None, :] - c[None, :, :]) ** 2).sum(-1)
        idx[s : s + _CHUNK] = d.argmin(1)
        best[s : s + _CHUNK] = d.min(1)
    return idx, float(best.mean()) if len(x) else 0.0


def dtw_distance(a, b) -> float:
    """Path-length-normalised DTW cost with Euclidean local distance.

    Steps are (1,0), (0,1), (1,1); both endpoints are anchored. Among
    minimum-cost paths the longest one is used for normalisation, which
    keeps the result symmetric in its arguments.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if len(a) == 0 or len(b) == 0:
        raise EmptySequence("DTW needs two non-empty sequences")
    if a.shape[1] != b.shape[1]:
        raise ShapeMismatch(f"dimension mismatch {a.shape[1]} vs {b.shape[1]}")

    local = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    n, m = local.shape
    cost = np.full((n + 1, m + 1), np.inf)
    length = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best_c, best_l = cost[i - 1, j - 1], length[i - 1, j - 1]
            for c, l in ((cost[i - 1, j], length[i - 1, j]), (cost[i, j - 1], length[i, j - 1])):
                if c < best_c or (c == best_c and l > best_l):
                    best_c, best_l = c, l
            cost[i, j] = best_c + local[i - 1, j - 1]
            length[i, j] = best_l + 1
    return float(cost[n, m] / length[n, m])


def rank_by_cost(scores: dict) -> list:
    """Languages ascending by cost, ties broken by name."""
    return sorted(scores, key=lambda lang: (scores[lang], lang))


def classify_vq_dtw(test, language_books: dict, K_u: int = DEFAULT_CODEBOOK_SIZE) -> list:
    if not language_books:
        raise ValueError("no language codebooks supplied")
    own = lbg_train(test, K_u)
    scores = {lang: dtw_distance(own.centroids, cb.centroids) for lang, cb in language_books.items()}
    return rank_by_cost(scores)
