"""Non-differentiable clustering primitives.

Everything here is a pure function of its inputs and seed: seeded
k-means++ with Lloyd refinement and empty-cluster repair, cosine
similarity, the per-view mean silhouette coefficient, and exact
maximum-weight bipartite matching between equal-sized centroid sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError


# ---------------------------------------------------------------------------
# cosine similarity


def cosine(a, b) -> float:
    """Cosine similarity of two vectors; zero vectors have similarity 0."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"cosine expects equal-length vectors, got {a.shape} and {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine of rows of `a` against rows of `b`; zero rows give 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    an = a / np.where(na > 0, na, 1.0)
    bn = b / np.where(nb > 0, nb, 1.0)
    return an @ bn.T


# ---------------------------------------------------------------------------
# k-means


@dataclass
class Assignment:
    """Cluster labels over one sample set, plus the final inertia."""

    labels: np.ndarray
    k: int
    inertia: float
    inertia_history: list[float] = field(default_factory=list, repr=False)


def _sqdist(z: np.ndarray, centers: np.ndarray) -> np.ndarray:
    zz = np.einsum("ij,ij->i", z, z)[:, None]
    cc = np.einsum("ij,ij->i", centers, centers)[None, :]
    d2 = zz + cc - 2.0 * (z @ centers.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeanspp_init(z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = z.shape[0]
    centers = np.empty((k, z.shape[1]))
    chosen: set[int] = set()
    idx = int(rng.integers(n))
    centers[0] = z[idx]
    chosen.add(idx)
    d2 = _sqdist(z, centers[0:1])[:, 0]
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # remaining points coincide with chosen centers; take lowest free index
            idx = next(i for i in range(n) if i not in chosen)
        centers[c] = z[idx]
        chosen.add(idx)
        np.minimum(d2, _sqdist(z, centers[c : c + 1])[:, 0], out=d2)
    return centers


def _assign_with_repair(z: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, float]:
    """Nearest-centroid labels; each empty cluster seizes the point farthest
    from its own centroid (ascending cluster index, each point seized once)."""
    k = centers.shape[0]
    d2 = _sqdist(z, centers)
    labels = np.argmin(d2, axis=1)
    counts = np.bincount(labels, minlength=k)
    empties = np.flatnonzero(counts == 0)
    if empties.size:
        own = d2[np.arange(z.shape[0]), labels].copy()
        for j in empties:
            p = int(np.argmax(own))
            labels[p] = j
            own[p] = -1.0
    inertia = float(d2[np.arange(z.shape[0]), labels].sum())
    return labels, inertia


def _lloyd(
    z: np.ndarray,
    centers: np.ndarray,
    max_iter: int,
    tol: float,
) -> tuple[Assignment, np.ndarray]:
    k = centers.shape[0]
    history: list[float] = []
    labels, inertia = _assign_with_repair(z, centers)
    history.append(inertia)
    for _ in range(max_iter):
        new_centers = np.zeros_like(centers)
        np.add.at(new_centers, labels, z)
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        new_centers /= counts[:, None]
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        labels, inertia = _assign_with_repair(z, centers)
        history.append(inertia)
        if shift < tol:
            break
    return Assignment(labels=labels, k=k, inertia=inertia, inertia_history=history), centers


def kmeans(
    z: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
    init_centroids: np.ndarray | None = None,
    restarts: int = 1,
) -> tuple[Assignment, np.ndarray]:
    """Seeded k-means++ followed by Lloyd iterations.

    `init_centroids` warm-starts Lloyd and skips the seeded init (and any
    restarts). With `restarts` > 1 the run with the lowest inertia wins;
    ties keep the earliest restart.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeError("kmeans expects a 2-D sample matrix")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if z.shape[0] < k:
        raise ValueError(f"kmeans needs at least k={k} rows, got {z.shape[0]}")
    if init_centroids is not None:
        init = np.asarray(init_centroids, dtype=np.float64)
        if init.shape != (k, z.shape[1]):
            raise ShapeError(f"warm-start centroids must be {(k, z.shape[1])}, got {init.shape}")
        return _lloyd(z, init.copy(), max_iter, tol)
    best: tuple[Assignment, np.ndarray] | None = None
    for r in range(max(1, int(restarts))):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), r]))
        assignment, centers = _lloyd(z, _kmeanspp_init(z, k, rng), max_iter, tol)
        if best is None or assignment.inertia < best[0].inertia:
            best = (assignment, centers)
    return best


# ---------------------------------------------------------------------------
# silhouette


def _pairwise_distances(z: np.ndarray) -> np.ndarray:
    """Exact row-block pairwise Euclidean distances (no Gram cancellation)."""
    n, d = z.shape
    out = np.empty((n, n))
    block = max(1, (1 << 22) // max(1, n * d))
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = z[start:stop, None, :] - z[None, :, :]
        out[start:stop] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def silhouette_view(z: np.ndarray, assignment: Assignment) -> float:
    """Mean silhouette coefficient over all samples, Euclidean distance.

    Per sample: a = mean distance to own cluster (excluding itself),
    b = smallest mean distance to any other non-empty cluster,
    score = (b - a) / max(a, b) with 0/0 -> 0. Samples in singleton
    clusters score 0.
    """
    z = np.asarray(z, dtype=np.float64)
    labels = np.asarray(assignment.labels)
    k = int(assignment.k)
    if k < 2:
        raise ValueError(f"silhouette needs k >= 2, got {k}")
    n = z.shape[0]
    if labels.shape[0] != n:
        raise ShapeError("labels length must match sample count")
    d = _pairwise_distances(z)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    counts = onehot.sum(axis=0)
    cluster_dist_sums = d @ onehot  # (n, k) sum of distances to each cluster
    own = labels
    own_counts = counts[own]
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(own_counts > 1, cluster_dist_sums[np.arange(n), own] / np.maximum(own_counts - 1, 1), 0.0)
        mean_to_cluster = cluster_dist_sums / np.where(counts > 0, counts, 1.0)
    mean_to_cluster[:, counts == 0] = np.inf
    mean_to_cluster[np.arange(n), own] = np.inf
    b = mean_to_cluster.min(axis=1)
    b = np.where(np.isfinite(b), b, 0.0)
    denom = np.maximum(a, b)
    sil = np.zeros(n)
    ok = (denom > 0) & (own_counts > 1)
    sil[ok] = (b[ok] - a[ok]) / denom[ok]
    return float(sil.mean())


# ---------------------------------------------------------------------------
# maximum-weight bipartite matching


def _lap_min(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact minimum-cost assignment via shortest augmenting paths with
    potentials. Returns (col_to_row, row_potential, col_potential); the
    potentials satisfy u[i] + v[j] <= cost[i, j] with equality on matched
    edges (up to float rounding)."""
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match_row = np.full(n + 1, -1, dtype=np.int64)  # column -> row; index n is virtual
    for i in range(n):
        match_row[n] = i
        j0 = n
        minv = np.full(n + 1, np.inf)
        way = np.full(n + 1, n, dtype=np.int64)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match_row[j0]
            cur = cost[i0, :] - u[i0] - v[:n]
            improve = (cur < minv[:n]) & ~used[:n]
            minv[:n][improve] = cur[improve]
            way[:n][improve] = j0
            masked = np.where(used[:n], np.inf, minv[:n])
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            used_cols = np.flatnonzero(used)
            u[match_row[used_cols]] += delta
            v[used_cols] -= delta
            minv[~used[: n + 1]] -= delta
            j0 = j1
            if match_row[j0] == -1:
                break
        # unwind augmenting path
        while j0 != n:
            j1 = int(way[j0])
            match_row[j0] = match_row[j1]
            j0 = j1
    return match_row[:n].copy(), u[:n].copy(), v[:n].copy()


def _perfectly_matchable(adj: list[np.ndarray], start: int, n: int, used_cols: np.ndarray) -> bool:
    """Can rows start..n-1 all be matched into columns not in used_cols?"""
    match: dict[int, int] = {}

    def try_row(r: int, visited: set[int]) -> bool:
        for c in adj[r]:
            c = int(c)
            if used_cols[c] or c in visited:
                continue
            visited.add(c)
            if c not in match or try_row(match[c], visited):
                match[c] = r
                return True
        return False

    for r in range(start, n):
        if not try_row(r, set()):
            return False
    return True


def hungarian_max(weights: np.ndarray) -> np.ndarray:
    """Permutation matrix maximizing the total selected weight.

    Among all maximizing permutations, returns the one whose
    row-to-column mapping is lexicographically smallest. Tie detection
    works on the dual certificate: an edge can appear in an optimal
    assignment exactly when its reduced cost is zero, so the search for
    the lexicographically smallest solution is a perfect-matching
    feasibility scan over near-tight edges rather than a float
    comparison of alternative totals.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ShapeError(f"hungarian_max expects a square matrix, got {w.shape}")
    if not np.isfinite(w).all():
        raise ValueError("hungarian_max requires finite weights")
    n = w.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=np.int64)
    cost = -w
    _, u, v = _lap_min(cost)
    tol = 1e-9 * (1.0 + float(np.abs(w).max()))
    tight = (cost - u[:, None] - v[None, :]) <= tol
    adj = [np.flatnonzero(tight[i]) for i in range(n)]
    used = np.zeros(n, dtype=bool)
    row_to_col = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for c in adj[i]:
            c = int(c)
            if used[c]:
                continue
            used[c] = True
            if _perfectly_matchable(adj, i + 1, n, used):
                row_to_col[i] = c
                break
            used[c] = False
        if row_to_col[i] < 0:  # pragma: no cover - tight graph always matchable
            raise RuntimeError("internal error: tight graph lost its perfect matching")
    a = np.zeros((n, n), dtype=np.int64)
    a[np.arange(n), row_to_col] = 1
    return a


def match_pairs(a: np.ndarray) -> np.ndarray:
    """Row-to-column mapping encoded by a permutation matrix."""
    return np.argmax(a, axis=1)
