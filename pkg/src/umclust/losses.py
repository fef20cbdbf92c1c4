"""The four training-objective terms and their supporting state.

Per mini-batch the objective is

    total = l_ae + lambda2 * l_in + lambda3 * l_co + lambda4 * l_cr

where l_ae is reconstruction plus a lambda1-weighted batch-Gram
orthogonality regularizer, l_in is an NT-Xent contrastive loss over
sample pairs whose same/different-cluster relation holds at every
active clustering level, l_co contrasts concatenated-representation
anchors against view samples through Hungarian-matched centroid pairs,
and l_cr pulls each view's soft cluster-assignment distribution toward
the distributions of views with strictly better silhouettes.

Cluster assignments, centroids, matchings, silhouettes and reliable
sets are all recomputed outside the loss graph and enter it as
constants; gradients flow only through the current batch
representations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cluster import cosine_matrix, hungarian_max
from .errors import ConfigError, ShapeError
from .nn.mlp import AutoencoderBundle
from .nn.tensor import Tensor, concat_rows, row_normalize

DISTRIBUTION_FLOOR = 1e-8


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 0.01
    lambda3: float = 0.01
    lambda4: float = 1000.0
    temperature: float = 0.1

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")


@dataclass(frozen=True)
class ClusterSet:
    """Ordered clustering levels; the last level is the true cluster count."""

    levels: tuple[int, ...]

    def __post_init__(self):
        if not self.levels:
            raise ConfigError("cluster set must contain at least one level")
        if any(k < 1 for k in self.levels):
            raise ConfigError("cluster levels must be >= 1")
        if list(self.levels) != sorted(set(self.levels)):
            raise ConfigError(f"cluster levels must be strictly increasing, got {self.levels}")
        object.__setattr__(self, "levels", tuple(int(k) for k in self.levels))

    @staticmethod
    def default(n_clusters: int) -> "ClusterSet":
        """{2, ceil(K/2), K} clipped to [2, K] and deduplicated."""
        raw = {2, math.ceil(n_clusters / 2), n_clusters}
        levels = tuple(sorted(k for k in raw if 2 <= k <= n_clusters))
        if not levels:
            levels = (n_clusters,)
        return ClusterSet(levels)

    @property
    def final(self) -> int:
        return self.levels[-1]

    def prefix(self, length: int) -> tuple[int, ...]:
        return self.levels[: max(1, min(length, len(self.levels)))]


@dataclass
class LevelState:
    """Per-epoch clustering snapshot over full (eval-mode) representations."""

    active_levels: tuple[int, ...]
    view_labels: dict[int, list[np.ndarray]]       # level -> per view (n_v,)
    view_centroids: dict[int, list[np.ndarray]]    # level -> per view (k, D)
    common_labels: dict[int, np.ndarray]           # level -> (N,)
    common_centroids: dict[int, np.ndarray]        # level -> (k, D)
    matchings: dict[int, list[np.ndarray]]         # level -> per view (k, k) 0/1
    silhouettes: np.ndarray                        # (V,) at the final level


@dataclass
class PairSets:
    """Boolean pair relations inside one batch of one view.

    tp[i, j] is True when i and j share a cluster at every active level;
    tn[i, j] when they differ at every active level. Pairs that agree at
    some levels and differ at others appear in neither set.
    """

    tp: np.ndarray
    tn: np.ndarray

    @property
    def m(self) -> np.ndarray:
        return self.tp.sum(axis=1)

    @property
    def n(self) -> np.ndarray:
        return self.tn.sum(axis=1)

    def tp_indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.tp[i])

    def tn_indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.tn[i])


# ---------------------------------------------------------------------------
# autoencoder term


def recon_orth_term(x: Tensor, x_hat: Tensor, z: Tensor, lambda1: float) -> Tensor:
    """Per-view reconstruction + latent-dimension orthogonality regularizer.

    The reconstruction error is averaged per entry, so views with very
    different feature dimensions contribute at the same scale and the
    default loss weights balance the terms the same way on every view.
    The regularizer drives the latent feature Gram Z'Z toward the
    identity (scaled by 1/D): on simplex-valued latents this rewards
    confident, dimension-sparse rows while decorrelating dimensions.
    (The sample-Gram reading ZZ' - I_b is unusable: as soon as the
    batch exceeds the latent dimension it forces all sample pairs
    toward orthogonality, erasing exactly the cluster cohesion the
    contrastive terms build.)
    """
    b = x.data.shape[0]
    if b == 0:
        raise ShapeError("empty batch")
    d = z.data.shape[1]
    rec = (x - x_hat).square().sum() * (1.0 / x.data.size)
    reg = (z.T @ z - Tensor(np.eye(d))).square().sum() * (1.0 / d)
    return rec + float(lambda1) * reg


def recon_orth_loss(
    x_batches: list[np.ndarray],
    bundle: AutoencoderBundle,
    lambda1: float,
    train: bool = True,
) -> tuple[Tensor, list[Tensor]]:
    """Sum of per-view reconstruction terms; also returns the latent batches."""
    total = Tensor(0.0)
    zs: list[Tensor] = []
    for v, xb in enumerate(x_batches):
        x = Tensor(xb)
        z = bundle.encode(v, x, train=train)
        x_hat = bundle.decode(v, z, train=train)
        total = total + recon_orth_term(x, x_hat, z, lambda1)
        zs.append(z)
    return total, zs


# ---------------------------------------------------------------------------
# inner-view multi-level contrastive term


def build_inner_pairs(labels_by_level: dict[int, np.ndarray], batch_idx: np.ndarray) -> PairSets:
    """Intersect same/different-cluster relations across the active levels."""
    b = batch_idx.shape[0]
    same = np.ones((b, b), dtype=bool)
    diff = np.ones((b, b), dtype=bool)
    for labels in labels_by_level.values():
        lv = labels[batch_idx]
        eq = lv[:, None] == lv[None, :]
        same &= eq
        diff &= ~eq
    np.fill_diagonal(same, False)
    np.fill_diagonal(diff, False)
    return PairSets(tp=same, tn=diff)


def _masked_logsumexp_rows(sim: Tensor, mask: np.ndarray, inv_temp: float) -> tuple[Tensor, np.ndarray]:
    """log(sum over masked entries of exp(sim/tau)) per row.

    Rows with an empty mask yield 0 and are flagged invalid. The row max
    is subtracted inside the exponent (an exact identity), so entries
    never overflow regardless of temperature.
    """
    scaled = sim.data * inv_temp
    with np.errstate(invalid="ignore"):
        row_max = np.where(mask, scaled, -np.inf).max(axis=1)
    has_any = np.isfinite(row_max)
    shift = np.where(has_any, row_max, 0.0)
    mask_f = mask.astype(np.float64)
    exponent = (sim * inv_temp - Tensor(shift[:, None])) * Tensor(mask_f)
    summed = (exponent.exp() * Tensor(mask_f)).sum(axis=1)
    lse = (summed + Tensor((~has_any).astype(np.float64))).log() + Tensor(shift)
    return lse, has_any


def inner_contrastive_loss(
    z_batches: list[Tensor],
    pair_sets: list[PairSets],
    temperature: float,
) -> Tensor:
    """NT-Xent over true-positive pairs against true-negative denominators.

    Per view: sum_i sum_{j in tp(i)} -log(exp(s_ij/tau) / sum_{tn(i)} exp(s/tau))
    weighted 1/(batch * m_i), averaged over views. Samples lacking either
    positives or negatives contribute nothing.
    """
    n_views = len(z_batches)
    inv_temp = 1.0 / float(temperature)
    total = Tensor(0.0)
    for z, pairs in zip(z_batches, pair_sets):
        b = z.data.shape[0]
        m = pairs.m
        valid = (m > 0) & (pairs.n > 0)
        if not valid.any():
            continue
        zn = row_normalize(z)
        sim = zn @ zn.T
        lse, _ = _masked_logsumexp_rows(sim, pairs.tn, inv_temp)
        pos_sum = (sim * Tensor(pairs.tp.astype(np.float64))).sum(axis=1)
        m_safe = np.maximum(m, 1).astype(np.float64)
        row_term = lse - pos_sum * Tensor(inv_temp / m_safe)
        coeff = valid.astype(np.float64) / (n_views * b)
        total = total + (row_term * Tensor(coeff)).sum()
    return total


# ---------------------------------------------------------------------------
# common-view multi-level guidance


def match_common(common_centroids: np.ndarray, view_centroids: np.ndarray) -> np.ndarray:
    """Permutation matrix pairing common-view centroids with view centroids
    by maximum total cosine similarity."""
    if common_centroids.shape != view_centroids.shape:
        raise ShapeError(
            f"centroid shape mismatch: {common_centroids.shape} vs {view_centroids.shape}"
        )
    return hungarian_max(cosine_matrix(common_centroids, view_centroids))


def common_contrastive_loss(
    z_batches: list[Tensor],
    batch_common_labels: dict[int, np.ndarray],
    batch_view_labels: dict[int, list[np.ndarray]],
    matchings: dict[int, list[np.ndarray]],
    active_levels: tuple[int, ...],
    temperature: float,
) -> Tensor:
    """Anchor every concatenated-batch sample against each view's batch.

    A pair (anchor i, view sample j) is positive at a level when the
    matching links the anchor's common-view cluster to j's view cluster,
    negative otherwise. Each level contributes an NT-Xent term whose
    denominator pools that anchor's negatives across all views; levels
    are averaged. Anchors with no negatives anywhere are skipped.
    """
    n_views = len(z_batches)
    inv_temp = 1.0 / float(temperature)
    z_union = concat_rows(z_batches)
    n_union = z_union.data.shape[0]
    zu = row_normalize(z_union)
    zv_normed = [row_normalize(z) for z in z_batches]
    sims = [zu @ zn.T for zn in zv_normed]
    total = Tensor(0.0)
    for level in active_levels:
        g_common = batch_common_labels[level]
        pos_masks = []
        neg_masks = []
        for v in range(n_views):
            a = matchings[level][v]
            if a is None:
                raise ShapeError(f"missing matching for view {v} at level {level}")
            pos = a[np.ix_(g_common, batch_view_labels[level][v])].astype(bool)
            pos_masks.append(pos)
            neg_masks.append(~pos)
        all_scaled = np.concatenate([s.data * inv_temp for s in sims], axis=1)
        all_neg = np.concatenate(neg_masks, axis=1)
        with np.errstate(invalid="ignore"):
            row_max = np.where(all_neg, all_scaled, -np.inf).max(axis=1)
        has_neg = np.isfinite(row_max)
        if not has_neg.any():
            continue
        shift = np.where(has_neg, row_max, 0.0)
        neg_total = Tensor(np.zeros(n_union))
        for v in range(n_views):
            mask_f = neg_masks[v].astype(np.float64)
            exponent = (sims[v] * inv_temp - Tensor(shift[:, None])) * Tensor(mask_f)
            neg_total = neg_total + (exponent.exp() * Tensor(mask_f)).sum(axis=1)
        lse = (neg_total + Tensor((~has_neg).astype(np.float64))).log() + Tensor(shift)
        valid = has_neg.astype(np.float64)
        level_term = Tensor(0.0)
        for v in range(n_views):
            b_v = z_batches[v].data.shape[0]
            pos_f = pos_masks[v].astype(np.float64)
            pos_count = pos_f.sum(axis=1)
            pos_sum = (sims[v] * Tensor(pos_f)).sum(axis=1)
            per_anchor = Tensor(pos_count) * lse - pos_sum * inv_temp
            weight = valid / (n_union * n_views * b_v)
            level_term = level_term + (per_anchor * Tensor(weight)).sum()
        total = total + level_term
    return total * (1.0 / len(active_levels))


# ---------------------------------------------------------------------------
# cross-view reliable guidance


def compose_matchings(a_view: np.ndarray, a_other: np.ndarray) -> np.ndarray:
    """Map each cluster of one view to its partner in another view.

    Both matchings pair common-view centroids with view centroids, so
    the composition runs through the common view: cluster j of the
    first view corresponds to the common centroid matched to j, and
    from there to the second view's matched cluster.
    """
    common_of = np.argmax(a_view, axis=0)
    other_of_common = np.argmax(a_other, axis=1)
    return other_of_common[common_of]


def student_assignments(z: Tensor, centroids: np.ndarray) -> Tensor:
    """Heavy-tailed soft assignment of rows to centroids.

    Rows get the t-distribution kernel 1/(1 + squared distance),
    normalized per row. Unlike a temperature softmax this never
    saturates: far samples still receive a usable pull toward a target
    centroid, which is what lets the guidance term move whole clusters.
    """
    zz = z.square().sum(axis=1, keepdims=True)
    cc = Tensor((centroids**2).sum(axis=1)[None, :])
    d2 = zz + cc - (z @ Tensor(centroids.T)) * 2.0
    q = 1.0 / (d2.clip_min(0.0) + 1.0)
    return q / q.sum(axis=1, keepdims=True)


def cross_view_guidance_loss(
    z_batches: list[Tensor],
    common_centroids: np.ndarray,
    matchings: list[np.ndarray],
    batch_view_labels: list[np.ndarray],
    reliable: list[list[int]],
    floor: float = DISTRIBUTION_FLOOR,
) -> Tensor:
    """Alignment pull toward the common-view frame for guided views.

    A view with at least one more-reliable peer gets every batch sample
    pulled toward the common centroid matched to that sample's cluster:
    the sample's heavy-tailed assignment distribution is scored against
    the matched centroid (cross-entropy), so whole clusters migrate
    onto the shared frame that reliable views anchor. Each guided view
    is weighted by |reliable set| / V^2, preserving the double-sum
    structure of the objective; views with no more-reliable peer
    contribute nothing.
    """
    n_views = len(z_batches)
    k = common_centroids.shape[0]
    total = Tensor(0.0)
    for v, targets in enumerate(reliable):
        if not targets:
            continue
        common_of = np.argmax(matchings[v], axis=0)
        sample_targets = common_of[batch_view_labels[v]]
        b = sample_targets.shape[0]
        q = student_assignments(z_batches[v], common_centroids).clip_min(floor)
        pick = np.zeros((b, k))
        pick[np.arange(b), sample_targets] = 1.0
        ce = (q.log() * Tensor(-pick)).sum() * (1.0 / b)
        total = total + ce * (len(targets) / (n_views * n_views))
    return total


def select_reliable(silhouettes: np.ndarray, coeff: float) -> list[list[int]]:
    """Indices of views whose silhouette strictly beats the current view's
    threshold. For a non-positive silhouette the multiplicative threshold
    would drop below the view's own score, so the margin turns additive:
    sils_r > sils_v + coeff * |sils_v|."""
    sils = np.asarray(silhouettes, dtype=np.float64)
    out: list[list[int]] = []
    for v, sv in enumerate(sils.tolist()):
        threshold = coeff * sv if sv > 0 else sv + coeff * abs(sv)
        out.append([r for r, sr in enumerate(sils.tolist()) if r != v and sr > threshold])
    return out


def view_distribution(
    z_batch: Tensor,
    common_centroids: np.ndarray,
    temperature: float,
    floor: float = DISTRIBUTION_FLOOR,
) -> Tensor:
    """Batch-mean soft assignment of view samples to common-view centroids.

    Each sample gets softmax(cos(z_i, c_k) / tau) over centroids; the
    batch average is floored at `floor` and renormalized so cross-view
    KL terms stay finite.
    """
    k = common_centroids.shape[0]
    if k < 2:
        raise ShapeError("view distribution needs at least 2 centroids")
    norms = np.linalg.norm(common_centroids, axis=1, keepdims=True)
    cn = common_centroids / np.where(norms > 0, norms, 1.0)
    zn = row_normalize(z_batch)
    sim = zn @ Tensor(cn.T)
    inv_temp = 1.0 / float(temperature)
    shift = (sim.data * inv_temp).max(axis=1)
    e = (sim * inv_temp - Tensor(shift[:, None])).exp()
    p_rows = e / e.sum(axis=1, keepdims=True)
    p = p_rows.mean(axis=0)
    p = p.clip_min(float(floor))
    return p / p.sum()


def cross_view_kl(distributions: list[Tensor], reliable: list[list[int]]) -> Tensor:
    """Sum of KL(P_v || Q_r) over each view's reliable set, weighted 1/V^2.

    Reliable-view distributions act as constants (guidance targets), so
    gradient flows only into the guided view's distribution.
    """
    n_views = len(distributions)
    total = Tensor(0.0)
    weight = 1.0 / (n_views * n_views)
    for v, targets in enumerate(reliable):
        p = distributions[v]
        for r in targets:
            log_q = np.log(distributions[r].data)
            kl = (p * (p.log() - Tensor(log_q))).sum()
            total = total + kl * weight
    return total


# ---------------------------------------------------------------------------
# combination


def total_loss(
    l_ae: Tensor,
    l_in: Tensor,
    l_co: Tensor,
    l_cr: Tensor,
    weights: LossWeights,
) -> Tensor:
    return l_ae + weights.lambda2 * l_in + weights.lambda3 * l_co + weights.lambda4 * l_cr
