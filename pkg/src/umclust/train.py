"""Training orchestration.

Each epoch starts by re-clustering the full eval-mode representations
of every view (and of their row-wise concatenation) at all active
levels, matching centroids, and measuring per-view silhouettes. The
epoch then walks mini-batches — one batch per view per step, shorter
views cycling with a reshuffle — building the four-term objective and
applying an adaptive-moment update.

The set of active clustering levels is a prefix of the cluster set
that grows at the quarter points of the epoch budget, and the
reliable-view coefficient decays per epoch as max(floor, start *
decay^t). After the last epoch the final assignment comes from K-means
(best of several restarts) on the concatenated eval-mode latents.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .cluster import Assignment, kmeans, silhouette_view
from .data import BatchPlan, MultiViewDataset
from .errors import ConfigError, DataError, NumericalError
from .losses import (
    ClusterSet,
    LevelState,
    LossWeights,
    build_inner_pairs,
    common_contrastive_loss,
    cross_view_guidance_loss,
    inner_contrastive_loss,
    match_common,
    recon_orth_loss,
    select_reliable,
    total_loss,
)
from .metrics import MetricsReport, build_report, export_embeddings
from .nn import Adam, build_bundle, load_checkpoint, save_checkpoint

logger = logging.getLogger("umclust")


@dataclass(frozen=True)
class Seeds:
    init: int = 1
    shuffle: int = 2
    kmeans: int = 3


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    latent_dim: int = 128
    hidden_dims: tuple[int, ...] = (1024, 1024, 1024)
    batchnorm: bool = True
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weights: LossWeights = field(default_factory=LossWeights)
    reliability_start: float = 1.5
    reliability_decay: float = 0.99
    reliability_floor: float = 1.0
    seeds: Seeds = field(default_factory=Seeds)
    refresh_every: int = 1
    final_restarts: int = 10
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-6
    cluster_levels: tuple[int, ...] | None = None
    guidance_temperature: float = 0.3
    latent_activation: str = "softmax"

    def __post_init__(self):
        if self.epochs < 4:
            raise ConfigError("epochs must be >= 4 (schedule uses quarter boundaries)")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.refresh_every < 1:
            raise ConfigError("refresh_every must be >= 1")
        if self.final_restarts < 1:
            raise ConfigError("final_restarts must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.latent_activation not in ("softmax", "linear"):
            raise ConfigError(f"latent_activation must be softmax|linear, got '{self.latent_activation}'")
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        if self.cluster_levels is not None:
            object.__setattr__(self, "cluster_levels", tuple(int(k) for k in self.cluster_levels))

    def to_dict(self) -> dict:
        return asdict(self)


def reliability_coeff(config: TrainConfig, epoch: int) -> float:
    """Coefficient used during 1-based `epoch`: max(floor, start * decay^(epoch-1))."""
    return max(
        config.reliability_floor,
        config.reliability_start * config.reliability_decay ** (epoch - 1),
    )


def active_prefix_length(epoch: int, total_epochs: int) -> int:
    """1 for the first quarter, 2 through the half point, then 3."""
    if epoch <= total_epochs / 4:
        return 1
    if epoch <= total_epochs / 2:
        return 2
    return 3


def run_hash(config: TrainConfig, dataset: MultiViewDataset) -> str:
    """Hash of the resolved config plus a content fingerprint of the dataset."""
    digest = hashlib.sha256()
    for v in dataset.views:
        digest.update(v.ids.tobytes())
        digest.update(np.ascontiguousarray(v.features).tobytes())
        digest.update(v.labels.tobytes())
    payload = {
        "config": config.to_dict(),
        "dataset": {
            "name": dataset.name,
            "clusters": dataset.n_clusters,
            "views": [[v.n, v.dim] for v in dataset.views],
            "content": digest.hexdigest(),
        },
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass
class RunArtifacts:
    config_hash: str
    loss_columns: list[str]
    loss_table: np.ndarray          # one row per trained epoch
    reliability_trace: np.ndarray   # coefficient used at each epoch
    level_trace: list[tuple[int, ...]]
    final_assignment: Assignment
    report: MetricsReport
    latents: list[np.ndarray]
    checkpoint_path: Path | None = None
    out_dir: Path | None = None


def _derived_seed(base: int, scope: int, level: int) -> int:
    return int(np.random.SeedSequence([int(base), int(scope), int(level)]).generate_state(1)[0])


def refresh_level_state(
    bundle,
    dataset: MultiViewDataset,
    cluster_set: ClusterSet,
    active: tuple[int, ...],
    config: TrainConfig,
    warm: dict[tuple[str, int], np.ndarray],
) -> tuple[LevelState, list[np.ndarray]]:
    """Recluster full eval-mode representations at every needed level.

    The final level is always computed (silhouettes and cross-view
    distributions live there) even before it becomes active. Centroids
    warm-start from the previous refresh at the same level when
    available.

    Latents come from a train-mode pass with frozen running statistics:
    mini-batch optimization sees batch-normalized geometry, so the
    assignments, matchings, and silhouettes guiding it must be computed
    on that same geometry. (Running statistics lag far behind early in
    training; an eval-mode refresh would cluster a space the losses
    never see.)
    """
    latents = bundle.encode_all(dataset.feature_matrices(), train=True, update_stats=False)
    z_common = np.concatenate(latents, axis=0)
    needed = sorted(set(active) | {cluster_set.final})
    view_labels: dict[int, list[np.ndarray]] = {}
    view_centroids: dict[int, list[np.ndarray]] = {}
    common_labels: dict[int, np.ndarray] = {}
    common_centroids: dict[int, np.ndarray] = {}
    matchings: dict[int, list[np.ndarray]] = {}
    final_assignments: list[Assignment] = []
    for level in needed:
        seed = _derived_seed(config.seeds.kmeans, 0, level)
        assignment, centers = kmeans(
            z_common, level, seed=seed, max_iter=config.kmeans_max_iter,
            tol=config.kmeans_tol, init_centroids=warm.get(("common", level)),
        )
        common_labels[level] = assignment.labels
        common_centroids[level] = centers
        warm[("common", level)] = centers
        view_labels[level] = []
        view_centroids[level] = []
        matchings[level] = []
        for v, z in enumerate(latents):
            seed = _derived_seed(config.seeds.kmeans, v + 1, level)
            a_v, c_v = kmeans(
                z, level, seed=seed, max_iter=config.kmeans_max_iter,
                tol=config.kmeans_tol, init_centroids=warm.get((f"view{v}", level)),
            )
            view_labels[level].append(a_v.labels)
            view_centroids[level].append(c_v)
            warm[(f"view{v}", level)] = c_v
            matchings[level].append(match_common(centers, c_v))
            if level == cluster_set.final:
                final_assignments.append(a_v)
    sils = np.array([silhouette_view(z, a) for z, a in zip(latents, final_assignments)])
    state = LevelState(
        active_levels=tuple(active),
        view_labels=view_labels,
        view_centroids=view_centroids,
        common_labels=common_labels,
        common_centroids=common_centroids,
        matchings=matchings,
        silhouettes=sils,
    )
    return state, latents


def _view_batch_stream(plan: BatchPlan, epoch: int, view: int, n: int):
    cycle = 0
    while True:
        for idx in plan.batches(epoch, view, n, cycle):
            yield idx
        cycle += 1


def train(
    config: TrainConfig,
    dataset: MultiViewDataset,
    out_dir: str | Path | None = None,
    stop_after_epoch: int | None = None,
    resume: str | Path | None = None,
) -> RunArtifacts:
    started_at = time.time()
    n_views = dataset.n_views
    if dataset.n_clusters < 2:
        raise DataError("training requires at least 2 clusters")
    cluster_set = (
        ClusterSet(config.cluster_levels)
        if config.cluster_levels is not None
        else ClusterSet.default(dataset.n_clusters)
    )
    if cluster_set.final != dataset.n_clusters:
        raise ConfigError(
            f"last cluster level ({cluster_set.final}) must equal the dataset cluster count "
            f"({dataset.n_clusters})"
        )
    for v in dataset.views:
        if v.n < cluster_set.final:
            raise DataError(f"view {v.view_id} has {v.n} samples, fewer than the top level {cluster_set.final}")

    features = dataset.feature_matrices()
    offsets = dataset.row_offsets()
    cfg_hash = run_hash(config, dataset)
    bundle = build_bundle(
        dataset.feature_dims(),
        config.latent_dim,
        config.hidden_dims,
        config.batchnorm,
        config.seeds.init,
        latent_activation=config.latent_activation,
    )
    opt = Adam(lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)
    plan = BatchPlan(batch_size=config.batch_size, shuffle_seed=config.seeds.shuffle)
    warm: dict[tuple[str, int], np.ndarray] = {}
    start_epoch = 1
    if resume is not None:
        ck = load_checkpoint(resume, expect_config_hash=cfg_hash)
        bundle.load_arrays(ck.params, ck.stats)
        opt.load_state(ck.adam_t, ck.adam_arrays)
        warm = dict(ck.warm_centroids)
        start_epoch = ck.epoch + 1

    weights = config.weights
    last_epoch = config.epochs if stop_after_epoch is None else min(config.epochs, stop_after_epoch)
    loss_rows: list[list[float]] = []
    level_trace: list[tuple[int, ...]] = []
    reliability: list[float] = []
    level_state = None
    last_active: tuple[int, ...] | None = None

    for epoch in range(start_epoch, last_epoch + 1):
        active = cluster_set.prefix(active_prefix_length(epoch, config.epochs))
        needs_refresh = (
            level_state is None
            or active != last_active
            or (epoch - 1) % config.refresh_every == 0
        )
        if needs_refresh:
            level_state, _ = refresh_level_state(bundle, dataset, cluster_set, active, config, warm)
        last_active = active
        coeff = reliability_coeff(config, epoch)
        reliable = select_reliable(level_state.silhouettes, coeff)
        final_centroids = level_state.common_centroids[cluster_set.final]

        steps = max(plan.steps_per_epoch(v.n) for v in dataset.views)
        streams = [_view_batch_stream(plan, epoch, v, dataset.views[v].n) for v in range(n_views)]
        sums = np.zeros(5)
        for step in range(steps):
            batch_idx = [next(streams[v]) for v in range(n_views)]
            x_batches = [features[v][batch_idx[v]] for v in range(n_views)]
            bundle.zero_grad()
            l_ae, zs = recon_orth_loss(x_batches, bundle, weights.lambda1, train=True)
            pair_sets = [
                build_inner_pairs(
                    {k: level_state.view_labels[k][v] for k in active}, batch_idx[v]
                )
                for v in range(n_views)
            ]
            l_in = inner_contrastive_loss(zs, pair_sets, weights.temperature)
            batch_common = {
                k: np.concatenate([level_state.common_labels[k][offsets[v] + batch_idx[v]] for v in range(n_views)])
                for k in active
            }
            batch_view = {
                k: [level_state.view_labels[k][v][batch_idx[v]] for v in range(n_views)]
                for k in active
            }
            l_co = common_contrastive_loss(
                zs, batch_common, batch_view, level_state.matchings, active, weights.temperature
            )
            final_view_labels = [
                level_state.view_labels[cluster_set.final][v][batch_idx[v]] for v in range(n_views)
            ]
            l_cr = cross_view_guidance_loss(
                zs,
                final_centroids,
                level_state.matchings[cluster_set.final],
                final_view_labels,
                reliable,
            )
            total = total_loss(l_ae, l_in, l_co, l_cr, weights)
            if not np.isfinite(total.data):
                raise NumericalError(f"non-finite total loss at epoch {epoch} step {step}")
            total.backward()
            opt.step(bundle.named_parameters(), bundle.gradients())
            sums += [l_ae.item(), l_in.item(), l_co.item(), l_cr.item(), total.item()]
        means = sums / steps
        loss_rows.append([float(epoch), *means.tolist(), coeff, *level_state.silhouettes.tolist()])
        level_trace.append(active)
        reliability.append(coeff)
        logger.info(
            "epoch=%d total=%.6f l_ae=%.6f l_in=%.6f l_co=%.6f l_cr=%.6f coeff=%.6f levels=%s",
            epoch, means[4], means[0], means[1], means[2], means[3], coeff, list(active),
        )

    # final clustering on eval-mode representations of every sample
    bundle.eval()
    latents = bundle.encode_all(features, train=False)
    z_common = np.concatenate(latents, axis=0)
    final_assignment, _ = kmeans(
        z_common,
        dataset.n_clusters,
        seed=_derived_seed(config.seeds.kmeans, 999, dataset.n_clusters),
        max_iter=config.kmeans_max_iter,
        tol=config.kmeans_tol,
        restarts=config.final_restarts,
    )
    report = build_report(
        latents,
        [v.labels for v in dataset.views],
        final_assignment.labels,
        dataset.n_clusters,
        kmeans_seed=config.seeds.kmeans,
        restarts=config.final_restarts,
        config_hash=cfg_hash,
        started_at=started_at,
    )
    columns = ["epoch", "l_ae", "l_in", "l_co", "l_cr", "total", "reliability_coeff"] + [
        f"silhouette_view{v}" for v in range(n_views)
    ]
    artifacts = RunArtifacts(
        config_hash=cfg_hash,
        loss_columns=columns,
        loss_table=np.array(loss_rows) if loss_rows else np.zeros((0, len(columns))),
        reliability_trace=np.array(reliability),
        level_trace=level_trace,
        final_assignment=final_assignment,
        report=report,
        latents=latents,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        artifacts.out_dir = out
        artifacts.checkpoint_path = out / "checkpoint.npz"
        save_checkpoint(
            artifacts.checkpoint_path,
            config_hash=cfg_hash,
            epoch=last_epoch,
            adam_t=opt.t,
            params={k: p.data for k, p in bundle.named_parameters().items()},
            stats=bundle.named_stats(),
            adam_arrays=opt.state_arrays(),
            warm_centroids=warm,
        )
        _write_loss_csv(out / "loss_curve.csv", columns, artifacts.loss_table)
        report.save(out)
        export_embeddings(
            out / "embeddings.csv",
            dataset.all_ids(),
            np.concatenate([np.full(v.n, v.view_id) for v in dataset.views]),
            dataset.all_labels(),
            final_assignment.labels,
            z_common,
        )
    bundle.train()
    return artifacts


def _write_loss_csv(path: Path, columns: list[str], table: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in table:
            fh.write(f"{int(row[0])}," + ",".join(repr(float(x)) for x in row[1:]) + "\n")
