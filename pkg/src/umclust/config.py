"""YAML run configuration: strict parsing, defaults, canonical hashing.

The file has up to three sections — ``dataset``, ``train`` and
``sweep`` — mirroring the dataset sources, the trainer parameters and
the hyperparameter grid. Unknown keys anywhere are errors, not
warnings: a silently ignored typo in a hyperparameter name would
invalidate a reproduction. ``resolved_dict`` materializes every
default so a run directory can carry the exact effective
configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .data import STRATEGIES, SyntheticSpec, UnpairRecipe
from .errors import ConfigError
from .losses import LossWeights
from .train import Seeds, TrainConfig

_SWEEPABLE = ("lambda1", "lambda2", "lambda3", "lambda4")


def _expect_mapping(obj, path: str) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"config section '{path}' must be a mapping")
    return obj


def _reject_unknown(section: dict, allowed: set[str], path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown config key '{path}.{key}'")


def _get(section: dict, key: str, default, path: str, cast=None):
    value = section.get(key, default)
    if value is None:
        return None
    if cast is not None:
        try:
            return cast(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key '{path}.{key}' has invalid value {value!r}") from exc
    return value


@dataclass
class DatasetSection:
    manifest: str | None = None
    scale: str = "minmax"
    synthetic: SyntheticSpec | None = None
    synthetic_seed: int = 0
    unpair_source: str | None = None
    unpair_recipe: UnpairRecipe | None = None


@dataclass
class RunConfig:
    dataset: DatasetSection
    train: TrainConfig
    sweep: dict[str, list[float]] = field(default_factory=dict)

    def resolved_dict(self) -> dict:
        out: dict = {
            "dataset": {
                "manifest": self.dataset.manifest,
                "scale": self.dataset.scale,
            },
            "train": _train_to_dict(self.train),
        }
        if self.dataset.synthetic is not None:
            s = self.dataset.synthetic
            out["dataset"]["synthetic"] = {
                "clusters": s.clusters,
                "views": s.views,
                "dims": list(s.dims),
                "samples_per_cluster": s.samples_per_cluster,
                "separation": s.separation,
                "noise_std": s.noise_std,
                "seed": self.dataset.synthetic_seed,
            }
        if self.dataset.unpair_recipe is not None:
            out["dataset"]["unpair"] = {
                "source_manifest": self.dataset.unpair_source,
                "strategy": self.dataset.unpair_recipe.strategy,
                "seed": self.dataset.unpair_recipe.seed,
            }
        if self.sweep:
            out["sweep"] = {k: list(v) for k, v in self.sweep.items()}
        return out


def _train_to_dict(cfg: TrainConfig) -> dict:
    return {
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "latent_dim": cfg.latent_dim,
        "hidden_dims": list(cfg.hidden_dims),
        "batchnorm": cfg.batchnorm,
        "learning_rate": cfg.learning_rate,
        "beta1": cfg.beta1,
        "beta2": cfg.beta2,
        "adam_eps": cfg.adam_eps,
        "refresh_every": cfg.refresh_every,
        "final_restarts": cfg.final_restarts,
        "kmeans_max_iter": cfg.kmeans_max_iter,
        "kmeans_tol": cfg.kmeans_tol,
        "cluster_levels": list(cfg.cluster_levels) if cfg.cluster_levels is not None else None,
        "guidance_temperature": cfg.guidance_temperature,
        "latent_activation": cfg.latent_activation,
        "weights": {
            "lambda1": cfg.weights.lambda1,
            "lambda2": cfg.weights.lambda2,
            "lambda3": cfg.weights.lambda3,
            "lambda4": cfg.weights.lambda4,
            "temperature": cfg.weights.temperature,
        },
        "reliability": {
            "start": cfg.reliability_start,
            "decay": cfg.reliability_decay,
            "floor": cfg.reliability_floor,
        },
        "seeds": {
            "init": cfg.seeds.init,
            "shuffle": cfg.seeds.shuffle,
            "kmeans": cfg.seeds.kmeans,
        },
    }


def _parse_dataset(section: dict) -> DatasetSection:
    _reject_unknown(section, {"manifest", "scale", "synthetic", "unpair"}, "dataset")
    out = DatasetSection()
    out.manifest = _get(section, "manifest", None, "dataset", str)
    out.scale = _get(section, "scale", "minmax", "dataset", str)
    if out.scale not in ("minmax", "zscore", "none"):
        raise ConfigError(f"config key 'dataset.scale' must be minmax|zscore|none, got '{out.scale}'")
    if "synthetic" in section:
        syn = _expect_mapping(section["synthetic"], "dataset.synthetic")
        allowed = {"clusters", "views", "dims", "samples_per_cluster", "separation", "noise_std", "seed"}
        _reject_unknown(syn, allowed, "dataset.synthetic")
        for key in ("clusters", "views", "dims", "samples_per_cluster", "separation", "noise_std"):
            if key not in syn:
                raise ConfigError(f"missing config key 'dataset.synthetic.{key}'")
        out.synthetic = SyntheticSpec(
            clusters=int(syn["clusters"]),
            views=int(syn["views"]),
            dims=tuple(int(d) for d in syn["dims"]),
            samples_per_cluster=int(syn["samples_per_cluster"]),
            separation=float(syn["separation"]),
            noise_std=float(syn["noise_std"]),
        )
        out.synthetic_seed = _get(syn, "seed", 0, "dataset.synthetic", int)
    if "unpair" in section:
        up = _expect_mapping(section["unpair"], "dataset.unpair")
        _reject_unknown(up, {"source_manifest", "strategy", "seed"}, "dataset.unpair")
        if "source_manifest" not in up:
            raise ConfigError("missing config key 'dataset.unpair.source_manifest'")
        strategy = _get(up, "strategy", "stratified-round-robin", "dataset.unpair", str)
        if strategy not in STRATEGIES:
            raise ConfigError(f"config key 'dataset.unpair.strategy' must be one of {STRATEGIES}")
        out.unpair_source = str(up["source_manifest"])
        out.unpair_recipe = UnpairRecipe(
            seed=_get(up, "seed", 0, "dataset.unpair", int),
            strategy=strategy,
            source=out.unpair_source,
        )
    return out


def _parse_train(section: dict) -> TrainConfig:
    allowed = {
        "epochs", "batch_size", "latent_dim", "hidden_dims", "batchnorm", "learning_rate",
        "beta1", "beta2", "adam_eps", "refresh_every", "final_restarts", "kmeans_max_iter",
        "kmeans_tol", "cluster_levels", "guidance_temperature", "latent_activation",
        "weights", "reliability", "seeds",
    }
    _reject_unknown(section, allowed, "train")
    w = _expect_mapping(section.get("weights"), "train.weights")
    _reject_unknown(w, {"lambda1", "lambda2", "lambda3", "lambda4", "temperature"}, "train.weights")
    weights = LossWeights(
        lambda1=_get(w, "lambda1", 1.0, "train.weights", float),
        lambda2=_get(w, "lambda2", 0.01, "train.weights", float),
        lambda3=_get(w, "lambda3", 0.01, "train.weights", float),
        lambda4=_get(w, "lambda4", 1000.0, "train.weights", float),
        temperature=_get(w, "temperature", 0.1, "train.weights", float),
    )
    rel = _expect_mapping(section.get("reliability"), "train.reliability")
    _reject_unknown(rel, {"start", "decay", "floor"}, "train.reliability")
    seeds_raw = _expect_mapping(section.get("seeds"), "train.seeds")
    _reject_unknown(seeds_raw, {"init", "shuffle", "kmeans"}, "train.seeds")
    seeds = Seeds(
        init=_get(seeds_raw, "init", 1, "train.seeds", int),
        shuffle=_get(seeds_raw, "shuffle", 2, "train.seeds", int),
        kmeans=_get(seeds_raw, "kmeans", 3, "train.seeds", int),
    )
    levels = section.get("cluster_levels")
    return TrainConfig(
        epochs=_get(section, "epochs", 200, "train", int),
        batch_size=_get(section, "batch_size", 128, "train", int),
        latent_dim=_get(section, "latent_dim", 128, "train", int),
        hidden_dims=tuple(int(d) for d in section.get("hidden_dims", (1024, 1024, 1024))),
        batchnorm=bool(section.get("batchnorm", True)),
        learning_rate=_get(section, "learning_rate", 1e-3, "train", float),
        beta1=_get(section, "beta1", 0.9, "train", float),
        beta2=_get(section, "beta2", 0.999, "train", float),
        adam_eps=_get(section, "adam_eps", 1e-8, "train", float),
        weights=weights,
        reliability_start=_get(rel, "start", 1.5, "train.reliability", float),
        reliability_decay=_get(rel, "decay", 0.99, "train.reliability", float),
        reliability_floor=_get(rel, "floor", 1.0, "train.reliability", float),
        seeds=seeds,
        refresh_every=_get(section, "refresh_every", 1, "train", int),
        final_restarts=_get(section, "final_restarts", 10, "train", int),
        kmeans_max_iter=_get(section, "kmeans_max_iter", 100, "train", int),
        kmeans_tol=_get(section, "kmeans_tol", 1e-6, "train", float),
        cluster_levels=tuple(int(k) for k in levels) if levels is not None else None,
        guidance_temperature=_get(section, "guidance_temperature", 0.3, "train", float),
        latent_activation=_get(section, "latent_activation", "softmax", "train", str),
    )


def _parse_sweep(section: dict) -> dict[str, list[float]]:
    _reject_unknown(section, set(_SWEEPABLE), "sweep")
    grid: dict[str, list[float]] = {}
    for key, values in section.items():
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigError(f"config key 'sweep.{key}' must be a non-empty list")
        grid[key] = [float(v) for v in values]
    return grid


def parse_config(raw: dict) -> RunConfig:
    raw = _expect_mapping(raw, "<root>")
    _reject_unknown(raw, {"dataset", "train", "sweep"}, "<root>")
    try:
        return RunConfig(
            dataset=_parse_dataset(_expect_mapping(raw.get("dataset"), "dataset")),
            train=_parse_train(_expect_mapping(raw.get("train"), "train")),
            sweep=_parse_sweep(_expect_mapping(raw.get("sweep"), "sweep")),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"missing config file {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"unparseable config {path}: {exc}") from exc
    return parse_config(raw if raw is not None else {})


def write_resolved(config: RunConfig, path: str | Path) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(config.resolved_dict(), fh, sort_keys=True)


def apply_seed_override(config: RunConfig, seed: int) -> RunConfig:
    """Re-seed every stochastic component from one CLI-provided value."""
    train = config.train
    new_train = TrainConfig(
        **{**_train_config_kwargs(train), "seeds": Seeds(init=seed, shuffle=seed + 1, kmeans=seed + 2)}
    )
    dataset = config.dataset
    new_dataset = DatasetSection(
        manifest=dataset.manifest,
        scale=dataset.scale,
        synthetic=dataset.synthetic,
        synthetic_seed=seed if dataset.synthetic is not None else dataset.synthetic_seed,
        unpair_source=dataset.unpair_source,
        unpair_recipe=(
            UnpairRecipe(seed=seed, strategy=dataset.unpair_recipe.strategy, source=dataset.unpair_recipe.source)
            if dataset.unpair_recipe is not None
            else None
        ),
    )
    return RunConfig(dataset=new_dataset, train=new_train, sweep=dict(config.sweep))


def with_weights(config: RunConfig, **lambda_overrides: float) -> RunConfig:
    """New config with some loss weights replaced (used by the sweep runner)."""
    train = config.train
    w = train.weights
    new_weights = LossWeights(
        lambda1=lambda_overrides.get("lambda1", w.lambda1),
        lambda2=lambda_overrides.get("lambda2", w.lambda2),
        lambda3=lambda_overrides.get("lambda3", w.lambda3),
        lambda4=lambda_overrides.get("lambda4", w.lambda4),
        temperature=w.temperature,
    )
    new_train = TrainConfig(**{**_train_config_kwargs(train), "weights": new_weights})
    return RunConfig(dataset=config.dataset, train=new_train, sweep=dict(config.sweep))


def _train_config_kwargs(cfg: TrainConfig) -> dict:
    return {
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "latent_dim": cfg.latent_dim,
        "hidden_dims": cfg.hidden_dims,
        "batchnorm": cfg.batchnorm,
        "learning_rate": cfg.learning_rate,
        "beta1": cfg.beta1,
        "beta2": cfg.beta2,
        "adam_eps": cfg.adam_eps,
        "weights": cfg.weights,
        "reliability_start": cfg.reliability_start,
        "reliability_decay": cfg.reliability_decay,
        "reliability_floor": cfg.reliability_floor,
        "seeds": cfg.seeds,
        "refresh_every": cfg.refresh_every,
        "final_restarts": cfg.final_restarts,
        "kmeans_max_iter": cfg.kmeans_max_iter,
        "kmeans_tol": cfg.kmeans_tol,
        "cluster_levels": cfg.cluster_levels,
        "guidance_temperature": cfg.guidance_temperature,
        "latent_activation": cfg.latent_activation,
    }
