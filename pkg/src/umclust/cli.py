"""Command-line surface: generate, unpair, train, eval, sweep.

Exit codes: 0 on success, 2 for configuration or input errors, 3 for
numerical failures during training.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfg
from . import data
from .errors import CheckpointError, ConfigError, DataError, NumericalError, UmclustError
from .metrics import build_report
from .nn import build_bundle, load_checkpoint
from .train import run_hash, train

OUT_ROOT_ENV = "UMCLUST_OUT_ROOT"
logger = logging.getLogger("umclust")


def _resolve_out(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    root = os.environ.get(OUT_ROOT_ENV)
    if root is None:
        raise ConfigError(f"--out not given and ${OUT_ROOT_ENV} is unset")
    return Path(root) / f"{args.command}-{Path(args.config).stem}"


def _prepare_run_dir(out: Path, force: bool) -> Path:
    if out.exists() and any(out.iterdir()) and not force:
        raise ConfigError(f"output directory {out} already exists; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_run_config(args) -> cfg.RunConfig:
    run_config = cfg.load_config(args.config)
    if args.seed is not None:
        run_config = cfg.apply_seed_override(run_config, args.seed)
    return run_config


def _load_dataset(section: cfg.DatasetSection) -> data.MultiViewDataset:
    if section.manifest is None:
        raise ConfigError("missing config key 'dataset.manifest'")
    ds = data.load(section.manifest)
    if section.scale != "none":
        ds = data.scale_dataset(ds, section.scale)
    return ds


def cmd_generate(args) -> int:
    run_config = _load_run_config(args)
    if run_config.dataset.synthetic is None:
        raise ConfigError("missing config key 'dataset.synthetic'")
    out = _prepare_run_dir(_resolve_out(args), args.force)
    ds = data.synthesize(run_config.dataset.synthetic, run_config.dataset.synthetic_seed)
    manifest = data.save_dataset(ds, out)
    cfg.write_resolved(run_config, out / "config.yaml")
    logger.info("wrote %s (%d views, %d samples)", manifest, ds.n_views, ds.total_samples)
    print(manifest)
    return 0


def cmd_unpair(args) -> int:
    run_config = _load_run_config(args)
    if run_config.dataset.unpair_recipe is None:
        raise ConfigError("missing config key 'dataset.unpair'")
    out = _prepare_run_dir(_resolve_out(args), args.force)
    paired = data.load_paired(run_config.dataset.unpair_source)
    ds = data.unpair(paired, run_config.dataset.unpair_recipe)
    manifest = data.save_dataset(ds, out)
    cfg.write_resolved(run_config, out / "config.yaml")
    logger.info("unpaired %s -> %s", run_config.dataset.unpair_source, manifest)
    print(manifest)
    return 0


def cmd_train(args) -> int:
    run_config = _load_run_config(args)
    ds = _load_dataset(run_config.dataset)
    out = _prepare_run_dir(_resolve_out(args), args.force)
    cfg.write_resolved(run_config, out / "config.yaml")
    artifacts = train(run_config.train, ds, out_dir=out)
    for scope in artifacts.report.scopes:
        p = scope.as_percent()
        logger.info("%s: NMI=%.2f ACC=%.2f F1=%.2f", p["scope"], p["nmi"], p["acc"], p["f1"])
    print(out / "metrics.json")
    return 0


def cmd_eval(args) -> int:
    run_config = _load_run_config(args)
    ds = _load_dataset(run_config.dataset)
    out = _resolve_out(args)
    ckpt_path = out / "checkpoint.npz"
    if not ckpt_path.exists():
        raise ConfigError(f"no checkpoint at {ckpt_path}")
    expected = run_hash(run_config.train, ds)
    ck = load_checkpoint(ckpt_path, expect_config_hash=expected)
    bundle = build_bundle(
        ds.feature_dims(),
        run_config.train.latent_dim,
        run_config.train.hidden_dims,
        run_config.train.batchnorm,
        run_config.train.seeds.init,
        latent_activation=run_config.train.latent_activation,
    )
    bundle.load_arrays(ck.params, ck.stats)
    bundle.eval()
    import time

    from .cluster import kmeans

    started = time.time()
    latents = bundle.encode_all(ds.feature_matrices(), train=False)
    z_common = np.concatenate(latents, axis=0)
    seed = int(np.random.SeedSequence([run_config.train.seeds.kmeans, 999, ds.n_clusters]).generate_state(1)[0])
    assignment, _ = kmeans(z_common, ds.n_clusters, seed=seed, restarts=run_config.train.final_restarts)
    report = build_report(
        latents,
        [v.labels for v in ds.views],
        assignment.labels,
        ds.n_clusters,
        kmeans_seed=run_config.train.seeds.kmeans,
        restarts=run_config.train.final_restarts,
        config_hash=expected,
        started_at=started,
    )
    report.save(out)
    print(report.to_json(), end="")
    return 0


def _sweep_point(task: tuple[str, str, dict, int | None, str]) -> dict:
    """Train one grid point in an isolated process."""
    config_path, out_dir, overrides, seed, _label = task
    run_config = cfg.load_config(config_path)
    if seed is not None:
        run_config = cfg.apply_seed_override(run_config, seed)
    run_config = cfg.with_weights(run_config, **overrides)
    ds = _load_dataset(run_config.dataset)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_resolved(run_config, out / "config.yaml")
    artifacts = train(run_config.train, ds, out_dir=out)
    all_view = artifacts.report.scope("all-view").as_percent()
    return {"nmi": all_view["nmi"], "acc": all_view["acc"], "f1": all_view["f1"]}


def cmd_sweep(args) -> int:
    run_config = _load_run_config(args)
    if not run_config.sweep:
        raise ConfigError("missing config key 'sweep' (no grid axes defined)")
    out = _prepare_run_dir(_resolve_out(args), args.force)
    cfg.write_resolved(run_config, out / "config.yaml")
    axes = sorted(run_config.sweep)
    points = list(itertools.product(*(run_config.sweep[a] for a in axes)))
    tasks = []
    for values in points:
        overrides = dict(zip(axes, values))
        label = "-".join(f"{a}={v:g}" for a, v in overrides.items())
        tasks.append((str(args.config), str(out / f"run-{label}"), overrides, args.seed, label))
    results: list[tuple[dict, dict | None, str]] = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_sweep_point, t) for t in tasks]
            for task, fut in zip(tasks, futures):
                try:
                    results.append((dict(zip(axes, points[tasks.index(task)])), fut.result(), ""))
                except UmclustError as exc:
                    results.append((dict(zip(axes, points[tasks.index(task)])), None, str(exc)))
    else:
        for task, values in zip(tasks, points):
            try:
                results.append((dict(zip(axes, values)), _sweep_point(task), ""))
            except UmclustError as exc:
                logger.warning("sweep point %s failed: %s", task[4], exc)
                results.append((dict(zip(axes, values)), None, str(exc)))
    summary = out / "summary.csv"
    with open(summary, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(axes) + ",nmi,acc,f1,status\n")
        for overrides, scores, err in results:
            prefix = ",".join(f"{overrides[a]:g}" for a in axes)
            if scores is None:
                fh.write(f"{prefix},,,,failed: {err}\n")
            else:
                fh.write(f"{prefix},{scores['nmi']:.2f},{scores['acc']:.2f},{scores['f1']:.2f},ok\n")
    print(summary)
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "unpair": cmd_unpair,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="umclust", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", "-c", required=True, help="YAML run configuration")
        p.add_argument("--out", "-o", default=None, help=f"output directory (default under ${OUT_ROOT_ENV})")
        p.add_argument("--seed", type=int, default=None, help="override all seeds from one value")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers (sweep only)")
        p.add_argument("--force", action="store_true", help="allow writing into a non-empty directory")
        p.add_argument("--quiet", action="store_true", help="suppress progress logging")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DataError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
