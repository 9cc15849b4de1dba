"""Command-line pipeline: ingest -> PCA -> normalize -> cluster -> t-SNE -> evaluate -> plot.

Each stage reads and writes plain files in the output directory, so any stage
can be rerun on its own. Exit status is 0 on success, 1 when the
configuration is invalid and 2 when a stage fails.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import dataset, graph, kmeans, metrics, pca, plotting, rcc, tsne
from .config import ConfigError, PipelineConfig, format_config, parse_config

logger = logging.getLogger("rcclust")

FEATURES = "features.csv"
LABELS_TRUE = "labels_true.csv"
EMBEDDING = "embedding.csv"
METRICS = "metrics.json"
CONFIG_ECHO = "config_resolved.txt"


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage


def labels_pred_name(algorithm: str) -> str:
    return f"labels_pred_{algorithm}.csv"


@contextlib.contextmanager
def staged_outputs(output_dir: Path):
    """Yield a scratch directory whose files are moved into ``output_dir`` on success.

    On failure the scratch directory is discarded, so a failed run leaves no
    partial artifacts behind.
    """
    output_dir.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".staging-", dir=output_dir))
    try:
        yield scratch
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    for item in sorted(scratch.iterdir()):
        item.replace(output_dir / item.name)
    scratch.rmdir()


@contextlib.contextmanager
def stage(name: str):
    logger.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _find(name: str, *dirs: Path) -> Path:
    for d in dirs:
        if (d / name).exists():
            return d / name
    raise FileNotFoundError(f"missing input artifact {name} (run the earlier stage first)")


# stage implementations; ``out`` is the scratch dir, ``done`` the output dir

def run_ingest(cfg: PipelineConfig, out: Path) -> tuple[np.ndarray, dataset.LabelVector]:
    with stage("ingest"):
        ingest_cfg = dataset.IngestConfig(
            root_dir=Path(cfg.dataset_dir),
            resize=cfg.resize,
            grayscale=cfg.grayscale,
            normalization_mode=cfg.normalization_mode,
        )
        X, labels = dataset.load_image_dataset(ingest_cfg)
        if cfg.class_merge:
            labels = labels.merge(cfg.merge_map)
        logger.info("ingested %d images with %d features, classes %s",
                    X.shape[0], X.shape[1], list(labels.class_names))
    with stage("pca"):
        model = pca.pca_fit(X, cfg.pca_components)
        Z = pca.pca_transform(model, X)
    with stage("normalize"):
        F = dataset.normalize(Z, cfg.normalization_mode)
        dataset.write_matrix_csv(F, out / FEATURES)
        dataset.write_labels_csv(labels, out / LABELS_TRUE)
    return F, labels


def _cluster_labels(result) -> dataset.LabelVector:
    names = tuple(f"cluster_{j}" for j in range(int(result.labels.max()) + 1))
    return dataset.LabelVector(result.labels, names)


def run_cluster(cfg: PipelineConfig, F: np.ndarray, n_classes: int, out: Path) -> dict:
    results = {}
    for algorithm in cfg.algorithms:
        with stage(f"cluster:{algorithm}"):
            if algorithm == "rcc":
                g = graph.assign_edge_weights(graph.mutual_knn_graph(F, cfg.knn_k),
                                              cfg.edge_weighting)
                state, result = rcc.rcc_fit(F, g, rcc.RccConfig(
                    max_iters=cfg.rcc_max_iters,
                    inner_iters_per_mu=cfg.rcc_inner_iters,
                    cluster_cut_factor=cfg.rcc_cut_factor,
                ))
                rcc.write_trace_csv(state, out / "rcc_trace.csv")
            else:
                k = cfg.kmeans_k or n_classes
                result = kmeans.kmeans_fit(F, kmeans.KmeansConfig(
                    k=k, n_init=cfg.kmeans_n_init, max_iters=cfg.kmeans_max_iters, seed=cfg.seed))
                kmeans.write_restart_report(result, out / "kmeans_restarts.json")
            dataset.write_labels_csv(_cluster_labels(result), out / labels_pred_name(algorithm))
            logger.info("%s produced %d clusters", algorithm, result.n_clusters)
            results[algorithm] = result.labels
    return results


def run_embed(cfg: PipelineConfig, F: np.ndarray, out: Path) -> np.ndarray:
    with stage("embed"):
        result = tsne.tsne_embed(F, tsne.TsneConfig(
            perplexity=cfg.tsne_perplexity,
            n_iters=cfg.tsne_n_iters,
            learning_rate=cfg.tsne_learning_rate,
            seed=cfg.seed,
        ))
        tsne.write_embedding_csv(result.Y, out / EMBEDDING)
    return result.Y


def run_evaluate(cfg: PipelineConfig, truth: dataset.LabelVector, preds: dict, out: Path) -> dict:
    with stage("evaluate"):
        report = {name: metrics.evaluate(labels, truth.labels, truth.class_names)
                  for name, labels in preds.items()}
        metrics.write_metrics_json(report, out / METRICS)
        for name, m in report.items():
            logger.info("%s: AMI=%.4f", name, m["ami"])
    return report


def run_plot(Y: np.ndarray, truth: dataset.LabelVector, preds: dict, out: Path) -> None:
    with stage("plot"):
        svg = plotting.render_scatter(Y, truth.labels, truth.class_names, title="true labels")
        (out / "scatter_true.svg").write_text(svg)
        for name, labels in preds.items():
            names = [f"cluster {j}" for j in range(int(labels.max()) + 1)]
            svg = plotting.render_scatter(Y, labels, names, title=f"{name} clusters")
            (out / f"scatter_{name}.svg").write_text(svg)


# command handlers

def _read_preds(cfg, done: Path) -> dict:
    preds = {}
    for algorithm in cfg.algorithms:
        path = done / labels_pred_name(algorithm)
        if path.exists():
            preds[algorithm] = dataset.read_labels_csv(path).labels
    if not preds:
        raise FileNotFoundError("no predicted label files found (run the cluster stage first)")
    return preds


def cmd_pipeline(cfg, out, done):
    F, truth = run_ingest(cfg, out)
    preds = run_cluster(cfg, F, truth.n_classes, out)
    Y = run_embed(cfg, F, out)
    run_evaluate(cfg, truth, preds, out)
    run_plot(Y, truth, preds, out)


def cmd_ingest(cfg, out, done):
    run_ingest(cfg, out)


def cmd_cluster(cfg, out, done):
    with stage("load"):
        F = dataset.read_matrix_csv(_find(FEATURES, done))
        truth = dataset.read_labels_csv(_find(LABELS_TRUE, done))
    run_cluster(cfg, F, truth.n_classes, out)


def cmd_embed(cfg, out, done):
    with stage("load"):
        F = dataset.read_matrix_csv(_find(FEATURES, done))
    run_embed(cfg, F, out)


def cmd_evaluate(cfg, out, done):
    with stage("load"):
        truth = dataset.read_labels_csv(_find(LABELS_TRUE, done))
        preds = _read_preds(cfg, done)
    run_evaluate(cfg, truth, preds, out)


def cmd_plot(cfg, out, done):
    with stage("load"):
        Y = dataset.read_matrix_csv(_find(EMBEDDING, done))
        truth = dataset.read_labels_csv(_find(LABELS_TRUE, done))
        preds = _read_preds(cfg, done)
    run_plot(Y, truth, preds, out)


COMMANDS = {
    "pipeline": cmd_pipeline,
    "ingest": cmd_ingest,
    "cluster": cmd_cluster,
    "embed": cmd_embed,
    "evaluate": cmd_evaluate,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcclust", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "pipeline"
                           else "run every stage")
        p.add_argument("--config", type=Path, help="key = value config file")
        p.add_argument("--output-dir", type=Path, help="override output_dir")
        p.add_argument("--seed", type=int, help="override seed")
        p.add_argument("--dataset-dir", type=Path, help="override dataset_dir")
    toy = sub.add_parser("make-toy", help="write a synthetic three-class image dataset")
    toy.add_argument("directory", type=Path)
    toy.add_argument("--n-per-class", type=int, default=40)
    toy.add_argument("--size", type=int, default=16)
    toy.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")

    if args.command == "make-toy":
        dataset.make_toy_dataset(args.directory, args.n_per_class, args.size, args.seed)
        return 0

    overrides = {
        "output_dir": str(args.output_dir) if args.output_dir else None,
        "seed": args.seed,
        "dataset_dir": str(args.dataset_dir) if args.dataset_dir else None,
    }
    try:
        cfg = parse_config(args.config, overrides)
    except (ConfigError, OSError, TypeError) as exc:
        print(f"rcclust: configuration error: {exc}", file=sys.stderr)
        return 1

    done = Path(cfg.output_dir)
    try:
        with staged_outputs(done) as out:
            (out / CONFIG_ECHO).write_text(format_config(cfg))
            COMMANDS[args.command](cfg, out, done)
    except Exception as exc:
        print(f"rcclust: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
