"""Flat ``key = value`` pipeline configuration files."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import NORMALIZATION_MODES
from .graph import WEIGHTINGS

ALGORITHMS = ("rcc", "kmeanspp")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    dataset_dir: str
    output_dir: str = "output"
    resize: tuple[int, int] = (128, 128)
    grayscale: bool = True
    pca_components: int = 80
    normalization_mode: str = "global-norm"
    knn_k: int = 30
    edge_weighting: str = "degree"
    algorithms: tuple[str, ...] = ALGORITHMS
    kmeans_k: int = 0  # 0: use the number of (merged) true classes
    kmeans_n_init: int = 10
    kmeans_max_iters: int = 300
    rcc_max_iters: int = 100
    rcc_inner_iters: int = 4
    rcc_cut_factor: float = 1.0
    tsne_perplexity: float = 30.0
    tsne_n_iters: int = 1000
    tsne_learning_rate: float = 200.0
    seed: int = 0
    class_merge: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def validate(self) -> "PipelineConfig":
        def positive(key):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}")

        if not self.dataset_dir:
            raise ConfigError("dataset_dir is required")
        for key in ("pca_components", "knn_k", "kmeans_n_init", "kmeans_max_iters",
                    "rcc_max_iters", "rcc_inner_iters", "rcc_cut_factor",
                    "tsne_perplexity", "tsne_n_iters", "tsne_learning_rate"):
            positive(key)
        if self.kmeans_k < 0:
            raise ConfigError(f"kmeans_k must be >= 0, got {self.kmeans_k}")
        if min(self.resize) < 1:
            raise ConfigError(f"resize must be at least 1x1, got {self.resize}")
        if self.normalization_mode not in NORMALIZATION_MODES:
            raise ConfigError(f"normalization_mode must be one of {NORMALIZATION_MODES}")
        if self.edge_weighting not in WEIGHTINGS:
            raise ConfigError(f"edge_weighting must be one of {WEIGHTINGS}")
        if not self.algorithms:
            raise ConfigError("algorithms must name at least one algorithm")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ConfigError(f"algorithms: unknown {sorted(bad)}, choose from {ALGORITHMS}")
        return self

    @property
    def merge_map(self) -> dict[str, str]:
        return dict(self.class_merge)


_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _parse_bool(text):
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_resize(text):
    parts = text.lower().replace(" ", "").split("x")
    if len(parts) != 2:
        raise ValueError(f"expected WIDTHxHEIGHT, got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_merge(text):
    pairs = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        src, sep, dst = item.partition("->")
        if not sep or not src.strip() or not dst.strip():
            raise ValueError(f"expected 'source -> target', got {item!r}")
        pairs.append((src.strip(), dst.strip()))
    return tuple(pairs)


def _parse_value(key, text):
    if key == "resize":
        return _parse_resize(text)
    if key == "grayscale":
        return _parse_bool(text)
    if key == "algorithms":
        return tuple(s.strip() for s in text.split(",") if s.strip())
    if key == "class_merge":
        return _parse_merge(text)
    default = _FIELDS[key].default
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def _format_value(key, value):
    if key == "resize":
        return f"{value[0]}x{value[1]}"
    if key == "algorithms":
        return ",".join(value)
    if key == "class_merge":
        return ", ".join(f"{src} -> {dst}" for src, dst in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str, overrides: dict | None = None) -> PipelineConfig:
    """Parse config text; ``overrides`` (already typed) win over file values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    if not values.get("dataset_dir"):
        raise ConfigError("dataset_dir is required (config key or --dataset-dir)")
    return PipelineConfig(**values).validate()


def parse_config(path: str | os.PathLike | None, overrides: dict | None = None) -> PipelineConfig:
    text = Path(path).read_text() if path is not None else ""
    return parse_config_text(text, overrides)


def format_config(cfg: PipelineConfig) -> str:
    """Every effective setting, one ``key = value`` line each."""
    lines = [f"{name} = {_format_value(name, getattr(cfg, name))}" for name in _FIELDS]
    return "\n".join(lines) + "\n"
