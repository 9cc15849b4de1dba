"""Image ingestion, feature normalization and CSV persistence.

A dataset on disk is a directory with one subdirectory per class. Every
image is converted to grayscale, box-resampled to a fixed size, flattened
row-major and scaled to [0, 1].
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

logger = logging.getLogger(__name__)

NORMALIZATION_MODES = ("none", "global-norm", "zscore")
SUPPORTED_FORMATS = ("PNG", "JPEG")


class DatasetError(ValueError):
    """Raised for malformed dataset directories or data files."""


@dataclass(frozen=True)
class LabelVector:
    """Integer class index per sample plus the ordered class names."""

    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise DatasetError("labels must be one-dimensional")
        if len(self.class_names) < 1:
            raise DatasetError("at least one class name is required")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise DatasetError("label index out of range of class_names")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    def __len__(self):
        return len(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def merge(self, mapping: dict[str, str]) -> "LabelVector":
        """Rename classes via ``mapping`` and collapse classes sharing a name.

        Classes absent from ``mapping`` keep their name. The merged classes
        are ordered alphabetically, like freshly ingested directories.
        """
        unknown = set(mapping) - set(self.class_names)
        if unknown:
            raise DatasetError(f"class_merge refers to unknown classes: {sorted(unknown)}")
        renamed = [mapping.get(name, name) for name in self.class_names]
        new_names = sorted(set(renamed))
        lookup = np.array([new_names.index(name) for name in renamed], dtype=np.int64)
        return LabelVector(lookup[self.labels], tuple(new_names))


@dataclass(frozen=True)
class IngestConfig:
    root_dir: Path
    resize: tuple[int, int] = (128, 128)
    grayscale: bool = True
    normalization_mode: str = "global-norm"

    def __post_init__(self):
        width, height = self.resize
        if width < 1 or height < 1:
            raise DatasetError(f"resize dimensions must be >= 1, got {self.resize}")
        if self.normalization_mode not in NORMALIZATION_MODES:
            raise DatasetError(f"unknown normalization mode {self.normalization_mode!r}")
        object.__setattr__(self, "root_dir", Path(self.root_dir))


def check_matrix(X) -> np.ndarray:
    """Return ``X`` as a finite, non-empty 2-D float64 array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DatasetError(f"expected a non-empty 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DatasetError("matrix contains NaN or infinite values")
    return X


def _list_images(class_dir: Path) -> list[Path]:
    return sorted(
        (p for p in class_dir.iterdir() if p.is_file() and not p.name.startswith(".")),
        key=lambda p: p.name,
    )


def _decode(path: Path, size: tuple[int, int], grayscale: bool) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.format not in SUPPORTED_FORMATS:
                raise DatasetError(f"unsupported image format {img.format!r}: {path}")
            img = img.convert("L" if grayscale else "RGB")
            img = img.resize(size, resample=Image.Resampling.BOX)
            pixels = np.asarray(img, dtype=np.float64)
    except (UnidentifiedImageError, OSError) as exc:
        raise DatasetError(f"cannot decode image {path}: {exc}") from exc
    return pixels.reshape(-1) / 255.0


def load_image_dataset(cfg: IngestConfig) -> tuple[np.ndarray, LabelVector]:
    """Load a directory-per-class image tree into a feature matrix.

    Classes are indexed by the alphabetical rank of their directory name and
    rows within a class follow lexicographic filename order. Normalization is
    not applied here; see :func:`normalize`.

    Parameters
    ----------
    cfg : IngestConfig

    Returns
    -------
    X : ndarray, shape (n_images, width * height)
        Pixel values in [0, 1] (three channels per pixel when ``grayscale``
        is off).
    labels : LabelVector
    """
    root = cfg.root_dir
    if not root.is_dir():
        raise DatasetError(f"dataset directory does not exist: {root}")
    class_dirs = sorted((p for p in root.iterdir() if p.is_dir()), key=lambda p: p.name)
    if not class_dirs:
        raise DatasetError(f"no class subdirectories found in {root}")

    rows, labels = [], []
    for index, class_dir in enumerate(class_dirs):
        files = _list_images(class_dir)
        if not files:
            raise DatasetError(f"class directory has no images: {class_dir}")
        for path in files:
            rows.append(_decode(path, cfg.resize, cfg.grayscale))
            labels.append(index)
        logger.info("loaded %d images for class %r", len(files), class_dir.name)

    X = np.vstack(rows)
    return X, LabelVector(np.array(labels), tuple(p.name for p in class_dirs))


def normalize(X, mode: str = "global-norm") -> np.ndarray:
    """Normalize a feature matrix.

    ``none`` returns a copy, ``global-norm`` divides by the mean row norm and
    ``zscore`` standardizes every column with the population (divisor N)
    standard deviation; constant columns become zero.
    """
    X = check_matrix(X)
    if mode == "none":
        return X.copy()
    if mode == "global-norm":
        mean_norm = np.linalg.norm(X, axis=1).mean()
        if mean_norm == 0:
            return X.copy()
        return X / mean_norm
    if mode == "zscore":
        centered = X - X.mean(axis=0)
        std = X.std(axis=0)
        out = np.zeros_like(X)
        nonconst = std > 0
        out[:, nonconst] = centered[:, nonconst] / std[nonconst]
        return out
    raise DatasetError(f"unknown normalization mode {mode!r}")


# CSV persistence. Python's repr of a float is the shortest string that
# round-trips, so values survive write/read bit for bit.

def _fmt(value: float) -> str:
    return repr(float(value))


def write_matrix_csv(X, path: str | os.PathLike, header: Sequence[str] | None = None) -> None:
    X = check_matrix(X)
    if header is None:
        header = [f"c{j}" for j in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in X:
            writer.writerow([_fmt(v) for v in row])


def read_matrix_csv(path: str | os.PathLike) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}:{lineno}: ragged row with {len(row)} cells, expected {len(header)}"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-numeric cell in {row!r}") from None
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return check_matrix(np.array(rows))


def write_labels_csv(labels: LabelVector, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "label", "class_name"])
        for i, label in enumerate(labels.labels):
            writer.writerow([i, int(label), labels.class_names[label]])


def read_labels_csv(path: str | os.PathLike) -> LabelVector:
    """Read a labels file; class names are recovered from the label column.

    Label indices that never occur get a placeholder name so that indices
    stay aligned with ``class_names``.
    """
    labels: list[int] = []
    names: dict[int, str] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["index", "label", "class_name"]:
            raise DatasetError(f"{path}: expected header index,label,class_name")
        for lineno, row in enumerate(reader, start=2):
            if None in row or None in row.values():
                raise DatasetError(f"{path}:{lineno}: ragged row")
            try:
                index, label = int(row["index"]), int(row["label"])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer index or label") from None
            if index != len(labels):
                raise DatasetError(f"{path}:{lineno}: index gap, expected {len(labels)} got {index}")
            if label < 0:
                raise DatasetError(f"{path}:{lineno}: negative label")
            if names.setdefault(label, row["class_name"]) != row["class_name"]:
                raise DatasetError(f"{path}:{lineno}: label {label} has conflicting class names")
            labels.append(label)
    if not labels:
        raise DatasetError(f"{path}: no rows")
    class_names = tuple(names.get(i, f"<unused {i}>") for i in range(max(names) + 1))
    return LabelVector(np.array(labels), class_names)


def make_toy_dataset(root: str | os.PathLike, n_per_class: int = 40, size: int = 16,
                     seed: int = 0) -> Path:
    """Render a synthetic three-class image dataset as PNG files.

    Each class is a bright Gaussian spot at its own position plus pixel
    noise, so the classes form well-separated blobs in pixel space.
    """
    rng = np.random.default_rng(seed)
    root = Path(root)
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    centres = {"alpha": (0.25, 0.25), "beta": (0.75, 0.3), "gamma": (0.5, 0.8)}
    for name, (cx, cy) in centres.items():
        class_dir = root / name
        class_dir.mkdir(parents=True, exist_ok=True)
        spot = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * 0.12 ** 2))
        for i in range(n_per_class):
            img = 0.8 * spot + 0.05 * rng.standard_normal(spot.shape) + 0.1
            img = np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)
            Image.fromarray(img).save(class_dir / f"{name}_{i:04d}.png")
    return root
