"""Data ingestion, k-means, end-to-end LDDP runs and result persistence."""
from dataclasses import asdict, dataclass, field
import csv
import json
import logging
from pathlib import Path
import time
import warnings

import numpy as np
from PIL import Image

from . import _kernels
from .emission import GaussianEmission, empirical_prior, init_from_kmeans
from .kernel import KernelParams, build_nystrom, grid_landmarks, normalize_locations
from .vi import LddpConfig, fit, initial_state

log = logging.getLogger(__name__)

# 20 maximally distinct colours; label values past 19 reuse them cyclically
PALETTE = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (67, 99, 216),
    (245, 130, 49), (145, 30, 180), (66, 212, 244), (240, 50, 230),
    (191, 239, 69), (250, 190, 212), (70, 153, 144), (220, 190, 255),
    (154, 99, 36), (255, 250, 200), (128, 0, 0), (170, 255, 195),
    (128, 128, 0), (255, 216, 177), (0, 0, 117), (169, 169, 169),
]


@dataclass
class Dataset:
    features: np.ndarray
    locations: np.ndarray
    source_shape: tuple = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.locations = np.ascontiguousarray(self.locations, dtype=np.float64)
        if self.features.ndim != 2 or self.locations.ndim != 2:
            raise ValueError("features and locations must be 2-D arrays")
        if self.features.shape[0] != self.locations.shape[0]:
            raise ValueError("features and locations differ in length")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.locations))):
            raise ValueError("dataset contains non-finite values")
        if self.source_shape is not None:
            self.source_shape = tuple(int(s) for s in self.source_shape)
            if self.source_shape[0] * self.source_shape[1] != len(self):
                raise ValueError("source_shape does not match the number of points")

    def __len__(self):
        return self.features.shape[0]


def pixel_locations(height, width):
    """(row / (H-1), col / (W-1)) per pixel in row-major order; a single row
    or column maps to 0."""
    rows = np.arange(height) / (height - 1) if height > 1 else np.zeros(1)
    cols = np.arange(width) / (width - 1) if width > 1 else np.zeros(1)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.column_stack([rr.ravel(), cc.ravel()])


def dataset_from_image(pixels):
    """Dataset from an (H, W, 3) uint8 array."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError("expected an H x W x 3 image")
    h, w, _ = pixels.shape
    return Dataset(features=pixels.reshape(-1, 3).astype(np.float64) / 255.0,
                   locations=pixel_locations(h, w), source_shape=(h, w))


def load_image(path):
    """Read an 8-bit image as RGB pixels in [0, 1] with normalised pixel locations."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    return dataset_from_image(pixels)


def _resolve_columns(header, cols, line_hint):
    out = []
    for col in cols:
        if isinstance(col, int) or (isinstance(col, str) and col.isdigit()):
            idx = int(col)
            if not 0 <= idx < len(header):
                raise ValueError(f"column index {idx} out of range (line {line_hint})")
            out.append(idx)
        elif col in header:
            out.append(header.index(col))
        else:
            raise ValueError(f"unknown column {col!r}; header is {header}")
    return out


def load_table(path, feature_cols, location_cols, delimiter=","):
    """Read a delimited text table with a header row.

    ``feature_cols`` and ``location_cols`` name columns by header label or
    zero-based index. Locations are min-max normalised per column; a constant
    location column becomes all zeros with a warning.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    rows = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty table")
    header = [c.strip() for c in rows[0][1]]
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows after the header")
    fidx = _resolve_columns(header, feature_cols, rows[0][0])
    lidx = _resolve_columns(header, location_cols, rows[0][0])
    if not fidx or not lidx:
        raise ValueError("need at least one feature and one location column")
    values = np.empty((len(rows) - 1, len(header)))
    for out_row, (lineno, row) in enumerate(rows[1:]):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                values[out_row, j] = float(cell)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric cell {cell!r}") from None
    locations, constant = normalize_locations(values[:, lidx])
    for c in constant:
        warnings.warn(f"location column {header[lidx[c]]!r} is constant; mapped to 0",
                      UserWarning, stacklevel=2)
    return Dataset(features=values[:, fidx], locations=locations)


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: list


def _kmeans_pp(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = np.einsum("ni,ni->n", x - x[first], x - x[first])
    for j in range(1, k):
        total = d2.sum()
        idx = int(rng.choice(n, p=d2 / total)) if total > 0 else int(rng.integers(n))
        centers[j] = x[idx]
        diff = x - x[idx]
        d2 = np.minimum(d2, np.einsum("ni,ni->n", diff, diff))
    return centers


def lloyd(features, k, seed=0, max_iters=300):
    """k-means++ seeding followed by Lloyd iterations; keeps the inertia
    after every assignment step. Empty clusters keep their centre."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    n = x.shape[0]
    if k < 1 or n < k:
        raise ValueError(f"need 1 <= k <= N (k={k}, N={n})")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(x, k, rng)
    labels, dist = _kernels.nearest_centroid(x, centers)
    inertia = [float(dist.sum())]
    for _ in range(max_iters):
        counts = np.bincount(labels, minlength=k)
        sums = np.stack([np.bincount(labels, weights=x[:, j], minlength=k)
                         for j in range(x.shape[1])], axis=1)
        filled = counts > 0
        centers = centers.copy()
        centers[filled] = sums[filled] / counts[filled, None]
        new_labels, dist = _kernels.nearest_centroid(x, centers)
        inertia.append(float(dist.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return KMeansResult(labels=labels, centers=centers, inertia=inertia)


def kmeans(features, k, seed=0, max_iters=300):
    """Hard k-means labels, deterministic given ``seed``."""
    return lloyd(features, k, seed, max_iters).labels


def kmeans_5d_baseline(dataset, k, seed=0, use_location=True):
    """k-means on [RGB, normalised pixel location] (RGB only when
    ``use_location`` is false)."""
    if dataset.source_shape is None:
        raise ValueError("the 5-D k-means baseline needs an image-backed dataset")
    x = dataset.features
    if use_location:
        x = np.hstack([x, dataset.locations])
    return kmeans(x, k, seed)


@dataclass
class RunReport:
    config: dict
    seed: int
    mode: str
    elbo_trace: list
    labels: np.ndarray
    usage_counts: list
    wall_clock: float
    warnings: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    n_landmarks: int = 0
    backend: str = _kernels.BACKEND
    source_shape: tuple = None
    error: str = None
    state: object = field(default=None, repr=False)

    def to_dict(self):
        usage = sorted((c for c in self.usage_counts if c > 0), reverse=True)
        return {
            "mode": self.mode,
            "seed": self.seed,
            "config": self.config,
            "backend": self.backend,
            "n_points": int(len(self.labels)),
            "source_shape": list(self.source_shape) if self.source_shape else None,
            "n_landmarks": self.n_landmarks,
            "iterations": self.iterations,
            "converged": self.converged,
            "wall_clock_seconds": round(self.wall_clock, 3),
            "elbo_trace": [float(v) for v in self.elbo_trace],
            "usage_counts": [int(c) for c in self.usage_counts],
            "usage_histogram": [int(c) for c in usage],
            "active_clusters": len(usage),
            "warnings": list(self.warnings),
            "error": self.error,
        }


def run_lddp(dataset, cfg=None, params=None, seed=0, landmark_frac=0.05,
             jitter=None, out_dir=None, callback=None):
    """Initialise per the standard protocol and fit.

    f = 0, a = b = 1, emission prior from the data, q(mu) means from k-means
    on the features. Labels are the per-point argmax of phi (lowest index on
    ties). With ``out_dir`` set, outputs are written there, including a
    partial report when the fit aborts.
    """
    cfg = cfg or LddpConfig()
    params = params or KernelParams()
    start = time.perf_counter()
    n = len(dataset)
    mode = "GMM mode" if cfg.gmm_mode else "LDDP"
    config = {**asdict(cfg), "sigma_f": params.sigma_f, "sigma_l": params.sigma_l,
              "landmark_frac": landmark_frac, "jitter": jitter}
    prior = empirical_prior(dataset.features)
    init_labels = kmeans(dataset.features, min(cfg.k0, n), seed)
    post = init_from_kmeans(dataset.features, init_labels, prior, cfg.k0)
    emission = GaussianEmission(dataset.features, prior)
    kernel = None
    n_landmarks = 0
    if not cfg.gmm_mode:
        marks = grid_landmarks(dataset.locations, landmark_frac)
        kernel = build_nystrom(dataset.locations, marks, params, jitter)
        n_landmarks = kernel.n_landmarks
        config["jitter"] = kernel.jitter
    state = initial_state(emission, post, cfg, n)
    seen = []

    def _watch(it, st, value):
        seen.append(value)
        if callback is not None:
            callback(it, st, value)

    try:
        state, trace = fit(emission, cfg, kernel, state, callback=_watch)
    except Exception as exc:
        if out_dir is not None:
            labels = np.argmax(state.phi, axis=1)
            partial = RunReport(config=config, seed=seed, mode=mode, elbo_trace=seen,
                                labels=labels,
                                usage_counts=np.bincount(labels, minlength=cfg.k0).tolist(),
                                wall_clock=time.perf_counter() - start,
                                iterations=len(seen), n_landmarks=n_landmarks,
                                source_shape=dataset.source_shape, error=str(exc))
            write_outputs(partial, out_dir)
        raise
    labels = np.argmax(state.phi, axis=1)
    report = RunReport(
        config=config, seed=seed, mode=mode, elbo_trace=list(trace.values),
        labels=labels, usage_counts=np.bincount(labels, minlength=cfg.k0).tolist(),
        wall_clock=time.perf_counter() - start, warnings=list(trace.warnings),
        iterations=len(trace.values) - 1, converged=trace.converged,
        n_landmarks=n_landmarks, source_shape=dataset.source_shape, state=state)
    if out_dir is not None:
        write_outputs(report, out_dir)
    return report


def save_labels_txt(labels, path):
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels))


def load_labels_txt(path):
    path = Path(path)
    values = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(int(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not an integer label: {line!r}") from None
    if not values:
        raise ValueError(f"{path}: no labels")
    return np.array(values, dtype=np.int64)


def save_label_image(labels, shape, path):
    """Palette PNG whose pixel indices are the labels (which must be < 256)."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() > 255):
        raise ValueError("palette images hold labels in [0, 255]")
    img = Image.fromarray(labels.reshape(shape).astype(np.uint8), mode="P")
    flat = []
    for i in range(256):
        flat.extend(PALETTE[i % len(PALETTE)])
    img.putpalette(flat)
    img.save(path, format="PNG")


def load_label_image(path):
    with Image.open(path) as img:
        return np.asarray(img, dtype=np.int64)


def write_report(report, path):
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")


def write_outputs(report, out_dir):
    """labels.txt, report.txt, and labels.png for image-backed runs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_labels_txt(report.labels, out / "labels.txt")
    if report.source_shape is not None:
        save_label_image(report.labels, report.source_shape, out / "labels.png")
    write_report(report, out / "report.txt")
