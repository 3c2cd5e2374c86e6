"""Rand index, cluster-usage histograms, synthetic segmentation benchmarks."""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .pipeline import Dataset, dataset_from_image

SCENARIOS = ("halves-overlap", "quadrants", "stripes")

# halves-overlap: per-channel noise sd, and the two half means sit 0.5 sd apart
HALVES_SD = 0.1
HALVES_BASE = np.array([0.45, 0.5, 0.55])
HALVES_SHIFT = 0.5 * HALVES_SD * np.ones(3) / np.sqrt(3.0)

BLOCK_SD = 0.05
BLOCK_COLOURS = np.array([
    [0.80, 0.20, 0.20],
    [0.20, 0.75, 0.25],
    [0.20, 0.25, 0.80],
    [0.85, 0.80, 0.20],
    [0.25, 0.80, 0.80],
])


def as_partition(labels):
    arr = np.asarray(labels)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("a partition is a non-empty 1-D label vector")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError("labels must be integers")
    return arr.astype(np.int64)


def rand_index(p, q):
    """Fraction of point pairs on which two partitions agree.

    Computed from the contingency table, so it costs O(N + |p| |q|).
    """
    p, q = as_partition(p), as_partition(q)
    if p.shape != q.shape:
        raise ValueError(f"partitions differ in length: {p.size} vs {q.size}")
    n = p.size
    if n < 2:
        return 1.0
    _, pi = np.unique(p, return_inverse=True)
    _, qi = np.unique(q, return_inverse=True)
    table = _kernels.contingency(pi.ravel(), qi.ravel(), int(pi.max()) + 1, int(qi.max()) + 1)

    def pairs(counts):
        counts = counts.astype(object)  # exact integers for any N
        return sum(c * (c - 1) // 2 for c in counts.ravel())

    total = n * (n - 1) // 2
    both = pairs(table)
    agree = total + 2 * both - pairs(table.sum(axis=1)) - pairs(table.sum(axis=0))
    return agree / total


@dataclass
class UsageHistogram:
    counts: list

    @property
    def active(self):
        return len(self.counts)

    def occupied(self, min_fraction):
        """Clusters holding at least ``min_fraction`` of all points."""
        total = sum(self.counts)
        return sum(1 for c in self.counts if c >= min_fraction * total)


def usage_histogram(labels_or_phi):
    """Descending point counts of the occupied clusters. A 2-D input is read
    as a responsibility matrix and hardened by row argmax."""
    arr = np.asarray(labels_or_phi)
    if arr.ndim == 2:
        arr = np.argmax(arr, axis=1)
    arr = as_partition(arr)
    _, counts = np.unique(arr, return_counts=True)
    return UsageHistogram(sorted((int(c) for c in counts), reverse=True))


def synth_image(height, width, scenario, seed=0):
    """(H, W, 3) uint8 image with planted segments and the row-major truth labels.

    halves-overlap: left and right halves drawn from Gaussians whose means are
        half a noise standard deviation apart, so colour barely separates them.
    quadrants: four well separated colours, one per quadrant.
    stripes: five vertical stripes of well separated colours.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    if height < 2 or width < 2:
        raise ValueError("synthetic images need at least 2 x 2 pixels")
    rng = np.random.default_rng(seed)
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    if scenario == "halves-overlap":
        truth = (cols >= width // 2).astype(np.int64)
        means = np.stack([HALVES_BASE, HALVES_BASE + HALVES_SHIFT])
        sd = HALVES_SD
    elif scenario == "quadrants":
        truth = 2 * (rows >= height // 2) + (cols >= width // 2)
        means = BLOCK_COLOURS[:4]
        sd = BLOCK_SD
    else:
        truth = np.minimum(cols * 5 // width, 4)
        means = BLOCK_COLOURS
        sd = BLOCK_SD
    pixels = means[truth] + sd * rng.standard_normal((height, width, 3))
    pixels = np.clip(np.rint(pixels * 255), 0, 255).astype(np.uint8)
    return pixels, truth.ravel().astype(np.int64)


def synth_spatial_gmm(height, width, scenario, seed=0):
    """Image-shaped Dataset with planted spatial segments, and its truth partition."""
    pixels, truth = synth_image(height, width, scenario, seed)
    return dataset_from_image(pixels), truth


def compare_report(runs, truth):
    """Rand index (percent) of each named partition against ``truth``.

    Returns (rows, text) where rows are (name, percent) pairs and text is an
    aligned table.
    """
    truth = as_partition(truth)
    rows = [(name, 100.0 * rand_index(labels, truth)) for name, labels in runs]
    width = max([len("method")] + [len(name) for name, _ in rows])
    lines = [f"{'method':<{width}}  rand_index_percent"]
    lines += [f"{name:<{width}}  {pct:18.2f}" for name, pct in rows]
    return rows, "\n".join(lines)


def write_scores(rows, path):
    """Tab-separated score table with a header row."""
    body = "".join(f"{name}\t{pct:.2f}\n" for name, pct in rows)
    Path(path).write_text("method\trand_index_percent\n" + body)


__all__ = ["Dataset", "SCENARIOS", "UsageHistogram", "as_partition", "compare_report",
           "rand_index", "synth_image", "synth_spatial_gmm", "usage_histogram",
           "write_scores"]
