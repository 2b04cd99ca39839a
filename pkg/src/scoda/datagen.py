"""Synthetic multi-domain benchmark generation and dataset I/O.

Source domains are Gaussian class blobs with seeded random means kept at
least four standard deviations apart.  A target domain is the same draw
pushed through a controllable shift: Givens rotations over seeded
coordinate pairs, a global scale, a per-dimension offset, then additive
noise -- in that order.

Seed material is split into fixed purpose streams so that every stage
can be reproduced independently: [seed, 0] class means, [seed, 1] base
samples, [seed, 2] shift geometry (coordinate pairing and offset
direction), [seed, 3] target noise.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError

# geometry constants for synthetic sources: blob means are drawn
# uniformly from a box of this half-width around center * ones(dim),
# with per-class standard deviation SIGMA and a 4*sigma minimum
# pairwise separation enforced by rejection
BOX_HALF_WIDTH = 0.7
SIGMA = 0.3
CENTER = 0.7
MIN_SEPARATION_SIGMAS = 4.0
_MAX_REJECTION_TRIES = 10000

__all__ = [
    "DomainDataset",
    "DomainShiftSpec",
    "AugmentSpec",
    "default_shift",
    "make_domain_pair",
    "augment_view",
    "save_dataset",
    "load_dataset",
    "split_dataset",
]


@dataclass
class DomainDataset:
    features: np.ndarray
    labels: np.ndarray
    domain_id: str
    n_classes: int

    def __post_init__(self):
        if len(self.labels) != self.features.shape[0]:
            raise DataError(
                f"{len(self.labels)} labels for {self.features.shape[0]} samples")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DataError(f"labels out of range [0, {self.n_classes})")

    @property
    def n(self):
        return self.features.shape[0]


@dataclass(frozen=True)
class DomainShiftSpec:
    rotation_degrees: float = 30.0
    mean_shift: float = 1.0
    scale: float = 1.2
    noise_sigma: float = 0.3

    def __post_init__(self):
        if self.scale <= 0:
            raise DataError(f"shift scale must be > 0, got {self.scale}")
        if self.noise_sigma < 0:
            raise DataError(f"shift noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class AugmentSpec:
    noise_sigma: float = 0.0
    scale_jitter: float = 0.0
    dropout_prob: float = 0.15

    def __post_init__(self):
        if not 0.0 <= self.dropout_prob < 1.0:
            raise DataError(f"dropout_prob must be in [0, 1), got {self.dropout_prob}")


def default_shift() -> DomainShiftSpec:
    return DomainShiftSpec()


def make_domain_pair(seed, n_classes: int, dim: int, n_per_class: int,
                     shift: DomainShiftSpec):
    """Generate a (source, target) pair sharing class structure.

    Returns two DomainDatasets.  The target applies rotation -> scale ->
    mean shift -> noise to the source sample matrix, so with a null
    shift (0 deg, offset 0, scale 1, sigma 0) the targets are bit-equal
    to the source.
    """
    if dim < 2 or n_classes < 2 or n_per_class < 10:
        raise DataError(
            f"need dim >= 2, n_classes >= 2, n_per_class >= 10; "
            f"got {dim}, {n_classes}, {n_per_class}")

    rng_means = np.random.default_rng([seed, 0])
    g0 = CENTER * np.ones(dim)
    min_sep = MIN_SEPARATION_SIGMAS * SIGMA
    for _ in range(_MAX_REJECTION_TRIES):
        means = g0 + rng_means.uniform(-BOX_HALF_WIDTH, BOX_HALF_WIDTH, (n_classes, dim))
        d = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=2)
        if d[np.triu_indices(n_classes, 1)].min() >= min_sep:
            break
    else:
        raise DataError(
            f"could not place {n_classes} class means {min_sep:g} apart in {dim} dims")

    rng_base = np.random.default_rng([seed, 1])
    feats = np.concatenate(
        [means[c] + SIGMA * rng_base.standard_normal((n_per_class, dim))
         for c in range(n_classes)])
    labels = np.repeat(np.arange(n_classes), n_per_class)

    rng_geom = np.random.default_rng([seed, 2])
    perm = rng_geom.permutation(dim)
    pairs = [(perm[2 * i], perm[2 * i + 1]) for i in range(dim // 2)]
    offset = shift.mean_shift * rng_geom.uniform(-1, 1, dim)

    t = feats.copy()
    theta = np.deg2rad(shift.rotation_degrees)
    c, s = np.cos(theta), np.sin(theta)
    for (i, j) in pairs:
        xi, xj = t[:, i].copy(), t[:, j].copy()
        t[:, i] = c * xi - s * xj
        t[:, j] = s * xi + c * xj
    t *= shift.scale
    t += offset
    if shift.noise_sigma > 0:
        rng_noise = np.random.default_rng([seed, 3])
        t += shift.noise_sigma * rng_noise.standard_normal(t.shape)

    source = DomainDataset(feats, labels, "source", n_classes)
    target = DomainDataset(t, labels.copy(), "target", n_classes)
    return source, target


def augment_view(x: np.ndarray, aug: AugmentSpec, seed) -> np.ndarray:
    """One stochastic view: x' = (x (*) dropout_mask) * jitter + noise.

    seed may be seed material or an existing Generator (a training loop
    passes its stream so consecutive views differ).  Components set to
    zero draw nothing, keeping stream consumption minimal.
    """
    rng = np.random.default_rng(seed)
    out = x.copy()
    if aug.dropout_prob > 0:
        out = out * (rng.uniform(size=x.shape) >= aug.dropout_prob)
    if aug.scale_jitter > 0:
        out = out * (1 + rng.uniform(-aug.scale_jitter, aug.scale_jitter, (x.shape[0], 1)))
    if aug.noise_sigma > 0:
        out = out + aug.noise_sigma * rng.standard_normal(x.shape)
    return out


# ---------------------------------------------------------------------------
# dataset files


def save_dataset(ds: DomainDataset, path):
    """Text format: comment header, CSV header, one row per sample.

    Floats are written with repr (shortest round-trip form), so loading
    recovers them bit-exactly.
    """
    D = ds.features.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(f"# scoda-dataset v1 domain={ds.domain_id} classes={ds.n_classes}\n")
        fh.write(",".join([f"f{j}" for j in range(D)] + ["label"]) + "\n")
        for i in range(ds.n):
            row = ",".join(repr(float(v)) for v in ds.features[i])
            fh.write(f"{row},{int(ds.labels[i])}\n")


def load_dataset(path) -> DomainDataset:
    try:
        with open(path, "r", newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise DataError(f"cannot read dataset {path}: {e}") from e
    if not lines or not lines[0].startswith("# scoda-dataset v1 "):
        raise DataError(f"{path}:1: missing 'scoda-dataset v1' header")
    # header layout: "# scoda-dataset v1 domain=<id> classes=<K>"
    fields = dict(tok.split("=", 1) for tok in lines[0].split()[3:] if "=" in tok)
    if "domain" not in fields or "classes" not in fields:
        raise DataError(f"{path}:1: header must carry domain=<id> classes=<K>")
    try:
        n_classes = int(fields["classes"])
    except ValueError as e:
        raise DataError(f"{path}:1: classes must be an integer") from e
    if len(lines) < 2:
        raise DataError(f"{path}:2: missing column header")
    cols = lines[1].split(",")
    if cols[-1] != "label" or any(c != f"f{j}" for j, c in enumerate(cols[:-1])):
        raise DataError(f"{path}:2: column header must be f0,...,f{{D-1}},label")
    D = len(cols) - 1

    feats, labels = [], []
    for ln, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != D + 1:
            raise DataError(f"{path}:{ln}: expected {D + 1} fields, got {len(parts)}")
        try:
            feats.append([float(v) for v in parts[:-1]])
            lab = int(parts[-1])
        except ValueError as e:
            raise DataError(f"{path}:{ln}: unparseable value: {e}") from e
        if not 0 <= lab < n_classes:
            raise DataError(f"{path}:{ln}: label {lab} out of range [0, {n_classes})")
        labels.append(lab)
    if not feats:
        raise DataError(f"{path}: no samples")
    return DomainDataset(np.array(feats, dtype=np.float64),
                         np.array(labels, dtype=np.int64),
                         fields["domain"], n_classes)


def split_dataset(ds: DomainDataset, fraction: float, seed):
    """Seeded stratified split; returns (part_a, part_b), disjoint and exhaustive.

    Per class, a seeded permutation assigns the first floor(fraction * n_c)
    samples to part_a and the rest to part_b; indices are re-sorted so each
    part preserves the original row order.
    """
    if not 0.0 < fraction < 1.0:
        raise DataError(f"split fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    a_idx, b_idx = [], []
    for c in range(ds.n_classes):
        ci = np.flatnonzero(ds.labels == c)
        if len(ci) < 2:
            raise DataError(f"class {c} has {len(ci)} sample(s); need >= 2 to split")
        p = rng.permutation(ci)
        k = int(fraction * len(ci))
        a_idx += list(p[:k])
        b_idx += list(p[k:])
    a_idx = np.array(sorted(a_idx), dtype=np.int64)
    b_idx = np.array(sorted(b_idx), dtype=np.int64)

    def take(idx, tag):
        return DomainDataset(ds.features[idx].copy(), ds.labels[idx].copy(),
                             f"{ds.domain_id}/{tag}", ds.n_classes)

    return take(a_idx, "a"), take(b_idx, "b")
