"""Warped-roll structural causal model: sampling and counterfactual pairing.

Observations live on one of two swiss-roll sheets selected by the binary
attribute ``a``: the attribute scales the spiral radius (w = 1 + a/2), the
intrinsic angle ``u`` drives both spiral coordinates and the label, and
the height ``v`` fills the third feature. A counterfactual observation
reuses the same (u, v) with the attribute flipped, so pairs share their
intrinsic coordinates by construction.

The height scale matches the classic swiss roll, where the sheet is about
as tall as the spiral is wide. A much smaller height makes the third
feature invisible to gradient training (the autoencoder flatly ignores it
at desk scale), which collapses the manifold to one intrinsic dimension
and empties the geometry comparison of content.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FormatError
from .net import write_atomic

U_MAX = 4.0 * math.pi
HEIGHT_SCALE = 12.0
DEFAULT_LABEL_THRESHOLD = 2.0 * math.pi
DATASET_FORMAT = "geofair-dataset/1"
DATASET_HEADER = "u,v,a,y,x1,x2,x3,xcf1,xcf2,xcf3"
TRAIN_FRACTION, VAL_FRACTION = 0.70, 0.15


def structural_map(u, v, a):
    """Observation (x1, x2, x3) generated from intrinsic (u, v) under ``a``."""
    u = float(u)
    v = float(v)
    if a not in (0, 1):
        raise DomainError(f"attribute must be 0 or 1, got {a!r}")
    if not 0.0 <= u <= U_MAX:
        raise DomainError(f"u={u} outside [0, {U_MAX}]")
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"v={v} outside [0, 1]")
    w = 1.0 + 0.5 * a
    return np.array(
        [u * w * math.cos(u), u * w * math.sin(u), HEIGHT_SCALE * v]
    )


@dataclass
class SampleRecord:
    """One draw: intrinsic coordinates, attribute, factual/counterfactual
    observations, and the label (a function of ``u`` alone)."""

    u: float
    v: float
    a: int
    x: np.ndarray
    x_cf: np.ndarray
    y: int


@dataclass
class DatasetSplit:
    train: list
    validation: list
    test: list
    seed: int
    n: int
    label_threshold: float

    @property
    def sizes(self):
        return (len(self.train), len(self.validation), len(self.test))

    def all_records(self):
        return self.train + self.validation + self.test


def _balanced_attributes(count, rng):
    # exact balance: |#ones - #zeros| <= 1, order shuffled
    arr = np.array([0] * ((count + 1) // 2) + [1] * (count // 2))
    rng.shuffle(arr)
    return arr


def _sample_records(count, rng, label_threshold):
    records = []
    attrs = _balanced_attributes(count, rng)
    for a in attrs:
        u = rng.uniform(0.0, U_MAX)
        v = rng.uniform(0.0, 1.0)
        a = int(a)
        records.append(
            SampleRecord(
                u=u,
                v=v,
                a=a,
                x=structural_map(u, v, a),
                x_cf=structural_map(u, v, 1 - a),
                y=int(u > label_threshold),
            )
        )
    return records


def split_sizes(n):
    n_train = int(round(n * TRAIN_FRACTION))
    n_val = int(round(n * VAL_FRACTION))
    n_test = n - n_train - n_val
    return n_train, n_val, n_test


def sample_dataset(n, seed, label_threshold=DEFAULT_LABEL_THRESHOLD):
    """Draw a full dataset: u ~ U(0, 4pi), v ~ U(0, 1), balanced ``a``.

    Splits are drawn sequentially from one seeded generator (70/15/15), so
    they are disjoint by construction and bit-reproducible from (n, seed).
    """
    if n < 10:
        raise ValueError(f"need at least 10 samples, got {n}")
    rng = np.random.default_rng(int(seed))
    n_train, n_val, n_test = split_sizes(n)
    return DatasetSplit(
        train=_sample_records(n_train, rng, label_threshold),
        validation=_sample_records(n_val, rng, label_threshold),
        test=_sample_records(n_test, rng, label_threshold),
        seed=int(seed),
        n=int(n),
        label_threshold=float(label_threshold),
    )


def _fmt(x):
    return repr(float(x))


def export_dataset(split, path):
    """Write rows (train, validation, test order) plus a metadata sidecar."""
    lines = [DATASET_HEADER]
    for r in split.all_records():
        lines.append(
            ",".join(
                [_fmt(r.u), _fmt(r.v), str(r.a), str(r.y)]
                + [_fmt(c) for c in r.x]
                + [_fmt(c) for c in r.x_cf]
            )
        )
    write_atomic(path, "\n".join(lines) + "\n")
    meta = {
        "format": DATASET_FORMAT,
        "seed": split.seed,
        "n": split.n,
        "label_threshold": split.label_threshold,
        "sizes": list(split.sizes),
        "height_scale": HEIGHT_SCALE,
    }
    write_atomic(metadata_path(path), json.dumps(meta, sort_keys=True))


def metadata_path(csv_path):
    return os.fspath(csv_path) + ".meta.json"


def import_dataset(path):
    """Read back an exported dataset, restoring the split boundaries."""
    with open(metadata_path(path), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format") != DATASET_FORMAT:
        raise FormatError(f"unsupported dataset format {meta.get('format')!r}")
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != DATASET_HEADER:
        raise FormatError("dataset header does not match the expected columns")
    records = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 10:
            raise FormatError(f"dataset row has {len(parts)} fields, wanted 10")
        u, v = float(parts[0]), float(parts[1])
        a, y = int(parts[2]), int(parts[3])
        x = np.array([float(c) for c in parts[4:7]])
        x_cf = np.array([float(c) for c in parts[7:10]])
        records.append(SampleRecord(u=u, v=v, a=a, x=x, x_cf=x_cf, y=y))
    n_train, n_val, n_test = meta["sizes"]
    if n_train + n_val + n_test != len(records):
        raise FormatError("metadata sizes disagree with the row count")
    return DatasetSplit(
        train=records[:n_train],
        validation=records[n_train : n_train + n_val],
        test=records[n_train + n_val :],
        seed=int(meta["seed"]),
        n=int(meta["n"]),
        label_threshold=float(meta["label_threshold"]),
    )


def records_arrays(records):
    """Column arrays (u, v, a, y, x, x_cf) for a list of records."""
    u = np.array([r.u for r in records])
    v = np.array([r.v for r in records])
    a = np.array([r.a for r in records], dtype=np.int64)
    y = np.array([r.y for r in records], dtype=np.int64)
    x = np.stack([r.x for r in records])
    x_cf = np.stack([r.x_cf for r in records])
    return u, v, a, y, x, x_cf
