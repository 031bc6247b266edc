"""Numeric training matrices with train-fitted standardization.

Binary matrix layout (all little-endian)::

    b"HFM1"                      magic
    uint32                       header length h
    h bytes                      UTF-8 JSON {"schema": [...], "scaler": {...}}
    uint64 n, uint64 d           dimensions
    n*d float64                  rows, row-major
    n uint8                      labels
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import HitforgeError

FEATURES = ("acousticness", "danceability", "energy", "instrumentalness", "liveness",
            "speechiness", "valence", "key", "loudness", "mode", "tempo",
            "time_signature", "duration_ms", "explicit", "artist_past_hits")
# outcome fields: derived from plays or from the chart itself
LEAKING = frozenset({"popularity", "weeks", "rank", "score", "billboard_hit"})
PASSTHROUGH = frozenset({"mode", "explicit"})
_MAGIC = b"HFM1"


class FeatureError(HitforgeError):
    pass


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        leaked = LEAKING.intersection(names)
        if leaked:
            raise FeatureError(f"label-leaking fields in schema: {sorted(leaked)}")
        unknown = [n for n in names if n not in FEATURES]
        if unknown:
            raise FeatureError(f"unknown features: {unknown}")
        if len(set(names)) != len(names):
            raise FeatureError("duplicate feature in schema")
        if not names:
            raise FeatureError("empty schema")

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)


DEFAULT_SCHEMA = FeatureSchema(FEATURES)


@dataclass(frozen=True)
class ScalerStats:
    """Per-feature z-score parameters; flag features pass through (mean 0, std 1)."""

    names: tuple
    mean: tuple
    std: tuple
    passthrough: tuple

    def to_dict(self) -> dict:
        return {"names": list(self.names), "mean": list(self.mean), "std": list(self.std),
                "passthrough": list(self.passthrough)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerStats":
        return cls(tuple(d["names"]), tuple(float(v) for v in d["mean"]),
                   tuple(float(v) for v in d["std"]), tuple(bool(v) for v in d["passthrough"]))


@dataclass
class FeatureMatrix:
    rows: np.ndarray
    labels: np.ndarray
    schema: FeatureSchema
    scaler: ScalerStats

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64).reshape(-1, len(self.schema))
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.rows.shape[0] != self.labels.shape[0]:
            raise FeatureError("rows and labels differ in length")
        if not np.all(np.isfinite(self.rows)):
            raise FeatureError("non-finite feature value")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise FeatureError("labels must be 0/1")

    def __len__(self):
        return self.rows.shape[0]


def raw_rows(tracks: Iterable, schema: FeatureSchema) -> np.ndarray:
    tracks = list(tracks)
    out = np.empty((len(tracks), len(schema)), dtype=np.float64)
    for i, t in enumerate(tracks):
        out[i] = [float(getattr(t, name)) for name in schema.names]
    return out


def fit_scaler(train: Sequence, schema: FeatureSchema = DEFAULT_SCHEMA) -> ScalerStats:
    """Population mean/std of every continuous feature over ``train`` only."""
    X = raw_rows(train, schema)
    if X.shape[0] == 0:
        raise FeatureError("cannot fit a scaler on an empty training set")
    means, stds, flags = [], [], []
    for j, name in enumerate(schema.names):
        if name in PASSTHROUGH:
            means.append(0.0)
            stds.append(1.0)
            flags.append(True)
            continue
        m = float(X[:, j].mean())
        s = float(X[:, j].std())
        if not s > 1e-12 * max(1.0, abs(m)):
            raise FeatureError(f"feature {name!r} is constant on the training set")
        means.append(m)
        stds.append(s)
        flags.append(False)
    return ScalerStats(schema.names, tuple(means), tuple(stds), tuple(flags))


def build_matrix(tracks: Sequence, schema: FeatureSchema, scaler: ScalerStats) -> FeatureMatrix:
    if tuple(scaler.names) != tuple(schema.names):
        raise FeatureError("scaler was fitted on a different schema")
    tracks = list(tracks)
    X = raw_rows(tracks, schema)
    if not np.all(np.isfinite(X)):
        raise FeatureError("non-finite feature value")
    X = (X - np.asarray(scaler.mean)) / np.asarray(scaler.std)
    y = np.array([t.billboard_hit for t in tracks], dtype=np.int64)
    return FeatureMatrix(X, y, schema, scaler)


def save_csv(fm: FeatureMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(fm.schema.names) + ["label"])
        for row, lab in zip(fm.rows, fm.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def load_csv(path, scaler: ScalerStats) -> FeatureMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-1] != "label":
            raise FeatureError(f"{path}: last column must be 'label'")
        schema = FeatureSchema(tuple(header[:-1]))
        rows, labels = [], []
        for rec in reader:
            rows.append([float(v) for v in rec[:-1]])
            labels.append(int(rec[-1]))
    return FeatureMatrix(np.array(rows, dtype=np.float64).reshape(-1, len(schema)),
                         np.array(labels, dtype=np.int64), schema, scaler)


def to_bytes(fm: FeatureMatrix) -> bytes:
    header = json.dumps({"schema": list(fm.schema.names),
                         "scaler": fm.scaler.to_dict()}).encode("utf-8")
    n, d = fm.rows.shape
    return b"".join([
        _MAGIC, struct.pack("<I", len(header)), header, struct.pack("<QQ", n, d),
        fm.rows.astype("<f8").tobytes(order="C"), fm.labels.astype("u1").tobytes(),
    ])


def from_bytes(buf: bytes) -> FeatureMatrix:
    if buf[:4] != _MAGIC:
        raise FeatureError("not a feature-matrix file")
    (hlen,) = struct.unpack_from("<I", buf, 4)
    header = json.loads(buf[8:8 + hlen].decode("utf-8"))
    off = 8 + hlen
    n, d = struct.unpack_from("<QQ", buf, off)
    off += 16
    rows = np.frombuffer(buf, dtype="<f8", count=n * d, offset=off).reshape(n, d)
    off += 8 * n * d
    labels = np.frombuffer(buf, dtype="u1", count=n, offset=off)
    return FeatureMatrix(rows.astype(np.float64), labels.astype(np.int64),
                         FeatureSchema(tuple(header["schema"])),
                         ScalerStats.from_dict(header["scaler"]))


def save_binary(fm: FeatureMatrix, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(fm))


def load_binary(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
