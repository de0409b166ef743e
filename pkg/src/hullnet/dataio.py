"""Labelled point sets from IDX (MNIST layout) and CSV files."""
import csv
import struct
from dataclasses import dataclass, field

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class LabeledDataset:
    """Points with one label each.

    Construction rejects a point that carries two different labels, since
    the classes must be disjoint sets.
    """

    points: np.ndarray
    labels: np.ndarray
    name: str = ""
    label_universe: tuple = field(init=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        labs = np.asarray(self.labels)
        if pts.ndim != 2:
            raise DataError(f"points must be 2-D, got shape {pts.shape}")
        if len(labs) != len(pts):
            raise DataError(f"{len(pts)} points but {len(labs)} labels")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labs)
        object.__setattr__(self, "label_universe", tuple(np.unique(labs).tolist()))
        _check_disjoint(pts, labs)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]


def _check_disjoint(points, labels):
    if len(points) == 0:
        return
    _, inv = np.unique(points, axis=0, return_inverse=True)
    inv = inv.ravel()
    order = np.lexsort((labels, inv))
    gi, gl = inv[order], labels[order]
    clash = (gi[1:] == gi[:-1]) & (gl[1:] != gl[:-1])
    if clash.any():
        k = int(order[1:][clash][0])
        raise DataError(f"point {k} appears under two different labels")


def _read_idx(path, magic):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise DataError(f"{path}: truncated header at byte offset {len(raw)}")
    got, count = struct.unpack(">II", raw[:8])
    if got != magic:
        raise DataError(f"{path}: bad magic 0x{got:08x}, expected 0x{magic:08x}")
    shape = [count]
    header = 8
    if magic == IMAGES_MAGIC:
        if len(raw) < 16:
            raise DataError(f"{path}: truncated header at byte offset {len(raw)}")
        rows, cols = struct.unpack(">II", raw[8:16])
        shape += [rows, cols]
        header = 16
    need = header + int(np.prod(shape))
    if len(raw) < need:
        raise DataError(
            f"{path}: truncated at byte offset {len(raw)}, expected {need} bytes")
    return np.frombuffer(raw, dtype=np.uint8, count=need - header, offset=header).reshape(shape)


def write_idx(images_path, labels_path, images, labels):
    """Write uint8 images ``(n, rows, cols)`` and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3 or len(images) != len(labels):
        raise ValueError("images must be (n, rows, cols) with one label each")
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


def load_idx(images_path, labels_path, keep_labels=None, raw=False):
    """Load an IDX image/label pair as flattened points.

    Parameters
    ----------
    images_path, labels_path : path-like
        Files in the MNIST distribution layout (uncompressed).
    keep_labels : iterable of int, optional
        Labels to keep; all by default.
    raw : bool
        Keep pixel values in 0..255 instead of dividing by 255.
    """
    imgs = _read_idx(images_path, IMAGES_MAGIC)
    labs = _read_idx(labels_path, LABELS_MAGIC)
    if len(imgs) != len(labs):
        raise DataError(f"{len(imgs)} images but {len(labs)} labels")
    X = imgs.reshape(len(imgs), -1).astype(float)
    if not raw:
        X /= 255.0
    y = labs.astype(int)
    if keep_labels is not None:
        keep = np.isin(y, sorted(set(int(k) for k in keep_labels)))
        X, y = X[keep], y[keep]
    return LabeledDataset(X, y, name=str(images_path))


def load_csv(path, label_column, header=None):
    """Load a comma-separated numeric file.

    ``label_column`` is a header name or a zero-based column index. With
    ``header=None`` the first row counts as a header when any of its
    cells is not a number. Labels stay strings; every other column must
    be numeric.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    if header is None:
        header = not all(_is_number(c) for c in rows[0])
    names = [c.strip() for c in rows[0]] if header else None
    body = rows[1:] if header else rows
    if not body:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    if names is not None and label_column in names:
        li = names.index(label_column)
    elif isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        raise DataError(f"{path}: no column named {label_column!r}")
    else:
        li = int(label_column)
        if not -width <= li < width:
            raise DataError(f"{path}: label column {li} out of range")
        li %= width
    pts, labs = [], []
    for k, r in enumerate(body, start=2 if header else 1):
        if len(r) != width:
            raise DataError(f"{path}: line {k} has {len(r)} fields, expected {width}")
        try:
            pts.append([float(c) for i, c in enumerate(r) if i != li])
        except ValueError as exc:
            raise DataError(f"{path}: line {k}: {exc}") from None
        labs.append(r[li].strip())
    X = np.asarray(pts, dtype=float)
    if not np.all(np.isfinite(X)):
        raise DataError(f"{path}: non-finite coordinates")
    return LabeledDataset(X, np.asarray(labs), name=str(path))


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def split_binary(d, label_a, label_b):
    """Points labelled ``label_a`` and ``label_b``, in that order."""
    out = []
    for lab in (label_a, label_b):
        sel = d.labels == _coerce(lab, d.labels)
        if not sel.any():
            raise DataError(f"label {lab!r} not present; have {list(d.label_universe)}")
        out.append(d.points[sel])
    return out[0], out[1]


def _coerce(label, labels):
    """Match a label given as text against integer or string label arrays."""
    if labels.dtype.kind in "iu" and isinstance(label, str):
        return int(label)
    if labels.dtype.kind in "US" and not isinstance(label, str):
        return str(label)
    return label
