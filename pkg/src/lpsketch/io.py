"""Dataset files: dense CSV and svmlight."""

from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .moments import DataVector

FORMATS = ("csv", "svmlight")
_SVMLIGHT_SUFFIXES = {".svm", ".svmlight", ".libsvm"}


class DatasetError(ValueError):
    """A data file that cannot be parsed; carries the offending line number."""

    def __init__(self, message: str, path=None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


def guess_format(path) -> str:
    return "svmlight" if Path(path).suffix.lower() in _SVMLIGHT_SUFFIXES else "csv"


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _parse_label(tok: str, path, lineno: int):
    try:
        v = float(tok)
    except ValueError:
        raise DatasetError(f"bad label {tok!r}", path, lineno) from None
    return int(v) if v.is_integer() else v


def read_csv(path, has_label: Optional[bool] = None, dim: Optional[int] = None):
    """Rows of a dense CSV file.

    A header row is recognised by a non-numeric field; if its first name is
    ``label`` the first column holds labels.  Without a header, ``has_label``
    decides (default: no labels).
    """
    rows: List[DataVector] = []
    labels = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    start = 0
    for lineno, line in enumerate(lines, start=1):
        if line.strip():
            toks = [t.strip() for t in line.split(",")]
            if not all(_is_number(t) for t in toks):
                if has_label is None:
                    has_label = toks[0].lower() == "label"
                start = lineno
            break
    has_label = bool(has_label)
    for lineno, line in enumerate(lines, start=1):
        if lineno <= start or not line.strip():
            continue
        toks = [t.strip() for t in line.split(",")]
        if has_label:
            labels.append(_parse_label(toks[0], path, lineno))
            toks = toks[1:]
        try:
            vals = np.array([float(t) for t in toks])
        except ValueError:
            raise DatasetError("non-numeric value", path, lineno) from None
        if dim is None:
            dim = vals.size
        if vals.size != dim:
            raise DatasetError(f"expected {dim} values, found {vals.size}", path, lineno)
        try:
            rows.append(DataVector.dense(vals))
        except ValueError as exc:
            raise DatasetError(str(exc), path, lineno) from None
    return rows, (labels if has_label else None)


def read_svmlight(path, dim: Optional[int] = None):
    """Rows of an svmlight file: ``label idx:val ...`` with 1-based indices.

    Without ``dim`` the dimension is the largest index seen.
    """
    parsed = []
    max_idx = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            label = _parse_label(toks[0], path, lineno)
            idx, vals = [], []
            for tok in toks[1:]:
                try:
                    i_str, v_str = tok.split(":", 1)
                    i, v = int(i_str), float(v_str)
                except ValueError:
                    raise DatasetError(f"bad feature {tok!r}", path, lineno) from None
                if i < 1:
                    raise DatasetError(f"feature index {i} is not 1-based", path, lineno)
                if idx and i <= idx[-1] + 1:
                    raise DatasetError("feature indices must be strictly ascending", path, lineno)
                if dim is not None and i > dim:
                    raise DatasetError(f"feature index {i} exceeds dim {dim}", path, lineno)
                idx.append(i - 1)
                vals.append(v)
            if idx:
                max_idx = max(max_idx, idx[-1] + 1)
            parsed.append((lineno, label, idx, vals))
    if dim is None:
        dim = max(max_idx, 1)
    rows, labels = [], []
    for lineno, label, idx, vals in parsed:
        keep = [j for j, v in enumerate(vals) if v != 0.0]
        try:
            rows.append(DataVector.sparse(dim, [idx[j] for j in keep], [vals[j] for j in keep]))
        except ValueError as exc:
            raise DatasetError(str(exc), path, lineno) from None
        labels.append(label)
    return rows, labels


def load_dataset(path, fmt: Optional[str] = None, dim: Optional[int] = None,
                 has_label: Optional[bool] = None) -> Tuple[List[DataVector], Optional[list]]:
    """Load ``(rows, labels)``; labels is None for unlabeled CSV."""
    fmt = fmt or guess_format(path)
    if fmt == "csv":
        return read_csv(path, has_label, dim)
    if fmt == "svmlight":
        return read_svmlight(path, dim)
    raise DatasetError(f"unknown format {fmt!r}; expected one of {FORMATS}", path)


def load_vectors(path, fmt: Optional[str] = None, dim: Optional[int] = None) -> List[DataVector]:
    return load_dataset(path, fmt, dim)[0]
