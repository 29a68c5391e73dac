"""Seed-keyed projection matrices and per-vector sketches.

The projection matrix is never stored.  Entry ``(i, j)`` of matrix ``m`` is a
pure function of ``(seed, m, i, j)``, so a sparse vector only ever touches the
rows it has nonzeros in, and two vectors sketched at different times with the
same spec see the same matrix.
"""

from dataclasses import dataclass, field
from enum import Enum
import math
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from . import _random
from .moments import DataVector, as_vector

MARGIN_ORDERS = (2, 4, 6, 8, 10)
FORMAT_TAG = "lpsketch"
FORMAT_VERSION = "v1"


class Scheme(str, Enum):
    ONE = "1p"
    THREE = "3p"


def _parse_distribution(dist: str) -> Optional[float]:
    """Validate a distribution name; return its sparsity parameter if any."""
    if dist == "normal":
        return None
    if dist == "3pt":
        return 3.0
    if dist.startswith("sparse:"):
        try:
            s = float(dist.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad sparsity in distribution {dist!r}") from None
        if not s >= 1.0 or not math.isfinite(s):
            raise ValueError(f"sparse projections need s >= 1, got {s}")
        return s
    raise ValueError(f"unknown distribution {dist!r}; expected normal, 3pt or sparse:<s>")


def format_distribution(s: Optional[float]) -> str:
    if s is None:
        return "normal"
    return f"sparse:{s:.17g}"


@dataclass(frozen=True)
class ProjectionSpec:
    seed: int
    k: int
    dim: int
    scheme: Scheme = Scheme.ONE
    distribution: str = "normal"

    def __post_init__(self):
        if not 0 <= self.seed <= _random.MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        _parse_distribution(self.distribution)

    @property
    def sparsity(self) -> Optional[float]:
        return _parse_distribution(self.distribution)

    @property
    def matrix_ids(self) -> tuple:
        return (1,) if self.scheme is Scheme.ONE else (1, 2, 3)

    def matrix_for(self, side: str, power: int) -> int:
        """Matrix used for ``power`` when the vector plays ``side`` ("u" or "v").

        Under the three-matrix scheme each cross term of the l4 expansion owns
        one matrix: (x^2, y^2) uses 2, (x^3, y) uses 1 and (x, y^3) uses 3.
        """
        if self.scheme is Scheme.ONE:
            return 1
        if power == 2:
            return 2
        if power not in (1, 3):
            raise ValueError("the three-matrix scheme only projects powers 1..3")
        if side == "u":
            return 4 - power
        return power

    def projections(self, max_power: int) -> tuple:
        """The (power, matrix id) rows every sketch under this spec carries."""
        if self.scheme is Scheme.ONE:
            return tuple((r, 1) for r in range(1, max_power + 1))
        return ((1, 1), (1, 3), (2, 2), (3, 1), (3, 3))

    def block(self, matrix_id: int, rows) -> np.ndarray:
        """Matrix entries for the given rows and all ``k`` columns."""
        if matrix_id not in self.matrix_ids:
            raise ValueError(f"matrix id {matrix_id} is not valid for scheme {self.scheme.value}")
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= self.dim):
            raise IndexError("row index out of range")
        key = np.uint64(_random.derive_key(self.seed, matrix_id))
        counters = (rows.astype(np.uint64)[:, None] << np.uint64(32)) | np.arange(
            self.k, dtype=np.uint64
        )
        return _transform(_random.uniforms(key, counters), self.sparsity)


def _transform(u: np.ndarray, sparsity: Optional[float]) -> np.ndarray:
    if sparsity is None:
        return _random.ndtri(u)
    tail = 0.5 / sparsity
    amp = math.sqrt(sparsity)
    return np.where(u < tail, -amp, np.where(u > 1.0 - tail, amp, 0.0))


def matrix_entry(spec: ProjectionSpec, matrix_id: int, i: int, j: int) -> float:
    if not (0 <= i < spec.dim and 0 <= j < spec.k):
        raise IndexError(f"entry ({i}, {j}) outside a {spec.dim} x {spec.k} matrix")
    return float(spec.block(matrix_id, [i])[0, j])


@dataclass(frozen=True, eq=False)
class Sketch:
    """Projections of one vector's coordinate powers, plus its exact margins.

    ``rows`` maps ``(power, matrix id)`` to a length-``k`` array.
    """

    vector_id: str
    spec: ProjectionSpec
    rows: Dict[Tuple[int, int], np.ndarray]
    margins: Dict[int, float] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def max_power(self) -> int:
        return max(r for r, _ in self.rows)

    def row(self, side: str, power: int) -> np.ndarray:
        try:
            return self.rows[(power, self.spec.matrix_for(side, power))]
        except KeyError:
            raise ValueError(f"sketch {self.vector_id!r} has no projection of power {power}") from None

    @property
    def powers(self) -> Dict[int, np.ndarray]:
        """Rows by power as seen from the ``u`` side."""
        return {r: self.row("u", r) for r in range(1, self.max_power + 1)}

    def compatible_with(self, other: "Sketch") -> bool:
        return self.spec == other.spec

    def margin(self, q: int) -> float:
        try:
            return self.margins[q]
        except KeyError:
            raise ValueError(f"sketch {self.vector_id!r} carries no margin of order {q}") from None


def _margins(values: np.ndarray) -> Dict[int, float]:
    return {q: math.fsum(values ** q) for q in MARGIN_ORDERS}


def _check_max_power(spec: ProjectionSpec, max_power: int):
    if max_power not in (3, 5):
        raise ValueError(f"max_power must be 3 or 5, got {max_power}")
    if spec.scheme is Scheme.THREE and max_power != 3:
        raise ValueError("the three-matrix scheme supports max_power=3 only")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def sketch_vector(x, spec: ProjectionSpec, max_power: int = 3, vector_id: str = "") -> Sketch:
    """Project ``x, x**2, ..., x**max_power`` onto the matrices of ``spec``.

    Cost is proportional to ``nnz(x) * k * max_power``.
    """
    x = as_vector(x)
    if x.dim != spec.dim:
        raise ValueError(f"dimension mismatch: vector has {x.dim}, spec has {spec.dim}")
    _check_max_power(spec, max_power)
    blocks = {m: spec.block(m, x.indices) for m in spec.matrix_ids}
    rows = {}
    for r, mid in spec.projections(max_power):
        rows[(r, mid)] = _freeze(np.asarray((x.values ** r) @ blocks[mid], dtype=np.float64))
    return Sketch(vector_id, spec, rows, _margins(x.values))


def sketch_many(vectors: Sequence[DataVector], spec: ProjectionSpec, max_power: int = 3,
                ids: Optional[Sequence[str]] = None) -> List[Sketch]:
    """Sketch a collection, generating each needed matrix row once."""
    vectors = [as_vector(v) for v in vectors]
    _check_max_power(spec, max_power)
    if ids is None:
        ids = [str(i) for i in range(len(vectors))]
    for v in vectors:
        if v.dim != spec.dim:
            raise ValueError(f"dimension mismatch: vector has {v.dim}, spec has {spec.dim}")
    rows = np.unique(np.concatenate([v.indices for v in vectors])) if vectors else np.zeros(0, np.int64)
    blocks = {m: spec.block(m, rows) for m in spec.matrix_ids}
    out = []
    for vid, v in zip(ids, vectors):
        loc = np.searchsorted(rows, v.indices)
        proj = {}
        for r, mid in spec.projections(max_power):
            proj[(r, mid)] = _freeze(np.asarray((v.values ** r) @ blocks[mid][loc], dtype=np.float64))
        out.append(Sketch(vid, spec, proj, _margins(v.values)))
    return out


# ---------------------------------------------------------------- file format

def _fmt(v: float) -> str:
    return f"{v:.17g}"


def format_header(spec: ProjectionSpec, max_power: int) -> str:
    return (
        f"{FORMAT_TAG} {FORMAT_VERSION} seed={spec.seed} k={spec.k} scheme={spec.scheme.value} "
        f"dist={_header_dist(spec)} D={spec.dim} maxpower={max_power}"
    )


def _header_dist(spec: ProjectionSpec) -> str:
    if spec.distribution in ("normal", "3pt"):
        return spec.distribution
    return format_distribution(spec.sparsity)


def write_sketches(sketches: Iterable[Sketch], fh: TextIO) -> None:
    sketches = list(sketches)
    if not sketches:
        raise ValueError("nothing to write")
    spec = sketches[0].spec
    max_power = sketches[0].max_power
    for s in sketches:
        if s.spec != spec or s.max_power != max_power:
            raise ValueError("all sketches in one file must share spec and max power")
        if not s.vector_id or any(c.isspace() for c in s.vector_id):
            raise ValueError(f"vector id {s.vector_id!r} must be non-empty without whitespace")
    fh.write(format_header(spec, max_power) + "\n")
    for s in sketches:
        for key in spec.projections(max_power):
            fh.write(f"{s.vector_id} {_row_tag(spec, key)} " + " ".join(_fmt(v) for v in s.rows[key]) + "\n")
    for s in sketches:
        fh.write(f"{s.vector_id} margins " + " ".join(_fmt(s.margins[q]) for q in MARGIN_ORDERS) + "\n")


def _row_tag(spec: ProjectionSpec, key: Tuple[int, int]) -> str:
    """``r`` for power r on its default matrix, ``r@m`` for an extra row."""
    r, mid = key
    default = 1 if spec.scheme is Scheme.ONE else r
    return str(r) if mid == default else f"{r}@{mid}"


def _parse_row_tag(spec: ProjectionSpec, tag: str) -> Tuple[int, int]:
    r_str, _, m_str = tag.partition("@")
    r = int(r_str)
    if m_str:
        return r, int(m_str)
    return r, (1 if spec.scheme is Scheme.ONE else r)


class SketchFormatError(ValueError):
    pass


def _parse_header(line: str):
    parts = line.split()
    if len(parts) < 2 or parts[0] != FORMAT_TAG or parts[1] != FORMAT_VERSION:
        raise SketchFormatError(f"line 1: not an {FORMAT_TAG} {FORMAT_VERSION} file")
    fields = {}
    for p in parts[2:]:
        if "=" not in p:
            raise SketchFormatError(f"line 1: malformed header field {p!r}")
        key, val = p.split("=", 1)
        fields[key] = val
    try:
        spec = ProjectionSpec(
            seed=int(fields["seed"]),
            k=int(fields["k"]),
            dim=int(fields["D"]),
            scheme=Scheme(fields["scheme"]),
            distribution=fields["dist"],
        )
        max_power = int(fields["maxpower"])
    except (KeyError, ValueError) as exc:
        raise SketchFormatError(f"line 1: bad header ({exc})") from None
    return spec, max_power


def read_sketches(fh: TextIO) -> List[Sketch]:
    lines = fh.read().splitlines()
    if not lines:
        raise SketchFormatError("empty sketch file")
    spec, max_power = _parse_header(lines[0])
    expected = set(spec.projections(max_power))
    rows: Dict[str, Dict[Tuple[int, int], np.ndarray]] = {}
    margins: Dict[str, Dict[int, float]] = {}
    order: List[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) < 2:
            raise SketchFormatError(f"line {lineno}: too few fields")
        vid, tag, rest = parts[0], parts[1], parts[2:]
        try:
            values = [float(v) for v in rest]
        except ValueError:
            raise SketchFormatError(f"line {lineno}: non-numeric value") from None
        if tag == "margins":
            if len(values) not in (3, 5):
                raise SketchFormatError(f"line {lineno}: expected 3 or 5 margins")
            margins[vid] = dict(zip(MARGIN_ORDERS, values))
            continue
        try:
            key = _parse_row_tag(spec, tag)
        except ValueError:
            raise SketchFormatError(f"line {lineno}: bad power {tag!r}") from None
        if key not in expected or len(values) != spec.k:
            raise SketchFormatError(f"line {lineno}: bad power or wrong number of values")
        if vid not in rows:
            rows[vid] = {}
            order.append(vid)
        rows[vid][key] = _freeze(np.array(values, dtype=np.float64))
    out = []
    for vid in order:
        if set(rows[vid]) != expected:
            raise SketchFormatError(f"vector {vid!r} is missing powers")
        if vid not in margins:
            raise SketchFormatError(f"vector {vid!r} has no margins line")
        out.append(Sketch(vid, spec, rows[vid], margins[vid]))
    return out


def save_sketches(path, sketches: Iterable[Sketch]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        write_sketches(sketches, fh)


def load_sketches(path) -> List[Sketch]:
    with open(path, encoding="ascii") as fh:
        return read_sketches(fh)
