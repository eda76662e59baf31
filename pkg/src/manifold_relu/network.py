"""Layered ReLU network representation.

A network with depth ``L`` and width vector ``p = (p_0, ..., p_{L+1})`` computes

    x -> W_L sigma_{v_L} W_{L-1} ... W_1 sigma_{v_1} W_0 x

where ``sigma_v(y) = max(y - v, 0)`` coordinatewise.  The output activation is
the identity.  Weight matrices are held as CSR matrices because every network
built by this package is sparse; evaluation uses dense per-layer buffers.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

STRICT = "strict"
RELAXED = "relaxed"
_MODES = (STRICT, RELAXED)

FORMAT_VERSION = 1
_MAGIC = b"RNET"


class NetworkError(ValueError):
    """Raised for malformed networks or incompatible operands."""


class DimensionError(NetworkError):
    def __init__(self, layer: int, expected: int, got: int):
        self.layer = layer
        super().__init__(f"layer {layer}: expected input of dimension {expected}, got {got}")


class FormatError(NetworkError):
    """Malformed serialized network; ``offset`` is the byte (or JSON path) position."""

    def __init__(self, msg: str, offset=None):
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{msg}{where}")


class VersionError(FormatError):
    pass


@dataclass(frozen=True)
class Architecture:
    depth: int
    widths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.depth < 0:
            raise NetworkError("depth must be nonnegative")
        if len(self.widths) != self.depth + 2:
            raise NetworkError(f"width vector must have length L+2={self.depth + 2}, got {len(self.widths)}")
        if min(self.widths) < 1:
            raise NetworkError("all widths must be >= 1")

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]


def count_params(arch: Architecture) -> int:
    """Number of weight and shift entries of a fully connected net (no v_0, no output shift)."""
    p = arch.widths
    return sum((p[l] + 1) * p[l + 1] for l in range(arch.depth + 1)) - p[-1]


@dataclass(frozen=True)
class SparsityReport:
    nonzero_count: int
    total_count: int
    max_abs_weight: float


@dataclass(frozen=True)
class Violation:
    layer: int
    kind: str  # "weight", "shift" or "shape"
    index: tuple
    value: float

    def __str__(self):
        return f"{self.kind} layer {self.layer} index {self.index}: {self.value!r}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


class Network:
    """Immutable ReLU network.

    ``weights[i]`` has shape ``(p_{i+1}, p_i)`` for ``i = 0..L``; ``shifts[i]`` is the
    shift vector of hidden layer ``i+1`` (length ``p_{i+1}``), so ``len(shifts) == L``.
    """

    __slots__ = ("arch", "weights", "shifts", "weight_mode")

    def __init__(self, weights: Sequence, shifts: Sequence, weight_mode: str = STRICT, check: bool = True):
        if weight_mode not in _MODES:
            raise NetworkError(f"unknown weight mode {weight_mode!r}")
        ws = []
        for w in weights:
            if isinstance(w, sp.csr_matrix) and w.dtype == np.float64 and not w.data.flags.writeable:
                ws.append(w)  # already canonical, owned by another network
                continue
            m = sp.csr_matrix(w, dtype=np.float64, copy=True)
            m.eliminate_zeros()
            m.sort_indices()
            ws.append(m)
        vs = [np.array(v, dtype=np.float64).reshape(-1) for v in shifts]
        if len(ws) != len(vs) + 1:
            raise NetworkError(f"need len(weights) == len(shifts) + 1, got {len(ws)} and {len(vs)}")
        widths = [ws[0].shape[1]] + [w.shape[0] for w in ws]
        arch = Architecture(len(vs), tuple(widths))
        for i, w in enumerate(ws):
            if w.shape[1] != widths[i]:
                raise NetworkError(f"W_{i} has {w.shape[1]} columns, expected {widths[i]}")
        for i, v in enumerate(vs):
            if v.shape[0] != widths[i + 1]:
                raise NetworkError(f"v_{i + 1} has length {v.shape[0]}, expected {widths[i + 1]}")
        for w in ws:
            w.data.setflags(write=False)
        for v in vs:
            v.setflags(write=False)
        object.__setattr__(self, "arch", arch)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "shifts", tuple(vs))
        object.__setattr__(self, "weight_mode", weight_mode)
        if check and weight_mode == STRICT:
            report = validate(self)
            if not report.ok:
                raise NetworkError(f"strict-mode bound violated: {report.violations[0]}")

    def __setattr__(self, name, value):
        raise AttributeError("Network is immutable")

    @property
    def depth(self) -> int:
        return self.arch.depth

    @property
    def widths(self) -> tuple[int, ...]:
        return self.arch.widths

    @property
    def input_dim(self) -> int:
        return self.arch.widths[0]

    @property
    def output_dim(self) -> int:
        return self.arch.widths[-1]

    def with_mode(self, weight_mode: str) -> "Network":
        return Network(self.weights, self.shifts, weight_mode)

    def __call__(self, x):
        return evaluate(self, x)

    def __repr__(self):
        s = sparsity(self)
        return f"Network(L={self.depth}, p={self.widths}, s={s.nonzero_count}, mode={self.weight_mode})"


def evaluate(net: Network, x, chunk: int = 128) -> np.ndarray:
    """Evaluate ``net`` on one point (shape ``(p0,)``) or a batch (shape ``(n, p0)``)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        got = X.shape[-1] if X.ndim else 0
        raise DimensionError(0, net.input_dim, got)
    out = np.empty((X.shape[0], net.output_dim))
    for start in range(0, X.shape[0], chunk):
        h = X[start:start + chunk].T
        for w, v in zip(net.weights[:-1], net.shifts):
            h = w @ h
            h -= v[:, None]
            np.maximum(h, 0.0, out=h)
        out[start:start + chunk] = (net.weights[-1] @ h).T
    return out[0] if single else out


def sparsity(net: Network) -> SparsityReport:
    nnz = sum(int(w.nnz) for w in net.weights) + sum(int(np.count_nonzero(v)) for v in net.shifts)
    vals = [np.abs(w.data).max() for w in net.weights if w.nnz]
    vals += [np.abs(v).max() for v in net.shifts if v.size]
    return SparsityReport(nnz, count_params(net.arch), float(max(vals, default=0.0)))


def validate(net: Network) -> ValidationReport:
    """Check shape consistency and, in strict mode, the bound ``|entry| <= 1``."""
    report = ValidationReport()
    p = net.widths
    for i, w in enumerate(net.weights):
        if w.shape != (p[i + 1], p[i]):
            report.violations.append(Violation(i, "shape", w.shape, float("nan")))
    for i, v in enumerate(net.shifts):
        if v.shape != (p[i + 1],):
            report.violations.append(Violation(i + 1, "shape", v.shape, float("nan")))
    if net.weight_mode == STRICT:
        for i, w in enumerate(net.weights):
            coo = w.tocoo()
            bad = np.flatnonzero(~(np.abs(coo.data) <= 1.0))
            for k in bad:
                report.violations.append(Violation(i, "weight", (int(coo.row[k]), int(coo.col[k])), float(coo.data[k])))
        for i, v in enumerate(net.shifts):
            for k in np.flatnonzero(~(np.abs(v) <= 1.0)):
                report.violations.append(Violation(i + 1, "shift", (int(k),), float(v[k])))
    return report


# --------------------------------------------------------------------------- codec
#
# Binary layout (little-endian):
#   magic "RNET", u16 version, u8 mode (0 strict, 1 relaxed), u32 L, u32 p_0..p_{L+1}
#   for i in 0..L:   u32 n_i, then n_i records (u32 row, u32 col, f64 value)  -- W_i
#   for i in 1..L:   u32 k_i, then k_i records (u32 index, f64 value)         -- v_i

_HEADER = struct.Struct("<4sHBI")
_U32 = struct.Struct("<I")
_TRIPLET = np.dtype([("row", "<u4"), ("col", "<u4"), ("val", "<f8")])
_PAIR = np.dtype([("idx", "<u4"), ("val", "<f8")])


def serialize(net: Network) -> bytes:
    buf = io.BytesIO()
    buf.write(_HEADER.pack(_MAGIC, FORMAT_VERSION, _MODES.index(net.weight_mode), net.depth))
    buf.write(np.asarray(net.widths, dtype="<u4").tobytes())
    for w in net.weights:
        coo = w.tocoo()
        rec = np.empty(coo.nnz, dtype=_TRIPLET)
        rec["row"], rec["col"], rec["val"] = coo.row, coo.col, coo.data
        buf.write(_U32.pack(coo.nnz))
        buf.write(rec.tobytes())
    for v in net.shifts:
        idx = np.flatnonzero(v)
        rec = np.empty(idx.size, dtype=_PAIR)
        rec["idx"], rec["val"] = idx, v[idx]
        buf.write(_U32.pack(idx.size))
        buf.write(rec.tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int, what: str):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated stream while reading {what}", self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def deserialize(data: bytes) -> Network:
    r = _Reader(data)
    magic, version, mode, depth = _HEADER.unpack(r.take(_HEADER.size, "header"))
    if magic != _MAGIC:
        raise FormatError("bad magic", 0)
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {version} (reader is v{FORMAT_VERSION})", 4)
    if mode >= len(_MODES):
        raise FormatError(f"bad weight mode byte {mode}", 6)
    widths = np.frombuffer(r.take(4 * (depth + 2), "width vector"), dtype="<u4").astype(int)
    weights, shifts = [], []
    for i in range(depth + 1):
        start = r.pos
        n = r.u32(f"W_{i} count")
        rec = np.frombuffer(r.take(n * _TRIPLET.itemsize, f"W_{i} entries"), dtype=_TRIPLET)
        shape = (widths[i + 1], widths[i])
        if n and (rec["row"].max() >= shape[0] or rec["col"].max() >= shape[1]):
            raise FormatError(f"W_{i} index out of range", start)
        weights.append(sp.coo_matrix((rec["val"], (rec["row"], rec["col"])), shape=shape))
    for i in range(depth):
        start = r.pos
        k = r.u32(f"v_{i + 1} count")
        rec = np.frombuffer(r.take(k * _PAIR.itemsize, f"v_{i + 1} entries"), dtype=_PAIR)
        v = np.zeros(widths[i + 1])
        if k and rec["idx"].max() >= v.size:
            raise FormatError(f"v_{i + 1} index out of range", start)
        v[rec["idx"]] = rec["val"]
        shifts.append(v)
    if r.pos != len(r.data):
        raise FormatError("trailing bytes", r.pos)
    return Network(weights, shifts, _MODES[mode])


def to_json(net: Network) -> str:
    """Canonical text form; floats are written with ``repr`` so the round trip is exact."""
    layers = []
    for w in net.weights:
        coo = w.tocoo()
        layers.append([[int(a), int(b), float(c)] for a, b, c in zip(coo.row, coo.col, coo.data)])
    shifts = [[[int(k), float(v[k])] for k in np.flatnonzero(v)] for v in net.shifts]
    doc = {
        "format_version": FORMAT_VERSION,
        "depth": net.depth,
        "widths": list(net.widths),
        "weight_mode": net.weight_mode,
        "weights": layers,
        "shifts": shifts,
    }
    return json.dumps(doc, sort_keys=True)


def from_json(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.pos) from exc
    if doc.get("format_version") != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {doc.get('format_version')!r}", "format_version")
    try:
        widths = [int(w) for w in doc["widths"]]
        weights = []
        for i, entries in enumerate(doc["weights"]):
            arr = np.array(entries, dtype=float).reshape(-1, 3)
            weights.append(sp.coo_matrix((arr[:, 2], (arr[:, 0].astype(int), arr[:, 1].astype(int))),
                                         shape=(widths[i + 1], widths[i])))
        shifts = []
        for i, entries in enumerate(doc["shifts"]):
            v = np.zeros(widths[i + 1])
            for k, val in entries:
                v[int(k)] = val
            shifts.append(v)
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        raise FormatError(f"malformed network document: {exc}", "weights/shifts") from exc
    return Network(weights, shifts, doc["weight_mode"])


def save(net: Network, path) -> None:
    path = str(path)
    if path.endswith(".json"):
        with open(path, "w") as fh:
            fh.write(to_json(net))
    else:
        with open(path, "wb") as fh:
            fh.write(serialize(net))


def load(path) -> Network:
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            return from_json(fh.read())
    with open(path, "rb") as fh:
        return deserialize(fh.read())


def dense(weights, shifts, weight_mode: str = STRICT) -> Network:
    """Convenience constructor from nested lists."""
    return Network([np.atleast_2d(np.asarray(w, dtype=float)) for w in weights],
                   [np.atleast_1d(np.asarray(v, dtype=float)) for v in shifts], weight_mode)
