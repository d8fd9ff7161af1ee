"""Graph text files, GDF checkpoints and dataset manifests.

Graph file grammar (one record per graph, records separated by blank lines,
``#`` starts a comment)::

    n a b
    x_0 x_1 ... x_{n-1}
    i j c          # one line per edge with class c in 1..b-1, i < j

Pairs that are not listed have class 0. A graph with no nodes has an empty
label line written as ``-``.

Checkpoint layout (all integers little-endian)::

    b"GDF" + version digit
    u32 entry count
    per entry: u32 name length, utf-8 name, u32 ndim, u64 dims..., f64 data
"""

from __future__ import annotations

import json
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError, encode_graph

MAGIC_PREFIX = b"GDF"
VERSION = 1
MAGIC = MAGIC_PREFIX + str(VERSION).encode()
SPLITS = ("train", "val", "test")


class FormatError(GraphError):
    pass


class CheckpointError(ValueError):
    pass


# --- graph text format -----------------------------------------------------


def format_graph(g: Graph) -> str:
    lines = [f"{g.n} {g.a} {g.b}"]
    labels = g.node_labels()
    lines.append(" ".join(map(str, labels.tolist())) if g.n else "-")
    el = g.edge_labels()
    iu, ju = np.triu_indices(g.n, k=1)
    for i, j in zip(iu, ju):
        if el[i, j]:
            lines.append(f"{i} {j} {el[i, j]}")
    return "\n".join(lines) + "\n"


def write_graphs(path, graphs) -> None:
    Path(path).write_text("\n".join(format_graph(g) for g in graphs))


def _ints(text: str, lineno: int) -> list[int]:
    try:
        return [int(tok) for tok in text.split()]
    except ValueError:
        raise FormatError(f"line {lineno}: expected integers, got {text!r}") from None


def _parse_record(rec: list[tuple[int, str]]) -> Graph:
    lineno, header = rec[0]
    head = _ints(header, lineno)
    if len(head) != 3:
        raise FormatError(f"line {lineno}: header must be 'n a b'")
    n, a, b = head
    if n < 0 or a < 1 or b < 2:
        raise FormatError(f"line {lineno}: bad header values n={n} a={a} b={b}")
    if len(rec) < 2:
        raise FormatError(f"line {lineno}: missing node label line")
    lab_no, lab_text = rec[1]
    labels = [] if lab_text.strip() == "-" else _ints(lab_text, lab_no)
    if len(labels) != n:
        raise FormatError(f"line {lab_no}: expected {n} node labels, got {len(labels)}")
    if any(not 0 <= x < a for x in labels):
        raise FormatError(f"line {lab_no}: node class out of range [0, {a})")
    el = np.zeros((n, n), dtype=np.int64)
    for no, text in rec[2:]:
        vals = _ints(text, no)
        if len(vals) != 3:
            raise FormatError(f"line {no}: edge lines are 'i j class'")
        i, j, c = vals
        if not 0 <= i < j < n:
            raise FormatError(f"line {no}: need 0 <= i < j < {n}, got {i} {j}")
        if not 1 <= c < b:
            raise FormatError(f"line {no}: edge class {c} out of range [1, {b})")
        if el[i, j]:
            raise FormatError(f"line {no}: duplicate edge {i} {j}")
        el[i, j] = el[j, i] = c
    return encode_graph(np.array(labels, dtype=np.int64), el, a, b)


def parse_graphs(text: str) -> list[Graph]:
    records, cur = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            if raw.strip() == "" and cur:
                records.append(cur)
                cur = []
            continue
        cur.append((lineno, line))
    if cur:
        records.append(cur)
    return [_parse_record(r) for r in records]


def read_graphs(path) -> list[Graph]:
    return parse_graphs(Path(path).read_text())


# --- checkpoints ---------------------------------------------------------------


def save_checkpoint(path, state) -> None:
    """Write an ordered mapping of name -> float array."""
    chunks = [MAGIC, struct.pack("<I", len(state))]
    for name, arr in state.items():
        arr = np.asarray(arr, dtype="<f8")  # keeps 0-d shapes; tobytes is C order
        key = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(key)))
        chunks.append(key)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, k: int) -> bytes:
        if self.pos + k > len(self.buf):
            raise CheckpointError(f"{self.path}: truncated checkpoint (wanted {k} bytes at offset {self.pos})")
        out = self.buf[self.pos : self.pos + k]
        self.pos += k
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path) -> OrderedDict:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    r = _Reader(path.read_bytes(), path)
    magic = r.take(4)
    if magic[:3] != MAGIC_PREFIX:
        raise CheckpointError(f"{path}: not a GDF checkpoint (magic {magic!r})")
    if magic != MAGIC:
        found = magic.decode("ascii", errors="replace")
        raise CheckpointError(f"{path}: checkpoint version {found} but this build reads {MAGIC.decode()}")
    (count,) = r.unpack("<I")
    state = OrderedDict()
    for _ in range(count):
        (klen,) = r.unpack("<I")
        name = r.take(klen).decode("utf-8")
        (ndim,) = r.unpack("<I")
        shape = r.unpack(f"<{ndim}Q")
        size = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(r.take(8 * size), dtype="<f8").astype(np.float64)
        state[name] = data.reshape(shape)
    if r.pos != len(r.buf):
        raise CheckpointError(f"{path}: {len(r.buf) - r.pos} trailing bytes after the last entry")
    return state


# --- manifests --------------------------------------------------------------------


def write_manifest(path, splits: dict) -> None:
    unknown = set(splits) - set(SPLITS)
    if unknown:
        raise ValueError(f"unknown splits {sorted(unknown)}")
    Path(path).write_text(json.dumps({k: str(v) for k, v in splits.items()}, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    """Split name -> graph file path, resolved against the manifest's directory."""
    path = Path(path)
    data = json.loads(path.read_text())
    unknown = set(data) - set(SPLITS)
    if unknown:
        raise ValueError(f"{path}: unknown splits {sorted(unknown)}")
    return {k: (path.parent / v) for k, v in data.items()}
