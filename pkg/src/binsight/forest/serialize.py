"""Binary model file format (version 1).

All integers little-endian::

    magic        4s   b"BSRF"
    version      u16  1
    n_trees      u32  \
    mtry         i32   |  ForestConfig; -1 encodes "unset"
    min_node     u32   |
    max_depth    i32   |
    bootstrap    u8    |
    seed         u64  /
    feature_len  u32
    n_classes    u32
    n_classes x (u16 byte length, UTF-8 label name)
    tree_count   u32
    tree_count x (u32 node_count, node_count x node)

Nodes are written in preorder.  Each starts with a u8 tag: 1 = internal,
followed by ``u32 feature`` and ``f64 threshold``; 0 = leaf, followed by
``n_classes x u32`` class counts.  The encoding is canonical: equal models
produce identical bytes.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import ModelFormatError
from .model import ForestConfig, ForestModel
from .tree import Tree

MAGIC = b"BSRF"
VERSION = 1
_HEADER = struct.Struct("<4sH")
_CONFIG = struct.Struct("<IiIiBQ")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")


def _encode_tree(tree: Tree, k: int) -> bytes:
    internal = tree.feature >= 0
    sizes = np.where(internal, 13, 1 + 4 * k)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    buf = np.zeros(int(sizes.sum()), dtype=np.uint8)
    buf[offsets[internal]] = 1

    io = offsets[internal]
    fbytes = tree.feature[internal].astype("<u4").view(np.uint8).reshape(-1, 4)
    buf[io[:, None] + 1 + np.arange(4)] = fbytes
    tbytes = tree.threshold[internal].astype("<f8").view(np.uint8).reshape(-1, 8)
    buf[io[:, None] + 5 + np.arange(8)] = tbytes

    lo = offsets[~internal]
    counts = tree.counts[tree.leaf[~internal]].astype("<u4")
    cbytes = counts.view(np.uint8).reshape(len(lo), 4 * k)
    buf[lo[:, None] + 1 + np.arange(4 * k)] = cbytes
    return _U32.pack(tree.n_nodes) + buf.tobytes()


def save_model(model: ForestModel) -> bytes:
    cfg = model.config
    parts = [
        _HEADER.pack(MAGIC, VERSION),
        _CONFIG.pack(cfg.n_trees, -1 if cfg.mtry is None else cfg.mtry, cfg.min_node_size,
                     -1 if cfg.max_depth is None else cfg.max_depth, int(cfg.bootstrap),
                     cfg.seed),
        _U32.pack(model.feature_len),
        _U32.pack(model.n_classes),
    ]
    for name in model.label_names:
        raw = name.encode("utf-8")
        parts.append(_U16.pack(len(raw)) + raw)
    parts.append(_U32.pack(len(model.trees)))
    parts.extend(_encode_tree(t, model.n_classes) for t in model.trees)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.data):
            raise ModelFormatError(f"model stream truncated at byte {len(self.data)}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct):
        return fmt.unpack(self.take(fmt.size))


def _decode_tree(r: _Reader, k: int, feature_len: int) -> Tree:
    (n_nodes,) = r.unpack(_U32)
    if n_nodes == 0:
        raise ModelFormatError("tree with zero nodes")
    data, start = r.data, r.pos
    tags = np.empty(n_nodes, dtype=np.uint8)
    offsets = np.empty(n_nodes, dtype=np.int64)
    leaf_size = 1 + 4 * k
    pos = start
    end = len(data)
    for i in range(n_nodes):
        if pos >= end:
            raise ModelFormatError("model stream truncated inside a tree")
        tag = data[pos]
        if tag > 1:
            raise ModelFormatError(f"bad node tag {tag}")
        tags[i] = tag
        offsets[i] = pos
        pos += 13 if tag else leaf_size
    r.take(pos - start)  # bounds check for the final node
    raw = np.frombuffer(data, dtype=np.uint8)

    internal = tags == 1
    io = offsets[internal]
    feature = np.full(n_nodes, -1, dtype=np.int32)
    fvals = raw[io[:, None] + 1 + np.arange(4)].copy().view("<u4").reshape(-1)
    if fvals.size and fvals.max() >= feature_len:
        raise ModelFormatError("split feature index out of range")
    feature[internal] = fvals
    threshold = np.zeros(n_nodes, dtype=np.float64)
    threshold[internal] = raw[io[:, None] + 5 + np.arange(8)].copy().view("<f8").reshape(-1)

    lo = offsets[~internal]
    counts = raw[lo[:, None] + 1 + np.arange(4 * k)].copy().view("<u4").reshape(len(lo), k)
    leaf = np.full(n_nodes, -1, dtype=np.int32)
    leaf[~internal] = np.arange(len(lo), dtype=np.int32)

    left = np.full(n_nodes, -1, dtype=np.int32)
    right = np.full(n_nodes, -1, dtype=np.int32)
    pending = []
    is_internal = internal.tolist()
    for i in range(n_nodes):
        if i:
            if is_internal[i - 1]:
                left[i - 1] = i
            elif pending:
                right[pending.pop()] = i
            else:
                raise ModelFormatError("malformed preorder node stream")
        if is_internal[i]:
            pending.append(i)
    if pending:
        raise ModelFormatError("tree ends with unfinished internal nodes")
    return Tree(feature, threshold, left, right, leaf, counts.astype(np.int32))


def load_model(data: bytes) -> ForestModel:
    r = _Reader(bytes(data))
    magic, version = r.unpack(_HEADER)
    if magic != MAGIC:
        raise ModelFormatError("not a binsight model file (bad magic)")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    n_trees, mtry, min_node, max_depth, bootstrap, seed = r.unpack(_CONFIG)
    try:
        config = ForestConfig(n_trees=n_trees, mtry=None if mtry == -1 else mtry,
                              min_node_size=min_node,
                              max_depth=None if max_depth == -1 else max_depth,
                              bootstrap=bool(bootstrap), seed=seed)
    except ValueError as exc:
        raise ModelFormatError(f"invalid config block: {exc}") from None
    (feature_len,) = r.unpack(_U32)
    (k,) = r.unpack(_U32)
    if k == 0 or feature_len == 0:
        raise ModelFormatError("model declares no classes or no features")
    names = []
    for _ in range(k):
        (n,) = r.unpack(_U16)
        try:
            names.append(bytes(r.take(n)).decode("utf-8"))
        except UnicodeDecodeError:
            raise ModelFormatError("label name is not UTF-8") from None
    (count,) = r.unpack(_U32)
    if count != n_trees:
        raise ModelFormatError(f"config says {n_trees} trees, stream holds {count}")
    trees = tuple(_decode_tree(r, k, feature_len) for _ in range(count))
    if r.pos != len(r.data):
        raise ModelFormatError(f"{len(r.data) - r.pos} trailing bytes after the last tree")
    return ForestModel(trees, config, tuple(names), feature_len)
