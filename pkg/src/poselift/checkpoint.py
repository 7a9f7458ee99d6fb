"""Self-describing binary checkpoint for trained networks.

Layout (all integers and reals little-endian):

    bytes 0..7    magic b"PLIFTCK1"
    bytes 8..11   uint32 header length in bytes
    header        JSON, UTF-8, sorted keys, no whitespace
    payload       the arrays named by header["arrays"], concatenated in
                  order, each as raw float64 little-endian C-order bytes

The header carries the architecture (width, blocks, flags, dropout,
max-norm radius), the skeleton (joint names, root index, whether vectors
keep the root), the config hash of the producing run and an array manifest
(name, shape). Arrays appear in the order of LiftingNetwork.parameters(),
then the batch-norm running statistics, then the four normalization-stats
vectors in.mean, in.std, out.mean, out.std. Writing is deterministic, so
identical runs produce byte-identical files.
"""

import json
import struct

import numpy as np

from .errors import InvalidInputError
from .network import init_network
from .preprocess import NormStats
from .skeleton import SkeletonSpec

MAGIC = b"PLIFTCK1"


def _array_entries(net, stats_x, stats_y):
    entries = list(net.parameters())
    entries.extend(net.running_stats())
    entries.append(("norm.in.mean", stats_x.mean))
    entries.append(("norm.in.std", stats_x.std))
    entries.append(("norm.out.mean", stats_y.mean))
    entries.append(("norm.out.std", stats_y.std))
    return entries


def save_checkpoint(path, net, spec, stats_x, stats_y, config_hash=""):
    entries = _array_entries(net, stats_x, stats_y)
    header = {
        "format": "poselift-checkpoint",
        "version": 1,
        "config_hash": config_hash,
        "arch": {
            "width": net.width,
            "num_blocks": net.num_blocks,
            "use_batchnorm": net.use_batchnorm,
            "use_residual": net.use_residual,
            "use_maxnorm": net.use_maxnorm,
            "dropout_rate": net.dropout_rate,
            "maxnorm_c": net.maxnorm_c,
        },
        "skeleton": {
            "joint_names": list(spec.joint_names),
            "root_index": spec.root_index,
            "vector_includes_root": spec.vector_includes_root,
        },
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in entries],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for _, arr in entries:
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (net, spec, stats_x, stats_y, header)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != MAGIC:
        raise InvalidInputError(f"{path}: not a poselift checkpoint")
    header_len = int(np.frombuffer(raw[8:12], dtype="<u4")[0])
    header = json.loads(raw[12:12 + header_len].decode("utf-8"))
    arch = header["arch"]
    skel = header["skeleton"]
    spec = SkeletonSpec(tuple(skel["joint_names"]), skel["root_index"],
                        vector_includes_root=skel["vector_includes_root"])
    net = init_network(
        spec, arch["width"], arch["num_blocks"],
        use_batchnorm=arch["use_batchnorm"], use_residual=arch["use_residual"],
        use_maxnorm=arch["use_maxnorm"], dropout_rate=arch["dropout_rate"],
        maxnorm_c=arch["maxnorm_c"], seed=0,
    )

    offset = 12 + header_len
    loaded = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        loaded[entry["name"]] = arr.reshape(shape).astype(np.float64)
    if offset != len(raw):
        raise InvalidInputError(f"{path}: trailing bytes after array payload")

    for name, arr in net.parameters():
        if name not in loaded:
            raise InvalidInputError(f"{path}: checkpoint is missing array {name}")
        if loaded[name].shape != arr.shape:
            raise InvalidInputError(f"{path}: array {name} has shape "
                                    f"{loaded[name].shape}, expected {arr.shape}")
        arr[...] = loaded[name]
    for name, arr in net.running_stats():
        arr[...] = loaded[name]
    stats_x = NormStats(loaded["norm.in.mean"], loaded["norm.in.std"])
    stats_y = NormStats(loaded["norm.out.mean"], loaded["norm.out.std"])
    return net, spec, stats_x, stats_y, header
