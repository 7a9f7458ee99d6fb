"""Dataset containers and the line-delimited sample file format.

One sample per line, comma separated:

    id,split,cam,u0,v0,...,u{J-1},v{J-1},x0,y0,z0,...,x{J-1},y{J-1},z{J-1}

2D joints are image pixels (detector output scale, NOT root-centered so the
crop harness can work on them); 3D joints are camera-frame millimeters.
Joint order is fixed by the header. Header lines start with '#':

    # poselift-dataset v1
    # config_hash=<hex>
    # joints=<comma separated names>
    # root=<index>
    # image_size=<w>,<h>

Floats are written with repr() so a rerun with the same seed produces a
byte-identical file.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .preprocess import fit_stats, normalize, root_center, to_input_vector, to_output_vector
from .skeleton import SkeletonSpec

SPLITS = ("train", "val", "test")


@dataclass
class PoseSample:
    sample_id: int
    split: str
    cam_id: int
    joints2d: np.ndarray  # (J, 2) pixels
    joints3d: np.ndarray  # (J, 3) millimeters, camera frame


@dataclass
class DatasetMeta:
    joint_names: tuple
    root_index: int
    image_w: float
    image_h: float
    config_hash: str = ""

    def to_spec(self, vector_includes_root=False):
        return SkeletonSpec(self.joint_names, self.root_index,
                            vector_includes_root=vector_includes_root)


def _fmt(values):
    return ",".join(repr(float(v)) for v in values)


def write_dataset(path, samples, meta):
    lines = [
        "# poselift-dataset v1",
        f"# config_hash={meta.config_hash}",
        "# joints=" + ",".join(meta.joint_names),
        f"# root={meta.root_index}",
        f"# image_size={meta.image_w!r},{meta.image_h!r}",
    ]
    for s in samples:
        lines.append(
            f"{s.sample_id},{s.split},{s.cam_id},"
            f"{_fmt(s.joints2d.reshape(-1))},{_fmt(s.joints3d.reshape(-1))}"
        )
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def read_dataset(path):
    header = {}
    samples = []
    joint_count = None
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    header[key.strip()] = value.strip()
                elif body.startswith("poselift-dataset"):
                    header["format"] = body
                continue
            if joint_count is None:
                if "joints" not in header:
                    raise InvalidInputError(f"{path}: missing '# joints=' header")
                joint_count = len(header["joints"].split(","))
            fields = line.split(",")
            expected = 3 + 5 * joint_count
            if len(fields) != expected:
                raise InvalidInputError(
                    f"{path}:{lineno}: expected {expected} fields, got {len(fields)}"
                )
            split = fields[1]
            if split not in SPLITS:
                raise InvalidInputError(f"{path}:{lineno}: unknown split {split!r}")
            coords = np.array([float(v) for v in fields[3:]], dtype=np.float64)
            if not np.all(np.isfinite(coords)):
                raise InvalidInputError(f"{path}:{lineno}: non-finite coordinates")
            j2 = coords[: 2 * joint_count].reshape(joint_count, 2)
            j3 = coords[2 * joint_count:].reshape(joint_count, 3)
            samples.append(PoseSample(int(fields[0]), split, int(fields[2]), j2, j3))
    if joint_count is None:
        raise InvalidInputError(f"{path}: no samples found")
    try:
        image_w, image_h = (float(v) for v in header["image_size"].split(","))
    except KeyError:
        raise InvalidInputError(f"{path}: missing '# image_size=' header") from None
    meta = DatasetMeta(
        joint_names=tuple(header["joints"].split(",")),
        root_index=int(header.get("root", "0")),
        image_w=image_w,
        image_h=image_h,
        config_hash=header.get("config_hash", ""),
    )
    return samples, meta


@dataclass
class SplitArrays:
    """Flattened training pairs plus the per-sample poses they came from."""

    ids: np.ndarray  # (N,)
    x: np.ndarray  # (N, 2n) input vectors
    y: np.ndarray  # (N, 3n) target vectors
    gt3d: np.ndarray  # (N, J, 3) root-centered 3D poses, mm
    raw2d: np.ndarray  # (N, J, 2) uncentered image pixels


@dataclass
class LiftingData:
    spec: SkeletonSpec
    splits: dict = field(default_factory=dict)
    stats_x: object = None
    stats_y: object = None
    normalized: bool = False


def build_lifting_data(samples, spec):
    """Root-center and flatten samples into per-split arrays (unnormalized)."""
    buckets = {name: [] for name in SPLITS}
    for s in samples:
        buckets[s.split].append(s)
    splits = {}
    for name, bucket in buckets.items():
        n = len(bucket)
        ids = np.array([s.sample_id for s in bucket], dtype=np.int64)
        x = np.zeros((n, spec.input_dim), dtype=np.float64)
        y = np.zeros((n, spec.output_dim), dtype=np.float64)
        gt3d = np.zeros((n, spec.joint_count, 3), dtype=np.float64)
        raw2d = np.zeros((n, spec.joint_count, 2), dtype=np.float64)
        for i, s in enumerate(bucket):
            centered2d = root_center(s.joints2d, spec)
            centered3d = root_center(s.joints3d, spec)
            x[i] = to_input_vector(centered2d, spec)
            y[i] = to_output_vector(centered3d, spec)
            gt3d[i] = centered3d
            raw2d[i] = s.joints2d
        splits[name] = SplitArrays(ids, x, y, gt3d, raw2d)
    return LiftingData(spec=spec, splits=splits)


def normalize_lifting_data(data, stats_x=None, stats_y=None):
    """Standardize every split, fitting stats on the train split when absent.

    Returns a new LiftingData; the input is left untouched.
    """
    if data.normalized:
        raise InvalidInputError("data is already normalized")
    if stats_x is None or stats_y is None:
        train = data.splits.get("train")
        if train is None or train.x.shape[0] == 0:
            raise InvalidInputError("cannot fit stats: train split is empty")
        stats_x = stats_x or fit_stats(train.x)
        stats_y = stats_y or fit_stats(train.y)
    splits = {}
    for name, s in data.splits.items():
        splits[name] = SplitArrays(
            ids=s.ids,
            x=normalize(s.x, stats_x) if s.x.shape[0] else s.x,
            y=normalize(s.y, stats_y) if s.y.shape[0] else s.y,
            gt3d=s.gt3d,
            raw2d=s.raw2d,
        )
    return LiftingData(spec=data.spec, splits=splits, stats_x=stats_x, stats_y=stats_y,
                       normalized=True)


def write_pose2d_file(path, ids, joints2d, joint_names):
    """2D keypoint file for `poselift predict`: id,u0,v0,...  (image pixels)."""
    lines = ["# poselift-pose2d v1", "# joints=" + ",".join(joint_names)]
    for sample_id, pose in zip(ids, joints2d):
        lines.append(f"{sample_id},{_fmt(np.asarray(pose).reshape(-1))}")
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def read_pose2d_file(path):
    ids, poses = [], []
    joint_count = None
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "joints=" in line:
                    joint_count = len(line.split("joints=", 1)[1].split(","))
                continue
            fields = line.split(",")
            if joint_count is None:
                if (len(fields) - 1) % 2:
                    raise InvalidInputError(f"{path}:{lineno}: odd coordinate count")
                joint_count = (len(fields) - 1) // 2
            if len(fields) != 1 + 2 * joint_count:
                raise InvalidInputError(f"{path}:{lineno}: bad field count")
            ids.append(int(fields[0]))
            poses.append(np.array([float(v) for v in fields[1:]]).reshape(joint_count, 2))
    if not ids:
        raise InvalidInputError(f"{path}: no poses found")
    return ids, poses


def write_pose3d_file(path, ids, poses3d, joint_names):
    """Predicted 3D poses, root-relative millimeters: id,x0,y0,z0,..."""
    lines = ["# poselift-pose3d v1", "# joints=" + ",".join(joint_names)]
    for sample_id, pose in zip(ids, poses3d):
        lines.append(f"{sample_id},{_fmt(np.asarray(pose).reshape(-1))}")
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
