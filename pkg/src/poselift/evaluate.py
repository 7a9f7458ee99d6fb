"""MPJPE metric, the flag-ablation grid, the capacity sweep and the
crop-geometry scoring harness.

MPJPE root-centers predictions and ground truth, then averages the
per-joint Euclidean distance over samples and joints. By default ALL joints
enter the average, so the root contributes an exact zero to every sample;
set count_root=False for the non-root convention. Every report records
which convention produced it.
"""

import math
import statistics
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import InvalidInputError
from .network import forward, init_network
from .preprocess import denormalize, normalize, root_center, to_input_vector, vectors_to_poses

PREDICT_CHUNK = 256

# (maxnorm, batchnorm, residual) rows of the standard 8-way toggle grid.
ABLATION_FLAG_ORDER = tuple(
    (bool(mn), bool(bn), bool(res))
    for mn in (0, 1) for bn in (0, 1) for res in (0, 1)
)


def mpjpe(preds, gts, spec, count_root=True):
    """Mean per-joint position error in the input unit (mm for poses).

    preds/gts: arrays (N, J, 3) or sequences of (J, 3) poses. Both sides are
    root-centered before comparison, so any common per-sample translation
    cancels out.
    """
    preds = np.asarray(preds, dtype=np.float64)
    gts = np.asarray(gts, dtype=np.float64)
    if preds.shape != gts.shape:
        raise InvalidInputError(f"shape mismatch: {preds.shape} vs {gts.shape}")
    if preds.ndim != 3 or preds.shape[1] != spec.joint_count or preds.shape[2] != 3:
        raise InvalidInputError(
            f"expected (N, {spec.joint_count}, 3) poses, got {preds.shape}"
        )
    root = spec.root_index
    preds = preds - preds[:, root:root + 1]
    gts = gts - gts[:, root:root + 1]
    dists = np.sqrt(((preds - gts) ** 2).sum(axis=2))  # (N, J)
    if not count_root:
        keep = [j for j in range(spec.joint_count) if j != root]
        dists = dists[:, keep]
    return float(dists.mean())


def predict_poses(net, x_norm, stats_y, spec):
    """Eval-mode lift of normalized input vectors to (N, J, 3) poses."""
    outs = []
    for start in range(0, x_norm.shape[0], PREDICT_CHUNK):
        out, _ = forward(net, x_norm[start:start + PREDICT_CHUNK], mode="eval")
        outs.append(out)
    raw = denormalize(np.concatenate(outs, axis=0) if outs else np.zeros((0, spec.output_dim)),
                      stats_y)
    return vectors_to_poses(raw, spec)


def lift_image_joints(joints2d, net, stats_x, stats_y, spec):
    """Full inference path for raw image-pixel joints: (N, J, 2) -> (N, J, 3)."""
    x = np.stack([to_input_vector(root_center(p, spec), spec) for p in joints2d])
    return predict_poses(net, normalize(x, stats_x), stats_y, spec)


@dataclass
class AblationRow:
    use_maxnorm: bool
    use_batchnorm: bool
    use_residual: bool
    val_mpjpe: float
    diverged: bool = False


@dataclass
class AblationReport:
    rows: list
    seed: int
    config_hash: str = ""
    mpjpe_joints: str = "all"

    def row(self, use_maxnorm, use_batchnorm, use_residual):
        for r in self.rows:
            if (r.use_maxnorm, r.use_batchnorm, r.use_residual) == (
                bool(use_maxnorm), bool(use_batchnorm), bool(use_residual)
            ):
                return r
        raise InvalidInputError("flag combination missing from report")

    def to_csv_text(self):
        lines = [
            "# poselift-report ablation v1",
            f"# config_hash={self.config_hash}",
            f"# seed={self.seed}",
            f"# mpjpe_joints={self.mpjpe_joints}",
            "maxnorm,batchnorm,residual,val_mpjpe,diverged",
        ]
        for r in self.rows:
            lines.append(
                f"{int(r.use_maxnorm)},{int(r.use_batchnorm)},{int(r.use_residual)},"
                f"{r.val_mpjpe!r},{int(r.diverged)}"
            )
        return "\n".join(lines) + "\n"

    def to_pretty_text(self):
        lines = [
            f"ablation grid  (seed {self.seed}, mpjpe over {self.mpjpe_joints} joints)",
            f"{'max-norm':>8}  {'batch-norm':>10}  {'residual':>8}  {'val mpjpe':>12}",
        ]
        for r in self.rows:
            mark = lambda b: "yes" if b else "no"
            value = "diverged" if r.diverged else f"{r.val_mpjpe:.3f}"
            lines.append(
                f"{mark(r.use_maxnorm):>8}  {mark(r.use_batchnorm):>10}  "
                f"{mark(r.use_residual):>8}  {value:>12}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class SweepCell:
    num_blocks: int
    width: int
    val_mpjpe: float
    diverged: bool = False


@dataclass
class SweepReport:
    cells: list
    seed: int
    config_hash: str = ""
    mpjpe_joints: str = "all"

    def to_csv_text(self):
        lines = [
            "# poselift-report sweep v1",
            f"# config_hash={self.config_hash}",
            f"# seed={self.seed}",
            f"# mpjpe_joints={self.mpjpe_joints}",
            "blocks,width,val_mpjpe,diverged",
        ]
        for c in self.cells:
            lines.append(f"{c.num_blocks},{c.width},{c.val_mpjpe!r},{int(c.diverged)}")
        return "\n".join(lines) + "\n"

    def to_pretty_text(self):
        lines = [f"capacity sweep  (seed {self.seed})",
                 f"{'blocks':>6}  {'width':>6}  {'val mpjpe':>12}"]
        for c in self.cells:
            value = "diverged" if c.diverged else f"{c.val_mpjpe:.3f}"
            lines.append(f"{c.num_blocks:>6}  {c.width:>6}  {value:>12}")
        return "\n".join(lines) + "\n"


def _train_one(data, config, width, num_blocks, flags, dropout_rate, maxnorm_c):
    from .training import train  # late import: training depends on this module

    use_maxnorm, use_batchnorm, use_residual = flags
    net = init_network(
        data.spec, width, num_blocks,
        use_batchnorm=use_batchnorm, use_residual=use_residual, use_maxnorm=use_maxnorm,
        dropout_rate=dropout_rate, maxnorm_c=maxnorm_c, seed=config.seed,
    )
    log = train(net, data, config)
    if log.diverged or not log.entries:
        return net, log, math.nan, True
    final = log.entries[-1].val_mpjpe
    return net, log, final, not math.isfinite(final)


def run_ablation(data, config, width, num_blocks, dropout_rate=0.5, maxnorm_c=1.0,
                 config_hash=""):
    """Train the 8 flag combinations with one seed and data order.

    data must be a normalized LiftingData with train and val splits. A cell
    whose training hits a non-finite loss is flagged as diverged instead of
    aborting the grid.
    """
    if "train" not in data.splits or "val" not in data.splits:
        raise InvalidInputError("ablation needs train and val splits")
    rows = []
    for flags in ABLATION_FLAG_ORDER:
        _, _, final, diverged = _train_one(
            data, config, width, num_blocks, flags, dropout_rate, maxnorm_c
        )
        rows.append(AblationRow(*flags, val_mpjpe=final, diverged=diverged))
    return AblationReport(rows=rows, seed=config.seed, config_hash=config_hash)


def median_over_reports(reports, flags):
    """Median val MPJPE of one flag combination across several reports."""
    return statistics.median(r.row(*flags).val_mpjpe for r in reports)


def capacity_sweep(data, config, blocks_list, widths_list, *, use_batchnorm=True,
                   use_residual=True, use_maxnorm=True, dropout_rate=0.5, maxnorm_c=1.0,
                   config_hash=""):
    """One training run per (blocks, width) cell, row-major, shared seed."""
    if not blocks_list or not widths_list:
        raise InvalidInputError("sweep grids must be non-empty")
    cells = []
    for num_blocks in blocks_list:
        for width in widths_list:
            _, _, final, diverged = _train_one(
                data, config, width, num_blocks,
                (use_maxnorm, use_batchnorm, use_residual), dropout_rate, maxnorm_c,
            )
            cells.append(SweepCell(num_blocks, width, final, diverged))
    return SweepReport(cells=cells, seed=config.seed, config_hash=config_hash)


def detector_boxes(joints2d_list, margin_frac=0.0):
    """Tight boxes around 2D joints, a stand-in for a person detector."""
    boxes = []
    for joints in joints2d_list:
        joints = np.asarray(joints)
        lo = joints.min(axis=0)
        hi = joints.max(axis=0)
        size = hi - lo
        pad = margin_frac * size
        boxes.append(geometry.BoundingBox(
            float(lo[0] - pad[0] / 2), float(lo[1] - pad[1] / 2),
            float(size[0] + pad[0]), float(size[1] + pad[1]),
        ))
    return boxes


def integer_grid_stage(points):
    """2D stage that snaps crop coordinates to integer cells, the same
    quantization a peak-picked heatmap grid would introduce."""
    return np.rint(points)


def evaluate_with_cr_toggle(samples2d, gt3d, boxes, net, stats_x, stats_y, spec, *,
                            image_w, image_h, stage=None, margin_frac=geometry.DEFAULT_MARGIN,
                            out_size=geometry.DEFAULT_OUT_SIZE, count_root=True):
    """Score the lifter with and without the square-crop geometry.

    The crop path sends each sample's image joints through
    crop -> 2D stage -> inverse crop; the naive path rescales the full image
    to the same working resolution instead (anisotropic for non-square
    images) and back. stage operates in working-resolution coordinates and
    defaults to the identity, in which case both paths reproduce the joints
    exactly and the two scores agree to float precision.

    Returns (mpjpe_with_crop, mpjpe_without_crop).
    """
    if boxes is None:
        raise InvalidInputError("detector boxes are required for the crop toggle")
    samples2d = [np.asarray(p, dtype=np.float64) for p in samples2d]
    if len(boxes) != len(samples2d):
        raise InvalidInputError("one box per sample is required")
    if stage is None:
        stage = lambda p: p

    crop_joints = []
    naive_joints = []
    scale = np.array([out_size / image_w, out_size / image_h])
    for joints, box in zip(samples2d, boxes):
        t = geometry.make_square_crop(box, margin_frac, image_w, image_h, out_size)
        crop_joints.append(geometry.invert_crop(t, stage(geometry.apply_crop(t, joints))))
        naive_joints.append(stage(joints * scale) / scale)

    pred_crop = lift_image_joints(crop_joints, net, stats_x, stats_y, spec)
    pred_naive = lift_image_joints(naive_joints, net, stats_x, stats_y, spec)
    gt3d = np.asarray(gt3d, dtype=np.float64)
    return (
        mpjpe(pred_crop, gt3d, spec, count_root=count_root),
        mpjpe(pred_naive, gt3d, spec, count_root=count_root),
    )
