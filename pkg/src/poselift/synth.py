"""Synthetic paired 2D/3D pose data.

Poses are sampled by a forward-kinematics walk over a bone tree: every joint
sits at its parent plus bone_length times a random unit direction drawn
uniformly from a cone around the bone's rest direction. The world frame has
x to the right, y down (matching image v) and z along the camera axis; the
root joint sits at the world origin and the camera translation supplies the
subject distance.

Projection is a standard pinhole: p_cam = R p + t, u = fx x/z + cx,
v = fy y/z + cy. 3D targets are stored in the camera frame so one network
can learn samples taken from several cameras.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import PoseSample
from .errors import DegenerateGeometryError, InvalidInputError
from .skeleton import default_skeleton

ORTHONORMAL_TOL = 1e-9

# Image geometry shared with the crop harness (principal point at the center).
DEFAULT_IMAGE_W = 1000.0
DEFAULT_IMAGE_H = 1000.0
DEFAULT_FOCAL = 1150.0

TRAIN_FRAC = 0.70
VAL_FRAC = 0.15


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray  # (3, 3) orthonormal
    translation: np.ndarray  # (3,) millimeters

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=np.float64)
        translation = np.asarray(self.translation, dtype=np.float64)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be positive")
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise InvalidInputError("rotation must be (3,3) and translation (3,)")
        err = np.max(np.abs(rotation.T @ rotation - np.eye(3)))
        if err > ORTHONORMAL_TOL:
            raise InvalidInputError(f"rotation is not orthonormal (error {err:.3g})")


@dataclass(frozen=True)
class SkeletonTemplate:
    """Bone tree for the sampler. Joint order follows spec; parents must be
    topologically ordered (parent index < joint index, root parent -1)."""

    spec: object
    parents: tuple
    bone_lengths: tuple  # mm; ignored for the root
    rest_directions: np.ndarray  # (J, 3) unit vectors; row of the root unused
    max_swing: tuple  # radians, cone half-angle per bone

    def __post_init__(self):
        j = self.spec.joint_count
        parents = tuple(self.parents)
        lengths = tuple(float(v) for v in self.bone_lengths)
        swings = tuple(float(v) for v in self.max_swing)
        dirs = np.array(self.rest_directions, dtype=np.float64)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "bone_lengths", lengths)
        object.__setattr__(self, "max_swing", swings)
        if not (len(parents) == len(lengths) == len(swings) == j and dirs.shape == (j, 3)):
            raise InvalidInputError("template arrays must all have one entry per joint")
        root = self.spec.root_index
        if parents[root] != -1:
            raise InvalidInputError("the root joint must have parent -1")
        for i, p in enumerate(parents):
            if i == root:
                continue
            if not 0 <= p < i:
                raise InvalidInputError(
                    f"joint {i} has parent {p}; parents must precede children"
                )
            if lengths[i] <= 0:
                raise InvalidInputError(f"bone length of joint {i} must be positive")
            if not 0 <= swings[i] <= math.pi:
                raise InvalidInputError(f"swing of joint {i} must be in [0, pi]")
            norm = np.linalg.norm(dirs[i])
            if norm == 0:
                raise InvalidInputError(f"rest direction of joint {i} is zero")
            dirs[i] = dirs[i] / norm
        object.__setattr__(self, "rest_directions", dirs)


def _yaw(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def default_camera_pool():
    """Four cameras, 4-6 m away, small yaw offsets, shared intrinsics."""
    f = DEFAULT_FOCAL
    cx, cy = DEFAULT_IMAGE_W / 2.0, DEFAULT_IMAGE_H / 2.0

    def cam(theta, t):
        return CameraModel(f, f, cx, cy, _yaw(theta), np.array(t, dtype=np.float64))

    return (
        cam(0.0, (0.0, 0.0, 5000.0)),
        cam(0.15, (120.0, -60.0, 4200.0)),
        cam(-0.20, (-150.0, 80.0, 5600.0)),
        cam(0.30, (60.0, 40.0, 6000.0)),
    )


def default_template(spec=None):
    """17-joint humanoid with round anthropometric bone lengths (mm)."""
    spec = spec or default_skeleton()
    down, up = (0.0, 1.0, 0.0), (0.0, -1.0, 0.0)
    left, right = (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0)
    rows = [
        # parent, length, rest dir, swing
        (-1, 0.0, down, 0.0),      # Hip (root)
        (0, 130.0, right, 0.20),   # RHip
        (1, 450.0, down, 0.70),    # RKnee (femur)
        (2, 440.0, down, 0.70),    # RFoot (tibia)
        (0, 130.0, left, 0.20),    # LHip
        (4, 450.0, down, 0.70),    # LKnee
        (5, 440.0, down, 0.70),    # LFoot
        (0, 230.0, up, 0.25),      # Spine
        (7, 230.0, up, 0.25),      # Thorax
        (8, 110.0, up, 0.30),      # Neck
        (9, 115.0, up, 0.40),      # Head
        (8, 150.0, left, 0.25),    # LShoulder
        (11, 280.0, down, 1.20),   # LElbow (upper arm)
        (12, 250.0, down, 1.20),   # LWrist (forearm)
        (8, 150.0, right, 0.25),   # RShoulder
        (14, 280.0, down, 1.20),   # RElbow
        (15, 250.0, down, 1.20),   # RWrist
    ]
    if len(rows) != spec.joint_count:
        raise InvalidInputError("default template is built for the 17-joint skeleton")
    return SkeletonTemplate(
        spec=spec,
        parents=tuple(r[0] for r in rows),
        bone_lengths=tuple(r[1] for r in rows),
        rest_directions=np.array([r[2] for r in rows], dtype=np.float64),
        max_swing=tuple(r[3] for r in rows),
    )


def _cone_direction(rest, max_angle, rng):
    """Unit vector uniform on the spherical cap of half-angle max_angle
    around rest. Two uniforms are always consumed, so the draw order does
    not depend on the template."""
    u1, u2 = rng.random(), rng.random()
    cos_a = 1.0 - u1 * (1.0 - math.cos(max_angle))
    sin_a = math.sqrt(max(0.0, 1.0 - cos_a * cos_a))
    phi = 2.0 * math.pi * u2
    # orthonormal frame around the rest direction
    helper = np.array([1.0, 0.0, 0.0]) if abs(rest[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(helper, rest)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(rest, e1)
    return cos_a * rest + sin_a * (math.cos(phi) * e1 + math.sin(phi) * e2)


def sample_pose(template, rng):
    """One world-frame pose (J, 3) in millimeters, root at the origin."""
    spec = template.spec
    pose = np.zeros((spec.joint_count, 3), dtype=np.float64)
    for j in range(spec.joint_count):
        if j == spec.root_index:
            continue
        direction = _cone_direction(template.rest_directions[j], template.max_swing[j], rng)
        pose[j] = pose[template.parents[j]] + template.bone_lengths[j] * direction
    return pose


def camera_frame(cam, pose):
    """Rigid transform into the camera frame: R p + t."""
    return pose @ cam.rotation.T + cam.translation


def project(cam, pose):
    """Pinhole projection of a world-frame pose to (J, 2) image pixels."""
    pc = camera_frame(cam, pose)
    z = pc[:, 2]
    if np.any(z <= 0):
        raise DegenerateGeometryError(
            f"joint behind the camera (min depth {z.min():.3f} mm)"
        )
    uv = np.empty((pose.shape[0], 2), dtype=np.float64)
    uv[:, 0] = cam.fx * pc[:, 0] / z + cam.cx
    uv[:, 1] = cam.fy * pc[:, 1] / z + cam.cy
    return uv


def split_sizes(n):
    """70/15/15 with floor rounding; the leftover lands in the test split."""
    n_train = int(math.floor(n * TRAIN_FRAC))
    n_val = int(math.floor(n * VAL_FRAC))
    return n_train, n_val, n - n_train - n_val


def make_dataset(template, n_samples, camera_pool, noise_sigma, seed):
    """Sample, project and perturb n_samples paired poses.

    Per sample: camera drawn from the pool, pose sampled, 2D joints get
    isotropic Gaussian pixel noise of std noise_sigma (the 3D targets stay
    exact). Split labels are assigned by one seeded shuffle up front, so the
    whole dataset is a deterministic function of (template, pool, seed).
    """
    if n_samples < 1:
        raise InvalidInputError(f"n_samples must be >= 1, got {n_samples}")
    if noise_sigma < 0:
        raise InvalidInputError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if not camera_pool:
        raise InvalidInputError("camera pool is empty")
    rng = np.random.default_rng(seed)

    n_train, n_val, _ = split_sizes(n_samples)
    order = rng.permutation(n_samples)
    split_of = np.empty(n_samples, dtype=object)
    split_of[order[:n_train]] = "train"
    split_of[order[n_train:n_train + n_val]] = "val"
    split_of[order[n_train + n_val:]] = "test"

    samples = []
    for i in range(n_samples):
        cam_id = int(rng.integers(0, len(camera_pool)))
        cam = camera_pool[cam_id]
        pose = sample_pose(template, rng)
        joints2d = project(cam, pose)
        if noise_sigma > 0:
            joints2d = joints2d + rng.normal(0.0, noise_sigma, joints2d.shape)
        samples.append(PoseSample(i, split_of[i], cam_id, joints2d, camera_frame(cam, pose)))
    return samples
