"""Pose normalization: root-centering, flattening, and standardization.

The lifting network consumes flattened vectors. A 2D pose becomes a vector
of (x, y) pairs and a 3D pose a vector of (x, y, z) triples, both in the
skeleton's joint order with the root joint dropped (it is identically zero
after root-centering; see SkeletonSpec.vector_includes_root for the
alternative). Standardization is per flattened dimension.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, InvalidInputError

STD_FLOOR = 1e-8
ROOT_CENTER_TOL = 1e-9


@dataclass(frozen=True)
class NormStats:
    """Per-dimension mean and standard deviation of flattened vectors."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        if mean.shape != std.shape or mean.ndim != 1:
            raise InvalidInputError(f"bad stats shapes: mean {mean.shape}, std {std.shape}")
        if np.any(std < STD_FLOOR):
            raise InvalidInputError(f"std entries must be >= {STD_FLOOR}")


def _check_pose(pose, spec):
    pose = np.asarray(pose, dtype=np.float64)
    if pose.ndim != 2 or pose.shape[0] != spec.joint_count or pose.shape[1] not in (2, 3):
        raise InvalidInputError(
            f"pose must be ({spec.joint_count}, 2|3), got shape {pose.shape}"
        )
    if not np.all(np.isfinite(pose)):
        raise InvalidInputError("pose contains non-finite values")
    return pose


def root_center(pose, spec):
    """Subtract the root joint from every joint. The root lands exactly at 0."""
    pose = _check_pose(pose, spec)
    return pose - pose[spec.root_index]


def _lifted_indices(spec):
    if spec.vector_includes_root:
        return np.arange(spec.joint_count)
    return np.array([j for j in range(spec.joint_count) if j != spec.root_index])


def to_input_vector(pose, spec):
    """Flatten a root-centered 2D pose into the network input vector."""
    pose = _check_pose(pose, spec)
    if pose.shape[1] != 2:
        raise InvalidInputError(f"expected a 2D pose, got shape {pose.shape}")
    if np.max(np.abs(pose[spec.root_index])) > ROOT_CENTER_TOL:
        raise ContractViolationError(
            f"pose is not root-centered (root offset {pose[spec.root_index]})"
        )
    return pose[_lifted_indices(spec)].reshape(-1).copy()


def to_output_vector(pose, spec):
    """Flatten a root-centered 3D pose into the network target vector."""
    pose = _check_pose(pose, spec)
    if pose.shape[1] != 3:
        raise InvalidInputError(f"expected a 3D pose, got shape {pose.shape}")
    if np.max(np.abs(pose[spec.root_index])) > ROOT_CENTER_TOL:
        raise ContractViolationError(
            f"pose is not root-centered (root offset {pose[spec.root_index]})"
        )
    return pose[_lifted_indices(spec)].reshape(-1).copy()


def from_output_vector(v, spec):
    """Rebuild a 3D pose from a network output vector; the root sits at 0."""
    v = np.asarray(v, dtype=np.float64)
    expected = spec.output_dim
    if v.shape != (expected,):
        raise InvalidInputError(f"expected vector of length {expected}, got shape {v.shape}")
    pose = np.zeros((spec.joint_count, 3), dtype=np.float64)
    pose[_lifted_indices(spec)] = v.reshape(-1, 3)
    return pose


def vectors_to_poses(vs, spec):
    """Batch form of from_output_vector: (N, 3n) -> (N, J, 3)."""
    vs = np.asarray(vs, dtype=np.float64)
    if vs.ndim != 2 or vs.shape[1] != spec.output_dim:
        raise InvalidInputError(f"expected (N, {spec.output_dim}), got shape {vs.shape}")
    poses = np.zeros((vs.shape[0], spec.joint_count, 3), dtype=np.float64)
    poses[:, _lifted_indices(spec)] = vs.reshape(vs.shape[0], -1, 3)
    return poses


def fit_stats(vectors):
    """Per-dimension sample mean and population standard deviation.

    The std is floored at 1e-8 so constant dimensions cannot blow up the
    downstream division.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise InvalidInputError(f"need a non-empty (N, d) dataset, got shape {vectors.shape}")
    mean = vectors.mean(axis=0)
    std = vectors.std(axis=0)  # population (ddof=0)
    std = np.maximum(std, STD_FLOOR)
    return NormStats(mean, std)


def normalize(v, stats):
    """(v - mean) / std, elementwise. Accepts (d,) or (N, d)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != stats.mean.shape[0]:
        raise InvalidInputError(
            f"vector width {v.shape[-1]} does not match stats width {stats.mean.shape[0]}"
        )
    return (v - stats.mean) / stats.std


def denormalize(v, stats):
    """Exact inverse of normalize."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != stats.mean.shape[0]:
        raise InvalidInputError(
            f"vector width {v.shape[-1]} does not match stats width {stats.mean.shape[0]}"
        )
    return v * stats.std + stats.mean
