"""Skeleton joint-order conventions shared by every module.

A pose is a plain float64 array of shape (J, 2) or (J, 3) whose rows follow
the joint order of a SkeletonSpec. The default skeleton uses the common
17-joint order with the hip (pelvis) as joint 0.
"""

from dataclasses import dataclass

H36M17_JOINT_NAMES = (
    "Hip",
    "RHip",
    "RKnee",
    "RFoot",
    "LHip",
    "LKnee",
    "LFoot",
    "Spine",
    "Thorax",
    "Neck",
    "Head",
    "LShoulder",
    "LElbow",
    "LWrist",
    "RShoulder",
    "RElbow",
    "RWrist",
)


@dataclass(frozen=True)
class SkeletonSpec:
    """Joint naming, ordering and the root (hip) joint index.

    vector_includes_root controls whether the flattened network vectors keep
    the root joint. After root-centering the root coordinates are identically
    zero, so the default is to drop it (16 lifted joints for the 17-joint
    skeleton: inputs of length 32, outputs of length 48).
    """

    joint_names: tuple
    root_index: int = 0
    vector_includes_root: bool = False

    def __post_init__(self):
        names = tuple(self.joint_names)
        object.__setattr__(self, "joint_names", names)
        if len(names) < 2:
            raise ValueError("skeleton needs at least 2 joints")
        if len(set(names)) != len(names):
            raise ValueError("joint names must be unique")
        if not 0 <= self.root_index < len(names):
            raise ValueError(f"root_index {self.root_index} out of range")

    @property
    def joint_count(self):
        return len(self.joint_names)

    @property
    def lifted_joint_count(self):
        """Number of joints carried in the flattened network vectors."""
        if self.vector_includes_root:
            return self.joint_count
        return self.joint_count - 1

    @property
    def input_dim(self):
        return 2 * self.lifted_joint_count

    @property
    def output_dim(self):
        return 3 * self.lifted_joint_count


def default_skeleton():
    return SkeletonSpec(H36M17_JOINT_NAMES, root_index=0)
