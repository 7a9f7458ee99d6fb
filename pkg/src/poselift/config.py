"""Run configuration: defaults, JSON config file, command-line overrides.

The configuration is a small tree of sections. A config file is plain JSON
with the same section/field names; unknown keys anywhere are rejected
before any work starts. Command-line flags override file values, which
override the defaults. config_hash() fingerprints the resolved tree so
output files can state exactly which configuration produced them.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from .errors import InvalidInputError
from .skeleton import H36M17_JOINT_NAMES, SkeletonSpec


@dataclass
class SkeletonSettings:
    joint_names: list = field(default_factory=lambda: list(H36M17_JOINT_NAMES))
    root_index: int = 0
    vector_includes_root: bool = False

    def to_spec(self):
        return SkeletonSpec(tuple(self.joint_names), self.root_index,
                            vector_includes_root=self.vector_includes_root)


@dataclass
class SynthSettings:
    samples: int = 5000
    noise_sigma: float = 3.0
    seed: int = 7

    def validate(self):
        if self.samples < 1:
            raise InvalidInputError(f"synth.samples must be >= 1, got {self.samples}")
        if self.noise_sigma < 0:
            raise InvalidInputError(f"synth.noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass
class ArchSettings:
    width: int = 128
    blocks: int = 1
    batchnorm: bool = True
    residual: bool = True
    maxnorm: bool = True
    dropout: float = 0.5
    maxnorm_c: float = 1.0

    def validate(self):
        if self.width < 1:
            raise InvalidInputError(f"arch.width must be >= 1, got {self.width}")
        if self.blocks < 0:
            raise InvalidInputError(f"arch.blocks must be >= 0, got {self.blocks}")
        if not 0 <= self.dropout < 1:
            raise InvalidInputError(f"arch.dropout must be in [0, 1), got {self.dropout}")
        if not self.maxnorm_c > 0:
            raise InvalidInputError(f"arch.maxnorm_c must be positive, got {self.maxnorm_c}")


@dataclass
class TrainSettings:
    batch_size: int = 64
    epochs: int = 200
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    lr_decay: float = 0.96
    seed: int = 1
    shuffle: bool = True


@dataclass
class EvalSettings:
    mpjpe_joints: str = "all"  # "all" or "nonroot"
    margin_frac: float = 0.15
    out_size: int = 224
    ablation_seeds: list = field(default_factory=lambda: [1, 2, 3])

    def validate(self):
        if self.mpjpe_joints not in ("all", "nonroot"):
            raise InvalidInputError(
                f"eval.mpjpe_joints must be 'all' or 'nonroot', got {self.mpjpe_joints!r}"
            )
        if self.margin_frac < 0:
            raise InvalidInputError(f"eval.margin_frac must be >= 0, got {self.margin_frac}")
        if self.out_size < 1:
            raise InvalidInputError(f"eval.out_size must be >= 1, got {self.out_size}")
        if not self.ablation_seeds:
            raise InvalidInputError("eval.ablation_seeds must be non-empty")


_SECTIONS = {
    "skeleton": SkeletonSettings,
    "synth": SynthSettings,
    "arch": ArchSettings,
    "train": TrainSettings,
    "eval": EvalSettings,
}


@dataclass
class RunConfig:
    skeleton: SkeletonSettings = field(default_factory=SkeletonSettings)
    synth: SynthSettings = field(default_factory=SynthSettings)
    arch: ArchSettings = field(default_factory=ArchSettings)
    train: TrainSettings = field(default_factory=TrainSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)

    def validate(self):
        self.skeleton.to_spec()  # raises on bad skeletons
        self.synth.validate()
        self.arch.validate()
        self.eval.validate()
        self.training_config().validate()

    def training_config(self):
        from .training import TrainingConfig

        t = self.train
        return TrainingConfig(
            batch_size=t.batch_size, epochs=t.epochs, learning_rate=t.learning_rate,
            optimizer=t.optimizer, beta1=t.beta1, beta2=t.beta2, adam_eps=t.adam_eps,
            lr_decay=t.lr_decay, seed=t.seed, shuffle=t.shuffle,
        )

    def config_hash(self):
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _apply_section(settings, values, section_name):
    known = {f.name for f in fields(settings)}
    for key, value in values.items():
        if key not in known:
            raise InvalidInputError(
                f"unknown config key '{section_name}.{key}' "
                f"(known: {', '.join(sorted(known))})"
            )
        setattr(settings, key, value)


def load_config_file(path, config=None):
    """Apply a JSON config file on top of config (or fresh defaults)."""
    config = config or RunConfig()
    try:
        with open(path) as f:
            tree = json.load(f)
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(tree, dict):
        raise InvalidInputError(f"{path}: config root must be a JSON object")
    for section, values in tree.items():
        if section not in _SECTIONS:
            raise InvalidInputError(
                f"unknown config section '{section}' (known: {', '.join(sorted(_SECTIONS))})"
            )
        if not isinstance(values, dict):
            raise InvalidInputError(f"config section '{section}' must be an object")
        _apply_section(getattr(config, section), values, section)
    return config
