"""Loss, optimizers, the training loop and the finite-difference check.

Training minimizes the mean squared error between predicted and target
output vectors over minibatches. Everything stochastic (epoch shuffling,
dropout masks) is driven by one generator seeded from the config, so a run
is a deterministic function of (initial network, dataset, config).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ContractViolationError, InvalidInputError
from .evaluate import mpjpe, predict_poses
from .network import apply_max_norm, backward, forward

EVAL_CHUNK = 256


@dataclass
class TrainingConfig:
    batch_size: int = 64
    epochs: int = 200
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    lr_decay: float = 0.96  # multiplicative, per epoch
    seed: int = 1
    shuffle: bool = True
    # None = keep the network's own settings
    dropout_rate: float | None = None
    maxnorm_c: float | None = None

    def validate(self):
        if self.batch_size < 1:
            raise InvalidInputError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise InvalidInputError(f"epochs must be >= 0, got {self.epochs}")
        if not self.learning_rate > 0:
            raise InvalidInputError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.optimizer not in ("sgd", "adam"):
            raise InvalidInputError(f"optimizer must be sgd or adam, got {self.optimizer!r}")
        if not 0 < self.lr_decay <= 1:
            raise InvalidInputError(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        if self.dropout_rate is not None and not 0 <= self.dropout_rate < 1:
            raise InvalidInputError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.maxnorm_c is not None and not self.maxnorm_c > 0:
            raise InvalidInputError(f"maxnorm_c must be positive, got {self.maxnorm_c}")


@dataclass
class LogEntry:
    epoch: int
    train_loss: float
    val_mpjpe: float
    lr: float


@dataclass
class TrainingLog:
    """One entry per trained epoch; empty when epochs == 0."""

    entries: list = field(default_factory=list)
    diverged: bool = False
    diverged_epoch: int | None = None
    mpjpe_joints: str = "all"

    def to_csv_text(self, config_hash=""):
        lines = ["# poselift-log v1"]
        if config_hash:
            lines.append(f"# config_hash={config_hash}")
        lines.append(f"# mpjpe_joints={self.mpjpe_joints}")
        if self.diverged:
            lines.append(f"# diverged_at_epoch={self.diverged_epoch}")
        lines.append("epoch,train_loss,val_mpjpe,lr")
        for e in self.entries:
            lines.append(f"{e.epoch},{e.train_loss!r},{e.val_mpjpe!r},{e.lr!r}")
        return "\n".join(lines) + "\n"


def mse_loss(pred, target):
    """loss = (1/N) sum_i ||pred_i - target_i||^2 and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 2:
        raise InvalidInputError(
            f"pred and target must share an (N, d) shape, got {pred.shape} vs {target.shape}"
        )
    return _kernels.get().mse_loss_grad(pred, target)


@dataclass
class OptimizerState:
    step: int = 0
    lr: float | None = None  # decayed rate set by the loop; None = config value
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_optimizer_state(net, config):
    state = OptimizerState()
    if config.optimizer == "adam":
        for name, p in net.parameters():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
    return state


def optimizer_step(net, grads, state, config):
    """Apply one update in place; runs the max-norm projection afterwards
    when the network asks for it. Returns the advanced state."""
    kern = _kernels.get()
    state.step += 1
    lr = state.lr if state.lr is not None else config.learning_rate
    for name, p in net.parameters():
        g = grads.get(name)
        if g is None or g.shape != p.shape:
            raise ContractViolationError(
                f"gradient for {name} is missing or misshaped "
                f"({None if g is None else g.shape} vs {p.shape})"
            )
        if config.optimizer == "sgd":
            kern.sgd_update(p.reshape(-1), g.reshape(-1), lr)
        else:
            kern.adam_update(p.reshape(-1), g.reshape(-1),
                             state.m[name].reshape(-1), state.v[name].reshape(-1),
                             lr, config.beta1, config.beta2, config.adam_eps, state.step)
    if net.use_maxnorm:
        apply_max_norm(net, net.maxnorm_c)
    return state


def eval_loss(net, x, y):
    """Eval-mode MSE over a whole split, chunked to keep batches small."""
    total = 0.0
    for start in range(0, x.shape[0], EVAL_CHUNK):
        xb = x[start:start + EVAL_CHUNK]
        yb = y[start:start + EVAL_CHUNK]
        out, _ = forward(net, xb, mode="eval")
        loss, _ = mse_loss(out, yb)
        total += loss * xb.shape[0]
    return total / x.shape[0]


def _val_mpjpe(net, data):
    val = data.splits.get("val")
    if val is None or val.x.shape[0] == 0:
        return math.nan
    preds = predict_poses(net, val.x, data.stats_y, data.spec)
    return mpjpe(preds, val.gt3d, data.spec)


def train(net, data, config):
    """Fit the network on data.splits['train']; returns a TrainingLog.

    data must be normalized (see poselift.data.normalize_lifting_data). The
    per-epoch train_loss is the mean train-mode batch loss; val_mpjpe is
    computed in eval mode on denormalized outputs. A non-finite loss stops
    the run and flags the log instead of raising.
    """
    config.validate()
    if not getattr(data, "normalized", False):
        raise InvalidInputError("training data must be normalized first")
    split = data.splits.get("train")
    if split is None or split.x.shape[0] == 0:
        raise InvalidInputError("training split is empty")
    if net.use_batchnorm and config.batch_size < 2:
        raise InvalidInputError("batch_size must be >= 2 when batch-norm is enabled")
    x, y = split.x, split.y
    if x.shape[1] != net.input_dim or y.shape[1] != net.output_dim:
        raise InvalidInputError(
            f"dataset dims ({x.shape[1]}, {y.shape[1]}) do not match the network "
            f"({net.input_dim}, {net.output_dim})"
        )

    if config.dropout_rate is not None:
        net.dropout_rate = config.dropout_rate
    if config.maxnorm_c is not None:
        net.maxnorm_c = config.maxnorm_c

    rng = np.random.default_rng(config.seed)
    state = init_optimizer_state(net, config)
    log = TrainingLog()

    n = x.shape[0]
    for epoch in range(1, config.epochs + 1):
        lr = config.learning_rate * config.lr_decay ** (epoch - 1)
        state.lr = lr
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            if idx.shape[0] < 2 and net.use_batchnorm:
                continue  # batch variance undefined
            out, cache = forward(net, x[idx], mode="train", rng=rng)
            loss, dloss = mse_loss(out, y[idx])
            if not math.isfinite(loss):
                log.diverged = True
                log.diverged_epoch = epoch
                log.entries.append(LogEntry(epoch, loss, math.nan, lr))
                return log
            grads, _ = backward(net, cache, dloss)
            optimizer_step(net, grads, state, config)
            batch_losses.append(loss)
        train_loss = float(np.mean(batch_losses)) if batch_losses else math.nan
        log.entries.append(LogEntry(epoch, train_loss, _val_mpjpe(net, data), lr))
    return log


def _relative_error(analytic, numeric):
    scale = max(abs(analytic), abs(numeric))
    diff = abs(analytic - numeric)
    if scale < 1e-6:
        return diff  # both effectively zero: compare absolutely
    return diff / scale


def grad_check(net, x, y, eps=1e-5, seed=0):
    """Worst relative error between analytic and central-difference gradients.

    Dropout masks are sampled once and frozen across every finite-difference
    evaluation so the loss surface stays fixed. Meant for small networks
    (it runs 2 forwards per parameter).
    """
    if not eps > 0:
        raise InvalidInputError(f"eps must be positive, got {eps}")
    net = net.copy()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    rng = np.random.default_rng(seed)
    _, cache = forward(net, x, mode="train", rng=rng, update_running=False)
    masks = [sc.mask for sc in cache.stages] if net.dropout_rate > 0 else None

    def loss_at():
        out, c = forward(net, x, mode="train", update_running=False, frozen_masks=masks)
        loss, dloss = mse_loss(out, y)
        return loss, c, dloss

    loss, cache, dloss = loss_at()
    grads, _ = backward(net, cache, dloss)

    worst = 0.0
    for name, p in net.parameters():
        analytic = grads[name]
        flat = p.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + eps
            lp, _, _ = loss_at()
            flat[i] = orig - eps
            lm, _, _ = loss_at()
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * eps)
            worst = max(worst, _relative_error(aflat[i], numeric))
    return worst
