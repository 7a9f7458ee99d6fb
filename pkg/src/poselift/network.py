"""The 2D-to-3D lifting regressor with hand-derived gradients.

Architecture: a dense input stage (2n -> width), a stack of residual blocks,
and a dense output layer (width -> 3n). Every stage is
Dense -> [BatchNorm] -> ReLU -> [Dropout]; a block is two such stages of
equal width whose output is added back to the block input when residual
connections are enabled. Batch-norm, residual skips and the per-row max-norm
weight constraint can each be toggled independently.

forward/backward are exact analytic passes in float64. The elementwise and
reduction kernels come from the selected backend (see poselift._kernels);
matrix products go through numpy.

Concurrency: eval-mode forward only reads the network and may run from many
threads. Training (train-mode forward, backward, parameter updates) mutates
it and must be serialized by the caller.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ContractViolationError, InvalidInputError

DEFAULT_BN_MOMENTUM = 0.1
DEFAULT_BN_EPS = 1e-5
DEFAULT_DROPOUT = 0.5
DEFAULT_MAXNORM_C = 1.0


class DenseLayer:
    """y = x @ weight.T + bias, weight shape (d_out, d_in)."""

    def __init__(self, weight, bias):
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise InvalidInputError(
                f"inconsistent dense shapes: weight {self.weight.shape}, bias {self.bias.shape}"
            )

    @property
    def d_out(self):
        return self.weight.shape[0]

    @property
    def d_in(self):
        return self.weight.shape[1]

    def copy(self):
        return DenseLayer(self.weight.copy(), self.bias.copy())


class BatchNormLayer:
    def __init__(self, dim, momentum=DEFAULT_BN_MOMENTUM, eps=DEFAULT_BN_EPS):
        if not 0 < momentum <= 1:
            raise InvalidInputError(f"momentum must be in (0, 1], got {momentum}")
        if not eps > 0:
            raise InvalidInputError(f"eps must be positive, got {eps}")
        self.gamma = np.ones(dim, dtype=np.float64)
        self.beta = np.zeros(dim, dtype=np.float64)
        self.running_mean = np.zeros(dim, dtype=np.float64)
        self.running_var = np.ones(dim, dtype=np.float64)
        self.momentum = momentum
        self.eps = eps

    def copy(self):
        out = BatchNormLayer(self.gamma.shape[0], self.momentum, self.eps)
        out.gamma = self.gamma.copy()
        out.beta = self.beta.copy()
        out.running_mean = self.running_mean.copy()
        out.running_var = self.running_var.copy()
        return out


class Stage:
    """Dense plus optional batch-norm; ReLU and dropout applied in forward."""

    def __init__(self, dense, bn=None):
        self.dense = dense
        self.bn = bn

    def copy(self):
        return Stage(self.dense.copy(), self.bn.copy() if self.bn is not None else None)


class ResidualBlock:
    def __init__(self, stage1, stage2):
        if stage1.dense.d_out != stage2.dense.d_in or stage1.dense.d_in != stage2.dense.d_out:
            raise InvalidInputError("block stages must share one width")
        self.stage1 = stage1
        self.stage2 = stage2

    def copy(self):
        return ResidualBlock(self.stage1.copy(), self.stage2.copy())


class LiftingNetwork:
    """Parameters plus the architecture flags that shape forward/backward."""

    def __init__(self, input_stage, blocks, output_layer, *, use_batchnorm, use_residual,
                 use_maxnorm, dropout_rate, maxnorm_c):
        if not 0 <= dropout_rate < 1:
            raise InvalidInputError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
        if not maxnorm_c > 0:
            raise InvalidInputError(f"maxnorm_c must be positive, got {maxnorm_c}")
        self.input_stage = input_stage
        self.blocks = list(blocks)
        self.output_layer = output_layer
        self.use_batchnorm = bool(use_batchnorm)
        self.use_residual = bool(use_residual)
        self.use_maxnorm = bool(use_maxnorm)
        self.dropout_rate = float(dropout_rate)
        self.maxnorm_c = float(maxnorm_c)

    @property
    def input_dim(self):
        return self.input_stage.dense.d_in

    @property
    def output_dim(self):
        return self.output_layer.d_out

    @property
    def width(self):
        return self.input_stage.dense.d_out

    @property
    def num_blocks(self):
        return len(self.blocks)

    def stages(self):
        """All Dense+BN stages in forward order (input stage, then blocks)."""
        out = [self.input_stage]
        for block in self.blocks:
            out.append(block.stage1)
            out.append(block.stage2)
        return out

    def dense_layers(self):
        """Named dense layers in the canonical parameter order."""
        out = [("input", self.input_stage.dense)]
        for i, block in enumerate(self.blocks):
            out.append((f"block{i}.fc1", block.stage1.dense))
            out.append((f"block{i}.fc2", block.stage2.dense))
        out.append(("output", self.output_layer))
        return out

    def _named_bn(self):
        out = [("input.bn", self.input_stage.bn)]
        for i, block in enumerate(self.blocks):
            out.append((f"block{i}.bn1", block.stage1.bn))
            out.append((f"block{i}.bn2", block.stage2.bn))
        return [(name, bn) for name, bn in out if bn is not None]

    def parameters(self):
        """Trainable arrays as (name, array) pairs, in a fixed documented order.

        Per dense layer: <name>.weight then <name>.bias, layers in
        dense_layers() order; then gamma/beta of every batch-norm layer in
        stage order. The same order is used by the optimizer, the gradient
        check and the checkpoint file.
        """
        params = []
        for name, layer in self.dense_layers():
            params.append((f"{name}.weight", layer.weight))
            params.append((f"{name}.bias", layer.bias))
        for name, bn in self._named_bn():
            params.append((f"{name}.gamma", bn.gamma))
            params.append((f"{name}.beta", bn.beta))
        return params

    def running_stats(self):
        """Batch-norm running statistics as (name, array) pairs."""
        out = []
        for name, bn in self._named_bn():
            out.append((f"{name}.running_mean", bn.running_mean))
            out.append((f"{name}.running_var", bn.running_var))
        return out

    def copy(self):
        return LiftingNetwork(
            self.input_stage.copy(),
            [b.copy() for b in self.blocks],
            self.output_layer.copy(),
            use_batchnorm=self.use_batchnorm,
            use_residual=self.use_residual,
            use_maxnorm=self.use_maxnorm,
            dropout_rate=self.dropout_rate,
            maxnorm_c=self.maxnorm_c,
        )


@dataclass
class StageCache:
    x_in: np.ndarray
    bn_out: np.ndarray  # post-BN pre-ReLU activations (== pre-activations without BN)
    xhat: np.ndarray | None
    inv_std: np.ndarray | None
    mask: np.ndarray | None


@dataclass
class ForwardCache:
    mode: str
    batch_size: int
    stages: list = field(default_factory=list)
    output_in: np.ndarray | None = None


def _init_dense(rng, d_out, d_in):
    bound = math.sqrt(6.0 / d_in)
    weight = rng.uniform(-bound, bound, size=(d_out, d_in))
    return DenseLayer(weight, np.zeros(d_out, dtype=np.float64))


def init_network(spec, width, num_blocks, *, use_batchnorm=True, use_residual=True,
                 use_maxnorm=True, dropout_rate=DEFAULT_DROPOUT, maxnorm_c=DEFAULT_MAXNORM_C,
                 seed=0):
    """Build a network with uniform(+-sqrt(6/d_in)) weights, zero biases.

    Weight draws happen in dense_layers() order, so the same seed always
    yields bit-identical parameters.
    """
    if width < 1:
        raise InvalidInputError(f"width must be >= 1, got {width}")
    if num_blocks < 0:
        raise InvalidInputError(f"num_blocks must be >= 0, got {num_blocks}")
    rng = np.random.default_rng(seed)

    def make_stage(d_out, d_in):
        dense = _init_dense(rng, d_out, d_in)
        bn = BatchNormLayer(d_out) if use_batchnorm else None
        return Stage(dense, bn)

    input_stage = make_stage(width, spec.input_dim)
    blocks = []
    for _ in range(num_blocks):
        stage1 = make_stage(width, width)
        stage2 = make_stage(width, width)
        blocks.append(ResidualBlock(stage1, stage2))
    output_layer = _init_dense(rng, spec.output_dim, width)
    return LiftingNetwork(
        input_stage, blocks, output_layer,
        use_batchnorm=use_batchnorm, use_residual=use_residual, use_maxnorm=use_maxnorm,
        dropout_rate=dropout_rate, maxnorm_c=maxnorm_c,
    )


def _stage_forward(stage, x, mode, dropout_rate, rng, frozen_mask, update_running, kern):
    pre = x @ stage.dense.weight.T + stage.dense.bias
    xhat = inv_std = None
    if stage.bn is not None:
        bn = stage.bn
        if mode == "train":
            bn_out, xhat, mean, var, inv_std = kern.bn_train_forward(pre, bn.gamma, bn.beta, bn.eps)
            if update_running:
                n = pre.shape[0]
                unbiased = var * (n / (n - 1.0))
                bn.running_mean *= 1.0 - bn.momentum
                bn.running_mean += bn.momentum * mean
                bn.running_var *= 1.0 - bn.momentum
                bn.running_var += bn.momentum * unbiased
        else:
            bn_out = kern.bn_eval_forward(pre, bn.gamma, bn.beta, bn.running_mean,
                                          bn.running_var, bn.eps)
    else:
        bn_out = pre

    mask = None
    if mode == "train" and dropout_rate > 0.0:
        keep = 1.0 - dropout_rate
        if frozen_mask is not None:
            mask = frozen_mask
        else:
            mask = (rng.random(bn_out.shape) < keep).astype(np.float64)
        out = kern.relu_dropout_forward(bn_out, mask, 1.0 / keep)
    else:
        out = kern.relu_forward(bn_out)
    return out, StageCache(x, bn_out, xhat, inv_std, mask)


def forward(net, batch, mode="train", rng=None, *, update_running=True, frozen_masks=None):
    """Run the network on a (N, 2n) batch; returns (output (N, 3n), cache).

    Train mode uses batch statistics for batch-norm (updating the running
    stats unless update_running is False) and samples dropout masks from
    rng. Eval mode uses running statistics, leaves dropout inert and is a
    pure function of (parameters, batch). frozen_masks replays previously
    sampled dropout masks, one per stage; the gradient check relies on this.
    """
    if mode not in ("train", "eval"):
        raise InvalidInputError(f"mode must be 'train' or 'eval', got {mode!r}")
    batch = np.ascontiguousarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise InvalidInputError(
            f"batch must be (N, {net.input_dim}), got shape {batch.shape}"
        )
    n = batch.shape[0]
    if n < 1:
        raise InvalidInputError("batch must contain at least one sample")
    if mode == "train" and net.use_batchnorm and n < 2:
        raise InvalidInputError("train-mode batch-norm needs N >= 2 (batch variance undefined)")
    if mode == "train" and net.dropout_rate > 0.0 and rng is None and frozen_masks is None:
        raise InvalidInputError("train-mode dropout needs an rng (or frozen masks)")

    stages = net.stages()
    if frozen_masks is not None and len(frozen_masks) != len(stages):
        raise InvalidInputError(f"expected {len(stages)} frozen masks, got {len(frozen_masks)}")

    kern = _kernels.get()
    cache = ForwardCache(mode=mode, batch_size=n)

    def run_stage(idx, x):
        frozen = frozen_masks[idx] if frozen_masks is not None else None
        out, sc = _stage_forward(stages[idx], x, mode, net.dropout_rate, rng, frozen,
                                 update_running, kern)
        cache.stages.append(sc)
        return out

    h = run_stage(0, batch)
    stage_idx = 1
    for block in net.blocks:
        block_in = h
        h = run_stage(stage_idx, h)
        h = run_stage(stage_idx + 1, h)
        stage_idx += 2
        if net.use_residual:
            h = h + block_in
    cache.output_in = h
    out = h @ net.output_layer.weight.T + net.output_layer.bias
    return out, cache


def _stage_backward(stage, name, sc, dout, grads, dropout_rate, kern):
    if sc.mask is not None:
        d_bn = kern.relu_dropout_backward(dout, sc.bn_out, sc.mask, 1.0 / (1.0 - dropout_rate))
    else:
        d_bn = kern.relu_backward(dout, sc.bn_out)
    if stage.bn is not None:
        d_pre, dgamma, dbeta = kern.bn_backward(d_bn, sc.xhat, sc.inv_std, stage.bn.gamma)
        bn_name = name.replace("fc", "bn") if ".fc" in name else f"{name}.bn"
        grads[f"{bn_name}.gamma"] = dgamma
        grads[f"{bn_name}.beta"] = dbeta
    else:
        d_pre = d_bn
    grads[f"{name}.weight"] = d_pre.T @ sc.x_in
    grads[f"{name}.bias"] = d_pre.sum(axis=0)
    return d_pre @ stage.dense.weight


def backward(net, cache, grad_output):
    """Exact gradients of everything forward touched.

    Requires a train-mode cache from a matching forward call. Returns
    (grads, grad_input) where grads maps parameter names (as in
    net.parameters()) to arrays of the same shape.
    """
    if cache.mode != "train":
        raise ContractViolationError("backward needs a cache from a train-mode forward")
    grad_output = np.asarray(grad_output, dtype=np.float64)
    if grad_output.shape != (cache.batch_size, net.output_dim):
        raise ContractViolationError(
            f"grad_output shape {grad_output.shape} does not match cache "
            f"({cache.batch_size}, {net.output_dim})"
        )
    if len(cache.stages) != 1 + 2 * len(net.blocks):
        raise ContractViolationError("cache does not match the network architecture")

    kern = _kernels.get()
    grads = {}
    grads["output.weight"] = grad_output.T @ cache.output_in
    grads["output.bias"] = grad_output.sum(axis=0)
    dh = grad_output @ net.output_layer.weight

    stage_idx = len(cache.stages) - 1
    for i in range(len(net.blocks) - 1, -1, -1):
        block = net.blocks[i]
        d_skip = dh
        dh = _stage_backward(block.stage2, f"block{i}.fc2", cache.stages[stage_idx], dh,
                             grads, net.dropout_rate, kern)
        dh = _stage_backward(block.stage1, f"block{i}.fc1", cache.stages[stage_idx - 1], dh,
                             grads, net.dropout_rate, kern)
        stage_idx -= 2
        if net.use_residual:
            dh = dh + d_skip
    grad_input = _stage_backward(net.input_stage, "input", cache.stages[0], dh,
                                 grads, net.dropout_rate, kern)
    return grads, grad_input


def apply_max_norm(net, c=None):
    """Clamp every dense-layer row (incoming weights of one unit) to norm <= c.

    Rows already inside the ball stay bit-identical, so the projection is
    idempotent. No-op unless the network was built with use_maxnorm. Biases
    and batch-norm parameters are never touched.
    """
    if c is None:
        c = net.maxnorm_c
    if not c > 0:
        raise InvalidInputError(f"max-norm radius must be positive, got {c}")
    if not net.use_maxnorm:
        return
    kern = _kernels.get()
    for _, layer in net.dense_layers():
        kern.max_norm_rows(layer.weight, c)
