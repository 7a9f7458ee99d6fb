"""Pure numpy implementations of the hot training kernels.

Reference semantics for the compiled backend in _ckernels.pyx. Matrix
products are not here: both backends leave GEMM to numpy's BLAS, where it
already runs at native speed. These kernels cover the memory-bound chains
around the matmuls (batch-norm statistics, activation/dropout, parameter
updates) that otherwise pay one numpy dispatch per intermediate.
"""

import numpy as np


def bn_train_forward(x, gamma, beta, eps):
    """Batch-norm over axis 0 with batch statistics.

    Returns (out, xhat, mean, var, inv_std); var is the biased batch
    variance used for normalization.
    """
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    out = xhat * gamma + beta
    return out, xhat, mean, var, inv_std


def bn_eval_forward(x, gamma, beta, running_mean, running_var, eps):
    return (x - running_mean) / np.sqrt(running_var + eps) * gamma + beta


def bn_backward(dout, xhat, inv_std, gamma):
    """Backprop through batch statistics. Returns (dx, dgamma, dbeta)."""
    n = dout.shape[0]
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * gamma
    dx = (inv_std / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgamma, dbeta


def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(dout, pre):
    return dout * (pre > 0.0)


def relu_dropout_forward(pre, mask, inv_keep):
    """ReLU then inverted-scaling dropout with a precomputed 0/1 mask."""
    return np.maximum(pre, 0.0) * mask * inv_keep


def relu_dropout_backward(dout, pre, mask, inv_keep):
    return dout * mask * inv_keep * (pre > 0.0)


def sgd_update(param, grad, lr):
    param -= lr * grad


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, t):
    """One bias-corrected Adam step, in place on param/m/v. t counts from 1."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def max_norm_rows(w, c):
    """Project rows of w onto the L2 ball of radius c, in place.

    Rows already inside the ball are left bit-identical.
    """
    norms = np.sqrt((w * w).sum(axis=1))
    over = norms > c
    if np.any(over):
        w[over] *= (c / norms[over])[:, None]


def mse_loss_grad(pred, target):
    """Mean-over-batch squared error: loss = (1/N) sum_i ||pred_i - y_i||^2."""
    diff = pred - target
    n = pred.shape[0]
    loss = float((diff * diff).sum()) / n
    grad = (2.0 / n) * diff
    return loss, grad
