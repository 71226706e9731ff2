"""Central finite-difference gradient verification.

Checks analytic backward passes by differencing the forward pass only,
so it stays an independent route. Loss is a fixed random projection of
the output, accumulated in float64.
"""

import numpy as np

from . import conv
from .conv import ConvParams, ConvSpec


def fd_grad(f, x, eps=1e-3):
    """Central finite differences of scalar f with respect to array x."""
    g = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f()
        flat[i] = orig - eps
        lo = f()
        flat[i] = orig
        g.reshape(-1)[i] = (hi - lo) / (2.0 * eps)
    return g


def max_rel_err(analytic, numeric, floor=1e-2):
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float((np.abs(a - n) / denom).max())


def check_tcdc_gradients(theta=0.7, seed=1, shape=(1, 2, 3, 4, 4),
                         kernel=(3, 3, 3), padding=(1, 1, 1), eps=1e-3):
    """Max relative error of tcdc_backward vs finite differences, over
    every input, weight, and bias element."""
    rng = np.random.default_rng(seed)
    spec = ConvSpec(in_channels=shape[1], out_channels=2, kernel=kernel,
                    padding=padding, theta=theta)
    x = rng.normal(size=shape).astype(np.float32)
    params = ConvParams(
        rng.normal(size=(2, shape[1], *kernel)).astype(np.float32),
        rng.normal(size=2).astype(np.float32),
    )
    out_shape = (shape[0], 2, *spec.out_shape(shape[2:]))
    proj = rng.choice([-1.0, 1.0], size=out_shape)

    # FD side runs in float64 where the forward pass is exact to
    # rounding, so eps=1e-3 carries no truncation noise
    x64 = x.astype(np.float64)
    p64 = ConvParams(params.weights.astype(np.float64),
                     params.bias.astype(np.float64))

    def loss():
        return float((conv.tcdc_forward(x64, p64, spec) * proj).sum())

    gx, gw, gb = conv.tcdc_backward(x, params, spec,
                                    proj.astype(np.float32))
    errs = [
        max_rel_err(gx, fd_grad(loss, x64, eps)),
        max_rel_err(gw, fd_grad(loss, p64.weights, eps)),
        max_rel_err(gb, fd_grad(loss, p64.bias, eps)),
    ]
    return max(errs)
