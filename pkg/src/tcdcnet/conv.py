"""3D convolution operators and the auxiliary network layers.

The temporal central difference variant adds, on top of the vanilla 3D
convolution, a gradient-level term

    y(p0) += theta * ( -x(p0) * sum_{pn in adjacent slices} w(pn) )

where the sum runs over the kernel positions outside the central
temporal slice and the same kernel weights are reused, so the parameter
count never changes with theta. With several input channels the center
product is accumulated channel-wise, mirroring the vanilla term.

Forward/backward kernels unroll patches (im2col) and hand one batched
matmul per chunk to BLAS, which keeps desk-scale training on CPU
tractable; the central-difference term folds into the gemm weights.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import (
    EmptyOutput,
    LabelOutOfRange,
    ShapeMismatch,
    ThetaOutOfRange,
)


@dataclass(frozen=True)
class ConvSpec:
    """Geometry + theta of one (T)CDC layer."""

    in_channels: int
    out_channels: int
    kernel: tuple  # (kT, kH, kW), all odd
    stride: tuple = (1, 1, 1)
    padding: tuple = (0, 0, 0)
    theta: float = 0.0

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeMismatch("channel counts must be positive")
        if len(self.kernel) != 3 or any(k < 1 or k % 2 == 0 for k in self.kernel):
            raise ShapeMismatch(
                f"kernel dims must be odd positive, got {self.kernel}"
            )
        if any(s < 1 for s in self.stride) or any(p < 0 for p in self.padding):
            raise ShapeMismatch("bad stride/padding")
        if not 0.0 <= self.theta <= 1.0:
            raise ThetaOutOfRange(f"theta={self.theta} not in [0,1]")

    @property
    def center(self):
        """Kernel-space index of the current-moment center position."""
        return tuple(k // 2 for k in self.kernel)

    def field_partition(self):
        """(current_slice, adjacent_slices) partition of the kernel cube.

        current_slice holds every (dt,dh,dw) with dt on the central
        temporal index; adjacent_slices holds the rest. Together they
        enumerate all kT*kH*kW positions exactly once.
        """
        kt, kh, kw = self.kernel
        tc = kt // 2
        current, adjacent = [], []
        for dt, dh, dw in product(range(kt), range(kh), range(kw)):
            (current if dt == tc else adjacent).append((dt, dh, dw))
        return current, adjacent

    def out_shape(self, in_shape):
        """(T', H', W') for an input (T, H, W); raises on empty output."""
        out = []
        for d, k, s, p in zip(in_shape, self.kernel, self.stride, self.padding):
            o = (d + 2 * p - k) // s + 1
            if o < 1:
                raise EmptyOutput(
                    f"input {in_shape} with kernel {self.kernel} "
                    f"stride {self.stride} pad {self.padding} yields empty output"
                )
            out.append(o)
        return tuple(out)


@dataclass
class ConvParams:
    """weights [outC, inC, kT, kH, kW], bias [outC]."""

    weights: np.ndarray
    bias: np.ndarray

    def count(self):
        return self.weights.size + self.bias.size


def init_conv_params(spec, rng):
    """He-style fan-in scaled initialization."""
    fan_in = spec.in_channels * int(np.prod(spec.kernel))
    w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(
        spec.out_channels, spec.in_channels, *spec.kernel
    )).astype(np.float32)
    b = np.zeros(spec.out_channels, dtype=np.float32)
    return ConvParams(w, b)


def _check_input(x, spec):
    if x.ndim != 5:
        raise ShapeMismatch(f"expected rank-5 input [N,C,T,H,W], got rank {x.ndim}")
    if x.shape[1] != spec.in_channels:
        raise ShapeMismatch(
            f"input has {x.shape[1]} channels, spec wants {spec.in_channels}"
        )
    return spec.out_shape(x.shape[2:])


def _pad(x, padding):
    pt, ph, pw = padding
    if pt == ph == pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw)))


def _offset_view(xp, offset, out_shape, stride):
    """[N,C,T',H',W'] view of the padded input at one kernel offset."""
    a, b, c = offset
    to, ho, wo = out_shape
    st, sh, sw = stride
    return xp[
        :, :,
        a : a + to * st : st,
        b : b + ho * sh : sh,
        c : c + wo * sw : sw,
    ]


def _adjacent_weight_sum(weights, kernel):
    """sum over adjacent-slice kernel positions, per (outC, inC)."""
    tc = kernel[0] // 2
    return weights.sum(axis=(2, 3, 4)) - weights[:, :, tc].sum(axis=(2, 3))


# target size of one unrolled-patch buffer; batches are processed in
# chunks so the buffer never grows past this
_COL_BUDGET = 192 * 1024 * 1024


def _chunk_size(per_sample_cols):
    return max(1, _COL_BUDGET // max(1, 4 * per_sample_cols))


def _im2col(xp, kernel, out_shape, stride, out=None):
    """[n,C,Tp,Hp,Wp] padded input -> [n, C*K, L] patch tensor where
    L = prod(out_shape) and K = prod(kernel). Feature order (c, k)
    matches weights.reshape(outC, C*K); each offset copy writes a
    contiguous [L] block per (n, c)."""
    n, c = xp.shape[:2]
    kk = int(np.prod(kernel))
    ell = int(np.prod(out_shape))
    if out is None:
        out = np.empty((n, c * kk, ell), dtype=xp.dtype)
    cols = out.reshape(n, c, kk, *out_shape)
    for idx, off in enumerate(product(*(range(k) for k in kernel))):
        cols[:, :, idx] = _offset_view(xp, off, out_shape, stride)
    return out.reshape(n, c * kk, ell)


def conv3d_forward(x, params, spec):
    """Vanilla 3D convolution with zero padding."""
    return _conv_core(x, params, spec, theta=0.0)


def tcdc_forward(x, params, spec):
    """Temporal central difference convolution; theta taken from spec."""
    return _conv_core(x, params, spec, theta=spec.theta)


def _center_index(kernel):
    """Flat offset index of the kernel center in C scan order."""
    kt, kh, kw = kernel
    return ((kt // 2) * kh + kh // 2) * kw + kw // 2


def _effective_weights(w, spec, theta, dtype):
    """[outC, C*K] gemm weights with the CD term folded in.

    The CD term is -theta * x(center) * sum_adjacent(w), which is a
    plain convolution whose only nonzero tap sits at the kernel center;
    folding it into the weight matrix makes TCDC a single gemm.
    """
    w2 = np.ascontiguousarray(
        w.reshape(spec.out_channels, spec.in_channels, -1), dtype=dtype
    )
    if theta != 0.0:
        w2 = w2.copy() if w2.base is w else w2
        w_adj = _adjacent_weight_sum(w, spec.kernel).astype(dtype)
        w2[:, :, _center_index(spec.kernel)] -= theta * w_adj
    return w2.reshape(spec.out_channels, -1)


def _conv_core(x, params, spec, theta):
    out_shape = _check_input(x, spec)
    w = params.weights
    if w.shape != (spec.out_channels, spec.in_channels, *spec.kernel):
        raise ShapeMismatch(f"weights shape {w.shape} does not match spec")
    xp = _pad(x, spec.padding)
    n = x.shape[0]
    # dtype follows the inputs so float64 verification runs are exact
    dtype = np.result_type(x, w)
    ck = spec.in_channels * int(np.prod(spec.kernel))
    per_sample = int(np.prod(out_shape))
    w2 = _effective_weights(w, spec, theta, dtype)
    y = np.empty((n, spec.out_channels, *out_shape), dtype=dtype)
    step = _chunk_size(per_sample * ck)
    cols_buf = np.empty((min(step, n), ck, per_sample), dtype=dtype)
    for lo in range(0, n, step):
        hi = min(lo + step, n)
        cols = _im2col(xp[lo:hi], spec.kernel, out_shape, spec.stride,
                       out=cols_buf[: hi - lo])
        np.matmul(w2, cols,
                  out=y[lo:hi].reshape(hi - lo, spec.out_channels,
                                       per_sample))
    y += params.bias[None, :, None, None, None]
    return y


def tcdc_backward(x, params, spec, grad_out):
    """Analytic gradients of tcdc_forward.

    Returns (grad_x, grad_w, grad_b). theta=0 reduces to the vanilla
    convolution backward.
    """
    out_shape = _check_input(x, spec)
    if grad_out.shape != (x.shape[0], spec.out_channels, *out_shape):
        raise ShapeMismatch(
            f"grad_out shape {grad_out.shape}, expected "
            f"{(x.shape[0], spec.out_channels, *out_shape)}"
        )
    w = params.weights
    theta = spec.theta
    xp = _pad(x, spec.padding)
    gxp = np.zeros_like(xp)
    g = np.ascontiguousarray(grad_out)
    offsets = list(product(*(range(k) for k in spec.kernel)))
    kk = len(offsets)
    ck = spec.in_channels * kk
    per_sample = int(np.prod(out_shape))
    # input gradients flow through the effective (CD-folded) weights
    w_eff = _effective_weights(w, spec, theta, w.dtype)
    grad_w2 = np.zeros((spec.out_channels, ck), dtype=w.dtype)
    step = _chunk_size(per_sample * ck)
    cols_buf = np.empty((min(step, x.shape[0]), ck, per_sample),
                        dtype=xp.dtype)
    for lo in range(0, x.shape[0], step):
        hi = min(lo + step, x.shape[0])
        nc = hi - lo
        cols = _im2col(xp[lo:hi], spec.kernel, out_shape, spec.stride,
                       out=cols_buf[:nc])
        g2 = g[lo:hi].reshape(nc, spec.out_channels, per_sample)
        # sum over batch and output positions in one batched gemm
        grad_w2 += np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0)
        gcols = np.matmul(w_eff.T, g2).reshape(
            nc, spec.in_channels, kk, *out_shape
        )
        gxp_chunk = gxp[lo:hi]
        for idx, off in enumerate(offsets):
            _offset_view(gxp_chunk, off, out_shape, spec.stride)[...] += \
                gcols[:, :, idx]
    grad_w = grad_w2.reshape(w.shape)
    if theta != 0.0:
        # chain rule through the folding: every adjacent tap also feeds
        # the center column of the effective weights with factor -theta
        ge = grad_w2.reshape(spec.out_channels, spec.in_channels, kk)
        ge_center = ge[:, :, _center_index(spec.kernel)].copy()
        tc = spec.kernel[0] // 2
        adj = np.ones(spec.kernel[0], dtype=bool)
        adj[tc] = False
        grad_w[:, :, adj] -= theta * ge_center[:, :, None, None, None]
    pt, ph, pw = spec.padding
    grad_x = gxp[
        :, :,
        pt : pt + x.shape[2],
        ph : ph + x.shape[3],
        pw : pw + x.shape[4],
    ].copy()
    grad_b = g.sum(axis=(0, 2, 3, 4)).astype(np.float32)
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# pooling


def maxpool3d(x, window, stride=None):
    """Max pool over (T,H,W) windows; returns (y, argmax flat indices).

    argmax is the first-encountered maximum in C scan order of the
    window, which makes the backward routing deterministic on ties.
    """
    if stride is None:
        stride = window
    if x.ndim != 5:
        raise ShapeMismatch("maxpool3d expects [N,C,T,H,W]")
    n, c, t, h, wdt = x.shape
    wt, wh, ww = window
    st, sh, sw = stride
    to = (t - wt) // st + 1
    ho = (h - wh) // sh + 1
    wo = (wdt - ww) // sw + 1
    if to < 1 or ho < 1 or wo < 1:
        raise EmptyOutput(f"window {window} too large for input {x.shape}")
    view = np.lib.stride_tricks.sliding_window_view(x, (wt, wh, ww),
                                                    axis=(2, 3, 4))
    view = view[:, :, ::st, ::sh, ::sw]
    flat = view.reshape(n, c, to, ho, wo, wt * wh * ww)
    idx = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(y), idx


def maxpool3d_backward(x_shape, window, stride, argmax, grad_out):
    """Route grad_out to the stored argmax positions."""
    if stride is None:
        stride = window
    n, c, t, h, w = x_shape
    wt, wh, ww = window
    st, sh, sw = stride
    to, ho, wo = grad_out.shape[2:]
    # window-local flat index -> input coordinates
    dt = argmax // (wh * ww)
    dh = (argmax // ww) % wh
    dw = argmax % ww
    grid_t = np.arange(to)[:, None, None] * st
    grid_h = np.arange(ho)[None, :, None] * sh
    grid_w = np.arange(wo)[None, None, :] * sw
    ti = dt + grid_t
    hi = dh + grid_h
    wi = dw + grid_w
    flat_in = (ti * h + hi) * w + wi  # [N,C,To,Ho,Wo]
    base = (np.arange(n)[:, None, None, None, None] * c
            + np.arange(c)[None, :, None, None, None]) * (t * h * w)
    gx = np.zeros(n * c * t * h * w, dtype=np.float32)
    idx = (base + flat_in).ravel()
    if all(s >= k for s, k in zip(stride, window)):
        # non-overlapping windows: indices are unique, plain assignment
        gx[idx] = grad_out.ravel()
    else:
        np.add.at(gx, idx, grad_out.ravel())
    return gx.reshape(x_shape)


# ---------------------------------------------------------------------------
# pointwise / dense / loss


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad_out):
    return np.where(x > 0.0, grad_out, 0.0).astype(np.float32)


def linear(x, weight, bias):
    """x [N,D] @ weight [D,K] + bias [K]."""
    if x.ndim != 2:
        raise ShapeMismatch("linear expects rank-2 input [N,D]")
    if x.shape[1] != weight.shape[0] or weight.shape[1] != bias.shape[0]:
        raise ShapeMismatch(
            f"linear shapes x{x.shape} w{weight.shape} b{bias.shape}"
        )
    return x @ weight + bias


def linear_backward(x, weight, grad_out):
    grad_x = grad_out @ weight.T
    grad_w = x.T @ grad_out
    grad_b = grad_out.sum(axis=0)
    return (grad_x.astype(np.float32), grad_w.astype(np.float32),
            grad_b.astype(np.float32))


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return (e / e.sum(axis=1, keepdims=True)).astype(np.float32)


def softmax_xent(logits, labels):
    """Mean cross-entropy over the batch; returns (loss, grad_logits)."""
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeMismatch(f"labels shape {labels.shape}, want ({n},)")
    if labels.min() < 0 or labels.max() >= k:
        raise LabelOutOfRange(f"labels must lie in [0,{k})")
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(n), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad.astype(np.float32)
