"""Dense optical flow via Horn-Schunck Jacobi iteration.

Deterministic and dependency-free: central-difference image gradients,
4-neighbor flow averaging with edge replication, fixed iteration count.
Output u is horizontal displacement (positive right), v vertical
(positive down), both in pixels.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptySequence, ShapeMismatch
from .tensorio import as_tensor

LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)
FLOW_CLAMP = 4.0  # px; flow scaled by 1/FLOW_CLAMP into [-1,1] before fusion


@dataclass
class FlowField:
    uv: np.ndarray  # [2, H, W]


def to_luma(frame):
    """[3,H,W] RGB (or [H,W] gray) -> [H,W] luma."""
    frame = as_tensor(frame)
    if frame.ndim == 2:
        return frame
    if frame.ndim == 3 and frame.shape[0] == 3:
        return np.tensordot(LUMA, frame, axes=(0, 0)).astype(np.float32)
    raise ShapeMismatch(f"expected [H,W] or [3,H,W], got {frame.shape}")


def _neighbor_avg(f):
    """Mean of the 4 neighbors with replicated edges."""
    p = np.pad(f, 1, mode="edge")
    return 0.25 * (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:])


def horn_schunck(prev, nxt, alpha=1.0, iters=100):
    prev = as_tensor(prev)
    nxt = as_tensor(nxt)
    if prev.shape != nxt.shape or prev.ndim != 2:
        raise ShapeMismatch(f"frames {prev.shape} vs {nxt.shape}")
    if alpha <= 0 or iters < 1:
        raise ShapeMismatch("alpha must be > 0 and iters >= 1")
    mean = 0.5 * (prev + nxt)
    fy, fx = np.gradient(mean)
    ft = nxt - prev
    u = np.zeros_like(prev)
    v = np.zeros_like(prev)
    den = alpha * alpha + fx * fx + fy * fy
    for _ in range(iters):
        ua = _neighbor_avg(u)
        va = _neighbor_avg(v)
        t = (fx * ua + fy * va + ft) / den
        u = ua - fx * t
        v = va - fy * t
    return FlowField(np.stack([u, v]).astype(np.float32))


def flow_sequence(frames, alpha=1.0, iters=100, pad_to_length=False):
    """Flow for each consecutive pair; optionally duplicate the last
    field so the stack length matches the frame count."""
    if len(frames) < 2:
        raise EmptySequence("need at least two frames")
    fields = [horn_schunck(frames[t], frames[t + 1], alpha, iters)
              for t in range(len(frames) - 1)]
    if pad_to_length:
        fields.append(FlowField(fields[-1].uv.copy()))
    return fields


def scale_flow_stack(fields):
    """[T,2,H,W] stack clamped to +-FLOW_CLAMP px and scaled into [-1,1]."""
    stack = np.stack([f.uv for f in fields])
    return (np.clip(stack, -FLOW_CLAMP, FLOW_CLAMP) / FLOW_CLAMP).astype(
        np.float32
    )
