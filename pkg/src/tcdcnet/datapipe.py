"""Frame ingestion, synthetic data, augmentation, and channel fusion.

A VideoRecord is raw RGB frames in [0,1]. prepare_record turns one into
the network-ready channel stack: 3 normalized dynamic-image channels
fused with 2 scaled flow channels for the fused stream, or the 2 flow
channels alone for the flow stream. Stacks are produced at the source
resolution (128x128 by default) so the 112 corner crops stay meaningful.
"""

import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClipTooLong,
    CropTooLarge,
    EmptySequence,
    IoError,
    NonContiguousIndices,
    ShapeMismatch,
    UnsupportedPixelFormat,
)
from .optflow import flow_sequence, scale_flow_stack, to_luma
from .rankpool import (
    SolverConfig,
    dynamic_image_sequence,
    normalize_dynamic_image,
)
from .tensorio import as_tensor

CROP_POSITIONS = ("TL", "TR", "BL", "BR", "Center")
SYNTH_CLASSES = ("left", "right", "up", "down")


@dataclass
class VideoRecord:
    frames: np.ndarray  # [T, 3, H, W] in [0,1]
    label: int
    id: str


@dataclass
class ClipSample:
    input: np.ndarray  # [C, L, size, size]
    label: int


@dataclass
class PipeConfig:
    delta: float = 1.0
    window: int = 7
    window_stride: int = 1
    solver: SolverConfig = field(default_factory=SolverConfig)
    flow_alpha: float = 1.0
    flow_iters: int = 100
    crop_size: int = 112


# ---------------------------------------------------------------------------
# PPM/PGM io


def _read_pnm(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    tokens = []
    pos = 0
    while len(tokens) < 4 and pos < len(blob):
        m = re.match(rb"\s*(#[^\n]*\n|\S+)", blob[pos:])
        if m is None:
            break
        pos += m.end()
        tok = m.group(1)
        if not tok.startswith(b"#"):
            tokens.append(tok)
    if len(tokens) < 4:
        raise UnsupportedPixelFormat(f"{path}: bad header")
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise UnsupportedPixelFormat(f"{path}: magic {magic!r}")
    width, height, maxval = (int(t) for t in tokens[1:4])
    if maxval != 255:
        raise UnsupportedPixelFormat(f"{path}: maxval {maxval}")
    # exactly one whitespace byte separates the maxval from the raster
    if pos < len(blob) and blob[pos : pos + 1].isspace():
        pos += 1
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    raw = blob[pos : pos + need]
    if len(raw) < need:
        raise IoError(f"{path}: truncated pixel data")
    img = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
    img = img.transpose(2, 0, 1).astype(np.float32) / 255.0
    if channels == 1:
        img = np.repeat(img, 3, axis=0)
    return img


def _write_ppm(path, frame):
    """frame [3,H,W] in [0,1] -> binary P6."""
    frame = np.clip(as_tensor(frame), 0.0, 1.0)
    _, h, w = frame.shape
    pix = (frame * 255.0 + 0.5).astype(np.uint8).transpose(1, 2, 0)
    try:
        with open(path, "wb") as fh:
            fh.write(b"P6\n%d %d\n255\n" % (w, h))
            fh.write(pix.tobytes())
    except OSError as exc:
        raise IoError(str(exc)) from exc


_FRAME_RE = re.compile(r"frame_(\d{5})\.(ppm|pgm)$")


def load_frames(dir_path):
    """Load one video directory: frame_%05d.(ppm|pgm) + labels.txt."""
    try:
        entries = sorted(os.listdir(dir_path))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    indexed = []
    for name in entries:
        m = _FRAME_RE.match(name)
        if m:
            indexed.append((int(m.group(1)), name))
    if not indexed:
        raise IoError(f"{dir_path}: no frame_%05d files")
    indexed.sort()
    indices = [i for i, _ in indexed]
    if indices != list(range(indices[0], indices[0] + len(indices))):
        raise NonContiguousIndices(f"{dir_path}: frame indices {indices}")
    frames = np.stack([_read_pnm(os.path.join(dir_path, name))
                       for _, name in indexed])
    label_path = os.path.join(dir_path, "labels.txt")
    try:
        with open(label_path) as fh:
            line = fh.readline().split()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if len(line) != 2:
        raise IoError(f"{label_path}: expected '<video_id> <class_index>'")
    return VideoRecord(frames=frames, label=int(line[1]), id=line[0])


def save_record(record, dir_path):
    os.makedirs(dir_path, exist_ok=True)
    for t, frame in enumerate(record.frames, start=1):
        _write_ppm(os.path.join(dir_path, f"frame_{t:05d}.ppm"), frame)
    with open(os.path.join(dir_path, "labels.txt"), "w") as fh:
        fh.write(f"{record.id} {record.label}\n")


def load_dataset(root):
    """Every subdirectory of root is one video directory."""
    try:
        subdirs = sorted(
            d for d in os.listdir(root)
            if os.path.isdir(os.path.join(root, d))
        )
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not subdirs:
        raise IoError(f"{root}: no video directories")
    return [load_frames(os.path.join(root, d)) for d in subdirs]


# ---------------------------------------------------------------------------
# synthetic data


def synth_dataset(num_per_class=25, T=16, H=128, W=128, seed=0):
    """4 classes: a white square drifting left/right/up/down at 1-2
    px/frame with seeded jitter. Deterministic per seed."""
    if T < 16:
        raise ShapeMismatch("training records need T >= 16")
    rng = np.random.default_rng(seed)
    side = max(8, min(H, W) // 4)
    directions = {
        "left": (-1, 0), "right": (1, 0), "up": (0, -1), "down": (0, 1),
    }
    travel = 2 * T  # worst-case drift at 2 px/frame

    def _start(extent, sign):
        lo = 2 + (travel if sign < 0 else 0)
        hi = extent - side - 2 - (travel if sign > 0 else 0)
        if hi < lo:  # small canvas: let the square park at the border
            lo, hi = 2, extent - side - 2
        return float(rng.integers(lo, hi + 1))

    records = []
    for label, name in enumerate(SYNTH_CLASSES):
        dx, dy = directions[name]
        for n in range(num_per_class):
            x = _start(W, dx)
            y = _start(H, dy)
            frames = np.zeros((T, 3, H, W), dtype=np.float32)
            for t in range(T):
                xi = int(round(np.clip(x, 0, W - side)))
                yi = int(round(np.clip(y, 0, H - side)))
                frames[t, :, yi : yi + side, xi : xi + side] = 1.0
                speed = 1.0 + rng.random()  # 1-2 px/frame
                x += dx * speed
                y += dy * speed
            records.append(VideoRecord(frames, label, f"{name}_{n:03d}"))
    return records


# ---------------------------------------------------------------------------
# augmentation


def corner_crop(frames, which, size=112):
    """Spatial crop of the last two axes at a named position."""
    frames = np.asarray(frames)
    h, w = frames.shape[-2], frames.shape[-1]
    if size > h or size > w:
        raise CropTooLarge(f"crop {size} from {h}x{w}")
    offsets = {
        "TL": (0, 0),
        "TR": (0, w - size),
        "BL": (h - size, 0),
        "BR": (h - size, w - size),
        "Center": ((h - size) // 2, (w - size) // 2),
    }
    if which not in offsets:
        raise ShapeMismatch(f"unknown crop position {which!r}")
    r, c = offsets[which]
    return frames[..., r : r + size, c : c + size]


def hflip(frames):
    """Reverse the width axis. Involution."""
    return np.ascontiguousarray(np.asarray(frames)[..., ::-1])


def augmentation_variants(frames, size=112):
    """All 5 crops x {no flip, flip} = 10 variants, fixed order."""
    out = []
    for which in CROP_POSITIONS:
        cropped = corner_crop(frames, which, size)
        out.append(cropped)
        out.append(hflip(cropped))
    return out


def sample_augmentation(frames, rng, size=112):
    """Train-time policy: uniform crop position + a flip coin."""
    which = CROP_POSITIONS[int(rng.integers(len(CROP_POSITIONS)))]
    cropped = corner_crop(frames, which, size)
    if rng.integers(2):
        cropped = hflip(cropped)
    return np.ascontiguousarray(cropped)


def sample_clip(stack, L, start=None, rng=None):
    """Contiguous L-frame temporal window of a [C,T,H,W] stack.

    start=None draws uniformly from [0, T-L] using rng.
    """
    if L not in (12, 16):
        raise ClipTooLong(f"clip length must be 12 or 16, got {L}")
    t = stack.shape[1]
    if L > t:
        raise ClipTooLong(f"clip length {L} > {t} frames")
    if start is None:
        start = int(rng.integers(t - L + 1)) if rng is not None else 0
    if not 0 <= start <= t - L:
        raise ClipTooLong(f"start {start} out of range for T={t}, L={L}")
    return stack[:, start : start + L]


def fuse_channels(dyn_images, flow):
    """Concatenate dynamic-image channels before flow channels."""
    dyn_images = np.asarray(dyn_images)
    flow = np.asarray(flow)
    if dyn_images.shape[0] != 3 or flow.shape[0] != 2:
        raise ShapeMismatch(
            f"expected [3,...] and [2,...], got {dyn_images.shape} "
            f"and {flow.shape}"
        )
    if dyn_images.shape[1:] != flow.shape[1:]:
        raise ShapeMismatch(
            f"trailing dims differ: {dyn_images.shape} vs {flow.shape}"
        )
    return np.concatenate([dyn_images, flow], axis=0).astype(np.float32)


# ---------------------------------------------------------------------------
# stream preparation


def _edge_pad_sequence(items, total, front):
    """Replicate edge items so the list reaches the requested length."""
    back = total - len(items) - front
    return [items[0]] * front + items + [items[-1]] * back


def flow_stack_for(record, cfg):
    """[2,T,H,W] clamped/scaled flow channels for a record."""
    gray = [to_luma(f) for f in record.frames]
    fields = flow_sequence(gray, cfg.flow_alpha, cfg.flow_iters,
                           pad_to_length=True)
    return scale_flow_stack(fields).transpose(1, 0, 2, 3).copy()


def dyn_stack_for(record, cfg):
    """[3,T,H,W] normalized dynamic-image channels for a record.

    One dynamic image per sliding window; the sequence is edge-padded
    so frame index t of the stack aligns with the window centered
    nearest to t.
    """
    frames = list(record.frames)
    dis = dynamic_image_sequence(frames, cfg.window, cfg.window_stride,
                                 cfg.delta, cfg.solver)
    images = [normalize_dynamic_image(di.d) for di in dis]
    front = (cfg.window - 1) // 2
    images = _edge_pad_sequence(images, len(frames), front)
    return np.stack(images).transpose(1, 0, 2, 3).copy()


def prepare_record(record, stream, cfg=None):
    """Network-ready stack: [5,T,H,W] fused or [2,T,H,W] flow-only."""
    cfg = cfg or PipeConfig()
    if stream not in ("fused", "flow"):
        raise ShapeMismatch(f"unknown stream {stream!r}")
    flow = flow_stack_for(record, cfg)
    if stream == "flow":
        return flow
    dyn = dyn_stack_for(record, cfg)
    return fuse_channels(dyn, flow)


def prepare_dataset(records, stream, cfg=None, workers=None):
    """Prepare every record; records are independent, so the work can
    fan out over a process pool. Output order (and every value) is
    identical to the sequential path."""
    cfg = cfg or PipeConfig()
    if workers is None:
        workers = min(4, os.cpu_count() or 1)
    if workers <= 1 or len(records) < 2:
        return [prepare_record(r, stream, cfg) for r in records]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(prepare_record, records,
                             [stream] * len(records),
                             [cfg] * len(records),
                             chunksize=max(1, len(records) // (4 * workers))))
