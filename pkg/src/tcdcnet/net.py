"""Miniature C3D-style network with TCDC layers, SGD-momentum training,
plateau LR scheduling, checkpointing, evaluation, and score ensembling.

The trainer is single-threaded and fully seeded: one Generator drives
the train/val split, epoch shuffles, clip starts, and augmentation, so
deterministic mode reproduces metric logs and checkpoints bit-exactly.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import conv
from .conv import ConvParams, ConvSpec
from .datapipe import (
    PipeConfig,
    corner_crop,
    prepare_dataset,
    sample_augmentation,
    sample_clip,
)
from .errors import (
    EmptyDataset,
    NumericError,
    OrderMismatch,
    ShapeComposeError,
    ShapeMismatch,
)
from .tensorio import tensor_load, tensor_save


@dataclass
class NetConfig:
    layers: list          # layer descriptor tuples, see build_network
    num_classes: int = 4
    in_channels: int = 5  # 5 fused, 2 flow-only
    clip_len: int = 16
    input_size: int = 112
    theta: float = 0.7    # global default; per-layer override in descriptor


@dataclass
class TrainConfig:
    batch: int = 32
    lr: float = 0.1
    momentum: float = 0.9
    lr_patience: int = 10
    epochs: int = 200
    seed: int = 0
    deterministic: bool = True
    delta: float = 1.0
    flow_alpha: float = 1.0
    flow_iters: int = 100
    lr_factor: float = 0.1
    min_delta: float = 1e-4
    val_fraction: float = 0.2
    target_val_acc: float | None = None  # optional early stop

    def pipe_config(self):
        return PipeConfig(delta=self.delta, flow_alpha=self.flow_alpha,
                          flow_iters=self.flow_iters)


@dataclass
class SchedState:
    lr: float
    patience: int
    factor: float = 0.1
    min_delta: float = 1e-4
    best: float = -np.inf
    since: int = 0


def lr_plateau_update(sched, val_metric):
    """Decay lr by `factor` after `patience` epochs without improvement."""
    if val_metric > sched.best + sched.min_delta:
        sched.best = val_metric
        sched.since = 0
    else:
        sched.since += 1
        if sched.since >= sched.patience:
            sched.lr *= sched.factor
            sched.since = 0
    return sched, sched.lr


# ---------------------------------------------------------------------------
# layers


class TCDCLayer:
    def __init__(self, spec, params):
        self.spec = spec
        self.p = params

    def forward(self, x, train=False):
        if train:
            self._x = x
        return conv.tcdc_forward(x, self.p, self.spec)

    def backward(self, g):
        gx, gw, gb = conv.tcdc_backward(self._x, self.p, self.spec, g)
        self.grads = [gw, gb]
        self._x = None
        return gx

    def params(self):
        return [self.p.weights, self.p.bias]


class PoolLayer:
    def __init__(self, window):
        self.window = tuple(window)

    def forward(self, x, train=False):
        y, idx = conv.maxpool3d(x, self.window)
        if train:
            self._shape, self._idx = x.shape, idx
        return y

    def backward(self, g):
        gx = conv.maxpool3d_backward(self._shape, self.window, self.window,
                                     self._idx, g)
        self._idx = None
        return gx

    def params(self):
        return []


class ReLULayer:
    def forward(self, x, train=False):
        if train:
            self._x = x
        return conv.relu(x)

    def backward(self, g):
        gx = conv.relu_backward(self._x, g)
        self._x = None
        return gx

    def params(self):
        return []


class FlattenLayer:
    def forward(self, x, train=False):
        self._shape = x.shape
        return np.ascontiguousarray(x.reshape(x.shape[0], -1))

    def backward(self, g):
        return g.reshape(self._shape)

    def params(self):
        return []


class DenseLayer:
    def __init__(self, weight, bias):
        self.w = weight
        self.b = bias

    def forward(self, x, train=False):
        if train:
            self._x = x
        return conv.linear(x, self.w, self.b)

    def backward(self, g):
        gx, gw, gb = conv.linear_backward(self._x, self.w, g)
        self.grads = [gw, gb]
        self._x = None
        return gx

    def params(self):
        return [self.w, self.b]


@dataclass
class NetState:
    config: NetConfig
    layers: list
    velocities: list
    sched: SchedState
    epoch: int = 0
    rng_state: dict = field(default_factory=dict)

    def parameters(self):
        return [p for layer in self.layers for p in layer.params()]

    def gradients(self):
        out = []
        for layer in self.layers:
            if layer.params():
                out.extend(layer.grads)
        return out

    def param_count(self):
        return sum(p.size for p in self.parameters())


def desk_net_config(in_channels=5, clip_len=16, num_classes=4, theta=0.7,
                    input_size=112):
    """Default desk-scale backbone: 4 TCDC blocks 16-32-64-64 with max
    pooling, then two dense layers."""
    k3 = dict(kernel=(3, 3, 3), stride=(1, 1, 1), padding=(1, 1, 1))
    layers = [
        ("tcdc", 16, k3), ("relu",), ("pool", (1, 2, 2)),
        ("tcdc", 32, k3), ("relu",), ("pool", (2, 2, 2)),
        ("tcdc", 64, k3), ("relu",), ("pool", (2, 2, 2)),
        ("tcdc", 64, k3), ("relu",), ("pool", (2, 2, 2)),
        ("flatten",),
        ("linear", None, 256), ("relu",),
        ("linear", None, num_classes),
    ]
    return NetConfig(layers=layers, num_classes=num_classes,
                     in_channels=in_channels, clip_len=clip_len,
                     input_size=input_size, theta=theta)


def tiny_net_config(in_channels=2, clip_len=4, num_classes=2, theta=0.5,
                    input_size=8):
    """Two conv blocks on a small canvas, for gradient checks and fast
    pipeline tests."""
    k3 = dict(kernel=(3, 3, 3), stride=(1, 1, 1), padding=(1, 1, 1))
    layers = [
        ("tcdc", 3, k3), ("relu",), ("pool", (1, 2, 2)),
        ("tcdc", 4, k3), ("relu",), ("pool", (2, 2, 2)),
        ("flatten",),
        ("linear", None, num_classes),
    ]
    return NetConfig(layers=layers, num_classes=num_classes,
                     in_channels=in_channels, clip_len=clip_len,
                     input_size=input_size, theta=theta)


def _pool_out(shape, window):
    out = tuple((d - w) // w + 1 for d, w in zip(shape, window))
    if any(o < 1 for o in out):
        raise ShapeComposeError(f"pool {window} on {shape}")
    return out


def build_network(cfg, seed=0):
    """Instantiate layers with He-style seeded init, composing shapes."""
    rng = np.random.default_rng(seed)
    layers = []
    c = cfg.in_channels
    spatial = (cfg.clip_len, cfg.input_size, cfg.input_size)
    flat_dim = None
    for entry in cfg.layers:
        kind = entry[0]
        if kind == "tcdc":
            if flat_dim is not None:
                raise ShapeComposeError("conv after flatten")
            out_ch, opts = entry[1], entry[2] if len(entry) > 2 else {}
            theta = opts.get("theta", cfg.theta)
            spec = ConvSpec(
                in_channels=c, out_channels=out_ch,
                kernel=tuple(opts.get("kernel", (3, 3, 3))),
                stride=tuple(opts.get("stride", (1, 1, 1))),
                padding=tuple(opts.get("padding", (1, 1, 1))),
                theta=theta,
            )
            try:
                spatial = spec.out_shape(spatial)
            except Exception as exc:
                raise ShapeComposeError(str(exc)) from exc
            layers.append(TCDCLayer(spec, conv.init_conv_params(spec, rng)))
            c = out_ch
        elif kind == "pool":
            if flat_dim is not None:
                raise ShapeComposeError("pool after flatten")
            window = tuple(entry[1])
            spatial = _pool_out(spatial, window)
            layers.append(PoolLayer(window))
        elif kind == "relu":
            layers.append(ReLULayer())
        elif kind == "flatten":
            flat_dim = c * int(np.prod(spatial))
            layers.append(FlattenLayer())
        elif kind == "linear":
            in_dim, out_dim = entry[1], entry[2]
            if flat_dim is None:
                raise ShapeComposeError("linear before flatten")
            if in_dim is None:
                in_dim = flat_dim
            elif in_dim != flat_dim:
                raise ShapeComposeError(
                    f"linear expects in_dim {flat_dim}, descriptor says {in_dim}"
                )
            # dense layers use the conservative 1/fan_in variance scale:
            # with lr 0.1 + momentum 0.9 the He factor of 2 makes the
            # head's logits (and its gradients) large enough to diverge
            w = rng.normal(0.0, np.sqrt(1.0 / in_dim),
                           size=(in_dim, out_dim)).astype(np.float32)
            b = np.zeros(out_dim, dtype=np.float32)
            layers.append(DenseLayer(w, b))
            flat_dim = out_dim
        else:
            raise ShapeComposeError(f"unknown layer kind {kind!r}")
    if flat_dim != cfg.num_classes:
        raise ShapeComposeError(
            f"network outputs {flat_dim}, expected {cfg.num_classes} classes"
        )
    velocities = [np.zeros_like(p)
                  for layer in layers for p in layer.params()]
    sched = SchedState(lr=0.1, patience=10)
    return NetState(config=cfg, layers=layers, velocities=velocities,
                    sched=sched, rng_state=rng.bit_generator.state)


def forward(state, batch, train=False):
    cfg = state.config
    expect = (cfg.in_channels, cfg.clip_len, cfg.input_size, cfg.input_size)
    if batch.ndim != 5 or batch.shape[1:] != expect:
        raise ShapeMismatch(f"batch {batch.shape}, expected [N,{expect}]")
    x = batch
    for layer in state.layers:
        x = layer.forward(x, train=train)
    return x


def backward(state, batch, labels):
    """Full forward + backward; returns (loss, grads list)."""
    logits = forward(state, batch, train=True)
    loss, g = conv.softmax_xent(logits, labels)
    for layer in reversed(state.layers):
        g = layer.backward(g)
    return loss, state.gradients()


def sgd_momentum_step(state, grads, lr, momentum=0.9):
    """v <- momentum*v + g; p <- p - lr*v, in place."""
    params = state.parameters()
    if len(params) != len(grads):
        raise ShapeMismatch("grads do not match parameters")
    for p, g, v in zip(params, grads, state.velocities):
        if p.shape != g.shape:
            raise ShapeMismatch(f"grad {g.shape} vs param {p.shape}")
        v *= momentum
        v += g
        p -= lr * v
    return state


# ---------------------------------------------------------------------------
# training / evaluation


def _center_clip(stack, L, size):
    t = stack.shape[1]
    clip = sample_clip(stack, L, start=(t - L) // 2)
    return np.ascontiguousarray(corner_crop(clip, "Center", size))


def _batches(n, batch):
    for i in range(0, n, batch):
        yield slice(i, min(i + batch, n))


def evaluate(state, prepared, labels, batch=32):
    """Deterministic center-crop evaluation.

    Returns (scores [n, classes], accuracy, per-class accuracy).
    """
    if len(prepared) == 0:
        raise EmptyDataset("nothing to evaluate")
    cfg = state.config
    clips = np.stack([
        _center_clip(s, cfg.clip_len, cfg.input_size) for s in prepared
    ])
    labels = np.asarray(labels)
    scores = np.concatenate([
        conv.softmax(forward(state, clips[sl])) for sl in _batches(len(clips), batch)
    ])
    pred = scores.argmax(axis=1)
    acc = float((pred == labels).mean())
    per_class = np.array([
        float((pred[labels == c] == c).mean()) if (labels == c).any() else np.nan
        for c in range(cfg.num_classes)
    ])
    return scores, acc, per_class


def _snapshot(state):
    return ([p.copy() for p in state.parameters()],
            [v.copy() for v in state.velocities])


def _restore(state, snap):
    params, vels = snap
    for p, saved in zip(state.parameters(), params):
        p[...] = saved
    for v, saved in zip(state.velocities, vels):
        v[...] = saved


def train(net_cfg, train_cfg, records, prepared=None, run_dir=None,
          log=print):
    """Full training loop on a list of VideoRecords.

    prepared may carry precomputed channel stacks aligned with records
    (flow + rank pooling are expensive; callers should cache them).
    Returns (best-val NetState, metrics row list).
    """
    if len(records) == 0:
        raise EmptyDataset("no records")
    stream = "fused" if net_cfg.in_channels == 5 else "flow"
    pipe = train_cfg.pipe_config()
    if prepared is None:
        prepared = prepare_dataset(records, stream, pipe)
    labels = np.array([r.label for r in records])

    rng = np.random.default_rng(train_cfg.seed)
    perm = rng.permutation(len(records))
    n_val = max(1, int(round(train_cfg.val_fraction * len(records))))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if len(train_idx) == 0:
        raise EmptyDataset("empty train split")

    state = build_network(net_cfg, seed=train_cfg.seed)
    state.sched = SchedState(lr=train_cfg.lr, patience=train_cfg.lr_patience,
                             factor=train_cfg.lr_factor,
                             min_delta=train_cfg.min_delta)
    val_labels = labels[val_idx]
    # eval-time clips are deterministic (center crop, centered start)
    val_clips = np.stack([
        _center_clip(prepared[i], net_cfg.clip_len, net_cfg.input_size)
        for i in val_idx
    ])

    metrics = []
    best_acc = -1.0
    best_snap = _snapshot(state)
    best_epoch = 0
    lr = train_cfg.lr
    for epoch in range(train_cfg.epochs):
        order = train_idx[rng.permutation(len(train_idx))]
        losses, correct, seen = [], 0, 0
        for sl in _batches(len(order), train_cfg.batch):
            idx = order[sl]
            clips = []
            for i in idx:
                clip = sample_clip(prepared[i], net_cfg.clip_len, rng=rng)
                clips.append(sample_augmentation(clip, rng,
                                                 net_cfg.input_size))
            batch = np.stack(clips)
            y = labels[idx]
            logits = forward(state, batch, train=True)
            loss, g = conv.softmax_xent(logits, y)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            for layer in reversed(state.layers):
                g = layer.backward(g)
            sgd_momentum_step(state, state.gradients(), lr,
                              train_cfg.momentum)
            losses.append(loss * len(idx))
            correct += int((logits.argmax(axis=1) == y).sum())
            seen += len(idx)
        train_loss = sum(losses) / seen
        train_acc = correct / seen
        val_logits = np.concatenate([
            forward(state, val_clips[sl])
            for sl in _batches(len(val_clips), train_cfg.batch)
        ])
        val_loss, _ = conv.softmax_xent(val_logits, val_labels)
        val_acc = float((val_logits.argmax(axis=1) == val_labels).mean())
        state.sched, lr = lr_plateau_update(state.sched, val_acc)
        state.epoch = epoch + 1
        metrics.append(dict(epoch=epoch, train_loss=train_loss,
                            train_acc=train_acc, val_loss=val_loss,
                            val_acc=val_acc, lr=lr))
        if log:
            log(f"epoch {epoch:3d} train_loss {train_loss:.4f} "
                f"train_acc {train_acc:.3f} val_loss {val_loss:.4f} "
                f"val_acc {val_acc:.3f} lr {lr:g}")
        if val_acc > best_acc:
            best_acc = val_acc
            best_snap = _snapshot(state)
            best_epoch = epoch
        if (train_cfg.target_val_acc is not None
                and val_acc >= train_cfg.target_val_acc):
            break
    _restore(state, best_snap)
    state.epoch = best_epoch + 1
    if run_dir is not None:
        os.makedirs(run_dir, exist_ok=True)
        write_metrics_csv(os.path.join(run_dir, "metrics.csv"), metrics)
        save_checkpoint(state, os.path.join(run_dir, "checkpoint"),
                        extra=dict(delta=train_cfg.delta,
                                   seed=train_cfg.seed,
                                   metrics=metrics))
    return state, metrics


def write_metrics_csv(path, metrics):
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,train_acc,val_loss,val_acc,lr\n")
        for m in metrics:
            fh.write(f"{m['epoch']},{m['train_loss']!r},{m['train_acc']!r},"
                     f"{m['val_loss']!r},{m['val_acc']!r},{m['lr']!r}\n")


def ensemble(score_sets, labels):
    """Mean of softmax score matrices; returns (fused scores, accuracy)."""
    if len(score_sets) == 0:
        raise EmptyDataset("no score sets")
    shape = score_sets[0].shape
    if any(s.shape != shape for s in score_sets):
        raise OrderMismatch("score sets differ in shape")
    labels = np.asarray(labels)
    if labels.shape != (shape[0],):
        raise OrderMismatch("labels do not match score rows")
    fused = np.mean(np.stack(score_sets), axis=0)
    acc = float((fused.argmax(axis=1) == labels).mean())
    return fused, acc


# ---------------------------------------------------------------------------
# checkpointing


def _layer_descr(cfg):
    return json.dumps(cfg.layers)


def save_checkpoint(state, dir_path, extra=None):
    os.makedirs(dir_path, exist_ok=True)
    cfg = state.config
    manifest = {
        "layers": cfg.layers,
        "num_classes": cfg.num_classes,
        "in_channels": cfg.in_channels,
        "clip_len": cfg.clip_len,
        "input_size": cfg.input_size,
        "theta": cfg.theta,
        "epoch": state.epoch,
        "sched": {
            "lr": state.sched.lr, "patience": state.sched.patience,
            "factor": state.sched.factor, "min_delta": state.sched.min_delta,
            "best": float(state.sched.best), "since": state.sched.since,
        },
        "rng_state": _jsonable(state.rng_state),
        "extra": _jsonable(extra or {}),
    }
    with open(os.path.join(dir_path, "manifest.txt"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for i, p in enumerate(state.parameters()):
        tensor_save(p, os.path.join(dir_path, f"param_{i:03d}.vtns"))
    for i, v in enumerate(state.velocities):
        tensor_save(v, os.path.join(dir_path, f"vel_{i:03d}.vtns"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def load_checkpoint(dir_path):
    with open(os.path.join(dir_path, "manifest.txt")) as fh:
        manifest = json.load(fh)
    cfg = NetConfig(
        layers=[tuple(e) if not isinstance(e, tuple) else e
                for e in _tuplify(manifest["layers"])],
        num_classes=manifest["num_classes"],
        in_channels=manifest["in_channels"],
        clip_len=manifest["clip_len"],
        input_size=manifest["input_size"],
        theta=manifest["theta"],
    )
    state = build_network(cfg, seed=0)
    for i, p in enumerate(state.parameters()):
        p[...] = tensor_load(os.path.join(dir_path, f"param_{i:03d}.vtns"))
    for i, v in enumerate(state.velocities):
        v[...] = tensor_load(os.path.join(dir_path, f"vel_{i:03d}.vtns"))
    s = manifest["sched"]
    state.sched = SchedState(lr=s["lr"], patience=s["patience"],
                             factor=s["factor"], min_delta=s["min_delta"],
                             best=s["best"], since=s["since"])
    state.epoch = manifest["epoch"]
    state.rng_state = manifest["rng_state"]
    return state, manifest


def _tuplify(obj):
    if isinstance(obj, list):
        return tuple(_tuplify(v) for v in obj)
    if isinstance(obj, dict):
        return {k: _tuplify(v) for k, v in obj.items()}
    return obj
