"""Plain-text key=value run configuration.

Precedence: command-line flags > config file > defaults. Unknown keys
are rejected before any work starts, and the effective config is echoed
into the run directory so a run can be replayed exactly.
"""

import os

from .errors import UsageError

DEFAULTS = {
    # shared
    "seed": 0,
    "deterministic": True,
    "out": "run",
    # operator / training
    "theta": 0.7,
    "clip_len": 16,
    "stream": "fused",
    "batch": 32,
    "lr": 0.1,
    "momentum": 0.9,
    "lr_patience": 10,
    "epochs": 200,
    "target_val_acc": None,
    # rank pooling
    "delta": 1.0,
    "window": 7,
    "window_stride": 1,
    "solver_max_iters": 2000,
    "solver_tol": 1e-6,
    "solver_patience": 50,
    # optical flow
    "flow_alpha": 1.0,
    "flow_iters": 100,
    # data
    "crop_size": 112,
    "num_per_class": 25,
    "frames": 16,
    "height": 128,
    "width": 128,
}


def _coerce(key, raw, template):
    if raw == "none":
        return None
    if isinstance(template, bool):
        if raw in ("true", "1", "yes"):
            return True
        if raw in ("false", "0", "no"):
            return False
        raise UsageError(f"config key {key}: bad boolean {raw!r}")
    if template is None or isinstance(template, float):
        return float(raw)
    if isinstance(template, int):
        return int(raw)
    return raw


def load_config_file(path):
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if key not in DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _coerce(key, raw, DEFAULTS[key])
    return out


def resolve(config_path=None, overrides=None):
    """defaults + config file + explicit overrides, in that order."""
    cfg = dict(DEFAULTS)
    if config_path:
        cfg.update(load_config_file(config_path))
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key {key!r}")
        if value is not None:
            cfg[key] = value
    if cfg["stream"] not in ("fused", "flow"):
        raise UsageError(f"stream must be fused|flow, got {cfg['stream']!r}")
    if cfg["clip_len"] not in (12, 16):
        raise UsageError(f"clip_len must be 12 or 16, got {cfg['clip_len']}")
    return cfg


def echo(cfg, run_dir):
    os.makedirs(run_dir, exist_ok=True)
    path = os.path.join(run_dir, "config.echo")
    with open(path, "w") as fh:
        for key in sorted(cfg):
            value = cfg[key]
            if value is None:
                value = "none"
            elif isinstance(value, bool):
                value = "true" if value else "false"
            fh.write(f"{key}={value}\n")
    return path
