"""Command-line front end.

Subcommands: synth | flow | rankpool | prepare | train | eval |
ensemble | gradcheck | sweep-theta.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Every run echoes its effective configuration to <out>/config.echo.
"""

import argparse
import os
import sys

import numpy as np

from . import config as runconfig
from . import datapipe, net, optflow, rankpool
from .errors import DataError, NumericError, PipelineError, UsageError
from .gradcheck import check_tcdc_gradients
from .rankpool import SolverConfig
from .tensorio import tensor_load, tensor_save


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    p = _Parser(prog="tcdcnet", description=__doc__)
    sub = p.add_subparsers(dest="command")

    def common(sp):
        sp.add_argument("--config", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--theta", type=float, default=None)
        sp.add_argument("--delta", type=float, default=None)
        sp.add_argument("--clip-len", type=int, default=None, dest="clip_len")
        sp.add_argument("--stream", choices=("fused", "flow"), default=None)
        sp.add_argument("--deterministic", action="store_const", const=True,
                        default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--epochs", type=int, default=None)
        sp.add_argument("--target-val-acc", type=float, default=None,
                        dest="target_val_acc")

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    common(sp)
    sp.add_argument("--num-per-class", type=int, default=None,
                    dest="num_per_class")
    sp.add_argument("--frames", type=int, default=None)
    sp.add_argument("--height", type=int, default=None)
    sp.add_argument("--width", type=int, default=None)

    sp = sub.add_parser("flow", help="optical flow stack for one video")
    common(sp)
    sp.add_argument("--video", required=True)

    sp = sub.add_parser("rankpool", help="dynamic images for one video")
    common(sp)
    sp.add_argument("--video", required=True)
    sp.add_argument("--window", type=int, default=None)

    sp = sub.add_parser("prepare", help="cache network-ready stacks")
    common(sp)
    sp.add_argument("--data", required=True)

    sp = sub.add_parser("train", help="train one stream")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--prepared", default=None)

    sp = sub.add_parser("eval", help="evaluate a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--prepared", default=None)

    sp = sub.add_parser("ensemble", help="average softmax score sets")
    common(sp)
    sp.add_argument("--scores", nargs="+", required=True)
    sp.add_argument("--labels", required=True)

    sp = sub.add_parser("gradcheck", help="finite-difference gradient check")
    common(sp)

    sp = sub.add_parser("sweep-theta", help="train at several theta values")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--prepared", default=None)
    sp.add_argument("--values", default="0.2,0.5,0.7")
    return p


_CONFIG_KEYS = ("seed", "theta", "delta", "clip_len", "stream",
                "deterministic", "out", "epochs", "target_val_acc",
                "num_per_class", "frames", "height", "width", "window")


def _resolve(args):
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS
                 if hasattr(args, k) and getattr(args, k) is not None}
    return runconfig.resolve(getattr(args, "config", None), overrides)


def _pipe_config(cfg):
    return datapipe.PipeConfig(
        delta=cfg["delta"], window=cfg["window"],
        window_stride=cfg["window_stride"],
        solver=SolverConfig(max_iters=cfg["solver_max_iters"],
                            tol=cfg["solver_tol"],
                            patience=cfg["solver_patience"]),
        flow_alpha=cfg["flow_alpha"], flow_iters=cfg["flow_iters"],
        crop_size=cfg["crop_size"],
    )


def _fresh_run_dir(cfg):
    run_dir = cfg["out"]
    os.makedirs(run_dir, exist_ok=True)
    runconfig.echo(cfg, run_dir)
    return run_dir


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    cfg = _resolve(args)
    run_dir = _fresh_run_dir(cfg)
    records = datapipe.synth_dataset(cfg["num_per_class"], cfg["frames"],
                                     cfg["height"], cfg["width"],
                                     seed=cfg["seed"])
    for rec in records:
        datapipe.save_record(rec, os.path.join(run_dir, rec.id))
    print(f"wrote {len(records)} records under {run_dir}")
    return 0


def cmd_flow(args):
    cfg = _resolve(args)
    run_dir = _fresh_run_dir(cfg)
    record = datapipe.load_frames(args.video)
    gray = [optflow.to_luma(f) for f in record.frames]
    fields = optflow.flow_sequence(gray, cfg["flow_alpha"],
                                   cfg["flow_iters"], pad_to_length=True)
    stack = np.stack([f.uv for f in fields])
    out = os.path.join(run_dir, f"{record.id}_flow.vtns")
    tensor_save(stack, out)
    print(f"flow stack {stack.shape} -> {out}")
    return 0


def cmd_rankpool(args):
    cfg = _resolve(args)
    run_dir = _fresh_run_dir(cfg)
    record = datapipe.load_frames(args.video)
    solver = SolverConfig(max_iters=cfg["solver_max_iters"],
                          tol=cfg["solver_tol"],
                          patience=cfg["solver_patience"])
    images = rankpool.dynamic_image_sequence(
        list(record.frames), cfg["window"], cfg["window_stride"],
        cfg["delta"], solver)
    stack = np.stack([di.d for di in images])
    out = os.path.join(run_dir, f"{record.id}_dyn.vtns")
    tensor_save(stack, out)
    print(f"dynamic images {stack.shape} -> {out}")
    return 0


def cmd_prepare(args):
    cfg = _resolve(args)
    run_dir = _fresh_run_dir(cfg)
    records = datapipe.load_dataset(args.data)
    pipe = _pipe_config(cfg)
    stacks = datapipe.prepare_dataset(records, cfg["stream"], pipe)
    with open(os.path.join(run_dir, "order.txt"), "w") as fh:
        for rec, stack in zip(records, stacks):
            tensor_save(stack, os.path.join(run_dir, f"{rec.id}.vtns"))
            fh.write(f"{rec.id} {rec.label}\n")
    print(f"prepared {len(records)} {cfg['stream']} stacks under {run_dir}")
    return 0


def _load_prepared(prepared_dir, records):
    return [tensor_load(os.path.join(prepared_dir, f"{r.id}.vtns"))
            for r in records]


def _train_config(cfg):
    return net.TrainConfig(
        batch=cfg["batch"], lr=cfg["lr"], momentum=cfg["momentum"],
        lr_patience=cfg["lr_patience"], epochs=cfg["epochs"],
        seed=cfg["seed"], deterministic=cfg["deterministic"],
        delta=cfg["delta"], flow_alpha=cfg["flow_alpha"],
        flow_iters=cfg["flow_iters"],
        target_val_acc=cfg["target_val_acc"],
    )


def cmd_train(args):
    cfg = _resolve(args)
    run_dir = _fresh_run_dir(cfg)
    records = datapipe.load_dataset(args.data)
    prepared = (_load_prepared(args.prepared, records)
                if args.prepared else None)
    in_channels = 5 if cfg["stream"] == "fused" else 2
    net_cfg = net.desk_net_config(
        in_channels=in_channels, clip_len=cfg["clip_len"],
        num_classes=max(r.label for r in records) + 1,
        theta=cfg["theta"], input_size=cfg["crop_size"])
    state, metrics = net.train(net_cfg, _train_config(cfg), records,
                               prepared=prepared, run_dir=run_dir)
    best = max(m["val_acc"] for m in metrics)
    print(f"best val_acc {best:.3f} over {len(metrics)} epochs -> {run_dir}")
    return 0


def cmd_eval(args):
    cfg = _resolve(args)
    run_dir = _fresh_run_dir(cfg)
    state, _ = net.load_checkpoint(args.checkpoint)
    records = datapipe.load_dataset(args.data)
    stream = "fused" if state.config.in_channels == 5 else "flow"
    if args.prepared:
        prepared = _load_prepared(args.prepared, records)
    else:
        pipe = _pipe_config(cfg)
        prepared = datapipe.prepare_dataset(records, stream, pipe)
    labels = [r.label for r in records]
    scores, acc, per_class = net.evaluate(state, prepared, labels)
    tensor_save(scores, os.path.join(run_dir, "scores.vtns"))
    tensor_save(np.asarray(labels, dtype=np.float32),
                os.path.join(run_dir, "labels.vtns"))
    with open(os.path.join(run_dir, "accuracy.txt"), "w") as fh:
        fh.write(f"accuracy {acc!r}\n")
        for c, a in enumerate(per_class):
            fh.write(f"class_{c} {a!r}\n")
    print(f"accuracy {acc:.3f} ({len(records)} clips) -> {run_dir}")
    return 0


def cmd_ensemble(args):
    cfg = _resolve(args)
    run_dir = _fresh_run_dir(cfg)
    score_sets = [tensor_load(p) for p in args.scores]
    labels = tensor_load(args.labels).astype(np.int64)
    fused, acc = net.ensemble(score_sets, labels)
    tensor_save(fused.astype(np.float32),
                os.path.join(run_dir, "fused_scores.vtns"))
    print(f"ensemble of {len(score_sets)} sets: accuracy {acc:.3f}")
    return 0


def cmd_gradcheck(args):
    cfg = _resolve(args)
    err = check_tcdc_gradients(theta=cfg["theta"], seed=cfg["seed"])
    print(f"max relative gradient error {err:.2e} (theta={cfg['theta']})")
    if err >= 1e-3:
        raise NumericError(f"gradcheck failed: {err:.2e} >= 1e-3")
    return 0


def cmd_sweep_theta(args):
    cfg = _resolve(args)
    run_dir = _fresh_run_dir(cfg)
    values = [float(v) for v in args.values.split(",") if v]
    if not values:
        raise UsageError("--values is empty")
    records = datapipe.load_dataset(args.data)
    prepared = (_load_prepared(args.prepared, records)
                if args.prepared else None)
    in_channels = 5 if cfg["stream"] == "fused" else 2
    rows = []
    for theta in values:
        net_cfg = net.desk_net_config(
            in_channels=in_channels, clip_len=cfg["clip_len"],
            num_classes=max(r.label for r in records) + 1,
            theta=theta, input_size=cfg["crop_size"])
        sub_dir = os.path.join(run_dir, f"theta_{theta:g}")
        _, metrics = net.train(net_cfg, _train_config(cfg), records,
                               prepared=prepared, run_dir=sub_dir)
        rows.append((theta, max(m["val_acc"] for m in metrics)))
    print("theta    val_acc")
    with open(os.path.join(run_dir, "sweep.csv"), "w") as fh:
        fh.write("theta,val_acc\n")
        for theta, acc in rows:
            print(f"{theta:<8g} {acc:.3f}")
            fh.write(f"{theta!r},{acc!r}\n")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "flow": cmd_flow,
    "rankpool": cmd_rankpool,
    "prepare": cmd_prepare,
    "train": cmd_train,
    "eval": cmd_eval,
    "ensemble": cmd_ensemble,
    "gradcheck": cmd_gradcheck,
    "sweep-theta": cmd_sweep_theta,
}


def dispatch(argv):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
