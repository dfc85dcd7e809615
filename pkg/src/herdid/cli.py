"""Command-line interface: simulate, train, cluster, evaluate, pipeline,
replay. Every command resolves its config, runs, and writes a manifest with
artifact checksums; `replay` re-executes a manifest's command.

Heavy imports happen inside command handlers so thread caps (HERDID_THREADS,
--deterministic) are applied to the numeric backend before numpy loads.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

from .errors import ConfigError, CoverageError, DataError, HerdError, UsageError

RUN_FILES = {
    "dataset": "dataset.herdemb",
    "checkpoint": "checkpoint.herdckp",
    "log": "train.log.jsonl",
    "splits": "splits.json",
    "assignments": "assignments.csv",
    "report": "report.json",
    "manifest": "manifest.json",
}

LOSS_CHOICES = ("bce", "supcon", "supcon-learnable")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _require(cond: bool, message: str):
    if not cond:
        raise UsageError(message)


def _setup_threads(argv):
    cap = os.environ.get("HERDID_THREADS")
    if "--deterministic" in argv:
        cap = "1"
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
            os.environ[var] = cap


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- command implementations (params dicts keep manifests replayable) ----------


def cmd_simulate(params: dict, output: str) -> list[Path]:
    from . import manifest, simulate, store

    t0 = time.monotonic()
    cfg = simulate.SimConfig(
        n_identities=params["ids"],
        n_frames=params["frames"],
        embedding_dim=params["dim"],
        views_per_detection=params["views"],
        identity_noise_sigma=params["id_noise"],
        view_noise_sigma=params["view_noise"],
        visibility_prob=params["visibility"],
        seed=params["seed"],
    )
    dataset = simulate.generate(cfg)
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    store.save(dataset, out)
    manifest.write_manifest(
        out.with_name(out.name + ".manifest.json"), "simulate", params,
        inputs=[], outputs=[out], wall_clock=time.monotonic() - t0,
    )
    return [out]


def _train_common(params: dict, out: Path):
    from . import checkpoint, head, manifest, store, train
    import numpy as np

    t0 = time.monotonic()
    dataset = store.load(params["input"])
    head_seed = manifest.derive_seed(params["seed"], "head-init")
    sampler_seed = manifest.derive_seed(params["seed"], "train-sampler")
    model = head.init(dataset.embedding_dim, seed=head_seed)
    cfg = train.TrainConfig(
        epochs=params["epochs"],
        frames_per_batch=params["frames_per_batch"],
        loss_variant=params["loss"],
        tau=params["tau"],
        seed=sampler_seed,
        eval_every=params["eval_every"],
        supervised=params["supervised"],
        train_frames=params["train_frames"],
        val_frames=params["val_frames"],
        patience=params["patience"],
    )
    extra = {"derived_seeds": {"head": head_seed, "sampler": sampler_seed}}
    if not params["supervised"]:
        result = train.train_selfsup(dataset, model, cfg)
        classifier = None
    else:
        result = train.train_supervised(dataset, model, cfg)
        classifier = result.classifier
        rows, pred = train.classify(dataset, result.head, classifier, result.splits["test"])
        test_acc = float((pred == dataset.gt_labels[rows]).mean())
        extra["supervised"] = {"best_epoch": result.best_epoch, "test_accuracy": test_acc}
        (out / RUN_FILES["splits"]).write_text(json.dumps(
            {name: arr.tolist() for name, arr in result.splits.items()}, indent=2) + "\n")

    ckpt = out / RUN_FILES["checkpoint"]
    meta = {}
    if dataset.n_identities is not None:
        meta["n_identities"] = np.asarray(dataset.n_identities, dtype=np.int64)
    checkpoint.save(ckpt, result.head, result.loss_params, result.optimizer,
                    classifier=classifier, meta=meta)
    log_path = out / RUN_FILES["log"]
    with open(log_path, "w") as f:
        for rec in result.log:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    outputs = [ckpt, log_path]
    if params["supervised"]:
        outputs.append(out / RUN_FILES["splits"])
    manifest.write_manifest(out / RUN_FILES["manifest"], "train", params,
                            inputs=[params["input"]], outputs=outputs,
                            wall_clock=time.monotonic() - t0, extra=extra)
    return outputs


def cmd_train(params: dict, output: str) -> list[Path]:
    return _train_common(params, _out_dir(output))


def cmd_cluster(params: dict, output: str) -> list[Path]:
    from . import checkpoint, cluster, manifest, store

    t0 = time.monotonic()
    out = _out_dir(output)
    dataset = store.load(params["input"])
    bundle = checkpoint.load(params["checkpoint"])
    n_clusters = params["ids"] if params["ids"] else dataset.n_identities
    if not n_clusters:
        raise ConfigError("identity count unknown: dataset header has none and no --ids given")
    result = cluster.cluster_dataset(dataset, bundle.head, n_clusters,
                                     seed=params["seed"], restarts=params["restarts"],
                                     per_view=params["per_view"])
    path = out / RUN_FILES["assignments"]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame_id", "detection_idx", "cluster"])
        for fid, det, c in zip(dataset.frame_ids, dataset.detection_idx, result.assignments):
            writer.writerow([int(fid), int(det), int(c)])
    manifest.write_manifest(out / RUN_FILES["manifest"], "cluster", params,
                            inputs=[params["input"], params["checkpoint"]], outputs=[path],
                            wall_clock=time.monotonic() - t0,
                            extra={"inertia": result.inertia,
                                   "iterations": result.iterations})
    return [path]


def _read_assignments(path, dataset):
    import numpy as np

    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["frame_id", "detection_idx", "cluster"]:
            raise DataError(f"unexpected assignments header {header}")
        rows = [(int(a), int(b), int(c)) for a, b, c in reader]
    if len(rows) != dataset.num_records:
        raise DataError(
            f"assignments cover {len(rows)} detections, dataset has {dataset.num_records}"
        )
    arr = np.array(rows, dtype=np.int64)
    if not (np.array_equal(arr[:, 0], dataset.frame_ids.astype(np.int64))
            and np.array_equal(arr[:, 1], dataset.detection_idx.astype(np.int64))):
        raise DataError("assignments rows do not match the dataset's records")
    return arr[:, 2]


def cmd_evaluate(params: dict, output: str) -> list[Path]:
    from . import evaluate as ev
    from . import manifest, store

    t0 = time.monotonic()
    out = _out_dir(output)
    dataset = store.load(params["input"])
    if not dataset.has_labels():
        raise CoverageError("dataset has unlabeled detections; nothing to score")
    n_id = params["ids"] if params["ids"] else dataset.n_identities
    if not n_id:
        raise ConfigError("identity count unknown: dataset header has none and no --ids given")
    pred = _read_assignments(params["assignments"], dataset)
    report = ev.evaluate(pred, dataset.gt_labels, n_id)
    path = out / RUN_FILES["report"]
    payload = report.to_dict()
    payload["n_identities"] = n_id
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(ev.format_table(report))
    manifest.write_manifest(out / RUN_FILES["manifest"], "evaluate", params,
                            inputs=[params["input"], params["assignments"]], outputs=[path],
                            wall_clock=time.monotonic() - t0)
    return [path]


def cmd_pipeline(params: dict, output: str) -> list[Path]:
    from . import manifest

    t0 = time.monotonic()
    out = _out_dir(output)
    seed = params["seed"]
    inputs = []
    outputs = []

    if params.get("input"):
        dataset_path = Path(params["input"])
        inputs.append(dataset_path)
    else:
        dataset_path = out / RUN_FILES["dataset"]
        sim_params = {
            "ids": params["ids"], "frames": params["frames"], "dim": params["dim"],
            "views": params["views"], "id_noise": params["id_noise"],
            "view_noise": params["view_noise"], "visibility": params["visibility"],
            "seed": manifest.derive_seed(seed, "simulate"),
        }
        cmd_simulate(sim_params, dataset_path)
        outputs.append(dataset_path)

    train_params = {
        "input": str(dataset_path), "loss": params["loss"], "tau": params["tau"],
        "epochs": params["epochs"], "frames_per_batch": params["frames_per_batch"],
        "seed": manifest.derive_seed(seed, "train"), "eval_every": params["eval_every"],
        "supervised": False, "train_frames": 0, "val_frames": 0, "patience": 10,
    }
    outputs += cmd_train(train_params, out)

    cluster_params = {
        "input": str(dataset_path), "checkpoint": str(out / RUN_FILES["checkpoint"]),
        "ids": params["ids"],  # 0 falls back to the dataset header
        "seed": manifest.derive_seed(seed, "cluster"),
        "restarts": params["restarts"], "per_view": False,
    }
    outputs += cmd_cluster(cluster_params, out)

    eval_params = {
        "input": str(dataset_path),
        "assignments": str(out / RUN_FILES["assignments"]),
        "ids": cluster_params["ids"],
    }
    outputs += cmd_evaluate(eval_params, out)

    manifest.write_manifest(out / RUN_FILES["manifest"], "pipeline", params,
                            inputs=inputs, outputs=outputs,
                            wall_clock=time.monotonic() - t0)
    return outputs


def cmd_replay(manifest_path: str, output: str) -> list[Path]:
    from . import manifest

    payload = manifest.read_manifest(manifest_path)
    command = payload.get("command")
    params = payload.get("params")
    if command not in _COMMANDS or not isinstance(params, dict):
        raise ConfigError(f"manifest at {manifest_path} is not replayable")
    return _COMMANDS[command](params, output)


_COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "cluster": cmd_cluster,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


# -- argument wiring -----------------------------------------------------------


def _add_sim_flags(p, required: bool):
    p.add_argument("--ids", type=int, required=required, default=0,
                   help="number of individuals (N_ID)")
    p.add_argument("--frames", type=int, required=required, default=0,
                   help="number of frames")
    p.add_argument("--dim", type=int, default=512, help="embedding dimension")
    p.add_argument("--views", type=int, default=2, help="stored views per detection")
    p.add_argument("--id-noise", type=float, default=0.05, dest="id_noise",
                   help="per-frame appearance drift sigma")
    p.add_argument("--view-noise", type=float, default=0.1, dest="view_noise",
                   help="per-view augmentation sigma")
    p.add_argument("--visibility", type=float, default=1.0,
                   help="per-frame visibility probability")


def _add_train_flags(p):
    p.add_argument("--loss", choices=LOSS_CHOICES, default="bce")
    p.add_argument("--tau", type=float, default=0.5,
                   help="fixed contrastive temperature (supcon only)")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("-k", "--frames-per-batch", type=int, default=2,
                   dest="frames_per_batch")
    p.add_argument("--eval-every", type=int, default=0, dest="eval_every",
                   help="extra mean-loss log records every N batches")


def build_parser() -> _Parser:
    parser = _Parser(prog="herdid",
                     description="Self-supervised animal identity clustering")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    _add_sim_flags(p, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output .herdemb path")

    p = sub.add_parser("train", help="train on a dataset")
    p.add_argument("-i", "--input", required=True, help="input .herdemb path")
    _add_train_flags(p)
    p.add_argument("--supervised", action="store_true",
                   help="cross-entropy baseline (needs labels)")
    p.add_argument("--train-frames", type=int, default=0, dest="train_frames")
    p.add_argument("--val-frames", type=int, default=0, dest="val_frames")
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("-o", "--output", required=True, help="run directory")

    p = sub.add_parser("cluster", help="embed and cluster a dataset")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-c", "--checkpoint", required=True)
    p.add_argument("--ids", type=int, default=0, help="override identity count")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--per-view", action="store_true", dest="per_view",
                   help="cluster every view and majority-vote per detection")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("-o", "--output", required=True, help="run directory")

    p = sub.add_parser("evaluate", help="score assignments against ground truth")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-a", "--assignments", required=True)
    p.add_argument("--ids", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="run directory")

    p = sub.add_parser("pipeline", help="simulate-or-load, train, cluster, evaluate")
    p.add_argument("-i", "--input", default="",
                   help="existing dataset (skips simulation)")
    _add_sim_flags(p, required=False)
    _add_train_flags(p)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("-o", "--output", required=True, help="run directory")

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest", help="path to a manifest.json")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("-o", "--output", required=True,
                   help="output path or run directory")

    return parser


def _params_from_args(args) -> dict:
    skip = {"command", "output", "manifest", "deterministic"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _validate(args):
    if args.command in ("simulate",) or (args.command == "pipeline" and not args.input):
        _require(args.ids >= 2, f"--ids must be >= 2, got {args.ids}")
        _require(args.frames >= 2, f"--frames must be >= 2, got {args.frames}")
        _require(args.views >= 2, f"--views must be >= 2, got {args.views}")
        _require(args.dim >= 1, f"--dim must be >= 1, got {args.dim}")
    if args.command in ("train", "pipeline"):
        _require(args.epochs >= 1, f"--epochs must be >= 1, got {args.epochs}")
        _require(args.frames_per_batch >= 2,
                 f"--frames-per-batch must be >= 2, got {args.frames_per_batch}")
        _require(args.tau > 0, f"--tau must be > 0, got {args.tau}")
    if args.command == "cluster":
        _require(args.restarts >= 1, f"--restarts must be >= 1, got {args.restarts}")
    if getattr(args, "supervised", False):
        _require(args.train_frames >= 1 and args.val_frames >= 1,
                 "--supervised needs --train-frames and --val-frames")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _setup_threads(argv)
    try:
        args = build_parser().parse_args(argv)
        _validate(args)
        if args.command == "replay":
            cmd_replay(args.manifest, args.output)
        else:
            _COMMANDS[args.command](_params_from_args(args), args.output)
        return 0
    except UsageError as e:
        print(f"error[usage]: {e}", file=sys.stderr)
        return 2
    except HerdError as e:
        print(f"error[{e.category}]: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error[io]: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
