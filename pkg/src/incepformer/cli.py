"""Command-line entry point.

Every command resolves its configuration (built-in defaults, then
``--config``, then ``--set`` overrides, then dedicated flags), writes it to
``<outdir>/<run-id>/config.json`` and puts its outputs next to it.

Exit codes: 0 success, 2 usage or configuration error, 3 data or format
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .errors import ConfigError, DataError, DimensionError, NumericalError
from .evaluation import (
    ablation_sweep,
    evaluate_model_report,
    export_features,
    itr,
    run_baseline,
    run_subject,
    write_ablation_csv,
    write_features_csv,
    write_report,
)
from .model import load_checkpoint
from .pipeline import (
    RawRecording,
    SubBandEpochs,
    apply_filter_bank,
    extract_epochs,
    jfpm_stimuli,
    load_epoch_archive,
    save_epoch_archive,
    synth_recording,
)
from .rng import derive_rng

log = logging.getLogger("incepformer")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value by dotted path, e.g. model.d_model=32 (repeatable)")
    p.add_argument("--seed", type=int, help="64-bit seed for every random stream")
    p.add_argument("--outdir", help="parent directory for run outputs")
    p.add_argument("--run-id", help="name of the run directory (default: derived from the inputs)")
    p.add_argument("--workers", type=int, help="parallel folds")
    p.add_argument("--tw", type=float, help="epoch window length in seconds")
    p.add_argument("--td", type=float, help="visual latency offset in seconds")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="incepformer", description="SSVEP classification with IncepFormerNet.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic recording and its sub-band epochs")
    _common(p)
    p.add_argument("--classes", type=int, help="number of stimuli taken from the start of the 40-target grid")
    p.add_argument("--blocks", type=int, help="number of blocks (one trial per stimulus per block)")
    p.add_argument("--snr-db", type=float, help="signal-to-noise ratio in dB")

    p = sub.add_parser("preprocess", help="filter-bank and epoch a raw archive")
    _common(p)
    p.add_argument("archive", type=Path)

    p = sub.add_parser("train", help="leave-one-block-out training and evaluation")
    _common(p)
    p.add_argument("archive", type=Path, help="sub-band epoch archive")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--folds", choices=["lobo"], default="lobo", help="run every block-held-out fold")
    group.add_argument("--fold", type=int, metavar="BLOCK", help="run only the fold that holds out BLOCK")

    p = sub.add_parser("eval", help="score a checkpoint on an epoch archive")
    _common(p)
    p.add_argument("checkpoint", type=Path)
    p.add_argument("archive", type=Path)

    p = sub.add_parser("baseline", help="CCA or FBCCA accuracy per block")
    _common(p)
    p.add_argument("archive", type=Path)
    p.add_argument("--method", choices=["cca", "fbcca"])
    p.add_argument("--harmonics", type=int)

    p = sub.add_parser("itr", help="information transfer rate in bits/min")
    p.add_argument("p", type=float, help="accuracy in [0, 1]")
    p.add_argument("n", type=int, help="number of targets")
    p.add_argument("t", type=float, help="selection time in seconds")

    p = sub.add_parser("ablate", help="evaluate every scale-block count")
    _common(p)
    p.add_argument("archive", type=Path)
    p.add_argument("--n-blocks", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])

    p = sub.add_parser("export-features", help="write pre-classifier features to CSV")
    _common(p)
    p.add_argument("checkpoint", type=Path)
    p.add_argument("archive", type=Path)
    return parser


def resolve(args) -> dict:
    overrides = [cfgmod.parse_override(o) for o in args.overrides]
    flags = {"seed": args.seed, "outdir": args.outdir, "run_id": args.run_id, "workers": args.workers,
             "pipeline.tw": args.tw, "pipeline.td": args.td}
    for key, attr in (("synth.n_classes", "classes"), ("synth.n_blocks", "blocks"), ("synth.snr_db", "snr_db"),
                      ("baseline.method", "method"), ("baseline.n_harmonics", "harmonics")):
        flags[key] = getattr(args, attr, None)
    overrides += [(k, v) for k, v in flags.items() if v is not None]
    return cfgmod.resolve_config(args.config, overrides)


def run_dir(cfg: dict, command: str, inputs: dict | None = None) -> Path:
    path = Path(cfg["outdir"]) / cfgmod.run_id(cfg, command, inputs)
    path.mkdir(parents=True, exist_ok=True)
    (path / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _input_id(path: Path) -> str:
    """Content hash of an archive or checkpoint directory, so moving it does not change run identity."""
    if not path.is_dir():
        raise DataError(f"{path} is not an archive or checkpoint directory")
    digest = hashlib.sha256()
    for child in sorted(p for p in path.iterdir() if p.is_file()):
        digest.update(child.name.encode("utf-8") + b"\0")
        digest.update(child.read_bytes())
    return digest.hexdigest()


def load_epochs(path: Path) -> SubBandEpochs:
    obj = load_epoch_archive(path)
    if not isinstance(obj, SubBandEpochs):
        raise DataError(f"{path} holds a raw recording; run `incepformer preprocess` on it first")
    return obj


def epochs_from_raw(raw: RawRecording, cfg: dict) -> SubBandEpochs:
    pipe = cfg["pipeline"]
    fb = apply_filter_bank(raw, cfgmod.filter_specs(cfg), pipe["channels"])
    return extract_epochs(fb, pipe["td"], pipe["tw"])


def report_payload(cfg: dict, command: str, inputs: dict) -> dict:
    return {"command": command, "inputs": inputs, "config": cfgmod.strip_paths(cfg)}


def cmd_synth(args, cfg) -> int:
    s = cfg["synth"]
    if not 2 <= s["n_classes"] <= 40:
        raise ConfigError("synth.n_classes must lie in [2, 40]")
    raw = synth_recording(
        jfpm_stimuli(40)[: s["n_classes"]],
        n_blocks=s["n_blocks"],
        fs=s["fs"],
        stim_duration=s["stim_duration"],
        latency=s["latency"],
        n_harmonics=s["n_harmonics"],
        snr_db=s["snr_db"],
        rng=derive_rng(cfg["seed"], "synth"),
    )
    out = run_dir(cfg, "synth")
    save_epoch_archive(raw, out / "raw")
    epochs = epochs_from_raw(raw, cfg)
    save_epoch_archive(epochs, out / "epochs")
    print(f"wrote {len(raw.trials)} trials: raw archive {out / 'raw'}, epochs {out / 'epochs'}")
    return EXIT_OK


def cmd_preprocess(args, cfg) -> int:
    raw = load_epoch_archive(args.archive)
    if not isinstance(raw, RawRecording):
        raise DataError(f"{args.archive} is already an epoch archive")
    epochs = epochs_from_raw(raw, cfg)
    out = run_dir(cfg, "preprocess", {"archive": _input_id(args.archive)})
    save_epoch_archive(epochs, out / "epochs")
    print(f"wrote {epochs.n_trials} epochs of shape {list(epochs.data.shape[1:])} to {out / 'epochs'}")
    return EXIT_OK


def _finish_report(report, cfg, out: Path, command: str) -> None:
    report.meta.update({"command": command})
    write_report(report, out)
    print(f"mean accuracy {report.mean_accuracy:.4f}  ITR {report.itr_bits_per_min:.2f} bits/min  -> {out}")


def cmd_train(args, cfg) -> int:
    epochs = load_epochs(args.archive)
    inputs = {"archive": _input_id(args.archive), "fold": args.fold}
    out = run_dir(cfg, "train", inputs)
    only = None if args.fold is None else [args.fold]
    report = run_subject(
        epochs, cfgmod.model_config(cfg), cfgmod.schedule(cfg), only_blocks=only, workers=cfg["workers"],
        checkpoint_dir=out / "checkpoints", run_config=report_payload(cfg, "train", inputs),
    )
    _finish_report(report, cfg, out, "train")
    return EXIT_OK


def cmd_eval(args, cfg) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    epochs = load_epochs(args.archive)
    inputs = {"checkpoint": _input_id(args.checkpoint), "archive": _input_id(args.archive)}
    out = run_dir(cfg, "eval", inputs)
    _finish_report(evaluate_model_report(model, epochs, report_payload(cfg, "eval", inputs)), cfg, out, "eval")
    return EXIT_OK


def cmd_baseline(args, cfg) -> int:
    epochs = load_epochs(args.archive)
    b = cfg["baseline"]
    if b["method"] not in ("cca", "fbcca"):
        raise ConfigError(f"unknown baseline method {b['method']!r}")
    inputs = {"archive": _input_id(args.archive)}
    out = run_dir(cfg, "baseline", inputs)
    report = run_baseline(epochs, b["method"], b["n_harmonics"], b["a"], b["b"],
                          run_config=report_payload(cfg, "baseline", inputs))
    _finish_report(report, cfg, out, "baseline")
    return EXIT_OK


def cmd_itr(args) -> int:
    print(f"{itr(args.p, args.n, args.t):.2f}")
    return EXIT_OK


def cmd_ablate(args, cfg) -> int:
    if any(not 1 <= k <= 6 for k in args.n_blocks):
        raise ConfigError("--n-blocks values must lie in [1, 6]")
    epochs = load_epochs(args.archive)
    out = run_dir(cfg, "ablate", {"archive": _input_id(args.archive), "n_blocks": args.n_blocks})
    rows = ablation_sweep(epochs, cfgmod.model_config(cfg), cfgmod.schedule(cfg), args.n_blocks, cfg["workers"])
    path = write_ablation_csv(rows, out / "ablation.csv")
    for row in rows:
        print(f"{row['n_blocks']} blocks: accuracy {row['mean_acc']:.4f} +/- {row['std_acc']:.4f}, "
              f"ITR {row['itr']:.2f}")
    print(f"-> {path}")
    return EXIT_OK


def cmd_export_features(args, cfg) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    epochs = load_epochs(args.archive)
    if model.config.n_samples != epochs.n_samples:
        raise DataError(f"checkpoint expects {model.config.n_samples} samples, archive has {epochs.n_samples}")
    out = run_dir(cfg, "export-features", {"checkpoint": _input_id(args.checkpoint),
                                           "archive": _input_id(args.archive)})
    feats, labels = export_features(model, epochs)
    path = write_features_csv(feats, labels, out / "features.csv")
    print(f"wrote {feats.shape[0]} x {feats.shape[1]} features to {path}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "baseline": cmd_baseline,
    "ablate": cmd_ablate,
    "export-features": cmd_export_features,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "itr":
            return cmd_itr(args)
        cfg = resolve(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
