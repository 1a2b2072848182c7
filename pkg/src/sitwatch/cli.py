"""Command-line pipeline: synth, angles, featurize, train, eval, estimate.

Every command is deterministic given its inputs and ``--seed``, exits
nonzero with a single-line ``error: ...`` message on failure, and echoes the
effective configuration into the artifacts it writes.  Option precedence is
CLI flag over ``--config`` file over built-in default.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields

import numpy as np
import pandas as pd

from . import evaluation, fileio, synth
from .errors import InvalidArgumentError, SitwatchError
from .features import FeatureConfig, featurize_recording
from .geom import pitch_roll_arrays, rotation_vector_path
from .model import (
    TrainConfig,
    check_layout_compatible,
    load_model,
    predict_proba,
    save_model,
    train,
)


@dataclass(frozen=True)
class RunConfig:
    """Effective pipeline configuration shared by the commands."""

    window_seconds: float = 30.0
    rate_hz: float = 100.0
    seq_rate_hz: float = 20.0
    smooth_seconds: float = 0.25
    ablate_rotvec: bool = False
    ablate_raw: bool = False
    folds: int = 5
    seed: int = 0
    threshold: float = 0.5
    n_trees: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    subsample_frac: float = 0.8
    pos_weight: float = 1.0

    def __post_init__(self):
        if self.ablate_rotvec and self.ablate_raw:
            raise InvalidArgumentError("cannot disable both the raw and rotation-vector features")
        for name in ("window_seconds", "rate_hz", "seq_rate_hz", "threshold"):
            if getattr(self, name) <= 0 and name != "threshold":
                raise InvalidArgumentError(f"{name} must be positive")
        if self.smooth_seconds < 0:
            raise InvalidArgumentError("smooth_seconds must be non-negative")
        if self.folds < 2:
            raise InvalidArgumentError("folds must be at least 2")

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            seq_rate=self.seq_rate_hz,
            smooth_seconds=self.smooth_seconds,
            ablate_rotvec=self.ablate_rotvec,
            ablate_raw=self.ablate_raw,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            learning_rate=self.learning_rate,
            min_samples_leaf=self.min_samples_leaf,
            subsample_frac=self.subsample_frac,
            seed=self.seed,
            pos_weight=self.pos_weight,
        )

    def echo(self) -> str:
        return " ".join(f"{f.name}={getattr(self, f.name)!r}".replace("'", "") for f in fields(self))


_CONFIG_FIELDS = {f.name: f.type for f in fields(RunConfig)}


def _merge_config(args: argparse.Namespace) -> RunConfig:
    """flag > config file > default."""
    file_values = {}
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        with open(cfg_path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidArgumentError(f"config file {cfg_path}: invalid JSON ({exc})") from exc
        unknown = set(doc) - set(_CONFIG_FIELDS)
        if unknown:
            raise InvalidArgumentError(f"config file {cfg_path}: unknown keys {sorted(unknown)}")
        file_values = doc
    merged = {}
    for name in _CONFIG_FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            merged[name] = flag
        elif name in file_values:
            merged[name] = file_values[name]
    return RunConfig(**merged)


def _add_common_options(p: argparse.ArgumentParser, train_opts: bool = False) -> None:
    p.add_argument("--config", help="JSON file with RunConfig fields (flags take precedence)")
    p.add_argument("--window-seconds", dest="window_seconds", type=float)
    p.add_argument("--rate-hz", dest="rate_hz", type=float)
    p.add_argument("--seq-rate-hz", dest="seq_rate_hz", type=float)
    p.add_argument("--smooth-seconds", dest="smooth_seconds", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-rotvec", dest="ablate_rotvec", action="store_const", const=True,
                   help="drop the rotation-vector feature group")
    p.add_argument("--no-raw", dest="ablate_raw", action="store_const", const=True,
                   help="drop the raw acceleration feature group")
    p.add_argument("-v", "--verbose", action="store_true")
    if train_opts:
        p.add_argument("--n-trees", dest="n_trees", type=int)
        p.add_argument("--max-depth", dest="max_depth", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)
        p.add_argument("--subsample-frac", dest="subsample_frac", type=float)
        p.add_argument("--pos-weight", dest="pos_weight", type=float)
        p.add_argument("--threshold", type=float)


def _open_out(path):
    return open(path, "w", encoding="utf-8", newline="") if path else sys.stdout


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _merge_config(args)
    sc = synth.load_scenario(args.scenario)
    if args.seed is not None:
        sc = synth.Scenario(segments=sc.segments, noise_std=sc.noise_std, seed=args.seed)
    rec, intervals = synth.generate(sc, rate=cfg.rate_hz)
    fileio.write_recording_csv(args.output, rec)
    if args.labels:
        fileio.write_labels_csv(args.labels, intervals)
    print(f"wrote {args.output}: {len(rec)} samples at {cfg.rate_hz} Hz, "
          f"{len(intervals)} label intervals")
    return 0


def cmd_angles(args) -> int:
    cfg = _merge_config(args)
    rec = fileio.read_recording_csv(args.recording, nominal_rate=cfg.rate_hz)
    phi, theta, near, _ = pitch_roll_arrays(rec.accel)
    vecs, _, _ = rotation_vector_path(rec.accel)
    df = pd.DataFrame(
        {
            "t_ns": rec.t,
            "phi": phi,
            "theta": theta,
            "near_singular": near.astype(int),
            "rx": vecs[:, 0],
            "ry": vecs[:, 1],
            "rz": vecs[:, 2],
        }
    )
    out = _open_out(args.output)
    try:
        df.to_csv(out, index=False, lineterminator="\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _featurize(cfg: RunConfig, recording_path, labels_path=None):
    rec = fileio.read_recording_csv(recording_path, nominal_rate=cfg.rate_hz)
    feats = featurize_recording(rec, cfg.window_seconds, cfg.rate_hz, cfg.feature_config())
    if labels_path:
        intervals = fileio.read_labels_csv(labels_path)
        feats.labels = evaluation.majority_labels_for_spans(feats.start_ns, feats.end_ns, intervals)
    return feats


def cmd_featurize(args) -> int:
    cfg = _merge_config(args)
    feats = _featurize(cfg, args.recording, args.labels)
    fileio.write_features_csv(args.output, feats, config_echo=cfg.echo())
    dropped = f", dropped {len(feats.dropped)}" if feats.dropped else ""
    print(f"wrote {args.output}: {len(feats.matrix)} windows x {len(feats.names)} features{dropped}")
    return 0


def cmd_train(args) -> int:
    cfg = _merge_config(args)
    feats, _ = fileio.read_features_csv(args.features)
    if feats.labels is None:
        raise InvalidArgumentError(f"{args.features}: no label column; featurize with -l")
    m = train(
        feats.matrix,
        feats.labels,
        cfg.train_config(),
        layout_version=feats.layout_version,
        groups=feats.groups,
        feature_names=feats.names,
    )
    save_model(args.output, m)
    print(f"wrote {args.output}: {len(m.trees)} trees on {m.n_features} features, "
          f"final train loss {m.train_losses[-1]:.6f}")
    return 0


def _select_groups(feats, cfg: RunConfig):
    """Apply --no-rotvec / --no-raw to an already extracted feature table."""
    drop_prefixes = []
    groups = list(feats.groups)
    if cfg.ablate_rotvec and "rotvec" in groups:
        drop_prefixes += ["rx_", "ry_", "rz_", "grav_"]
        groups.remove("rotvec")
    if cfg.ablate_raw and "raw" in groups:
        drop_prefixes += ["ax_", "ay_", "az_"]
        groups.remove("raw")
    if not drop_prefixes:
        return feats.matrix, feats.names, tuple(groups)
    keep = [j for j, n in enumerate(feats.names) if not any(n.startswith(p) for p in drop_prefixes)]
    names = tuple(feats.names[j] for j in keep)
    return feats.matrix[:, keep], names, tuple(groups)


def _metrics_row(name: str, m: evaluation.Metrics) -> str:
    return (f"{name:<6} {m.recall:8.4f} {m.precision:10.4f} {m.f1:8.4f} {m.accuracy:9.4f}"
            f"   tp={m.tp} fp={m.fp} fn={m.fn} tn={m.tn}")


def cmd_eval(args) -> int:
    cfg = _merge_config(args)
    extra = (args.group_column,) if args.group_column else ()
    feats, extras = fileio.read_features_csv(args.features, extra_meta=extra)
    if feats.labels is None:
        raise InvalidArgumentError(f"{args.features}: no label column; featurize with -l")
    X, names, groups = _select_groups(feats, cfg)
    print(f"# features: {len(names)} ({','.join(groups)}); windows: {len(X)}; "
          f"layout {feats.layout_version}")
    print(f"{'fold':<6} {'recall':>8} {'precision':>10} {'f1':>8} {'accuracy':>9}")
    doc = {"layout": feats.layout_version, "groups": list(groups), "config": cfg.echo()}
    if args.holdout is not None:
        metrics, _ = evaluation.holdout_eval(
            X, feats.labels, test_frac=args.holdout, seed=cfg.seed,
            cfg=cfg.train_config(), threshold=cfg.threshold,
        )
        print(_metrics_row("test", metrics))
        doc["holdout"] = _metrics_dict(metrics)
        summary = metrics
    else:
        result = evaluation.kfold_cv(
            X, feats.labels, k=cfg.folds, seed=cfg.seed,
            cfg=cfg.train_config(), threshold=cfg.threshold,
            groups=extras[args.group_column] if args.group_column else None,
        )
        for i, m in enumerate(result.folds):
            print(_metrics_row(str(i + 1), m))
        for i, why in result.skipped:
            print(f"fold {i + 1} skipped: {why}")
        print(f"{'mean':<6} {result.mean['recall']:8.4f} {result.mean['precision']:10.4f} "
              f"{result.mean['f1']:8.4f} {result.mean['accuracy']:9.4f}")
        print(f"{'std':<6} {result.std['recall']:8.4f} {result.std['precision']:10.4f} "
              f"{result.std['f1']:8.4f} {result.std['accuracy']:9.4f}")
        doc["folds"] = [_metrics_dict(m) for m in result.folds]
        doc["skipped"] = [{"fold": i, "reason": why} for i, why in result.skipped]
        doc["mean"] = result.mean
        doc["std"] = result.std
        summary = result.mean
    if args.json:
        with open(args.json, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if isinstance(summary, evaluation.Metrics):
        print(f"summary recall={summary.recall!r} precision={summary.precision!r} "
              f"f1={summary.f1!r} accuracy={summary.accuracy!r}")
    else:
        print(f"summary recall={summary['recall']!r} precision={summary['precision']!r} "
              f"f1={summary['f1']!r} accuracy={summary['accuracy']!r}")
    return 0


def _metrics_dict(m: evaluation.Metrics) -> dict:
    return {
        "tp": m.tp, "fp": m.fp, "fn": m.fn, "tn": m.tn,
        "recall": m.recall, "precision": m.precision, "f1": m.f1, "accuracy": m.accuracy,
        "degenerate": list(m.degenerate),
    }


def cmd_estimate(args) -> int:
    cfg = _merge_config(args)
    m = load_model(args.model)
    run = RunConfig(
        **{
            **{f.name: getattr(cfg, f.name) for f in fields(RunConfig)},
            "ablate_rotvec": "rotvec" not in m.groups,
            "ablate_raw": "raw" not in m.groups,
        }
    )
    feats = _featurize(run, args.recording)
    check_layout_compatible(m, feats.layout_version, feats.groups, feats.names)
    proba = predict_proba(m, feats.matrix)
    decisions = np.where(proba >= cfg.threshold, "sit", "nonsit")
    df = pd.DataFrame(
        {
            "window_index": feats.window_index,
            "start_ns": feats.start_ns,
            "end_ns": feats.end_ns,
            "proba_sit": proba,
            "decision": decisions,
        }
    )
    out = _open_out(args.output)
    try:
        df.to_csv(out, index=False, lineterminator="\n")
    finally:
        if out is not sys.stdout:
            out.close()
    secs = evaluation.sitting_time(decisions, cfg.window_seconds)
    print(f"windows {len(decisions)} sit {int(np.sum(decisions == 'sit'))}")
    print(f"sitting_seconds {secs!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sitwatch",
        description="Sitting-time estimation from wrist accelerometer recordings",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic recording from a scenario")
    p.add_argument("scenario", help="scenario JSON path or built-in name "
                                    f"({', '.join(synth.BUILTIN_SCENARIOS)})")
    p.add_argument("-o", "--output", required=True, help="recording CSV to write")
    p.add_argument("-l", "--labels", help="label-interval CSV to write")
    _add_common_options(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("angles", help="debug dump of per-sample pitch/roll and rotation vectors")
    p.add_argument("recording")
    p.add_argument("-o", "--output", help="output CSV (default stdout)")
    _add_common_options(p)
    p.set_defaults(func=cmd_angles)

    p = sub.add_parser("featurize", help="windowed features (and majority labels) from a recording")
    p.add_argument("recording")
    p.add_argument("-l", "--labels", help="label-interval CSV for majority labeling")
    p.add_argument("-o", "--output", required=True)
    _add_common_options(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="fit the boosted-tree classifier on a feature CSV")
    p.add_argument("features")
    p.add_argument("-o", "--output", required=True, help="model file to write")
    _add_common_options(p, train_opts=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validated metrics on a labeled feature CSV")
    p.add_argument("features")
    p.add_argument("--folds", dest="folds", type=int)
    p.add_argument("--holdout", type=float, help="single seeded holdout with this test fraction")
    p.add_argument("--json", help="write machine-readable metrics to this JSON file")
    p.add_argument("--group-column", help="CSV column with subject/group ids for group-level folds")
    _add_common_options(p, train_opts=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("estimate", help="predicted sitting time for a recording, given a model")
    p.add_argument("recording")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-o", "--output", help="per-window decision CSV (default stdout)")
    _add_common_options(p, train_opts=True)
    p.set_defaults(func=cmd_estimate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (SitwatchError, OSError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
