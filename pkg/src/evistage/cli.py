"""Command-line front end: generate | train | tune | evaluate | all.

A JSON config file supplies the run settings; flags override file values.
Every command writes a manifest (config echo, seeds, artifact hashes)
sufficient to reproduce its outputs bit-exactly.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import decision, metrics
from .data import (
    MultiViewDataset,
    SyntheticConfig,
    TEST,
    VALIDATION,
    generate_synthetic,
    load_dataset,
    normalize,
    split_dataset,
    write_dataset_csv,
)
from .errors import ConfigurationError, EvistageError
from .model import EvidentialClassifier, TrainConfig, _fuse_forward, train

HIST_BINS = 20


def sig6(x: float) -> float:
    """Round to 6 significant digits for all numeric outputs."""
    return float(f"{x:.6g}")


@dataclass
class RunConfig:
    synthetic: SyntheticConfig | None
    dataset: dict | None  # {"views": {...}, "labels": path, "id_column_policy": ...}
    split_fractions: tuple = (0.6, 0.2, 0.2)
    index_files: dict | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    view_order: tuple | None = None
    t1: float | None = None
    t2: float | None = None
    grid_size: int = 100
    tune_split: str = VALIDATION
    output_dir: Path = Path("runs")
    repeat: int = 1
    seed: int = 0

    def __post_init__(self):
        if (self.synthetic is None) == (self.dataset is None):
            raise ConfigurationError(
                "exactly one of 'synthetic' and 'dataset' must be configured"
            )
        if self.repeat < 1:
            raise ConfigurationError("repeat must be >= 1")
        if self.tune_split not in (VALIDATION, TEST):
            raise ConfigurationError("tune_split must be 'validation' or 'test'")


def load_run_config(path, overrides) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc

    seed = overrides.get("seed", raw.get("seed", 0))
    synthetic = None
    if "synthetic" in raw:
        syn = dict(raw["synthetic"])
        syn.setdefault("seed", seed)
        syn["feature_dims"] = tuple(syn["feature_dims"])
        syn["separations"] = tuple(syn["separations"])
        synthetic = SyntheticConfig(**syn)

    train_raw = dict(raw.get("train", {}))
    for key in ("epochs", "learning_rate", "optimizer", "batch_size"):
        if key in overrides:
            train_raw[key] = overrides[key]
    if "hidden_dims" in train_raw:
        train_raw["hidden_dims"] = tuple(train_raw["hidden_dims"])
    train_raw.setdefault("seed", seed + 2)
    train_cfg = TrainConfig(**train_raw)

    policy = dict(raw.get("policy", {}))
    split = dict(raw.get("split", {}))
    view_order = overrides.get("view_order", policy.get("view_order"))
    return RunConfig(
        synthetic=synthetic,
        dataset=raw.get("dataset"),
        split_fractions=tuple(split.get("fractions", (0.6, 0.2, 0.2))),
        index_files=split.get("index_files"),
        train=train_cfg,
        view_order=tuple(view_order) if view_order else None,
        t1=overrides.get("t1", policy.get("t1")),
        t2=overrides.get("t2", policy.get("t2")),
        grid_size=overrides.get("grid_size", policy.get("grid_size", 100)),
        tune_split=overrides.get("tune_split", policy.get("tune_split", VALIDATION)),
        output_dir=Path(overrides.get("out", raw.get("output_dir", "runs"))),
        repeat=overrides.get("repeat", raw.get("repeat", 1)),
        seed=seed,
    )


def build_dataset(cfg: RunConfig) -> MultiViewDataset:
    if cfg.synthetic is not None:
        ds = generate_synthetic(cfg.synthetic)
    else:
        source = cfg.dataset
        ds = load_dataset(
            view_paths=source["views"],
            label_path=source["labels"],
            id_column_policy=source.get("id_column_policy", "first-column"),
        )
    ds = split_dataset(
        ds, fractions=cfg.split_fractions, seed=cfg.seed + 1,
        index_files=cfg.index_files,
    )
    return normalize(ds)


# ---------------------------------------------------------------------------
# Batched fused predictions for reporting / tuning.
# ---------------------------------------------------------------------------

def fused_arrays(models, ds, combo, split_name):
    """Fused (beliefs, uncertainty) arrays for a view combination."""
    idx = ds.indices(split_name)
    evidences = [models[v].forward_batch(ds.views[v][idx])[0] for v in combo]
    (beliefs, uncertainty), _ = _fuse_forward(evidences)
    return beliefs, uncertainty, idx


def combo_report(models, ds, combo, split_name):
    beliefs, uncertainty, idx = fused_arrays(models, ds, combo, split_name)
    pred = beliefs.argmax(axis=1)
    scores = None
    if ds.class_count == 2:
        scores = beliefs[:, 1] + uncertainty / ds.class_count  # Dirichlet mean p_1
    report = metrics.compute_report(pred, ds.labels[idx], ds.class_count, scores)
    return report, float(uncertainty.mean())


def _checkpoint_dir(outdir: Path) -> Path:
    return outdir / "checkpoints"


def load_models(outdir: Path) -> dict:
    ckpt = _checkpoint_dir(outdir)
    paths = sorted(ckpt.glob("*.npz"))
    if not paths:
        raise ConfigurationError(f"no checkpoints found in {ckpt}; run train first")
    models = {}
    for path in paths:
        model = EvidentialClassifier.load(path)
        models[model.view_id] = model
    return models


def write_manifest(outdir: Path, command, cfg: RunConfig, artifacts, events=()):
    lines = [f"command: {command}", f"seed: {cfg.seed}"]
    echo = {
        "synthetic": None if cfg.synthetic is None else vars(cfg.synthetic),
        "dataset": cfg.dataset,
        "split_fractions": list(cfg.split_fractions),
        "train": vars(cfg.train),
        "view_order": list(cfg.view_order) if cfg.view_order else None,
        "t1": cfg.t1, "t2": cfg.t2,
        "grid_size": cfg.grid_size, "tune_split": cfg.tune_split,
        "repeat": cfg.repeat,
    }
    lines.append("config: " + json.dumps(echo, sort_keys=True, default=str))
    for event in events:
        lines.append(f"event: {event}")
    for path in artifacts:
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        lines.append(f"sha256: {digest}  {Path(path).name}")
    manifest = outdir / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# Commands.
# ---------------------------------------------------------------------------

def cmd_generate(cfg: RunConfig) -> list:
    if cfg.synthetic is None:
        raise ConfigurationError("generate requires a synthetic config")
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    ds = generate_synthetic(cfg.synthetic)
    paths = write_dataset_csv(ds, outdir / "dataset")
    artifacts = sorted(paths.values())
    write_manifest(outdir, "generate", cfg, artifacts)
    return artifacts


def cmd_train(cfg: RunConfig) -> list:
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    ds = build_dataset(cfg)
    result = train(ds, cfg.train)

    ckpt = _checkpoint_dir(outdir)
    ckpt.mkdir(exist_ok=True)
    artifacts = []
    for model in result.models:
        path = ckpt / f"{model.view_id}.npz"
        model.save(path)
        artifacts.append(path)

    models = {m.view_id: m for m in result.models}
    combos = [(v,) for v in ds.view_ids]
    combos += [tuple(c) for c in itertools.combinations(ds.view_ids, 2)]
    if len(ds.view_ids) > 2:
        combos.append(tuple(ds.view_ids))
    report_path = outdir / "view_report.csv"
    with report_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["split", "views", "accuracy", "f1_binary", "weighted_f1",
                         "macro_f1", "auc", "mean_uncertainty", "n"])
        for split_name in (VALIDATION, TEST):
            for combo in combos:
                report, mean_u = combo_report(models, ds, combo, split_name)
                writer.writerow([
                    split_name, "+".join(combo),
                    f"{report.accuracy:.6g}",
                    "" if report.f1_binary is None else f"{report.f1_binary:.6g}",
                    f"{report.weighted_f1:.6g}", f"{report.macro_f1:.6g}",
                    "" if report.auc is None else f"{report.auc:.6g}",
                    f"{mean_u:.6g}", report.n,
                ])
    artifacts.append(report_path)
    write_manifest(outdir, "train", cfg, artifacts)
    return artifacts


def resolve_view_order(cfg: RunConfig, models, ds):
    if cfg.view_order is not None:
        return decision.select_view_order(
            {v: 0.0 for v in ds.view_ids}, {}, override=cfg.view_order
        )
    single = {}
    pairs = {}
    for v in ds.view_ids:
        single[v], _ = _combo_accuracy(models, ds, (v,), VALIDATION)
    for a, b in itertools.combinations(ds.view_ids, 2):
        pairs[frozenset((a, b))], _ = _combo_accuracy(models, ds, (a, b), VALIDATION)
    return decision.select_view_order(single, pairs)


def _combo_accuracy(models, ds, combo, split_name):
    beliefs, uncertainty, idx = fused_arrays(models, ds, combo, split_name)
    return metrics.accuracy(beliefs.argmax(axis=1), ds.labels[idx]), uncertainty


def staging_inputs(models, ds, order, split_name):
    """u', u'' and per-stage predicted classes for threshold tuning."""
    b1, u1, idx = fused_arrays(models, ds, (order[0],), split_name)
    b2, u2, _ = fused_arrays(models, ds, order[:2], split_name)
    b3, _, _ = fused_arrays(models, ds, order, split_name)
    stage_preds = np.stack(
        [b1.argmax(axis=1), b2.argmax(axis=1), b3.argmax(axis=1)], axis=1
    )
    return u1, u2, stage_preds, ds.labels[idx]


def cmd_tune(cfg: RunConfig) -> list:
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    ds = build_dataset(cfg)
    models = load_models(outdir)
    order = resolve_view_order(cfg, models, ds)
    u1, u2, stage_preds, labels = staging_inputs(models, ds, order, cfg.tune_split)
    t1, t2 = decision.tune_thresholds(u1, u2, stage_preds, labels, cfg.grid_size)
    path = outdir / "thresholds.txt"
    path.write_text(
        f"t1 {t1:.6g}\nt2 {t2:.6g}\nview_order {','.join(order)}\n"
    )
    write_manifest(outdir, "tune", cfg, [path])
    return [path]


def read_thresholds(path):
    values = {}
    for line in Path(path).read_text().splitlines():
        key, _, value = line.partition(" ")
        values[key] = value
    return (
        float(values["t1"]),
        float(values["t2"]),
        tuple(values["view_order"].split(",")),
    )


def cmd_evaluate(cfg: RunConfig) -> list:
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    ds = build_dataset(cfg)
    models = load_models(outdir)

    if cfg.t1 is not None and cfg.t2 is not None:
        order = cfg.view_order or resolve_view_order(cfg, models, ds)
        t1, t2 = float(cfg.t1), float(cfg.t2)
    else:
        t1, t2, order = read_thresholds(outdir / "thresholds.txt")
        if cfg.view_order is not None:
            order = cfg.view_order
    policy = decision.StagedDecisionPolicy(view_order=order, t1=t1, t2=t2)

    events = []
    records = [
        decision.staged_predict(sample, models, policy)
        for sample in ds.samples(TEST)
    ]
    events.append("test_predictions_fixed")
    test_labels = ds.labels[ds.indices(TEST)]
    events.append("test_labels_read")

    pred = np.array([r.predicted_class for r in records])
    scores = None
    if ds.class_count == 2:
        scores = np.array(
            [r.opinion.beliefs[1] + r.opinion.uncertainty / ds.class_count
             for r in records]
        )
    report = metrics.compute_report(pred, test_labels, ds.class_count, scores)
    shares = decision.stage_distribution(records, view_order=order)

    artifacts = []
    payload = {
        "staged": {k: (sig6(v) if isinstance(v, float) else v)
                   for k, v in report.as_dict().items()},
        "stage_fractions": [sig6(s.fraction) for s in shares],
        "t1": sig6(t1), "t2": sig6(t2),
        "view_order": list(order),
    }
    metrics_json = outdir / "metrics.json"
    metrics_json.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    artifacts.append(metrics_json)

    metrics_txt = outdir / "metrics.txt"
    metrics_txt.write_text(report.to_text())
    artifacts.append(metrics_txt)

    dist_path = outdir / "stage_distribution.csv"
    with dist_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["stage", "fraction", "views"])
        for share in shares:
            writer.writerow([share.stage, f"{share.fraction:.6g}",
                             "+".join(share.views)])
    artifacts.append(dist_path)

    artifacts.append(decision.export_records(records, test_labels, outdir / "predictions.csv"))
    artifacts.extend(_write_histograms(outdir, records, pred, test_labels))
    write_manifest(outdir, "evaluate", cfg, artifacts, events=events)
    return artifacts


def _write_histograms(outdir, records, pred, labels):
    edges = np.linspace(0.0, 1.0, HIST_BINS + 1)
    deciding_u = np.array([r.opinion.uncertainty for r in records])
    correct = pred == labels
    stages = np.array([r.stage_used for r in records])

    paths = []
    path = outdir / "hist_correct_incorrect.csv"
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["bin_left", "bin_right", "correct", "incorrect"])
        h_ok, _ = np.histogram(deciding_u[correct], bins=edges)
        h_bad, _ = np.histogram(deciding_u[~correct], bins=edges)
        for i in range(HIST_BINS):
            writer.writerow([f"{edges[i]:.6g}", f"{edges[i + 1]:.6g}",
                             h_ok[i], h_bad[i]])
    paths.append(path)

    path = outdir / "hist_by_stage.csv"
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["bin_left", "bin_right", "stage1", "stage2", "stage3"])
        hists = [np.histogram(deciding_u[stages == s], bins=edges)[0] for s in (1, 2, 3)]
        for i in range(HIST_BINS):
            writer.writerow([f"{edges[i]:.6g}", f"{edges[i + 1]:.6g}",
                             hists[0][i], hists[1][i], hists[2][i]])
    paths.append(path)
    return paths


def cmd_all(cfg: RunConfig) -> list:
    import dataclasses

    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    staged_reports = []
    for r in range(cfg.repeat):
        sub_seed = cfg.seed + r
        synthetic = cfg.synthetic
        if synthetic is not None:
            synthetic = dataclasses.replace(synthetic, seed=sub_seed)
        sub = dataclasses.replace(
            cfg,
            synthetic=synthetic,
            train=dataclasses.replace(cfg.train, seed=sub_seed + 2),
            output_dir=outdir / f"repeat_{r:04d}",
            seed=sub_seed,
            repeat=1,
        )
        cmd_train(sub)
        cmd_tune(sub)
        cmd_evaluate(sub)
        payload = json.loads((sub.output_dir / "metrics.json").read_text())
        staged_reports.append(payload["staged"])

    keys = ["accuracy", "weighted_f1", "macro_f1", "f1_binary", "auc"]
    summary = {}
    lines = []
    for key in keys:
        values = [rep[key] for rep in staged_reports if rep.get(key) is not None]
        if not values:
            continue
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        summary[key] = {"mean": sig6(mean), "std": sig6(std)}
        lines.append(f"{key} {mean:.6g}±{std:.6g}")

    metrics_json = outdir / "metrics.json"
    metrics_json.write_text(json.dumps(
        {"repeats": cfg.repeat, "staged": summary}, sort_keys=True, indent=2) + "\n")
    metrics_txt = outdir / "metrics.txt"
    metrics_txt.write_text("\n".join(lines) + "\n")
    artifacts = [metrics_json, metrics_txt]
    write_manifest(outdir, "all", cfg, artifacts)
    return artifacts


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "tune": cmd_tune,
    "evaluate": cmd_evaluate,
    "all": cmd_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evistage",
        description="Uncertainty-aware staged multi-view evidential classification",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run config")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--repeat", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--learning-rate", type=float, dest="learning_rate")
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--optimizer",
                        choices=["adaptive-moments", "plain-gradient-descent"])
    parser.add_argument("--t1", type=float)
    parser.add_argument("--t2", type=float)
    parser.add_argument("--view-order", dest="view_order",
                        help="comma-separated view ids")
    parser.add_argument("--grid-size", type=int, dest="grid_size")
    parser.add_argument("--tune-split", dest="tune_split",
                        choices=[VALIDATION, TEST])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config") and value is not None
    }
    if "view_order" in overrides:
        overrides["view_order"] = tuple(overrides["view_order"].split(","))
    try:
        cfg = load_run_config(args.config, overrides)
        COMMANDS[args.command](cfg)
    except EvistageError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
