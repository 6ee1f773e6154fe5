"""Command-line front door for the workbench.

Subcommands: train, attack, defend, rram-sweep, malimg-extract, classify,
report. Every run resolves its settings from an optional ``key = value``
config file plus command-line overrides (unknown config keys are rejected),
executes with all randomness derived from one root seed, and writes its
artifacts plus a manifest (resolved config, seed, artifact hashes) into the
output directory. Exit codes: 0 success, 2 config error, 3 data error,
4 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analytics, defense, idx, malimg, nn, rram
from .attacks import AttackParams, AttackSpec, evaluate_under_attack, export_adversarial_csv
from .errors import ConfigError, FormatError, InputError, LabelError, ParameterError, ShapeError

_DATA_ERRORS = (FormatError, InputError, LabelError, ShapeError, FileNotFoundError, IsADirectoryError)


# ---------------------------------------------------------------------------
# config handling

_COMMON_KEYS = {"seed": int, "out": str}

_SCHEMAS: dict[str, dict[str, type]] = {
    "train": {
        "train-images": str,
        "train-labels": str,
        "test-images": str,
        "test-labels": str,
        "hidden": str,
        "learning-rate": float,
        "epochs": int,
        "batch-size": int,
    },
    "attack": {
        "model": str,
        "images": str,
        "labels": str,
        "attack": str,
        "epsilon": float,
        "steps": int,
        "step-size": float,
        "decay": float,
        "max-iter": int,
        "overshoot": float,
        "export-idx": bool,
        "limit": int,
    },
    "defend": {
        "train-images": str,
        "train-labels": str,
        "test-images": str,
        "test-labels": str,
        "train-attacks": str,
        "eval-attacks": str,
        "mix-ratio": float,
        "regenerate": bool,
        "hidden": str,
        "learning-rate": float,
        "epochs": int,
        "batch-size": int,
        "epsilon": float,
        "steps": int,
        "max-iter": int,
        "limit": int,
    },
    "rram-sweep": {
        "model": str,
        "images": str,
        "labels": str,
        "gc": str,
        "sigma2": str,
        "attack": str,
        "n-states": int,
        "epsilon": float,
        "steps": int,
        "max-iter": int,
        "limit": int,
    },
    "malimg-extract": {"root": str, "width": int, "levels": int},
    "classify": {
        "features": str,
        "model": str,
        "k": int,
        "label-column": str,
        "pca": bool,
        "var-target": float,
        "max-components": int,
        "lr-epochs": int,
        "lr-rate": float,
        "trees": int,
        "min-leaf": int,
    },
    "report": {"inputs": str},
}

_DEFAULTS: dict[str, dict] = {
    "train": {"hidden": "128", "learning-rate": 0.1, "epochs": 10, "batch-size": 128},
    "attack": {
        "attack": "fgsm,bim,mim,deepfool",
        "epsilon": 0.3,
        "steps": 10,
        "decay": 1.0,
        "max-iter": 50,
        "overshoot": 0.02,
        "export-idx": False,
        "limit": 0,
    },
    "defend": {
        "train-attacks": "fgsm",
        "eval-attacks": "none,bim,mim,fgsm,deepfool",
        "mix-ratio": 0.5,
        "regenerate": True,
        "hidden": "128",
        "learning-rate": 0.1,
        "epochs": 8,
        "batch-size": 128,
        "epsilon": 0.3,
        "steps": 10,
        "max-iter": 50,
        "limit": 0,
    },
    "rram-sweep": {
        "gc": "0.0,0.5,1.0",
        "sigma2": "0",
        "attack": "none",
        "n-states": 64,
        "epsilon": 0.3,
        "steps": 10,
        "max-iter": 50,
        "limit": 0,
    },
    "malimg-extract": {"width": 0, "levels": 8},
    "classify": {
        "model": "rf",
        "k": 2,
        "label-column": "label",
        "pca": False,
        "var-target": 0.95,
        "max-components": 5,
        "lr-epochs": 500,
        "lr-rate": 0.5,
        "trees": 100,
        "min-leaf": 2,
    },
    "report": {},
}


def _coerce(key: str, raw: str, tp: type):
    try:
        if tp is bool:
            low = raw.strip().lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return tp(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def parse_config_file(path: str, command: str) -> dict:
    """Strict ``key = value`` file; keys must belong to the command's schema."""
    allowed = {**_SCHEMAS[command], **_COMMON_KEYS}
    values: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in allowed:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r} for command {command!r}")
        values[key] = _coerce(key, raw, allowed[key])
    return values


def resolve_settings(command: str, args: argparse.Namespace) -> dict:
    """defaults < config file < command-line overrides."""
    settings = dict(_DEFAULTS[command])
    settings["seed"] = 0
    settings["out"] = "out"
    if args.config:
        settings.update(parse_config_file(args.config, command))
    for key in list(_SCHEMAS[command]) + list(_COMMON_KEYS):
        attr = key.replace("-", "_")
        value = getattr(args, attr, None)
        if value is not None:
            settings[key] = value
    missing = [k for k in _SCHEMAS[command] if k not in settings]
    if missing:
        raise ConfigError(f"missing required settings for {command}: {', '.join(missing)}")
    return settings


# ---------------------------------------------------------------------------
# artifacts and manifests


class RunWriter:
    """Collects artifacts in the output directory and hashes them for the manifest."""

    def __init__(self, out_dir: str):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: dict[str, str] = {}

    def path(self, name: str) -> Path:
        return self.out / name

    def write_text(self, name: str, text: str) -> Path:
        target = self.out / name
        tmp = target.with_suffix(target.suffix + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, target)
        self._record(name)
        return target

    def write_json(self, name: str, doc) -> Path:
        return self.write_text(name, json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def _record(self, name: str) -> None:
        digest = hashlib.sha256((self.out / name).read_bytes()).hexdigest()
        self.artifacts[name] = f"sha256:{digest}"

    def record_external(self, name: str) -> None:
        """Register a file written directly into the output directory."""
        self._record(name)

    def finish(self, command: str, settings: dict, extra: dict | None = None) -> None:
        manifest = {
            "command": command,
            "seed": settings["seed"],
            "config": {k: settings[k] for k in sorted(settings)},
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        if extra:
            manifest.update(extra)
        target = self.out / "manifest.json"
        tmp = target.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, target)


def _stage_seeds(root_seed: int, stages: list[str]) -> dict[str, int]:
    children = np.random.SeedSequence(root_seed).spawn(len(stages))
    return {stage: int(child.generate_state(1)[0]) for stage, child in zip(stages, children)}


# ---------------------------------------------------------------------------
# shared helpers


def _parse_hidden(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(part) for part in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad hidden layer list: {text!r}") from exc


def _parse_floats(text: str, key: str) -> list[float]:
    try:
        return [float(part) for part in str(text).split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad value list for {key!r}: {text!r}") from exc


def _attack_specs(names: str, settings: dict) -> list[AttackSpec]:
    specs = []
    for name in (part.strip() for part in names.split(",")):
        if not name:
            continue
        params = AttackParams(
            epsilon=settings.get("epsilon", 0.3),
            steps=settings.get("steps", 10),
            step_size=settings.get("step-size"),
            decay=settings.get("decay", 1.0),
            max_iter=settings.get("max-iter", 50),
            overshoot=settings.get("overshoot", 0.02),
        )
        specs.append(AttackSpec(name, params))
    if not specs:
        raise ConfigError("no attacks named")
    return specs


def _load_batch(images: str, labels: str, limit: int = 0) -> tuple[nn.LabeledBatch, idx.IdxDataset]:
    ds = idx.load_idx(images, labels)
    if limit and limit < len(ds):
        ds = idx.IdxDataset(ds.images[:limit], ds.labels[:limit])
    return idx.to_batch(ds), ds


def _history_csv(history: list[float]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["epoch", "mean_loss"])
    for i, loss in enumerate(history, 1):
        writer.writerow([i, f"{loss:.9g}"])
    return out.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(settings: dict) -> int:
    writer = RunWriter(settings["out"])
    seeds = _stage_seeds(settings["seed"], ["init", "shuffle"])
    train_batch, _ = _load_batch(settings["train-images"], settings["train-labels"])
    test_batch, _ = _load_batch(settings["test-images"], settings["test-labels"])
    dims = [train_batch.inputs.shape[1], *_parse_hidden(settings["hidden"]), int(train_batch.labels.max()) + 1]
    net = nn.build_network(dims, rng_seed=seeds["init"])
    cfg = nn.TrainConfig(
        learning_rate=settings["learning-rate"],
        epochs=settings["epochs"],
        batch_size=settings["batch-size"],
        rng_seed=seeds["shuffle"],
    )
    _, history = nn.train(net, train_batch, cfg)
    report = nn.evaluate(net, test_batch)
    nn.save_model(net, str(writer.path("model.json")), seed=settings["seed"], metadata={"dims": dims})
    writer.record_external("model.json")
    writer.write_json("eval.json", report.to_dict())
    writer.write_text("history.csv", _history_csv(history))
    writer.finish("train", settings, {"seeds": seeds})
    print(f"test accuracy {report.accuracy:.4f}, loss {report.mean_loss:.4f}")
    return 0


def cmd_attack(settings: dict) -> int:
    writer = RunWriter(settings["out"])
    net = nn.load_model(settings["model"])
    batch, ds = _load_batch(settings["images"], settings["labels"], settings["limit"])
    clean = nn.evaluate(net, batch)
    rows = []
    for spec in _attack_specs(settings["attack"], settings):
        report, adv_batch = evaluate_under_attack(net, batch, spec)
        param_label = f"MI={spec.params.max_iter}" if spec.attack == "deepfool" else f"eps={spec.params.epsilon:g}"
        rows.append([spec.attack, param_label, f"{100 * clean.accuracy:.2f}", f"{100 * report.accuracy:.2f}"])
        if settings["export-idx"] and spec.attack != "none":
            n, r, c = ds.images.shape
            adv_ds = idx.from_float_images(adv_batch.adversarials, batch.labels, r, c)
            img_name = f"adv_{spec.attack}-images.idx"
            lbl_name = f"adv_{spec.attack}-labels.idx"
            idx.write_idx(adv_ds, str(writer.path(img_name)), str(writer.path(lbl_name)))
            writer.record_external(img_name)
            writer.record_external(lbl_name)
            export_adversarial_csv(adv_batch, str(writer.path(f"adv_{spec.attack}.csv")))
            writer.record_external(f"adv_{spec.attack}.csv")
    out = io.StringIO()
    w = csv.writer(out)
    w.writerow(["attack", "parameter", "no_attack_accuracy", "with_attack_accuracy"])
    w.writerows(rows)
    writer.write_text("attack_report.csv", out.getvalue())
    writer.finish("attack", settings)
    for row in rows:
        print(f"{row[0]:10s} {row[1]:10s} clean {row[2]}% -> attacked {row[3]}%")
    return 0


def cmd_defend(settings: dict) -> int:
    writer = RunWriter(settings["out"])
    train_batch, _ = _load_batch(settings["train-images"], settings["train-labels"], settings["limit"])
    test_batch, _ = _load_batch(settings["test-images"], settings["test-labels"], settings["limit"])
    train_specs = _attack_specs(settings["train-attacks"], settings)
    eval_specs = _attack_specs(settings["eval-attacks"], settings)
    dims = [train_batch.inputs.shape[1], *_parse_hidden(settings["hidden"]), int(train_batch.labels.max()) + 1]
    cfg = defense.DefenseConfig(
        train_specs[0],
        mix_ratio=settings["mix-ratio"],
        regenerate_each_epoch=settings["regenerate"],
        base=nn.TrainConfig(
            learning_rate=settings["learning-rate"],
            epochs=settings["epochs"],
            batch_size=settings["batch-size"],
            rng_seed=settings["seed"],
        ),
    )
    matrix = defense.cross_attack_matrix(train_batch, test_batch, train_specs, eval_specs, cfg, dims)
    writer.write_text("cross_matrix.csv", defense.matrix_to_csv(matrix))
    writer.finish("defend", settings, {"cell_errors": matrix.errors})
    print(defense.matrix_to_csv(matrix), end="")
    return 0


def cmd_rram_sweep(settings: dict) -> int:
    writer = RunWriter(settings["out"])
    net = nn.load_model(settings["model"])
    if len(net.layers) != 1:
        raise ConfigError("rram-sweep expects a single-layer model")
    batch, _ = _load_batch(settings["images"], settings["labels"], settings["limit"])
    specs = _attack_specs(settings["attack"], settings)
    device = rram.DeviceParams(n_states=settings["n-states"], rng_seed=settings["seed"])
    report = rram.sweep(
        net.layers[0].weights,
        net.layers[0].biases,
        batch,
        _parse_floats(settings["gc"], "gc"),
        _parse_floats(settings["sigma2"], "sigma2"),
        specs,
        device=device,
    )
    writer.write_text("rram_sweep.csv", report.to_csv())
    writer.finish("rram-sweep", settings, {"cell_errors": report.errors})
    print(report.to_csv(), end="")
    return 0


def cmd_malimg_extract(settings: dict) -> int:
    writer = RunWriter(settings["out"])
    width = settings["width"] or None
    rows, skipped = malimg.extract_dataset(settings["root"], width=width, levels=settings["levels"])
    malimg.write_features_csv(rows, writer.path("features.csv"))
    writer.record_external("features.csv")
    writer.finish("malimg-extract", settings, {"skipped": skipped})
    print(f"extracted {len(rows)} rows ({len(skipped)} skipped) -> features.csv")
    return 0


def cmd_classify(settings: dict) -> int:
    writer = RunWriter(settings["out"])
    X, labels, sublabels, _ = malimg.read_features_csv(settings["features"])
    if X.shape[0] == 0:
        raise InputError("feature CSV holds no rows")
    column = settings["label-column"]
    if column not in ("label", "sublabel"):
        raise ConfigError("label-column must be 'label' or 'sublabel'")
    names = labels if column == "label" else sublabels
    class_names = sorted(set(names))
    y = np.array([class_names.index(v) for v in names])
    mins, maxs = analytics.normalize_fit(X)
    Xn = analytics.normalize_apply(X, mins, maxs)
    pca_doc = None
    if settings["pca"]:
        model = analytics.pca_fit(Xn, settings["var-target"], settings["max-components"])
        writer.write_text("pca_report.txt", analytics.pca_report(model, list(malimg.FEATURE_COLUMNS)))
        Xn = analytics.pca_transform(model, Xn)
        pca_doc = {
            "components": int(model.components.shape[0]),
            "explained_ratio": [float(r) for r in model.explained_ratio],
        }
    params = {}
    if settings["model"] == "lr":
        params = {"epochs": settings["lr-epochs"], "learning_rate": settings["lr-rate"]}
    elif settings["model"] == "rf":
        params = {"n_trees": settings["trees"], "min_leaf": settings["min-leaf"]}
    result = analytics.kfold_eval(settings["model"], Xn, y, k=settings["k"], rng_seed=settings["seed"], **params)
    for i, rep in enumerate(result.fold_reports):
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(["true\\pred", *class_names])
        for ci, row in enumerate(rep.confusion):
            w.writerow([class_names[ci], *row.tolist()])
        writer.write_text(f"confusion_fold{i}.csv", out.getvalue())
    writer.write_json(
        "classify_report.json",
        {
            "model": settings["model"],
            "k": settings["k"],
            "label_column": column,
            "classes": class_names,
            "accuracy": result.accuracy,
            "precision": result.precision,
            "recall": result.recall,
            "pca": pca_doc,
            "fold_accuracy": [r.accuracy for r in result.fold_reports],
        },
    )
    writer.finish("classify", settings)
    print(f"{settings['model']} {settings['k']}-fold accuracy {result.accuracy:.4f}")
    return 0


def cmd_report(settings: dict) -> int:
    writer = RunWriter(settings["out"])
    inputs = [p.strip() for p in settings["inputs"].split(",") if p.strip()]
    if not inputs:
        raise ConfigError("report needs at least one input CSV")
    out = io.StringIO()
    w = csv.writer(out)
    w.writerow(["source", "row", "column", "value"])
    for path in inputs:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                continue
            for rec in reader:
                for col, value in zip(header[1:], rec[1:]):
                    w.writerow([Path(path).name, rec[0], col, value])
    writer.write_text("report_long.csv", out.getvalue())
    writer.finish("report", settings)
    print(f"merged {len(inputs)} csv(s) -> report_long.csv")
    return 0


_HANDLERS = {
    "train": cmd_train,
    "attack": cmd_attack,
    "defend": cmd_defend,
    "rram-sweep": cmd_rram_sweep,
    "malimg-extract": cmd_malimg_extract,
    "classify": cmd_classify,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in _SCHEMAS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        for key, tp in schema.items():
            flag = f"--{key}"
            if tp is bool:
                p.add_argument(flag, dest=key.replace("-", "_"), action="store_const", const=True, default=None)
            else:
                p.add_argument(flag, type=tp, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = resolve_settings(args.command, args)
        return _HANDLERS[args.command](settings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
