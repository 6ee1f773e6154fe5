"""Adversarial training and the cross-attack robustness matrix."""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .attacks import AttackSpec, craft, evaluate_under_attack
from .errors import InputError, ParameterError


@dataclass
class DefenseConfig:
    """How to harden a model.

    ``mix_ratio`` is the fraction of each mini-batch replaced by adversarial
    copies. With ``regenerate_each_epoch`` the adversarials are crafted
    against the current weights as training progresses; otherwise a static
    adversarial copy of the training set is generated once up front.
    """

    train_attack: AttackSpec
    mix_ratio: float = 0.5
    regenerate_each_epoch: bool = True
    base: nn.TrainConfig = field(default_factory=nn.TrainConfig)

    def __post_init__(self):
        if not 0.0 <= self.mix_ratio <= 1.0:
            raise ParameterError("mix_ratio must lie in [0, 1]")


def adversarial_train(
    net: nn.Network, data: nn.LabeledBatch, cfg: DefenseConfig
) -> tuple[nn.Network, list[float]]:
    """Train with a fraction of every batch replaced by adversarial samples.

    Mirrors nn.train exactly: same shuffle stream, same update rule. With
    mix_ratio 0 the resulting weights are identical to plain training under
    the same seed.
    """
    if len(data) == 0:
        raise InputError("training data is empty")
    rng = np.random.default_rng(cfg.base.rng_seed)
    n = len(data)
    static_adv = None
    if not cfg.regenerate_each_epoch and cfg.mix_ratio > 0:
        static_adv = craft(net, data.inputs, data.labels, cfg.train_attack)
    history = []
    for _ in range(cfg.base.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.base.batch_size):
            idx = order[start : start + cfg.base.batch_size]
            x = data.inputs[idx]
            y = data.labels[idx]
            k = int(round(cfg.mix_ratio * idx.size))
            if k > 0:
                if static_adv is not None:
                    x[:k] = static_adv[idx[:k]]
                else:
                    x[:k] = craft(net, x[:k], y[:k], cfg.train_attack)
            total += nn._sgd_step(net, x, y, cfg.base.learning_rate)
        history.append(total / n)
    return net, history


@dataclass
class CrossAttackMatrix:
    """Accuracy of each hardened model (rows) under each attack (columns)."""

    train_labels: list[str]
    eval_labels: list[str]
    accuracy: np.ndarray
    diagonal: np.ndarray
    errors: list[str]

    def row_mean(self, i: int, exclude_diagonal: bool = True, exclude_none: bool = True) -> float:
        keep = np.ones(len(self.eval_labels), dtype=bool)
        if exclude_diagonal:
            keep &= ~self.diagonal[i]
        if exclude_none:
            keep &= np.array([lbl != "none" for lbl in self.eval_labels])
        vals = self.accuracy[i, keep]
        vals = vals[np.isfinite(vals)]
        return float(vals.mean()) if vals.size else float("nan")


def cross_attack_matrix(
    train_data: nn.LabeledBatch,
    eval_data: nn.LabeledBatch,
    train_specs: list[AttackSpec],
    eval_specs: list[AttackSpec],
    cfg: DefenseConfig,
    layer_dims: list[int],
) -> CrossAttackMatrix:
    """Harden one model per train spec, score each under every eval spec.

    Diagonal cells (train attack == eval attack) are computed and flagged so
    reports can mark them. Per-cell failures are recorded and the remaining
    cells still run.
    """
    if not train_specs or not eval_specs:
        raise InputError("need at least one train spec and one eval spec")
    t, e = len(train_specs), len(eval_specs)
    acc = np.full((t, e), np.nan)
    diag = np.zeros((t, e), dtype=bool)
    errors: list[str] = []
    seeds = np.random.SeedSequence(cfg.base.rng_seed).spawn(t)
    for i, tspec in enumerate(train_specs):
        child_seed = int(seeds[i].generate_state(1)[0])
        try:
            net = nn.build_network(layer_dims, rng_seed=child_seed)
            base = nn.TrainConfig(
                learning_rate=cfg.base.learning_rate,
                epochs=cfg.base.epochs,
                batch_size=cfg.base.batch_size,
                rng_seed=child_seed,
            )
            cell_cfg = DefenseConfig(tspec, cfg.mix_ratio, cfg.regenerate_each_epoch, base)
            adversarial_train(net, train_data, cell_cfg)
        except Exception as exc:  # noqa: BLE001 - cell errors must not kill the sweep
            errors.append(f"train[{tspec.label()}]: {exc}")
            continue
        for j, espec in enumerate(eval_specs):
            diag[i, j] = tspec.attack == espec.attack and espec.attack != "none"
            try:
                report, _ = evaluate_under_attack(net, eval_data, espec)
                acc[i, j] = report.accuracy
            except Exception as exc:  # noqa: BLE001
                errors.append(f"cell[{tspec.label()}, {espec.label()}]: {exc}")
    return CrossAttackMatrix(
        [s.label() for s in train_specs],
        [s.label() for s in eval_specs],
        acc,
        diag,
        errors,
    )


def matrix_to_csv(matrix: CrossAttackMatrix) -> str:
    """Wide CSV mirroring the published table layout.

    Diagonal (train == eval) cells carry a trailing '*': they are computed
    here but left blank in the reference layout.
    """
    out = io.StringIO()
    out.write("trained_with," + ",".join(matrix.eval_labels) + "\n")
    for i, row_label in enumerate(matrix.train_labels):
        cells = []
        for j in range(len(matrix.eval_labels)):
            v = matrix.accuracy[i, j]
            cell = "" if not np.isfinite(v) else f"{100 * v:.2f}"
            if matrix.diagonal[i, j] and cell:
                cell += "*"
            cells.append(cell)
        out.write(row_label + "," + ",".join(cells) + "\n")
    return out.getvalue()
