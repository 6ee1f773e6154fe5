"""Evasion attacks against a trained network: FGSM, BIM, MIM, and DeepFool.

All attacks are pure: they never mutate the model or the original inputs, and
every returned sample lies inside [clip_min, clip_max]. The sign-based attacks
(FGSM/BIM/MIM) additionally keep the L-inf distance to the original within
epsilon. sign(0) is 0, so a zero budget or a dead gradient leaves the input
untouched.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .errors import InputError, ParameterError
from .metrics import EvalReport, report_from_predictions

ATTACK_NAMES = ("none", "fgsm", "bim", "mim", "deepfool")

# Fraction of a degenerate-gradient norm below which DeepFool declares all
# boundary distances infinite.
_DEGENERATE_NORM = 1e-12


@dataclass
class AttackParams:
    """Shared attack knobs.

    epsilon    L-inf budget for FGSM/BIM/MIM, in input units.
    steps      iteration count for BIM/MIM.
    step_size  per-step magnitude for BIM; defaults to 1.25 * epsilon / steps.
    decay      momentum decay mu for MIM.
    max_iter   DeepFool iteration cap.
    overshoot  DeepFool boundary overshoot eta.
    """

    epsilon: float = 0.3
    steps: int = 10
    step_size: float | None = None
    decay: float = 1.0
    max_iter: int = 50
    overshoot: float = 0.02
    clip_min: float = 0.0
    clip_max: float = 1.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ParameterError("epsilon must be >= 0")
        if self.epsilon > self.clip_max - self.clip_min:
            raise ParameterError("epsilon exceeds the clip range")
        if self.steps < 1:
            raise ParameterError("steps must be >= 1")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be >= 1")
        if self.decay < 0:
            raise ParameterError("decay must be >= 0")
        if self.overshoot < 0:
            raise ParameterError("overshoot must be >= 0")

    def resolved_step_size(self) -> float:
        if self.step_size is not None:
            return self.step_size
        return 1.25 * self.epsilon / self.steps


@dataclass
class AttackSpec:
    """Config-file-addressable attack description."""

    attack: str
    params: AttackParams = field(default_factory=AttackParams)

    def __post_init__(self):
        if self.attack not in ATTACK_NAMES:
            raise ParameterError(f"unknown attack {self.attack!r}; expected one of {ATTACK_NAMES}")

    @classmethod
    def from_dict(cls, d: dict) -> "AttackSpec":
        d = dict(d)
        name = d.pop("attack")
        return cls(name, AttackParams(**d))

    def label(self) -> str:
        if self.attack == "deepfool":
            return f"deepfool(MI={self.params.max_iter})"
        if self.attack == "none":
            return "none"
        return f"{self.attack}(eps={self.params.epsilon:g})"


@dataclass
class AdversarialBatch:
    """Originals, adversarials, and per-sample attack bookkeeping."""

    originals: np.ndarray
    adversarials: np.ndarray
    success: np.ndarray
    linf_dist: np.ndarray
    l2_dist: np.ndarray


def _prep(net: nn.Network, x: np.ndarray, y, params: AttackParams):
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    x2 = x[None, :] if squeeze else x
    if np.any(x2 < params.clip_min - 1e-12) or np.any(x2 > params.clip_max + 1e-12):
        raise InputError("inputs must lie within the clip bounds")
    y2 = None if y is None else np.atleast_1d(np.asarray(y, dtype=np.int64))
    return x2, y2, squeeze


def fgsm(net: nn.Network, x: np.ndarray, y: np.ndarray, params: AttackParams) -> np.ndarray:
    """Single sign step of size epsilon, clipped to valid inputs."""
    x2, y2, squeeze = _prep(net, x, y, params)
    _, grads = nn.batch_losses_and_input_gradients(net, x2, y2)
    adv = np.clip(x2 + params.epsilon * np.sign(grads), params.clip_min, params.clip_max)
    return adv[0] if squeeze else adv


def _project(adv: np.ndarray, x0: np.ndarray, params: AttackParams) -> np.ndarray:
    """Project into the epsilon ball around x0 intersected with the clip box."""
    adv = np.clip(adv, x0 - params.epsilon, x0 + params.epsilon)
    return np.clip(adv, params.clip_min, params.clip_max)


def bim(net: nn.Network, x: np.ndarray, y: np.ndarray, params: AttackParams) -> np.ndarray:
    """Iterated FGSM with per-step projection into the epsilon ball."""
    x2, y2, squeeze = _prep(net, x, y, params)
    step = params.resolved_step_size()
    adv = x2.copy()
    for _ in range(params.steps):
        _, grads = nn.batch_losses_and_input_gradients(net, adv, y2)
        adv = _project(adv + step * np.sign(grads), x2, params)
    return adv[0] if squeeze else adv


def mim(net: nn.Network, x: np.ndarray, y: np.ndarray, params: AttackParams) -> np.ndarray:
    """Momentum iterative method: L1-normalized gradient velocity, sign steps."""
    x2, y2, squeeze = _prep(net, x, y, params)
    step = params.epsilon / params.steps
    adv = x2.copy()
    velocity = np.zeros_like(x2)
    for _ in range(params.steps):
        _, grads = nn.batch_losses_and_input_gradients(net, adv, y2)
        norm1 = np.abs(grads).sum(axis=1, keepdims=True)
        velocity = params.decay * velocity + np.where(norm1 > 0, grads / np.maximum(norm1, 1e-300), 0.0)
        adv = _project(adv + step * np.sign(velocity), x2, params)
    return adv[0] if squeeze else adv


def deepfool(
    net: nn.Network, x: np.ndarray, params: AttackParams, y: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Untargeted minimal-L2 attack stepping to the nearest linearized boundary.

    Returns (adversarials, iteration counts, success flags). When the true
    labels ``y`` are given, samples the model already misclassifies are
    returned unchanged with an iteration count of 0. If every boundary
    distance is degenerate (all logit gradients coincide), the original sample
    is returned with success False.
    """
    x2, y2, squeeze = _prep(net, x, y, params)
    n, d = x2.shape
    z0 = nn.logits(net, x2)
    start_class = np.argmax(z0, axis=1)

    r_total = np.zeros_like(x2)
    iterations = np.zeros(n, dtype=np.int64)
    degenerate = np.zeros(n, dtype=bool)
    if y2 is not None:
        active = start_class == y2
    else:
        active = np.ones(n, dtype=bool)

    scale = 1.0 + params.overshoot
    for _ in range(params.max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        # Linearize at the clipped point: components that would leave the
        # valid box are saturated away, so later iterations route the
        # perturbation through pixels that can still move.
        current = np.clip(x2[idx] + scale * r_total[idx], params.clip_min, params.clip_max)
        z, w = nn.logits_and_class_gradients(net, current)
        pred = np.argmax(z, axis=1)
        flipped = pred != start_class[idx]
        active[idx[flipped]] = False
        idx = idx[~flipped]
        if idx.size == 0:
            continue
        z, w, cls = z[~flipped], w[~flipped], start_class[idx]
        rows = np.arange(idx.size)
        f_diff = z - z[rows, cls][:, None]
        w_diff = w - w[rows, cls, :][:, None, :]
        norms = np.linalg.norm(w_diff, axis=2)
        dist = np.abs(f_diff) / np.maximum(norms, _DEGENERATE_NORM)
        dist[rows, cls] = np.inf
        dist[norms <= _DEGENERATE_NORM] = np.inf
        dead = np.isinf(dist).all(axis=1)
        if dead.any():
            degenerate[idx[dead]] = True
            active[idx[dead]] = False
        live = ~dead
        if not live.any():
            continue
        k = np.argmin(dist[live], axis=1)
        lr = np.arange(live.sum())
        step = (
            np.abs(f_diff[live, :][lr, k]) / np.square(norms[live, :][lr, k])
        )[:, None] * w_diff[live, :, :][lr, k, :]
        r_total[idx[live]] += step
        iterations[idx[live]] += 1

    adv = np.clip(x2 + scale * r_total, params.clip_min, params.clip_max)
    adv[degenerate] = x2[degenerate]
    final_pred = np.argmax(nn.logits(net, adv), axis=1)
    success = final_pred != start_class
    if y2 is not None:
        success = success | (start_class != y2)
    if squeeze:
        return adv[0], iterations[0], success[0]
    return adv, iterations, success


def craft(net: nn.Network, x: np.ndarray, y: np.ndarray, spec: AttackSpec) -> np.ndarray:
    """Dispatch an attack by name; 'none' returns a copy of the inputs."""
    if spec.attack == "none":
        return np.array(x, dtype=np.float64, copy=True)
    if spec.attack == "fgsm":
        return fgsm(net, x, y, spec.params)
    if spec.attack == "bim":
        return bim(net, x, y, spec.params)
    if spec.attack == "mim":
        return mim(net, x, y, spec.params)
    if spec.attack == "deepfool":
        adv, _, _ = deepfool(net, x, spec.params, y=y)
        return adv
    raise ParameterError(f"unknown attack {spec.attack!r}")


def evaluate_under_attack(
    net: nn.Network, data: nn.LabeledBatch, spec: AttackSpec
) -> tuple[EvalReport, AdversarialBatch]:
    """Craft adversarials for the whole batch and score the model on them."""
    if len(data) == 0:
        raise InputError("evaluation data is empty")
    adv = craft(net, data.inputs, data.labels, spec)
    pred = np.argmax(nn.logits(net, adv), axis=1)
    report = report_from_predictions(data.labels, pred, net.class_count, _mean_loss(net, adv, data.labels))
    diff = adv - data.inputs
    batch = AdversarialBatch(
        originals=data.inputs,
        adversarials=adv,
        success=pred != data.labels,
        linf_dist=np.abs(diff).max(axis=1),
        l2_dist=np.linalg.norm(diff, axis=1),
    )
    return report, batch


def _mean_loss(net: nn.Network, x: np.ndarray, y: np.ndarray) -> float:
    losses, _ = nn.batch_losses_and_input_gradients(net, x, y)
    return float(losses.mean())


def export_adversarial_csv(batch: AdversarialBatch, path: str) -> None:
    """Per-sample distances and success flags, one row per sample."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "success", "linf_dist", "l2_dist"])
        for i in range(batch.originals.shape[0]):
            writer.writerow(
                [i, int(batch.success[i]), f"{batch.linf_dist[i]:.9g}", f"{batch.l2_dist[i]:.9g}"]
            )
