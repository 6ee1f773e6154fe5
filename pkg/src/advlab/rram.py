"""Behavioral simulator of a gated-RRAM crossbar.

Signed weights are programmed as differential conductance pairs (G+, G-).
Programming quantizes each weight's state fraction to one of ``n_states``
uniform levels, pushes it through a shape-parameterized conductance curve,
and adds zero-mean write noise. Inference is a plain multiply-accumulate of
input voltages against the conductance difference, with winner-take-all
readout.

The conductance curve blends a linear ramp with one of two nonlinear trends,
selected by the shape parameter ``g_c``:

    f(s) = (1 - a) * s + a * h(s),   a = 2 * |g_c - 0.5|

where h is a normalized inverse exponential (fast early rise) for g_c < 0.5
and a normalized logistic sigmoid centered at 0.5 for g_c > 0.5, both with
steepness k = 6. Endpoints are pinned: f(0) = g_min, f(1) = g_max, and f is
monotone for every g_c in [0, 1].
"""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .attacks import AttackSpec, craft
from .errors import FormatError, InputError, ParameterError, ShapeError
from .metrics import EvalReport, report_from_predictions

CURVE_STEEPNESS = 6.0

CROSSBAR_FORMAT = "advlab-crossbar"
CROSSBAR_VERSION = 1


@dataclass
class DeviceParams:
    """Normalized device model: conductance bounds, state count, curve, noise."""

    g_c: float = 0.5
    sigma2: float = 0.0
    n_states: int = 64
    g_min: float = 0.0
    g_max: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.g_c <= 1.0:
            raise ParameterError("g_c must lie in [0, 1]")
        if self.sigma2 < 0:
            raise ParameterError("sigma2 must be >= 0")
        if self.n_states < 2:
            raise ParameterError("n_states must be >= 2")
        if self.g_min >= self.g_max:
            raise ParameterError("g_min must be < g_max")

    def to_dict(self) -> dict:
        return {
            "g_c": self.g_c,
            "sigma2": self.sigma2,
            "n_states": self.n_states,
            "g_min": self.g_min,
            "g_max": self.g_max,
            "rng_seed": self.rng_seed,
        }


def curve_eval(s, params: DeviceParams):
    """Map state fraction s in [0, 1] to a conductance in [g_min, g_max]."""
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0) or np.any(s > 1):
        raise ParameterError("state fraction must lie in [0, 1]")
    alpha = 2.0 * abs(params.g_c - 0.5)
    k = CURVE_STEEPNESS
    if alpha == 0.0:
        f = s
    elif params.g_c < 0.5:
        h = (1.0 - np.exp(-k * s)) / (1.0 - np.exp(-k))
        f = (1.0 - alpha) * s + alpha * h
    else:
        lo = 1.0 / (1.0 + np.exp(k / 2.0))
        hi = 1.0 / (1.0 + np.exp(-k / 2.0))
        h = (1.0 / (1.0 + np.exp(-k * (s - 0.5))) - lo) / (hi - lo)
        f = (1.0 - alpha) * s + alpha * h
    g = params.g_min + (params.g_max - params.g_min) * f
    return g if g.ndim else float(g)


@dataclass
class CrossbarPair:
    """Differential conductance matrices, shape (in+1, out).

    The extra row carries the bias weights and sees a fixed unit input.
    """

    g_pos: np.ndarray
    g_neg: np.ndarray
    device: DeviceParams
    w_max: float

    def __post_init__(self):
        self.g_pos = np.asarray(self.g_pos, dtype=np.float64)
        self.g_neg = np.asarray(self.g_neg, dtype=np.float64)
        if self.g_pos.shape != self.g_neg.shape or self.g_pos.ndim != 2:
            raise ShapeError("g_pos and g_neg must be 2-D with equal shapes")
        for g in (self.g_pos, self.g_neg):
            if np.any(g < self.device.g_min - 1e-12) or np.any(g > self.device.g_max + 1e-12):
                raise ParameterError("conductances outside [g_min, g_max]")

    @property
    def in_dim(self) -> int:
        return self.g_pos.shape[0] - 1

    @property
    def out_dim(self) -> int:
        return self.g_pos.shape[1]


def program_weights(
    weights: np.ndarray, biases: np.ndarray, device: DeviceParams, w_max: float = 0.0
) -> CrossbarPair:
    """Write a (out, in) weight matrix plus biases into a differential pair.

    Positive weight magnitude goes to G+, negative to G-; the counterpart
    device of each pair stays at the lowest state. State fractions are
    |w| / w_max snapped to the nearest of ``n_states`` uniform levels, then
    shaped by the conductance curve. Write noise (variance ``sigma2``) is
    drawn once, at programming time, and clipped into the conductance range.
    ``w_max`` 0 auto-scales to the largest programmed magnitude.
    """
    weights = np.asarray(weights, dtype=np.float64)
    biases = np.asarray(biases, dtype=np.float64)
    if weights.ndim != 2 or weights.size == 0:
        raise InputError("weight matrix must be non-empty and 2-D")
    if biases.shape != (weights.shape[0],):
        raise ShapeError("bias length must match weight rows")
    # Augmented, crossbar-oriented target: rows = inputs (+1 bias row), cols = outputs.
    target = np.vstack([weights.T, biases[None, :]])
    peak = float(np.abs(target).max())
    if w_max == 0.0:
        w_max = peak if peak > 0 else 1.0
    elif w_max < peak:
        raise ParameterError(f"w_max {w_max} is below the largest weight magnitude {peak}")

    s_pos = np.maximum(target, 0.0) / w_max
    s_neg = np.maximum(-target, 0.0) / w_max
    levels = device.n_states - 1
    rng = np.random.default_rng(device.rng_seed)
    pair = []
    for s in (s_pos, s_neg):
        q = np.round(s * levels) / levels
        g = curve_eval(q, device)
        if device.sigma2 > 0:
            g = g + rng.normal(0.0, np.sqrt(device.sigma2), size=g.shape)
        pair.append(np.clip(g, device.g_min, device.g_max))
    return CrossbarPair(pair[0], pair[1], device, w_max)


def crossbar_mac(xbar: CrossbarPair, v: np.ndarray) -> np.ndarray:
    """Output currents for input voltages v in [0, 1]: I = v_aug @ (G+ - G-)."""
    v = np.asarray(v, dtype=np.float64)
    squeeze = v.ndim == 1
    v2 = v[None, :] if squeeze else v
    if v2.shape[1] != xbar.in_dim:
        raise ShapeError(f"input length {v2.shape[1]} does not match crossbar {xbar.in_dim}")
    v_aug = np.hstack([v2, np.ones((v2.shape[0], 1))])
    currents = v_aug @ (xbar.g_pos - xbar.g_neg)
    return currents[0] if squeeze else currents


def crossbar_infer(xbar: CrossbarPair, data: nn.LabeledBatch) -> EvalReport:
    """Winner-take-all classification; ties break toward the lowest class."""
    if len(data) == 0:
        raise InputError("evaluation data is empty")
    currents = crossbar_mac(xbar, data.inputs)
    pred = np.argmax(currents, axis=1)
    return report_from_predictions(data.labels, pred, xbar.out_dim, mean_loss=None)


@dataclass
class SweepReport:
    """One row per (source, g_c, sigma2); one accuracy column per attack."""

    source: str
    attack_labels: list[str]
    rows: list[dict]
    errors: list[str]

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["training", "g_c", "sigma2", "No Attack"] + self.attack_labels)
        for row in self.rows:
            cells = [row["source"], f"{row['g_c']:g}", f"{row['sigma2']:g}"]
            for key in ["none"] + self.attack_labels:
                v = row["accuracy"].get(key, float("nan"))
                cells.append("" if not np.isfinite(v) else f"{100 * v:.2f}")
            writer.writerow(cells)
        return out.getvalue()


def sweep(
    weights: np.ndarray,
    biases: np.ndarray,
    data: nn.LabeledBatch,
    g_c_values: list[float],
    sigma2_values: list[float],
    attack_specs: list[AttackSpec],
    device: DeviceParams = DeviceParams(),
    source: str = "offchip",
) -> SweepReport:
    """Grid the device space and score the crossbar clean and under attack.

    Adversarial inputs are crafted once against the software model the
    weights came from, then replayed against every device configuration.
    Per-cell failures are recorded and the sweep continues.
    """
    if not g_c_values or not sigma2_values:
        raise InputError("sweep grid is empty")
    soft = nn.Network([nn.DenseLayer(weights, biases, "identity")], class_count=weights.shape[0])
    attack_labels = [s.label() for s in attack_specs if s.attack != "none"]
    errors: list[str] = []
    eval_sets: dict[str, np.ndarray] = {"none": data.inputs}
    for spec in attack_specs:
        if spec.attack == "none":
            continue
        try:
            eval_sets[spec.label()] = craft(soft, data.inputs, data.labels, spec)
        except Exception as exc:  # noqa: BLE001
            errors.append(f"craft[{spec.label()}]: {exc}")
    rows = []
    for g_c in g_c_values:
        for sigma2 in sigma2_values:
            dev = replace(device, g_c=g_c, sigma2=sigma2)
            cell = {"source": source, "g_c": g_c, "sigma2": sigma2, "accuracy": {}}
            try:
                xbar = program_weights(weights, biases, dev)
            except Exception as exc:  # noqa: BLE001
                errors.append(f"program[g_c={g_c}, sigma2={sigma2}]: {exc}")
                rows.append(cell)
                continue
            for key, inputs in eval_sets.items():
                try:
                    report = crossbar_infer(xbar, nn.LabeledBatch(inputs, data.labels))
                    cell["accuracy"][key] = report.accuracy
                except Exception as exc:  # noqa: BLE001
                    errors.append(f"infer[g_c={g_c}, sigma2={sigma2}, {key}]: {exc}")
            rows.append(cell)
    return SweepReport(source, attack_labels, rows, errors)


def save_crossbar(xbar: CrossbarPair, path: str) -> None:
    doc = {
        "format": CROSSBAR_FORMAT,
        "version": CROSSBAR_VERSION,
        "device": xbar.device.to_dict(),
        "w_max": xbar.w_max,
        "g_pos": xbar.g_pos.tolist(),
        "g_neg": xbar.g_neg.tolist(),
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_crossbar(path: str) -> CrossbarPair:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CROSSBAR_FORMAT:
        raise FormatError(f"not a crossbar document: format={doc.get('format')!r}")
    if doc.get("version") != CROSSBAR_VERSION:
        raise FormatError(f"unsupported crossbar version {doc.get('version')!r}")
    return CrossbarPair(
        np.asarray(doc["g_pos"]),
        np.asarray(doc["g_neg"]),
        DeviceParams(**doc["device"]),
        float(doc["w_max"]),
    )
