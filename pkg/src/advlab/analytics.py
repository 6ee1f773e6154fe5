"""Feature analytics: min-max scaling, PCA, three classifiers, k-fold CV.

PCA diagonalizes the covariance with cyclic Jacobi rotations and keeps the
smallest component count reaching the target explained-variance ratio,
capped at a maximum. The classifier bag holds Gaussian Naive Bayes,
multinomial logistic regression, and a bagged Gini decision forest; all are
deterministic under a fixed seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, ParameterError
from .metrics import EvalReport, report_from_predictions

_JACOBI_TOL = 1e-10
_JACOBI_MAX_SWEEPS = 100


# ---------------------------------------------------------------------------
# scaling


def normalize_fit(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column minima and maxima of the training data."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise InputError("cannot fit normalization on empty data")
    return X.min(axis=0), X.max(axis=0)


def normalize_apply(X: np.ndarray, mins: np.ndarray, maxs: np.ndarray) -> np.ndarray:
    """Map each column through (x - min) / (max - min); constant columns to 0.

    Held-out values may land outside [0, 1]; no re-fit happens here.
    """
    X = np.asarray(X, dtype=np.float64)
    span = maxs - mins
    scaled = np.where(span > 0, (X - mins) / np.where(span > 0, span, 1.0), 0.0)
    return scaled


# ---------------------------------------------------------------------------
# PCA


def jacobi_eigh(A: np.ndarray, tol: float = _JACOBI_TOL, max_sweeps: int = _JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm drops below ``tol``.
    Returns (eigenvalues, eigenvectors) with eigenvectors in columns,
    unordered.
    """
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(A**2) - np.sum(np.diag(A) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                A[[p, q], :] = rot @ A[[p, q], :]
                A[:, [p, q]] = A[:, [p, q]] @ rot.T
                V[:, [p, q]] = V[:, [p, q]] @ rot.T
    return np.diag(A).copy(), V


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), rows orthonormal
    eigenvalues: np.ndarray  # (k,), descending
    explained_ratio: np.ndarray  # (k,)


def pca_fit(X: np.ndarray, var_target: float = 0.95, max_components: int = 5) -> PcaModel:
    """Fit PCA keeping the fewest components whose cumulative explained
    variance reaches ``var_target``, never more than ``max_components``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InputError("PCA needs at least 2 rows")
    if not 0 < var_target <= 1:
        raise ParameterError("var_target must lie in (0, 1]")
    if max_components < 1:
        raise ParameterError("max_components must be >= 1")
    mean = X.mean(axis=0)
    B = X - mean
    cov = B.T @ B / (X.shape[0] - 1)
    eigvals, eigvecs = jacobi_eigh(cov)
    eigvals = np.maximum(eigvals, 0.0)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    total = eigvals.sum()
    if total == 0.0:
        # zero-variance data: a single component with ratio defined as 1
        return PcaModel(mean, eigvecs[:, :1].T.copy(), eigvals[:1], np.array([1.0]))
    ratios = eigvals / total
    cumulative = np.cumsum(ratios)
    k = int(np.searchsorted(cumulative, var_target - 1e-12) + 1)
    k = min(k, max_components, eigvals.size)
    return PcaModel(mean, eigvecs[:, :k].T.copy(), eigvals[:k], ratios[:k])


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return (X - model.mean) @ model.components.T


def pca_report(model: PcaModel, feature_names: list[str], top_loadings: int = 3) -> str:
    """Ranked/attribute report: remaining variance next to the strongest
    loadings of each component, e.g. ``0.7445  1 0.342energy-0.341homogeneity``."""
    lines = ["ranked,attributes"]
    remaining = 1.0
    for i in range(model.components.shape[0]):
        remaining -= float(model.explained_ratio[i])
        comp = model.components[i]
        idx = np.argsort(-np.abs(comp))[:top_loadings]
        terms = "".join(f"{comp[j]:+.3g}{feature_names[j]}" for j in idx)
        lines.append(f"{max(remaining, 0.0):.4f},{i + 1} {terms.lstrip('+')}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Gaussian Naive Bayes


@dataclass
class NbModel:
    priors: np.ndarray  # (C,)
    means: np.ndarray  # (C, d)
    variances: np.ndarray  # (C, d), floored above 0


def nb_fit(X: np.ndarray, y: np.ndarray, n_classes: int | None = None) -> NbModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise InputError("cannot fit on empty data")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    counts = np.bincount(y, minlength=n_classes)
    if np.any(counts == 0):
        missing = int(np.flatnonzero(counts == 0)[0])
        raise InputError(f"class {missing} has no samples")
    priors = counts / counts.sum()
    means = np.stack([X[y == c].mean(axis=0) for c in range(n_classes)])
    variances = np.stack([X[y == c].var(axis=0) for c in range(n_classes)])
    max_var = float(X.var(axis=0).max())
    floor = 1e-9 * max_var if max_var > 0 else 1e-12
    return NbModel(priors, means, np.maximum(variances, floor))


def nb_predict(model: NbModel, X: np.ndarray) -> np.ndarray:
    """Maximum a-posteriori class; ties break toward the lower index."""
    X = np.asarray(X, dtype=np.float64)
    # (n, C): log prior + sum of per-feature log normal densities
    diff = X[:, None, :] - model.means[None, :, :]
    log_like = -0.5 * (np.log(2 * np.pi * model.variances)[None] + diff**2 / model.variances[None]).sum(axis=2)
    return np.argmax(np.log(model.priors)[None] + log_like, axis=1)


# ---------------------------------------------------------------------------
# multinomial logistic regression


@dataclass
class LrModel:
    weights: np.ndarray  # (C, d)
    biases: np.ndarray  # (C,)


def lr_fit(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int | None = None,
    epochs: int = 500,
    learning_rate: float = 0.5,
) -> LrModel:
    """Full-batch softmax cross-entropy gradient descent from zero weights."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise InputError("cannot fit on empty data")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    n, d = X.shape
    W = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    for _ in range(epochs):
        z = X @ W.T + b
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        delta = (p - onehot) / n
        W -= learning_rate * (delta.T @ X)
        b -= learning_rate * delta.sum(axis=0)
    return LrModel(W, b)


def lr_predict_proba(model: LrModel, X: np.ndarray) -> np.ndarray:
    z = np.asarray(X, dtype=np.float64) @ model.weights.T + model.biases
    z -= z.max(axis=1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=1, keepdims=True)


def lr_predict(model: LrModel, X: np.ndarray) -> np.ndarray:
    return np.argmax(lr_predict_proba(model, X), axis=1)


# ---------------------------------------------------------------------------
# random forest


@dataclass
class _TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "_TreeNode | None" = None
    right: "_TreeNode | None" = None
    counts: np.ndarray | None = None  # leaf class counts


@dataclass
class ForestModel:
    trees: list
    n_classes: int
    rng_seed: int


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p**2).sum())


def _best_split(X, y, feats, n_classes, min_leaf):
    """Lowest weighted-Gini (feature, threshold) among candidate features."""
    best = None
    n = y.size
    for f in feats:
        order = np.argsort(X[:, f], kind="stable")
        xv = X[order, f]
        yv = y[order]
        left = np.zeros(n_classes)
        right = np.bincount(yv, minlength=n_classes).astype(np.float64)
        for i in range(n - 1):
            left[yv[i]] += 1
            right[yv[i]] -= 1
            if xv[i + 1] <= xv[i]:
                continue
            n_left = i + 1
            n_right = n - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            score = (n_left * _gini(left) + n_right * _gini(right)) / n
            if best is None or score < best[0] - 1e-15:
                best = (score, f, (xv[i] + xv[i + 1]) / 2.0)
    return best


def _grow_tree(X, y, n_classes, min_leaf, n_feats, rng):
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    if np.count_nonzero(counts) <= 1 or y.size < 2 * min_leaf:
        return _TreeNode(counts=counts)
    d = X.shape[1]
    feats = rng.choice(d, size=n_feats, replace=False) if n_feats < d else np.arange(d)
    best = _best_split(X, y, feats, n_classes, min_leaf)
    if best is None:
        return _TreeNode(counts=counts)
    _, f, thr = best
    mask = X[:, f] <= thr
    node = _TreeNode(feature=int(f), threshold=float(thr))
    node.left = _grow_tree(X[mask], y[mask], n_classes, min_leaf, n_feats, rng)
    node.right = _grow_tree(X[~mask], y[~mask], n_classes, min_leaf, n_feats, rng)
    return node


def rf_fit(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int | None = None,
    n_trees: int = 100,
    min_leaf: int = 2,
    max_features: int | None = None,
    bootstrap: bool = True,
    rng_seed: int = 0,
) -> ForestModel:
    """Bagged Gini trees; each node inspects sqrt(d) random features unless
    ``max_features`` overrides it. Trees grow to purity or the min-leaf size."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise InputError("cannot fit on empty data")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    d = X.shape[1]
    n_feats = max_features if max_features is not None else max(1, int(round(np.sqrt(d))))
    n_feats = min(n_feats, d)
    trees = []
    seeds = np.random.SeedSequence(rng_seed).spawn(n_trees)
    for s in seeds:
        rng = np.random.default_rng(s)
        if bootstrap:
            idx = rng.integers(0, X.shape[0], size=X.shape[0])
        else:
            idx = np.arange(X.shape[0])
        trees.append(_grow_tree(X[idx], y[idx], n_classes, min_leaf, n_feats, rng))
    return ForestModel(trees, n_classes, rng_seed)


def _tree_predict(node: _TreeNode, X: np.ndarray) -> np.ndarray:
    if node.counts is not None:
        return np.full(X.shape[0], int(np.argmax(node.counts)))
    out = np.empty(X.shape[0], dtype=np.int64)
    mask = X[:, node.feature] <= node.threshold
    out[mask] = _tree_predict(node.left, X[mask])
    out[~mask] = _tree_predict(node.right, X[~mask])
    return out


def rf_predict(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Majority vote across trees; ties break toward the lower class index."""
    X = np.asarray(X, dtype=np.float64)
    votes = np.zeros((X.shape[0], model.n_classes), dtype=np.int64)
    for tree in model.trees:
        pred = _tree_predict(tree, X)
        votes[np.arange(X.shape[0]), pred] += 1
    return np.argmax(votes, axis=1)


# ---------------------------------------------------------------------------
# model dispatch, splits, k-fold evaluation

MODEL_KINDS = ("nb", "lr", "rf")


def fit_predictor(kind: str, X: np.ndarray, y: np.ndarray, n_classes: int, seed: int = 0, **params):
    """Fit one of the bag's classifiers; returns a predict(X) callable."""
    if kind == "nb":
        model = nb_fit(X, y, n_classes)
        return lambda Z: nb_predict(model, Z)
    if kind == "lr":
        model = lr_fit(X, y, n_classes, **params)
        return lambda Z: lr_predict(model, Z)
    if kind == "rf":
        model = rf_fit(X, y, n_classes, rng_seed=seed, **params)
        return lambda Z: rf_predict(model, Z)
    raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def train_test_split(
    X: np.ndarray, y: np.ndarray, test_fraction: float = 0.2, rng_seed: int = 0
):
    """Seed-deterministic shuffled split; returns (X_train, y_train, X_test, y_test)."""
    X = np.asarray(X)
    y = np.asarray(y)
    if not 0 < test_fraction < 1:
        raise ParameterError("test_fraction must lie in (0, 1)")
    order = np.random.default_rng(rng_seed).permutation(X.shape[0])
    n_test = int(round(test_fraction * X.shape[0]))
    test, train = order[:n_test], order[n_test:]
    return X[train], y[train], X[test], y[test]


def stratified_folds(y: np.ndarray, k: int, rng_seed: int = 0) -> list[np.ndarray]:
    """Disjoint folds covering all rows, class ratios preserved within 1."""
    y = np.asarray(y, dtype=np.int64)
    if k < 2:
        raise ConfigError("k must be >= 2")
    rng = np.random.default_rng(rng_seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if idx.size < k:
            raise ConfigError(f"class {c} has {idx.size} samples, fewer than k={k}")
        idx = rng.permutation(idx)
        for i, sample in enumerate(idx):
            folds[i % k].append(int(sample))
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


@dataclass
class KFoldReport:
    accuracy: float
    precision: float
    recall: float
    fold_reports: list[EvalReport] = field(default_factory=list)


def kfold_eval(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    k: int = 2,
    rng_seed: int = 0,
    **params,
) -> KFoldReport:
    """Stratified k-fold cross-validation; metrics averaged over folds."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n_classes = int(y.max()) + 1
    folds = stratified_folds(y, k, rng_seed)
    seeds = np.random.SeedSequence(rng_seed).spawn(k)
    reports = []
    for i, test_idx in enumerate(folds):
        train_mask = np.ones(y.size, dtype=bool)
        train_mask[test_idx] = False
        predict = fit_predictor(
            kind, X[train_mask], y[train_mask], n_classes, seed=int(seeds[i].generate_state(1)[0]), **params
        )
        pred = predict(X[test_idx])
        reports.append(report_from_predictions(y[test_idx], pred, n_classes))
    return KFoldReport(
        accuracy=float(np.mean([r.accuracy for r in reports])),
        precision=float(np.mean([r.precision for r in reports])),
        recall=float(np.mean([r.recall for r in reports])),
        fold_reports=reports,
    )
