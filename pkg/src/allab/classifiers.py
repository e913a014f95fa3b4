"""From-scratch base classifiers: L2 logistic regression and soft-margin RBF SVM.

Both accept per-sample weights and fit deterministically. Multiclass is
one-vs-rest. A module-level fit counter supports refit accounting in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ClassifierError(ValueError):
    pass


class UnsupportedOperation(TypeError):
    pass


class FitCounter:
    """Counts classifier fits; used to verify oracle refit accounting."""

    def __init__(self):
        self.count = 0

    def bump(self):
        self.count += 1

    def reset(self):
        self.count = 0


FIT_COUNTER = FitCounter()


@dataclass
class LogisticConfig:
    l2_strength: float = 1.0
    max_iters: int = 100
    tol: float = 1e-4

    def __post_init__(self):
        if min(self.l2_strength, self.max_iters, self.tol) <= 0:
            raise ClassifierError("logistic config fields must be positive")


@dataclass
class SvmConfig:
    c: float = 1.0
    gamma: float | str = "scale"
    smo_tol: float = 1e-3
    max_passes: int = 200

    def __post_init__(self):
        if self.c <= 0 or self.smo_tol <= 0 or self.max_passes <= 0:
            raise ClassifierError("svm config fields must be positive")
        if self.gamma != "scale" and float(self.gamma) <= 0:
            raise ClassifierError("gamma must be 'scale' or positive")


@dataclass
class _BinaryLogistic:
    w: np.ndarray
    b: float
    converged: bool


@dataclass
class _BinarySvm:
    support_x: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i over support vectors
    b: float
    gamma: float
    converged: bool


@dataclass
class ClassifierModel:
    kind: str  # "logistic" | "svm"
    n_classes: int
    n_features: int
    machines: list  # one binary machine (binary) or C one-vs-rest machines
    constant_class: int | None = None  # single-class degenerate fit
    converged: bool = True

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.constant_class is not None:
            return np.full(len(x), self.constant_class, dtype=np.int64)
        if self.kind == "logistic":
            return np.argmax(predict_proba(self, x), axis=1)
        vals = decision_values(self, x)
        if self.n_classes == 2:
            return (vals > 0).astype(np.int64)
        return np.argmax(vals, axis=1)


def _validate_xy(x, y, sample_weights):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or len(x) != len(y):
        raise ClassifierError("X must be n x K aligned with y")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(sample_weights))):
        raise ClassifierError("non-finite input")
    s = np.asarray(sample_weights, dtype=np.float64)
    if s.shape != (len(y),) or np.any(s <= 0):
        raise ClassifierError("sample_weights must be n positive reals")
    return x, y, s


def fit_logistic(x, y, sample_weights=None, cfg: LogisticConfig | None = None) -> ClassifierModel:
    """Weighted L2 logistic regression by full-batch Newton with line search.

    Objective: sum_i s_i * CE(y_i, sigmoid(w.x_i + b)) + (l2/2) ||w||^2.
    The bias is not regularized. Falls back to gradient steps whenever the
    Newton system is not solvable or fails to decrease the objective.
    """
    cfg = cfg or LogisticConfig()
    if sample_weights is None:
        sample_weights = np.ones(len(y))
    x, y, s = _validate_xy(x, y, sample_weights)
    FIT_COUNTER.bump()
    classes = np.unique(y)
    n_classes = int(y.max()) + 1 if len(y) else 1
    n_classes = max(n_classes, 2)
    if len(classes) == 1:
        return ClassifierModel("logistic", n_classes, x.shape[1], [],
                               constant_class=int(classes[0]))
    if n_classes == 2:
        machines = [_fit_binary_logistic(x, (y == 1).astype(np.float64), s, cfg)]
    else:
        machines = [
            _fit_binary_logistic(x, (y == c).astype(np.float64), s, cfg)
            for c in range(n_classes)
        ]
    converged = all(m.converged for m in machines)
    return ClassifierModel("logistic", n_classes, x.shape[1], machines,
                           converged=converged)


def _fit_binary_logistic(x, t, s, cfg: LogisticConfig) -> _BinaryLogistic:
    n, k = x.shape
    lam = cfg.l2_strength
    xa = np.hstack([x, np.ones((n, 1))])  # bias folded into the last column
    beta = np.zeros(k + 1)
    reg = np.zeros(k + 1)

    def objective(beta_):
        z = xa @ beta_
        ce = np.logaddexp(0.0, z) - t * z
        return float(np.dot(s, ce) + 0.5 * lam * np.dot(beta_[:k], beta_[:k]))

    obj = objective(beta)
    converged = False
    for _ in range(cfg.max_iters):
        z = xa @ beta
        p = 1.0 / (1.0 + np.exp(-z))
        reg[:k] = lam * beta[:k]  # bias unregularized
        g = xa.T @ (s * (p - t)) + reg
        if np.max(np.abs(g)) <= cfg.tol:
            converged = True
            break
        r = s * np.maximum(p * (1.0 - p), 1e-10)
        h = (xa * r[:, None]).T @ xa
        h[np.arange(k), np.arange(k)] += lam
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            step = g
        # backtracking line search, gradient-descent fallback on failure
        for direction in (step, g):
            alpha = 1.0
            accepted = False
            for _ in range(30):
                beta_new = beta - alpha * direction
                obj_new = objective(beta_new)
                if obj_new <= obj - 1e-12:
                    beta, obj = beta_new, obj_new
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
        else:
            break  # no descent in either direction: at numerical optimum
    else:
        z = xa @ beta
        p = 1.0 / (1.0 + np.exp(-z))
        reg[:k] = lam * beta[:k]
        g = xa.T @ (s * (p - t)) + reg
        converged = np.max(np.abs(g)) <= cfg.tol
    return _BinaryLogistic(beta[:k].copy(), float(beta[k]), converged)


def fit_svm_rbf(x, y, sample_weights=None, cfg: SvmConfig | None = None) -> ClassifierModel:
    """Soft-margin RBF SVM via SMO with per-sample box constraints C * s_i."""
    cfg = cfg or SvmConfig()
    if sample_weights is None:
        sample_weights = np.ones(len(y))
    x, y, s = _validate_xy(x, y, sample_weights)
    FIT_COUNTER.bump()
    classes = np.unique(y)
    if len(classes) < 2:
        raise ClassifierError("SVM fit requires at least 2 classes")
    n_classes = int(y.max()) + 1
    if cfg.gamma == "scale":
        var = x.var()
        gamma = 1.0 / (x.shape[1] * var) if var > 0 else 1.0
    else:
        gamma = float(cfg.gamma)
    gram = _rbf_gram(x, x, gamma)
    if n_classes == 2:
        machines = [_smo(x, np.where(y == 1, 1.0, -1.0), s, gram, gamma, cfg)]
    else:
        machines = [
            _smo(x, np.where(y == c, 1.0, -1.0), s, gram, gamma, cfg)
            for c in range(n_classes)
        ]
    converged = all(m.converged for m in machines)
    return ClassifierModel("svm", n_classes, x.shape[1], machines, converged=converged)


def _rbf_gram(a, b, gamma):
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    d2 = np.maximum(aa + bb - 2.0 * (a @ b.T), 0.0)
    return np.exp(-gamma * d2)


def _smo(x, y, s, gram, gamma, cfg: SvmConfig) -> _BinarySvm:
    """Simplified Platt SMO over the weighted soft-margin dual."""
    n = len(y)
    box = cfg.c * s
    alpha = np.zeros(n)
    b = 0.0
    tol = cfg.smo_tol

    def f(i):
        return float(np.dot(alpha * y, gram[:, i]) + b)

    passes = 0
    total_passes = 0
    converged = True
    while passes < 3:
        total_passes += 1
        if total_passes > cfg.max_passes:
            converged = False
            break
        changed = 0
        errors = (alpha * y) @ gram + b - y
        for i in range(n):
            e_i = float(np.dot(alpha * y, gram[:, i]) + b - y[i])
            r_i = e_i * y[i]
            if (r_i < -tol and alpha[i] < box[i]) or (r_i > tol and alpha[i] > 0):
                # second-choice heuristic: try j maximizing |E_i - E_j| first,
                # then fall back to the remaining indices in the same order so
                # a single unproductive pair cannot stall the solver.
                order = np.argsort(-np.abs(errors - e_i), kind="stable")
                for j in order:
                    j = int(j)
                    if j == i:
                        continue
                    e_j = float(np.dot(alpha * y, gram[:, j]) + b - y[j])
                    a_i_old, a_j_old = alpha[i], alpha[j]
                    if y[i] != y[j]:
                        lo = max(0.0, a_j_old - a_i_old)
                        hi = min(box[j], box[i] + a_j_old - a_i_old)
                    else:
                        lo = max(0.0, a_i_old + a_j_old - box[i])
                        hi = min(box[j], a_i_old + a_j_old)
                    if hi - lo < 1e-12:
                        continue
                    eta = 2.0 * gram[i, j] - gram[i, i] - gram[j, j]
                    if eta >= 0:
                        continue
                    a_j = a_j_old - y[j] * (e_i - e_j) / eta
                    a_j = min(max(a_j, lo), hi)
                    if abs(a_j - a_j_old) < 1e-7:
                        continue
                    a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j)
                    alpha[i], alpha[j] = a_i, a_j
                    b1 = b - e_i - y[i] * (a_i - a_i_old) * gram[i, i] \
                        - y[j] * (a_j - a_j_old) * gram[i, j]
                    b2 = b - e_j - y[i] * (a_i - a_i_old) * gram[i, j] \
                        - y[j] * (a_j - a_j_old) * gram[j, j]
                    if 0 < a_i < box[i]:
                        b = b1
                    elif 0 < a_j < box[j]:
                        b = b2
                    else:
                        b = 0.5 * (b1 + b2)
                    errors = (alpha * y) @ gram + b - y
                    changed += 1
                    break
        if changed == 0:
            passes += 1
        else:
            passes = 0
    sv = alpha > 1e-12
    return _BinarySvm(x[sv].copy(), (alpha * y)[sv], b, gamma, converged)


def predict_proba(model: ClassifierModel, x) -> np.ndarray:
    """Class probabilities; logistic only (rows sum to 1)."""
    if model.kind != "logistic":
        raise UnsupportedOperation("predict_proba is only available for logistic models")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != model.n_features:
        raise ClassifierError(f"expected {model.n_features} features, got {x.shape[1]}")
    if model.constant_class is not None:
        probs = np.full((len(x), model.n_classes), 1e-6)
        probs[:, model.constant_class] = 1.0
        return probs / probs.sum(axis=1, keepdims=True)
    if model.n_classes == 2 and len(model.machines) == 1:
        m = model.machines[0]
        p1 = 1.0 / (1.0 + np.exp(-(x @ m.w + m.b)))
        return np.column_stack([1.0 - p1, p1])
    scores = np.column_stack([x @ m.w + m.b for m in model.machines])
    p = 1.0 / (1.0 + np.exp(-scores))
    return p / p.sum(axis=1, keepdims=True)


def decision_values(model: ClassifierModel, x) -> np.ndarray:
    """SVM margins: n vector (binary) or n x C one-vs-rest matrix."""
    if model.kind != "svm":
        raise UnsupportedOperation("decision_values is only available for svm models")
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for m in model.machines:
        kern = _rbf_gram(x, m.support_x, m.gamma)
        cols.append(kern @ m.dual_coef + m.b)
    if model.n_classes == 2 and len(cols) == 1:
        return cols[0]
    return np.column_stack(cols)


def dump_model(model: ClassifierModel) -> dict:
    """JSON-friendly parameter dump for debugging; not a stability contract."""
    out = {"kind": model.kind, "n_classes": model.n_classes, "converged": model.converged}
    if model.kind == "logistic":
        out["machines"] = [
            {"w": m.w.tolist(), "b": m.b} for m in model.machines
        ]
    else:
        out["machines"] = [
            {
                "dual_coef": m.dual_coef.tolist(),
                "b": m.b,
                "gamma": m.gamma,
                "n_support": len(m.dual_coef),
            }
            for m in model.machines
        ]
    return out
