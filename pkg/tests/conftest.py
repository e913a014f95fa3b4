"""Shared helpers for the test suite."""

import numpy as np
import pytest

from allab.classifiers import ClassifierModel, _BinaryLogistic, _BinarySvm
from allab.data import ALState, Dataset, class_weights_for_labels


def make_dataset(features, labels) -> Dataset:
    """Dataset with class weights computed from its own label counts."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = int(labels.max()) + 1
    return Dataset(features, labels, class_weights_for_labels(labels, n_classes))


def make_state(features, labels, n_annot) -> ALState:
    """ALState whose first n_annot rows are annotated, the rest pooled."""
    ds = make_dataset(features, labels)
    idx = np.arange(len(ds.labels))
    return ALState(ds, idx[:n_annot], idx[n_annot:])


def logistic_model(w, b, n_classes=2):
    """Binary or one-vs-rest logistic model with hand-picked coefficients."""
    if n_classes == 2:
        machines = [_BinaryLogistic(np.asarray(w, dtype=np.float64), float(b), True)]
        n_features = len(machines[0].w)
    else:
        machines = [
            _BinaryLogistic(np.asarray(wc, dtype=np.float64), float(bc), True)
            for wc, bc in zip(w, b)
        ]
        n_features = len(machines[0].w)
    return ClassifierModel("logistic", n_classes, n_features, machines)


def svm_model_with_values(points, values):
    """Binary RBF model whose decision value at each given point is ~values[i].

    Uses the points themselves as support vectors with a huge gamma so the
    kernel matrix is effectively the identity.
    """
    points = np.asarray(points, dtype=np.float64)
    machine = _BinarySvm(points, np.asarray(values, dtype=np.float64), 0.0,
                         1e4, True)
    return ClassifierModel("svm", 2, points.shape[1], [machine])


class StubModel:
    """Duck-typed classifier returning fixed predictions (for metric tests)."""

    def __init__(self, predictions):
        self.predictions = np.asarray(predictions, dtype=np.int64)

    def predict(self, x):
        return self.predictions[: len(x)]


@pytest.fixture
def rng():
    return np.random.default_rng(0)
