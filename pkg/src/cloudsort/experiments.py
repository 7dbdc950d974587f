"""Synthetic shape/color separability experiment used by the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import classifier, synthetic
from .descriptor import cvfh, hsv_histogram
from .evaluation import accuracy, confusion
from .pcloud import estimate_normals

K_NORMALS = 20
LAMBDA_GRID = (1e-4, 1e-2, 1.0, 3.0, 10.0)
TEST_FRACTION = 0.2
VALIDATION_FRACTION = 0.25


def split_indices(n, test_fraction=TEST_FRACTION, seed=0):
    """Seeded ``(train, test)`` index arrays."""
    perm = np.random.default_rng(seed).permutation(n)
    n_train = n - int(round(test_fraction * n))
    return perm[:n_train], perm[n_train:]


def _fit(X, y, lam, epochs, seed):
    return classifier.train(classifier.TrainingSet.from_lists(X, y), lam, epochs, seed)


def _acc(model, X, y):
    pred = classifier.predict_many(model, X)
    return accuracy(confusion(y, pred, model.class_index))


def select_lambda(X, y, grid=LAMBDA_GRID, epochs=classifier.DEFAULT_EPOCHS, seed=0):
    """Pick lambda by accuracy on a held-out quarter of the training rows.

    Returns ``(lam, {lam: validation accuracy})``; ties keep the smaller lambda.
    """
    X, y = np.asarray(X), list(y)
    fit_idx, val_idx = split_indices(len(y), VALIDATION_FRACTION, seed + 1)
    scores = {}
    for lam in grid:
        m = _fit(X[fit_idx], [y[i] for i in fit_idx], lam, epochs, seed)
        scores[lam] = _acc(m, X[val_idx], [y[i] for i in val_idx])
    best = max(grid, key=lambda lam: (scores[lam], -lam))
    return best, scores


@dataclass
class Run:
    name: str
    lam: float
    validation: dict
    accuracy: float
    model: classifier.ClassifierModel


def describe_dataset(data, k_normals=K_NORMALS):
    """``(cvfh rows, hsv rows)`` for every cloud of a :func:`synthetic.make_dataset` list."""
    shape_rows, color_rows = [], []
    for cloud, _, _ in data:
        shape_rows.append(cvfh(cloud, estimate_normals(cloud, k_normals)).values)
        color_rows.append(hsv_histogram(cloud).values)
    return np.array(shape_rows), np.array(color_rows)


def separability(per_class=60, seed=0, k_normals=K_NORMALS, epochs=classifier.DEFAULT_EPOCHS):
    """Train and test the three descriptor/label pairings on one synthetic set.

    Returns ``{"cvfh_shape", "cvfh_shape_color", "colorcvfh_shape_color"}`` -> :class:`Run`.
    """
    data = synthetic.make_dataset(per_class, seed=seed)
    shape_x, color_x = describe_dataset(data, k_normals)
    both_x = np.hstack([color_x, shape_x])       # HSV block first, then CVFH
    shape_y = [s for _, s, _ in data]
    both_y = [synthetic.class_label(s, c) for _, s, c in data]
    train_idx, test_idx = split_indices(len(data), TEST_FRACTION, seed)

    runs = {}
    for name, X, y in (("cvfh_shape", shape_x, shape_y),
                       ("cvfh_shape_color", shape_x, both_y),
                       ("colorcvfh_shape_color", both_x, both_y)):
        Xtr, ytr = X[train_idx], [y[i] for i in train_idx]
        lam, val = select_lambda(Xtr, ytr, epochs=epochs, seed=seed)
        model = _fit(Xtr, ytr, lam, epochs, seed)
        acc = _acc(model, X[test_idx], [y[i] for i in test_idx])
        runs[name] = Run(name, lam, val, acc, model)
    return runs
