"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError

from .phantom import ContrastPair

__all__ = ["as_pair_list", "check_image", "check_is_fitted"]


def check_image(x, name="X", side=None):
    """Coerce to a finite 2-D float64 image; optionally require a square side."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite values")
    if side is not None and arr.shape != (side, side):
        raise ValueError(f"{name}: expected {side}x{side}, got {arr.shape}")
    return arr


def as_pair_list(X, side=None, name="X"):
    """Normalize fit/predict inputs to [(primary, reference), ...].

    Accepts ContrastPair objects, (primary, reference) tuples, a bare 2-D
    image (reference None), or a stacked (N, 2, H, W) array.
    """
    if isinstance(X, ContrastPair):
        X = [X]
    elif isinstance(X, np.ndarray) and X.ndim == 2:
        X = [(X, None)]
    elif isinstance(X, np.ndarray) and X.ndim == 4 and X.shape[1] == 2:
        X = [(X[i, 0], X[i, 1]) for i in range(X.shape[0])]
    elif isinstance(X, tuple) and len(X) == 2 and np.asarray(X[0]).ndim == 2:
        X = [X]
    pairs = []
    for i, item in enumerate(X):
        if isinstance(item, ContrastPair):
            primary, reference = item.primary_hr, item.reference_hr
        elif isinstance(item, np.ndarray) and item.ndim == 2:
            primary, reference = item, None
        else:
            try:
                primary, reference = item
            except (TypeError, ValueError) as exc:
                raise ValueError(
                    f"{name}[{i}]: expected a ContrastPair or (primary, reference), "
                    f"got {type(item).__name__}"
                ) from exc
        primary = check_image(primary, f"{name}[{i}].primary", side)
        if reference is not None:
            reference = check_image(reference, f"{name}[{i}].reference", side)
            if reference.shape != primary.shape:
                raise ValueError(
                    f"{name}[{i}]: primary {primary.shape} and reference "
                    f"{reference.shape} shapes differ"
                )
        pairs.append((primary, reference))
    if not pairs:
        raise ValueError(f"{name}: no image pairs provided")
    return pairs


def check_is_fitted(estimator, attribute: str):
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
