"""Paired multi-contrast synthetic anatomy.

Both contrasts of a pair share one ellipse-based tissue label map; each
label gets its own intensity in each contrast, plus a mild smooth bias
field. At least one interior structure is painted nearly invisible in
the primary contrast but clearly visible in the reference, so reference
guidance has something real to contribute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .images import load_image
from .kspace import normalize01

__all__ = ["ContrastPair", "load_pair", "make_phantom_pair", "phantom_labels"]

BACKGROUND, SKULL, BRAIN = 0, 1, 2
FIRST_ELLIPSE_LABEL = 3


@dataclass
class ContrastPair:
    primary_hr: np.ndarray
    reference_hr: np.ndarray
    anatomy_seed: int | None = None


def _paint_ellipse(labels, yy, xx, cy, cx, a, b, theta, value):
    ct, st = np.cos(theta), np.sin(theta)
    u = (xx - cx) * ct + (yy - cy) * st
    v = -(xx - cx) * st + (yy - cy) * ct
    labels[(u / a) ** 2 + (v / b) ** 2 <= 1.0] = value


def phantom_labels(seed: int, side: int = 256) -> np.ndarray:
    """Tissue label map: skull ring, brain interior, 6-14 inner ellipses."""
    gen = rngmod.stream(seed, "phantom/anatomy")
    yy, xx = np.meshgrid(
        np.linspace(-1.0, 1.0, side), np.linspace(-1.0, 1.0, side), indexing="ij"
    )
    labels = np.zeros((side, side), dtype=np.int64)
    _paint_ellipse(labels, yy, xx, 0.0, 0.0, 0.82, 0.9, 0.0, SKULL)
    _paint_ellipse(labels, yy, xx, 0.0, 0.0, 0.72, 0.8, 0.0, BRAIN)
    n_ellipses = int(gen.integers(6, 15))
    for k in range(n_ellipses):
        cy = gen.uniform(-0.45, 0.45)
        cx = gen.uniform(-0.5, 0.5)
        a = gen.uniform(0.06, 0.3)
        b = gen.uniform(0.06, 0.3)
        theta = gen.uniform(0.0, np.pi)
        _paint_ellipse(labels, yy, xx, cy, cx, a, b, theta, FIRST_ELLIPSE_LABEL + k)
    return labels


def _bias_field(gen, side, amplitude=0.08):
    yy, xx = np.meshgrid(
        np.linspace(0.0, 1.0, side), np.linspace(0.0, 1.0, side), indexing="ij"
    )
    field = np.zeros((side, side))
    for _ in range(3):
        fy, fx = gen.uniform(0.3, 1.6, size=2)
        phase = gen.uniform(0.0, 2 * np.pi)
        field += gen.uniform(0.3, 1.0) * np.cos(2 * np.pi * (fy * yy + fx * xx) + phase)
    peak = np.max(np.abs(field))
    return 1.0 + amplitude * field / (peak if peak > 0 else 1.0)


def make_phantom_pair(seed: int, side: int = 256) -> ContrastPair:
    labels = phantom_labels(seed, side)
    gen = rngmod.stream(seed, "phantom/intensity")
    n_labels = int(labels.max()) + 1

    primary = np.empty(n_labels)
    reference = np.empty(n_labels)
    primary[BACKGROUND] = reference[BACKGROUND] = 0.0
    primary[SKULL] = gen.uniform(0.75, 0.95)
    reference[SKULL] = gen.uniform(0.1, 0.35)
    primary[BRAIN] = gen.uniform(0.35, 0.55)
    reference[BRAIN] = gen.uniform(0.45, 0.7)
    for lab in range(FIRST_ELLIPSE_LABEL, n_labels):
        primary[lab] = gen.uniform(0.1, 0.95)
        reference[lab] = gen.uniform(0.1, 0.95)
        # keep the contrasts genuinely different inside most structures
        if abs(primary[lab] - reference[lab]) < 0.15:
            shift = 0.25 if reference[lab] < 0.6 else -0.25
            reference[lab] = np.clip(reference[lab] + shift, 0.02, 0.98)

    # hide one or two structures in the primary contrast only
    hidden = range(FIRST_ELLIPSE_LABEL, min(FIRST_ELLIPSE_LABEL + 2, n_labels))
    for lab in hidden:
        primary[lab] = primary[BRAIN] + gen.uniform(-0.02, 0.02)
        offset = 0.3 if reference[BRAIN] < 0.5 else -0.3
        reference[lab] = np.clip(reference[BRAIN] + offset, 0.02, 0.98)

    img_p = primary[labels] * _bias_field(gen, side)
    img_r = reference[labels] * _bias_field(gen, side)
    return ContrastPair(normalize01(img_p), normalize01(img_r), anatomy_seed=seed)


def load_pair(path_primary, path_reference) -> ContrastPair:
    """Ingest an externally registered pair; both normalized per image."""
    primary = load_image(path_primary)
    reference = load_image(path_reference)
    if primary.shape != reference.shape:
        raise ValueError(
            f"pair size mismatch: {primary.shape} vs {reference.shape} "
            f"({path_primary} / {path_reference})"
        )
    return ContrastPair(normalize01(primary), normalize01(reference))
