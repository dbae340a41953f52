"""Composite training objectives.

Generator total: adversarial + l1*MSE + l2*perceptual + l3*texture, where
the perceptual and texture terms average equally over the four feature
taps and Gram matrices are normalized by channels*positions. The
progressive (two-level) constrained variant adds the level-1-vs-2x
target term inside each non-adversarial component; the unconstrained
variant scores only the final output. The critic objective is the
WGAN-GP form with a unit-gradient-norm penalty at per-sample
interpolates between paired real and generated patches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .nets import FeatureNetParams, featurenet_forward

__all__ = [
    "LossReport",
    "LossWeights",
    "adversarial_loss_g",
    "discriminator_objective",
    "generator_objective",
    "mse_loss",
    "perceptual_loss",
    "texture_loss",
    "wasserstein_monitor",
]


@dataclass(frozen=True)
class LossWeights:
    """Generator term weights (mse, perceptual, texture) and the penalty weight."""

    mse: float = 0.1
    perceptual: float = 1.0
    texture: float = 0.1
    gradient_penalty: float = 10.0

    def __post_init__(self):
        for name in ("mse", "perceptual", "texture", "gradient_penalty"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be >= 0")


@dataclass
class LossReport:
    adv: float
    mse: float
    per: float
    txt: float
    total_g: float
    total_d: float = float("nan")
    w_dis: float = float("nan")

    CSV_FIELDS = ("adv", "mse", "per", "txt", "total_g", "total_d", "w_dis")


def adversarial_loss_g(fake_scores):
    """Negative mean critic score of generated samples."""
    s = ad.astensor(fake_scores)
    if s.size == 0:
        raise ValueError("adversarial loss needs a non-empty score batch")
    return ad.scale(ad.mean_all(s), -1.0)


def mse_loss(pred, target):
    pred = ad.astensor(pred)
    target = ad.astensor(target)
    if pred.shape != target.shape:
        raise ad.ShapeError(
            f"mse_loss: prediction {pred.shape} vs target {target.shape}"
        )
    diff = ad.add(pred, ad.scale(target, -1.0))
    return ad.mean_all(ad.mul(diff, diff))


def _taps(patch, featurenet: FeatureNetParams, params=None):
    return featurenet_forward(patch, featurenet, params=params)


def perceptual_loss(pred, target, featurenet: FeatureNetParams, feat_params=None):
    """Mean over taps of feature-map MSE; all taps contribute equally."""
    taps_p = _taps(pred, featurenet, feat_params)
    taps_t = _taps(ad.astensor(target).detach(), featurenet)
    total = None
    for tp, tt in zip(taps_p, taps_t):
        term = mse_loss(tp, tt)
        total = term if total is None else ad.add(total, term)
    return ad.scale(total, 1.0 / len(taps_p))


def _normalized_gram(tap):
    n, c, h, w = tap.shape
    flat = ad.reshape(tap, (n, c, h * w))
    return ad.scale(ad.gram_matrix(flat), 1.0 / (c * h * w))


def texture_loss(pred, target, featurenet: FeatureNetParams, feat_params=None):
    """Mean over taps of MSE between normalized Gram matrices."""
    taps_p = _taps(pred, featurenet, feat_params)
    taps_t = _taps(ad.astensor(target).detach(), featurenet)
    total = None
    for tp, tt in zip(taps_p, taps_t):
        term = mse_loss(_normalized_gram(tp), _normalized_gram(tt))
        total = term if total is None else ad.add(total, term)
    return ad.scale(total, 1.0 / len(taps_p))


def generator_objective(
    fake_scores,
    pred,
    target_hr,
    featurenet: FeatureNetParams,
    weights: LossWeights,
    pred_level1=None,
    target_level1=None,
    constrained=True,
    feat_params=None,
):
    """Total generator loss plus a LossReport of its components.

    One-level models pass only (pred, target_hr). Two-level models pass
    the level-1 output and its 2x-degraded target; with constrained=True
    each non-adversarial component gains the level-1 term, otherwise the
    level-1 tensors are ignored (final output only).
    """
    two_level = pred_level1 is not None or target_level1 is not None
    if two_level and (pred_level1 is None or target_level1 is None):
        raise ValueError("two-level objective needs both level-1 output and target")

    adv = adversarial_loss_g(fake_scores)
    mse = mse_loss(pred, target_hr)
    per = perceptual_loss(pred, target_hr, featurenet, feat_params)
    txt = texture_loss(pred, target_hr, featurenet, feat_params)
    if two_level and constrained:
        lvl_mse = mse_loss(pred_level1, target_level1)
        lvl_per = perceptual_loss(pred_level1, target_level1, featurenet, feat_params)
        lvl_txt = texture_loss(pred_level1, target_level1, featurenet, feat_params)
        for term in (lvl_mse, lvl_per, lvl_txt):
            if term.item() < 0:
                raise AssertionError("level-1 loss terms are sums of squares")
        mse = ad.add(mse, lvl_mse)
        per = ad.add(per, lvl_per)
        txt = ad.add(txt, lvl_txt)

    total = ad.add(
        adv,
        ad.add(
            ad.scale(mse, weights.mse),
            ad.add(ad.scale(per, weights.perceptual), ad.scale(txt, weights.texture)),
        ),
    )
    report = LossReport(
        adv=adv.item(), mse=mse.item(), per=per.item(), txt=txt.item(),
        total_g=total.item(),
    )
    return total, report


def discriminator_objective(real, fake, eps, critic, weights: LossWeights,
                            graph: ad.Graph):
    """WGAN-GP critic loss: mean(D(fake)) - mean(D(real)) + l4 * penalty.

    ``critic`` maps a patch batch Tensor to per-sample scores using
    parameters attached to ``graph``. eps holds one Uniform[0,1] draw per
    sample; the penalty is evaluated at eps*real + (1-eps)*fake, and its
    input gradient is recorded on the tape so the whole objective stays
    differentiable w.r.t. the critic parameters.
    """
    real_arr = real.data if isinstance(real, ad.Tensor) else np.asarray(real, float)
    fake_arr = fake.data if isinstance(fake, ad.Tensor) else np.asarray(fake, float)
    eps = np.asarray(eps, dtype=np.float64)
    if real_arr.shape != fake_arr.shape:
        raise ad.ShapeError(
            f"discriminator_objective: real {real_arr.shape} vs fake {fake_arr.shape}"
        )
    if eps.shape != (real_arr.shape[0],):
        raise ad.ShapeError(
            f"discriminator_objective: eps {eps.shape} vs batch {real_arr.shape[0]}"
        )

    s_real = critic(graph.leaf(real_arr, requires_grad=False))
    s_fake = critic(graph.leaf(fake_arr, requires_grad=False))

    rs = (len(eps),) + (1,) * (real_arr.ndim - 1)
    interp = eps.reshape(rs) * real_arr + (1.0 - eps.reshape(rs)) * fake_arr
    x_tilde = graph.leaf(interp, requires_grad=True)
    s_interp = critic(x_tilde)
    gx = ad.grad_wrt_input(ad.sum_all(s_interp), x_tilde, create_graph=True)
    # epsilon keeps the norm differentiable when a sample's gradient is all-zero
    norms = ad.sqrt(ad.add_scalar(ad.sum_per_sample(ad.mul(gx, gx)), 1e-12))
    shifted = ad.add_scalar(norms, -1.0)
    penalty = ad.mean_all(ad.mul(shifted, shifted))

    total = ad.add(
        ad.add(ad.mean_all(s_fake), ad.scale(ad.mean_all(s_real), -1.0)),
        ad.scale(penalty, weights.gradient_penalty),
    )
    w_dis = wasserstein_monitor(s_real.data, s_fake.data)
    return total, w_dis


def wasserstein_monitor(real_scores, fake_scores) -> float:
    """|mean(fake) - mean(real)|, the per-step earth-mover proxy."""
    real_scores = np.asarray(
        real_scores.data if isinstance(real_scores, ad.Tensor) else real_scores, float
    )
    fake_scores = np.asarray(
        fake_scores.data if isinstance(fake_scores, ad.Tensor) else fake_scores, float
    )
    if real_scores.size == 0 or fake_scores.size == 0:
        raise ValueError("wasserstein monitor needs non-empty score batches")
    return float(abs(fake_scores.mean() - real_scores.mean()))
