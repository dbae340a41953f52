"""Scikit-learn style estimators wrapping the degradation and SR pipelines.

KSpaceDegrader is a stateless transformer; the resolvers build a patch
dataset from the provided pairs, run the WGAN-GP harness in fit(), and
super-resolve full images in predict(). get_params/set_params come from
BaseEstimator, so the classes compose with sklearn tooling (clone, grid
search over the loss weights, pipelines feeding the degrader).
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .dataset import DatasetManifest, PatchStore, build_dataset
from .images import write_raw
from .kspace import DegradeSpec, degrade, normalize01, patchify, reassemble
from .losses import LossWeights
from .metrics import ssim
from .nets import DECODER_CHANNELS, DISC_CHANNELS, DISC_DENSE, ENCODER_CHANNELS, FEATURE_CHANNELS
from .train import ExperimentConfig, predict_patches, train
from .validation import as_pair_list, check_image, check_is_fitted

__all__ = ["KSpaceDegrader", "MultiContrastSuperResolver", "ProgressiveSuperResolver"]


class KSpaceDegrader(TransformerMixin, BaseEstimator):
    """Frequency-domain down-sampling by central zero-filling.

    Stateless: fit() only validates. transform() accepts one 2-D image or
    a stack (N, H, W) and returns the degraded, renormalized image(s).
    """

    def __init__(self, factor=2, kept_side=None, noise_std=0.0, random_state=None):
        self.factor = factor
        self.kept_side = kept_side
        self.noise_std = noise_std
        self.random_state = random_state

    def _spec(self):
        return DegradeSpec(self.factor, self.kept_side, self.noise_std)

    def fit(self, X=None, y=None):
        self._spec()
        return self

    def transform(self, X):
        spec = self._spec()
        rng = (
            np.random.default_rng(self.random_state)
            if self.noise_std > 0.0
            else None
        )
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            return degrade(check_image(X), spec, rng=rng)
        if X.ndim == 3:
            return np.stack([degrade(check_image(img), spec, rng=rng) for img in X])
        raise ValueError(f"expected (H, W) or (N, H, W), got shape {X.shape}")


class _ResolverBase(BaseEstimator):
    """Shared fit/predict plumbing for the one-level and progressive models."""

    _model_kind = "one_level"

    def _image_side(self, pairs):
        side = pairs[0][0].shape[0]
        if pairs[0][0].shape != (side, side):
            raise ValueError("training images must be square")
        if side % self.patch_side:
            raise ValueError(
                f"image side {side} not divisible by patch side {self.patch_side}"
            )
        return side

    def _write_pairs(self, pairs, root, need_reference):
        files = []
        for i, (primary, reference) in enumerate(pairs):
            if reference is None:
                if need_reference:
                    raise ValueError(
                        f"mode {getattr(self, 'mode', 'high_level')!r} needs "
                        "reference images"
                    )
                reference = primary
            p = root / f"pair{i:04d}_primary.raw"
            r = root / f"pair{i:04d}_reference.raw"
            write_raw(p, normalize01(primary))
            write_raw(r, normalize01(reference))
            files.append((str(p), str(r)))
        return files

    def _needs_reference(self):
        return getattr(self, "mode", "high_level") != "sisr"

    def _config(self, dataset_dir, out_dir, side):
        return ExperimentConfig(
            dataset=str(dataset_dir),
            mode=getattr(self, "mode", "high_level"),
            factor=self.factor,
            model=self._model_kind,
            weights=LossWeights(
                mse=self.weight_mse,
                perceptual=self.weight_perceptual,
                texture=self.weight_texture,
                gradient_penalty=self.weight_gradient_penalty,
            ),
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            critic_steps_per_gen=self.critic_steps_per_gen,
            seed=self.seed,
            out_dir=str(out_dir),
            encoder_channels=tuple(self.encoder_channels),
            decoder_channels=tuple(self.decoder_channels),
            disc_channels=tuple(self.disc_channels),
            disc_dense=tuple(self.disc_dense),
            feature_channels=tuple(self.feature_channels),
            patch_side=self.patch_side,
            eval_images=0,
        )

    def fit(self, X, y=None):
        pairs = as_pair_list(X)
        side = self._image_side(pairs)
        work = Path(self.work_dir) if self.work_dir else Path(
            tempfile.mkdtemp(prefix="mcsr_fit_")
        )
        work.mkdir(parents=True, exist_ok=True)
        img_dir = work / "pairs"
        img_dir.mkdir(exist_ok=True)
        files = self._write_pairs(pairs, img_dir, self._needs_reference())
        factors = sorted({self.factor} | ({2} if self.factor == 4 else set()))
        manifest = DatasetManifest(
            train_files=files, factors=factors, side=side, patch_side=self.patch_side
        )
        data_dir = build_dataset(manifest, work / "patches")
        result = train(self._config(data_dir, work / "run", side))
        self.model_ = result.generator
        self.log_ = result.log
        self.config_ = result.config
        self.side_ = side
        self.work_dir_ = work
        return self

    def _predict_pairs(self, pairs):
        check_is_fitted(self, "model_")
        out = []
        for primary_lr, reference in pairs:
            if primary_lr.shape != (self.side_, self.side_):
                raise ValueError(
                    f"expected {self.side_}x{self.side_} inputs, got {primary_lr.shape}"
                )
            if reference is None:
                if self._needs_reference():
                    raise ValueError("this model needs a reference image to predict")
                reference = primary_lr
            lr_patches = patchify(normalize01(primary_lr), self.patch_side)
            ref_patches = patchify(normalize01(reference), self.patch_side)
            pred = predict_patches(
                self.model_, lr_patches, ref_patches, self.config_.mode
            )
            if isinstance(pred, tuple):
                pred = pred[1]
            out.append(
                np.clip(reassemble(pred, self.side_, self.side_), 0.0, 1.0)
            )
        return out

    def predict(self, X):
        """Super-resolve (primary_lr, reference_hr) pairs to full images."""
        single = isinstance(X, tuple) or (
            isinstance(X, np.ndarray) and X.ndim == 2
        )
        pairs = as_pair_list(X)
        out = self._predict_pairs(pairs)
        return out[0] if single and len(out) == 1 else np.stack(out)

    def score(self, X, y):
        """Mean SSIM of predictions against ground-truth HR images."""
        preds = self._predict_pairs(as_pair_list(X))
        targets = [check_image(t, "y", self.side_) for t in np.asarray(y).reshape(
            -1, *preds[0].shape
        )]
        return float(np.mean([ssim(t, p) for t, p in zip(targets, preds)]))


class MultiContrastSuperResolver(_ResolverBase):
    """One-level encoder-decoder SR model trained with the WGAN-GP objective.

    fit(X) takes registered (primary HR, reference HR) pairs; the primary
    contrast is degraded internally by the configured factor. predict(X)
    takes (primary LR, reference HR) pairs.
    """

    _model_kind = "one_level"

    def __init__(
        self,
        mode="high_level",
        factor=2,
        epochs=15,
        batch_size=8,
        learning_rate=2e-4,
        critic_steps_per_gen=4,
        seed=0,
        weight_mse=0.1,
        weight_perceptual=1.0,
        weight_texture=0.1,
        weight_gradient_penalty=10.0,
        patch_side=64,
        encoder_channels=ENCODER_CHANNELS,
        decoder_channels=DECODER_CHANNELS,
        disc_channels=DISC_CHANNELS,
        disc_dense=DISC_DENSE,
        feature_channels=FEATURE_CHANNELS,
        work_dir=None,
    ):
        self.mode = mode
        self.factor = factor
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.critic_steps_per_gen = critic_steps_per_gen
        self.seed = seed
        self.weight_mse = weight_mse
        self.weight_perceptual = weight_perceptual
        self.weight_texture = weight_texture
        self.weight_gradient_penalty = weight_gradient_penalty
        self.patch_side = patch_side
        self.encoder_channels = encoder_channels
        self.decoder_channels = decoder_channels
        self.disc_channels = disc_channels
        self.disc_dense = disc_dense
        self.feature_channels = feature_channels
        self.work_dir = work_dir


class ProgressiveSuperResolver(_ResolverBase):
    """Two-level progressive SR for factor 4, constrained or unconstrained."""

    def __init__(
        self,
        constrained=True,
        epochs=15,
        batch_size=8,
        learning_rate=2e-4,
        critic_steps_per_gen=4,
        seed=0,
        weight_mse=0.1,
        weight_perceptual=1.0,
        weight_texture=0.1,
        weight_gradient_penalty=10.0,
        patch_side=64,
        encoder_channels=ENCODER_CHANNELS,
        decoder_channels=DECODER_CHANNELS,
        disc_channels=DISC_CHANNELS,
        disc_dense=DISC_DENSE,
        feature_channels=FEATURE_CHANNELS,
        work_dir=None,
    ):
        self.constrained = constrained
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.critic_steps_per_gen = critic_steps_per_gen
        self.seed = seed
        self.weight_mse = weight_mse
        self.weight_perceptual = weight_perceptual
        self.weight_texture = weight_texture
        self.weight_gradient_penalty = weight_gradient_penalty
        self.patch_side = patch_side
        self.encoder_channels = encoder_channels
        self.decoder_channels = decoder_channels
        self.disc_channels = disc_channels
        self.disc_dense = disc_dense
        self.feature_channels = feature_channels
        self.work_dir = work_dir

    @property
    def factor(self):
        return 4

    @property
    def _model_kind(self):
        return "progressive_constrained" if self.constrained else "progressive_unconstrained"

    def _needs_reference(self):
        return True

    def predict_levels(self, X):
        """Both progressive outputs: (2x-equivalent, final) full images."""
        check_is_fitted(self, "model_")
        pairs = as_pair_list(X)
        level1, level2 = [], []
        for primary_lr, reference in pairs:
            lr_patches = patchify(normalize01(primary_lr), self.patch_side)
            ref_patches = patchify(normalize01(reference), self.patch_side)
            sr1, sr2 = predict_patches(self.model_, lr_patches, ref_patches)
            level1.append(np.clip(reassemble(sr1, self.side_, self.side_), 0, 1))
            level2.append(np.clip(reassemble(sr2, self.side_, self.side_), 0, 1))
        return np.stack(level1), np.stack(level2)
