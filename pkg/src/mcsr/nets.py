"""Network architectures.

Generator: 8-layer valid-conv encoder (filters 32..256) mirrored by an
8-layer stride-1 transposed-conv decoder (256..1), three additive skip
connections at the size/channel-matched points, and an optional
reference encoder whose bottleneck is concatenated with the main one
(high-level fusion doubles the first decoder layer's fan-in to 512).

Critic: three [conv-relu x2, maxpool] blocks (64..256) and dense heads
of 128 and 1; no output nonlinearity.

Feature network: 10 padded convs (16..128) with taps after layers
2/4/7/10 (pre-pool); weights are frozen after seeded init and never
receive gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import rng as rngmod
from .autodiff import load_tensors, save_tensors
from .config import format_kv, parse_kv_file

__all__ = [
    "DiscriminatorParams",
    "FeatureNetParams",
    "FUSION_MODES",
    "GeneratorParams",
    "ProgressiveParams",
    "attach",
    "discriminator_forward",
    "encoder_size_ladder",
    "featurenet_forward",
    "generator_forward",
    "init_discriminator",
    "init_featurenet",
    "init_generator",
    "init_params",
    "init_progressive",
    "progressive_forward",
]

ENCODER_CHANNELS = (32, 32, 64, 64, 128, 128, 256, 256)
DECODER_CHANNELS = (256, 128, 128, 64, 64, 32, 32, 1)
SKIP_DECODER_LAYERS = (2, 4, 6)  # decoder layer j fuses encoder layer L-j
DISC_CHANNELS = (64, 64, 128, 128, 256, 256)
DISC_DENSE = (128, 1)
FEATURE_CHANNELS = (16, 16, 32, 32, 64, 64, 64, 128, 128, 128)
FEATURE_POOL_AFTER = (2, 4, 7)
FEATURE_TAPS = (2, 4, 7, 10)

FUSION_MODES = ("sisr", "synthesis", "low_level", "high_level")


def _he_init(gen, shape, fan_in):
    return gen.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _init_conv_stack(seed, kind, prefix, in_ch, channels, transposed=False):
    params = {}
    c_in = in_ch
    for i, c_out in enumerate(channels, start=1):
        name = f"{prefix}{i}"
        gen = rngmod.stream(seed, f"init/{kind}/{name}")
        shape = (c_in, c_out, 3, 3) if transposed else (c_out, c_in, 3, 3)
        params[f"{name}.w"] = _he_init(gen, shape, c_in * 9)
        params[f"{name}.b"] = np.zeros(c_out)
        c_in = c_out
    return params


def encoder_size_ladder(input_side: int, n_layers: int) -> list[int]:
    sides = [input_side - 2 * i for i in range(1, n_layers + 1)]
    if sides[-1] < 1:
        raise ad.ShapeError(
            f"input side {input_side} too small for {n_layers} valid conv layers"
        )
    return sides


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------

@dataclass
class GeneratorParams:
    mode: str
    params: dict
    encoder_channels: tuple = ENCODER_CHANNELS
    decoder_channels: tuple = DECODER_CHANNELS
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in FUSION_MODES:
            raise ValueError(f"unknown fusion mode {self.mode!r}")
        depth = len(self.encoder_channels)
        if len(self.decoder_channels) != depth:
            raise ValueError("encoder/decoder depth mismatch")
        bottleneck = self.encoder_channels[-1]
        expected = bottleneck * 2 if self.mode == "high_level" else bottleneck
        if self.params and self.params["dec1.w"].shape[0] != expected:
            raise ad.ShapeError(
                f"decoder layer-1 fan-in {self.params['dec1.w'].shape[0]} != "
                f"{expected} required by mode {self.mode!r}"
            )

    @property
    def input_channels(self) -> int:
        return 2 if self.mode == "low_level" else 1

    @property
    def depth(self) -> int:
        return len(self.encoder_channels)

    def skip_sites(self) -> list[tuple[int, int]]:
        """(decoder layer, encoder layer) pairs fused by addition."""
        depth = self.depth
        sites = []
        for j in SKIP_DECODER_LAYERS:
            i = depth - j
            if 1 <= i <= depth and j < depth:
                if self.decoder_channels[j - 1] == self.encoder_channels[i - 1]:
                    sites.append((j, i))
        return sites

    def has_reference_encoder(self) -> bool:
        return any(k.startswith("refenc") for k in self.params)


@dataclass
class DiscriminatorParams:
    params: dict
    channels: tuple = DISC_CHANNELS
    dense: tuple = DISC_DENSE
    input_side: int = 64
    seed: int | None = None

    @property
    def flat_size(self) -> int:
        side = self.input_side // 2 ** (len(self.channels) // 2)
        return self.channels[-1] * side * side


@dataclass
class FeatureNetParams:
    params: dict
    channels: tuple = FEATURE_CHANNELS
    taps: tuple = FEATURE_TAPS
    pool_after: tuple = FEATURE_POOL_AFTER
    seed: int | None = None

    @classmethod
    def from_file(cls, path) -> "FeatureNetParams":
        """Import externally exported weights (MCSR1 tensor file)."""
        params = load_tensors(path)
        channels = []
        i = 1
        while f"feat{i}.w" in params:
            channels.append(params[f"feat{i}.w"].shape[0])
            i += 1
        if not channels:
            raise ValueError(f"{path}: no feature-network tensors found")
        return cls(params=params, channels=tuple(channels))


@dataclass
class ProgressiveParams:
    level1: GeneratorParams
    level2: GeneratorParams
    ref_encoder: dict = field(default_factory=dict)
    seed: int | None = None


# ---------------------------------------------------------------------------
# init
# ---------------------------------------------------------------------------

def init_generator(
    seed: int,
    mode: str = "high_level",
    encoder_channels=ENCODER_CHANNELS,
    decoder_channels=DECODER_CHANNELS,
    with_reference_encoder: bool | None = None,
) -> GeneratorParams:
    if mode not in FUSION_MODES:
        raise ValueError(f"unknown fusion mode {mode!r}")
    in_ch = 2 if mode == "low_level" else 1
    params = _init_conv_stack(seed, f"generator.{mode}", "enc", in_ch, encoder_channels)
    if with_reference_encoder is None:
        with_reference_encoder = mode == "high_level"
    if with_reference_encoder and mode != "high_level":
        raise ValueError("reference encoder only applies to high_level mode")
    if with_reference_encoder:
        params.update(
            _init_conv_stack(seed, f"generator.{mode}", "refenc", 1, encoder_channels)
        )
    bottleneck = encoder_channels[-1]
    dec_in = bottleneck * 2 if mode == "high_level" else bottleneck
    dec = {}
    c_in = dec_in
    for j, c_out in enumerate(decoder_channels, start=1):
        name = f"dec{j}"
        gen = rngmod.stream(seed, f"init/generator.{mode}/{name}")
        dec[f"{name}.w"] = _he_init(gen, (c_in, c_out, 3, 3), c_in * 9)
        dec[f"{name}.b"] = np.zeros(c_out)
        c_in = c_out
    params.update(dec)
    return GeneratorParams(mode, params, tuple(encoder_channels), tuple(decoder_channels), seed)


def init_discriminator(
    seed: int, channels=DISC_CHANNELS, dense=DISC_DENSE, input_side: int = 64
) -> DiscriminatorParams:
    if len(channels) % 2:
        raise ValueError("discriminator blocks hold two conv layers each")
    n_blocks = len(channels) // 2
    if input_side % (2**n_blocks):
        raise ad.ShapeError(
            f"discriminator input side {input_side} not divisible by {2**n_blocks}"
        )
    params = _init_conv_stack(seed, "discriminator", "conv", 1, channels)
    side = input_side // 2**n_blocks
    n_in = channels[-1] * side * side
    for k, n_out in enumerate(dense, start=1):
        gen = rngmod.stream(seed, f"init/discriminator/fc{k}")
        params[f"fc{k}.w"] = _he_init(gen, (n_out, n_in), n_in)
        params[f"fc{k}.b"] = np.zeros(n_out)
        n_in = n_out
    return DiscriminatorParams(params, tuple(channels), tuple(dense), input_side, seed)


def init_featurenet(
    seed: int, channels=FEATURE_CHANNELS, taps=FEATURE_TAPS, pool_after=FEATURE_POOL_AFTER
) -> FeatureNetParams:
    params = _init_conv_stack(seed, "featurenet", "feat", 1, channels)
    return FeatureNetParams(params, tuple(channels), tuple(taps), tuple(pool_after), seed)


def init_progressive(
    seed: int, encoder_channels=ENCODER_CHANNELS, decoder_channels=DECODER_CHANNELS
) -> ProgressiveParams:
    level1 = init_generator(
        seed * 2 + 1, "high_level", encoder_channels, decoder_channels,
        with_reference_encoder=False,
    )
    level2 = init_generator(
        seed * 2 + 2, "high_level", encoder_channels, decoder_channels,
        with_reference_encoder=False,
    )
    ref = _init_conv_stack(seed, "progressive.shared", "refenc", 1, encoder_channels)
    return ProgressiveParams(level1, level2, ref, seed)


def init_params(kind: str, seed: int, **kwargs):
    """Dispatch by kind: "generator", "discriminator", "featurenet", "progressive"."""
    table = {
        "generator": init_generator,
        "discriminator": init_discriminator,
        "featurenet": init_featurenet,
        "progressive": init_progressive,
    }
    if kind not in table:
        raise ValueError(f"unknown parameter kind {kind!r}")
    return table[kind](seed, **kwargs)


def attach(graph: ad.Graph, params: dict, requires_grad=True) -> dict:
    """Attach every named array as a leaf on the tape."""
    return {k: graph.leaf(v, requires_grad=requires_grad) for k, v in params.items()}


# ---------------------------------------------------------------------------
# forwards
# ---------------------------------------------------------------------------

def _as_param_tensors(params: dict) -> dict:
    return {
        k: v if isinstance(v, ad.Tensor) else ad.Tensor(v) for k, v in params.items()
    }


def _encoder(x, p, prefix, n_layers):
    taps = {}
    h = x
    for i in range(1, n_layers + 1):
        h = ad.relu(ad.conv2d(h, p[f"{prefix}{i}.w"], p[f"{prefix}{i}.b"], padding=0))
        taps[i] = h
    return h, taps


def generator_forward(lr_patch, ref_patch, gp: GeneratorParams, params=None,
                      ref_bottleneck=None):
    """Encoder -> (optional reference fusion) -> decoder with additive skips.

    ``params`` may carry tape-attached leaves for training; ``ref_bottleneck``
    lets a caller share one reference-encoder pass across levels.
    """
    p = params if params is not None else _as_param_tensors(gp.params)
    x = ad.astensor(lr_patch)
    expect = gp.input_channels
    chan = x.shape[0] if x.ndim == 3 else x.shape[1]
    if chan != expect:
        raise ad.ShapeError(
            f"mode {gp.mode!r} expects {expect} input channels, got {chan}"
        )
    if gp.mode == "high_level":
        if ref_patch is None and ref_bottleneck is None:
            raise ValueError("high_level mode needs a reference patch")
    elif ref_patch is not None:
        raise ValueError(f"mode {gp.mode!r} takes no reference patch")

    depth = gp.depth
    h, taps = _encoder(x, p, "enc", depth)
    if gp.mode == "high_level":
        if ref_bottleneck is None:
            ref_bottleneck, _ = _encoder(ad.astensor(ref_patch), p, "refenc", depth)
        h = ad.concat_channels(h, ref_bottleneck)

    sites = dict(gp.skip_sites())
    for j in range(1, depth + 1):
        h = ad.transposed_conv2d(h, p[f"dec{j}.w"], p[f"dec{j}.b"])
        if j < depth:
            h = ad.relu(h)
        if j in sites:
            h = ad.add(h, taps[sites[j]])
    return h


def discriminator_forward(patch, dp: DiscriminatorParams, params=None):
    """Unbounded critic scores, one per sample."""
    p = params if params is not None else _as_param_tensors(dp.params)
    x = ad.astensor(patch)
    single = x.ndim == 3
    if single:
        x = ad.reshape(x, (1,) + x.shape)
    if x.shape[2] != dp.input_side or x.shape[3] != dp.input_side:
        raise ad.ShapeError(
            f"discriminator expects {dp.input_side}x{dp.input_side} patches, "
            f"got {x.shape[2]}x{x.shape[3]}"
        )
    h = x
    for i in range(1, len(dp.channels) + 1):
        h = ad.relu(ad.conv2d(h, p[f"conv{i}.w"], p[f"conv{i}.b"], padding=1))
        if i % 2 == 0:
            h = ad.maxpool2(h)
    h = ad.reshape(h, (h.shape[0], dp.flat_size))
    for k in range(1, len(dp.dense) + 1):
        h = ad.dense(h, p[f"fc{k}.w"], p[f"fc{k}.b"])
        if k < len(dp.dense):
            h = ad.relu(h)
    scores = ad.reshape(h, (h.shape[0],))
    return ad.reshape(scores, ()) if single else scores


def featurenet_forward(patch, fp: FeatureNetParams, params=None):
    """Taps after the configured conv layers (pre-pool); weights stay frozen."""
    p = params if params is not None else _as_param_tensors(fp.params)
    h = ad.astensor(patch)
    if h.ndim == 3:
        h = ad.reshape(h, (1,) + h.shape)
    taps = []
    for i in range(1, len(fp.channels) + 1):
        h = ad.relu(ad.conv2d(h, p[f"feat{i}.w"], p[f"feat{i}.b"], padding=1))
        if i in fp.taps:
            taps.append(h)
        if i in fp.pool_after:
            h = ad.maxpool2(h)
    return taps


def progressive_forward(lr4_patch, ref_patch, pp: ProgressiveParams, params=None):
    """Level-1 then level-2 SR with one shared reference-encoder pass."""
    if params is not None:
        p1, p2, pref = params
    else:
        p1 = _as_param_tensors(pp.level1.params)
        p2 = _as_param_tensors(pp.level2.params)
        pref = _as_param_tensors(pp.ref_encoder)
    ref_bottleneck, _ = _encoder(ad.astensor(ref_patch), pref, "refenc", pp.level1.depth)
    sr1 = generator_forward(lr4_patch, None, pp.level1, params=p1,
                            ref_bottleneck=ref_bottleneck)
    sr2 = generator_forward(sr1, None, pp.level2, params=p2,
                            ref_bottleneck=ref_bottleneck)
    return sr1, sr2


# ---------------------------------------------------------------------------
# architecture manifest + parameter files
# ---------------------------------------------------------------------------

def save_generator(gp: GeneratorParams, tensor_path, manifest_path=None):
    save_tensors(tensor_path, gp.params)
    if manifest_path is not None:
        kv = {
            "kind": "generator",
            "mode": gp.mode,
            "encoder_channels": ",".join(map(str, gp.encoder_channels)),
            "decoder_channels": ",".join(map(str, gp.decoder_channels)),
            "seed": gp.seed if gp.seed is not None else "",
        }
        Path(manifest_path).write_text(format_kv(kv), encoding="utf-8")


def load_generator(tensor_path, manifest_path) -> GeneratorParams:
    kv = parse_kv_file(manifest_path)
    params = load_tensors(tensor_path)
    enc = tuple(int(c) for c in kv["encoder_channels"].split(","))
    dec = tuple(int(c) for c in kv["decoder_channels"].split(","))
    seed = int(kv["seed"]) if kv.get("seed") else None
    return GeneratorParams(kv["mode"], params, enc, dec, seed)
