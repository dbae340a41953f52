"""WGAN-GP training loops and the comparison suites.

Schedule: each cycle runs ``critic_steps_per_gen`` critic updates (each on
an independently drawn batch, with fakes generated inference-mode) and
then one generator update. An epoch is the number of cycles that consumes
roughly one pass over the training patches counting every sampled batch,
i.e. ceil(n / (batch * (critic_steps + 1))) cycles.

Everything random is drawn from named Philox streams keyed by the master
seed and an absolute step index, so runs are bit-reproducible and
checkpoint resume continues the exact same trajectory.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import rng as rngmod
from .autodiff import AdamState, adam_step, load_tensors, save_tensors
from .config import format_kv, parse_kv_file, split_list
from .dataset import PatchStore
from .kspace import reassemble
from .losses import (
    LossReport,
    LossWeights,
    discriminator_objective,
    generator_objective,
)
from .metrics import psnr, ssim
from .nets import (
    DECODER_CHANNELS,
    DISC_CHANNELS,
    DISC_DENSE,
    ENCODER_CHANNELS,
    FEATURE_CHANNELS,
    DiscriminatorParams,
    FeatureNetParams,
    GeneratorParams,
    ProgressiveParams,
    attach,
    discriminator_forward,
    generator_forward,
    init_discriminator,
    init_featurenet,
    init_generator,
    init_progressive,
    progressive_forward,
)

__all__ = [
    "ExperimentConfig",
    "TrainingDiverged",
    "TrainingLog",
    "TrainResult",
    "ablation_suite",
    "loss_sweep",
    "model_inputs",
    "predict_patches",
    "progressive_suite",
    "train",
]

MODEL_KINDS = ("one_level", "progressive_constrained", "progressive_unconstrained")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str = ""
    mode: str = "high_level"
    factor: int = 2
    model: str = "one_level"
    weights: LossWeights = field(default_factory=LossWeights)
    batch_size: int = 32
    epochs: int = 50
    learning_rate: float = 2e-5
    critic_steps_per_gen: int = 4
    seed: int = 0
    out_dir: str = "run"
    featurenet_seed: int = 902140
    eval_images: int | None = None
    keep_all_checkpoints: bool = False
    detach_adversarial: bool = False  # debug: no generator gradient through D
    encoder_channels: tuple = ENCODER_CHANNELS
    decoder_channels: tuple = DECODER_CHANNELS
    disc_channels: tuple = DISC_CHANNELS
    disc_dense: tuple = DISC_DENSE
    feature_channels: tuple = FEATURE_CHANNELS
    feature_taps: tuple = (2, 4, 7, 10)
    feature_pools: tuple = (2, 4, 7)
    patch_side: int = 64

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model!r}")
        if self.model != "one_level" and self.factor != 4:
            raise ValueError("progressive models train on factor-4 data")

    @classmethod
    def from_file(cls, path, overrides=()) -> "ExperimentConfig":
        kv = parse_kv_file(path)
        for item in overrides:
            key, _, value = item.partition("=")
            if not value and "=" not in item:
                raise ValueError(f"override {item!r} is not key=value")
            kv[key.strip()] = value.strip()
        return cls.from_kv(kv)

    @classmethod
    def from_kv(cls, kv: dict) -> "ExperimentConfig":
        def tup(key, default):
            if key not in kv:
                return default
            return tuple(int(v) for v in split_list(kv[key]))

        weights = LossWeights(
            mse=float(kv.get("weight_mse", 0.1)),
            perceptual=float(kv.get("weight_perceptual", 1.0)),
            texture=float(kv.get("weight_texture", 0.1)),
            gradient_penalty=float(kv.get("weight_gradient_penalty", 10.0)),
        )
        return cls(
            dataset=kv.get("dataset", ""),
            mode=kv.get("mode", "high_level"),
            factor=int(kv.get("factor", 2)),
            model=kv.get("model", "one_level"),
            weights=weights,
            batch_size=int(kv.get("batch_size", 32)),
            epochs=int(kv.get("epochs", 50)),
            learning_rate=float(kv.get("learning_rate", 2e-5)),
            critic_steps_per_gen=int(kv.get("critic_steps_per_gen", 4)),
            seed=int(kv.get("seed", 0)),
            out_dir=kv.get("out_dir", "run"),
            featurenet_seed=int(kv.get("featurenet_seed", 902140)),
            eval_images=int(kv["eval_images"]) if kv.get("eval_images") else None,
            keep_all_checkpoints=kv.get("keep_all_checkpoints", "false").lower()
            in ("1", "true", "yes"),
            encoder_channels=tup("encoder_channels", ENCODER_CHANNELS),
            decoder_channels=tup("decoder_channels", DECODER_CHANNELS),
            disc_channels=tup("disc_channels", DISC_CHANNELS),
            disc_dense=tup("disc_dense", DISC_DENSE),
            feature_channels=tup("feature_channels", FEATURE_CHANNELS),
            feature_taps=tup("feature_taps", (2, 4, 7, 10)),
            feature_pools=tup("feature_pools", (2, 4, 7)),
            patch_side=int(kv.get("patch_side", 64)),
        )

    def to_kv(self) -> dict:
        return {
            "dataset": self.dataset,
            "mode": self.mode,
            "factor": self.factor,
            "model": self.model,
            "weight_mse": self.weights.mse,
            "weight_perceptual": self.weights.perceptual,
            "weight_texture": self.weights.texture,
            "weight_gradient_penalty": self.weights.gradient_penalty,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "critic_steps_per_gen": self.critic_steps_per_gen,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "featurenet_seed": self.featurenet_seed,
            "eval_images": "" if self.eval_images is None else self.eval_images,
            "keep_all_checkpoints": self.keep_all_checkpoints,
            "encoder_channels": ",".join(map(str, self.encoder_channels)),
            "decoder_channels": ",".join(map(str, self.decoder_channels)),
            "disc_channels": ",".join(map(str, self.disc_channels)),
            "disc_dense": ",".join(map(str, self.disc_dense)),
            "feature_channels": ",".join(map(str, self.feature_channels)),
            "feature_taps": ",".join(map(str, self.feature_taps)),
            "feature_pools": ",".join(map(str, self.feature_pools)),
            "patch_side": self.patch_side,
        }

    def to_file(self, path):
        Path(path).write_text(format_kv(self.to_kv()), encoding="utf-8")


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)

    FIELDS = ("epoch", "l_per", "l_mse", "w_dis", "eval_ssim", "eval_psnr")

    def add(self, **kw):
        if self.rows and kw["epoch"] != self.rows[-1]["epoch"] + 1:
            raise ValueError("epoch index must increase by one per row")
        self.rows.append({k: kw[k] for k in self.FIELDS})

    def column(self, name):
        return [r[name] for r in self.rows]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.FIELDS)
            writer.writeheader()
            writer.writerows(self.rows)

    @classmethod
    def read_csv(cls, path) -> "TrainingLog":
        log = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                log.rows.append(
                    {
                        "epoch": int(rec["epoch"]),
                        **{k: float(rec[k]) for k in cls.FIELDS if k != "epoch"},
                    }
                )
        return log


@dataclass
class TrainResult:
    out_dir: Path
    checkpoint: Path
    log: TrainingLog
    config: ExperimentConfig
    generator: GeneratorParams | ProgressiveParams
    discriminator: DiscriminatorParams
    featurenet: FeatureNetParams


def model_inputs(mode: str, lr: np.ndarray, ref: np.ndarray):
    """Network input selection per fusion mode; patches arrive (N, side, side)."""
    if mode == "sisr":
        return lr[:, None], None
    if mode == "synthesis":
        return ref[:, None], None  # reference image is the input itself
    if mode == "low_level":
        return np.stack([lr, ref], axis=1), None
    if mode == "high_level":
        return lr[:, None], ref[:, None]
    raise ValueError(f"unknown fusion mode {mode!r}")


def predict_patches(model, lr_patches, ref_patches, mode="high_level", batch=8):
    """Inference SR for a stack of patches; returns (N, side, side) arrays.

    For ProgressiveParams returns (level1, level2); raw outputs, no clamp.
    """
    outs1, outs2 = [], []
    n = lr_patches.shape[0]
    with ad.no_grad():
        for i in range(0, n, batch):
            lr = lr_patches[i : i + batch]
            ref = ref_patches[i : i + batch]
            if isinstance(model, ProgressiveParams):
                sr1, sr2 = progressive_forward(lr[:, None], ref[:, None], model)
                outs1.append(sr1.data[:, 0])
                outs2.append(sr2.data[:, 0])
            else:
                x, r = model_inputs(mode, lr, ref)
                out = generator_forward(x, r, model)
                outs1.append(out.data[:, 0])
    if isinstance(model, ProgressiveParams):
        return np.concatenate(outs1), np.concatenate(outs2)
    return np.concatenate(outs1)


def _flatten_progressive(pp: ProgressiveParams) -> dict:
    flat = {}
    flat.update({f"l1.{k}": v for k, v in pp.level1.params.items()})
    flat.update({f"l2.{k}": v for k, v in pp.level2.params.items()})
    flat.update({f"ref.{k}": v for k, v in pp.ref_encoder.items()})
    return flat


def _split_prefixed(leaves: dict):
    p1 = {k[3:]: v for k, v in leaves.items() if k.startswith("l1.")}
    p2 = {k[3:]: v for k, v in leaves.items() if k.startswith("l2.")}
    pr = {k[4:]: v for k, v in leaves.items() if k.startswith("ref.")}
    return p1, p2, pr


def _init_models(config: ExperimentConfig):
    if config.model == "one_level":
        gen = init_generator(
            config.seed, config.mode, config.encoder_channels, config.decoder_channels
        )
    else:
        gen = init_progressive(
            config.seed, config.encoder_channels, config.decoder_channels
        )
    disc = init_discriminator(
        config.seed, config.disc_channels, config.disc_dense, config.patch_side
    )
    feat = init_featurenet(
        config.featurenet_seed, config.feature_channels, config.feature_taps,
        config.feature_pools,
    )
    return gen, disc, feat


def _gen_param_dict(gen) -> dict:
    if isinstance(gen, ProgressiveParams):
        return _flatten_progressive(gen)
    return gen.params


def _checkpoint_tensors(gen, disc, adam_g, adam_d, epoch) -> dict:
    out = {}
    for k, v in _gen_param_dict(gen).items():
        out[f"g.{k}"] = v
    for k, v in disc.params.items():
        out[f"d.{k}"] = v
    for tag, state in (("adam_g", adam_g), ("adam_d", adam_d)):
        for k, v in state.m.items():
            out[f"{tag}.m.{k}"] = v
        for k, v in state.v.items():
            out[f"{tag}.v.{k}"] = v
        out[f"{tag}.t"] = np.asarray(float(state.t))
    out["epoch"] = np.asarray(float(epoch))
    return out


def _restore_checkpoint(path, gen, disc, adam_g, adam_d) -> int:
    blob = load_tensors(path)
    gen_params = _gen_param_dict(gen)
    for k in gen_params:
        gen_params[k][...] = blob[f"g.{k}"]
    for k in disc.params:
        disc.params[k][...] = blob[f"d.{k}"]
    for tag, state in (("adam_g", adam_g), ("adam_d", adam_d)):
        for k in state.m:
            state.m[k][...] = blob[f"{tag}.m.{k}"]
            state.v[k][...] = blob[f"{tag}.v.{k}"]
        state.t = int(blob[f"{tag}.t"])
    return int(blob["epoch"])


def _epoch_eval(gen, store, config, max_images):
    pair_ids = store.pair_ids("test")
    if max_images is not None:
        pair_ids = pair_ids[:max_images]
    if not pair_ids:
        return float("nan"), float("nan")
    ssims, psnrs = [], []
    for pid in pair_ids:
        tensors = store.pair_patches(pid, config.factor)
        pred = predict_patches(gen, tensors["lr"], tensors["ref"], config.mode)
        if isinstance(gen, ProgressiveParams):
            pred = pred[1]
        sr = np.clip(reassemble(pred, store.side, store.side), 0.0, 1.0)
        hr = reassemble(tensors["hr"], store.side, store.side)
        ssims.append(ssim(hr, sr))
        value = psnr(hr, sr)
        # the log column is a finite monitoring average; cap the exact-match case
        psnrs.append(value if math.isfinite(value) else 1e9)
    return float(np.mean(ssims)), float(np.mean(psnrs))


def _dump_diverged(out_dir, tag, arrays):
    path = Path(out_dir) / f"diverged_{tag}.mcsr1"
    save_tensors(path, arrays)
    return path


def train(config: ExperimentConfig, resume_from=None) -> TrainResult:
    """Run the full schedule; returns params, log, and checkpoint paths."""
    store = PatchStore(config.dataset)
    data = store.patches("train", config.factor)
    n_patches = data["hr"].shape[0]
    if config.model != "one_level" and "lr2" not in data:
        raise ValueError("progressive training needs factor-4 data with 2x targets")

    gen, disc, feat = _init_models(config)
    gen_params = _gen_param_dict(gen)
    adam_g = AdamState(gen_params, learning_rate=config.learning_rate)
    adam_d = AdamState(disc.params, learning_rate=config.learning_rate)

    start_epoch = 0
    if resume_from is not None:
        start_epoch = _restore_checkpoint(resume_from, gen, disc, adam_g, adam_d)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_run_manifest(out_dir, config)

    cycles_per_epoch = max(
        1, math.ceil(n_patches / (config.batch_size * (config.critic_steps_per_gen + 1)))
    )
    log = TrainingLog()
    if resume_from is not None and (out_dir / "training_log.csv").exists():
        log = TrainingLog.read_csv(out_dir / "training_log.csv")
        log.rows = log.rows[:start_epoch]

    steps_path = out_dir / "loss_steps.csv"
    steps_fh = open(steps_path, "a" if resume_from else "w", newline="",
                    encoding="utf-8")
    steps_writer = csv.writer(steps_fh)
    if resume_from is None:
        steps_writer.writerow(["epoch", "step"] + list(LossReport.CSV_FIELDS))

    k_critic = config.critic_steps_per_gen
    batch = config.batch_size

    def draw_batch(purpose, index):
        g = rngmod.stream(config.seed, purpose, index)
        return g.integers(0, n_patches, size=batch)

    def fakes_for(idx):
        # inference-mode generator pass, chunked to bound activation memory
        outs = []
        with ad.no_grad():
            for i in range(0, len(idx), batch):
                sub = idx[i : i + batch]
                lr = data["lr"][sub]
                ref = data["ref"][sub]
                if isinstance(gen, ProgressiveParams):
                    _, sr2 = progressive_forward(lr[:, None], ref[:, None], gen)
                    outs.append(sr2.data)
                else:
                    x, r = model_inputs(config.mode, lr, ref)
                    outs.append(generator_forward(x, r, gen).data)
        return np.concatenate(outs)

    try:
        for epoch in range(start_epoch + 1, config.epochs + 1):
            per_sum = mse_sum = wdis_sum = 0.0
            for cycle in range(cycles_per_epoch):
                gcycle = (epoch - 1) * cycles_per_epoch + cycle
                # ---- critic updates: independent batches, one batched fake pass
                critic_idx = [
                    draw_batch("batch/critic", gcycle * k_critic + k)
                    for k in range(k_critic)
                ]
                all_fakes = fakes_for(np.concatenate(critic_idx))
                d_total_last = 0.0
                cycle_wdis = 0.0
                for k in range(k_critic):
                    idx = critic_idx[k]
                    fake = all_fakes[k * batch : (k + 1) * batch]
                    real = data["hr"][idx][:, None]
                    eps = rngmod.stream(
                        config.seed, "gp_eps", gcycle * k_critic + k
                    ).uniform(0.0, 1.0, size=batch)
                    graph = ad.Graph()
                    d_leaves = attach(graph, disc.params)
                    total, w_dis = discriminator_objective(
                        real, fake, eps,
                        lambda x: discriminator_forward(x, disc, d_leaves),
                        config.weights, graph,
                    )
                    if not math.isfinite(total.item()):
                        dump = _dump_diverged(
                            out_dir, f"critic_e{epoch}_c{cycle}",
                            {"real": real, "fake": fake, "eps": eps,
                             "idx": idx.astype(float)},
                        )
                        raise TrainingDiverged(
                            f"non-finite critic loss at epoch {epoch}; batch dumped "
                            f"to {dump}"
                        )
                    grads = ad.backward(total, [d_leaves[k2] for k2 in disc.params])
                    adam_step(
                        disc.params,
                        {k2: g.data for k2, g in zip(disc.params, grads)}, adam_d,
                    )
                    d_total_last = total.item()
                    cycle_wdis += w_dis
                wdis_sum += cycle_wdis

                # ---- generator update
                idx = draw_batch("batch/gen", gcycle)
                lr = data["lr"][idx]
                hr = data["hr"][idx][:, None]
                ref = data["ref"][idx]
                graph = ad.Graph()
                g_leaves = attach(graph, gen_params)
                d_frozen = attach(graph, disc.params, requires_grad=False)
                if isinstance(gen, ProgressiveParams):
                    p1, p2, pr = _split_prefixed(g_leaves)
                    sr1, pred = progressive_forward(
                        lr[:, None], ref[:, None], gen, params=(p1, p2, pr)
                    )
                    lvl_kwargs = {
                        "pred_level1": sr1,
                        "target_level1": data["lr2"][idx][:, None],
                        "constrained": config.model == "progressive_constrained",
                    }
                else:
                    x, r = model_inputs(config.mode, lr, ref)
                    pred = generator_forward(x, r, gen, params=g_leaves)
                    lvl_kwargs = {}
                critic_input = pred.detach() if config.detach_adversarial else pred
                scores = discriminator_forward(critic_input, disc, d_frozen)
                total, report = generator_objective(
                    scores, pred, hr, feat, config.weights, **lvl_kwargs
                )
                if not math.isfinite(total.item()):
                    dump = _dump_diverged(
                        out_dir, f"gen_e{epoch}_c{cycle}",
                        {"lr": lr, "hr": hr, "ref": ref, "idx": idx.astype(float)},
                    )
                    raise TrainingDiverged(
                        f"non-finite generator loss at epoch {epoch}; batch dumped "
                        f"to {dump}"
                    )
                grads = ad.backward(total, [g_leaves[k2] for k2 in gen_params])
                adam_step(
                    gen_params, {k2: g.data for k2, g in zip(gen_params, grads)}, adam_g
                )
                report.total_d = d_total_last
                report.w_dis = cycle_wdis / k_critic
                steps_writer.writerow(
                    [epoch, gcycle]
                    + [getattr(report, f) for f in LossReport.CSV_FIELDS]
                )
                per_sum += report.per
                mse_sum += report.mse

            eval_ssim, eval_psnr = _epoch_eval(gen, store, config, config.eval_images)
            log.add(
                epoch=epoch,
                l_per=per_sum / cycles_per_epoch,
                l_mse=mse_sum / cycles_per_epoch,
                w_dis=wdis_sum / (cycles_per_epoch * k_critic),
                eval_ssim=eval_ssim,
                eval_psnr=eval_psnr,
            )
            log.write_csv(out_dir / "training_log.csv")
            blob = _checkpoint_tensors(gen, disc, adam_g, adam_d, epoch)
            save_tensors(out_dir / "checkpoint.mcsr1", blob)
            if epoch == 1:
                save_tensors(out_dir / "checkpoint_first.mcsr1", blob)
            if config.keep_all_checkpoints:
                save_tensors(out_dir / f"checkpoint_e{epoch:03d}.mcsr1", blob)
    finally:
        steps_fh.close()

    return TrainResult(
        out_dir=out_dir,
        checkpoint=out_dir / "checkpoint.mcsr1",
        log=log,
        config=config,
        generator=gen,
        discriminator=disc,
        featurenet=feat,
    )


def _write_run_manifest(out_dir, config: ExperimentConfig):
    from . import __version__

    kv = {"version": f"mcsr-{__version__}"}
    kv.update(config.to_kv())
    (Path(out_dir) / "run_manifest.txt").write_text(format_kv(kv), encoding="utf-8")


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def _scored_rows(result: TrainResult, store, variant):
    """Per test image SSIM/PSNR of the trained model, plus the stitched SR."""
    rows = []
    for pid in store.pair_ids("test"):
        tensors = store.pair_patches(pid, result.config.factor)
        pred = predict_patches(
            result.generator, tensors["lr"], tensors["ref"], result.config.mode
        )
        if isinstance(result.generator, ProgressiveParams):
            pred = pred[1]
        sr = np.clip(reassemble(pred, store.side, store.side), 0.0, 1.0)
        hr = reassemble(tensors["hr"], store.side, store.side)
        rows.append({"image_id": pid, "variant": variant, "ssim": ssim(hr, sr),
                     "psnr_db": psnr(hr, sr)})
    return rows


def _write_comparison(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["image_id", "variant", "ssim", "psnr_db"])
        writer.writeheader()
        writer.writerows(rows)


def ablation_suite(base_config: ExperimentConfig) -> dict:
    """Train the four fusion variants under identical budgets and seeds."""
    store = PatchStore(base_config.dataset)
    results = {}
    rows = []
    for mode in ("sisr", "synthesis", "low_level", "high_level"):
        config = replace(
            base_config, mode=mode, model="one_level",
            out_dir=str(Path(base_config.out_dir) / mode),
        )
        result = train(config)
        results[mode] = result
        rows.extend(_scored_rows(result, store, mode))
    _write_comparison(Path(base_config.out_dir) / "ablation.csv", rows)
    return results


def progressive_suite(base_config: ExperimentConfig) -> dict:
    """Constrained vs unconstrained two-level training with shared seeds."""
    store = PatchStore(base_config.dataset)
    results = {}
    rows = []
    for model in ("progressive_constrained", "progressive_unconstrained"):
        config = replace(
            base_config, model=model, factor=4,
            out_dir=str(Path(base_config.out_dir) / model),
        )
        result = train(config)
        results[model] = result
        rows.extend(_scored_rows(result, store, model))
        _emit_level_images(result, store)
    _write_comparison(Path(base_config.out_dir) / "progressive.csv", rows)
    return results


def _emit_level_images(result: TrainResult, store):
    from .images import write_pgm16

    out = result.out_dir / "images"
    out.mkdir(exist_ok=True)
    for pid in store.pair_ids("test"):
        tensors = store.pair_patches(pid, 4)
        sr1, sr2 = predict_patches(result.generator, tensors["lr"], tensors["ref"])
        for tag, patches in (("level1", sr1), ("level2", sr2)):
            img = np.clip(reassemble(patches, store.side, store.side), 0.0, 1.0)
            write_pgm16(out / f"{pid}_{tag}.pgm", img)


def loss_sweep(base_config: ExperimentConfig) -> list[dict]:
    """The three loss combinations: adv+per, adv+per+mse, all four terms."""
    store = PatchStore(base_config.dataset)
    def w(mse, per, txt):
        return LossWeights(mse=mse, perceptual=per, texture=txt,
                           gradient_penalty=base_config.weights.gradient_penalty)

    combos = [
        ("adv+per", w(0.0, base_config.weights.perceptual, 0.0)),
        ("adv+per+mse", w(base_config.weights.mse, base_config.weights.perceptual, 0.0)),
        ("adv+per+mse+txt", w(base_config.weights.mse, base_config.weights.perceptual,
                              base_config.weights.texture)),
    ]
    rows = []
    for name, weights in combos:
        config = replace(
            base_config, weights=weights,
            out_dir=str(Path(base_config.out_dir) / name.replace("+", "_")),
        )
        result = train(config)
        scored = _scored_rows(result, store, name)
        rows.append(
            {
                "combo": name,
                "ssim": float(np.mean([r["ssim"] for r in scored])),
                "psnr_db": float(
                    np.mean([r["psnr_db"] for r in scored if math.isfinite(r["psnr_db"])])
                ),
            }
        )
    path = Path(base_config.out_dir) / "loss_sweep.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["combo", "ssim", "psnr_db"])
        writer.writeheader()
        writer.writerows(rows)
    return rows
