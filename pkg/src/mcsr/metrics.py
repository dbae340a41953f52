"""Full-reference image quality metrics.

SSIM: the classic luminance/contrast/structure ratio evaluated on every
sliding 7x7 window (uniform weights, n-denominator moments, c1/c2 from
the 0.01/0.03 convention at MAX_I = 1), averaged over windows.

PSNR: 10 log10(1 / MSE) for [0, 1] images, with an infinite sentinel for
identical inputs.

IFC: a deterministic simplification of the information-fidelity family:
3-level Laplacian pyramid, per-subband Gaussian-scale-mixture field from
3x3 local variance of the reference, local gain/noise regression of the
distorted band on the reference band, and a summed 0.5*log2(1 + SNR)
information map (sigma_u^2 = 1, sigma_n^2 = 1e-8). Scores are comparable
only within this implementation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

__all__ = [
    "MetricReport",
    "MetricRow",
    "evaluate_corpus",
    "ifc",
    "laplacian_pyramid",
    "psnr",
    "ssim",
]

SSIM_WINDOW = 7
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

IFC_LEVELS = 3
IFC_SIGMA_U2 = 1.0
IFC_SIGMA_N2 = 1e-8
_PYR_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _check_pair(x, y, op):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"{op}: image shapes {x.shape} and {y.shape} differ")
    if x.ndim != 2:
        raise ValueError(f"{op}: expected 2-D images, got {x.shape}")
    return x, y


def ssim(x, y) -> float:
    """Mean of the similarity ratio over all 7x7 sliding windows."""
    x, y = _check_pair(x, y, "ssim")
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"ssim: image {x.shape} smaller than {SSIM_WINDOW}x{SSIM_WINDOW}")
    wx = sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW))
    wy = sliding_window_view(y, (SSIM_WINDOW, SSIM_WINDOW))
    mx = wx.mean(axis=(-1, -2))
    my = wy.mean(axis=(-1, -2))
    vx = (wx**2).mean(axis=(-1, -2)) - mx**2
    vy = (wy**2).mean(axis=(-1, -2)) - my**2
    cov = (wx * wy).mean(axis=(-1, -2)) - mx * my
    num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mx**2 + my**2 + SSIM_C1) * (vx + vy + SSIM_C2)
    return float(np.mean(num / den))


def psnr(x, y) -> float:
    """10 log10(MAX^2 / MSE) with MAX = 1; identical images give math.inf."""
    x, y = _check_pair(x, y, "psnr")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _blur(img):
    out = ndimage.correlate1d(img, _PYR_KERNEL, axis=0, mode="reflect")
    return ndimage.correlate1d(out, _PYR_KERNEL, axis=1, mode="reflect")


def _upsample(img, shape):
    # normalized convolution: blur the zero-stuffed grid and divide by the
    # blurred sampling mask, so constants reproduce exactly up to the border
    up = np.zeros(shape)
    up[:: 2, :: 2] = img[: (shape[0] + 1) // 2, : (shape[1] + 1) // 2]
    mask = np.zeros(shape)
    mask[::2, ::2] = 1.0
    return _blur(up) / _blur(mask)


def laplacian_pyramid(img, levels: int = IFC_LEVELS):
    """Bandpass subbands L0..L(levels-1); the lowpass residual is dropped."""
    img = np.asarray(img, dtype=np.float64)
    bands = []
    current = img
    for _ in range(levels):
        down = _blur(current)[::2, ::2]
        bands.append(current - _upsample(down, current.shape))
        current = down
    return bands


def _local_mean(a):
    return ndimage.uniform_filter(a, size=3, mode="reflect")


def ifc(reference, distorted) -> float:
    """Summed local information gain of the distorted image about the reference."""
    reference, distorted = _check_pair(reference, distorted, "ifc")
    if min(reference.shape) < 32:
        raise ValueError(f"ifc: image sides {reference.shape} must be >= 32")
    if reference.max() == reference.min():
        return 0.0
    total = 0.0
    for ref_band, dist_band in zip(
        laplacian_pyramid(reference), laplacian_pyramid(distorted)
    ):
        m_r = _local_mean(ref_band)
        m_d = _local_mean(dist_band)
        s2 = np.maximum(_local_mean(ref_band**2) - m_r**2, 0.0)  # GSM field
        cov = _local_mean(ref_band * dist_band) - m_r * m_d
        var_d = np.maximum(_local_mean(dist_band**2) - m_d**2, 0.0)
        g = cov / (s2 + 1e-10)
        sigma_v2 = np.maximum(var_d - g * cov, 0.0)
        info = 0.5 * np.log2(
            1.0 + (g**2) * s2 * IFC_SIGMA_U2 / (sigma_v2 + IFC_SIGMA_N2)
        )
        total += float(info.sum())
    return total


# ---------------------------------------------------------------------------
# corpus evaluation
# ---------------------------------------------------------------------------

@dataclass
class MetricRow:
    image_id: str
    variant: str
    factor: int
    ssim: float
    psnr_db: float
    ifc: float


@dataclass
class MetricReport:
    """Per-image metric rows plus mean +/- std (n-1 denominator) aggregates."""

    rows: list = field(default_factory=list)

    def add(self, row: MetricRow):
        self.rows.append(row)

    def aggregate(self, variant=None, factor=None) -> dict:
        picked = [
            r for r in self.rows
            if (variant is None or r.variant == variant)
            and (factor is None or r.factor == factor)
        ]
        if not picked:
            raise ValueError(f"no rows for variant={variant!r} factor={factor!r}")
        out = {}
        for name in ("ssim", "psnr_db", "ifc"):
            values = np.array([getattr(r, name) for r in picked])
            finite = values[np.isfinite(values)]
            mean = float(finite.mean()) if finite.size else math.inf
            std = float(finite.std(ddof=1)) if finite.size > 1 else 0.0
            out[name] = (mean, std)
        return out

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image_id", "variant", "factor", "ssim", "psnr_db", "ifc"])
            for r in self.rows:
                psnr_txt = "inf" if math.isinf(r.psnr_db) else f"{r.psnr_db:.10g}"
                writer.writerow(
                    [r.image_id, r.variant, r.factor, f"{r.ssim:.10g}", psnr_txt,
                     f"{r.ifc:.10g}"]
                )

    @classmethod
    def read_csv(cls, path) -> "MetricReport":
        report = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                report.add(
                    MetricRow(
                        rec["image_id"], rec["variant"], int(rec["factor"]),
                        float(rec["ssim"]), float(rec["psnr_db"]), float(rec["ifc"]),
                    )
                )
        return report


def evaluate_corpus(predict_fn, store, split: str, factors, variant: str,
                    report: MetricReport | None = None) -> MetricReport:
    """Metrics on reassembled full test images for one model variant.

    predict_fn(tensors, factor) receives a pair's patch dict and returns
    SR patches; pass None to score the stored LR input itself.
    """
    from .kspace import reassemble

    pair_ids = store.pair_ids(split)
    if not pair_ids:
        raise ValueError(f"no images in split {split!r}")
    report = report if report is not None else MetricReport()
    for factor in factors:
        for pair_id in pair_ids:
            tensors = store.pair_patches(pair_id, factor)
            if predict_fn is None:
                sr_patches = tensors["lr"]
            else:
                sr_patches = np.clip(predict_fn(tensors, factor), 0.0, 1.0)
            sr = reassemble(np.asarray(sr_patches), store.side, store.side)
            hr = reassemble(tensors["hr"], store.side, store.side)
            report.add(
                MetricRow(pair_id, variant, factor, ssim(hr, sr), psnr(hr, sr),
                          ifc(hr, sr))
            )
    return report
