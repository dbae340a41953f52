"""Frequency-domain degradation: down-sampling by k-space zero-filling.

An image is transformed to its centered spectrum, everything outside a
central square window is zeroed, and the inverse transform (real part)
is renormalized to [0, 1]. Image size never changes. Transforms are
unitary, so energy can only shrink under the window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ComplexGrid",
    "DegradeSpec",
    "degrade",
    "fft2_centered",
    "ifft2_centered",
    "lowpass",
    "normalize01",
    "patchify",
    "reassemble",
    "window_bounds",
]

VALID_FACTORS = (2, 3, 4)


@dataclass
class ComplexGrid:
    """2-D spectrum split into real/imaginary planes, DC at (H//2, W//2)."""

    height: int
    width: int
    re: np.ndarray
    im: np.ndarray
    dc_centered: bool = True

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    @classmethod
    def from_complex(cls, z: np.ndarray, dc_centered=True) -> "ComplexGrid":
        z = np.asarray(z, dtype=np.complex128)
        return cls(z.shape[0], z.shape[1], z.real.copy(), z.imag.copy(), dc_centered)


@dataclass(frozen=True)
class DegradeSpec:
    """Down-sampling factor plus the retained central k-space square.

    kept_side defaults to round(n / factor) for image side n, the reading
    of the 25% / 11.1% / 6.25% retained fractions on 256x256 inputs.
    noise_std is an extension hook; the reference pipeline adds none.
    """

    factor: int
    kept_side: int | None = None
    noise_std: float = 0.0

    def __post_init__(self):
        if self.factor not in VALID_FACTORS:
            raise ValueError(
                f"down-sampling factor must be one of {VALID_FACTORS}, got {self.factor}"
            )

    def resolve(self, side: int) -> int:
        if self.kept_side is not None:
            return self.kept_side
        return int(round(side / self.factor))


def fft2_centered(image) -> ComplexGrid:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise ValueError(f"expected a non-empty 2-D image, got shape {image.shape}")
    z = np.fft.fftshift(np.fft.fft2(image, norm="ortho"))
    return ComplexGrid.from_complex(z)


def ifft2_centered(grid: ComplexGrid) -> np.ndarray:
    if not grid.dc_centered:
        raise ValueError("ifft2_centered expects a DC-centered grid")
    z = np.fft.ifftshift(grid.to_complex())
    return np.fft.ifft2(z, norm="ortho").real


def window_bounds(side: int, kept: int) -> tuple[int, int]:
    """Start/stop of the retained band along one axis.

    Centered on the DC bin at side//2; when exact centering is impossible
    (even kept on even side) the window shifts one bin toward positive
    frequencies. kept == side degenerates to the full axis.
    """
    if not 1 <= kept <= side:
        raise ValueError(f"kept_side {kept} outside [1, {side}]")
    lo = side // 2 - (kept - 1) // 2
    lo = min(max(lo, 0), side - kept)
    return lo, lo + kept


def lowpass(image, spec: DegradeSpec) -> np.ndarray:
    """Zero-fill outside the central window; inverse transform, real part.

    No renormalization: this is the raw projection, exposed so windowing
    idempotence and energy contraction can be checked directly.
    """
    image = np.asarray(image, dtype=np.float64)
    grid = fft2_centered(image)
    kh = spec.resolve(grid.height)
    kw = spec.resolve(grid.width)
    r0, r1 = window_bounds(grid.height, kh)
    c0, c1 = window_bounds(grid.width, kw)
    z = grid.to_complex()
    kept = np.zeros_like(z)
    kept[r0:r1, c0:c1] = z[r0:r1, c0:c1]
    return ifft2_centered(ComplexGrid.from_complex(kept))


def degrade(image, spec: DegradeSpec, rng: np.random.Generator | None = None):
    """Full degradation: window, back-transform, optional noise, renormalize."""
    out = lowpass(image, spec)
    if spec.noise_std > 0.0:
        if rng is None:
            raise ValueError("noise_std > 0 requires a random generator")
        out = out + rng.normal(0.0, spec.noise_std, size=out.shape)
    return normalize01(out)


def normalize01(image) -> np.ndarray:
    """Affine map onto [0, 1]; a constant image maps to all zeros.

    Dynamic range at float rounding scale (<= 1e-12 relative) counts as
    constant, so transform round-trip dust is not amplified to full range.
    """
    image = np.asarray(image, dtype=np.float64)
    lo = image.min()
    hi = image.max()
    if hi - lo <= 1e-12 * max(1.0, abs(hi), abs(lo)):
        return np.zeros_like(image)
    return (image - lo) / (hi - lo)


def patchify(image, patch_side: int = 64) -> np.ndarray:
    """Split into non-overlapping patches, row-major; exact inverse exists."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    if h % patch_side or w % patch_side:
        raise ValueError(
            f"image sides ({h}, {w}) not divisible by patch side {patch_side}"
        )
    rows, cols = h // patch_side, w // patch_side
    tiles = image.reshape(rows, patch_side, cols, patch_side).transpose(0, 2, 1, 3)
    return np.ascontiguousarray(tiles).reshape(rows * cols, patch_side, patch_side)


def reassemble(patches, height: int, width: int) -> np.ndarray:
    patches = np.asarray(patches, dtype=np.float64)
    k, p, p2 = patches.shape
    if p != p2:
        raise ValueError(f"patches must be square, got {patches.shape}")
    rows, cols = height // p, width // p
    if rows * cols != k or height % p or width % p:
        raise ValueError(
            f"{k} patches of side {p} cannot tile a {height}x{width} image"
        )
    tiles = patches.reshape(rows, cols, p, p).transpose(0, 2, 1, 3)
    return np.ascontiguousarray(tiles).reshape(height, width)
