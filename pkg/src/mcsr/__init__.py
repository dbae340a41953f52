"""Multi-contrast MRI super-resolution at desk scale.

WGAN-GP encoder-decoder generators with a reference-contrast feature
extractor, a two-level progressive variant, frequency-domain degradation,
and full-reference quality metrics, all on a from-scratch float64
autodiff engine.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
