import numpy as np
import pytest


def numeric_grad(f, x, h=1e-6):
    """Central finite differences of the scalar f() w.r.t. array x (in place)."""
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def numeric_grad_at(f, x, idxs, h=1e-6):
    """Central finite differences at selected flat indices only."""
    flat = x.ravel()
    out = np.zeros(len(idxs))
    for k, i in enumerate(idxs):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        out[k] = (fp - fm) / (2.0 * h)
    return out


def rel_err(a, b):
    """Max elementwise |a-b| / (1 + |b|): relative with an absolute floor."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(b)))) if a.size else 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
