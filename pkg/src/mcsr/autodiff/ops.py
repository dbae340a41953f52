"""Differentiable operations.

Every op computes with numpy in float64 and registers a vjp built from
these same ops, so recording a backward pass (``create_graph=True``)
yields a tape that can be differentiated again. The convolution family
closes under differentiation through three primitives: ``conv2d`` (plus
bias), ``conv_dinput`` and ``conv_dweight``, whose vjps reference each
other.

No general broadcasting: elementwise ops require matching shapes, and the
few broadcast patterns the networks need (biases, per-sample scaling) are
dedicated ops paired with their reduction adjoints.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .graph import ShapeError, Tensor, astensor, record, vjp_rule

__all__ = [
    "add", "add_chan_bias", "add_row_bias", "add_scalar", "concat_channels",
    "conv2d", "conv_dinput", "conv_dweight", "dense", "gram_matrix", "matmul",
    "maxpool2", "mean_all", "mul", "pow_const", "relu", "reshape", "scale",
    "scale_per_sample", "slice_channels", "sqrt", "sum_all", "sum_axis0",
    "sum_chan", "sum_per_sample", "transposed_conv2d",
]

# im2col buffers are chunked along the batch axis beyond this element count
# (24M doubles = 192 MB) to bound peak memory on the 512-channel layers.
_COL_CHUNK_ELEMS = 24_000_000


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: operand shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# elementwise and reductions
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = astensor(a), astensor(b)
    _same_shape(a.data, b.data, "add")
    return record("add", (a, b), a.data + b.data)


@vjp_rule("add")
def _add_vjp(node, ins, out, g):
    return g, g


def mul(a, b):
    a, b = astensor(a), astensor(b)
    _same_shape(a.data, b.data, "mul")
    return record("mul", (a, b), a.data * b.data)


@vjp_rule("mul")
def _mul_vjp(node, ins, out, g):
    a, b = ins
    return mul(g, b), mul(g, a)


def scale(a, c: float):
    a = astensor(a)
    return record("scale", (a,), a.data * c, ctx=c)


@vjp_rule("scale")
def _scale_vjp(node, ins, out, g):
    return (scale(g, node.ctx),)


def add_scalar(a, c: float):
    a = astensor(a)
    return record("add_scalar", (a,), a.data + c)


@vjp_rule("add_scalar")
def _add_scalar_vjp(node, ins, out, g):
    return (g,)


def pow_const(a, p: float):
    a = astensor(a)
    return record("pow_const", (a,), a.data ** p, ctx=p)


@vjp_rule("pow_const")
def _pow_const_vjp(node, ins, out, g):
    (a,) = ins
    p = node.ctx
    return (scale(mul(g, pow_const(a, p - 1.0)), p),)


def sqrt(a):
    return pow_const(a, 0.5)


def sum_all(a):
    a = astensor(a)
    return record("sum_all", (a,), np.asarray(a.data.sum()), ctx=a.data.shape)


@vjp_rule("sum_all")
def _sum_all_vjp(node, ins, out, g):
    return (_bcast_full(g, node.ctx),)


def _bcast_full(u, shape):
    u = astensor(u)
    return record("bcast_full", (u,), np.broadcast_to(u.data, shape).copy())


@vjp_rule("bcast_full")
def _bcast_full_vjp(node, ins, out, g):
    return (sum_all(g),)


def mean_all(a):
    a = astensor(a)
    return scale(sum_all(a), 1.0 / a.data.size)


def sum_per_sample(a):
    """(N, ...) -> (N,): sum over everything but the batch axis."""
    a = astensor(a)
    axes = tuple(range(1, a.ndim))
    return record("sum_per_sample", (a,), a.data.sum(axis=axes), ctx=a.data.shape)


@vjp_rule("sum_per_sample")
def _sum_per_sample_vjp(node, ins, out, g):
    return (_bcast_per_sample(g, node.ctx),)


def _bcast_per_sample(u, shape):
    u = astensor(u)
    rs = (shape[0],) + (1,) * (len(shape) - 1)
    return record(
        "bcast_per_sample", (u,), np.broadcast_to(u.data.reshape(rs), shape).copy()
    )


@vjp_rule("bcast_per_sample")
def _bcast_per_sample_vjp(node, ins, out, g):
    return (sum_per_sample(g),)


def sum_chan(a):
    """(N, C, H, W) -> (C,)"""
    a = astensor(a)
    return record("sum_chan", (a,), a.data.sum(axis=(0, 2, 3)), ctx=a.data.shape)


@vjp_rule("sum_chan")
def _sum_chan_vjp(node, ins, out, g):
    return (_bcast_chan(g, node.ctx),)


def _bcast_chan(u, shape):
    u = astensor(u)
    return record(
        "bcast_chan", (u,),
        np.broadcast_to(u.data[None, :, None, None], shape).copy(),
    )


@vjp_rule("bcast_chan")
def _bcast_chan_vjp(node, ins, out, g):
    return (sum_chan(g),)


def sum_axis0(a):
    """(N, M) -> (M,)"""
    a = astensor(a)
    return record("sum_axis0", (a,), a.data.sum(axis=0), ctx=a.data.shape)


@vjp_rule("sum_axis0")
def _sum_axis0_vjp(node, ins, out, g):
    return (_bcast_axis0(g, node.ctx),)


def _bcast_axis0(u, shape):
    u = astensor(u)
    return record("bcast_axis0", (u,), np.broadcast_to(u.data[None, :], shape).copy())


@vjp_rule("bcast_axis0")
def _bcast_axis0_vjp(node, ins, out, g):
    return (sum_axis0(g),)


def add_chan_bias(x, b):
    x, b = astensor(x), astensor(b)
    if b.ndim != 1 or b.shape[0] != x.shape[1]:
        raise ShapeError(
            f"add_chan_bias: bias {b.shape} does not match channel dim {x.shape[1]}"
        )
    return record("add_chan_bias", (x, b), x.data + b.data[None, :, None, None])


@vjp_rule("add_chan_bias")
def _add_chan_bias_vjp(node, ins, out, g):
    return g, sum_chan(g)


def add_row_bias(x, b):
    x, b = astensor(x), astensor(b)
    if b.ndim != 1 or b.shape[0] != x.shape[1]:
        raise ShapeError(
            f"add_row_bias: bias {b.shape} does not match feature dim {x.shape[1]}"
        )
    return record("add_row_bias", (x, b), x.data + b.data[None, :])


@vjp_rule("add_row_bias")
def _add_row_bias_vjp(node, ins, out, g):
    return g, sum_axis0(g)


def scale_per_sample(x, eps):
    """Multiply sample n by the constant eps[n] (no gradient through eps)."""
    x = astensor(x)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (x.shape[0],):
        raise ShapeError(
            f"scale_per_sample: eps {eps.shape} does not match batch dim {x.shape[0]}"
        )
    rs = (x.shape[0],) + (1,) * (x.ndim - 1)
    return record("scale_per_sample", (x,), x.data * eps.reshape(rs), ctx=eps)


@vjp_rule("scale_per_sample")
def _scale_per_sample_vjp(node, ins, out, g):
    return (scale_per_sample(g, node.ctx),)


def reshape(a, shape):
    a = astensor(a)
    return record("reshape", (a,), a.data.reshape(shape), ctx=a.data.shape)


@vjp_rule("reshape")
def _reshape_vjp(node, ins, out, g):
    return (reshape(g, node.ctx),)


# ---------------------------------------------------------------------------
# activations and pooling
# ---------------------------------------------------------------------------

def relu(x):
    x = astensor(x)
    mask = (x.data > 0.0).astype(np.float64)
    return record("relu", (x,), x.data * mask, ctx=mask)


@vjp_rule("relu")
def _relu_vjp(node, ins, out, g):
    # subgradient at 0 is 0; the mask is constant, so second derivatives vanish
    return (mul(g, Tensor(node.ctx)),)


def _pool_windows(x):
    n, c, h, w = x.shape
    z = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(z).reshape(n, c, h // 2, w // 2, 4)


def maxpool2(x):
    """Non-overlapping 2x2 max; ties route to the first element row-major."""
    x = astensor(x)
    squeeze = x.ndim == 3
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 4:
        raise ShapeError(f"maxpool2: expected (N, C, H, W), got {x.shape}")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2: spatial dims ({h}, {w}) must be even")
    z = _pool_windows(x.data)
    idx = z.argmax(axis=-1)
    val = np.take_along_axis(z, idx[..., None], axis=-1)[..., 0]
    out = record("maxpool2", (x,), val, ctx=(idx, x.shape))
    return reshape(out, out.shape[1:]) if squeeze else out


@vjp_rule("maxpool2")
def _maxpool2_vjp(node, ins, out, g):
    idx, in_shape = node.ctx
    return (_unpool2(g, idx, in_shape),)


def _unpool2(u, idx, in_shape):
    u = astensor(u)
    n, c, h, w = in_shape
    z = np.zeros((n, c, h // 2, w // 2, 4))
    np.put_along_axis(z, idx[..., None], u.data[..., None], axis=-1)
    full = z.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    full = np.ascontiguousarray(full).reshape(n, c, h, w)
    return record("unpool2", (u,), full, ctx=(idx, in_shape))


@vjp_rule("unpool2")
def _unpool2_vjp(node, ins, out, g):
    idx, in_shape = node.ctx
    return (_pool_gather(g, idx, in_shape),)


def _pool_gather(x, idx, in_shape):
    x = astensor(x)
    z = _pool_windows(x.data)
    val = np.take_along_axis(z, idx[..., None], axis=-1)[..., 0]
    return record("pool_gather", (x,), val, ctx=(idx, in_shape))


@vjp_rule("pool_gather")
def _pool_gather_vjp(node, ins, out, g):
    idx, in_shape = node.ctx
    return (_unpool2(g, idx, in_shape),)


# ---------------------------------------------------------------------------
# channel concat / slice
# ---------------------------------------------------------------------------

def _chan_axis(t):
    if t.ndim == 3:
        return 0
    if t.ndim == 4:
        return 1
    raise ShapeError(f"expected a (C, H, W) or (N, C, H, W) tensor, got {t.shape}")


def concat_channels(a, b):
    a, b = astensor(a), astensor(b)
    axis = _chan_axis(a)
    if a.ndim != b.ndim:
        raise ShapeError(f"concat_channels: ranks {a.ndim} and {b.ndim} differ")
    sa, sb = list(a.shape), list(b.shape)
    sa[axis] = sb[axis] = 0
    if sa != sb:
        raise ShapeError(
            f"concat_channels: non-channel dims differ ({a.shape} vs {b.shape})"
        )
    out = np.concatenate([a.data, b.data], axis=axis)
    return record("concat_channels", (a, b), out, ctx=(axis, a.shape[axis]))


@vjp_rule("concat_channels")
def _concat_channels_vjp(node, ins, out, g):
    axis, c1 = node.ctx
    total = out.shape[axis]
    return slice_channels(g, 0, c1), slice_channels(g, c1, total)


def slice_channels(x, lo, hi):
    x = astensor(x)
    axis = _chan_axis(x)
    sl = [slice(None)] * x.ndim
    sl[axis] = slice(lo, hi)
    return record(
        "slice_channels", (x,), x.data[tuple(sl)].copy(),
        ctx=(axis, lo, x.shape[axis]),
    )


@vjp_rule("slice_channels")
def _slice_channels_vjp(node, ins, out, g):
    axis, lo, total = node.ctx
    return (_pad_channels(g, lo, total),)


def _pad_channels(u, before, total):
    u = astensor(u)
    axis = _chan_axis(u)
    pads = [(0, 0)] * u.ndim
    pads[axis] = (before, total - before - u.shape[axis])
    return record(
        "pad_channels", (u,), np.pad(u.data, pads), ctx=(axis, before, u.shape[axis])
    )


@vjp_rule("pad_channels")
def _pad_channels_vjp(node, ins, out, g):
    axis, before, c = node.ctx
    return (slice_channels(g, before, before + c),)


# ---------------------------------------------------------------------------
# matmul / dense / gram
# ---------------------------------------------------------------------------

def matmul(a, b, ta=False, tb=False):
    """2-D matrix product or stacked 3-D batch product, with transpose flags."""
    a, b = astensor(a), astensor(b)
    if a.ndim != b.ndim or a.ndim not in (2, 3):
        raise ShapeError(f"matmul: ranks {a.ndim} and {b.ndim} unsupported")
    va = np.swapaxes(a.data, -1, -2) if ta else a.data
    vb = np.swapaxes(b.data, -1, -2) if tb else b.data
    if va.shape[-1] != vb.shape[-2]:
        raise ShapeError(
            f"matmul: inner dims {va.shape[-1]} and {vb.shape[-2]} differ"
        )
    return record("matmul", (a, b), va @ vb, ctx=(ta, tb))


@vjp_rule("matmul")
def _matmul_vjp(node, ins, out, g):
    a, b = ins
    ta, tb = node.ctx
    if not ta and not tb:
        return matmul(g, b, False, True), matmul(a, g, True, False)
    if not ta and tb:
        return matmul(g, b, False, False), matmul(g, a, True, False)
    if ta and not tb:
        return matmul(b, g, False, True), matmul(a, g, False, False)
    return matmul(b, g, True, True), matmul(g, a, True, True)


def dense(x, w, b):
    """Fully-connected layer: x @ w^T + b for w of shape (M, N)."""
    x, w, b = astensor(x), astensor(w), astensor(b)
    single = x.ndim == 1
    if single:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 2 or w.ndim != 2:
        raise ShapeError(f"dense: expected 2-D input/weights, got {x.shape}/{w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(
            f"dense: input features {x.shape[1]} != weight columns {w.shape[1]}"
        )
    out = add_row_bias(matmul(x, w, tb=True), b)
    return reshape(out, (w.shape[0],)) if single else out


def gram_matrix(features):
    """F F^T for (C, M) feature matrices, or stacked (N, C, M)."""
    f = astensor(features)
    if f.ndim not in (2, 3):
        raise ShapeError(f"gram_matrix: expected (C, M) or (N, C, M), got {f.shape}")
    return matmul(f, f, tb=True)


# ---------------------------------------------------------------------------
# convolution family
# ---------------------------------------------------------------------------

def _im2col(x, padding):
    """(n, C, H, W) -> ((n*Ho*Wo, C*9), Ho, Wo) for 3x3 windows."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    v = sliding_window_view(x, (3, 3), axis=(2, 3))
    n, c, ho, wo = v.shape[:4]
    col = np.ascontiguousarray(v.transpose(0, 2, 3, 1, 4, 5))
    return col.reshape(n * ho * wo, c * 9), ho, wo


def _batch_step(c, ho, wo):
    per_sample = ho * wo * c * 9
    return max(1, _COL_CHUNK_ELEMS // max(per_sample, 1))


def _conv_raw(x, w, padding):
    n, c, h, wd = x.shape
    co = w.shape[0]
    ho, wo = h - 2 + 2 * padding, wd - 2 + 2 * padding
    wmat = w.reshape(co, c * 9).T
    out = np.empty((n, co, ho, wo))
    step = _batch_step(c, ho, wo)
    for i in range(0, n, step):
        col, _, _ = _im2col(x[i : i + step], padding)
        y = col @ wmat
        out[i : i + step] = y.reshape(-1, ho, wo, co).transpose(0, 3, 1, 2)
    return out


def _conv_dweight_raw(x, g, padding):
    n, c, _, _ = x.shape
    co = g.shape[1]
    ho, wo = g.shape[2], g.shape[3]
    dw = np.zeros((co, c * 9))
    step = _batch_step(c, ho, wo)
    for i in range(0, n, step):
        col, _, _ = _im2col(x[i : i + step], padding)
        gm = g[i : i + step].transpose(0, 2, 3, 1).reshape(-1, co)
        dw += gm.T @ col
    return dw.reshape(co, c, 3, 3)


def _check_kernel(w, op):
    if w.ndim != 4 or w.shape[2:] != (3, 3):
        raise ShapeError(f"{op}: kernels must be (Co, Ci, 3, 3), got {w.shape}")


def _check_padding(padding, op):
    if padding not in (0, 1):
        raise ShapeError(f"{op}: padding must be 0 or 1, got {padding}")


def conv2d(x, w, b=None, padding=0):
    """3x3 cross-correlation, stride 1, padding 0 or 1, plus per-channel bias."""
    x, w = astensor(x), astensor(w)
    squeeze = x.ndim == 3
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    _check_kernel(w.data, "conv2d")
    _check_padding(padding, "conv2d")
    if x.ndim != 4:
        raise ShapeError(f"conv2d: input must be (N, C, H, W), got {x.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(
            f"conv2d: input channels {x.shape[1]} != kernel channels {w.shape[1]}"
        )
    if x.shape[2] < 3 - 2 * padding or x.shape[3] < 3 - 2 * padding:
        raise ShapeError(
            f"conv2d: spatial dims {x.shape[2:]} too small for 3x3/padding {padding}"
        )
    out = record("conv_fwd", (x, w), _conv_raw(x.data, w.data, padding), ctx=padding)
    if b is not None:
        out = add_chan_bias(out, astensor(b))
    return reshape(out, out.shape[1:]) if squeeze else out


@vjp_rule("conv_fwd")
def _conv_fwd_vjp(node, ins, out, g):
    x, w = ins
    padding = node.ctx
    return conv_dinput(g, w, padding), conv_dweight(x, g, padding)


def conv_dinput(g, w, padding):
    """Adjoint of conv2d w.r.t. its input; also the transposed-conv forward."""
    g, w = astensor(g), astensor(w)
    _check_kernel(w.data, "conv_dinput")
    _check_padding(padding, "conv_dinput")
    if g.ndim != 4:
        raise ShapeError(f"conv_dinput: input must be 4-D, got {g.shape}")
    if g.shape[1] != w.shape[0]:
        raise ShapeError(
            f"conv_dinput: channels {g.shape[1]} != kernel output dim {w.shape[0]}"
        )
    wflip = np.ascontiguousarray(w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    pad = 2 - padding
    gp = np.pad(g.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    return record("conv_dinput", (g, w), _conv_raw(gp, wflip, 0), ctx=padding)


@vjp_rule("conv_dinput")
def _conv_dinput_vjp(node, ins, out, g):
    gin, w = ins
    padding = node.ctx
    return conv2d(g, w, padding=padding), conv_dweight(g, gin, padding)


def conv_dweight(x, g, padding):
    """Adjoint of conv2d w.r.t. its kernels: correlate input with cotangent."""
    x, g = astensor(x), astensor(g)
    _check_padding(padding, "conv_dweight")
    if x.ndim != 4 or g.ndim != 4:
        raise ShapeError("conv_dweight: both arguments must be 4-D")
    if x.shape[0] != g.shape[0]:
        raise ShapeError(
            f"conv_dweight: batch dims {x.shape[0]} and {g.shape[0]} differ"
        )
    return record(
        "conv_dweight", (x, g), _conv_dweight_raw(x.data, g.data, padding), ctx=padding
    )


@vjp_rule("conv_dweight")
def _conv_dweight_vjp(node, ins, out, g):
    x, gin = ins
    padding = node.ctx
    return conv_dinput(gin, g, padding), conv2d(x, g, padding=padding)


def transposed_conv2d(x, kernels, b=None):
    """Stride-1, padding-0 transposed conv: (N, Ci, H, W) -> (N, Co, H+2, W+2).

    Kernels are laid out (Ci, Co, 3, 3); the forward map is exactly the
    adjoint of the valid 3x3 convolution.
    """
    x, k = astensor(x), astensor(kernels)
    squeeze = x.ndim == 3
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 4:
        raise ShapeError(f"transposed_conv2d: input must be 4-D, got {x.shape}")
    if k.ndim != 4 or k.shape[2:] != (3, 3):
        raise ShapeError(
            f"transposed_conv2d: kernels must be (Ci, Co, 3, 3), got {k.shape}"
        )
    if x.shape[1] != k.shape[0]:
        raise ShapeError(
            f"transposed_conv2d: input channels {x.shape[1]} != kernel dim {k.shape[0]}"
        )
    out = conv_dinput(x, k, 0)
    if b is not None:
        out = add_chan_bias(out, astensor(b))
    return reshape(out, out.shape[1:]) if squeeze else out
