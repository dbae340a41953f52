"""Tape-based reverse-mode autodiff over dense float64 arrays.

A Graph is an append-only list of nodes; topological order equals append
order, so a backward pass is a single reverse sweep. Gradients can be
recorded back onto the same tape (``create_graph=True``), which is what
makes the WGAN-GP input-gradient penalty differentiable with respect to
the critic parameters.
"""

from __future__ import annotations

import threading

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "Node",
    "ShapeError",
    "Tensor",
    "astensor",
    "backward",
    "grad_wrt_input",
    "no_grad",
]


class ShapeError(ValueError):
    """Raised when operand dimensions are incompatible; names the offender."""


class GraphError(RuntimeError):
    """Raised on tape misuse (mixed graphs, unreachable inputs, ...)."""


_STATE = threading.local()


def _recording() -> bool:
    return getattr(_STATE, "recording", True)


class no_grad:
    """Context manager: ops inside compute values but record nothing."""

    def __enter__(self):
        self._prev = _recording()
        _STATE.recording = False
        return self

    def __exit__(self, *exc):
        _STATE.recording = self._prev
        return False


class Node:
    __slots__ = ("op", "inputs", "value", "ctx", "needs_grad")

    def __init__(self, op, inputs, value, ctx, needs_grad):
        self.op = op                # op kind, "" for leaves
        self.inputs = inputs        # tuple of node ids
        self.value = value          # saved forward value (np.ndarray)
        self.ctx = ctx              # op-specific saved data
        self.needs_grad = needs_grad


class Tensor:
    """Dense float64 array, optionally attached to a computation graph."""

    __slots__ = ("data", "graph", "node_id")

    def __init__(self, data, graph=None, node_id=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.graph = graph
        self.node_id = node_id

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        tag = f", node={self.node_id}" if self.graph is not None else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # arithmetic sugar; full op set lives in mcsr.autodiff.ops
    def __add__(self, other):
        from . import ops

        if isinstance(other, (int, float)):
            return ops.add_scalar(self, float(other))
        return ops.add(self, other)

    __radd__ = __add__

    def __neg__(self):
        from . import ops

        return ops.scale(self, -1.0)

    def __sub__(self, other):
        from . import ops

        if isinstance(other, (int, float)):
            return ops.add_scalar(self, -float(other))
        return ops.add(self, ops.scale(other, -1.0))

    def __rsub__(self, other):
        from . import ops

        return ops.add_scalar(ops.scale(self, -1.0), float(other))

    def __mul__(self, other):
        from . import ops

        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    __rmul__ = __mul__


def astensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


class Graph:
    """Append-only tape. Single-threaded per instance."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __len__(self):
        return len(self.nodes)

    def _append(self, op, inputs, value, ctx, needs_grad) -> int:
        self.nodes.append(Node(op, inputs, value, ctx, needs_grad))
        return len(self.nodes) - 1

    def leaf(self, data, requires_grad=True) -> Tensor:
        """Attach an input/parameter tensor to the tape."""
        value = np.asarray(data, dtype=np.float64)
        nid = self._append("", (), value, None, requires_grad)
        return Tensor(value, self, nid)

    def handle(self, node_id: int) -> Tensor:
        return Tensor(self.nodes[node_id].value, self, node_id)


def record(op, inputs, value, ctx=None) -> Tensor:
    """Wrap an op result: attach to the inputs' graph when recording.

    Detached inputs that appear alongside attached ones are auto-attached
    as constant (requires_grad=False) leaves.
    """
    graph = None
    for t in inputs:
        if t.graph is not None:
            if graph is None:
                graph = t.graph
            elif graph is not t.graph:
                raise GraphError(f"op '{op}' mixes tensors from two graphs")
    if graph is None or not _recording():
        return Tensor(value)
    ids = []
    needs = False
    for t in inputs:
        if t.graph is None:
            ids.append(graph._append("", (), t.data, None, False))
        else:
            ids.append(t.node_id)
            needs = needs or graph.nodes[t.node_id].needs_grad
    nid = graph._append(op, tuple(ids), value, ctx, needs)
    return Tensor(value, graph, nid)


# op name -> vjp(node, input_handles, out_handle, grad_tensor) -> tuple of
# per-input gradient Tensors (None where the input does not need one).
VJPS: dict = {}


def vjp_rule(name):
    def deco(fn):
        VJPS[name] = fn
        return fn

    return deco


def backward(out: Tensor, wrt, create_graph=False):
    """Reverse sweep from ``out``; returns gradients for each tensor in ``wrt``.

    With ``create_graph=True`` the gradient computation itself is recorded
    on the tape, so the returned tensors can be differentiated again.
    """
    if out.graph is None:
        raise GraphError("backward on a detached tensor")
    if out.size != 1:
        raise GraphError(f"backward needs a scalar output, got shape {out.shape}")
    graph = out.graph
    nodes = graph.nodes

    grads: dict[int, Tensor] = {}
    limit = out.node_id

    def sweep():
        from . import ops

        for nid in range(limit, -1, -1):
            g = grads.get(nid)
            if g is None:
                continue
            node = nodes[nid]
            rule = VJPS.get(node.op)
            if rule is None:  # leaf
                continue
            handles = tuple(graph.handle(i) for i in node.inputs)
            contribs = rule(node, handles, graph.handle(nid), g)
            for iid, contrib in zip(node.inputs, contribs):
                if contrib is None or not nodes[iid].needs_grad:
                    continue
                prev = grads.get(iid)
                grads[iid] = contrib if prev is None else ops.add(prev, contrib)

    if create_graph:
        # seed must live on the tape so downstream grads stay differentiable
        grads[out.node_id] = graph.leaf(np.ones_like(out.data), requires_grad=False)
        sweep()
    else:
        grads[out.node_id] = Tensor(np.ones_like(out.data))
        with no_grad():
            sweep()

    results = []
    for t in wrt:
        if t.graph is not graph or t.node_id is None:
            raise GraphError("wrt tensor is not attached to this graph")
        g = grads.get(t.node_id)
        results.append(g if g is not None else Tensor(np.zeros_like(t.data)))
    return results


def grad_wrt_input(out: Tensor, inp: Tensor, create_graph=True) -> Tensor:
    """Gradient of a scalar node w.r.t. an input node, recorded on the tape.

    Raises GraphError when ``inp`` is not reachable from ``out``.
    """
    if inp.graph is None or (out.graph is not None and inp.graph is not out.graph):
        raise GraphError("input tensor is not on the output's graph")
    if out.graph is None:
        raise GraphError("output is detached")
    if not inp.graph.nodes[inp.node_id].needs_grad:
        raise GraphError("input node does not require gradient")
    if not _reachable(out, inp):
        raise GraphError("input is unreachable from the output in this graph")
    return backward(out, [inp], create_graph=create_graph)[0]


def _reachable(out: Tensor, inp: Tensor) -> bool:
    nodes = out.graph.nodes
    seen = {out.node_id}
    stack = [out.node_id]
    target = inp.node_id
    while stack:
        nid = stack.pop()
        if nid == target:
            return True
        for i in nodes[nid].inputs:
            if i not in seen and i >= target:
                seen.add(i)
                stack.append(i)
    return False
