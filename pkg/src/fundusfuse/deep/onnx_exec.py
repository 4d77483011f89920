"""Numpy evaluator for a documented subset of graph operators.

Covers the layers found in common CNN image-embedding exports (convolutions
with groups and dilation, batch norm, pooling, the usual activations and
tensor plumbing). Anything outside SUPPORTED_OPS is rejected at load time.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ModelLoadError
from .onnx_wire import Graph, Node

SUPPORTED_OPS = frozenset({
    "Add", "AveragePool", "BatchNormalization", "Clip", "Concat", "Constant",
    "Conv", "Div", "Flatten", "Gather", "Gemm", "GlobalAveragePool",
    "Identity", "MatMul", "MaxPool", "Mul", "Pad", "ReduceMean", "Relu",
    "Reshape", "Shape", "Sigmoid", "Softmax", "Squeeze", "Sub", "Tanh",
    "Transpose", "Unsqueeze",
})


def check_supported(graph: Graph) -> None:
    unsupported = sorted({n.op_type for n in graph.nodes} - SUPPORTED_OPS)
    if unsupported:
        raise ModelLoadError(f"unsupported operator(s): {', '.join(unsupported)}")


def run_graph(graph: Graph, input_value: np.ndarray) -> np.ndarray:
    """Evaluate the graph on a single input and return its single output."""
    env: dict[str, np.ndarray] = dict(graph.initializers)
    feed_names = [vi.name for vi in graph.inputs if vi.name not in env]
    if len(feed_names) != 1:
        raise ModelLoadError(f"expected exactly one model input, found {feed_names}")
    env[feed_names[0]] = input_value

    for node in graph.nodes:
        args = [env[name] if name else None for name in node.inputs]
        for name in node.inputs:
            if name and name not in env:
                raise ModelLoadError(f"node {node.name!r}: missing input {name!r}")
        results = _dispatch(node, args)
        for name, value in zip(node.outputs, results):
            if name:
                env[name] = value

    out_name = graph.outputs[0].name
    if out_name not in env:
        raise ModelLoadError(f"graph output {out_name!r} was never produced")
    return env[out_name]


def _attr_ints(node: Node, name: str, default=None):
    attr = node.attrs.get(name)
    return list(attr.ints) if attr is not None else default


def _attr_int(node: Node, name: str, default=None):
    attr = node.attrs.get(name)
    return attr.i if attr is not None else default


def _attr_float(node: Node, name: str, default=None):
    attr = node.attrs.get(name)
    return attr.f if attr is not None else default


def _dispatch(node: Node, args) -> list[np.ndarray]:
    op = node.op_type
    if op == "Conv":
        return [_conv(node, *args)]
    if op == "Relu":
        return [np.maximum(args[0], 0)]
    if op == "Clip":
        lo = args[1] if len(args) > 1 and args[1] is not None else _attr_float(node, "min")
        hi = args[2] if len(args) > 2 and args[2] is not None else _attr_float(node, "max")
        lo = -np.inf if lo is None else np.asarray(lo, dtype=args[0].dtype)
        hi = np.inf if hi is None else np.asarray(hi, dtype=args[0].dtype)
        return [np.clip(args[0], lo, hi)]
    if op == "Add":
        return [args[0] + args[1]]
    if op == "Sub":
        return [args[0] - args[1]]
    if op == "Mul":
        return [args[0] * args[1]]
    if op == "Div":
        return [args[0] / args[1]]
    if op == "Gemm":
        return [_gemm(node, *args)]
    if op == "MatMul":
        return [args[0] @ args[1]]
    if op == "GlobalAveragePool":
        return [args[0].mean(axis=tuple(range(2, args[0].ndim)), keepdims=True)]
    if op == "AveragePool":
        return [_pool(node, args[0], mode="avg")]
    if op == "MaxPool":
        return [_pool(node, args[0], mode="max")]
    if op == "BatchNormalization":
        x, scale, bias, mean, var = args[:5]
        eps = _attr_float(node, "epsilon", 1e-5)
        shape = (1, -1) + (1,) * (x.ndim - 2)
        return [(x - mean.reshape(shape)) / np.sqrt(var.reshape(shape) + eps)
                * scale.reshape(shape) + bias.reshape(shape)]
    if op == "Flatten":
        axis = _attr_int(node, "axis", 1)
        lead = int(np.prod(args[0].shape[:axis])) if axis else 1
        return [args[0].reshape(lead, -1)]
    if op == "Reshape":
        return [_reshape(args[0], args[1])]
    if op == "Transpose":
        perm = _attr_ints(node, "perm")
        return [np.transpose(args[0], perm)]
    if op == "Concat":
        axis = _attr_int(node, "axis", 0)
        return [np.concatenate([a for a in args], axis=axis)]
    if op == "Identity":
        return [args[0]]
    if op == "Constant":
        return [_constant(node)]
    if op == "Sigmoid":
        return [1.0 / (1.0 + np.exp(-args[0]))]
    if op == "Tanh":
        return [np.tanh(args[0])]
    if op == "Softmax":
        axis = _attr_int(node, "axis", -1)
        shifted = args[0] - args[0].max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        return [e / e.sum(axis=axis, keepdims=True)]
    if op == "Shape":
        return [np.array(args[0].shape, dtype=np.int64)]
    if op == "Gather":
        axis = _attr_int(node, "axis", 0)
        return [np.take(args[0], args[1].astype(np.int64), axis=axis)]
    if op == "Unsqueeze":
        axes = _attr_ints(node, "axes")
        if axes is None:
            axes = args[1].astype(np.int64).tolist()
        out = args[0]
        for ax in sorted(a if a >= 0 else a + out.ndim + 1 for a in axes):
            out = np.expand_dims(out, ax)
        return [out]
    if op == "Squeeze":
        axes = _attr_ints(node, "axes")
        if axes is None and len(args) > 1 and args[1] is not None:
            axes = args[1].astype(np.int64).tolist()
        return [np.squeeze(args[0], axis=tuple(axes) if axes else None)]
    if op == "Pad":
        return [_pad(node, args)]
    if op == "ReduceMean":
        axes = _attr_ints(node, "axes")
        if axes is None and len(args) > 1 and args[1] is not None:
            axes = args[1].astype(np.int64).tolist()
        keep = _attr_int(node, "keepdims", 1)
        return [args[0].mean(axis=tuple(axes) if axes else None, keepdims=bool(keep))]
    raise ModelLoadError(f"unsupported operator {op!r}")


def _constant(node: Node) -> np.ndarray:
    attr = node.attrs
    if "value" in attr and attr["value"].t is not None:
        return attr["value"].t
    if "value_float" in attr:
        return np.array(attr["value_float"].f, dtype=np.float32)
    if "value_int" in attr:
        return np.array(attr["value_int"].i, dtype=np.int64)
    if "value_floats" in attr:
        return np.array(attr["value_floats"].floats, dtype=np.float32)
    if "value_ints" in attr:
        return np.array(attr["value_ints"].ints, dtype=np.int64)
    raise ModelLoadError("Constant node without a supported value attribute")


def _reshape(data: np.ndarray, shape: np.ndarray) -> np.ndarray:
    target = []
    for axis, dim in enumerate(shape.astype(np.int64).tolist()):
        target.append(data.shape[axis] if dim == 0 else dim)
    return data.reshape(target)


def _gemm(node: Node, a, b, c=None) -> np.ndarray:
    alpha = _attr_float(node, "alpha", 1.0)
    beta = _attr_float(node, "beta", 1.0)
    if _attr_int(node, "transA", 0):
        a = a.T
    if _attr_int(node, "transB", 0):
        b = b.T
    out = alpha * (a @ b)
    if c is not None:
        out = out + beta * c
    return out


def _spatial_pads(node: Node, rank: int, kernel: list[int], strides: list[int],
                  dilations: list[int], in_shape) -> list[tuple[int, int]]:
    auto = node.attrs.get("auto_pad")
    mode = auto.s.decode() if auto is not None and auto.s else "NOTSET"
    if mode in ("NOTSET", "VALID"):
        pads = _attr_ints(node, "pads", [0] * (2 * rank)) if mode == "NOTSET" else [0] * (2 * rank)
        return [(pads[i], pads[i + rank]) for i in range(rank)]
    per_axis = []
    for i in range(rank):
        eff = (kernel[i] - 1) * dilations[i] + 1
        out_dim = -(-in_shape[i] // strides[i])  # ceil division
        total = max(0, (out_dim - 1) * strides[i] + eff - in_shape[i])
        half = total // 2
        if mode == "SAME_UPPER":
            per_axis.append((half, total - half))
        else:
            per_axis.append((total - half, half))
    return per_axis


def _windows(x: np.ndarray, kernel, strides, dilations, pads, pad_value=0.0):
    """Strided (N, C, Ho, Wo, kh, kw) view of padded input."""
    (pt, pb), (pl, pr) = pads
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)),
                mode="constant", constant_values=pad_value)
    kh_eff = (kernel[0] - 1) * dilations[0] + 1
    kw_eff = (kernel[1] - 1) * dilations[1] + 1
    view = sliding_window_view(xp, (kh_eff, kw_eff), axis=(2, 3))
    view = view[:, :, ::strides[0], ::strides[1], ::dilations[0], ::dilations[1]]
    return view


def _conv(node: Node, x, w, b=None) -> np.ndarray:
    if x.ndim != 4:
        raise ModelLoadError(f"Conv expects NCHW input, got rank {x.ndim}")
    group = _attr_int(node, "group", 1)
    kernel = _attr_ints(node, "kernel_shape", list(w.shape[2:]))
    strides = _attr_ints(node, "strides", [1, 1])
    dilations = _attr_ints(node, "dilations", [1, 1])
    pads = _spatial_pads(node, 2, kernel, strides, dilations, x.shape[2:])
    view = _windows(x, kernel, strides, dilations, pads)

    n_out = w.shape[0]
    if group == 1:
        out = np.tensordot(view, w, axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2)
    elif group == x.shape[1] and n_out == x.shape[1]:
        out = np.einsum("nchwij,cij->nchw", view, w[:, 0])
    else:
        cg = x.shape[1] // group
        mg = n_out // group
        parts = []
        for g in range(group):
            sub = np.tensordot(view[:, g * cg:(g + 1) * cg],
                               w[g * mg:(g + 1) * mg],
                               axes=([1, 4, 5], [1, 2, 3]))
            parts.append(sub.transpose(0, 3, 1, 2))
        out = np.concatenate(parts, axis=1)
    if b is not None:
        out = out + b.reshape(1, -1, 1, 1)
    return out.astype(x.dtype, copy=False)


def _pool(node: Node, x, mode: str) -> np.ndarray:
    if _attr_int(node, "ceil_mode", 0):
        raise ModelLoadError("ceil_mode pooling is not supported")
    kernel = _attr_ints(node, "kernel_shape")
    strides = _attr_ints(node, "strides", [1] * len(kernel))
    pads = _spatial_pads(node, 2, kernel, strides, [1, 1], x.shape[2:])
    if mode == "max":
        info = np.finfo(x.dtype) if np.issubdtype(x.dtype, np.floating) else np.iinfo(x.dtype)
        view = _windows(x, kernel, strides, [1, 1], pads, pad_value=info.min)
        return view.max(axis=(4, 5))
    view = _windows(x, kernel, strides, [1, 1], pads, pad_value=0.0)
    if _attr_int(node, "count_include_pad", 0):
        return view.mean(axis=(4, 5))
    ones = np.ones((1, 1) + x.shape[2:], dtype=x.dtype)
    counts = _windows(ones, kernel, strides, [1, 1], pads, pad_value=0.0).sum(axis=(4, 5))
    return view.sum(axis=(4, 5)) / counts


def _pad(node: Node, args) -> np.ndarray:
    x = args[0]
    mode_attr = node.attrs.get("mode")
    mode = mode_attr.s.decode() if mode_attr is not None and mode_attr.s else "constant"
    if mode != "constant":
        raise ModelLoadError(f"Pad mode {mode!r} is not supported")
    pads = _attr_ints(node, "pads")
    if pads is None:
        pads = args[1].astype(np.int64).tolist()
    value = 0.0
    if len(args) > 2 and args[2] is not None:
        value = float(np.asarray(args[2]).ravel()[0])
    elif node.attrs.get("value") is not None:
        value = node.attrs["value"].f or 0.0
    rank = x.ndim
    pairs = [(pads[i], pads[i + rank]) for i in range(rank)]
    return np.pad(x, pairs, mode="constant", constant_values=value)
