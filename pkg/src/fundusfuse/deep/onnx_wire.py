"""Self-contained reader for the ONNX protobuf wire format.

Decodes just the message subset needed to run inference: graph topology,
node attributes, initializer tensors and input/output value infos. No
protobuf runtime is required; the decoder walks the raw wire format
(varints, length-delimited fields) directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelLoadError

# TensorProto.DataType values we can materialize.
_DTYPES = {
    1: np.dtype("<f4"),   # FLOAT
    2: np.dtype("u1"),    # UINT8
    3: np.dtype("i1"),    # INT8
    6: np.dtype("<i4"),   # INT32
    7: np.dtype("<i8"),   # INT64
    9: np.dtype("?"),     # BOOL
    11: np.dtype("<f8"),  # DOUBLE
}


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise ModelLoadError("truncated varint")
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise ModelLoadError("varint too long")


def _signed(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def parse_fields(buf: bytes) -> list[tuple[int, int, object]]:
    """Flatten one message into (field_number, wire_type, payload) triples."""
    fields = []
    pos = 0
    while pos < len(buf):
        key, pos = _read_varint(buf, pos)
        number, wire = key >> 3, key & 0x7
        if wire == 0:
            value, pos = _read_varint(buf, pos)
        elif wire == 1:
            value, pos = buf[pos:pos + 8], pos + 8
        elif wire == 2:
            length, pos = _read_varint(buf, pos)
            value, pos = buf[pos:pos + length], pos + length
            if len(value) != length:
                raise ModelLoadError("truncated length-delimited field")
        elif wire == 5:
            value, pos = buf[pos:pos + 4], pos + 4
        else:
            raise ModelLoadError(f"unsupported wire type {wire}")
        fields.append((number, wire, value))
    return fields


def _ints(fields, number) -> list[int]:
    """Repeated int64, accepting both packed and unpacked encodings."""
    out = []
    for num, wire, value in fields:
        if num != number:
            continue
        if wire == 0:
            out.append(_signed(value))
        elif wire == 2:
            pos = 0
            while pos < len(value):
                v, pos = _read_varint(value, pos)
                out.append(_signed(v))
    return out


def _floats(fields, number) -> list[float]:
    out = []
    for num, wire, value in fields:
        if num != number:
            continue
        if wire == 5:
            out.extend(np.frombuffer(value, dtype="<f4").tolist())
        elif wire == 2:
            out.extend(np.frombuffer(value, dtype="<f4").tolist())
    return out


def _first(fields, number, default=None):
    for num, _, value in fields:
        if num == number:
            return value
    return default


def _all(fields, number):
    return [value for num, _, value in fields if num == number]


def _string(fields, number, default="") -> str:
    raw = _first(fields, number)
    return raw.decode("utf-8") if isinstance(raw, bytes) else default


def decode_tensor(buf: bytes) -> tuple[str, np.ndarray]:
    """TensorProto -> (name, ndarray)."""
    fields = parse_fields(buf)
    dims = _ints(fields, 1)
    data_type = _first(fields, 2, 0)
    name = _string(fields, 8)
    if data_type not in _DTYPES:
        raise ModelLoadError(f"tensor {name!r}: unsupported data type {data_type}")
    dtype = _DTYPES[data_type]

    raw = _first(fields, 9)
    if raw is not None:
        arr = np.frombuffer(raw, dtype=dtype)
    elif data_type == 1:
        arr = np.array(_floats(fields, 4), dtype=dtype)
    elif data_type in (6, 2, 3, 9):
        arr = np.array(_ints(fields, 5), dtype=dtype)
    elif data_type == 7:
        arr = np.array(_ints(fields, 7), dtype=dtype)
    elif data_type == 11:
        doubles = []
        for num, wire, value in fields:
            if num == 10 and wire in (1, 2):
                doubles.extend(np.frombuffer(value, dtype="<f8").tolist())
        arr = np.array(doubles, dtype=dtype)
    else:
        raise ModelLoadError(f"tensor {name!r}: no payload")
    expected = int(np.prod(dims)) if dims else arr.size
    if arr.size != expected:
        raise ModelLoadError(f"tensor {name!r}: payload size {arr.size} != shape {dims}")
    return name, arr.reshape(dims)


@dataclass
class Attribute:
    name: str
    f: float | None = None
    i: int | None = None
    s: bytes | None = None
    t: np.ndarray | None = None
    floats: list[float] = field(default_factory=list)
    ints: list[int] = field(default_factory=list)


def decode_attribute(buf: bytes) -> Attribute:
    fields = parse_fields(buf)
    attr = Attribute(name=_string(fields, 1))
    raw_f = _first(fields, 2)
    if isinstance(raw_f, bytes):
        attr.f = float(np.frombuffer(raw_f, dtype="<f4")[0])
    raw_i = _first(fields, 3)
    if raw_i is not None:
        attr.i = _signed(raw_i)
    raw_s = _first(fields, 4)
    if isinstance(raw_s, bytes):
        attr.s = raw_s
    raw_t = _first(fields, 5)
    if isinstance(raw_t, bytes):
        attr.t = decode_tensor(raw_t)[1]
    attr.floats = _floats(fields, 7)
    attr.ints = _ints(fields, 8)
    return attr


@dataclass
class Node:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    name: str
    attrs: dict[str, Attribute]


@dataclass
class ValueInfo:
    name: str
    dims: list[int | None]


def _decode_value_info(buf: bytes) -> ValueInfo:
    fields = parse_fields(buf)
    name = _string(fields, 1)
    dims: list[int | None] = []
    type_buf = _first(fields, 2)
    if isinstance(type_buf, bytes):
        tensor_type = _first(parse_fields(type_buf), 1)
        if isinstance(tensor_type, bytes):
            shape_buf = _first(parse_fields(tensor_type), 2)
            if isinstance(shape_buf, bytes):
                for dim_buf in _all(parse_fields(shape_buf), 1):
                    dim_fields = parse_fields(dim_buf)
                    value = _first(dim_fields, 1)
                    dims.append(_signed(value) if isinstance(value, int) else None)
    return ValueInfo(name=name, dims=dims)


@dataclass
class Graph:
    nodes: list[Node]
    initializers: dict[str, np.ndarray]
    inputs: list[ValueInfo]
    outputs: list[ValueInfo]
    opset: int


def load_graph(path) -> Graph:
    """Read a serialized model file and return its inference graph."""
    try:
        data = open(path, "rb").read()
    except OSError as exc:
        raise ModelLoadError(f"{path}: {exc}") from exc
    try:
        model_fields = parse_fields(data)
        graph_buf = _first(model_fields, 7)
        if not isinstance(graph_buf, bytes):
            raise ModelLoadError("model has no graph")
        opset = 0
        for entry in _all(model_fields, 8):
            entry_fields = parse_fields(entry)
            if _string(entry_fields, 1) == "":  # default ONNX domain
                opset = max(opset, _first(entry_fields, 2, 0))
        graph_fields = parse_fields(graph_buf)
        nodes = []
        for node_buf in _all(graph_fields, 1):
            node_fields = parse_fields(node_buf)
            attrs = {}
            for attr_buf in _all(node_fields, 5):
                attr = decode_attribute(attr_buf)
                attrs[attr.name] = attr
            nodes.append(Node(
                op_type=_string(node_fields, 4),
                inputs=[b.decode("utf-8") for b in _all(node_fields, 1)],
                outputs=[b.decode("utf-8") for b in _all(node_fields, 2)],
                name=_string(node_fields, 3),
                attrs=attrs,
            ))
        initializers = dict(decode_tensor(t) for t in _all(graph_fields, 5))
        inputs = [_decode_value_info(b) for b in _all(graph_fields, 11)]
        outputs = [_decode_value_info(b) for b in _all(graph_fields, 12)]
    except ModelLoadError:
        raise
    except Exception as exc:
        raise ModelLoadError(f"{path}: malformed model file ({exc})") from exc
    return Graph(nodes=nodes, initializers=initializers,
                 inputs=inputs, outputs=outputs, opset=opset)
