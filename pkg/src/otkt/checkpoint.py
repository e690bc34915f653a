"""Single-file binary checkpoint: networks, prototype, source bank, config.

Layout (little-endian): magic "AFKT", u32 version, the three networks
(layer count, then per layer in/out dims, activation code, row-major float64
weights and biases), the prototype (shape, alpha, nu, rows), the source bank
(per class: count, mean, features, importance), and the resolved config
text. The bank and config ride along so evaluation needs nothing but the
checkpoint and a target file.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .config import RunConfig, format_config, parse_config
from .errors import FormatError
from .hot import ClassBlock, SourceClassBank
from .network import ACT_IDENTITY, ACT_RELU, ACT_SOFTMAX, DenseLayer, DenseNetwork
from .pipeline import Model
from .prototype import CorrelationPrototype
from .types import DiscreteDistribution

MAGIC = b"AFKT"
VERSION = 1

_ACT_CODES = {ACT_IDENTITY: 0, ACT_RELU: 1, ACT_SOFTMAX: 2}
_CODE_ACTS = {code: act for act, code in _ACT_CODES.items()}


@dataclass
class Checkpoint:
    model: Model
    proto: CorrelationPrototype
    bank: SourceClassBank
    config: RunConfig


def _write_u32(buf, *values):
    buf.write(np.array(values, dtype="<u4").tobytes())


def _write_f64(buf, arr):
    buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _write_network(buf, network: DenseNetwork):
    _write_u32(buf, len(network.layers))
    for layer in network.layers:
        _write_u32(buf, layer.weight.shape[0], layer.weight.shape[1])
        buf.write(bytes([_ACT_CODES[layer.activation]]))
        _write_f64(buf, layer.weight)
        _write_f64(buf, layer.bias)


def save_checkpoint(path, checkpoint: Checkpoint) -> None:
    buf = io.BytesIO()
    buf.write(MAGIC)
    _write_u32(buf, VERSION)
    for network in (
        checkpoint.model.mapper,
        checkpoint.model.transfer_head,
        checkpoint.model.classifier,
    ):
        _write_network(buf, network)

    proto = checkpoint.proto
    _write_u32(buf, proto.num_target, proto.num_source)
    _write_f64(buf, np.array([proto.alpha, proto.nu]))
    _write_f64(buf, proto.rows)

    bank = checkpoint.bank
    _write_u32(buf, bank.num_classes, bank.dim)
    buf.write(bytes([1 if bank.importance_warning else 0]))
    for block in bank.classes:
        _write_u32(buf, block.count)
        _write_f64(buf, block.mean)
        _write_f64(buf, block.features)
        _write_f64(buf, block.importance.weights)

    text = format_config(checkpoint.config).encode("utf-8")
    _write_u32(buf, len(text))
    buf.write(text)
    with open(path, "wb") as handle:
        handle.write(buf.getvalue())


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.blob):
            raise FormatError("checkpoint truncated", offset=self.offset)
        chunk = self.blob[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def u32(self, count: int = 1):
        values = np.frombuffer(self.take(4 * count), dtype="<u4")
        return int(values[0]) if count == 1 else [int(v) for v in values]

    def f64(self, shape) -> np.ndarray:
        size = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(self.take(8 * size), dtype="<f8").astype(np.float64)
        return values.reshape(shape)

    def byte(self) -> int:
        return self.take(1)[0]


def _read_network(reader: _Reader) -> DenseNetwork:
    layers = []
    for _ in range(reader.u32()):
        in_dim, out_dim = reader.u32(2)
        code = reader.byte()
        if code not in _CODE_ACTS:
            raise FormatError(f"unknown activation code {code}", offset=reader.offset - 1)
        weight = reader.f64((in_dim, out_dim))
        bias = reader.f64((out_dim,))
        layers.append(DenseLayer(weight, bias, _CODE_ACTS[code]))
    return DenseNetwork(layers)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as handle:
        reader = _Reader(handle.read())
    if reader.take(4) != MAGIC:
        raise FormatError("bad checkpoint magic", offset=0)
    version = reader.u32()
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)

    mapper = _read_network(reader)
    transfer_head = _read_network(reader)
    classifier = _read_network(reader)

    num_target, num_source = reader.u32(2)
    alpha, nu = reader.f64((2,))
    rows = reader.f64((num_target, num_source))
    proto = CorrelationPrototype(rows=rows, alpha=float(alpha), nu=float(nu))

    num_classes, dim = reader.u32(2)
    warning = bool(reader.byte())
    blocks = []
    for _ in range(num_classes):
        count = reader.u32()
        mean = reader.f64((dim,))
        features = reader.f64((count, dim))
        importance = DiscreteDistribution(reader.f64((count,)))
        blocks.append(ClassBlock(features, importance, mean))
    bank = SourceClassBank(tuple(blocks), importance_warning=warning)

    text_len = reader.u32()
    config = parse_config(reader.take(text_len).decode("utf-8"))
    if reader.offset != len(reader.blob):
        raise FormatError("trailing bytes after checkpoint payload", offset=reader.offset)
    model = Model(mapper=mapper, transfer_head=transfer_head, classifier=classifier)
    return Checkpoint(model=model, proto=proto, bank=bank, config=config)
