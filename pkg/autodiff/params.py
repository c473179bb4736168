"""Named model weights, their meta-optimizer state and the ``L2SM`` file format."""
from __future__ import annotations

import logging
import pathlib
import struct
from dataclasses import dataclass, field
from typing import Iterator, Literal, Mapping, Optional, Sequence

import numpy as np

from autodiff.tensor import Tensor2
from core.errors import ConfigurationError, SceneParseError, ShapeError
from optim.adam import adam_update

logger = logging.getLogger("L2S")

MODEL_MAGIC = b"L2SM"
MODEL_VERSION = 1

ParamKind = Literal["weight", "bias", "gain", "normal", "small"]

SMALL_INIT = 0.01


@dataclass(frozen=True, slots=True)
class ParamSpec:
    name: str
    rows: int
    cols: int
    kind: ParamKind = "weight"


class ModelParameters:
    """Ordered name -> leaf tensor map."""

    def __init__(self, tensors: Mapping[str, Tensor2]) -> None:
        self._tensors: dict[str, Tensor2] = dict(tensors)
        for tensor in self._tensors.values():
            tensor.requires_grad = True

    @classmethod
    def initialize(cls, layout: Sequence[ParamSpec], seed: int, dtype=np.float32) -> "ModelParameters":
        """Kaiming-normal weights (shrunk for ``small`` output heads), zero biases, unit gains."""
        rng = np.random.default_rng(seed)
        tensors = {}
        for spec in layout:
            if spec.kind == "weight":
                data = rng.normal(0.0, np.sqrt(2.0 / spec.rows), size=(spec.rows, spec.cols))
            elif spec.kind == "small":
                data = rng.normal(0.0, SMALL_INIT * np.sqrt(2.0 / spec.rows), size=(spec.rows, spec.cols))
            elif spec.kind == "normal":
                data = rng.normal(0.0, 1.0 / np.sqrt(spec.rows), size=(spec.rows, spec.cols))
            elif spec.kind == "gain":
                data = np.ones((spec.rows, spec.cols))
            else:
                data = np.zeros((spec.rows, spec.cols))
            tensors[spec.name] = Tensor2(data, requires_grad=True, name=spec.name, dtype=dtype)
        return cls(tensors)

    def __getitem__(self, name: str) -> Tensor2:
        try:
            return self._tensors[name]
        except KeyError as exc:
            raise ConfigurationError(f"Model has no parameter {name!r}.") from exc

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    @property
    def names(self) -> list[str]:
        return list(self._tensors)

    @property
    def size(self) -> int:
        return sum(t.data.size for t in self._tensors.values())

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.zero_grad()

    def grads(self) -> dict[str, np.ndarray]:
        return {
            name: tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
            for name, tensor in self._tensors.items()
        }

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.data.reshape(-1) for t in self._tensors.values()])

    def unflatten(self, vector: np.ndarray) -> "ModelParameters":
        vector = np.asarray(vector)
        if vector.size != self.size:
            raise ShapeError("ModelParameters.unflatten", vector.shape, (self.size,))
        tensors, offset = {}, 0
        for name, tensor in self._tensors.items():
            count = tensor.data.size
            data = vector[offset : offset + count].reshape(tensor.shape)
            tensors[name] = Tensor2(data, requires_grad=True, name=name, dtype=tensor.data.dtype)
            offset += count
        return ModelParameters(tensors)

    def astype(self, dtype) -> "ModelParameters":
        return ModelParameters(
            {name: Tensor2(t.data, requires_grad=True, name=name, dtype=dtype) for name, t in self._tensors.items()}
        )

    def check_layout(self, layout: Sequence[ParamSpec]) -> None:
        expected = {spec.name: (spec.rows, spec.cols) for spec in layout}
        missing = sorted(set(expected) - set(self._tensors))
        extra = sorted(set(self._tensors) - set(expected))
        if missing or extra:
            raise ConfigurationError(f"Parameter names differ from the model layout (missing={missing}, extra={extra}).")
        for name, shape in expected.items():
            if self._tensors[name].shape != shape:
                raise ShapeError(name, self._tensors[name].shape, shape)


@dataclass
class AdamParamState:
    """Meta-optimizer moments keyed by parameter name."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step_params(
    params: ModelParameters,
    grads: Optional[Mapping[str, np.ndarray]],
    state: AdamParamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """One Adam update of every leaf in place; ``grads`` defaults to the leaves' buffers."""
    grads = grads if grads is not None else params.grads()
    state.step += 1
    for name, tensor in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        m = state.m.get(name, np.zeros_like(g))
        v = state.v.get(name, np.zeros_like(g))
        m, v, direction = adam_update(m, v, g, state.step, betas, eps)
        state.m[name], state.v[name] = m, v
        tensor.data = (tensor.data - lr * direction).astype(tensor.data.dtype)


@dataclass
class ModelFile:
    """Everything persisted for a model: weights plus resume counters."""

    params: ModelParameters
    counters: dict[str, int] = field(default_factory=dict)
    adam: Optional[AdamParamState] = None
    config: dict[str, object] = field(default_factory=dict)


_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def _pack_tensor(name: str, data: np.ndarray) -> bytes:
    encoded = name.encode("utf-8")
    return (
        _U32.pack(len(encoded))
        + encoded
        + _U32.pack(data.shape[0])
        + _U32.pack(data.shape[1])
        + np.ascontiguousarray(data, dtype="<f4").tobytes()
    )


def save_model(model: ModelFile, path: pathlib.Path | str) -> pathlib.Path:
    """Write ``L2SM``: tensors, then ``adam.m/``/``adam.v/`` moments, then u64 counters."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = [(name, tensor.data) for name, tensor in model.params.items()]
    counters = dict(model.counters)
    if model.adam is not None:
        entries += [(f"adam.m/{name}", m) for name, m in model.adam.m.items()]
        entries += [(f"adam.v/{name}", v) for name, v in model.adam.v.items()]
        counters["adam_step"] = model.adam.step
    config_items = [(f"config/{key}", int(value)) for key, value in model.config.items() if isinstance(value, (bool, int))]
    chunks = [MODEL_MAGIC, _U32.pack(MODEL_VERSION), _U32.pack(len(entries))]
    chunks += [_pack_tensor(name, data) for name, data in entries]
    counter_items = list(counters.items()) + config_items
    chunks.append(_U32.pack(len(counter_items)))
    for name, value in counter_items:
        encoded = name.encode("utf-8")
        chunks += [_U32.pack(len(encoded)), encoded, _U64.pack(int(value))]
    path.write_bytes(b"".join(chunks))
    logger.info("Saved model (%d tensors) to %s", len(model.params), path)
    return path


class _Reader:
    def __init__(self, payload: bytes, path: pathlib.Path) -> None:
        self.payload, self.path, self.offset = payload, path, 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            raise SceneParseError("Truncated model file", path=str(self.path), offset=len(self.payload))
        chunk = self.payload[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def name(self) -> str:
        start = self.offset
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SceneParseError("Tensor name is not UTF-8", path=str(self.path), offset=start) from exc


def load_model(path: pathlib.Path | str) -> ModelFile:
    path = pathlib.Path(path)
    try:
        reader = _Reader(path.read_bytes(), path)
    except OSError as exc:
        raise SceneParseError(f"Cannot read model file: {exc}", path=str(path)) from exc
    if reader.take(4) != MODEL_MAGIC:
        raise SceneParseError("Bad model magic", path=str(path), offset=0)
    version = reader.u32()
    if version != MODEL_VERSION:
        raise SceneParseError(f"Unsupported model version {version}", path=str(path), offset=4)
    tensors: dict[str, Tensor2] = {}
    adam = AdamParamState()
    for _ in range(reader.u32()):
        name = reader.name()
        rows, cols = reader.u32(), reader.u32()
        start = reader.offset
        data = np.frombuffer(reader.take(rows * cols * 4), dtype="<f4").reshape(rows, cols).astype(np.float32)
        if not np.isfinite(data).all():
            raise SceneParseError(f"Non-finite values in {name}", path=str(path), offset=start)
        if name.startswith("adam.m/"):
            adam.m[name[len("adam.m/"):]] = data.astype(np.float64)
        elif name.startswith("adam.v/"):
            adam.v[name[len("adam.v/"):]] = data.astype(np.float64)
        else:
            tensors[name] = Tensor2(data, requires_grad=True, name=name, dtype=np.float32)
    counters: dict[str, int] = {}
    config: dict[str, object] = {}
    for _ in range(reader.u32()):
        name = reader.name()
        value = reader.u64()
        if name.startswith("config/"):
            config[name[len("config/"):]] = value
        else:
            counters[name] = value
    adam.step = counters.pop("adam_step", 0)
    has_adam = bool(adam.m) or adam.step > 0
    return ModelFile(ModelParameters(tensors), counters, adam if has_adam else None, config)


__all__ = [
    "AdamParamState",
    "ModelFile",
    "ModelParameters",
    "ParamSpec",
    "adam_step_params",
    "load_model",
    "save_model",
]
