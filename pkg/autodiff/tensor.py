"""Dense 2-D tensors recorded on an explicit tape for reverse-mode differentiation."""
from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from core.errors import NumericalError, ShapeError

_state = threading.local()


def _stack() -> list["Tape"]:
    if not hasattr(_state, "tapes"):
        _state.tapes = []
    return _state.tapes


def default_dtype() -> np.dtype:
    return getattr(_state, "dtype", np.dtype(np.float32))


def checked_mode() -> bool:
    return getattr(_state, "checked", False)


@contextlib.contextmanager
def precision(dtype, checked: bool = False) -> Iterator[None]:
    """Run the enclosed block with a different default dtype (fp64 for gradient checks)."""
    previous = (default_dtype(), checked_mode())
    _state.dtype, _state.checked = np.dtype(dtype), checked
    try:
        yield
    finally:
        _state.dtype, _state.checked = previous


class Tensor2:
    """A rows x cols array with an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None) -> None:
        array = np.array(data, dtype=dtype or default_dtype())
        if array.ndim == 1:
            array = array.reshape(1, -1)
        if array.ndim != 2:
            raise ShapeError("Tensor2", array.shape)
        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: tuple[Tensor2, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor2":
        return Tensor2(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise ShapeError("accumulate", grad.shape, self.data.shape)
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad.astype(self.data.dtype, copy=False)

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        seed = np.ones_like(self.data) if grad is None else np.asarray(grad)
        tape = Tape.current()
        if tape is None:
            raise RuntimeError("backward() needs the tape that recorded this tensor.")
        tape.backward([(self, seed)])

    # operator sugar
    def __add__(self, other: "Tensor2") -> "Tensor2":
        from autodiff import ops

        return ops.add(self, other)

    def __sub__(self, other: "Tensor2") -> "Tensor2":
        from autodiff import ops

        return ops.sub(self, other)

    def __mul__(self, other: "Tensor2") -> "Tensor2":
        from autodiff import ops

        return ops.mul(self, other)

    def __matmul__(self, other: "Tensor2") -> "Tensor2":
        from autodiff import ops

        return ops.matmul(self, other)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor2{label}({self.rows}x{self.cols}, requires_grad={self.requires_grad})"


class Tape:
    """Records differentiable ops in creation order while active."""

    def __init__(self) -> None:
        self.nodes: list[Tensor2] = []

    @staticmethod
    def current() -> Optional["Tape"]:
        stack = _stack()
        return stack[-1] if stack else None

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _stack().pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, seeds: Iterable[tuple[Tensor2, np.ndarray]]) -> None:
        """Seed output gradients and sweep the tape once in reverse."""
        for tensor, grad in seeds:
            tensor.accumulate(np.asarray(grad))
        _stack().append(_FROZEN)
        try:
            for node in reversed(self.nodes):
                if node.grad is not None and node._backward is not None:
                    node._backward(node.grad)
        finally:
            _stack().pop()

    def release(self) -> None:
        """Drop graph references so intermediate arrays can be freed."""
        for node in self.nodes:
            node._backward = None
            node._parents = ()
        self.nodes.clear()


class _FrozenTape(Tape):
    """Active during backward sweeps: ops run but nothing is recorded."""


_FROZEN = _FrozenTape()


def record(
    data: np.ndarray,
    parents: Sequence[Tensor2],
    backward: Callable[[np.ndarray], None],
    op: str,
) -> Tensor2:
    """Wrap an op result and register its adjoint when a live tape wants it."""
    out = Tensor2.__new__(Tensor2)
    out.data = data
    out.grad = None
    out.name = None
    out._parents = ()
    out._backward = None
    if checked_mode() and not np.isfinite(data).all():
        raise NumericalError(f"{op} produced non-finite values", op=op)
    tape = Tape.current()
    out.requires_grad = bool(
        tape is not None and not isinstance(tape, _FrozenTape) and any(p.requires_grad for p in parents)
    )
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
        tape.nodes.append(out)
    return out


def as_tensor(value) -> Tensor2:
    return value if isinstance(value, Tensor2) else Tensor2(value)


__all__ = ["Tape", "Tensor2", "as_tensor", "checked_mode", "default_dtype", "precision", "record"]
