"""Rank-4 tensors and the tape that records operations on them for reverse-mode differentiation"""

from collections.abc import Mapping
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ContractError, ShapeError


class Tensor:
    """
    Array of layout (batch, channel, joint, coordinate), optionally tracked by a tape.

    Parameters
    ----------
    data : ndarray
        Rank-4 array. It is stored as given, no copy is made.
    tape : Tape, optional
        Tape that recorded the operation that produced this tensor.
        None for constants.
    node : int, optional
        Index of the producing node in the tape.

    Attributes
    ----------
    data : ndarray
        The values.
    tape : Tape or None
        Tape that tracks this tensor.
    node : int or None
        Handle into the tape.

    Examples
    --------
    Constants are created directly, tracked leaves through a tape:

    >>> x = Tensor(np.zeros((1, 1, 5, 3), dtype=np.float32))
    >>> tape = Tape()
    >>> w = tape.watch(np.ones((4, 1, 1, 1), dtype=np.float32))
    """

    __slots__ = ("data", "tape", "node")

    def __init__(self, data: np.ndarray, tape: Optional["Tape"] = None, node: Optional[int] = None):

        data = np.asarray(data)
        if data.ndim != 4:
            raise ShapeError(f"Tensors must be rank 4, got shape {data.shape}")

        self.data = data
        self.tape = tape
        self.node = node

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def tracked(self) -> bool:
        return self.tape is not None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, tracked={self.tracked})"


class Tape:
    """
    Append-only record of operations, rebuilt on every forward pass.

    Each node stores the handles of its tracked inputs and a closure that maps
    the gradient of the node output to the gradients of those inputs.
    Leaves (watched parameters) have no closure.

    Attributes
    ----------
    parents : list
        For each node, a tuple with the node handles of its inputs (None for untracked inputs).
    vjps : list
        For each node, the vector-Jacobian product closure or None for leaves.
    shapes : list
        For each node, the shape of its output.
    """

    def __init__(self):

        self.parents = []
        self.vjps = []
        self.shapes = []

    def __len__(self):
        return len(self.parents)

    def watch(self, array: np.ndarray) -> Tensor:
        """
        Register an array as a leaf of the tape.

        Parameters
        ----------
        array : ndarray
            Rank-4 array. Not copied.

        Returns
        -------
        Tensor
            Tracked tensor whose gradient can be requested in backward.
        """

        array = np.asarray(array)
        self.parents.append(())
        self.vjps.append(None)
        self.shapes.append(array.shape)
        return Tensor(array, self, len(self.parents) - 1)

    def record(self, data: np.ndarray, inputs: Sequence[Tensor], vjp: Callable) -> Tensor:
        """
        Append an operation to the tape.

        Parameters
        ----------
        data : ndarray
            Output of the operation.
        inputs : sequence of Tensor
            Operands of the operation. Untracked ones are recorded as None.
        vjp : callable
            Maps the output gradient to a tuple with one gradient per input.
            Entries for untracked inputs may be None.

        Returns
        -------
        Tensor
            The tracked output.
        """

        self.parents.append(tuple(t.node if t.tracked else None for t in inputs))
        self.vjps.append(vjp)
        self.shapes.append(data.shape)
        return Tensor(data, self, len(self.parents) - 1)

    def backward(self, loss: Tensor, wrt=None):
        """
        Propagate gradients from a scalar loss back to the leaves.

        Parameters
        ----------
        loss : Tensor
            Tracked tensor of dims (1, 1, 1, 1).
        wrt : Mapping[str, Tensor] or Sequence[Tensor], optional
            Tensors to return gradients for. Tensors that the loss does not
            depend on get zero gradients.

        Returns
        -------
        dict or list or None
            Gradients with the structure of wrt, None if wrt is not given.
            Gradients always have the dims of the tensor they belong to.
        """

        if loss.shape != (1, 1, 1, 1):
            raise ContractError(f"backward needs a scalar loss of dims (1, 1, 1, 1), got {loss.shape}")
        if loss.tape is not self:
            raise ContractError("The loss was not recorded on this tape")

        grads = [None] * len(self.parents)
        grads[loss.node] = np.ones(loss.shape, dtype=loss.dtype)

        for node in range(loss.node, -1, -1):
            g = grads[node]
            if g is None or self.vjps[node] is None:
                continue

            input_grads = self.vjps[node](g)
            for parent, parent_grad in zip(self.parents[node], input_grads):
                if parent is None or parent_grad is None:
                    continue
                if grads[parent] is None:
                    grads[parent] = parent_grad
                else:
                    grads[parent] = grads[parent] + parent_grad

            # Intermediate gradients are not needed again
            if self.parents[node]:
                grads[node] = None

        self._grads = grads

        if wrt is None:
            return None
        if isinstance(wrt, Mapping):
            return {name: self._grad_of(t) for name, t in wrt.items()}
        return [self._grad_of(t) for t in wrt]

    def _grad_of(self, tensor: Tensor) -> np.ndarray:

        if tensor.tape is not self:
            raise ContractError("Requested the gradient of a tensor that is not on this tape")
        g = self._grads[tensor.node]
        if g is None:
            return np.zeros(tensor.shape, dtype=tensor.dtype)
        return g


def constant(array) -> Tensor:
    """Wrap an array as an untracked tensor."""

    return Tensor(np.asarray(array))


def common_tape(*tensors: Tensor) -> Optional[Tape]:
    """
    Tape shared by the tracked operands, None if none is tracked.

    Raises
    ------
    ContractError
        If tracked operands belong to different tapes.
    """

    tape = None
    for t in tensors:
        if t.tape is None:
            continue
        if tape is None:
            tape = t.tape
        elif t.tape is not tape:
            raise ContractError("Operands are tracked by different tapes")
    return tape
