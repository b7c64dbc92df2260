"""Minimal reverse-mode automatic differentiation over scalar graphs.

A :class:`Tape` records every primitive operation as an append-only node
carrying its parent indices and local partial derivatives, so parents
always precede children and a single reverse sweep yields exact
gradients for every recorded node. Values are plain Python floats; this
is the readable reference path, while the array kernels in
:mod:`iolnet.kernels` provide the fast batched equivalent and are
cross-checked against this one in the tests.

A tape is single-use and confined to one thread; independent tapes may
run concurrently.
"""

import math
from typing import Callable, List, Sequence, Tuple

from .errors import TapeError

#: Negative-slope coefficient shared by every leaky ReLU in the package.
LEAKY_ALPHA = 0.1


class Var:
    """Handle to one scalar node on a tape. Supports float operands."""

    __slots__ = ("tape", "index", "value")

    def __init__(self, tape: "Tape", index: int, value: float):
        self.tape = tape
        self.index = index
        self.value = value

    def __repr__(self):
        return f"Var(#{self.index}, {self.value})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        o = self.tape.lift(other)
        return self.tape._record("add", self.value + o.value,
                                 (self.index, o.index), (1.0, 1.0))

    __radd__ = __add__

    def __sub__(self, other):
        o = self.tape.lift(other)
        return self.tape._record("sub", self.value - o.value,
                                 (self.index, o.index), (1.0, -1.0))

    def __rsub__(self, other):
        o = self.tape.lift(other)
        return o.__sub__(self)

    def __neg__(self):
        return self.tape._record("neg", -self.value, (self.index,), (-1.0,))

    def __mul__(self, other):
        o = self.tape.lift(other)
        return self.tape._record("mul", self.value * o.value,
                                 (self.index, o.index), (o.value, self.value))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self.tape.lift(other)
        if o.value == 0.0:
            raise TapeError(f"division by zero at node #{o.index}")
        inv = 1.0 / o.value
        return self.tape._record("div", self.value * inv,
                                 (self.index, o.index),
                                 (inv, -self.value * inv * inv))

    def __rtruediv__(self, other):
        o = self.tape.lift(other)
        return o.__truediv__(self)

    # -- unary primitives ----------------------------------------------------

    def square(self):
        return self.tape._record("square", self.value * self.value,
                                 (self.index,), (2.0 * self.value,))

    def sqrt(self):
        if self.value < 0.0:
            raise TapeError(f"sqrt of negative value at node #{self.index}")
        root = math.sqrt(self.value)
        if root == 0.0:
            raise TapeError(f"sqrt gradient singular at node #{self.index}")
        return self.tape._record("sqrt", root, (self.index,), (0.5 / root,))

    def exp(self):
        try:
            e = math.exp(self.value)
        except OverflowError:
            raise TapeError(f"exp overflow at node #{self.index}") from None
        return self.tape._record("exp", e, (self.index,), (e,))

    def leaky_relu(self, alpha: float = LEAKY_ALPHA):
        if self.value >= 0.0:
            return self.tape._record("lrelu", self.value, (self.index,), (1.0,))
        return self.tape._record("lrelu", alpha * self.value,
                                 (self.index,), (alpha,))


class Tape:
    """Append-only record of a scalar computation graph."""

    def __init__(self):
        self._parents: List[Tuple[int, ...]] = []
        self._partials: List[Tuple[float, ...]] = []
        self._values: List[float] = []

    def __len__(self):
        return len(self._values)

    def var(self, value: float) -> Var:
        """Create a leaf node (an input or a parameter)."""
        return self._record("leaf", float(value), (), ())

    def lift(self, x) -> Var:
        """Wrap a float as a constant leaf; pass existing nodes through."""
        if isinstance(x, Var):
            if x.tape is not self:
                raise TapeError("operands recorded on different tapes")
            return x
        return self.var(x)

    def _record(self, kind: str, value: float, parents, partials) -> Var:
        if not math.isfinite(value):
            raise TapeError(
                f"non-finite value {value!r} from {kind} at node #{len(self._values)}")
        self._parents.append(tuple(parents))
        self._partials.append(tuple(partials))
        self._values.append(value)
        return Var(self, len(self._values) - 1, value)

    def grad(self, output: Var) -> List[float]:
        """Gradient of ``output`` with respect to every recorded node.

        One reverse sweep over the tape; ``result[v.index]`` is
        d(output)/d(v).
        """
        if output.tape is not self:
            raise TapeError("output recorded on a different tape")
        adj = [0.0] * len(self._values)
        adj[output.index] = 1.0
        for i in range(output.index, -1, -1):
            a = adj[i]
            if a == 0.0:
                continue
            parents = self._parents[i]
            partials = self._partials[i]
            for p, dp in zip(parents, partials):
                adj[p] += a * dp
        return adj


def grad_of(builder: Callable[[Sequence[Var]], Var],
            inputs: Sequence[float]) -> Tuple[float, List[float]]:
    """Evaluate ``builder`` on fresh leaf nodes and differentiate.

    Returns the scalar output value together with the gradient with
    respect to each input, in order.
    """
    tape = Tape()
    leaves = [tape.var(x) for x in inputs]
    out = builder(leaves)
    if not isinstance(out, Var):
        raise TapeError("builder must return a tape node")
    adj = tape.grad(out)
    return out.value, [adj[v.index] for v in leaves]
