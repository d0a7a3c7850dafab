"""Dense 4-D tensors, the gradient tape, and the parameter registry.

Every value in the pipeline is a [batch, channels, height, width] array of
float32 (float64 in gradient-checking mode).  Reverse-mode differentiation
is tape-based: ops executed under ``with GradTape() as tape`` record their
backward closures, ``tape.backward(loss)`` accumulates dLoss/dLeaf into the
``grad`` slot of every leaf tensor that was touched.  A tape is
single-writer: one forward/backward pair, no nesting.
"""

import numpy as np

from ..errors import GraphError, ShapeError

FLOAT_DTYPES = (np.float32, np.float64)


class Tensor:
    """A 4-D [N,C,H,W] array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad=False):
        if not isinstance(data, np.ndarray):
            raise ShapeError(f"Tensor expects an ndarray, got {type(data).__name__}")
        if data.ndim != 4:
            raise ShapeError(f"Tensor must be 4-D [N,C,H,W], got shape {data.shape}")
        if data.dtype.type not in FLOAT_DTYPES:
            raise ShapeError(f"Tensor dtype must be float32/float64, got {data.dtype}")
        self.data = np.ascontiguousarray(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(())[()])

    def copy(self):
        t = Tensor(self.data.copy(), requires_grad=self.requires_grad)
        if self.grad is not None:
            t.grad = self.grad.copy()
        return t

    def __repr__(self):
        return f"Tensor(shape={tuple(self.shape)}, dtype={self.data.dtype.name})"


def tensor(values, dtype=np.float32, requires_grad=False):
    arr = np.asarray(values, dtype=dtype)
    return Tensor(arr, requires_grad=requires_grad)


def zeros(shape, dtype=np.float32, requires_grad=False):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def scalar(value, dtype=np.float32):
    return Tensor(np.full((1, 1, 1, 1), value, dtype=dtype))


class _Node:
    __slots__ = ("output", "inputs", "backfn")

    def __init__(self, output, inputs, backfn):
        self.output = output
        self.inputs = inputs
        self.backfn = backfn


_ACTIVE_TAPE = None


def active_tape():
    return _ACTIVE_TAPE


class GradTape:
    """Recorded operation sequence enabling one reverse-mode pass."""

    def __init__(self):
        self._nodes = []
        self._tracked = set()
        self._consumed = False

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise GraphError("a GradTape is already active; tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def tracks(self, t):
        return id(t) in self._tracked

    def needs_grad(self, t):
        return t is not None and (t.requires_grad or id(t) in self._tracked)

    def record(self, output, inputs, backfn):
        self._nodes.append(_Node(output, tuple(inputs), backfn))
        self._tracked.add(id(output))

    def backward(self, loss):
        """Accumulate dLoss/dLeaf into .grad of every touched leaf."""
        if self._consumed:
            raise GraphError("this tape was already replayed; record a new forward pass")
        if not self._nodes or not isinstance(loss, Tensor) or id(loss) not in self._tracked:
            raise GraphError("backward without a recorded forward producing this loss")
        if loss.shape != (1, 1, 1, 1):
            raise ShapeError(f"loss must have shape (1,1,1,1), got {loss.shape}")
        self._consumed = True
        flowing = {id(loss): np.ones((1, 1, 1, 1), dtype=loss.dtype)}
        for node in reversed(self._nodes):
            gout = flowing.pop(id(node.output), None)
            if gout is None:
                continue
            grads = node.backfn(gout)
            for inp, g in zip(node.inputs, grads):
                if g is None or inp is None:
                    continue
                if inp.requires_grad:
                    if inp.grad is None:
                        inp.grad = np.zeros_like(inp.data)
                    inp.grad += g
                elif id(inp) in self._tracked:
                    acc = flowing.get(id(inp))
                    if acc is None:
                        flowing[id(inp)] = np.array(g, copy=True)
                    else:
                        acc += g


def backward(tape, loss):
    tape.backward(loss)


class Parameter:
    """A named learnable tensor with its gradient slot and init descriptor."""

    __slots__ = ("name", "tensor", "init", "kind")

    def __init__(self, name, tensor_, init, kind):
        self.name = name
        self.tensor = tensor_
        self.init = init
        self.kind = kind

    @property
    def data(self):
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    def __repr__(self):
        return f"Parameter({self.name}, shape={tuple(self.data.shape)}, init={self.init})"


class ParamStore:
    """Registry of learnable tensors, iterated in registration order.

    All initial values come from one seeded generator, drawn in
    registration order, so construction is deterministic.
    """

    def __init__(self, dtype=np.float32, seed=0):
        if dtype not in FLOAT_DTYPES:
            raise ShapeError(f"ParamStore dtype must be float32/float64, got {dtype}")
        self.dtype = dtype
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._params = {}

    def register(self, name, shape, init, kind="other"):
        """init: 'zeros', ('uniform', bound), ('constant', value)."""
        if name in self._params:
            raise ShapeError(f"parameter name already registered: {name}")
        if len(shape) != 4:
            raise ShapeError(f"parameter {name} must be 4-D, got {shape}")
        if init == "zeros":
            data = np.zeros(shape, dtype=self.dtype)
            desc = "zeros"
        elif init[0] == "uniform":
            bound = float(init[1])
            data = self._rng.uniform(-bound, bound, size=shape).astype(self.dtype)
            desc = f"uniform(+-{bound:.6g})"
        elif init[0] == "constant":
            data = np.full(shape, float(init[1]), dtype=self.dtype)
            desc = f"constant({init[1]})"
        else:
            raise ShapeError(f"unknown init spec {init!r} for {name}")
        t = Tensor(data, requires_grad=True)
        t.zero_grad()
        p = Parameter(name, t, desc, kind)
        self._params[name] = p
        return p

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def __contains__(self, name):
        return name in self._params

    def get(self, name):
        if name not in self._params:
            raise KeyError(f"no parameter named {name}")
        return self._params[name]

    def names(self):
        return list(self._params.keys())

    def zero_grads(self):
        for p in self._params.values():
            p.tensor.zero_grad()

    def zero_convs(self, prefix=""):
        """Zero-fill weights and biases of every convolution under prefix."""
        for p in self._params.values():
            if p.name.startswith(prefix) and p.kind in ("conv_weight", "conv_bias"):
                p.data.fill(0.0)

    def param_count(self, exclude_prefix=None):
        total = 0
        for p in self._params.values():
            if exclude_prefix and p.name.startswith(exclude_prefix):
                continue
            total += p.data.size
        return total

    def state_dict(self):
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state_dict(self, state, strict=True):
        missing = [n for n in self._params if n not in state]
        unexpected = [n for n in state if n not in self._params]
        if strict and (missing or unexpected):
            raise ShapeError(
                f"state mismatch: missing={missing[:4]} unexpected={unexpected[:4]}"
            )
        for name, arr in state.items():
            if name not in self._params:
                continue
            p = self._params[name]
            if tuple(arr.shape) != tuple(p.data.shape):
                raise ShapeError(
                    f"checkpoint shape {arr.shape} does not match parameter "
                    f"{name} of shape {p.data.shape}"
                )
            p.data[...] = arr.astype(self.dtype)
