"""Dense n-dimensional arrays with reverse-mode automatic differentiation.

Float32 is the working precision; float64 is selectable for verification
runs. Broadcasting is restricted to "leading-dimension expansion": two
operands may combine only if their shapes are identical or one shape is a
trailing suffix of the other (scalars count as the empty suffix).

Every differentiable operation records its parents and an adjoint closure
on the output tensor; ``ComputationTape.trace`` recovers the topological
order and ``backward`` replays adjoints once per node in reverse.
"""

from __future__ import annotations

import struct
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionError, DomainError, ParameterError

DEFAULT_DTYPE = np.float32

_DTYPE_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}


def resolve_dtype(dtype) -> np.dtype:
    d = np.dtype(dtype)
    if d not in _DTYPE_TAGS:
        raise ParameterError(f"unsupported dtype {d}; use float32 or float64")
    return d


class Tensor:
    """A dense array plus optional gradient buffer and autodiff metadata."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(resolve_dtype(dtype), copy=False)
        elif arr.dtype not in _DTYPE_TAGS:
            arr = arr.astype(DEFAULT_DTYPE)
        # asarray(order="C") keeps 0-d shapes, unlike ascontiguousarray
        self.data: np.ndarray = np.asarray(arr, order="C")
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn: Optional[Callable[[np.ndarray], None]] = None

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ParameterError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """The underlying buffer. Callers must treat it as read-only."""
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    # -- autodiff -----------------------------------------------------------

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed: Optional[np.ndarray] = None) -> "ComputationTape":
        """Run reverse-mode accumulation from this tensor.

        Without an explicit seed the tensor must be scalar-sized and the
        seed is 1. Gradients accumulate into ``.grad`` of every tensor on
        the path that has ``requires_grad``.
        """
        tape = ComputationTape.trace(self)
        tape.replay_adjoints(self, seed)
        return tape

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if not isinstance(other, (int, float)):
            raise ParameterError("tensor division supports scalar divisors only")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, shape) -> "Tensor":
        return reshape(self, shape)

    def sum(self, axis=None) -> "Tensor":
        return tsum(self, axis)

    def mean(self, axis=None) -> "Tensor":
        return tmean(self, axis)

    def exp(self) -> "Tensor":
        return exp(self)

    def log(self) -> "Tensor":
        return log(self)


class ComputationTape:
    """Topologically ordered record of one forward pass.

    ``nodes`` lists every requires-grad tensor reachable from the traced
    root with all parents preceding their consumers; replaying adjoints in
    reverse visits each node exactly once, so tracing a second forward
    pass never disturbs gradients of the first.
    """

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def trace(cls, root: Tensor) -> "ComputationTape":
        nodes: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                nodes.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited and parent.requires_grad:
                    stack.append((parent, False))
        return cls(nodes)

    def replay_adjoints(self, root: Tensor, seed: Optional[np.ndarray] = None) -> None:
        if seed is None:
            if root.data.size != 1:
                raise ParameterError("backward without a seed requires a scalar-sized output")
            seed = np.ones_like(root.data)
        seed = np.asarray(seed, dtype=root.data.dtype)
        if seed.shape != root.data.shape:
            raise DimensionError(f"seed shape {seed.shape} != output shape {root.data.shape}")
        root._accumulate(seed)
        for node in reversed(self.nodes):
            if node._grad_fn is not None and node.grad is not None:
                node._grad_fn(node.grad)

    def zero_grad(self) -> None:
        for node in self.nodes:
            node.grad = None


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype), requires_grad=False)


def _result(data: np.ndarray, parents: Sequence[Tensor], grad_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._grad_fn = grad_fn
    else:
        out._parents = ()
        out._grad_fn = None
    return out


def _check_same_dtype(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.dtype != b.data.dtype:
        raise ParameterError(f"{op}: mixed dtypes {a.data.dtype} and {b.data.dtype}")


def _check_suffix_broadcast(sa: tuple, sb: tuple, op: str) -> None:
    small, big = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
    if big[len(big) - len(small):] != small:
        raise DimensionError(f"{op}: shapes {sa} and {sb} are not suffix-broadcastable")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    return g


# -- elementwise arithmetic --------------------------------------------------


def add(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=b.dtype))
    b = _as_tensor(b, a.dtype)
    _check_same_dtype(a, b, "add")
    _check_suffix_broadcast(a.shape, b.shape, "add")
    data = a.data + b.data

    def grad_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _result(data, (a, b), grad_fn)


def sub(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=b.dtype))
    b = _as_tensor(b, a.dtype)
    _check_same_dtype(a, b, "sub")
    _check_suffix_broadcast(a.shape, b.shape, "sub")
    data = a.data - b.data

    def grad_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(-_unbroadcast(g, b.shape))

    return _result(data, (a, b), grad_fn)


def mul(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=b.dtype))
    b = _as_tensor(b, a.dtype)
    _check_same_dtype(a, b, "mul")
    _check_suffix_broadcast(a.shape, b.shape, "mul")
    data = a.data * b.data

    def grad_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _result(data, (a, b), grad_fn)


def exp(x: Tensor) -> Tensor:
    data = np.exp(x.data)

    def grad_fn(g):
        x._accumulate(g * data)

    return _result(data, (x,), grad_fn)


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise DomainError("log: input must be strictly positive")
    data = np.log(x.data)

    def grad_fn(g):
        x._accumulate(g / x.data)

    return _result(data, (x,), grad_fn)


def sin(x: Tensor) -> Tensor:
    data = np.sin(x.data)

    def grad_fn(g):
        x._accumulate(g * np.cos(x.data))

    return _result(data, (x,), grad_fn)


def cos(x: Tensor) -> Tensor:
    data = np.cos(x.data)

    def grad_fn(g):
        x._accumulate(-g * np.sin(x.data))

    return _result(data, (x,), grad_fn)


def softplus(x: Tensor) -> Tensor:
    data = np.logaddexp(np.zeros((), dtype=x.dtype), x.data)

    def grad_fn(g):
        x._accumulate(g * _sigmoid_array(x.data))

    return _result(data, (x,), grad_fn)


def _sigmoid_array(x: np.ndarray) -> np.ndarray:
    # exp of a non-positive argument only, for stability at both tails
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def sigmoid(x: Tensor) -> Tensor:
    data = _sigmoid_array(x.data)

    def grad_fn(g):
        x._accumulate(g * data * (1.0 - data))

    return _result(data, (x,), grad_fn)


def leaky_relu(x: Tensor, slope: float) -> Tensor:
    """max(x, slope*x); the gradient at exactly 0 is the slope by convention."""
    if not 0.0 < slope < 1.0:
        raise ParameterError(f"leaky_relu slope must lie in (0, 1), got {slope}")
    positive = x.data > 0
    data = np.where(positive, x.data, x.data * x.data.dtype.type(slope))

    def grad_fn(g):
        x._accumulate(np.where(positive, g, g * x.data.dtype.type(slope)))

    return _result(data, (x,), grad_fn)


# -- reductions ---------------------------------------------------------------


def _normalize_axis(axis, ndim):
    if axis is None:
        return None
    axis = int(axis)
    if axis < 0:
        axis += ndim
    if not 0 <= axis < ndim:
        raise DimensionError(f"axis {axis} out of range for ndim {ndim}")
    return axis


def tsum(x: Tensor, axis=None) -> Tensor:
    axis = _normalize_axis(axis, x.ndim)
    data = x.data.sum(axis=axis)

    def grad_fn(g):
        if axis is None:
            x._accumulate(np.broadcast_to(g, x.shape))
        else:
            x._accumulate(np.broadcast_to(np.expand_dims(g, axis), x.shape))

    return _result(np.asarray(data, dtype=x.dtype), (x,), grad_fn)


def tmean(x: Tensor, axis=None) -> Tensor:
    axis = _normalize_axis(axis, x.ndim)
    count = x.size if axis is None else x.shape[axis]
    data = x.data.mean(axis=axis)
    inv = x.data.dtype.type(1.0 / count)

    def grad_fn(g):
        if axis is None:
            x._accumulate(np.broadcast_to(g * inv, x.shape))
        else:
            x._accumulate(np.broadcast_to(np.expand_dims(g * inv, axis), x.shape))

    return _result(np.asarray(data, dtype=x.dtype), (x,), grad_fn)


def squared_norm(x: Tensor) -> Tensor:
    data = np.asarray((x.data * x.data).sum(), dtype=x.dtype)

    def grad_fn(g):
        x._accumulate((2.0 * g) * x.data)

    return _result(data, (x,), grad_fn)


# -- structure ----------------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in (shape if isinstance(shape, Iterable) else (shape,)))
    data = x.data.reshape(shape)

    def grad_fn(g):
        x._accumulate(g.reshape(x.shape))

    return _result(data, (x,), grad_fn)


def permute(x: Tensor, axes) -> Tensor:
    axes = tuple(int(a) for a in axes)
    data = np.ascontiguousarray(x.data.transpose(axes))
    inverse = tuple(int(i) for i in np.argsort(axes))

    def grad_fn(g):
        x._accumulate(g.transpose(inverse))

    return _result(data, (x,), grad_fn)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ParameterError("concat needs at least one tensor")
    axis = _normalize_axis(axis, tensors[0].ndim)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def grad_fn(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            if t.requires_grad:
                t._accumulate(piece)

    return _result(data, tuple(tensors), grad_fn)


def expand_rows(v: Tensor, n: int) -> Tensor:
    """Tile a (d,) vector into (n, d) rows; backward sums over rows."""
    if v.ndim != 1:
        raise DimensionError(f"expand_rows expects a 1-d tensor, got shape {v.shape}")
    data = np.ascontiguousarray(np.broadcast_to(v.data, (int(n), v.shape[0])))

    def grad_fn(g):
        v._accumulate(g.sum(axis=0))

    return _result(data, (v,), grad_fn)


# -- linear maps ----------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    _check_same_dtype(a, b, "matmul")
    data = a.data @ b.data

    def grad_fn(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _result(data, (a, b), grad_fn)


def conv1x1(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Per-pixel affine map over the channel axis: (C,H,W) -> (D,H,W)."""
    if x.ndim != 3 or weight.ndim != 2 or weight.shape[1] != x.shape[0]:
        raise DimensionError(
            f"conv1x1: input channels {x.shape} do not match weight {weight.shape}"
        )
    data = np.tensordot(weight.data, x.data, axes=([1], [0]))
    parents = [x, weight]
    if bias is not None:
        if bias.shape != (weight.shape[0],):
            raise DimensionError(f"conv1x1: bias shape {bias.shape} != ({weight.shape[0]},)")
        data = data + bias.data[:, None, None]
        parents.append(bias)

    def grad_fn(g):
        if x.requires_grad:
            x._accumulate(np.tensordot(weight.data.T, g, axes=([1], [0])))
        if weight.requires_grad:
            d = g.reshape(g.shape[0], -1)
            c = x.data.reshape(x.shape[0], -1)
            weight._accumulate(d @ c.T)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(1, 2)))

    return _result(data, tuple(parents), grad_fn)


def weighted_sum(w: Tensor, f: Tensor) -> Tensor:
    """Per-ray quadrature: (N,S) weights x (N,S,D) features -> (N,D)."""
    if w.ndim != 2 or f.ndim != 3 or w.shape != f.shape[:2]:
        raise DimensionError(f"weighted_sum: shapes {w.shape} and {f.shape} disagree")
    data = np.einsum("ns,nsd->nd", w.data, f.data, optimize=True)

    def grad_fn(g):
        if w.requires_grad:
            w._accumulate(np.einsum("nd,nsd->ns", g, f.data, optimize=True))
        if f.requires_grad:
            f._accumulate(w.data[:, :, None] * g[:, None, :])

    return _result(data, (w, f), grad_fn)


def cumsum_exclusive(x: Tensor, axis: int = -1) -> Tensor:
    """y[..., i] = sum of x[..., :i] along the axis (zero for the first slot)."""
    axis = _normalize_axis(axis, x.ndim)
    data = np.zeros_like(x.data)
    inclusive = np.cumsum(x.data, axis=axis)
    pre = [slice(None)] * x.ndim
    pre[axis] = slice(None, -1)
    post = [slice(None)] * x.ndim
    post[axis] = slice(1, None)
    data[tuple(post)] = inclusive[tuple(pre)]

    def grad_fn(g):
        # adjoint of an exclusive prefix sum is an exclusive suffix sum
        flipped = np.flip(g, axis=axis)
        acc = np.cumsum(flipped, axis=axis)
        out = np.zeros_like(g)
        out[tuple(pre)] = np.flip(acc, axis=axis)[tuple(post)]
        x._accumulate(out)

    return _result(data, (x,), grad_fn)


def channel_repeat4(x: Tensor) -> Tensor:
    """(D,H,W) -> (4D,H,W); channel d is copied into channels 4d..4d+3."""
    if x.ndim != 3:
        raise DimensionError(f"channel_repeat4 expects (D,H,W), got {x.shape}")
    data = np.repeat(x.data, 4, axis=0)

    def grad_fn(g):
        d, h, w = x.shape
        x._accumulate(g.reshape(d, 4, h, w).sum(axis=1))

    return _result(data, (x,), grad_fn)


def pixel_shuffle2(x: Tensor) -> Tensor:
    """(4D,H,W) -> (D,2H,2W); channel offset 2i+j of group d lands at (2h+i, 2w+j)."""
    if x.ndim != 3 or x.shape[0] % 4 != 0:
        raise DimensionError(f"pixel_shuffle2 expects (4D,H,W), got {x.shape}")
    d4, h, w = x.shape
    d = d4 // 4
    data = np.ascontiguousarray(
        x.data.reshape(d, 2, 2, h, w).transpose(0, 3, 1, 4, 2).reshape(d, 2 * h, 2 * w)
    )

    def grad_fn(g):
        gx = g.reshape(d, h, 2, w, 2).transpose(0, 2, 4, 1, 3).reshape(d4, h, w)
        x._accumulate(np.ascontiguousarray(gx))

    return _result(data, (x,), grad_fn)


def spatial_matmul(x: Tensor, mh: np.ndarray, mw: np.ndarray) -> Tensor:
    """Apply fixed per-axis matrices: y[c] = mh @ x[c] @ mw.T.

    The matrices are constants (blur bands, bilinear interpolation rows),
    so the backward pass is the transposed pair applied to the adjoint.
    """
    if x.ndim != 3 or mh.shape[1] != x.shape[1] or mw.shape[1] != x.shape[2]:
        raise DimensionError(
            f"spatial_matmul: input {x.shape} incompatible with maps {mh.shape}, {mw.shape}"
        )
    mh = np.asarray(mh, dtype=x.data.dtype)
    mw = np.asarray(mw, dtype=x.data.dtype)
    data = _apply_hw(x.data, mh, mw)

    def grad_fn(g):
        x._accumulate(_apply_hw(g, mh.T, mw.T))

    return _result(data, (x,), grad_fn)


def _apply_hw(x: np.ndarray, mh: np.ndarray, mw: np.ndarray) -> np.ndarray:
    t = np.tensordot(mh, x, axes=([1], [1])).transpose(1, 0, 2)
    return np.ascontiguousarray(t @ mw.T)


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor], stride: int, pad: int) -> Tensor:
    """Strided 2-D convolution with zero padding, im2col implementation.

    Used by the perceptual feature pyramid; kernels stay small so the
    column matrix is materialized directly.
    """
    if x.ndim != 3 or weight.ndim != 4 or weight.shape[1] != x.shape[0]:
        raise DimensionError(f"conv2d: input {x.shape} does not match weight {weight.shape}")
    c, h, w = x.shape
    d, _, kh, kw = weight.shape
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]  # (C, Ho, Wo, KH, KW)
    ho, wo = windows.shape[1], windows.shape[2]
    cols = np.ascontiguousarray(windows.transpose(1, 2, 0, 3, 4)).reshape(ho * wo, c * kh * kw)
    wmat = weight.data.reshape(d, c * kh * kw)
    out = (cols @ wmat.T).T.reshape(d, ho, wo)
    parents = [x, weight]
    if bias is not None:
        out = out + bias.data[:, None, None]
        parents.append(bias)

    def grad_fn(g):
        g2 = g.reshape(d, ho * wo)
        if weight.requires_grad:
            weight._accumulate((g2 @ cols).reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(1, 2)))
        if x.requires_grad:
            gcols = g2.T @ wmat  # (HoWo, C*KH*KW)
            hp, wp = h + 2 * pad, w + 2 * pad
            oh = np.arange(ho) * stride
            ow = np.arange(wo) * stride
            ci = np.arange(c)
            khi = np.arange(kh)
            kwi = np.arange(kw)
            rows = oh[:, None, None, None, None] + khi[None, None, None, :, None]
            colsix = ow[None, :, None, None, None] + kwi[None, None, None, None, :]
            chan = ci[None, None, :, None, None]
            flat = (chan * hp + rows) * wp + colsix
            gpad = np.zeros(c * hp * wp, dtype=g.dtype)
            np.add.at(gpad, np.broadcast_to(flat, (ho, wo, c, kh, kw)).ravel(), gcols.ravel())
            gpad = gpad.reshape(c, hp, wp)
            x._accumulate(gpad[:, pad:pad + h, pad:pad + w] if pad else gpad)

    return _result(np.ascontiguousarray(out), tuple(parents), grad_fn)


# -- serialization --------------------------------------------------------------

# single-tensor record: u32 header length, then header = dtype tag (u8),
# ndim (u8), extents (u32 each), then the raw little-endian buffer


def write_tensor(fp, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    tag = _DTYPE_TAGS.get(arr.dtype)
    if tag is None:
        raise ParameterError(f"cannot serialize dtype {arr.dtype}")
    header = struct.pack("<BB", tag, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    fp.write(struct.pack("<I", len(header)))
    fp.write(header)
    fp.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def read_tensor(fp) -> np.ndarray:
    raw = fp.read(4)
    if len(raw) != 4:
        raise DomainError("truncated tensor record: missing header length")
    (hlen,) = struct.unpack("<I", raw)
    header = fp.read(hlen)
    if len(header) != hlen:
        raise DomainError("truncated tensor record: missing header")
    tag, ndim = struct.unpack("<BB", header[:2])
    if tag not in _TAG_DTYPES:
        raise DomainError(f"unknown dtype tag {tag}")
    shape = struct.unpack(f"<{ndim}I", header[2:2 + 4 * ndim])
    dtype = _TAG_DTYPES[tag]
    nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if ndim else dtype.itemsize
    payload = fp.read(nbytes)
    if len(payload) != nbytes:
        raise DomainError("truncated tensor record: missing payload")
    arr = np.frombuffer(payload, dtype=dtype.newbyteorder("<")).astype(dtype)
    return arr.reshape(shape)


def tensor_record_bytes(arr: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    write_tensor(buf, arr)
    return buf.getvalue()
