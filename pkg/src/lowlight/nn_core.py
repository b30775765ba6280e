"""Minimal NCHW conv-net machinery with hand-written reverse-mode gradients.

The enhancement networks are short static stacks of same-padded 3x3
convolutions, so there is no general autodiff tape here: each layer caches
what its backward pass needs and the composite gradient is assembled by the
caller. Activations travel as plain float arrays; learnable parameters live
in :class:`Tensor` holders so the optimizer can address them uniformly.

Arrays keep whatever float dtype they come in with (float32 in training,
float64 inside the finite-difference harness); reductions accumulate in
float64 either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError

RELU = "relu"
NONE = "none"


class Tensor:
    """A float array plus an optional gradient slot of the same shape."""

    __slots__ = ("values", "grad")

    def __init__(self, values: np.ndarray, grad: np.ndarray | None = None):
        self.values = np.asarray(values)
        if grad is not None and grad.shape != self.values.shape:
            raise ShapeMismatchError(f"grad shape {grad.shape} != value shape {self.values.shape}")
        self.grad = grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def copy(self) -> "Tensor":
        return Tensor(self.values.copy(), None if self.grad is None else self.grad.copy())


@dataclass
class ConvLayer:
    """Same-padded 3x3 convolution, stride 1, optional ReLU."""

    kernel: Tensor           # (Cout, Cin, 3, 3)
    bias: Tensor             # (Cout,)
    activation: str = NONE   # RELU or NONE

    def __post_init__(self):
        co, ci, kh, kw = self.kernel.shape
        if (kh, kw) != (3, 3):
            raise ShapeMismatchError(f"kernel must be 3x3, got {kh}x{kw}")
        if self.bias.shape != (co,):
            raise ShapeMismatchError(f"bias shape {self.bias.shape} != ({co},)")
        if self.activation not in (RELU, NONE):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    def copy(self) -> "ConvLayer":
        return ConvLayer(self.kernel.copy(), self.bias.copy(), self.activation)

    def astype(self, dtype) -> "ConvLayer":
        return ConvLayer(
            Tensor(self.kernel.values.astype(dtype)),
            Tensor(self.bias.values.astype(dtype)),
            self.activation,
        )


def _im2col(x: np.ndarray) -> np.ndarray:
    """Zero-pad by 1 and unfold 3x3 patches: (N,C,H,W) -> (N*H*W, C*9)."""
    n, c, h, w = x.shape
    padded = np.zeros((n, c, h + 2, w + 2), dtype=x.dtype)
    padded[:, :, 1:-1, 1:-1] = x
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(2, 3))
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * 9)


def _corr3x3(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray | None) -> np.ndarray:
    """Same-padded 3x3 correlation via im2col + GEMM."""
    n, c, h, w = x.shape
    co = kernel.shape[0]
    cols = _im2col(x)
    wmat = kernel.reshape(co, c * 9).astype(x.dtype, copy=False)
    out = cols @ wmat.T
    if bias is not None:
        out += bias.astype(x.dtype, copy=False)
    return out.reshape(n, h, w, co).transpose(0, 3, 1, 2)


def conv2d_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Forward pass; output spatial size equals input (same zero padding)."""
    out, _ = conv2d_forward_cached(x, layer)
    return out


def conv2d_forward_cached(x: np.ndarray, layer: ConvLayer):
    """Forward pass returning ``(out, relu_mask)``; the mask is None for NONE."""
    if x.ndim != 4 or x.shape[1] != layer.in_channels:
        raise ShapeMismatchError(
            f"input shape {x.shape} incompatible with conv {layer.in_channels}->"
            f"{layer.out_channels}"
        )
    pre = _corr3x3(x, layer.kernel.values, layer.bias.values)
    if layer.activation == RELU:
        mask = pre > 0
        return np.where(mask, pre, 0.0).astype(x.dtype, copy=False), mask
    return pre, None


def conv2d_backward(
    grad_out: np.ndarray,
    x: np.ndarray,
    layer: ConvLayer,
    relu_mask: np.ndarray | None = None,
):
    """Exact gradients of the forward map.

    ``x`` must be the cached forward input. Returns
    ``(grad_input, grad_kernel, grad_bias)``. When the layer is ReLU and no
    mask was cached, the pre-activation is recomputed to rebuild it.
    """
    if grad_out.shape[1] != layer.out_channels or grad_out.shape[2:] != x.shape[2:]:
        raise ShapeMismatchError(
            f"grad_out shape {grad_out.shape} inconsistent with input {x.shape}"
        )
    if layer.activation == RELU:
        if relu_mask is None:
            relu_mask = _corr3x3(x, layer.kernel.values, layer.bias.values) > 0
        g = np.where(relu_mask, grad_out, 0.0).astype(grad_out.dtype, copy=False)
    else:
        g = grad_out

    n, co, h, w = g.shape
    ci = layer.in_channels
    grad_bias = g.sum(axis=(0, 2, 3), dtype=np.float64).astype(g.dtype)

    gmat = g.transpose(0, 2, 3, 1).reshape(n * h * w, co)
    cols = _im2col(x)
    grad_kernel = (gmat.T @ cols).reshape(co, ci, 3, 3)

    # grad wrt input: correlate g with the 180-degree-rotated, channel-swapped kernel
    k_rot = layer.kernel.values[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    grad_input = _corr3x3(g, np.ascontiguousarray(k_rot), None)
    return grad_input, grad_kernel, grad_bias


def net_forward(x: np.ndarray, layers: list[ConvLayer]) -> np.ndarray:
    for layer in layers:
        x = conv2d_forward(x, layer)
    return x


def net_forward_cached(x: np.ndarray, layers: list[ConvLayer]):
    """Forward through a stack, caching each layer's input and ReLU mask."""
    caches = []
    for layer in layers:
        out, mask = conv2d_forward_cached(x, layer)
        caches.append((x, mask))
        x = out
    return x, caches


def net_backward(grad_out: np.ndarray, layers: list[ConvLayer], caches):
    """Backprop a stack forwarded with :func:`net_forward_cached`.

    Returns ``(grad_input, param_grads)`` with one (grad_kernel, grad_bias)
    pair per layer, in layer order.
    """
    param_grads: list = [None] * len(layers)
    g = grad_out
    for i in range(len(layers) - 1, -1, -1):
        x, mask = caches[i]
        g, gk, gb = conv2d_backward(g, x, layers[i], mask)
        param_grads[i] = (gk, gb)
    return g, param_grads


@dataclass
class AdamState:
    """First/second moment estimates for a fixed list of parameters."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: list[Tensor]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.values) for p in params],
            v=[np.zeros_like(p.values) for p in params],
        )


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState, lr: float) -> None:
    """One bias-corrected ADAM update, in place."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeMismatchError("params/grads/state lengths differ")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.values.shape:
            raise ShapeMismatchError(f"grad shape {g.shape} != param shape {p.values.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p.values -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def he_init(shape: tuple[int, ...], seed: int) -> Tensor:
    """He-normal kernel init (std = sqrt(2 / (Cin * Kh * Kw))); 1-d biases are zero."""
    shape = tuple(int(s) for s in shape)
    if len(shape) == 1:
        return Tensor(np.zeros(shape, dtype=np.float32))
    if len(shape) != 4:
        raise ShapeMismatchError(f"expected kernel (Cout,Cin,Kh,Kw) or bias (Cout,), got {shape}")
    fan_in = shape[1] * shape[2] * shape[3]
    rng = np.random.default_rng(seed)
    std = np.sqrt(2.0 / fan_in)
    return Tensor(rng.normal(0.0, std, size=shape).astype(np.float32))


def normalized_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - f| / max(1, |a|, |f|): relative for large grads, absolute for tiny ones."""
    a = np.asarray(analytic, dtype=np.float64)
    f = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(f)))
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - f) / denom))


def grad_check_fn(compute, params: list[np.ndarray], step: float = 1e-4) -> float:
    """Compare analytic gradients against central finite differences.

    ``compute()`` must return ``(loss, grads)`` with grads aligned to
    ``params``; the params are float64 arrays perturbed in place. Returns
    the max normalized error over every parameter component.
    """
    _, analytic = compute()
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.reshape(-1)
        numeric = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = compute()[0]
            flat[i] = orig - step
            lm = compute()[0]
            flat[i] = orig
            numeric[i] = (lp - lm) / (2.0 * step)
        worst = max(worst, normalized_error(np.asarray(a).reshape(-1), numeric))
    return worst


def grad_check(layers: list[ConvLayer], loss, x: np.ndarray, step: float = 1e-4) -> float:
    """Finite-difference check of a conv stack in double precision.

    ``loss`` maps the stack output to ``(scalar, grad_wrt_output)``. Returns
    the max normalized error across all kernels and biases (0.0 for a
    parameter-free stack).
    """
    layers64 = [layer.astype(np.float64) for layer in layers]
    x64 = x.astype(np.float64)
    params = [t.values for layer in layers64 for t in (layer.kernel, layer.bias)]

    def compute():
        out, caches = net_forward_cached(x64, layers64)
        value, gout = loss(out)
        _, pgrads = net_backward(np.asarray(gout, dtype=np.float64), layers64, caches)
        flat = [g for gk_gb in pgrads for g in gk_gb]
        return float(value), flat

    return grad_check_fn(compute, params, step=step)
