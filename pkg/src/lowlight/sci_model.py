"""Self-calibrated illumination enhancement of a single luminance plane.

Training runs a cascade of stages that all share one illumination
estimator H (weight sharing is structural: every stage reads the same layer
objects). With v_0 = y (the observed luminance), stage t computes

    u_t = H(v_t)                     residual illumination
    x_t = clamp(v_t + u_t, eps, 1)   illumination map
    z_t = clamp(y / x_t, 0, 1)       enhanced luminance (Retinex division)
    s_t = K(z_t)                     calibration residual
    v_{t+1} = clamp(y + s_t, 0, 1)   next stage input

Inference needs only stage 0 and never evaluates the calibration network K:
``infer`` is bit-identical to the first enhanced plane of any cascade built
from the same weights.

The training loss sums, over stages, a fidelity term keeping the
illumination near the stage input and an edge-aware smoothness term on the
illumination map, with edge weights derived from y. Clamp gradients pass
through unchanged inside the active range and are zero outside it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadRangeError, FormatError, ShapeMismatchError
from .image_io import ColorSpace, PlanarImage
from .nn_core import (
    NONE,
    RELU,
    ConvLayer,
    Tensor,
    he_init,
    net_backward,
    net_forward_cached,
)

DEFAULT_EPSILON = 1e-3
DEFAULT_HIDDEN = 16
DEFAULT_STAGES = 3
DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 2.0
DEFAULT_SIGMA = 0.1


@dataclass
class SciWeights:
    """Parameters of the illumination estimator H and calibration network K."""

    h_theta: list[ConvLayer]
    k_vartheta: list[ConvLayer]
    in_channels: int
    hidden_channels: int
    epsilon: float = DEFAULT_EPSILON

    def parameters(self) -> list[Tensor]:
        """All learnable tensors: H kernels/biases first, then K's."""
        out = []
        for layer in self.h_theta + self.k_vartheta:
            out.append(layer.kernel)
            out.append(layer.bias)
        return out

    def copy(self) -> "SciWeights":
        return SciWeights(
            [layer.copy() for layer in self.h_theta],
            [layer.copy() for layer in self.k_vartheta],
            self.in_channels,
            self.hidden_channels,
            self.epsilon,
        )


def _make_net(in_channels: int, hidden: int, seeds) -> list[ConvLayer]:
    return [
        ConvLayer(he_init((hidden, in_channels, 3, 3), seeds[0]), he_init((hidden,), seeds[0]), RELU),
        ConvLayer(he_init((hidden, hidden, 3, 3), seeds[1]), he_init((hidden,), seeds[1]), RELU),
        ConvLayer(he_init((in_channels, hidden, 3, 3), seeds[2]), he_init((in_channels,), seeds[2]), NONE),
    ]


def init_weights(
    in_channels: int = 1,
    hidden_channels: int = DEFAULT_HIDDEN,
    epsilon: float = DEFAULT_EPSILON,
    seed: int = 0,
) -> SciWeights:
    """He-initialized weights; fully determined by the seed."""
    layer_seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(6)]
    return SciWeights(
        h_theta=_make_net(in_channels, hidden_channels, layer_seeds[:3]),
        k_vartheta=_make_net(in_channels, hidden_channels, layer_seeds[3:]),
        in_channels=in_channels,
        hidden_channels=hidden_channels,
        epsilon=epsilon,
    )


@dataclass
class StageState:
    """One cascade stage: spec planes plus the caches backward needs."""

    v: np.ndarray            # stage input
    u: np.ndarray            # residual illumination H(v)
    x: np.ndarray            # clamped illumination
    z: np.ndarray            # enhanced luminance
    s: np.ndarray            # calibration residual K(z)
    mask_x: np.ndarray       # where eps < v+u < 1
    mask_z: np.ndarray       # where 0 < y/x < 1
    mask_v: np.ndarray       # where 0 < y+s < 1 (gates the next stage input)
    h_cache: list
    k_cache: list


@dataclass
class CascadeTrace:
    y: np.ndarray            # original luminance, (1, C, H, W)
    stages: list[StageState]
    weights: SciWeights


def _check_range(arr: np.ndarray) -> None:
    if arr.size == 0 or np.min(arr) < 0.0 or np.max(arr) > 1.0:
        raise BadRangeError("luminance values must lie in [0, 1]")


def _as_batch(img: PlanarImage, w: SciWeights) -> np.ndarray:
    if img.channels != w.in_channels:
        raise ShapeMismatchError(
            f"weights expect {w.in_channels} channel(s), image has {img.channels}"
        )
    return img.data[None, :, :, :]


def _illuminate(v: np.ndarray, y: np.ndarray, w: SciWeights):
    """Shared stage core: H(v), clamp to the illumination, divide, clamp."""
    u, h_cache = net_forward_cached(v, w.h_theta)
    p = v + u
    mask_x = (p > w.epsilon) & (p < 1.0)
    x = np.clip(p, w.epsilon, 1.0)
    q = y / x
    mask_z = (q > 0.0) & (q < 1.0)
    z = np.clip(q, 0.0, 1.0)
    return u, x, z, mask_x, mask_z, h_cache


def cascade_arrays(y: np.ndarray, w: SciWeights, stages: int = DEFAULT_STAGES) -> CascadeTrace:
    """Dtype-generic cascade core on a (1, C, H, W) array.

    Training runs this in float32; the finite-difference harness runs it in
    float64 with :func:`weights_astype` copies.
    """
    if stages < 1:
        raise ValueError("stage count must be >= 1")
    _check_range(y)
    v = y
    trace = CascadeTrace(y=y, stages=[], weights=w)
    for _ in range(stages):
        u, x, z, mask_x, mask_z, h_cache = _illuminate(v, y, w)
        s, k_cache = net_forward_cached(z, w.k_vartheta)
        r = y + s
        mask_v = (r > 0.0) & (r < 1.0)
        v_next = np.clip(r, 0.0, 1.0)
        trace.stages.append(
            StageState(v=v, u=u, x=x, z=z, s=s, mask_x=mask_x, mask_z=mask_z,
                       mask_v=mask_v, h_cache=h_cache, k_cache=k_cache)
        )
        v = v_next
    return trace


def cascade_forward(y_img: PlanarImage, w: SciWeights, stages: int = DEFAULT_STAGES) -> CascadeTrace:
    """Run the weight-shared training cascade, keeping gradient caches alive."""
    return cascade_arrays(_as_batch(y_img, w), w, stages)


def weights_astype(w: SciWeights, dtype) -> SciWeights:
    """Dtype-converted copy (used for double-precision gradient checks)."""
    return SciWeights(
        [layer.astype(dtype) for layer in w.h_theta],
        [layer.astype(dtype) for layer in w.k_vartheta],
        w.in_channels,
        w.hidden_channels,
        w.epsilon,
    )


def infer(y_img: PlanarImage, w: SciWeights) -> PlanarImage:
    """Single-block inference: one pass of H, divide, done. K is never run."""
    y = _as_batch(y_img, w)
    _check_range(y)
    _, _, z, _, _, _ = _illuminate(y, y, w)
    space = ColorSpace.GRAY if w.in_channels == 1 else ColorSpace.RGB
    return PlanarImage(space, z[0])


def _edge_weights(y: np.ndarray, sigma: float):
    """exp(-(y_i - y_j)^2 / (2 sigma^2)) for right and down neighbor pairs."""
    dr = y[:, :, :, :-1] - y[:, :, :, 1:]
    dd = y[:, :, :-1, :] - y[:, :, 1:, :]
    denom = 2.0 * sigma * sigma
    return np.exp(-(dr * dr) / denom), np.exp(-(dd * dd) / denom)


def sci_loss(
    trace: CascadeTrace,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    sigma: float = DEFAULT_SIGMA,
    compute_grads: bool = True,
):
    """Unsupervised cascade loss and its gradients.

    Returns ``(loss, grads)`` with grads aligned to
    ``trace.weights.parameters()`` (H gradients first, then K's), or
    ``(loss, None)`` when ``compute_grads`` is false. Gradients flow through
    the Retinex division and both networks across all stages.
    """
    w = trace.weights
    y = trace.y
    n = float(y.size)
    wr, wd = _edge_weights(y, sigma)

    loss = 0.0
    for st in trace.stages:
        fid = np.mean((st.x - st.v) ** 2, dtype=np.float64)
        dr = st.x[:, :, :, :-1] - st.x[:, :, :, 1:]
        dd = st.x[:, :, :-1, :] - st.x[:, :, 1:, :]
        smooth = (np.sum(wr * np.abs(dr), dtype=np.float64)
                  + np.sum(wd * np.abs(dd), dtype=np.float64)) / n
        loss += alpha * fid + beta * smooth

    if not compute_grads:
        return float(loss), None

    dtype = y.dtype
    h_grads = [[np.zeros(l.kernel.shape, dtype=dtype), np.zeros(l.bias.shape, dtype=dtype)]
               for l in w.h_theta]
    k_grads = [[np.zeros(l.kernel.shape, dtype=dtype), np.zeros(l.bias.shape, dtype=dtype)]
               for l in w.k_vartheta]

    stages = trace.stages
    gv_next: np.ndarray | None = None  # dL/dv_{t+1}
    for t in range(len(stages) - 1, -1, -1):
        st = stages[t]
        # direct loss terms at this stage
        gx = alpha * (2.0 / n) * (st.x - st.v)
        gv = -gx.copy()
        dr = st.x[:, :, :, :-1] - st.x[:, :, :, 1:]
        dd = st.x[:, :, :-1, :] - st.x[:, :, 1:, :]
        sr = (beta / n) * wr * np.sign(dr)
        sd = (beta / n) * wd * np.sign(dd)
        gx[:, :, :, :-1] += sr
        gx[:, :, :, 1:] -= sr
        gx[:, :, :-1, :] += sd
        gx[:, :, 1:, :] -= sd

        # gradient arriving from the next stage input v_{t+1} = clamp(y + K(z_t))
        if gv_next is not None:
            gs = np.where(st.mask_v, gv_next, 0.0).astype(dtype, copy=False)
            gz, k_pgrads = net_backward(gs, w.k_vartheta, st.k_cache)
            for acc, (gk, gb) in zip(k_grads, k_pgrads):
                acc[0] += gk
                acc[1] += gb
            gq = np.where(st.mask_z, gz, 0.0).astype(dtype, copy=False)
            gx += gq * (-y / (st.x * st.x))

        # through x = clamp(v + u, eps, 1)
        gp = np.where(st.mask_x, gx, 0.0).astype(dtype, copy=False)
        gv_from_h, h_pgrads = net_backward(gp, w.h_theta, st.h_cache)
        for acc, (gk, gb) in zip(h_grads, h_pgrads):
            acc[0] += gk
            acc[1] += gb
        gv += gp + gv_from_h
        gv_next = gv

    grads: list[np.ndarray] = []
    for gk, gb in h_grads + k_grads:
        grads.append(gk)
        grads.append(gb)
    return float(loss), grads


# ---------------------------------------------------------------------------
# checkpoint format:
#   magic "SCIW" | u16 version | u16 n_h | u16 n_k
#   per layer:  u16 cout, u16 cin, u16 kh, u16 kw, u8 activation (0=none, 1=relu)
#   per layer:  kernel float32 LE, bias float32 LE (table order)
#   footer:     u16 in_channels, u16 hidden_channels, f32 epsilon
# ---------------------------------------------------------------------------

_MAGIC = b"SCIW"
_VERSION = 1
_ACT_CODE = {NONE: 0, RELU: 1}
_ACT_NAME = {0: NONE, 1: RELU}


def save_weights(w: SciWeights, path) -> None:
    """Write the byte-exact checkpoint format described above."""
    parts = [_MAGIC, struct.pack("<HHH", _VERSION, len(w.h_theta), len(w.k_vartheta))]
    layers = w.h_theta + w.k_vartheta
    for layer in layers:
        co, ci, kh, kw = layer.kernel.shape
        parts.append(struct.pack("<HHHHB", co, ci, kh, kw, _ACT_CODE[layer.activation]))
    for layer in layers:
        parts.append(layer.kernel.values.astype("<f4", copy=False).tobytes())
        parts.append(layer.bias.values.astype("<f4", copy=False).tobytes())
    parts.append(struct.pack("<HHf", w.in_channels, w.hidden_channels, w.epsilon))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.blob):
            raise FormatError(f"{self.path}: truncated checkpoint while reading {what}")
        chunk = self.blob[self.pos:self.pos + count]
        self.pos += count
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_weights(path) -> SciWeights:
    """Read a checkpoint; round trip with :func:`save_weights` is bit-exact."""
    with open(path, "rb") as fh:
        rd = _Reader(fh.read(), path)
    if rd.take(4, "magic") != _MAGIC:
        raise FormatError(f"{path}: bad magic (not a weights checkpoint)")
    version, n_h, n_k = rd.unpack("<HHH", "header")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if n_h < 1 or n_k < 1:
        raise FormatError(f"{path}: layer counts must be positive, got {n_h}/{n_k}")

    table = []
    for i in range(n_h + n_k):
        co, ci, kh, kw, act = rd.unpack("<HHHHB", f"shape table entry {i}")
        if (kh, kw) != (3, 3):
            raise FormatError(f"{path}: layer {i}: kernel {kh}x{kw} is not 3x3")
        if act not in _ACT_NAME:
            raise FormatError(f"{path}: layer {i}: unknown activation code {act}")
        # chain check within each net; K restarts the chain at index n_h
        if table and i != n_h and table[-1][0] != ci:
            raise FormatError(
                f"{path}: layer {i}: in-channels {ci} does not chain from previous "
                f"out-channels {table[-1][0]}"
            )
        table.append((co, ci, kh, kw, act))

    layers = []
    for i, (co, ci, kh, kw, act) in enumerate(table):
        kdata = np.frombuffer(rd.take(co * ci * kh * kw * 4, f"layer {i} kernel"), dtype="<f4")
        bdata = np.frombuffer(rd.take(co * 4, f"layer {i} bias"), dtype="<f4")
        layers.append(
            ConvLayer(
                Tensor(kdata.reshape(co, ci, kh, kw).astype(np.float32)),
                Tensor(bdata.astype(np.float32)),
                _ACT_NAME[act],
            )
        )
    in_channels, hidden_channels, epsilon = rd.unpack("<HHf", "config echo")
    if rd.pos != len(rd.blob):
        raise FormatError(f"{path}: {len(rd.blob) - rd.pos} trailing bytes after config echo")

    h_theta, k_vartheta = layers[:n_h], layers[n_h:]
    for name, net in (("H", h_theta), ("K", k_vartheta)):
        if net[0].in_channels != in_channels or net[-1].out_channels != in_channels:
            raise FormatError(
                f"{path}: {name} network does not map {in_channels}->{in_channels} channels"
            )
    return SciWeights(h_theta, k_vartheta, int(in_channels), int(hidden_channels), float(epsilon))
