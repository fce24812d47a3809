"""Sparse-to-dense waveform upscaling.

A sparse cube is zero-interleaved into the dense layout (real traces keep
their slots bit-exactly, missing slots are zero) and each source slice is
pushed through a 15-layer encoder-decoder: 7 conv stages striding 2 on
alternating axes, 7 mirrored transposed-conv stages with skip additions,
and one output conv. Weights are shared across source slices. When the
source count must grow as well, a second network of the same shape runs
along the source axis per receiver (separable two-stage scheme).

Cubes are normalized by one global scalar (max |value| over the training
set) which travels with the checkpoint.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError
from .geometry import AcquisitionConfig, subsample_indices
from .nn import (Conv2d, ConvTranspose2d, LayerSpec, LeakyReLU, ParamStore,
                 adam_step, mse_loss, mse_loss_grad)
from .wavesim import WaveformCube

N_LAYERS = 15
N_STAGES = 7  # encoder stages; mirrored by the decoder, plus one output conv


@dataclass(frozen=True)
class InterleavedCube:
    """Sparse cube embedded in the dense layout, plus slot occupancy."""
    values: np.ndarray            # (target_sources, target_receivers, K)
    mask: np.ndarray              # (target_sources, target_receivers) bool
    acquisition: AcquisitionConfig


@dataclass(frozen=True)
class UpscalerSpec:
    """Exactly 15 layer descriptions whose strides return to the input dims."""
    layers: tuple[LayerSpec, ...]
    base_channels: int
    target_receivers: int
    time_steps: int

    def __post_init__(self):
        if len(self.layers) != N_LAYERS:
            raise ConfigurationError(
                f"upscaler needs exactly {N_LAYERS} layers, got {len(self.layers)}")
        h, w = self.target_receivers, self.time_steps
        shape = (h, w)
        for i, spec in enumerate(self.layers[:N_STAGES]):
            shape = _conv_shape(shape, spec)
        for i, spec in enumerate(self.layers[N_STAGES:2 * N_STAGES]):
            shape = _convT_shape(shape, spec)
        shape = _conv_shape(shape, self.layers[-1])
        if shape != (h, w):
            raise ConfigurationError(
                f"upscaler strides do not return to input dims: {shape} != "
                f"{(h, w)}")


def _conv_shape(shape, spec: LayerSpec):
    from .nn.functional import _pair, conv_out_extent
    kh, kw = _pair(spec.kernel)
    sh, sw = _pair(spec.stride)
    ph, pw = _pair(spec.padding)
    return (conv_out_extent(shape[0], kh, sh, ph),
            conv_out_extent(shape[1], kw, sw, pw))


def _convT_shape(shape, spec: LayerSpec):
    from .nn.functional import _pair
    kh, kw = _pair(spec.kernel)
    sh, sw = _pair(spec.stride)
    ph, pw = _pair(spec.padding)
    return (sh * (shape[0] - 1) + kh - 2 * ph,
            sw * (shape[1] - 1) + kw - 2 * pw)


def plan_upscaler(target_receivers: int, time_steps: int,
                  base_channels: int = 8) -> UpscalerSpec:
    """Alternate stride-2 stages between the time and receiver axes.

    An axis is halved only while its extent is even and > 1; otherwise the
    stage runs at stride 1 so any target dimensions remain representable.
    """
    c = base_channels
    h, w = target_receivers, time_steps
    enc: list[LayerSpec] = []
    stage_axes = []
    for i in range(N_STAGES):
        axis = 1 if i % 2 == 0 else 0  # time first: it is the long axis
        ext = (h, w)[axis]
        halve = ext > 1 and ext % 2 == 0
        stage_axes.append((axis, halve))
        if axis == 1:
            kernel = (3, 4) if halve else (3, 3)
            stride = (1, 2) if halve else (1, 1)
        else:
            kernel = (4, 3) if halve else (3, 3)
            stride = (2, 1) if halve else (1, 1)
        enc.append(LayerSpec(kind="conv", in_channels=1 if i == 0 else c,
                             out_channels=c, kernel=kernel, stride=stride,
                             padding=1))
        if halve:
            if axis == 1:
                w //= 2
            else:
                h //= 2
    dec: list[LayerSpec] = []
    for axis, halve in reversed(stage_axes):
        if axis == 1:
            kernel = (3, 4) if halve else (3, 3)
            stride = (1, 2) if halve else (1, 1)
        else:
            kernel = (4, 3) if halve else (3, 3)
            stride = (2, 1) if halve else (1, 1)
        dec.append(LayerSpec(kind="conv_transpose", in_channels=c,
                             out_channels=c, kernel=kernel, stride=stride,
                             padding=1))
    out = LayerSpec(kind="conv", in_channels=c, out_channels=1, kernel=3,
                    stride=1, padding=1)
    return UpscalerSpec(layers=tuple(enc + dec + [out]),
                        base_channels=base_channels,
                        target_receivers=target_receivers,
                        time_steps=time_steps)


class UpscalerNet:
    """Encoder-decoder with additive skips between mirrored stages."""

    def __init__(self, spec: UpscalerSpec, *, rng, dtype=np.float32,
                 zero_init_output=True):
        self.spec = spec
        self.enc, self.enc_acts = [], []
        for i, ls in enumerate(spec.layers[:N_STAGES]):
            self.enc.append(Conv2d(f"enc{i}", ls.in_channels, ls.out_channels,
                                   ls.kernel, ls.stride, ls.padding,
                                   rng=rng, dtype=dtype))
            self.enc_acts.append(LeakyReLU(f"enc{i}.act"))
        self.dec, self.dec_acts = [], []
        for i, ls in enumerate(spec.layers[N_STAGES:2 * N_STAGES]):
            self.dec.append(ConvTranspose2d(f"dec{i}", ls.in_channels,
                                            ls.out_channels, ls.kernel,
                                            ls.stride, ls.padding,
                                            rng=rng, dtype=dtype))
            self.dec_acts.append(LeakyReLU(f"dec{i}.act"))
        ls = spec.layers[-1]
        self.out_conv = Conv2d("out", ls.in_channels, ls.out_channels,
                               ls.kernel, ls.stride, ls.padding,
                               rng=rng, dtype=dtype,
                               zero_init=zero_init_output)

    def params(self):
        ps = []
        for layer in self.enc + self.dec + [self.out_conv]:
            ps.extend(layer.params())
        return ps

    def forward(self, x: np.ndarray) -> np.ndarray:
        feats = []
        h = x
        for conv, act in zip(self.enc, self.enc_acts):
            h = act.forward(conv.forward(h))
            feats.append(h)
        self._n_skips = 0
        d = h
        # dec[i] mirrors enc stage (N_STAGES-1-i); its output matches the
        # resolution (and channels) of the previous encoder feature
        for i, (convT, act) in enumerate(zip(self.dec, self.dec_acts)):
            d = convT.forward(d)
            j = N_STAGES - 2 - i
            if j >= 0:
                d = d + feats[j]
                self._n_skips += 1
            d = act.forward(d)
        return self.out_conv.forward(d)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        g = self.out_conv.backward(dy)
        skip_grads: dict[int, np.ndarray] = {}
        for i in range(N_STAGES - 1, -1, -1):
            g = self.dec_acts[i].backward(g)
            j = N_STAGES - 2 - i
            if j >= 0:
                skip_grads[j] = skip_grads.get(j, 0) + g
            g = self.dec[i].backward(g)
        for i in range(N_STAGES - 1, -1, -1):
            if i in skip_grads:
                g = g + skip_grads[i]
            g = self.enc[i].backward(self.enc_acts[i].backward(g))
        return g


def build_upscaler(spec: UpscalerSpec, seed: int = 0, dtype=np.float32,
                   zero_init_output: bool = True
                   ) -> tuple[ParamStore, UpscalerNet]:
    rng = np.random.default_rng(seed)
    net = UpscalerNet(spec, rng=rng, dtype=dtype,
                      zero_init_output=zero_init_output)
    store = ParamStore()
    store.register_all(net.params())
    return store, net


def interleave_zeros(sparse: WaveformCube,
                     target: AcquisitionConfig) -> InterleavedCube:
    """Embed the sparse cube in the dense layout, zeros at missing slots."""
    a = sparse.acquisition
    if a.time_steps != target.time_steps:
        raise ConfigurationError(
            f"time steps differ: sparse {a.time_steps}, target "
            f"{target.time_steps}")
    si = subsample_indices(target.n_sources, a.n_sources)
    ri = subsample_indices(target.n_receivers, a.n_receivers)
    values = np.zeros((target.n_sources, target.n_receivers, target.time_steps),
                      dtype=sparse.values.dtype)
    values[np.ix_(si, ri)] = sparse.values
    mask = np.zeros((target.n_sources, target.n_receivers), dtype=bool)
    mask[np.ix_(si, ri)] = True
    return InterleavedCube(values=values, mask=mask, acquisition=target)


def _interleave_axis(values: np.ndarray, axis: int, target_count: int) -> np.ndarray:
    idx = subsample_indices(target_count, values.shape[axis])
    shape = list(values.shape)
    shape[axis] = target_count
    out = np.zeros(shape, dtype=values.dtype)
    sl = [slice(None)] * values.ndim
    sl[axis] = idx
    out[tuple(sl)] = values
    return out


@dataclass
class UpscalerTrainConfig:
    epochs: int = 80
    lr: float = 2e-3
    lr_decay: float = 1.0   # per-epoch multiplicative decay
    batch_cubes: int = 4
    base_channels: int = 8
    seed: int = 0


@dataclass
class UpscalerModel:
    """Trained upscaler: networks, their store, and density metadata."""
    store: ParamStore
    recv_net: UpscalerNet
    src_net: UpscalerNet | None
    norm_scale: float
    in_density: tuple[int, int]     # (sources, receivers) of the sparse input
    out_density: tuple[int, int]
    time_steps: int


def _slices(values: np.ndarray, norm: float) -> np.ndarray:
    # (S, R, K) cube -> (S, 1, R, K) batch of single-channel images
    return (values / norm)[:, None, :, :].astype(np.float32)


def _train_one_net(inputs, labels, spec: UpscalerSpec, cfg: UpscalerTrainConfig,
                   seed: int):
    store, net = build_upscaler(spec, seed=seed)
    rng = np.random.default_rng(seed + 1)
    history = []
    n = len(inputs)
    lr = cfg.lr
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total, weight = 0.0, 0
        for start in range(0, n, cfg.batch_cubes):
            pick = order[start:start + cfg.batch_cubes]
            x = np.concatenate([inputs[i] for i in pick], axis=0)
            t = np.concatenate([labels[i] for i in pick], axis=0)
            store.zero_grads()
            y = net.forward(x)
            loss = mse_loss(y, t)
            net.backward(mse_loss_grad(y, t))
            store.mark_grads_ready()
            adam_step(store, lr=lr)
            total += loss * len(pick)
            weight += len(pick)
        history.append(total / weight)
        lr *= cfg.lr_decay
    return store, net, history


def train_upscaler(pairs, cfg: UpscalerTrainConfig):
    """Fit the separable upscaler on (sparse cube, dense label cube) pairs.

    Returns (UpscalerModel, loss history); with source upscaling the history
    is the receiver stage followed by the source stage.
    """
    if not pairs:
        raise DataError("train_upscaler needs at least one pair")
    sp0, dn0 = pairs[0]
    for sp, dn in pairs:
        if sp.values.shape != sp0.values.shape or dn.values.shape != dn0.values.shape:
            raise DataError("inconsistent cube shapes across training pairs")
        if sp.values.shape[2] != dn.values.shape[2]:
            raise DataError("sparse/dense time step mismatch in a pair")
    s_in, r_in, k = sp0.values.shape
    s_out, r_out, _ = dn0.values.shape
    src_idx = subsample_indices(s_out, s_in)
    subsample_indices(r_out, r_in)

    norm = max(max(float(np.abs(sp.values).max()),
                   float(np.abs(dn.values).max())) for sp, dn in pairs)
    if norm == 0.0:
        norm = 1.0

    # receiver stage: sparse receivers -> dense receivers at sparse sources
    recv_spec = plan_upscaler(r_out, k, cfg.base_channels)
    inputs = [_slices(_interleave_axis(sp.values, 1, r_out), norm)
              for sp, _ in pairs]
    labels = [_slices(dn.values[src_idx], norm) for _, dn in pairs]
    recv_store, recv_net, history = _train_one_net(inputs, labels, recv_spec,
                                                   cfg, cfg.seed)
    store = ParamStore()
    for p in recv_store:
        p.name = "recv." + p.name
        store.register(p)
    store.step_count = recv_store.step_count

    src_net = None
    if s_out != s_in:
        # source stage, trained on the restriction labels (teacher forcing):
        # per-receiver slices of the source x time plane
        src_spec = plan_upscaler(s_out, k, cfg.base_channels)
        inputs2 = [_slices(_interleave_axis(
            dn.values[src_idx].transpose(1, 0, 2), 1, s_out), norm)
            for _, dn in pairs]
        labels2 = [_slices(dn.values.transpose(1, 0, 2), norm) for _, dn in pairs]
        store2, src_net, hist2 = _train_one_net(inputs2, labels2, src_spec,
                                                cfg, cfg.seed + 1)
        for p in store2:
            p.name = "src." + p.name
            store.register(p)
        store.step_count += store2.step_count
        history = history + hist2

    model = UpscalerModel(store=store, recv_net=recv_net, src_net=src_net,
                          norm_scale=norm, in_density=(s_in, r_in),
                          out_density=(s_out, r_out), time_steps=k)
    return model, history


def upscale(model: UpscalerModel, sparse: WaveformCube,
            target: AcquisitionConfig) -> WaveformCube:
    """Interleave and run the trained network(s); dims match the target."""
    a = sparse.acquisition
    if ((a.n_sources, a.n_receivers) != model.in_density
            or (target.n_sources, target.n_receivers) != model.out_density
            or target.time_steps != model.time_steps):
        warnings.warn(
            f"density pair ({a.n_sources},{a.n_receivers})->"
            f"({target.n_sources},{target.n_receivers}) differs from the "
            f"trained pair {model.in_density}->{model.out_density}",
            stacklevel=2)
    x = _slices(_interleave_axis(sparse.values, 1, target.n_receivers),
                model.norm_scale)
    mid = model.recv_net.forward(x)[:, 0]
    if target.n_sources != a.n_sources:
        if model.src_net is None:
            raise ConfigurationError(
                "source upscaling requested but the model has no source stage")
        x2 = _interleave_axis(mid.transpose(1, 0, 2), 1, target.n_sources)
        mid = model.src_net.forward(x2[:, None].astype(np.float32))[:, 0]
        mid = mid.transpose(1, 0, 2)
    values = (mid * model.norm_scale).astype(np.float64)
    return WaveformCube(values=values, acquisition=target)
