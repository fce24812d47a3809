"""Waveform-to-speed-map reconstruction.

A learnable source-mixing front end collapses the I source slices of a cube
to E encoded channels (optionally sign-scrambled by a fresh Rademacher mask
each training step — the wave data is linear in its sources, so random sign
combinations are valid training views). The encoded (receivers x time)
planes run through a convolutional encoder that strides down to a 1x1
latent, then a transposed-conv decoder up to the n x n map, each decoder
stage optionally followed by a channel-gating block. A final 1x1 conv +
tanh lands in [-1, 1], mapped affinely onto the configured speed range, so
reconstructions can never leave it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError, StateError
from .nn import (Conv2d, ConvTranspose2d, InstanceNorm, Layer, LayerSpec,
                 LeakyReLU, ParamStore, Param, SEBlock, Tanh, adam_step,
                 mse_loss, mse_loss_grad)
from .phantoms import SosMap
from .wavesim import WaveformCube


@dataclass(frozen=True)
class SourceEncodingSpec:
    input_sources: int
    encoded_channels: int
    random_mask: bool = True

    def __post_init__(self):
        if not 1 <= self.encoded_channels <= self.input_sources:
            raise ConfigurationError(
                f"encoded channels must satisfy 1 <= E <= {self.input_sources}, "
                f"got {self.encoded_channels}")


def encode_sources(cube, weights: np.ndarray, mask=None) -> np.ndarray:
    """out[e] = sum_i weights[e, i] * mask[i] * cube[i]; linear in the cube.

    Accepts (I, R, K) or batched (B, I, R, K) arrays.
    """
    vals = np.asarray(getattr(cube, "values", cube))
    w = np.asarray(weights)
    batched = vals.ndim == 4
    x = vals if batched else vals[None]
    if x.shape[1] != w.shape[1]:
        raise ConfigurationError(
            f"cube has {x.shape[1]} sources, weights expect {w.shape[1]}")
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != (w.shape[1],):
            raise ConfigurationError(
                f"mask shape {mask.shape} != ({w.shape[1]},)")
        x = x * mask[None, :, None, None]
    out = np.einsum("ei,birk->berk", w, x, optimize=True)
    return out if batched else out[0]


class SourceEncoder(Layer):
    """Learnable E x I mixing with an optional per-step sign mask."""

    def __init__(self, name, spec: SourceEncodingSpec, *, rng,
                 dtype=np.float32):
        super().__init__(name)
        self.spec = spec
        i, e = spec.input_sources, spec.encoded_channels
        bound = np.sqrt(1.0 / i)
        self.w = Param(f"{name}.w",
                       rng.uniform(-bound, bound, size=(e, i)).astype(dtype))
        self.mask: np.ndarray | None = None

    def params(self):
        return [self.w]

    def set_mask(self, mask: np.ndarray | None) -> None:
        self.mask = None if mask is None else np.asarray(mask)

    def _forward(self, x):
        if x.shape[1] != self.spec.input_sources:
            raise ConfigurationError(
                f"cube has {x.shape[1]} sources, encoder expects "
                f"{self.spec.input_sources}")
        xm = x if self.mask is None else \
            x * self.mask[None, :, None, None].astype(x.dtype)
        self._cache = xm
        return np.einsum("ei,birk->berk", self.w.value, xm, optimize=True)

    def _backward(self, dy):
        xm = self._cache
        self.w.grad += np.einsum("berk,birk->ei", dy, xm, optimize=True)
        dx = np.einsum("ei,berk->birk", self.w.value, dy, optimize=True)
        if self.mask is not None:
            dx = dx * self.mask[None, :, None, None].astype(dx.dtype)
        return dx


@dataclass(frozen=True)
class InversionNetSpec:
    """Derived block lists for the encoder/decoder plus the output mapping."""
    in_channels: int
    input_hw: tuple[int, int]
    map_n: int
    speed_range: tuple[float, float]
    base_channels: int = 8
    channel_cap: int = 64
    se_enabled: bool = False
    se_reduction: int = 4
    encoder_blocks: tuple[LayerSpec, ...] = field(init=False)
    decoder_blocks: tuple[LayerSpec, ...] = field(init=False)

    def __post_init__(self):
        n = self.map_n
        if n < 2 or (n & (n - 1)) != 0:
            raise ConfigurationError(
                f"decoder cannot reach {n}x{n}: map size must be a power of 2")
        c_min, c_max = self.speed_range
        if c_min >= c_max:
            raise ConfigurationError(f"bad speed range {self.speed_range}")
        object.__setattr__(self, "encoder_blocks", self._plan_encoder())
        object.__setattr__(self, "decoder_blocks", self._plan_decoder())

    def _plan_encoder(self):
        blocks = []
        h, w = self.input_hw
        c_in = self.in_channels
        stage = 0
        while (h, w) != (1, 1):
            ks, ss, ps = [], [], []
            for ext in (h, w):
                if ext == 1:
                    ks.append(1), ss.append(1), ps.append(0)
                elif ext % 2 == 0:
                    ks.append(4), ss.append(2), ps.append(1)
                else:
                    ks.append(3), ss.append(2), ps.append(1)
            c_out = min(self.channel_cap, self.base_channels * 2 ** stage)
            blocks.append(LayerSpec(kind="conv", in_channels=c_in,
                                    out_channels=c_out,
                                    kernel=(ks[0], ks[1]),
                                    stride=(ss[0], ss[1]),
                                    padding=(ps[0], ps[1])))
            h = (h + 2 * ps[0] - ks[0]) // ss[0] + 1
            w = (w + 2 * ps[1] - ks[1]) // ss[1] + 1
            c_in = c_out
            stage += 1
            if stage > 64:
                raise ConfigurationError(
                    f"encoder does not reach 1x1 from {self.input_hw}")
        return tuple(blocks)

    def _plan_decoder(self):
        n_stages = int(np.log2(self.map_n))
        c_in = self.encoder_blocks[-1].out_channels
        blocks = []
        for i in range(n_stages):
            # taper channels toward the output, never below base_channels
            c_out = max(self.base_channels,
                        c_in // (2 if i % 2 == 1 else 1))
            blocks.append(LayerSpec(kind="conv_transpose", in_channels=c_in,
                                    out_channels=c_out, kernel=4, stride=2,
                                    padding=1))
            c_in = c_out
        return tuple(blocks)


class InversionNet:
    """Strided conv encoder to a 1x1 latent, transposed-conv decoder to n x n."""

    def __init__(self, spec: InversionNetSpec, *, rng, dtype=np.float32,
                 zero_init_output=True):
        self.spec = spec
        self.enc_stages = []
        h, w = spec.input_hw
        for i, ls in enumerate(spec.encoder_blocks):
            conv = Conv2d(f"enc{i}", ls.in_channels, ls.out_channels,
                          ls.kernel, ls.stride, ls.padding, rng=rng, dtype=dtype)
            h, w = _conv_hw((h, w), ls)
            # normalizing tiny maps wipes out their information (2 samples
            # normalize to bare signs), so small late stages skip the norm
            norm = InstanceNorm(f"enc{i}.norm", ls.out_channels, dtype=dtype) \
                if h * w >= 16 else None
            self.enc_stages.append((conv, norm, LeakyReLU(f"enc{i}.act")))
        self.dec_stages = []
        h, w = 1, 1
        for i, ls in enumerate(spec.decoder_blocks):
            convT = ConvTranspose2d(f"dec{i}", ls.in_channels, ls.out_channels,
                                    ls.kernel, ls.stride, ls.padding,
                                    rng=rng, dtype=dtype)
            h, w = 2 * h, 2 * w
            norm = InstanceNorm(f"dec{i}.norm", ls.out_channels, dtype=dtype) \
                if h * w >= 16 else None
            se = SEBlock(f"dec{i}.se", ls.out_channels, spec.se_reduction,
                         rng=rng, dtype=dtype) if spec.se_enabled else None
            self.dec_stages.append((convT, norm, LeakyReLU(f"dec{i}.act"), se))
        c_last = spec.decoder_blocks[-1].out_channels
        self.out_conv = Conv2d("out", c_last, 1, 1, 1, 0, rng=rng, dtype=dtype,
                               zero_init=zero_init_output)
        self.out_act = Tanh("out.act")

    def params(self):
        ps = []
        for conv, norm, _ in self.enc_stages:
            ps.extend(conv.params())
            if norm is not None:
                ps.extend(norm.params())
        for convT, norm, _, se in self.dec_stages:
            ps.extend(convT.params())
            if norm is not None:
                ps.extend(norm.params())
            if se is not None:
                ps.extend(se.params())
        ps.extend(self.out_conv.params())
        return ps

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = x
        for conv, norm, act in self.enc_stages:
            h = conv.forward(h)
            if norm is not None:
                h = norm.forward(h)
            h = act.forward(h)
        for convT, norm, act, se in self.dec_stages:
            h = convT.forward(h)
            if norm is not None:
                h = norm.forward(h)
            h = act.forward(h)
            if se is not None:
                h = se.forward(h)
        return self.out_act.forward(self.out_conv.forward(h))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        g = self.out_conv.backward(self.out_act.backward(dy))
        for convT, norm, act, se in reversed(self.dec_stages):
            if se is not None:
                g = se.backward(g)
            g = act.backward(g)
            if norm is not None:
                g = norm.backward(g)
            g = convT.backward(g)
        for conv, norm, act in reversed(self.enc_stages):
            g = act.backward(g)
            if norm is not None:
                g = norm.backward(g)
            g = conv.backward(g)
        return g


def _conv_hw(shape, ls: LayerSpec):
    from .nn.functional import _pair
    kh, kw = _pair(ls.kernel)
    sh, sw = _pair(ls.stride)
    ph, pw = _pair(ls.padding)
    return ((shape[0] + 2 * ph - kh) // sh + 1,
            (shape[1] + 2 * pw - kw) // sw + 1)


def build_inversionnet(spec: InversionNetSpec, seed: int = 0,
                       dtype=np.float32, zero_init_output: bool = True
                       ) -> tuple[ParamStore, InversionNet]:
    rng = np.random.default_rng(seed)
    net = InversionNet(spec, rng=rng, dtype=dtype,
                       zero_init_output=zero_init_output)
    store = ParamStore()
    store.register_all(net.params())
    return store, net


class FwiNet:
    """Source encoder + inversion network as one differentiable model."""

    def __init__(self, enc_spec: SourceEncodingSpec, net_spec: InversionNetSpec,
                 *, rng, dtype=np.float32, zero_init_output=True):
        self.encoder = SourceEncoder("mix", enc_spec, rng=rng, dtype=dtype)
        self.net = InversionNet(net_spec, rng=rng, dtype=dtype,
                                zero_init_output=zero_init_output)

    def params(self):
        return self.encoder.params() + self.net.params()

    def forward(self, x):
        return self.net.forward(self.encoder.forward(x))

    def backward(self, dy):
        return self.encoder.backward(self.net.backward(dy))


def build_fwi(enc_spec: SourceEncodingSpec, net_spec: InversionNetSpec,
              seed: int = 0, dtype=np.float32, zero_init_output: bool = True
              ) -> tuple[ParamStore, FwiNet]:
    rng = np.random.default_rng(seed)
    net = FwiNet(enc_spec, net_spec, rng=rng, dtype=dtype,
                 zero_init_output=zero_init_output)
    store = ParamStore()
    store.register_all(net.params())
    return store, net


@dataclass
class FwiTrainConfig:
    speed_range: tuple[float, float]
    epochs: int = 150
    lr: float = 1e-3
    lr_decay: float = 1.0   # per-epoch multiplicative decay
    batch: int = 4
    seed: int = 0
    encoded_channels: int = 4
    random_mask: bool = True
    se_enabled: bool = False
    se_reduction: int = 4
    base_channels: int = 8
    channel_cap: int = 64


@dataclass
class FwiModel:
    store: ParamStore
    net: FwiNet
    enc_spec: SourceEncodingSpec
    net_spec: InversionNetSpec
    norm_scale: float
    map_dx: float
    in_density: tuple[int, int]

    def _denorm(self, y: np.ndarray) -> np.ndarray:
        c_min, c_max = self.net_spec.speed_range
        mid, half = 0.5 * (c_min + c_max), 0.5 * (c_max - c_min)
        return mid + half * y.astype(np.float64)


def _normalize_labels(maps, speed_range):
    c_min, c_max = speed_range
    mid, half = 0.5 * (c_min + c_max), 0.5 * (c_max - c_min)
    return np.stack([(m.values - mid) / half for m in maps])[:, None].astype(
        np.float32)


def train_fwi(pairs, cfg: FwiTrainConfig):
    """Adam on mean squared map error over (waveform cube, map label) pairs."""
    if not pairs:
        raise DataError("train_fwi needs at least one pair")
    cube0, map0 = pairs[0]
    s, r, k = cube0.values.shape
    for cube, sos in pairs:
        if cube.values.shape != (s, r, k):
            raise DataError("inconsistent cube shapes across training pairs")
        if sos.values.shape != map0.values.shape:
            raise DataError("inconsistent map shapes across training pairs")

    norm = max(float(np.abs(c.values).max()) for c, _ in pairs) or 1.0
    x_all = np.stack([c.values for c, _ in pairs]).astype(np.float32)
    x_all /= np.float32(norm)
    t_all = _normalize_labels([m for _, m in pairs], cfg.speed_range)

    enc_spec = SourceEncodingSpec(input_sources=s,
                                  encoded_channels=min(cfg.encoded_channels, s),
                                  random_mask=cfg.random_mask)
    net_spec = InversionNetSpec(in_channels=enc_spec.encoded_channels,
                                input_hw=(r, k), map_n=map0.n,
                                speed_range=cfg.speed_range,
                                base_channels=cfg.base_channels,
                                channel_cap=cfg.channel_cap,
                                se_enabled=cfg.se_enabled,
                                se_reduction=cfg.se_reduction)
    store, net = build_fwi(enc_spec, net_spec, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed + 1)

    history = []
    n = len(pairs)
    lr = cfg.lr
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total, weight = 0.0, 0
        for start in range(0, n, cfg.batch):
            pick = order[start:start + cfg.batch]
            if cfg.random_mask:
                mask = rng.integers(0, 2, size=s) * 2 - 1
                net.encoder.set_mask(mask)
            x, t = x_all[pick], t_all[pick]
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
    net.encoder.set_mask(None)

    model = FwiModel(store=store, net=net, enc_spec=enc_spec,
                     net_spec=net_spec, norm_scale=norm, map_dx=map0.dx,
                     in_density=(s, r))
    return model, history


def reconstruct(model: FwiModel, cube: WaveformCube) -> SosMap:
    """Deterministic inference: sign mask disabled, output in the speed range."""
    a = cube.acquisition
    if (a.n_sources, a.n_receivers) != model.in_density:
        warnings.warn(
            f"cube density ({a.n_sources},{a.n_receivers}) differs from the "
            f"trained density {model.in_density}", stacklevel=2)
    model.net.encoder.set_mask(None)
    x = (cube.values[None] / model.norm_scale).astype(np.float32)
    y = model.net.forward(x)
    return SosMap(values=model._denorm(y[0, 0]), dx=model.map_dx)
