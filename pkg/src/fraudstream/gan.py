"""Vanilla and Wasserstein GAN oversamplers for the minority class.

One "epoch" is one generator update on a mini-batch; the W-GAN critic takes
``critic_steps`` updates before each generator update.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .balance import class_roles, n_to_generate
from .core import derive_seed, seeded_rng
from .exceptions import ConfigError, TrainingDivergedError
from .nn import Adam, DenseNet, Layer, RMSProp

VGAN_DISCRIMINATOR = (128, 64, 32, 8)
WGAN_CRITIC = (256, 128, 64, 32)
_MAGIC = b"FSGEN\x00\x00\x01"
_ACT_CODES = {"leaky_relu": 0, "sigmoid": 1, "tanh": 2, "linear": 3}


@dataclass(frozen=True)
class GanConfig:
    latent_dim: int = 32
    epochs: int = 10_000
    batch_size: int = 64
    learning_rate: float = 2e-4
    variant: str = "vanilla"
    wgan_clip: float = 0.01
    critic_steps: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.variant not in ("vanilla", "wasserstein"):
            raise ConfigError(f"unknown GAN variant {self.variant!r}")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if self.wgan_clip <= 0:
            raise ConfigError("wgan_clip must be positive")
        if self.latent_dim < 1 or self.batch_size < 1 or self.critic_steps < 1:
            raise ConfigError("latent_dim, batch_size and critic_steps must be positive")


@dataclass
class GeneratorModel:
    net: DenseNet
    latent_dim: int
    history: dict = field(default_factory=dict)

    @property
    def data_dim(self):
        return self.net.output_dim


def build_generator(data_dim, cfg: GanConfig) -> DenseNet:
    hidden = VGAN_DISCRIMINATOR[:3][::-1] if cfg.variant == "vanilla" else WGAN_CRITIC[:3][::-1]
    sizes = (cfg.latent_dim, *hidden, data_dim)
    return DenseNet.build(sizes, "leaky_relu", "sigmoid", seed=derive_seed(cfg.seed, 1))


def build_discriminator(data_dim, cfg: GanConfig) -> DenseNet:
    if cfg.variant == "vanilla":
        return DenseNet.build((data_dim, *VGAN_DISCRIMINATOR, 1), "leaky_relu", "sigmoid",
                              seed=derive_seed(cfg.seed, 2))
    return DenseNet.build((data_dim, *WGAN_CRITIC, 1), "leaky_relu", "linear",
                          seed=derive_seed(cfg.seed, 2))


def _softplus(z):
    return np.logaddexp(0.0, z)


def _check_finite(value, epoch):
    if not np.isfinite(value):
        raise TrainingDivergedError("GAN loss became non-finite", epoch=epoch)


def _clip_(net: DenseNet, c):
    for p in net.params():
        np.clip(p, -c, c, out=p)


def train_gan(minority, cfg: GanConfig = GanConfig(), monitor=None) -> GeneratorModel:
    """Train a generator on minority rows already scaled into [0, 1].

    ``monitor(epoch, discriminator)`` is called after every discriminator or
    critic update, mainly for invariant checks in tests.
    """
    data = np.asarray(minority, dtype=np.float64)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    if len(data) == 0:
        raise ConfigError("GAN training needs at least one minority record")
    if data.min() < 0.0 or data.max() > 1.0:
        raise ConfigError("GAN inputs must be normalised into [0, 1]")

    gen = build_generator(data.shape[1], cfg)
    disc = build_discriminator(data.shape[1], cfg)
    rng = seeded_rng(derive_seed(cfg.seed, 3))
    B = cfg.batch_size
    if cfg.variant == "vanilla":
        g_opt = Adam(gen.params(), lr=cfg.learning_rate, beta1=0.5)
        d_opt = Adam(disc.params(), lr=cfg.learning_rate, beta1=0.5)
    else:
        g_opt = RMSProp(gen.params(), lr=cfg.learning_rate)
        d_opt = RMSProp(disc.params(), lr=cfg.learning_rate)
    d_losses, g_losses = [], []
    d_range = [1.0, 0.0]

    def real_batch():
        return data[rng.integers(0, len(data), size=B)]

    def noise():
        return rng.standard_normal((B, cfg.latent_dim))

    for epoch in range(cfg.epochs):
        if cfg.variant == "vanilla":
            both = np.vstack([real_batch(), gen.forward(noise())])
            target = np.repeat([1.0, 0.0], B)[:, None]
            p_both = disc.forward(both)
            logits = _logit(disc)
            grads, _ = disc.backward((p_both - target) / B, pre_activation=True)
            d_loss = float(np.mean(_softplus(-logits[:B])) + np.mean(_softplus(logits[B:])))
            _check_finite(d_loss, epoch)
            d_opt.step(grads)
            d_range[0] = min(d_range[0], float(p_both.min()))
            d_range[1] = max(d_range[1], float(p_both.max()))
            if monitor is not None:
                monitor(epoch, disc)

            fake = gen.forward(noise())
            p = disc.forward(fake)
            g_loss = float(np.mean(_softplus(-_logit(disc))))
            _check_finite(g_loss, epoch)
            _, grad_in = disc.backward((p - 1.0) / B, pre_activation=True)
            g_grads, _ = gen.backward(grad_in)
            g_opt.step(g_grads)
        else:
            sign = np.repeat([-1.0, 1.0], B)[:, None] / B
            for _ in range(cfg.critic_steps):
                c_both = disc.forward(np.vstack([real_batch(), gen.forward(noise())]))
                grads, _ = disc.backward(sign)
                d_loss = float(c_both[B:].mean() - c_both[:B].mean())
                _check_finite(d_loss, epoch)
                d_opt.step(grads)
                _clip_(disc, cfg.wgan_clip)
                if monitor is not None:
                    monitor(epoch, disc)
            fake = gen.forward(noise())
            c = disc.forward(fake)
            g_loss = float(-c.mean())
            _check_finite(g_loss, epoch)
            _, grad_in = disc.backward(np.full_like(c, -1.0 / B))
            g_grads, _ = gen.backward(grad_in)
            g_opt.step(g_grads)
        d_losses.append(d_loss)
        g_losses.append(g_loss)

    history = {"d_loss": d_losses, "g_loss": g_losses}
    if cfg.variant == "vanilla":
        history["d_output_range"] = tuple(d_range)
    return GeneratorModel(gen, cfg.latent_dim, history)


def _logit(net: DenseNet):
    return net._cache[1][-1]


def generate_samples(gen: GeneratorModel, n: int, seed: int = 0) -> np.ndarray:
    if n < 0:
        raise ConfigError("n must be non-negative")
    if n == 0:
        return np.empty((0, gen.data_dim))
    z = seeded_rng(seed).standard_normal((n, gen.latent_dim))
    return gen.net.forward(z)


def save_generator(gen: GeneratorModel, path) -> None:
    """Write ``gen`` in the flat binary format described in the README."""
    layers = gen.net.layers
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", gen.latent_dim, len(layers)))
        for layer in layers:
            fh.write(struct.pack("<III", layer.W.shape[0], layer.W.shape[1], _ACT_CODES[layer.activation]))
        for layer in layers:
            fh.write(layer.W.astype("<f8").tobytes(order="C"))
            fh.write(layer.b.astype("<f8").tobytes())


def load_generator(path) -> GeneratorModel:
    codes = {v: k for k, v in _ACT_CODES.items()}
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a generator file")
        latent_dim, n_layers = struct.unpack("<II", fh.read(8))
        shapes = [struct.unpack("<III", fh.read(12)) for _ in range(n_layers)]
        layers = []
        for fan_in, fan_out, code in shapes:
            W = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8").reshape(fan_in, fan_out)
            b = np.frombuffer(fh.read(8 * fan_out), dtype="<f8")
            layers.append(Layer(W.astype(np.float64), b.astype(np.float64), codes[code]))
    return GeneratorModel(DenseNet(layers), latent_dim)


class GANOversampler(BaseEstimator):
    """Append GAN-generated minority rows until ``target_ratio`` is reached."""

    def __init__(self, variant="vanilla", epochs=2000, latent_dim=32, batch_size=64,
                 learning_rate=2e-4, wgan_clip=0.01, critic_steps=5, target_ratio=1.0, seed=0):
        self.variant = variant
        self.epochs = epochs
        self.latent_dim = latent_dim
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.wgan_clip = wgan_clip
        self.critic_steps = critic_steps
        self.target_ratio = target_ratio
        self.seed = seed

    def fit_resample(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        minority, _ = class_roles(y)
        n_new = n_to_generate(y, self.target_ratio)
        cfg = GanConfig(self.latent_dim, self.epochs, self.batch_size, self.learning_rate,
                        self.variant, self.wgan_clip, self.critic_steps, self.seed)
        self.generator_ = train_gan(X[y == minority], cfg)
        synth = generate_samples(self.generator_, n_new, seed=derive_seed(self.seed, 4))
        return (
            np.vstack([X, synth]),
            np.concatenate([y, np.full(n_new, minority, dtype=np.int64)]),
        )
