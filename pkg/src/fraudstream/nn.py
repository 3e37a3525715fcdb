"""Dense feed-forward network with manual backpropagation.

Batches are row-major ``(n, dim)`` float64 arrays. ``forward`` caches the
activations that ``backward`` needs, so calls must alternate.
"""

from __future__ import annotations

import numpy as np

from .core import seeded_rng
from .exceptions import DimensionError

LEAKY_ALPHA = 0.2
ACTIVATIONS = ("leaky_relu", "sigmoid", "tanh", "linear")


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(name, z):
    if name == "leaky_relu":
        return np.maximum(z, LEAKY_ALPHA * z)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name, z, a):
    if name == "leaky_relu":
        return np.where(z > 0, 1.0, LEAKY_ALPHA)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


class Layer:
    __slots__ = ("W", "b", "activation")

    def __init__(self, W, b, activation):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.W = np.asarray(W, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64).reshape(-1)
        if self.W.shape[1] != self.b.shape[0]:
            raise DimensionError("bias length must equal layer output width")
        self.activation = activation


class DenseNet:
    def __init__(self, layers):
        self.layers = list(layers)
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.W.shape[1] != nxt.W.shape[0]:
                raise DimensionError(
                    f"layer widths do not chain: {prev.W.shape} -> {nxt.W.shape}"
                )
        self._cache = None

    @classmethod
    def build(cls, sizes, hidden_activation, output_activation, seed=0):
        """Glorot-uniform initialised net with layer widths ``sizes``."""
        rng = seeded_rng(seed)
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            act = output_activation if i == len(sizes) - 2 else hidden_activation
            layers.append(Layer(rng.uniform(-limit, limit, (fan_in, fan_out)), np.zeros(fan_out), act))
        return cls(layers)

    @property
    def input_dim(self):
        return self.layers[0].W.shape[0]

    @property
    def output_dim(self):
        return self.layers[-1].W.shape[1]

    def params(self):
        """Flat list ``[W0, b0, W1, b1, ...]`` of live parameter arrays."""
        out = []
        for layer in self.layers:
            out.extend((layer.W, layer.b))
        return out

    def copy(self):
        return DenseNet([Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers])

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x.reshape(1, -1)
        if x.shape[1] != self.input_dim:
            raise DimensionError(f"input has dim {x.shape[1]}, net expects {self.input_dim}")
        inputs, pre, post = [], [], []
        a = x
        for layer in self.layers:
            inputs.append(a)
            z = a @ layer.W + layer.b
            a = _activate(layer.activation, z)
            pre.append(z)
            post.append(a)
        self._cache = (inputs, pre, post)
        return a[0] if single else a

    def backward(self, grad_output, pre_activation=False):
        """Parameter gradients for the last ``forward`` batch.

        ``grad_output`` is dL/d(output); with ``pre_activation=True`` it is
        taken as dL/d(final pre-activation), which keeps sigmoid plus
        cross-entropy numerically stable. Returns ``(param_grads, grad_input)``
        with ``param_grads`` aligned to ``params()``.
        """
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        inputs, pre, post = self._cache
        g = np.asarray(grad_output, dtype=np.float64)
        if g.ndim == 1:
            g = g.reshape(1, -1)
        grads = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if not (pre_activation and i == len(self.layers) - 1):
                g = g * _activation_grad(layer.activation, pre[i], post[i])
            grads[2 * i] = inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ layer.W.T
        return grads, g


class Adam:
    def __init__(self, params, lr=2e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class RMSProp:
    def __init__(self, params, lr=2e-4, decay=0.9, eps=1e-8):
        self.params = params
        self.lr, self.decay, self.eps = lr, decay, eps
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        for p, g, v in zip(self.params, grads, self.v):
            v *= self.decay
            v += (1.0 - self.decay) * g * g
            p -= self.lr * g / (np.sqrt(v) + self.eps)


class SGD:
    def __init__(self, params, lr=0.1):
        self.params = params
        self.lr = lr

    def step(self, grads):
        for p, g in zip(self.params, grads):
            p -= self.lr * g
