"""Small dense networks with hand-written forward/backward passes, plus Adam.

Analytic gradients keep the training loop free of autodiff frameworks and
make finite-difference verification straightforward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACT_IDENTITY = "identity"
ACT_RELU = "relu"
ACT_SOFTMAX = "softmax"
_ACTIVATIONS = (ACT_IDENTITY, ACT_RELU, ACT_SOFTMAX)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


@dataclass
class DenseLayer:
    weight: np.ndarray  # (in_dim, out_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str = ACT_IDENTITY

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ValueError("layer weight/bias shapes disagree")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ValueError("layer parameters must be finite")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class DenseNetwork:
    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.weight.shape[1] != nxt.weight.shape[0]:
                raise ValueError("consecutive layer dimensions do not chain")
        for layer in self.layers[:-1]:
            if layer.activation == ACT_SOFTMAX:
                raise ValueError("softmax is only allowed as the final activation")

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    @classmethod
    def create(
        cls,
        dims: list[int],
        rng: np.random.Generator,
        hidden_activation: str = ACT_RELU,
        final_activation: str = ACT_IDENTITY,
    ) -> "DenseNetwork":
        """Glorot-normal weights, zero biases, seeded through `rng`."""
        if len(dims) < 2:
            raise ValueError("need an input and an output dimension")
        layers = []
        for idx, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
            scale = np.sqrt(2.0 / (fan_in + fan_out))
            weight = rng.normal(0.0, scale, size=(fan_in, fan_out))
            act = final_activation if idx == len(dims) - 2 else hidden_activation
            layers.append(DenseLayer(weight, np.zeros(fan_out), act))
        return cls(layers)

    @classmethod
    def create_identity_map(cls, dim: int, hidden: int, rng: np.random.Generator) -> "DenseNetwork":
        """Two-layer relu network that starts as the identity on R^dim.

        Uses relu(x) - relu(-x) = x, which needs hidden >= 2 * dim; extra
        hidden units start disconnected. Falls back to random initialization
        when the hidden layer is too narrow. Useful when inputs and outputs
        live in the same embedding space and training should begin from the
        do-nothing map.
        """
        if hidden < 2 * dim:
            return cls.create([dim, hidden, dim], rng)
        first = np.zeros((dim, hidden))
        first[:, :dim] = np.eye(dim)
        first[:, dim : 2 * dim] = -np.eye(dim)
        second = np.zeros((hidden, dim))
        second[:dim] = np.eye(dim)
        second[dim : 2 * dim] = -np.eye(dim)
        return cls(
            [
                DenseLayer(first, np.zeros(hidden), ACT_RELU),
                DenseLayer(second, np.zeros(dim), ACT_IDENTITY),
            ]
        )

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x: np.ndarray):
        """Returns the output and per-layer (input, pre-activation) caches."""
        value = np.asarray(x, dtype=np.float64)
        if value.ndim != 2 or value.shape[1] != self.in_dim:
            raise ValueError(
                f"input shape {value.shape} does not match in_dim {self.in_dim}"
            )
        caches = []
        for layer in self.layers:
            pre = value @ layer.weight + layer.bias
            caches.append((value, pre))
            if layer.activation == ACT_RELU:
                value = np.maximum(pre, 0.0)
            elif layer.activation == ACT_SOFTMAX:
                value = softmax_rows(pre)
            else:
                value = pre
        return value, caches

    def backward(self, caches, grad_output: np.ndarray, grad_is_logits: bool = False):
        """Analytic gradients from cached forward state.

        `grad_is_logits` means `grad_output` is already the gradient at the
        final pre-activation (the usual cross-entropy shortcut for a softmax
        head); a softmax final layer requires it.
        Returns (grad_input, [(grad_weight, grad_bias) per layer]).
        """
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)
        delta = np.asarray(grad_output, dtype=np.float64)
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            value_in, pre = caches[idx]
            if idx == len(self.layers) - 1 and grad_is_logits:
                dz = delta
            elif layer.activation == ACT_RELU:
                dz = delta * (pre > 0.0)
            elif layer.activation == ACT_IDENTITY:
                dz = delta
            else:
                raise ValueError("softmax backward requires grad_is_logits")
            grads[idx] = (value_in.T @ dz, dz.sum(axis=0))
            delta = dz @ layer.weight.T
        return delta, grads

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.weight)
            out.append(layer.bias)
        return out


@dataclass
class Adam:
    """Bias-corrected Adam over an explicit parameter list, updated in place."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    moments: list[np.ndarray] = field(default_factory=list)
    velocities: list[np.ndarray] = field(default_factory=list)
    steps: int = 0

    @classmethod
    def for_params(cls, params: list[np.ndarray], learning_rate: float) -> "Adam":
        opt = cls(learning_rate=learning_rate)
        opt.moments = [np.zeros_like(p) for p in params]
        opt.velocities = [np.zeros_like(p) for p in params]
        return opt

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(self.moments) or len(params) != len(grads):
            raise ValueError("parameter/gradient lists do not match the optimizer state")
        self.steps += 1
        correction1 = 1.0 - self.beta1**self.steps
        correction2 = 1.0 - self.beta2**self.steps
        for param, grad, m, v in zip(params, grads, self.moments, self.velocities):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(grad)
            m_hat = m / correction1
            v_hat = v / correction2
            param -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
