"""Dense feed-forward networks with hand-rolled exact backprop.

Hidden layers use ReLU; the output layer is tanh (bounded policy heads) or
identity (value heads). Parameters live in plain numpy arrays and can be
flattened to a single vector, which is what federation and checkpointing
operate on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass
class Gradients:
    """Parameter gradients, shape-congruent with the owning network."""

    weights: list
    biases: list

    def global_norm(self) -> float:
        total = sum(float(np.sum(g * g)) for g in self.weights)
        total += sum(float(np.sum(g * g)) for g in self.biases)
        return float(np.sqrt(total))

    def scaled(self, factor: float) -> "Gradients":
        return Gradients([g * factor for g in self.weights],
                         [g * factor for g in self.biases])

    def clipped(self, max_norm: float) -> "Gradients":
        norm = self.global_norm()
        if norm <= max_norm or norm == 0.0:
            return self
        return self.scaled(max_norm / norm)


class Mlp:
    """Fully-connected net: affine layers, ReLU hidden, tanh/identity output."""

    def __init__(self, layer_sizes, output_activation="identity", rng=None):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output layers")
        if any(s < 1 for s in layer_sizes):
            raise ValueError("layer sizes must be >= 1")
        if output_activation not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {output_activation!r}")
        if rng is None:
            rng = np.random.default_rng()
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.output_activation = output_activation
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, fan_out))

    # ---------- inference ----------
    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x: np.ndarray):
        """Forward pass returning (output, cache) for a later backward call."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        a = np.atleast_2d(x)
        if a.shape[1] != self.layer_sizes[0]:
            raise ValueError(
                f"input width {a.shape[1]} != expected {self.layer_sizes[0]}")
        inputs = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            z = a @ w + b
            if i < last:
                a = np.maximum(z, 0.0)
            elif self.output_activation == "tanh":
                a = np.tanh(z)
            else:
                a = z
        out = a[0] if squeeze else a
        return out, (inputs, a, squeeze)

    def backward(self, cache, upstream: np.ndarray):
        """Exact gradients of sum(output * upstream) w.r.t. parameters and input.

        upstream has the output's shape; batch rows are summed into the
        parameter gradients. Returns (Gradients, input_gradient).
        """
        inputs, out, squeeze = cache
        up = np.atleast_2d(np.asarray(upstream, dtype=float))
        if up.shape != np.atleast_2d(out).shape:
            raise ValueError("upstream gradient shape mismatch")
        if self.output_activation == "tanh":
            delta = up * (1.0 - np.atleast_2d(out) ** 2)
        else:
            delta = up.copy()
        g_w = [None] * len(self.weights)
        g_b = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            a_in = inputs[i]
            g_w[i] = a_in.T @ delta
            g_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (a_in > 0)
            else:
                delta = delta @ self.weights[i].T
        d_input = delta[0] if squeeze else delta
        return Gradients(g_w, g_b), d_input

    # ---------- parameter access ----------
    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def get_flat(self) -> np.ndarray:
        parts = [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases]
        return np.concatenate(parts)

    def set_flat(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.parameter_count(),):
            raise ValueError("flat parameter vector has the wrong length")
        pos = 0
        for w in self.weights:
            w[...] = vec[pos:pos + w.size].reshape(w.shape)
            pos += w.size
        for b in self.biases:
            b[...] = vec[pos:pos + b.size]
            pos += b.size

    def copy(self) -> "Mlp":
        dup = Mlp.__new__(Mlp)
        dup.layer_sizes = list(self.layer_sizes)
        dup.output_activation = self.output_activation
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def all_finite(self) -> bool:
        return (all(np.isfinite(w).all() for w in self.weights)
                and all(np.isfinite(b).all() for b in self.biases))

    # ---------- persistence ----------
    def save(self, path):
        arrays = {f"w{i}": w for i, w in enumerate(self.weights)}
        arrays.update({f"b{i}": b for i, b in enumerate(self.biases)})
        np.savez(path, version=CHECKPOINT_VERSION,
                 layer_sizes=np.array(self.layer_sizes),
                 output_activation=self.output_activation, **arrays)

    @classmethod
    def load(cls, path) -> "Mlp":
        with np.load(path, allow_pickle=False) as data:
            version = int(data["version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            sizes = [int(s) for s in data["layer_sizes"]]
            net = cls.__new__(cls)
            net.layer_sizes = sizes
            net.output_activation = str(data["output_activation"])
            net.weights = [data[f"w{i}"].copy() for i in range(len(sizes) - 1)]
            net.biases = [data[f"b{i}"].copy() for i in range(len(sizes) - 1)]
        return net


def sgd_step(net: Mlp, grads: Gradients, lr: float):
    """In-place descent step theta <- theta - lr * g. Rejects non-finite gradients."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    for g in grads.weights + grads.biases:
        if not np.isfinite(g).all():
            raise ValueError("non-finite gradient")
    for w, g in zip(net.weights, grads.weights):
        w -= lr * g
    for b, g in zip(net.biases, grads.biases):
        b -= lr * g


def soft_update(target: Mlp, online: Mlp, blend: float):
    """In-place target blend: target <- blend*online + (1-blend)*target."""
    if not 0.0 <= blend <= 1.0:
        raise ValueError("blend coefficient must lie in [0, 1]")
    if target.layer_sizes != online.layer_sizes:
        raise ValueError("target and online shapes differ")
    for tw, ow in zip(target.weights, online.weights):
        tw *= 1.0 - blend
        tw += blend * ow
    for tb, ob in zip(target.biases, online.biases):
        tb *= 1.0 - blend
        tb += blend * ob
