"""Dense MLPs with hand-written reverse-mode gradients, ADAM and Polyak averaging.

Everything is float64. Inputs may be a single vector of shape ``(n_in,)`` or a
batch of shape ``(batch, n_in)``; parameter gradients are summed over the batch
rows so callers decide how to average.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

HEADS = ("linear", "softmax", "tanh")


class DimensionError(ValueError):
    """Raised when an array does not match the size a network expects."""

    def __init__(self, what: str, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected size {expected}, got {actual}")


class NonFiniteError(ValueError):
    pass


@dataclass
class Mlp:
    """Fully connected network, ReLU between layers.

    ``weights[k]`` has shape ``(layer_sizes[k+1], layer_sizes[k])``. The output
    head is one of ``linear``, ``softmax`` or ``tanh`` (scaled by ``bound``).
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str = "linear"
    bound: float = 1.0
    hidden_activation: str = "relu"

    def __post_init__(self):
        self.layer_sizes = [int(n) for n in self.layer_sizes]
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"bad layer sizes {self.layer_sizes}")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        if self.hidden_activation != "relu":
            raise ValueError("only relu hidden activations are supported")
        if self.head == "tanh" and not self.bound > 0:
            raise ValueError("tanh head needs a positive bound")
        n = len(self.layer_sizes) - 1
        if len(self.weights) != n or len(self.biases) != n:
            raise ValueError("need one weight matrix and bias per layer")
        for k in range(n):
            shape = (self.layer_sizes[k + 1], self.layer_sizes[k])
            self.weights[k] = np.asarray(self.weights[k], dtype=np.float64)
            self.biases[k] = np.asarray(self.biases[k], dtype=np.float64)
            if self.weights[k].shape != shape:
                raise DimensionError(f"weights[{k}]", shape, self.weights[k].shape)
            if self.biases[k].shape != (shape[0],):
                raise DimensionError(f"biases[{k}]", (shape[0],), self.biases[k].shape)

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Mlp":
        return Mlp(list(self.layer_sizes), [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases], self.head, self.bound)

    def same_architecture(self, other: "Mlp") -> bool:
        return (self.layer_sizes == other.layer_sizes and self.head == other.head
                and self.bound == other.bound)

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params(),):
            raise DimensionError("flat parameter vector", self.n_params(), theta.shape)
        i = 0
        for p in self.params():
            p[...] = theta[i:i + p.size].reshape(p.shape)
            i += p.size

    def digest(self) -> str:
        """SHA-1 of the raw parameter bytes; equal digests mean bitwise-equal nets."""
        h = hashlib.sha1()
        for p in self.params():
            h.update(np.ascontiguousarray(p).tobytes())
        return h.hexdigest()

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)


def init_mlp(layer_sizes: Sequence[int], head: str = "linear", bound: float = 1.0,
             seed=None) -> Mlp:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
    rng = np.random.default_rng(seed)
    sizes = [int(n) for n in layer_sizes]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-lim, lim, size=fan_out))
    return Mlp(sizes, weights, biases, head=head, bound=bound)


def zeros_like_mlp(net: Mlp) -> Mlp:
    return Mlp(list(net.layer_sizes), [np.zeros_like(w) for w in net.weights],
               [np.zeros_like(b) for b in net.biases], net.head, net.bound)


@dataclass
class Gradient:
    """Per-layer parameter gradients, congruent with one Mlp."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros(cls, net: Mlp) -> "Gradient":
        return cls([np.zeros_like(w) for w in net.weights],
                   [np.zeros_like(b) for b in net.biases])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def __add__(self, other: "Gradient") -> "Gradient":
        return Gradient([a + b for a, b in zip(self.weights, other.weights)],
                        [a + b for a, b in zip(self.biases, other.biases)])

    def scale(self, c: float) -> "Gradient":
        return Gradient([c * w for w in self.weights], [c * b for b in self.biases])

    def congruent(self, net: Mlp) -> bool:
        return (len(self.weights) == net.n_layers
                and all(g.shape == w.shape for g, w in zip(self.weights, net.weights))
                and all(g.shape == b.shape for g, b in zip(self.biases, net.biases)))


def mean_gradient(grads: Sequence[Gradient]) -> Gradient:
    """Arithmetic mean, summed in the given order."""
    if not grads:
        raise ValueError("no gradients to average")
    total = grads[0]
    for g in grads[1:]:
        total = total + g
    return total.scale(1.0 / len(grads))


def _as_batch(net: Mlp, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != net.n_in:
        raise DimensionError("network input", net.n_in, x.shape[-1] if x.ndim else x.shape)
    return xb, single


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def forward_cache(net: Mlp, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Forward pass that also returns the per-layer activations for `backward`.

    The cache holds the input to every layer followed by the final
    pre-activation (logits).
    """
    a, single = _as_batch(net, x)
    cache = [a]
    last = net.n_layers - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        # in-place bias and relu: fresh large temporaries cost more than the adds
        z = a @ w.T
        z += b
        if k < last:
            a = np.maximum(z, 0.0, out=z)
        cache.append(z)
    z = cache[-1]
    if net.head == "linear":
        y = z
    elif net.head == "softmax":
        y = _softmax(z)
    else:
        y = net.bound * np.tanh(z)
    return (y[0] if single else y), cache


def forward(net: Mlp, x) -> np.ndarray:
    return forward_cache(net, x)[0]


def backward(net: Mlp, x, loss_grad, cache=None, param_grads: bool = True
             ) -> tuple[Gradient | None, np.ndarray]:
    """Pull ``loss_grad`` (dL/d output) back through the network.

    Returns ``(param_grad, input_grad)``. For batched input the parameter
    gradient is the sum over rows and the input gradient keeps the batch shape.
    Pass ``param_grads=False`` when only the input gradient is needed.
    """
    xb, single = _as_batch(net, x)
    g = np.asarray(loss_grad, dtype=np.float64)
    g = g[None, :] if g.ndim == 1 else g
    if g.shape != (xb.shape[0], net.n_out):
        raise DimensionError("loss gradient", (xb.shape[0], net.n_out), g.shape)
    if not (np.all(np.isfinite(xb)) and np.all(np.isfinite(g))):
        raise NonFiniteError("backward received non-finite input or loss gradient")
    if cache is None:
        _, cache = forward_cache(net, xb)
    z = cache[-1]
    if net.head == "softmax":
        p = _softmax(z)
        g = p * (g - np.sum(g * p, axis=1, keepdims=True))
    elif net.head == "tanh":
        t = np.tanh(z)
        g = g * net.bound * (1.0 - t * t)

    dw = [None] * net.n_layers
    db = [None] * net.n_layers
    for k in range(net.n_layers - 1, -1, -1):
        a_prev = cache[k]
        if param_grads:
            dw[k] = g.T @ a_prev
            db[k] = g.sum(axis=0)
        g = g @ net.weights[k]
        if k > 0:
            # relu'(0) is taken as 0
            np.multiply(g, a_prev > 0.0, out=g)
    grad = Gradient(dw, db) if param_grads else None
    return grad, (g[0] if single else g)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, **kw) -> "AdamState":
        return cls([np.zeros_like(p) for p in net.params()],
                   [np.zeros_like(p) for p in net.params()], **kw)

    def copy(self) -> "AdamState":
        return AdamState([m.copy() for m in self.m], [v.copy() for v in self.v],
                         self.step_count, self.beta1, self.beta2, self.epsilon)


def adam_arrays(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
                state: AdamState, lr: float) -> None:
    """Bias-corrected ADAM descent step on raw arrays, in place."""
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if len(grads) != len(state.m) or any(g.shape != m.shape for g, m in zip(grads, state.m)):
        raise DimensionError("gradient", [m.shape for m in state.m], [g.shape for g in grads])
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NonFiniteError("non-finite gradient; no update applied")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        # one scratch buffer per array keeps the hot loop allocation-light
        tmp = np.multiply(g, 1.0 - b1)
        m *= b1
        m += tmp
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - b2
        v *= b2
        v += tmp
        np.multiply(v, 1.0 / c2, out=tmp)
        np.sqrt(tmp, out=tmp)
        tmp += state.epsilon
        np.divide(m, tmp, out=tmp)
        tmp *= lr / c1
        p -= tmp


def adam_step(net: Mlp, grad: Gradient, state: AdamState, lr: float) -> tuple[Mlp, AdamState]:
    """Apply one ADAM step to ``net`` in place and return ``(net, state)``."""
    if not grad.congruent(net):
        raise DimensionError("gradient", net.layer_sizes, [w.shape for w in grad.weights])
    adam_arrays(net.params(), grad.arrays(), state, lr)
    return net, state


def soft_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """target <- tau * online + (1 - tau) * target, in place."""
    if not target.same_architecture(online):
        raise ValueError(f"architecture mismatch: {target.layer_sizes} vs {online.layer_sizes}")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    for t, o in zip(target.params(), online.params()):
        if tau == 1.0:
            t[...] = o
        elif tau > 0.0:
            t *= 1.0 - tau
            t += tau * o
    return target


def hard_update(target: Mlp, online: Mlp) -> Mlp:
    return soft_update(target, online, 1.0)


# -- checkpoints -------------------------------------------------------------

def mlp_to_dict(net: Mlp) -> dict:
    # float repr in json is the shortest string that round-trips exactly
    return {
        "layer_sizes": list(net.layer_sizes),
        "head": net.head,
        "bound": float(net.bound),
        "hidden_activation": net.hidden_activation,
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def mlp_from_dict(d: dict) -> Mlp:
    sizes = [int(n) for n in d["layer_sizes"]]
    weights = [np.asarray(w, dtype=np.float64).reshape(sizes[k + 1], sizes[k])
               for k, w in enumerate(d["weights"])]
    biases = [np.asarray(b, dtype=np.float64) for b in d["biases"]]
    return Mlp(sizes, weights, biases, head=d.get("head", "linear"),
               bound=float(d.get("bound", 1.0)),
               hidden_activation=d.get("hidden_activation", "relu"))


def save_mlp(net: Mlp, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(mlp_to_dict(net)))
    return path


def load_mlp(path) -> Mlp:
    return mlp_from_dict(json.loads(Path(path).read_text()))
