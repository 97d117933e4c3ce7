"""Skip-connected MLP clustering head and its training machinery.

The network maps a batch X (N x d) to logits g(X) + X @ S.T where g is
a dense ReLU MLP and S the K x d linear skip matrix whose column norms
drive feature selection. Everything is float64 and gradients are coded
by hand (plain reverse mode through the affine/ReLU stack).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError

ACTIVATIONS = ("relu", "identity")


@dataclass
class Layer:
    weight: np.ndarray  # out x in
    bias: np.ndarray  # out
    activation: str = "relu"

    def copy(self) -> "Layer":
        return Layer(self.weight.copy(), self.bias.copy(), self.activation)


@dataclass
class SkipConnectedModel:
    """MLP parameters plus the penalized linear skip connection.

    `hierarchy` is the coefficient M bounding first-layer weights by the
    skip column norms; the bound itself is enforced by the proximal
    operator, not here.
    """

    mlp: list[Layer]
    skip: np.ndarray  # K x d
    hierarchy: float
    seed: int | None = None
    config_digest: str | None = None

    @property
    def k(self) -> int:
        return self.skip.shape[0]

    @property
    def d(self) -> int:
        return self.skip.shape[1]

    def copy(self) -> "SkipConnectedModel":
        return SkipConnectedModel(
            [layer.copy() for layer in self.mlp],
            self.skip.copy(),
            self.hierarchy,
            self.seed,
            self.config_digest,
        )

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list: per-layer weight, bias, then the skip."""
        out = []
        for layer in self.mlp:
            out.append(layer.weight)
            out.append(layer.bias)
        out.append(self.skip)
        return out

    def set_parameters(self, params) -> None:
        for have, new in zip(self.parameters(), params):
            if have.shape != new.shape:
                raise ShapeError(f"parameter shape {new.shape} != {have.shape}")
            have[...] = new

    def validate(self) -> None:
        if self.mlp[0].weight.shape[1] != self.d:
            raise ShapeError("first layer width does not match skip matrix")
        for i in range(len(self.mlp) - 1):
            if self.mlp[i + 1].weight.shape[1] != self.mlp[i].weight.shape[0]:
                raise ShapeError(f"layer {i} output does not feed layer {i + 1}")
        if self.mlp[-1].weight.shape[0] != self.k:
            raise ShapeError("final layer output must have one unit per cluster")
        for layer in self.mlp:
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {layer.activation!r}")
            if not (np.isfinite(layer.weight).all() and np.isfinite(layer.bias).all()):
                raise NumericError("non-finite model parameters")
        if not np.isfinite(self.skip).all():
            raise NumericError("non-finite skip parameters")


def init_model(
    d: int,
    k: int,
    hidden: tuple[int, ...] = (100,),
    hierarchy: float = 10.0,
    seed: int | None = 0,
    skip_noise: float | None = None,
    config_digest: str | None = None,
) -> SkipConnectedModel:
    """Fresh model: fan-scaled uniform MLP weights, zero biases, and a
    uniform skip matrix (scale 1/sqrt(d) unless given) so every feature
    starts alive and the hierarchy bound does not strangle the first
    layer at step zero."""
    rng = np.random.default_rng(seed)
    if skip_noise is None:
        skip_noise = 1.0 / np.sqrt(d)
    dims = (d, *hidden, k)
    layers = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weight = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        act = "relu" if i < len(dims) - 2 else "identity"
        layers.append(Layer(weight, np.zeros(fan_out), act))
    skip = rng.uniform(-skip_noise, skip_noise, size=(k, d))
    return SkipConnectedModel(layers, skip, float(hierarchy), seed, config_digest)


def forward(model: SkipConnectedModel, X: np.ndarray) -> np.ndarray:
    """Logits g(X) + X @ S.T for a batch of rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ShapeError(f"input shape {X.shape} incompatible with d={model.d}")
    if not np.isfinite(X).all():
        raise NumericError("non-finite input batch")
    h = X
    for i, layer in enumerate(model.mlp):
        h = h @ layer.weight.T + layer.bias
        if layer.activation == "relu":
            h = np.maximum(h, 0.0)
        if not np.isfinite(h).all():
            raise NumericError(f"non-finite activations at layer {i}")
    return h + X @ model.skip.T


def soft_assign(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; rows sum to one."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(logits).all():
        raise NumericError("non-finite logits")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def logits_grad_from_tau(tau: np.ndarray, grad_tau: np.ndarray) -> np.ndarray:
    """Backprop a gradient in tau through the row-wise softmax."""
    inner = np.sum(grad_tau * tau, axis=1, keepdims=True)
    return tau * (grad_tau - inner)


def backward(model: SkipConnectedModel, X: np.ndarray, grad_logits: np.ndarray):
    """Gradients of sum_i <grad_logits_i, logits_i> w.r.t. all parameters.

    Returns a list aligned with model.parameters().
    """
    X = np.asarray(X, dtype=np.float64)
    grad_logits = np.asarray(grad_logits, dtype=np.float64)
    if grad_logits.shape != (X.shape[0], model.k):
        raise ShapeError(
            f"grad_logits shape {grad_logits.shape} != {(X.shape[0], model.k)}"
        )
    # replay the forward pass keeping pre-activations
    acts = [X]
    pre = []
    h = X
    for layer in model.mlp:
        z = h @ layer.weight.T + layer.bias
        pre.append(z)
        h = np.maximum(z, 0.0) if layer.activation == "relu" else z
        acts.append(h)

    grads: list[np.ndarray] = [None] * (2 * len(model.mlp) + 1)
    grads[-1] = grad_logits.T @ X  # skip
    g = grad_logits
    for i in range(len(model.mlp) - 1, -1, -1):
        layer = model.mlp[i]
        if layer.activation == "relu":
            g = g * (pre[i] > 0.0)
        grads[2 * i] = g.T @ acts[i]
        grads[2 * i + 1] = g.sum(axis=0)
        if i > 0:
            g = g @ layer.weight
    return grads


@dataclass
class OptimizerState:
    """Adaptive-moments ('adam') or momentum SGD ('momentum') state.

    Steps descend the provided gradient; callers pass the gradient of
    the loss (i.e. minus the clustering objective).
    """

    kind: str
    lr: float
    slots: list[list[np.ndarray]] = field(default_factory=list)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.9

    @classmethod
    def adam(cls, params, lr: float = 1e-3) -> "OptimizerState":
        zeros = lambda: [np.zeros_like(p) for p in params]
        return cls("adam", lr, [zeros(), zeros()])

    @classmethod
    def momentum_sgd(cls, params, lr: float = 1e-3, momentum: float = 0.9) -> "OptimizerState":
        return cls("momentum", lr, [[np.zeros_like(p) for p in params]], momentum=momentum)

    def apply(self, params, grads) -> None:
        """One in-place descent step on `params`."""
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter {p.shape}")
        self.step += 1
        if self.kind == "adam":
            m, v = self.slots
            c1 = 1.0 - self.beta1**self.step
            c2 = 1.0 - self.beta2**self.step
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= self.beta1
                mi += (1.0 - self.beta1) * g
                vi *= self.beta2
                vi += (1.0 - self.beta2) * g * g
                p -= self.lr * (mi / c1) / (np.sqrt(vi / c2) + self.eps)
        elif self.kind == "momentum":
            (vel,) = self.slots
            for p, g, v in zip(params, grads, vel):
                v *= self.momentum
                v -= self.lr * g
                p += v
        else:
            raise ValueError(f"unknown optimizer {self.kind!r}")


def optimizer_step(state: OptimizerState, params, grads):
    """Functional wrapper over OptimizerState.apply for callers that
    hold plain arrays; returns the updated parameter list."""
    state.apply(params, grads)
    return params


def model_to_dict(model: SkipConnectedModel) -> dict:
    return {
        "k": model.k,
        "d": model.d,
        "hierarchy": model.hierarchy,
        "layer_dims": [model.d] + [layer.weight.shape[0] for layer in model.mlp],
        "layers": [
            {
                "weight": layer.weight.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in model.mlp
        ],
        "skip": model.skip.tolist(),
        "seed": model.seed,
        "config_digest": model.config_digest,
    }


def model_from_dict(doc: dict) -> SkipConnectedModel:
    layers = [
        Layer(
            np.asarray(entry["weight"], dtype=np.float64),
            np.asarray(entry["bias"], dtype=np.float64),
            entry["activation"],
        )
        for entry in doc["layers"]
    ]
    model = SkipConnectedModel(
        layers,
        np.asarray(doc["skip"], dtype=np.float64),
        float(doc["hierarchy"]),
        doc.get("seed"),
        doc.get("config_digest"),
    )
    model.validate()
    return model


def save_model(model: SkipConnectedModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> SkipConnectedModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def config_digest(doc: dict) -> str:
    """Stable short digest of a configuration mapping."""
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
