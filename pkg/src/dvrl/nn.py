"""Dense MLP core: forward/backward passes, losses and first-order optimizers.

Matrices are plain float64 numpy arrays. An :class:`MlpParams` holds one
``(weight, bias)`` pair per layer with ``weight`` shaped ``(fan_in, fan_out)``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

OutputActivation = Literal["sigmoid", "softmax", "identity"]
LossKind = Literal["mse", "cross_entropy"]

CE_CLAMP = 1e-12


class ShapeError(ValueError):
    """Raised when array dimensions do not line up."""


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or Inf shows up where finite values are required."""


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_activation: OutputActivation = "identity"
    hidden_activation: str = "relu"

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias per weight matrix and at least one layer")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError(f"layer {k}: weight {w.shape} and bias {b.shape} disagree")
            if k and self.weights[k - 1].shape[1] != w.shape[0]:
                raise ShapeError(
                    f"layer {k}: input dim {w.shape[0]} != previous output dim "
                    f"{self.weights[k - 1].shape[1]}"
                )

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def arrays(self) -> list[np.ndarray]:
        """Parameter arrays in canonical order ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def paths(self) -> list[str]:
        out = []
        for k in range(self.n_layers):
            out.extend((f"layers[{k}].weight", f"layers[{k}].bias"))
        return out

    def copy(self) -> "MlpParams":
        return copy.deepcopy(self)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for a in self.arrays():
            a[...] = vec[pos : pos + a.size].reshape(a.shape)
            pos += a.size


def init_mlp(
    layer_sizes: Sequence[int],
    output_activation: OutputActivation = "identity",
    rng: np.random.Generator | int | None = None,
) -> MlpParams:
    """Glorot-uniform weights and zero biases for the given layer sizes.

    ``layer_sizes`` includes the input and output dims, so ``(d, 100, 1)``
    builds one hidden layer.
    """
    if len(layer_sizes) < 2 or any(int(s) < 1 for s in layer_sizes):
        raise ShapeError(f"invalid layer sizes {tuple(layer_sizes)}")
    rng = np.random.default_rng(rng)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, output_activation)


def zeros_like_mlp(layer_sizes: Sequence[int], output_activation: OutputActivation = "identity") -> MlpParams:
    weights = [np.zeros((a, b)) for a, b in zip(layer_sizes[:-1], layer_sizes[1:])]
    biases = [np.zeros(b) for b in layer_sizes[1:]]
    return MlpParams(weights, biases, output_activation)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # numerically stable in both tails
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return z
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "softmax":
        return softmax(z)
    raise ValueError(f"unknown output activation {kind!r}")


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {x.shape}")
    return x


def forward_trace(params: MlpParams, inputs) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Run the network and keep what backprop needs.

    Returns ``(activations, pre_activations)``; ``activations[0]`` is the input
    and ``activations[-1]`` the network output.
    """
    x = _as_matrix(inputs)
    acts, pres = [x], []
    last = params.n_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        if acts[-1].shape[1] != w.shape[0]:
            raise ShapeError(
                f"layer {k}: expected input dim {w.shape[0]}, got {acts[-1].shape[1]}"
            )
        z = acts[-1] @ w + b
        pres.append(z)
        if k == last:
            acts.append(_activate(z, params.output_activation))
        else:
            acts.append(np.maximum(z, 0.0))
    return acts, pres


def mlp_forward(params: MlpParams, inputs) -> np.ndarray:
    return forward_trace(params, inputs)[0][-1]


def mlp_logits(params: MlpParams, inputs) -> np.ndarray:
    """Output-layer pre-activations."""
    return forward_trace(params, inputs)[1][-1]


def _output_vjp(grad: np.ndarray, out: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return grad
    if kind == "sigmoid":
        return grad * out * (1.0 - out)
    if kind == "softmax":
        return out * (grad - np.sum(grad * out, axis=1, keepdims=True))
    raise ValueError(f"unknown output activation {kind!r}")


def mlp_backward(
    params: MlpParams,
    inputs,
    upstream_grad,
    *,
    wrt: Literal["output", "logits"] = "output",
    trace: tuple[list[np.ndarray], list[np.ndarray]] | None = None,
) -> MlpParams:
    """Gradient of a scalar loss w.r.t. every parameter.

    ``upstream_grad`` is d(loss)/d(output) by default, or d(loss)/d(logits)
    when ``wrt="logits"`` (skips the output activation Jacobian). Pass the
    ``trace`` from :func:`forward_trace` to avoid a second forward pass.
    The result is returned as an :class:`MlpParams` holding gradients.
    """
    acts, pres = trace if trace is not None else forward_trace(params, inputs)
    g = _as_matrix(upstream_grad)
    if g.shape != acts[-1].shape:
        raise ShapeError(f"upstream gradient {g.shape} != output shape {acts[-1].shape}")
    if wrt == "output":
        g = _output_vjp(g, acts[-1], params.output_activation)
    elif wrt != "logits":
        raise ValueError(f"wrt must be 'output' or 'logits', got {wrt!r}")

    gw: list[np.ndarray] = [None] * params.n_layers  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * params.n_layers  # type: ignore[list-item]
    for k in range(params.n_layers - 1, -1, -1):
        gw[k] = acts[k].T @ g
        gb[k] = g.sum(axis=0)
        if k:
            g = (g @ params.weights[k].T) * (pres[k - 1] > 0)
    grads = MlpParams(gw, gb, params.output_activation, params.hidden_activation)
    for path, a in zip(grads.paths(), grads.arrays()):
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"non-finite gradient at {path}")
    return grads


def loss_eval(kind: LossKind, predictions, targets, *, prob_tol: float = 1e-6) -> np.ndarray:
    """Per-sample loss vector.

    MSE is averaged over output columns. Cross-entropy clamps probabilities
    to ``[1e-12, 1 - 1e-12]`` before the log; rows of ``predictions`` and
    ``targets`` must each sum to one within ``prob_tol``.
    """
    p = _as_matrix(predictions)
    y = _as_matrix(targets)
    if p.shape != y.shape:
        raise ShapeError(f"predictions {p.shape} and targets {y.shape} differ")
    if kind == "mse":
        return np.mean((p - y) ** 2, axis=1)
    if kind == "cross_entropy":
        for name, m in (("predictions", p), ("targets", y)):
            bad = np.flatnonzero(np.abs(m.sum(axis=1) - 1.0) > prob_tol)
            if bad.size or np.any(m < -prob_tol):
                raise ValueError(f"{name} rows are not probability vectors (rows {bad[:10].tolist()})")
        return -np.sum(y * np.log(np.clip(p, CE_CLAMP, 1.0 - CE_CLAMP)), axis=1)
    raise ValueError(f"unknown loss kind {kind!r}")


@dataclass
class OptimizerState:
    kind: Literal["sgd", "adam"] = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")

    def reset(self) -> None:
        self.step = 0
        self.m, self.v = [], []


def optimizer_step(state: OptimizerState, params: MlpParams, grads: MlpParams) -> MlpParams:
    """Apply one update in place and return ``params``."""
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if len(p_arrays) != len(g_arrays):
        raise ShapeError("gradient set does not match parameter set")
    for path, p, g in zip(params.paths(), p_arrays, g_arrays):
        if p.shape != g.shape:
            raise ShapeError(f"{path}: gradient {g.shape} != parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient at {path}")

    state.step += 1
    if state.kind == "sgd":
        for p, g in zip(p_arrays, g_arrays):
            p -= state.lr * g
        return params

    if not state.m:
        state.m = [np.zeros_like(p) for p in p_arrays]
        state.v = [np.zeros_like(p) for p in p_arrays]
    b1, b2, t = state.beta1, state.beta2, state.step
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params
