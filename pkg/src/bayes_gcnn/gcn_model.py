"""Two-layer graph convolutional network over a flat parameter vector.

The network computes ``log_softmax(A @ act(A @ X @ W0 + b0) @ W1 + b1)`` where
``A`` is the renormalized adjacency.  All parameters live in one float64
vector laid out as ``W0 (in x hidden, row-major) | b0 | W1 (hidden x out) | b1``
so that samplers can treat the model as a point in R^P.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph_data import NormalizedGraph, spmm

__all__ = [
    "Topology",
    "ModelOutput",
    "param_count",
    "layout",
    "flatten",
    "unflatten",
    "init_params",
    "forward",
    "log_likelihood",
    "log_prior",
    "grad_log_prior",
    "grad_log_posterior",
    "accuracy",
    "GCNPosterior",
]

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class Topology:
    in_features: int
    hidden: int
    out_classes: int

    def __post_init__(self):
        for name in ("in_features", "hidden", "out_classes"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"Topology.{name} must be >= 1")


def param_count(t: Topology) -> int:
    return t.in_features * t.hidden + t.hidden + t.hidden * t.out_classes + t.out_classes


def layout(t: Topology) -> dict[str, tuple[int, int, tuple[int, ...]]]:
    """Offsets ``name -> (start, stop, shape)`` of each block in the flat vector."""
    shapes = {
        "W0": (t.in_features, t.hidden),
        "b0": (t.hidden,),
        "W1": (t.hidden, t.out_classes),
        "b1": (t.out_classes,),
    }
    out, start = {}, 0
    for name, shape in shapes.items():
        stop = start + int(np.prod(shape))
        out[name] = (start, stop, shape)
        start = stop
    return out


def unflatten(theta: np.ndarray, t: Topology) -> dict[str, np.ndarray]:
    """Views (not copies) of the four parameter blocks."""
    theta = np.asarray(theta)
    if theta.shape != (param_count(t),):
        raise ValueError(f"expected parameter vector of length {param_count(t)}, got {theta.shape}")
    return {name: theta[a:b].reshape(shape) for name, (a, b, shape) in layout(t).items()}


def flatten(blocks: dict[str, np.ndarray], t: Topology) -> np.ndarray:
    lay = layout(t)
    theta = np.empty(param_count(t), dtype=np.float64)
    for name, (a, b, shape) in lay.items():
        block = np.asarray(blocks[name], dtype=np.float64)
        if block.shape != shape:
            raise ValueError(f"block {name} has shape {block.shape}, expected {shape}")
        theta[a:b] = block.ravel()
    return theta


def init_params(t: Topology, rng: np.random.Generator) -> np.ndarray:
    """Symmetric-uniform fan-in/fan-out initialization; biases start at zero."""
    blocks = {}
    for name, fan_in, fan_out in (("W0", t.in_features, t.hidden), ("W1", t.hidden, t.out_classes)):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        blocks[name] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    blocks["b0"] = np.zeros(t.hidden)
    blocks["b1"] = np.zeros(t.out_classes)
    return flatten(blocks, t)


_ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, h: (z > 0).astype(np.float64)),
    "tanh": (np.tanh, lambda z, h: 1.0 - h * h),
    "identity": (lambda z: z, lambda z, h: np.ones_like(z)),
}


@dataclass
class ModelOutput:
    log_probs: np.ndarray
    # activations kept for the backward pass
    cache: dict = field(default_factory=dict, repr=False)

    def predictions(self) -> np.ndarray:
        # np.argmax returns the first maximum: lowest class index wins ties
        return np.argmax(self.log_probs, axis=1)


def _as_sparse(X):
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=np.float64)
    return np.asarray(X, dtype=np.float64)


def forward(g: NormalizedGraph, X, theta: np.ndarray, topology: Topology, activation: str = "relu") -> ModelOutput:
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise ValueError("forward: parameter vector contains non-finite values")
    X = _as_sparse(X)
    if X.shape != (g.n, topology.in_features):
        raise ValueError(f"forward: features have shape {X.shape}, expected {(g.n, topology.in_features)}")
    act, _ = _ACTIVATIONS[activation]
    p = unflatten(theta, topology)

    pre = spmm(g, np.asarray(X @ p["W0"])) + p["b0"]
    hidden = act(pre)
    logits = spmm(g, hidden @ p["W1"]) + p["b1"]

    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - lse
    return ModelOutput(log_probs=log_probs, cache={"pre": pre, "hidden": hidden, "activation": activation})


def _check_mask(mask) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("mask is empty")
    return mask


def log_likelihood(out: ModelOutput, labels, mask) -> float:
    """Multinomial log-likelihood of the masked labels."""
    mask = _check_mask(mask)
    labels = np.asarray(labels)
    return float(out.log_probs[mask, labels[mask]].sum())


def log_prior(theta: np.ndarray, sigma2: float) -> float:
    """Isotropic Gaussian log-density with variance ``sigma2`` on every parameter."""
    if not sigma2 > 0:
        raise ValueError("prior variance must be > 0")
    theta = np.asarray(theta, dtype=np.float64)
    return float(-0.5 * theta.size * (_LOG_2PI + np.log(sigma2)) - 0.5 * np.dot(theta, theta) / sigma2)


def grad_log_prior(theta: np.ndarray, sigma2: float) -> np.ndarray:
    if not sigma2 > 0:
        raise ValueError("prior variance must be > 0")
    return -np.asarray(theta, dtype=np.float64) / sigma2


def _backward(g, X, theta, topology, out, labels, mask) -> np.ndarray:
    p = unflatten(theta, topology)
    _, dact = _ACTIVATIONS[out.cache["activation"]]
    pre, hidden = out.cache["pre"], out.cache["hidden"]

    # d loglik / d logits = onehot - softmax on masked rows
    d_logits = np.zeros_like(out.log_probs)
    d_logits[mask] = -np.exp(out.log_probs[mask])
    d_logits[mask, labels[mask]] += 1.0

    # A is symmetric, so the adjoint of spmm is spmm
    s = spmm(g, d_logits)
    d_w1 = hidden.T @ s
    d_b1 = d_logits.sum(axis=0)
    d_pre = (s @ p["W1"].T) * dact(pre, hidden)
    d_b0 = d_pre.sum(axis=0)
    d_w0 = np.asarray(X.T @ spmm(g, d_pre))
    return flatten({"W0": d_w0, "b0": d_b0, "W1": d_w1, "b1": d_b1}, topology)


def grad_log_posterior(
    g: NormalizedGraph,
    X,
    labels,
    mask,
    theta: np.ndarray,
    sigma2: float,
    topology: Topology,
    activation: str = "relu",
    include_prior: bool = True,
) -> np.ndarray:
    """Exact gradient of ``log_likelihood + log_prior`` by reverse-mode differentiation."""
    X = _as_sparse(X)
    mask = _check_mask(mask)
    out = forward(g, X, theta, topology, activation)
    grad = _backward(g, X, np.asarray(theta, dtype=np.float64), topology, out, np.asarray(labels), mask)
    if include_prior:
        grad += grad_log_prior(theta, sigma2)
    return grad


def accuracy(out: ModelOutput, labels, mask) -> float:
    mask = _check_mask(mask)
    labels = np.asarray(labels)
    return float(100.0 * np.mean(out.predictions()[mask] == labels[mask]))


class GCNPosterior:
    """Log-posterior of a GCN on one dataset, in the form the samplers consume.

    Parameters
    ----------
    g : NormalizedGraph
    features : sparse or dense (n, in_features)
    labels : int array (n,)
    train_mask, test_mask : node index arrays
    topology : Topology
    prior_var : float
        Variance of the Gaussian prior on every weight and bias.
    activation : str
        Hidden nonlinearity, one of ``relu``, ``tanh``, ``identity``.
    prior_in_gradient : bool
        Whether the proposal gradient includes the prior term.
    """

    def __init__(self, g, features, labels, train_mask, test_mask, topology, prior_var=25.0,
                 activation="relu", prior_in_gradient=True):
        if not prior_var > 0:
            raise ValueError("prior_var must be > 0")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.g = g
        self.X = _as_sparse(features)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.train_mask = _check_mask(train_mask)
        self.test_mask = np.asarray(test_mask, dtype=np.int64)
        self.topology = topology
        self.prior_var = float(prior_var)
        self.activation = activation
        self.prior_in_gradient = prior_in_gradient
        self.dim = param_count(topology)

    @classmethod
    def from_dataset(cls, dataset, hidden=16, **kwargs):
        from .graph_data import normalize

        topo = Topology(dataset.num_features, hidden, dataset.num_classes)
        return cls(normalize(dataset), dataset.features, dataset.labels,
                   dataset.train_mask, dataset.test_mask, topo, **kwargs)

    def initial_point(self, rng: np.random.Generator) -> np.ndarray:
        return init_params(self.topology, rng)

    def forward(self, theta) -> ModelOutput:
        return forward(self.g, self.X, theta, self.topology, self.activation)

    def evaluate(self, theta) -> dict:
        """Log-likelihood, log-prior and train/test accuracy at ``theta``."""
        out = self.forward(theta)
        res = {
            "log_lik": log_likelihood(out, self.labels, self.train_mask),
            "log_prior": log_prior(theta, self.prior_var),
            "train_acc": accuracy(out, self.labels, self.train_mask),
        }
        res["test_acc"] = accuracy(out, self.labels, self.test_mask) if self.test_mask.size else float("nan")
        return res

    def grad(self, theta) -> np.ndarray:
        return grad_log_posterior(self.g, self.X, self.labels, self.train_mask, theta, self.prior_var,
                                  self.topology, self.activation, self.prior_in_gradient)
