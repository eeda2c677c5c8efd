"""Minimal neural machinery: a two-layer ReLU net with exact gradients.

Everything here is deliberately small and explicit. The package needs only
one architecture (input -> ReLU hidden -> linear output), three scalar heads
(cross-entropy, mean entropy, mean squared error), stochastic gradient
descent, and a finite-difference checker that can certify the analytic
gradients. Checkpoints are line-oriented text with 17 significant digits,
which round-trips float64 exactly and diffs cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, TextIO

import numpy as np

_INIT_TAG = 0x3A91


@dataclass(frozen=True)
class Grads:
    """Parameter gradients matching the layout of Mlp."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def scaled(self, factor: float) -> "Grads":
        return Grads(self.w1 * factor, self.b1 * factor, self.w2 * factor, self.b2 * factor)

    def plus(self, other: "Grads") -> "Grads":
        return Grads(
            self.w1 + other.w1,
            self.b1 + other.b1,
            self.w2 + other.w2,
            self.b2 + other.b2,
        )


@dataclass(frozen=True)
class Mlp:
    """Two-layer perceptron: ReLU hidden layer, linear output layer."""

    w1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (outputs, hidden)
    b2: np.ndarray  # (outputs,)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.w1.shape[1], self.w1.shape[0], self.w2.shape[0])

    @staticmethod
    def init(inputs: int, hidden: int, outputs: int, seed: int) -> "Mlp":
        """Uniform +-1/sqrt(fan_in) weights, zero biases, fully seeded."""
        rng = np.random.default_rng(
            np.random.SeedSequence([_INIT_TAG, inputs, hidden, outputs, seed & (2**64 - 1)])
        )
        s1 = 1.0 / np.sqrt(inputs)
        s2 = 1.0 / np.sqrt(hidden)
        return Mlp(
            w1=rng.uniform(-s1, s1, size=(hidden, inputs)),
            b1=np.zeros(hidden),
            w2=rng.uniform(-s2, s2, size=(outputs, hidden)),
            b2=np.zeros(outputs),
        )


def forward(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (logits, hidden activations) for a batch x of shape (n, inputs)."""
    x = np.atleast_2d(x)
    hidden = np.maximum(x @ net.w1.T + net.b1, 0.0)
    return hidden @ net.w2.T + net.b2, hidden


def backward(net: Mlp, x: np.ndarray, hidden: np.ndarray, dlogits: np.ndarray) -> Grads:
    """Exact parameter gradients given the upstream gradient on the logits."""
    x = np.atleast_2d(x)
    dw2 = dlogits.T @ hidden
    db2 = dlogits.sum(axis=0)
    dhidden = (dlogits @ net.w2) * (hidden > 0.0)
    dw1 = dhidden.T @ x
    db1 = dhidden.sum(axis=0)
    return Grads(dw1, db1, dw2, db2)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its exact gradient on the logits."""
    logits = np.atleast_2d(logits)
    n = logits.shape[0]
    logp = log_softmax(logits)
    loss = -logp[np.arange(n), labels].mean()
    dlogits = softmax(logits)
    dlogits[np.arange(n), labels] -= 1.0
    return float(loss), dlogits / n


def mean_entropy(logits: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean per-row entropy of the softmax and its exact logit gradient."""
    logits = np.atleast_2d(logits)
    n = logits.shape[0]
    logp = log_softmax(logits)
    p = np.exp(logp)
    row_entropy = -(p * logp).sum(axis=1)
    dlogits = -p * (logp + row_entropy[:, None])
    return float(row_entropy.mean()), dlogits / n


def mean_squared_error(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all entries and its exact gradient on pred."""
    pred = np.atleast_2d(pred)
    diff = pred - np.asarray(target).reshape(pred.shape)
    return float((diff**2).mean()), 2.0 * diff / diff.size


def sgd_step(net: Mlp, grads: Grads, lr: float) -> Mlp:
    """One descent step, returning a new network; refuses non-finite updates."""
    updated = Mlp(
        w1=net.w1 - lr * grads.w1,
        b1=net.b1 - lr * grads.b1,
        w2=net.w2 - lr * grads.w2,
        b2=net.b2 - lr * grads.b2,
    )
    for arr in (updated.w1, updated.b1, updated.w2, updated.b2):
        if not np.isfinite(arr).all():
            raise FloatingPointError("training diverged: non-finite parameter update")
    return updated


# -- flattened-vector view, used by the finite-difference checker -------------


def flatten(net: Mlp) -> np.ndarray:
    return np.concatenate([net.w1.ravel(), net.b1, net.w2.ravel(), net.b2])


def flatten_grads(grads: Grads) -> np.ndarray:
    return np.concatenate([grads.w1.ravel(), grads.b1, grads.w2.ravel(), grads.b2])


def unflatten(net: Mlp, vec: np.ndarray) -> Mlp:
    inputs, hidden, outputs = net.dims
    sizes = [hidden * inputs, hidden, outputs * hidden, outputs]
    parts: list[np.ndarray] = []
    at = 0
    for size in sizes:
        parts.append(vec[at : at + size])
        at += size
    return Mlp(
        w1=parts[0].reshape(hidden, inputs),
        b1=parts[1].copy(),
        w2=parts[2].reshape(outputs, hidden),
        b2=parts[3].copy(),
    )


def grad_check(
    loss_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    at: np.ndarray,
    step: float = 1e-5,
    sample: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    loss_and_grad maps a flat parameter vector to (scalar, gradient vector).
    When sample is given, only that many randomly chosen coordinates are
    probed; otherwise every coordinate is.
    """
    _, analytic = loss_and_grad(at)
    coords: np.ndarray
    if sample is not None and sample < at.size:
        if rng is None:
            raise ValueError("sampled grad_check needs an rng")
        coords = rng.choice(at.size, size=sample, replace=False)
    else:
        coords = np.arange(at.size)
    worst = 0.0
    for i in coords:
        bumped = at.copy()
        bumped[i] += step
        hi, _ = loss_and_grad(bumped)
        bumped[i] -= 2 * step
        lo, _ = loss_and_grad(bumped)
        numeric = (hi - lo) / (2 * step)
        denom = max(abs(analytic[i]), abs(numeric), 1e-2)
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst


# -- text checkpoints ----------------------------------------------------------


def write_matrix(out: TextIO, name: str, arr: np.ndarray) -> None:
    arr = np.atleast_2d(arr)
    out.write(f"{name} {arr.shape[0]} {arr.shape[1]}\n")
    for row in arr:
        out.write(" ".join(format(v, ".17g") for v in row) + "\n")


def read_matrix(lines: Iterator[str], name: str) -> np.ndarray:
    header = next(lines, None)
    if header is None:
        raise ValueError(f"checkpoint truncated before section {name!r}")
    fields = header.split()
    if len(fields) != 3 or fields[0] != name:
        raise ValueError(f"expected section {name!r}, found {header!r}")
    rows, cols = int(fields[1]), int(fields[2])
    data = np.empty((rows, cols))
    for r in range(rows):
        line = next(lines, None)
        if line is None:
            raise ValueError(f"checkpoint truncated inside section {name!r}")
        values = line.split()
        if len(values) != cols:
            raise ValueError(f"section {name!r} row {r} has {len(values)} values, wants {cols}")
        data[r] = [float(v) for v in values]
    return data


def save_mlp(out: TextIO, net: Mlp) -> None:
    inputs, hidden, outputs = net.dims
    out.write(f"mlp {inputs} {hidden} {outputs}\n")
    write_matrix(out, "w1", net.w1)
    write_matrix(out, "b1", net.b1)
    write_matrix(out, "w2", net.w2)
    write_matrix(out, "b2", net.b2)


def load_mlp(source: TextIO | Iterator[str]) -> Mlp:
    """Read one network record from a stream or an iterator of lines."""
    lines = iter(source.read().splitlines()) if hasattr(source, "read") else source
    header = next(lines, None)
    if header is None or not header.startswith("mlp "):
        raise ValueError(f"not an mlp checkpoint: {header!r}")
    dims = [int(v) for v in header.split()[1:]]
    if len(dims) != 3:
        raise ValueError(f"malformed mlp header: {header!r}")
    inputs, hidden, outputs = dims
    net = Mlp(
        w1=read_matrix(lines, "w1"),
        b1=read_matrix(lines, "b1")[0],
        w2=read_matrix(lines, "w2"),
        b2=read_matrix(lines, "b2")[0],
    )
    if net.dims != (inputs, hidden, outputs):
        raise ValueError("checkpoint sections disagree with the declared dimensions")
    return net


__all__ = [
    "Grads",
    "Mlp",
    "backward",
    "cross_entropy",
    "flatten",
    "flatten_grads",
    "forward",
    "grad_check",
    "load_mlp",
    "log_softmax",
    "mean_entropy",
    "mean_squared_error",
    "read_matrix",
    "save_mlp",
    "sgd_step",
    "softmax",
    "unflatten",
    "write_matrix",
]
