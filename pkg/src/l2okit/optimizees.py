"""Optimizee families: the problems f(theta) that optimizers are run on.

Each instance freezes its problem data at construction (deterministic in
the sampling seed); the only mutable state is the mini-batch stream.
Losses are expressed on the autodiff tape, so the numpy gradient in
loss_and_grad and the on-tape loss used by the meta-trainer share one
definition.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import idx
from .seeding import rng_for

FAMILIES = ("quadratic", "logistic_blobs", "tiny_mlp", "mnist_mlp")

DATASET_ROOT_ENV = "L2OKIT_DATA"


@dataclass(frozen=True)
class OptimizeeSpec:
    family: str = "quadratic"
    dim: int = 10               # quadratic parameter dimension
    n_rows: int | None = None   # quadratic rows (defaults to dim)
    features: int = 2           # blob input dimension
    hidden: int = 8             # tiny_mlp hidden units
    n_points: int = 512         # blob dataset size
    n_classes: int = 2
    batch_size: int = 128
    init_std: float = 0.01
    dataset_root: str | None = None  # mnist_mlp

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown optimizee family {self.family!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.init_std <= 0:
            raise ValueError("init_std must be > 0")


@dataclass
class Batch:
    x: np.ndarray
    y: np.ndarray


class OptimizeeInstance:
    """Base: frozen problem data + a seeded batch stream."""

    spec: OptimizeeSpec
    dim: int

    def init_params(self, seed: int) -> np.ndarray:
        rng = rng_for(seed, "theta0")
        return rng.normal(0.0, self.spec.init_std, self.dim)

    def reseed_batches(self, seed: int) -> None:
        raise NotImplementedError

    def next_batch(self) -> Batch:
        raise NotImplementedError

    def loss_on_tape(self, tape: ad.Tape, theta: ad.Value, batch: Batch) -> ad.Value:
        raise NotImplementedError

    def loss_and_grad(self, theta: np.ndarray, batch: Batch):
        """Returns (loss, grad). A non-finite loss signals divergence; the
        gradient is then zeros and the caller decides what to do."""
        tape = ad.Tape()
        th = tape.leaf(np.asarray(theta, dtype=np.float64), trainable=True)
        # overflow here is divergence data, reported via the loss value
        with np.errstate(over="ignore", invalid="ignore"):
            out = self.loss_on_tape(tape, th, batch)
        loss = float(out.data)
        if not np.isfinite(loss):
            return loss, np.zeros(self.dim)
        ad.backward(tape, out)
        grad = th.grad if th.grad is not None else np.zeros(self.dim)
        return loss, grad


class _DatasetInstance(OptimizeeInstance):
    """Shared batching: a fixed shuffled order per cycle, then reshuffle."""

    x: np.ndarray  # (n, features)
    y: np.ndarray  # labels

    def reseed_batches(self, seed: int) -> None:
        self._batch_rng = rng_for(seed, "batches")
        self._order = None
        self._pos = 0

    def next_batch(self) -> Batch:
        n = self.x.shape[0]
        b = min(self.spec.batch_size, n)
        if self._order is None or self._pos >= n:
            self._order = self._batch_rng.permutation(n)
            self._pos = 0
        pick = self._order[self._pos: self._pos + b]
        self._pos += b
        return Batch(self.x[pick], self.y[pick])


class QuadraticInstance(OptimizeeInstance):
    """f(theta) = ||W theta - y||^2 / n with i.i.d. standard normal W, y."""

    def __init__(self, spec: OptimizeeSpec, w: np.ndarray, y: np.ndarray):
        self.spec = spec
        self.w = w
        self.y = y
        self.dim = w.shape[1]

    def reseed_batches(self, seed: int) -> None:
        pass  # full-batch family

    def next_batch(self) -> Batch:
        return Batch(self.w, self.y)

    def loss_on_tape(self, tape, theta, batch):
        w = tape.constant(batch.x)
        y = tape.constant(batch.y)
        r = ad.sub(ad.matmul(w, theta), y)
        return ad.scale(ad.vsum(ad.square(r)), 1.0 / batch.x.shape[0])

    def minimizer(self) -> np.ndarray:
        return np.linalg.lstsq(self.w, self.y, rcond=None)[0]


class LogisticBlobsInstance(_DatasetInstance):
    """Binary logistic regression on two Gaussian blobs; labels in {-1,+1}.

    theta = [w (features), b]; loss = mean softplus(-y * (x.w + b)).
    """

    def __init__(self, spec: OptimizeeSpec, x: np.ndarray, y: np.ndarray):
        self.spec = spec
        self.x = x
        self.y = y.astype(np.float64)
        self.dim = spec.features + 1
        self.reseed_batches(0)

    def loss_on_tape(self, tape, theta, batch):
        f = self.spec.features
        w = ad.take(theta, slice(0, f))
        b = ad.take(theta, f)
        z = ad.add(ad.matmul(tape.constant(batch.x), w), b)
        margins = ad.scale(ad.mul(z, tape.constant(batch.y)), -1.0)
        return ad.scale(ad.vsum(ad.softplus(margins)), 1.0 / batch.x.shape[0])


class _MLPClassifierInstance(_DatasetInstance):
    """One-hidden-layer sigmoid MLP with softmax cross-entropy.

    theta packs [W1 (f*h), b1 (h), W2 (h*c), b2 (c)] flat, in that order.
    """

    n_hidden: int

    def _shapes(self):
        f = self.x.shape[1]
        h = self.n_hidden
        c = self.n_classes
        return f, h, c

    @property
    def n_classes(self):
        return self._n_classes

    def loss_on_tape(self, tape, theta, batch):
        f, h, c = self._shapes()
        o1 = f * h
        o2 = o1 + h
        o3 = o2 + h * c
        w1 = ad.reshape(ad.take(theta, slice(0, o1)), (f, h))
        b1 = ad.take(theta, slice(o1, o2))
        w2 = ad.reshape(ad.take(theta, slice(o2, o3)), (h, c))
        b2 = ad.take(theta, slice(o3, o3 + c))
        xb = tape.constant(batch.x)
        hid = ad.sigmoid(ad.add(ad.matmul(xb, w1), b1))
        logits = ad.add(ad.matmul(hid, w2), b2)
        onehot = np.zeros((batch.x.shape[0], c))
        onehot[np.arange(batch.x.shape[0]), batch.y.astype(np.int64)] = 1.0
        lse = ad.vsum(ad.logsumexp_rows(logits))
        picked = ad.vsum(ad.mul(logits, tape.constant(onehot)))
        return ad.scale(ad.sub(lse, picked), 1.0 / batch.x.shape[0])


class TinyMLPInstance(_MLPClassifierInstance):
    def __init__(self, spec: OptimizeeSpec, x: np.ndarray, y: np.ndarray):
        self.spec = spec
        self.x = x
        self.y = y
        self.n_hidden = spec.hidden
        self._n_classes = spec.n_classes
        f = x.shape[1]
        self.dim = f * spec.hidden + spec.hidden + spec.hidden * spec.n_classes + spec.n_classes
        self.reseed_batches(0)


class MnistMLPInstance(_MLPClassifierInstance):
    """The 20-hidden-unit sigmoid MLP on flattened MNIST digits."""

    N_HIDDEN = 20
    N_CLASSES = 10

    def __init__(self, spec: OptimizeeSpec, x: np.ndarray, y: np.ndarray):
        self.spec = spec
        self.x = x
        self.y = y
        self.n_hidden = self.N_HIDDEN
        self._n_classes = self.N_CLASSES
        f = x.shape[1]
        self.dim = f * self.n_hidden + self.n_hidden + self.n_hidden * self.N_CLASSES + self.N_CLASSES
        self.reseed_batches(0)


def _sample_blobs(spec: OptimizeeSpec, rng: np.random.Generator, labels01: bool):
    """Two Gaussian blobs at +-mu along a random unit direction."""
    direction = rng.normal(size=spec.features)
    direction /= np.linalg.norm(direction)
    mu = 2.0 * direction
    half = spec.n_points // 2
    x0 = rng.normal(size=(half, spec.features)) - mu
    x1 = rng.normal(size=(spec.n_points - half, spec.features)) + mu
    x = np.concatenate([x0, x1])
    if labels01:
        y = np.concatenate([np.zeros(half), np.ones(spec.n_points - half)])
    else:
        y = np.concatenate([-np.ones(half), np.ones(spec.n_points - half)])
    perm = rng.permutation(spec.n_points)
    return x[perm], y[perm]


def _mnist_data(spec: OptimizeeSpec):
    root = spec.dataset_root or os.environ.get(DATASET_ROOT_ENV)
    if not root:
        raise ValueError(
            f"mnist_mlp requires a dataset root (spec.dataset_root or ${DATASET_ROOT_ENV})")
    images = idx.read_idx_images(os.path.join(root, "train-images-idx3-ubyte"))
    labels = idx.read_idx_labels(os.path.join(root, "train-labels-idx1-ubyte"))
    return images.reshape(images.shape[0], -1), labels


def sample_instance(spec: OptimizeeSpec, seed: int) -> OptimizeeInstance:
    """Deterministic in (spec, seed); problem data is frozen afterwards."""
    rng = rng_for(seed, f"instance:{spec.family}")
    if spec.family == "quadratic":
        n = spec.n_rows or spec.dim
        w = rng.normal(size=(n, spec.dim))
        y = rng.normal(size=n)
        return QuadraticInstance(spec, w, y)
    if spec.family == "logistic_blobs":
        x, y = _sample_blobs(spec, rng, labels01=False)
        return LogisticBlobsInstance(spec, x, y)
    if spec.family == "tiny_mlp":
        x, y = _sample_blobs(spec, rng, labels01=True)
        return TinyMLPInstance(spec, x, y)
    if spec.family == "mnist_mlp":
        x, y = _mnist_data(spec)
        return MnistMLPInstance(spec, x, y)
    raise ValueError(f"unsupported family {spec.family!r}")
