"""The learned optimizer: a coordinate-wise two-layer LSTM.

Each optimizee coordinate is processed independently with shared weights,
so the parameter count is independent of the optimizee dimension. The
gradient is preprocessed into a (log-magnitude, sign) pair, fed through
two LSTM layers, and projected to a single scaled update per coordinate.

Two forward paths exist: a plain numpy one for evaluative rollouts and a
tape one for meta-training. They apply the identical sequence of array
operations, so their outputs agree bit-for-bit (covered by tests).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .seeding import rng_for

TENSOR_NAMES = ("wx1", "wh1", "b1", "wx2", "wh2", "b2", "w_out", "b_out")

CHECKPOINT_MAGIC = b"L2O1"

# Gate column layout inside the 4*hidden blocks: input, forget, cell, output.


@dataclass
class L2OParams:
    hidden: int
    preprocess_p: float
    out_scale: float
    wx1: np.ndarray   # (2, 4h)
    wh1: np.ndarray   # (h, 4h)
    b1: np.ndarray    # (4h,)
    wx2: np.ndarray   # (h, 4h)
    wh2: np.ndarray   # (h, 4h)
    b2: np.ndarray    # (4h,)
    w_out: np.ndarray  # (h,)
    b_out: np.ndarray  # scalar ()

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TENSOR_NAMES}

    def copy(self) -> "L2OParams":
        return L2OParams(self.hidden, self.preprocess_p, self.out_scale,
                         *[getattr(self, n).copy() for n in TENSOR_NAMES])

    def n_params(self) -> int:
        return sum(t.size for t in self.tensors().values())


@dataclass
class L2OState:
    h1: np.ndarray
    c1: np.ndarray
    h2: np.ndarray
    c2: np.ndarray

    def copy(self) -> "L2OState":
        return L2OState(self.h1.copy(), self.c1.copy(), self.h2.copy(), self.c2.copy())


def zero_state(dim: int, hidden: int) -> L2OState:
    z = lambda: np.zeros((dim, hidden))
    return L2OState(z(), z(), z(), z())


def init_l2o(seed: int, hidden: int = 20, preprocess_p: float = 10.0,
             out_scale: float = 0.01) -> L2OParams:
    """Uniform(-1/sqrt(fan_in)) weights, forget-gate bias 1, zero output
    projection so the freshly initialized optimizer emits zero updates."""
    if hidden < 1:
        raise ValueError("hidden must be >= 1")
    rng = rng_for(seed, "init-l2o")

    def uniform(fan_in, shape):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, shape)

    h = hidden
    b1 = np.zeros(4 * h)
    b1[h:2 * h] = 1.0
    b2 = np.zeros(4 * h)
    b2[h:2 * h] = 1.0
    return L2OParams(
        hidden=h, preprocess_p=preprocess_p, out_scale=out_scale,
        wx1=uniform(2, (2, 4 * h)),
        wh1=uniform(h, (h, 4 * h)),
        b1=b1,
        wx2=uniform(h, (h, 4 * h)),
        wh2=uniform(h, (h, 4 * h)),
        b2=b2,
        w_out=np.zeros(h),
        b_out=np.zeros(()),
    )


def preprocess(g: np.ndarray, p: float) -> np.ndarray:
    """Per coordinate: (log|g|/p, sign g) when |g| >= e^-p, else (-1, e^p g)."""
    if p <= 0:
        raise ValueError("preprocess: p must be > 0")
    g = np.asarray(g, dtype=np.float64)
    out = np.empty((g.shape[0], 2))
    big = np.abs(g) >= np.exp(-p)
    with np.errstate(divide="ignore"):
        out[:, 0] = np.where(big, np.log(np.abs(np.where(big, g, 1.0))) / p, -1.0)
    out[:, 1] = np.where(big, np.sign(g), np.exp(p) * g)
    return out


def _mm_rows(a, b):
    """Matrix product with a row-order-independent accumulation (see
    autodiff.matmul_rows); keeps the optimizer bitwise permutation
    equivariant across coordinates."""
    if b.ndim == 2:
        return np.einsum("ik,kj->ij", a, b, optimize=False)
    return np.einsum("ik,k->i", a, b, optimize=False)


def _cell_np(x, h, c, wx, wh, b, hidden):
    z = _mm_rows(x, wx) + _mm_rows(h, wh) + b
    i = expit(z[:, :hidden])
    f = expit(z[:, hidden:2 * hidden])
    g = np.tanh(z[:, 2 * hidden:3 * hidden])
    o = expit(z[:, 3 * hidden:])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def l2o_step_np(phi: L2OParams, state: L2OState, g: np.ndarray):
    """Evaluative forward pass; returns (update, new_state)."""
    if state.h1.shape[0] != g.shape[0]:
        raise ValueError("l2o_step: state/gradient dimension mismatch")
    x = preprocess(g, phi.preprocess_p)
    h1, c1 = _cell_np(x, state.h1, state.c1, phi.wx1, phi.wh1, phi.b1, phi.hidden)
    h2, c2 = _cell_np(h1, state.h2, state.c2, phi.wx2, phi.wh2, phi.b2, phi.hidden)
    update = phi.out_scale * (_mm_rows(h2, phi.w_out) + phi.b_out)
    return update, L2OState(h1, c1, h2, c2)


def phi_leaves(tape: ad.Tape, phi: L2OParams) -> dict[str, ad.Value]:
    """Put every trainable tensor of phi on the tape as a leaf."""
    return {name: tape.leaf(arr, trainable=True) for name, arr in phi.tensors().items()}


def _cell_tape(x, h, c, wx, wh, b, hidden):
    z = ad.add(ad.add(ad.matmul_rows(x, wx), ad.matmul_rows(h, wh)), b)
    i = ad.sigmoid(ad.take(z, (slice(None), slice(0, hidden))))
    f = ad.sigmoid(ad.take(z, (slice(None), slice(hidden, 2 * hidden))))
    g = ad.tanh(ad.take(z, (slice(None), slice(2 * hidden, 3 * hidden))))
    o = ad.sigmoid(ad.take(z, (slice(None), slice(3 * hidden, 4 * hidden))))
    c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new


def l2o_step_tape(tape: ad.Tape, leaves: dict[str, ad.Value], phi: L2OParams,
                  state: tuple[ad.Value, ad.Value, ad.Value, ad.Value],
                  g: np.ndarray):
    """Differentiable forward pass. The gradient g enters as a constant
    (no second derivatives). Returns (update Value, new state Values)."""
    x = tape.constant(preprocess(g, phi.preprocess_p))
    h1, c1, h2, c2 = state
    h1, c1 = _cell_tape(x, h1, c1, leaves["wx1"], leaves["wh1"], leaves["b1"], phi.hidden)
    h2, c2 = _cell_tape(h1, h2, c2, leaves["wx2"], leaves["wh2"], leaves["b2"], phi.hidden)
    update = ad.scale(ad.add(ad.matmul_rows(h2, leaves["w_out"]), leaves["b_out"]),
                      phi.out_scale)
    return update, (h1, c1, h2, c2)


def state_constants(tape: ad.Tape, state: L2OState):
    return (tape.constant(state.h1), tape.constant(state.c1),
            tape.constant(state.h2), tape.constant(state.c2))


def state_from_values(state_vals) -> L2OState:
    h1, c1, h2, c2 = state_vals
    return L2OState(h1.data, c1.data, h2.data, c2.data)


def save_checkpoint(phi: L2OParams, path) -> None:
    """Flat binary: magic "L2O1"; hidden (int64 LE), preprocess_p and
    out_scale (float64 LE); then each tensor in TENSOR_NAMES order as
    ndim, dims (int64 LE each) followed by float64 LE data."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<q", phi.hidden))
        fh.write(struct.pack("<dd", phi.preprocess_p, phi.out_scale))
        for name in TENSOR_NAMES:
            # np.ascontiguousarray would promote 0-d tensors to 1-d
            arr = np.asarray(getattr(phi, name), dtype=np.float64, order="C")
            fh.write(struct.pack("<q", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<q", d))
            fh.write(arr.astype("<f8").tobytes())


def load_checkpoint(path) -> L2OParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not an L2O checkpoint (magic {magic!r})")
        hidden = struct.unpack("<q", fh.read(8))[0]
        p, out_scale = struct.unpack("<dd", fh.read(16))
        tensors = {}
        for name in TENSOR_NAMES:
            ndim = struct.unpack("<q", fh.read(8))[0]
            shape = tuple(struct.unpack("<q", fh.read(8))[0] for _ in range(ndim))
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
            tensors[name] = data.astype(np.float64)
    return L2OParams(hidden, p, out_scale, *[tensors[n] for n in TENSOR_NAMES])
