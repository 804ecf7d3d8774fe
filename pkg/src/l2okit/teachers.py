"""Analytical optimizers: imitation teachers, mixture components, baselines.

All steps are pure functions (state in, state out) and return ADDITIVE
updates, i.e. theta_next = theta + update, so teacher targets live in the
same space as the learned optimizer's outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

KINDS = ("sgd", "adam", "adagrad", "rmsprop")


@dataclass(frozen=True)
class TeacherKind:
    kind: str
    lr: float = 0.01
    beta1: float = 0.9      # adam
    beta2: float = 0.999    # adam
    eps: float = 1e-8       # adam
    adagrad_eps: float = 1e-10
    rms_decay: float = 0.9
    rms_eps: float = 1e-10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown teacher kind {self.kind!r}")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must be in [0, 1)")
        if self.eps <= 0 or self.adagrad_eps <= 0 or self.rms_eps <= 0:
            raise ValueError("eps must be > 0")


@dataclass(frozen=True)
class TeacherState:
    t: int = 0
    m: np.ndarray | None = None    # adam first moment
    v: np.ndarray | None = None    # adam second moment
    acc: np.ndarray | None = None  # adagrad / rmsprop accumulator


def init_state(dim: int) -> TeacherState:
    return TeacherState(t=0, m=np.zeros(dim), v=np.zeros(dim), acc=np.zeros(dim))


def teacher_step(kind: TeacherKind, state: TeacherState, g: np.ndarray):
    """One step; returns (update, new_state) with theta_next = theta + update."""
    g = np.asarray(g, dtype=np.float64)
    if state.m is not None and state.m.shape != g.shape:
        raise ValueError("teacher_step: state/gradient dimension mismatch")
    t = state.t + 1
    if kind.kind == "sgd":
        return -kind.lr * g, replace(state, t=t)
    if kind.kind == "adam":
        m = kind.beta1 * state.m + (1 - kind.beta1) * g
        v = kind.beta2 * state.v + (1 - kind.beta2) * g * g
        m_hat = m / (1 - kind.beta1 ** t)
        v_hat = v / (1 - kind.beta2 ** t)
        update = -kind.lr * m_hat / (np.sqrt(v_hat) + kind.eps)
        return update, replace(state, t=t, m=m, v=v)
    if kind.kind == "adagrad":
        acc = state.acc + g * g
        update = -kind.lr * g / np.sqrt(acc + kind.adagrad_eps)
        return update, replace(state, t=t, acc=acc)
    if kind.kind == "rmsprop":
        acc = kind.rms_decay * state.acc + (1 - kind.rms_decay) * g * g
        update = -kind.lr * g / np.sqrt(acc + kind.rms_eps)
        return update, replace(state, t=t, acc=acc)
    raise ValueError(f"unknown teacher kind {kind.kind!r}")


def default_ensemble(lr: float = 0.01) -> tuple[TeacherKind, ...]:
    """Adam / SGD / Adagrad, each at the grid-searched learning rate 0.01."""
    return (TeacherKind("adam", lr=lr), TeacherKind("sgd", lr=lr),
            TeacherKind("adagrad", lr=lr))
