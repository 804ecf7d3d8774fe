"""Finite-difference verification suites, runnable from the CLI.

Each check returns the max relative error between analytic gradients and
central differences at eps=1e-5; everything here is expected below 1e-4.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .metatrain import MetaLossSpec, segment_loss_and_grads
from .model import TENSOR_NAMES, init_l2o, l2o_step_tape, phi_leaves, zero_state
from .optimizees import OptimizeeSpec, sample_instance
from .seeding import rng_for


def _phi_probe(hidden=4, seed=7):
    phi = init_l2o(seed, hidden=hidden)
    # a zero output projection would hide gradient paths; perturb it
    rng = rng_for(seed, "gradcheck-proj")
    phi.w_out[:] = rng.normal(0, 0.3, phi.w_out.shape)
    phi.b_out[...] = rng.normal(0, 0.3)
    return phi


def _flatten(phi):
    return np.concatenate([getattr(phi, n).ravel() for n in TENSOR_NAMES])


def _unflatten_into(phi, vec):
    pos = 0
    for n in TENSOR_NAMES:
        arr = getattr(phi, n)
        arr[...] = vec[pos: pos + arr.size].reshape(arr.shape)
        pos += arr.size


def _grads_to_vec(phi, grads):
    return np.concatenate([grads[n].ravel() for n in TENSOR_NAMES])


def check_primitives(seed: int = 0) -> float:
    """FD agreement of every primitive on random inputs in [-2, 2]."""
    rng = rng_for(seed, "gradcheck-prims")
    worst = 0.0

    def run(f, p0):
        nonlocal worst
        worst = max(worst, ad.grad_check(f, p0))

    v = rng.uniform(-2, 2, 6)
    m = rng.uniform(-2, 2, (3, 4))
    b = rng.uniform(-2, 2, 4)
    run(lambda t, p: ad.vsum(ad.add(p, t.constant(v))), v.copy())
    run(lambda t, p: ad.vsum(ad.sub(p, t.constant(v))), v.copy())
    run(lambda t, p: ad.vsum(ad.mul(p, t.constant(v + 3.0))), v.copy())
    run(lambda t, p: ad.vsum(ad.add(ad.reshape(p, (3, 4)), t.constant(b))),
        m.ravel().copy())
    run(lambda t, p: ad.vsum(ad.matmul(t.constant(m), ad.take(p, slice(0, 4)))),
        v.copy())
    run(lambda t, p: ad.vsum(ad.matmul(ad.reshape(p, (3, 4)), t.constant(b))),
        m.ravel().copy())
    run(lambda t, p: ad.vsum(ad.sigmoid(p)), v.copy())
    run(lambda t, p: ad.vsum(ad.tanh(p)), v.copy())
    run(lambda t, p: ad.vsum(ad.square(p)), v.copy())
    run(lambda t, p: ad.scale(ad.vsum(p), -1.7), v.copy())
    run(lambda t, p: ad.vsum(ad.concat(p, t.constant(v))), v.copy())
    run(lambda t, p: ad.vsum(ad.exp(ad.scale(p, 0.3))), v.copy())
    run(lambda t, p: ad.vsum(ad.log(ad.add(ad.square(p), t.constant(np.full(6, 1.5))))),
        v.copy())
    run(lambda t, p: ad.vsum(ad.softplus(p)), v.copy())
    run(lambda t, p: ad.vsum(ad.logsumexp_rows(ad.reshape(p, (3, 4)))),
        m.ravel().copy())
    return worst


def check_lstm_cell(seed: int = 1) -> float:
    """Sum of one l2o step's update w.r.t. every phi tensor."""
    phi = _phi_probe(hidden=4, seed=seed)
    g = rng_for(seed, "gradcheck-g").normal(0, 0.5, 3)
    p0 = _flatten(phi)

    def f(tape, p):
        probe = phi.copy()
        _unflatten_into(probe, p.data)
        leaves = {}
        pos = 0
        for n in TENSOR_NAMES:
            arr = getattr(probe, n)
            leaves[n] = ad.reshape(ad.take(p, slice(pos, pos + arr.size)), arr.shape)
            pos += arr.size
        st = tuple(tape.constant(np.zeros((3, 4))) for _ in range(4))
        update, _ = l2o_step_tape(tape, leaves, probe, st, g)
        return ad.vsum(update)

    return ad.grad_check(f, p0)


def check_meta_loss(seed: int = 2, horizon: int = 1) -> float:
    """Meta-loss phi-gradient vs the frozen-input FD oracle on a small
    quadratic; at horizon 1 the frozen and plain oracles coincide."""
    phi = _phi_probe(hidden=4, seed=seed)
    spec = OptimizeeSpec(family="quadratic", dim=3)
    inst = sample_instance(spec, seed)
    theta0 = inst.init_params(seed + 1)
    mls = MetaLossSpec(horizon=horizon, segment=horizon)
    state = zero_state(inst.dim, phi.hidden)

    loss, grads, _, _, diverged = segment_loss_and_grads(
        phi, inst, theta0, state, mls.weights())
    assert not diverged
    analytic = _grads_to_vec(phi, grads)

    # frozen-input oracle: replay with the base run's g_t sequence fixed
    from .model import l2o_step_np
    base_gs = []
    th = theta0.copy()
    st = zero_state(inst.dim, phi.hidden)
    for _ in range(horizon):
        _, g = inst.loss_and_grad(th, inst.next_batch())
        base_gs.append(g)
        upd, st = l2o_step_np(phi, st, g)
        th = th + upd

    def loss_at(vec):
        probe = phi.copy()
        _unflatten_into(probe, vec)
        th = theta0.copy()
        st = zero_state(inst.dim, probe.hidden)
        total = 0.0
        for g in base_gs:
            upd, st = l2o_step_np(probe, st, g)
            th = th + upd
            fval, _ = inst.loss_and_grad(th, inst.next_batch())
            total += fval
        return total

    p0 = _flatten(phi)
    eps = 1e-5
    fd = np.zeros_like(p0)
    for j in range(p0.size):
        e = np.zeros_like(p0)
        e[j] = eps
        fd[j] = (loss_at(p0 + e) - loss_at(p0 - e)) / (2 * eps)
    return float(np.max(np.abs(analytic - fd) / np.maximum(1.0, np.abs(fd))))


def check_imitation_loss(seed: int = 3) -> float:
    """Imitation-loss phi-gradient vs plain FD (teacher g sequence fixed
    by construction, so there is no frozen-input subtlety)."""
    from .imitation import imitation_loss_and_grads, teacher_trajectory
    from .teachers import TeacherKind

    phi = _phi_probe(hidden=4, seed=seed)
    spec = OptimizeeSpec(family="quadratic", dim=3)
    inst = sample_instance(spec, seed)
    theta0 = inst.init_params(seed + 1)
    traj = teacher_trajectory(TeacherKind("adam", lr=0.01), inst, theta0, 5)
    omega = np.ones(5)
    state = zero_state(inst.dim, phi.hidden)
    _, grads, _ = imitation_loss_and_grads(phi, traj.steps, omega, state)
    analytic = _grads_to_vec(phi, grads)

    from .model import l2o_step_np

    def loss_at(vec):
        probe = phi.copy()
        _unflatten_into(probe, vec)
        st = zero_state(inst.dim, probe.hidden)
        total = 0.0
        for rec, w in zip(traj.steps, omega):
            upd, st = l2o_step_np(probe, st, rec.g)
            total += w * float(np.sum((upd - rec.update) ** 2))
        return total

    p0 = _flatten(phi)
    eps = 1e-5
    fd = np.zeros_like(p0)
    for j in range(p0.size):
        e = np.zeros_like(p0)
        e[j] = eps
        fd[j] = (loss_at(p0 + e) - loss_at(p0 - e)) / (2 * eps)
    return float(np.max(np.abs(analytic - fd) / np.maximum(1.0, np.abs(fd))))


def run_all() -> dict[str, float]:
    return {
        "primitives": check_primitives(),
        "lstm_cell": check_lstm_cell(),
        "meta_loss_n1": check_meta_loss(horizon=1),
        "meta_loss_n5_frozen": check_meta_loss(horizon=5),
        "imitation_loss": check_imitation_loss(),
    }
