import math

import numpy as np
import pytest

from l2okit import idx
from l2okit.optimizees import (Batch, LogisticBlobsInstance, OptimizeeSpec,
                               QuadraticInstance, TinyMLPInstance,
                               sample_instance)

QUAD = OptimizeeSpec(family="quadratic", dim=4)
BLOBS = OptimizeeSpec(family="logistic_blobs", features=2, n_points=64,
                      batch_size=16)
TINY = OptimizeeSpec(family="tiny_mlp", features=2, hidden=8, n_points=64,
                     batch_size=16)


def fixture_quadratic():
    # f(theta) = (2 theta - 4)^2, minimizer theta* = 2
    return QuadraticInstance(OptimizeeSpec(family="quadratic", dim=1),
                             np.array([[2.0]]), np.array([4.0]))


def test_spec_validation():
    with pytest.raises(ValueError):
        OptimizeeSpec(family="nope")
    with pytest.raises(ValueError):
        OptimizeeSpec(batch_size=0)
    with pytest.raises(ValueError):
        OptimizeeSpec(init_std=0.0)


def test_sample_instance_deterministic():
    a = sample_instance(QUAD, 123)
    b = sample_instance(QUAD, 123)
    assert np.array_equal(a.w, b.w) and np.array_equal(a.y, b.y)


def test_different_seeds_differ():
    a = sample_instance(QUAD, 1)
    b = sample_instance(QUAD, 2)
    assert not np.array_equal(a.w, b.w)


def test_fixture_quadratic_minimizer():
    inst = fixture_quadratic()
    assert inst.minimizer() == pytest.approx([2.0])
    loss, g = inst.loss_and_grad(np.array([2.0]), inst.next_batch())
    assert loss == pytest.approx(0.0, abs=1e-24)
    assert g == pytest.approx([0.0], abs=1e-12)


def test_quadratic_hand_gradient():
    # W = I2, y = 0, theta = (1,1): f = ||theta||^2 / 2 = 1, g = theta
    inst = QuadraticInstance(OptimizeeSpec(family="quadratic", dim=2),
                             np.eye(2), np.zeros(2))
    loss, g = inst.loss_and_grad(np.array([1.0, 1.0]), inst.next_batch())
    assert loss == pytest.approx(1.0)
    assert g == pytest.approx([1.0, 1.0])


def test_logistic_zero_params_gives_ln2():
    x = np.array([[1.0, 0.0], [-1.0, 0.0]])
    y = np.array([1.0, -1.0])
    inst = LogisticBlobsInstance(OptimizeeSpec(family="logistic_blobs",
                                               features=2, n_points=2,
                                               batch_size=2), x, y)
    loss, _ = inst.loss_and_grad(np.zeros(3), Batch(x, y))
    assert loss == pytest.approx(math.log(2.0))


def test_tiny_mlp_zero_params_gives_ln_nclasses():
    inst = sample_instance(TINY, 0)
    loss, _ = inst.loss_and_grad(np.zeros(inst.dim), inst.next_batch())
    assert loss == pytest.approx(math.log(2.0))


def test_init_params_deterministic():
    inst = sample_instance(QUAD, 5)
    assert np.array_equal(inst.init_params(9), inst.init_params(9))
    assert not np.array_equal(inst.init_params(9), inst.init_params(10))


def test_init_params_statistics():
    spec = OptimizeeSpec(family="quadratic", dim=100000, n_rows=1)
    inst = sample_instance(spec, 3)
    theta = inst.init_params(4)
    assert -0.001 < theta.mean() < 0.001
    assert 0.0097 < theta.std() < 0.0103


@pytest.mark.parametrize("spec,seed", [(QUAD, 11), (BLOBS, 12), (TINY, 13)])
def test_gradient_matches_central_differences(spec, seed):
    inst = sample_instance(spec, seed)
    rng = np.random.default_rng(seed)
    theta = rng.normal(0, 0.5, inst.dim)
    inst.reseed_batches(0)
    batch = inst.next_batch()
    _, g = inst.loss_and_grad(theta, batch)
    eps = 1e-5
    fd = np.zeros_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = eps
        hi, _ = inst.loss_and_grad(theta + e, batch)
        lo, _ = inst.loss_and_grad(theta - e, batch)
        fd[j] = (hi - lo) / (2 * eps)
    rel = np.abs(g - fd) / np.maximum(1.0, np.abs(fd))
    assert rel.max() < 1e-6


def test_loss_and_grad_is_pure():
    inst = sample_instance(BLOBS, 21)
    inst.reseed_batches(5)
    batch = inst.next_batch()
    before = (inst.x.copy(), inst.y.copy(), inst._pos)
    inst.loss_and_grad(np.zeros(inst.dim), batch)
    assert np.array_equal(before[0], inst.x)
    assert np.array_equal(before[1], inst.y)
    assert before[2] == inst._pos


def test_quadratic_next_batch_returns_whole_problem():
    inst = sample_instance(QUAD, 2)
    b = inst.next_batch()
    assert np.array_equal(b.x, inst.w) and np.array_equal(b.y, inst.y)


def test_batches_partition_dataset():
    spec = OptimizeeSpec(family="logistic_blobs", features=2, n_points=512,
                         batch_size=128)
    inst = sample_instance(spec, 7)
    inst.reseed_batches(1)
    batches = [inst.next_batch() for _ in range(4)]
    assert all(b.x.shape[0] == 128 for b in batches)
    stacked = np.concatenate([b.x for b in batches])
    assert stacked.shape == inst.x.shape
    # union of one cycle's batches is the full dataset
    assert np.array_equal(np.sort(stacked, axis=0), np.sort(inst.x, axis=0))
    # batches within a cycle are distinct
    assert not np.array_equal(batches[0].x, batches[1].x)


def test_batch_stream_deterministic():
    inst1 = sample_instance(BLOBS, 9)
    inst2 = sample_instance(BLOBS, 9)
    inst1.reseed_batches(42)
    inst2.reseed_batches(42)
    for _ in range(10):
        b1, b2 = inst1.next_batch(), inst2.next_batch()
        assert np.array_equal(b1.x, b2.x) and np.array_equal(b1.y, b2.y)


def test_divergence_signalled_not_raised():
    inst = fixture_quadratic()
    loss, g = inst.loss_and_grad(np.array([np.inf]), inst.next_batch())
    assert not np.isfinite(loss)
    assert np.all(g == 0)


def test_gd_with_inverse_lipschitz_lr_descends():
    inst = sample_instance(OptimizeeSpec(family="quadratic", dim=6), 31)
    lips = np.linalg.eigvalsh(2.0 * inst.w.T @ inst.w / inst.w.shape[0]).max()
    theta = inst.init_params(1)
    batch = inst.next_batch()
    prev, _ = inst.loss_and_grad(theta, batch)
    for _ in range(50):
        loss, g = inst.loss_and_grad(theta, batch)
        assert loss <= prev + 1e-12
        prev = loss
        theta = theta - g / lips


def test_idx_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(6, 4, 3), dtype=np.uint8)
    labels = rng.integers(0, 10, size=6, dtype=np.uint8)
    ipath, lpath = tmp_path / "imgs", tmp_path / "labels"
    idx.write_idx_images(ipath, images)
    idx.write_idx_labels(lpath, labels)
    got = idx.read_idx_images(ipath)
    assert got.shape == (6, 4, 3)
    np.testing.assert_allclose(got, images / 255.0)
    assert got.min() >= 0.0 and got.max() <= 1.0
    np.testing.assert_array_equal(idx.read_idx_labels(lpath), labels)


def test_idx_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(b"\x00\x00\x08\x01" + b"\x00" * 12)
    with pytest.raises(ValueError, match="magic"):
        idx.read_idx_images(path)


def test_mnist_mlp_from_synthetic_idx(tmp_path):
    rng = np.random.default_rng(1)
    images = rng.integers(0, 256, size=(40, 6, 6), dtype=np.uint8)
    labels = rng.integers(0, 10, size=40, dtype=np.uint8)
    idx.write_idx_images(tmp_path / "train-images-idx3-ubyte", images)
    idx.write_idx_labels(tmp_path / "train-labels-idx1-ubyte", labels)
    spec = OptimizeeSpec(family="mnist_mlp", batch_size=16,
                         dataset_root=str(tmp_path))
    inst = sample_instance(spec, 0)
    assert inst.dim == 36 * 20 + 20 + 20 * 10 + 10
    loss, g = inst.loss_and_grad(np.zeros(inst.dim), inst.next_batch())
    assert loss == pytest.approx(math.log(10.0))
    assert g.shape == (inst.dim,)


def test_mnist_requires_dataset_root(monkeypatch):
    monkeypatch.delenv("L2OKIT_DATA", raising=False)
    with pytest.raises(ValueError, match="dataset root"):
        sample_instance(OptimizeeSpec(family="mnist_mlp"), 0)
