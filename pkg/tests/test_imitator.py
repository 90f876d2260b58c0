"""Coordinate-network tests: encoding, backprop, training, checkpoints."""

import numpy as np
import pytest

from dreampipe.imitator import (
    Imitator,
    ImitatorParams,
    fuse_imitated,
    imitate_all,
    init_network,
    load_checkpoint,
    loss_and_grads,
    positional_encoding,
    save_checkpoint,
    train_imitator,
)


def small_params(**overrides) -> ImitatorParams:
    base = dict(
        num_freqs=2,
        hidden_width=32,
        num_layers=2,
        learning_rate=3e-3,
        batch_size=512,
        iterations=300,
        holdout_fraction=0.1,
        seed=0,
    )
    base.update(overrides)
    return ImitatorParams(**base)


def random_net(params: ImitatorParams, seed: int = 0) -> Imitator:
    weights, biases = init_network(params)
    rng = np.random.default_rng(seed)
    biases = [rng.normal(0.0, 0.1, size=b.shape) for b in biases]
    return Imitator(
        weights=weights,
        biases=biases,
        num_freqs=params.num_freqs,
        aabb_min=np.array([-1.0, -1.0, -1.0]),
        aabb_max=np.array([1.0, 1.0, 1.0]),
    )


def test_positional_encoding_values():
    enc = positional_encoding(np.array([[0.5, 0.25, -1.0]]), num_freqs=2)
    assert enc.shape == (1, 12)
    x = np.array([0.5, 0.25, -1.0])
    np.testing.assert_allclose(enc[0, 0:3], np.sin(np.pi * x), atol=1e-12)
    np.testing.assert_allclose(enc[0, 3:6], np.cos(np.pi * x), atol=1e-12)
    np.testing.assert_allclose(enc[0, 6:9], np.sin(2 * np.pi * x), atol=1e-12)
    np.testing.assert_allclose(enc[0, 9:12], np.cos(2 * np.pi * x), atol=1e-12)


def test_layer_dims():
    params = small_params()
    assert params.layer_dims() == [15, 32, 3]
    with pytest.raises(ValueError, match="at least"):
        ImitatorParams(num_layers=1).layer_dims()


def test_normalize_maps_box_corners():
    net = random_net(small_params())
    net.aabb_min = np.array([0.0, -2.0, 10.0])
    net.aabb_max = np.array([4.0, 2.0, 14.0])
    lo = net.normalize(net.aabb_min[None, :])
    hi = net.normalize(net.aabb_max[None, :])
    np.testing.assert_allclose(lo, [[-1.0, -1.0, -1.0]], atol=1e-12)
    np.testing.assert_allclose(hi, [[1.0, 1.0, 1.0]], atol=1e-12)


def numeric_gradient(param, loss_fn, h=1e-6):
    grad = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        saved = param[i]
        param[i] = saved + h
        up = loss_fn()
        param[i] = saved - h
        down = loss_fn()
        param[i] = saved
        grad[i] = (up - down) / (2.0 * h)
    return grad


def test_gradients_match_finite_differences():
    # analytic backprop vs central differences on every parameter
    params = small_params()
    weights, biases = init_network(params)
    rng = np.random.default_rng(42)
    biases = [rng.normal(0.0, 0.1, size=b.shape) for b in biases]
    x = rng.normal(0.0, 1.0, size=(16, 15))
    target = rng.uniform(0.2, 0.8, size=(16, 3))

    def loss_only():
        loss, _, _ = loss_and_grads(weights, biases, x, target)
        return loss

    _, grads_w, grads_b = loss_and_grads(weights, biases, x, target)
    for analytic, param in zip(grads_w + grads_b, weights + biases):
        numeric = numeric_gradient(param, loss_only)
        rel = np.linalg.norm(analytic - numeric) / max(
            np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12
        )
        assert rel < 1e-3, f"gradient relative error {rel:.2e}"


def identity_task(n=4000, seed=3):
    rng = np.random.default_rng(seed)
    points = rng.uniform(-2.0, 2.0, size=(n, 3))
    colors = rng.uniform(0.0, 1.0, size=(n, 3))
    return points, colors, colors.copy()


def test_training_learns_identity():
    points, base, target = identity_task()
    net, history = train_imitator(points, base, target, params=small_params())
    assert len(history["train_loss"]) == 300
    # iterations 0, 100, 200 and the final one
    assert len(history["holdout_loss"]) == 4
    assert history["holdout_loss"][-1] < history["holdout_loss"][0]
    rmse = np.sqrt(history["holdout_loss"][-1])
    assert rmse < 0.05, f"held-out RMSE {rmse:.4f}"
    pred = net.predict(points[:8], base[:8])
    assert pred.shape == (8, 3)
    assert (pred >= 0.0).all() and (pred <= 1.0).all()


def test_training_is_seeded():
    points, base, target = identity_task(n=600)
    p = small_params(iterations=50)
    net_a, hist_a = train_imitator(points, base, target, params=p)
    net_b, hist_b = train_imitator(points, base, target, params=p)
    assert hist_a["train_loss"] == hist_b["train_loss"]
    for wa, wb in zip(net_a.weights, net_b.weights):
        assert np.array_equal(wa, wb)


def test_training_input_validation():
    empty = np.zeros((0, 3))
    with pytest.raises(ValueError, match="no supervision"):
        train_imitator(empty, empty, empty)
    points, base, target = identity_task(n=10)
    with pytest.raises(ValueError, match="training samples"):
        train_imitator(points, base, target, params=small_params(holdout_fraction=1.0))


def test_checkpoint_round_trip(tmp_path):
    net = random_net(small_params(), seed=9)
    path = str(tmp_path / "net.bin")
    save_checkpoint(net, path)
    loaded = load_checkpoint(path)
    assert loaded.num_freqs == net.num_freqs
    np.testing.assert_array_equal(loaded.aabb_min, net.aabb_min)
    np.testing.assert_array_equal(loaded.aabb_max, net.aabb_max)
    assert len(loaded.weights) == len(net.weights)
    for a, b in zip(loaded.weights + loaded.biases, net.weights + net.biases):
        assert np.array_equal(a, b)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(32, 3))
    cols = rng.uniform(0, 1, size=(32, 3))
    np.testing.assert_array_equal(loaded.predict(pts, cols), net.predict(pts, cols))


def test_checkpoint_rejects_bad_files(tmp_path):
    net = random_net(small_params())
    good = tmp_path / "good.bin"
    save_checkpoint(net, str(good))
    blob = good.read_bytes()

    bad_magic = tmp_path / "magic.bin"
    bad_magic.write_bytes(b"NOPE" + blob[4:])
    with pytest.raises(ValueError, match="not an imitator checkpoint"):
        load_checkpoint(str(bad_magic))

    truncated = tmp_path / "short.bin"
    truncated.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(ValueError, match="truncated"):
        load_checkpoint(str(truncated))

    padded = tmp_path / "long.bin"
    padded.write_bytes(blob + b"\x00")
    with pytest.raises(ValueError, match="trailing"):
        load_checkpoint(str(padded))


def test_imitate_all_chunking_is_invisible():
    net = random_net(small_params(), seed=4)
    rng = np.random.default_rng(5)
    h, w = 12, 17
    positions = rng.uniform(-1, 1, size=(h, w, 3))
    valid = rng.random((h, w)) > 0.4
    atlas = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    small = imitate_all(net, positions, valid, atlas, chunk=17)
    big = imitate_all(net, positions, valid, atlas, chunk=1 << 20)
    assert np.array_equal(small, big)
    assert (small[~valid] == 0).all()
    assert (small[valid].sum(axis=-1) > 0).any()


def test_fuse_imitated_fills_only_gaps():
    h, w = 8, 8
    atlas = np.full((h, w, 3), 10, dtype=np.uint8)
    imitated = np.full((h, w, 3), 99, dtype=np.uint8)
    valid = np.zeros((h, w), dtype=bool)
    painted = np.zeros((h, w), dtype=bool)
    valid[:, :6] = True
    painted[:, :3] = True
    count = fuse_imitated(atlas, imitated, painted, valid)
    assert count == 8 * 3
    assert (atlas[:, :3] == 10).all()      # painted texels untouched
    assert (atlas[:, 3:6] == 99).all()     # valid gaps filled
    assert (atlas[:, 6:] == 10).all()      # invalid texels untouched
    assert painted[:, :6].all()
