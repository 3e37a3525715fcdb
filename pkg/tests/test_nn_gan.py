import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraudstream.exceptions import ConfigError, DimensionError, TrainingDivergedError
from fraudstream.gan import (
    GanConfig,
    GANOversampler,
    build_generator,
    generate_samples,
    load_generator,
    save_generator,
    train_gan,
)
from fraudstream.nn import DenseNet, Layer


def test_identity_linear_net():
    net = DenseNet([Layer(np.eye(3), np.zeros(3), "linear")])
    x = np.array([0.3, -2.0, 5.0])
    assert np.array_equal(net.forward(x), x)


def test_zero_weight_sigmoid_gives_half():
    net = DenseNet([Layer(np.zeros((4, 2)), np.zeros(2), "sigmoid")])
    assert np.all(net.forward(np.ones((5, 4))) == 0.5)


def test_hand_forward_2_2_1():
    W1 = np.array([[1.0, -1.0], [2.0, 0.5]])
    b1 = np.array([0.0, 0.1])
    W2 = np.array([[1.0], [3.0]])
    net = DenseNet([Layer(W1, b1, "leaky_relu"), Layer(W2, np.array([-0.5]), "linear")])
    # h = leaky([1*1 + 2*1, -1*1 + .5*1 + .1]) = [3, 0.2 * -0.4]
    expected = 3.0 + 3 * (0.2 * -0.4) - 0.5
    assert net.forward([1.0, 1.0])[0] == pytest.approx(expected, abs=1e-15)


def test_forward_dimension_error_and_chaining():
    net = DenseNet.build((3, 4, 1), "tanh", "sigmoid")
    with pytest.raises(DimensionError):
        net.forward(np.zeros(2))
    with pytest.raises(DimensionError):
        DenseNet([Layer(np.zeros((2, 3)), np.zeros(3), "linear"), Layer(np.zeros((2, 1)), np.zeros(1), "linear")])


def test_zero_gradient_propagates_to_zero():
    net = DenseNet.build((3, 5, 2), "leaky_relu", "sigmoid", seed=1)
    net.forward(np.ones((4, 3)))
    grads, _ = net.backward(np.zeros((4, 2)))
    assert all(np.all(g == 0) for g in grads)


def test_linear_neuron_squared_loss():
    net = DenseNet([Layer(np.array([[0.5], [-1.0]]), np.array([0.2]), "linear")])
    x, y = np.array([2.0, 3.0]), 1.0
    yhat = net.forward(x)[0]
    grads, _ = net.backward(np.array([2 * (yhat - y)]))
    np.testing.assert_allclose(grads[0].ravel(), 2 * (yhat - y) * x)
    assert grads[1][0] == pytest.approx(2 * (yhat - y))


def _loss(net, X, T):
    return 0.5 * np.sum((net.forward(X) - T) ** 2)


@given(st.integers(0, 10**6), st.sampled_from(["tanh", "sigmoid", "leaky_relu"]))
def test_gradients_match_finite_differences(seed, act):
    rng = np.random.default_rng(seed)
    net = DenseNet.build((3, 4, 3, 2), act, "sigmoid", seed=seed)
    X, T = rng.normal(size=(5, 3)), rng.random((5, 2))
    out = net.forward(X)
    grads, _ = net.backward(out - T)
    h = 1e-5
    for p, g in zip(net.params(), grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = _loss(net, X, T)
            p[idx] = old - h
            down = _loss(net, X, T)
            p[idx] = old
            num = (up - down) / (2 * h)
            # leaky kinks make a tiny share of points non-differentiable
            assert abs(num - g[idx]) <= 1e-4 * max(1.0, abs(num), abs(g[idx])) or act == "leaky_relu" and abs(num - g[idx]) < 1e-3


def test_gan_config_validation():
    with pytest.raises(ConfigError):
        GanConfig(variant="dcgan")
    with pytest.raises(ConfigError):
        GanConfig(wgan_clip=0.0)


@pytest.mark.parametrize("variant", ["vanilla", "wasserstein"])
def test_zero_epochs_returns_initial_generator(variant):
    cfg = GanConfig(epochs=0, variant=variant, seed=4)
    gen = train_gan(np.full((10, 2), 0.5), cfg)
    init = build_generator(2, cfg)
    assert all(np.array_equal(a, b) for a, b in zip(gen.net.params(), init.params()))


def test_generate_range_and_empty():
    gen = train_gan(np.random.default_rng(0).random((20, 3)), GanConfig(epochs=5))
    assert generate_samples(gen, 0).shape == (0, 3)
    S = generate_samples(gen, 500, seed=1)
    assert S.shape == (500, 3) and np.all((S > 0) & (S < 1))


def test_training_is_deterministic():
    data = np.random.default_rng(2).random((30, 2))
    for variant in ("vanilla", "wasserstein"):
        cfg = GanConfig(epochs=15, variant=variant, seed=9)
        a, b = train_gan(data, cfg), train_gan(data, cfg)
        assert all(np.array_equal(p, q) for p, q in zip(a.net.params(), b.net.params()))
        assert np.array_equal(generate_samples(a, 50, 3), generate_samples(b, 50, 3))


def test_critic_weights_stay_clipped():
    seen = []

    def check(epoch, critic):
        seen.append(max(float(np.abs(p).max()) for p in critic.params()))

    train_gan(np.random.default_rng(0).random((40, 2)), GanConfig(epochs=10, variant="wasserstein"), monitor=check)
    assert len(seen) == 50 and max(seen) <= 0.01


def test_vanilla_discriminator_outputs_in_open_unit_interval():
    outs = []

    def check(epoch, disc):
        outs.append(disc.forward(np.random.default_rng(epoch).random((16, 2))))

    gen = train_gan(np.random.default_rng(0).random((40, 2)), GanConfig(epochs=20), monitor=check)
    allv = np.concatenate(outs)
    assert np.all((allv > 0) & (allv < 1))
    lo, hi = gen.history["d_output_range"]
    assert 0 < lo <= hi < 1


def test_rejects_unnormalised_and_empty():
    with pytest.raises(ConfigError):
        train_gan(np.array([[2.0]]), GanConfig(epochs=1))
    with pytest.raises(ConfigError):
        train_gan(np.empty((0, 2)), GanConfig(epochs=1))


def test_divergence_raises_with_epoch():
    cfg = GanConfig(epochs=3, learning_rate=1e308, variant="wasserstein", wgan_clip=1e308)
    with pytest.raises(TrainingDivergedError) as err:
        with np.errstate(all="ignore"):
            train_gan(np.random.default_rng(0).random((10, 2)), cfg)
    assert err.value.epoch is not None


def test_save_load_roundtrip(tmp_path):
    gen = train_gan(np.random.default_rng(0).random((20, 4)), GanConfig(epochs=3, variant="wasserstein"))
    path = tmp_path / "g.bin"
    save_generator(gen, path)
    back = load_generator(path)
    assert back.latent_dim == gen.latent_dim
    assert np.array_equal(generate_samples(gen, 20, 5), generate_samples(back, 20, 5))
    raw = path.read_bytes()
    assert raw[:8] == b"FSGEN\x00\x00\x01"
    n_params = sum(p.size for p in gen.net.params())
    assert len(raw) == 8 + 8 + 12 * len(gen.net.layers) + 8 * n_params


def test_oversampler_balances_with_generated_rows():
    rng = np.random.default_rng(0)
    X = rng.random((40, 2))
    y = np.array([1] * 8 + [0] * 32)
    Xb, yb = GANOversampler(epochs=5, seed=1).fit_resample(X, y)
    assert (yb == 1).sum() == 32 and np.array_equal(Xb[:40], X)


@pytest.mark.slow
@pytest.mark.parametrize("variant", ["vanilla", "wasserstein"])
def test_point_mass_target(variant):
    gen = train_gan(np.full((200, 1), 0.7), GanConfig(epochs=2000, variant=variant, seed=0))
    S = generate_samples(gen, 1000, seed=1)
    assert abs(S.mean() - 0.7) <= 0.1
    assert S.std() < 0.2
