import math

import numpy as np
import pytest

from vinegen.autoencoder import (
    DenseAutoencoder,
    TrainConfig,
    gradient_check,
    smoothed_history,
    train,
)
from vinegen.datasets import load_digits8
from vinegen.errors import BundleFormatError, DomainError, TrainingDivergedError

SMALL_DIMS = (16, 8, 3, 8, 16)


@pytest.fixture
def small_batch():
    return np.random.default_rng(41).uniform(size=(8, 16))


def test_layer_dims_from_config():
    cfg = TrainConfig(latent_dim=4, hidden_dims=(32, 16))
    assert cfg.layer_dims(64) == (64, 32, 16, 4, 16, 32, 64)
    assert cfg.loss == "bce"
    assert TrainConfig(output_activation="linear").loss == "mse"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"learning_rate": 0.0},
        {"weight_decay": -1.0},
        {"batch_size": 0},
        {"hidden_dims": (0,)},
        {"adam_beta1": 1.0},
        {"hidden_activation": "tanh"},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(DomainError):
        TrainConfig(**kwargs)


def test_config_dict_round_trip():
    cfg = TrainConfig(latent_dim=3, hidden_dims=(8, 4), seed=9)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_layer_dims_must_be_symmetric():
    with pytest.raises(DomainError):
        DenseAutoencoder.zeros((8, 4, 2, 3, 8))
    with pytest.raises(DomainError):
        DenseAutoencoder.zeros((8, 4, 4, 8))


def test_shapes_and_output_range(small_batch):
    ae = DenseAutoencoder.initialize(SMALL_DIMS, seed=1)
    assert ae.latent_dim == 3 and ae.input_dim == 16
    z = ae.encode(small_batch)
    assert z.shape == (8, 3)
    out = ae.decode(z)
    assert out.shape == (8, 16)
    assert np.all((out > 0) & (out < 1))
    assert np.array_equal(ae.encode(small_batch), z)
    with pytest.raises(DomainError):
        ae.encode(np.zeros((2, 15)))
    with pytest.raises(DomainError):
        ae.decode(np.zeros((2, 4)))


def test_zero_weights_encode_to_the_bias():
    ae = DenseAutoencoder.zeros((4, 3, 2, 3, 4))
    ae.biases[1][:] = [0.3, -0.2]
    z = ae.encode(np.random.default_rng(0).uniform(size=(5, 4)))
    assert np.array_equal(z, np.tile([0.3, -0.2], (5, 1)))


def test_single_unit_output_bias_gradient():
    ae = DenseAutoencoder.zeros((1, 1, 1))
    loss, _, grad_b = ae.gradients(np.zeros((1, 1)))
    assert grad_b[-1][0] == 0.5
    assert loss == pytest.approx(math.log(2.0))


def test_gradient_check_at_initialization(small_batch):
    ae = DenseAutoencoder.initialize(SMALL_DIMS, seed=2)
    assert gradient_check(ae, small_batch, n_weights=100) < 1e-4


def test_gradient_check_for_mean_squared_error(small_batch):
    ae = DenseAutoencoder.initialize(SMALL_DIMS, seed=3, output_activation="linear")
    assert gradient_check(ae, small_batch, n_weights=100) < 1e-4


def test_gradient_check_after_training(small_batch):
    data = np.random.default_rng(42).uniform(size=(64, 16))
    cfg = TrainConfig(latent_dim=3, hidden_dims=(8,), epochs=20, batch_size=16, learning_rate=0.01)
    result = train(data, cfg)
    assert gradient_check(result.model, small_batch, n_weights=100) < 1e-3


def test_constant_images_reach_the_entropy_bound():
    data = np.full((100, 8), 0.5)
    cfg = TrainConfig(latent_dim=2, hidden_dims=(4,), epochs=100, batch_size=20, learning_rate=0.01)
    result = train(data, cfg)
    assert result.history[0] >= math.log(2.0)
    assert result.final_loss == pytest.approx(math.log(2.0), abs=5e-3)


def test_training_is_bit_reproducible():
    data = np.random.default_rng(43).uniform(size=(60, 16))
    cfg = TrainConfig(latent_dim=3, hidden_dims=(8,), epochs=5, batch_size=16, seed=7)
    first, second = train(data, cfg), train(data, cfg)
    assert first.history == second.history
    for a, b in zip(first.model.parameters(), second.model.parameters()):
        assert np.array_equal(a, b)


def test_reported_loss_matches_reconstruction():
    data = np.random.default_rng(44).uniform(size=(40, 16))
    result = train(data, TrainConfig(latent_dim=3, hidden_dims=(8,), epochs=3, batch_size=8))
    assert len(result.history) == 4
    assert result.model.loss(data) == pytest.approx(result.final_loss, abs=1e-9)


def test_linear_autoencoder_recovers_a_rank_two_subspace():
    rng = np.random.default_rng(45)
    latent = rng.normal(size=(500, 2))
    basis = rng.normal(size=(2, 64))
    data = 0.5 + 0.1 * latent @ basis
    cfg = TrainConfig(
        latent_dim=2,
        hidden_dims=(),
        epochs=300,
        batch_size=25,
        learning_rate=0.01,
        weight_decay=0.0,
        hidden_activation="linear",
        output_activation="linear",
    )
    result = train(data, cfg)
    assert result.final_loss < 1e-3


def test_training_input_checks():
    cfg = TrainConfig(latent_dim=2, hidden_dims=(4,), epochs=1)
    with pytest.raises(DomainError):
        train(np.full((10, 8), 2.0), cfg)
    with pytest.raises(DomainError):
        train(np.empty((0, 8)), cfg)
    with pytest.raises(DomainError):
        train(np.full((10, 8), 0.5), cfg, init=DenseAutoencoder.zeros((6, 2, 6)))


def test_divergence_is_reported():
    init = DenseAutoencoder.zeros((4, 2, 4), hidden_activation="linear", output_activation="linear")
    init.weights[0][:] = 1e200
    init.weights[1][:] = 1e200
    cfg = TrainConfig(latent_dim=2, hidden_dims=(), epochs=3, output_activation="linear")
    with np.errstate(all="ignore"), pytest.raises(TrainingDivergedError, match="learning rate"):
        train(np.full((10, 4), 0.5), cfg, init=init)


def test_smoothed_history():
    assert smoothed_history([]).size == 0
    smooth = smoothed_history([1.0, 0.0, 0.0], span=3)
    assert np.allclose(smooth, [1.0, 0.5, 0.25])


def test_dict_round_trip(small_batch):
    ae = DenseAutoencoder.initialize(SMALL_DIMS, seed=4)
    restored = DenseAutoencoder.from_dict(ae.to_dict())
    assert np.array_equal(restored.reconstruct(small_batch), ae.reconstruct(small_batch))
    payload = ae.to_dict()
    payload["weights"][0] = payload["weights"][0][:-1]
    with pytest.raises(BundleFormatError):
        DenseAutoencoder.from_dict(payload)


@pytest.mark.slow
def test_digit_training_halves_the_loss():
    x = load_digits8().x[:1000]
    cfg = TrainConfig(latent_dim=10, hidden_dims=(32,), epochs=200, batch_size=64)
    result = train(x, cfg)
    assert result.final_loss < 0.5 * result.history[0]
    smooth = smoothed_history(result.history)
    assert smooth[-1] < smooth[10]
    assert np.all(result.model.encode(x).var(axis=0) > 1e-6)
