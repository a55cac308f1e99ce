import numpy as np
import pytest
from pydantic import ValidationError

from stackcnn.models.cnn import CnnModel, feature_shapes, sigmoid
from stackcnn.schemas.classifier import Architecture, ClassifierInput, CnnHyperParams, TrainingSet
from stackcnn.services.classifier import gradient_check
from stackcnn.services.cnn_training import (
    evaluate_accuracy,
    injected_scene,
    make_training_set,
    source_rate_for_snr,
    train_cnn,
)
from stackcnn.services.model_store import dump_model, load_model, parse_model, save_model
from stackcnn.utils.errors import ConfigError, DataFormatError

SMALL = Architecture(input_shape=(10, 10), conv_filters=(2, 3))
LINEAR = Architecture(input_shape=(6, 7), conv_filters=())


def _input(shape, seed=0):
    return ClassifierInput(normalized_grid=np.random.default_rng(seed).normal(size=shape))


def test_default_architecture_shapes():
    arch = Architecture(input_shape=(60, 80))
    assert feature_shapes(arch) == [(1, 60, 80), (8, 29, 39), (16, 13, 18)]
    shapes = CnnModel.param_shapes(arch)
    assert shapes["conv0.w"] == (8, 1, 3, 3)
    assert shapes["conv1.w"] == (16, 8, 3, 3)
    assert shapes["fc.w"] == (16 * 13 * 18,)
    assert shapes["fc.b"] == ()


def test_input_too_small_for_stages():
    with pytest.raises(ConfigError):
        feature_shapes(Architecture(input_shape=(4, 4)))


def test_params_must_fit_architecture():
    params = {name: np.zeros(shape) for name, shape in CnnModel.param_shapes(LINEAR).items()}
    params["fc.w"] = np.zeros(3)
    with pytest.raises(ConfigError):
        CnnModel(LINEAR, params)


def test_output_is_a_probability():
    model = CnnModel.initialize(SMALL, seed=5)
    probs = model.predict_proba(np.random.default_rng(5).normal(scale=50.0, size=(20, 10, 10)))
    assert probs.shape == (20,)
    assert np.all((probs >= 0) & (probs <= 1))


@pytest.mark.parametrize("label", [0, 1])
def test_gradient_check_small_cnn(label):
    model = CnnModel.initialize(SMALL, seed=11)
    assert gradient_check(model, _input((10, 10), seed=label), label) < 1e-4


def test_gradient_check_logistic_regression():
    model = CnnModel.initialize(LINEAR, seed=2)
    assert gradient_check(model, _input((6, 7)), 1) < 1e-4


def test_linear_gradient_matches_closed_form():
    model = CnnModel.initialize(LINEAR, seed=4)
    x = _input((6, 7), seed=4).normalized_grid
    _, grads = model.loss_and_grads(x, [1.0])
    p = sigmoid(np.array([x.reshape(-1) @ model.params["fc.w"] + model.params["fc.b"]]))[0]
    assert np.max(np.abs(grads["fc.w"] - (p - 1.0) * x.reshape(-1))) < 1e-10
    assert float(grads["fc.b"]) == pytest.approx(p - 1.0, abs=1e-10)


@pytest.mark.parametrize("label", [0, 1])
def test_zero_model_bias_gradient(label):
    model = CnnModel.zeros(SMALL)
    _, grads = model.loss_and_grads(np.zeros((10, 10)), [label])
    assert float(grads["fc.b"]) == pytest.approx(0.5 - label)


def test_gradient_check_leaves_model_untouched():
    model = CnnModel.initialize(SMALL, seed=1)
    before = {name: value.copy() for name, value in model.params.items()}
    gradient_check(model, _input((10, 10)), 0)
    for name, value in model.params.items():
        assert np.array_equal(value, before[name])


def test_model_file_round_trip_is_bit_exact(tmp_path):
    model = CnnModel.initialize(SMALL, seed=9)
    model.metadata.loss_curve = [0.7, 0.5, 0.25]
    path = save_model(model, tmp_path / "m.scnn")
    loaded = load_model(path)
    assert loaded.architecture == model.architecture
    assert loaded.metadata == model.metadata
    for name, value in model.params.items():
        assert loaded.params[name].tobytes() == value.tobytes()
    x = _input((10, 10)).normalized_grid
    assert loaded.predict_proba(x).tobytes() == model.predict_proba(x).tobytes()
    assert dump_model(loaded) == path.read_bytes()


def test_model_file_layout():
    data = dump_model(CnnModel.zeros(LINEAR))
    assert data[:4] == b"SCNN"
    assert int.from_bytes(data[4:8], "little") == 1
    json_len = int.from_bytes(data[8:12], "little")
    assert len(data) == 12 + json_len + 8 * (6 * 7 + 1)


@pytest.mark.parametrize(
    "mangle, fragment",
    [
        (lambda d: b"XCNN" + d[4:], "bad magic"),
        (lambda d: d[:-1], "truncated"),
        (lambda d: d[:6], "truncated"),
        (lambda d: d + b"\0", "trailing"),
        (lambda d: d[:4] + (2).to_bytes(4, "little") + d[8:], "version"),
    ],
)
def test_corrupt_model_file(mangle, fragment):
    data = dump_model(CnnModel.zeros(LINEAR))
    with pytest.raises(DataFormatError, match=fragment):
        parse_model(mangle(data))


def test_missing_model_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_model(tmp_path / "absent.scnn")


def test_source_rate_for_snr():
    # 5 sigma over 16 frames of 4 background counts needs 5 counts/frame in the peak pixel
    assert source_rate_for_snr(5.0, 16, 4.0) == pytest.approx(50.0)


def test_injected_scene_rejects_small_grid():
    with pytest.raises(ConfigError):
        injected_scene(np.random.default_rng(0), (6, 6), 16, (1.0, 0.0), 5.0, 4.0)


def test_injected_scene_places_source_inside_grid():
    rng = np.random.default_rng(0)
    config, newest = injected_scene(rng, (30, 40), 8, (1.0, -0.5), 8.0, 4.0)
    assert config.duration == 8 * config.dt
    assert 2 + 7 <= newest[0] <= 40 - 3
    assert 2 <= newest[1] <= 30 - 3 - 3.5
    (source,) = config.sources
    assert source.velocity == pytest.approx((10.0, -5.0))


def test_training_set_is_balanced_and_normalized():
    data = make_training_set(size=20, seed=1, shape=(12, 16), n=4)
    assert data.inputs.shape == (20, 12, 16)
    assert data.labels.sum() == 10
    assert np.abs(data.inputs.mean(axis=(1, 2))).max() < 1e-9


def test_training_set_rejects_label_mismatch():
    with pytest.raises(ValidationError):
        TrainingSet(inputs=np.zeros((3, 4, 4)), labels=[0, 1])


@pytest.fixture(scope="module")
def tiny_set():
    return make_training_set(size=40, seed=0, shape=(12, 16), n=4)


def test_training_is_deterministic(tiny_set):
    hp = CnnHyperParams(epochs=3, batch_size=8, seed=5)
    first = train_cnn(tiny_set, hp)
    second = train_cnn(tiny_set, hp)
    for name in first.params:
        assert first.params[name].tobytes() == second.params[name].tobytes()
    assert first.metadata.loss_curve == second.metadata.loss_curve


def test_training_lowers_loss(tiny_set):
    model = train_cnn(tiny_set, CnnHyperParams(epochs=15, batch_size=8, seed=0))
    meta = model.metadata
    assert len(meta.loss_curve) == 15
    assert meta.loss_curve[-1] < meta.initial_loss
    assert meta.seed == 0 and meta.epochs == 15


def test_zero_epochs_returns_initialized_model(tiny_set):
    model = train_cnn(tiny_set, CnnHyperParams(epochs=0, seed=3), validation=tiny_set)
    fresh = CnnModel.initialize(model.architecture, 3)
    assert model.metadata.loss_curve == []
    for name in fresh.params:
        assert np.array_equal(model.params[name], fresh.params[name])
    assert 0.0 <= model.metadata.validation_accuracy <= 1.0


def test_single_class_dataset_rejected():
    data = TrainingSet(inputs=np.zeros((4, 12, 16)), labels=[1, 1, 1, 1])
    with pytest.raises(ConfigError):
        train_cnn(data, CnnHyperParams(epochs=1))


def test_accuracy_of_empty_set_is_nan():
    empty = TrainingSet(inputs=np.zeros((0, 12, 16)), labels=[])
    assert np.isnan(evaluate_accuracy(CnnModel.zeros(Architecture(input_shape=(12, 16))), empty))
