import json
import math

import numpy as np
import pytest

from modeforge.errors import DimensionError, ModelFormatError, TrainingError
from modeforge.features import FeatureScaler
from modeforge.widedeep import (
    DeepParams,
    TrainConfig,
    WideParams,
    cross_entropy,
    deep_forward,
    init_model,
    load_model,
    loss_and_grads,
    model_from_dict,
    model_to_dict,
    optimizer_init,
    optimizer_step,
    save_model,
    softmax,
    train,
    wide_logits,
)


class TestSoftmax:
    def test_one_hot_logit(self):
        p = softmax(np.array([1.0, 0.0, 0.0, 0.0]))[0]
        # e / (e + 3) and 1 / (e + 3)
        e = math.e
        assert p[0] == pytest.approx(e / (e + 3), abs=1e-4)
        assert p[0] == pytest.approx(0.4754, abs=1e-4)
        for k in (1, 2, 3):
            assert p[k] == pytest.approx(1 / (e + 3), abs=1e-4)

    def test_increasing_logits(self):
        p = softmax(np.array([1.0, 2.0, 3.0, 4.0]))[0]
        np.testing.assert_allclose(
            p, [0.0321, 0.0871, 0.2369, 0.6439], atol=1e-4)

    def test_rows_sum_to_one_and_shift_invariant(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=(50, 4)) * 10
        p = softmax(z)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(p, softmax(z + 123.0), atol=1e-12)

    def test_large_logits_stable(self):
        p = softmax(np.array([1000.0, 0.0, 0.0, 0.0]))[0]
        assert p[0] == pytest.approx(1.0)
        assert np.all(np.isfinite(p))


class TestForward:
    def test_wide_logits_linear(self):
        wide = WideParams(weights=np.array([[1.0, 0.0], [0.0, 2.0],
                                            [1.0, 1.0], [0.0, 0.0]]),
                          bias=np.array([0.0, 0.5, 0.0, -1.0]))
        z = wide_logits(np.array([3.0, 4.0]), wide)[0]
        np.testing.assert_allclose(z, [3.0, 8.5, 7.0, -1.0])

    def test_wide_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            wide_logits(np.zeros(3), WideParams.zeros(5))

    def test_deep_relu_then_linear(self):
        # one hidden unit: z = -x, RELU clips negatives of z
        deep = DeepParams(layers=[
            (np.array([[-1.0]]), np.array([0.5])),
            (np.array([[2.0], [0.0], [0.0], [0.0]]), np.zeros(4)),
        ])
        out, acts = deep_forward(np.array([[2.0]]), deep)
        # hidden pre-activation -1.5 -> RELU 0 -> output 0
        assert acts[1][0, 0] == 0.0
        assert out[0, 0] == 0.0
        out2, _ = deep_forward(np.array([[-2.0]]), deep)
        # hidden 2.5 -> output 5.0
        assert out2[0, 0] == 5.0

    def test_non_finite_activation_raises(self):
        deep = DeepParams(layers=[
            (np.array([[1e308]]), np.zeros(1)),
            (np.ones((4, 1)), np.zeros(4)),
        ])
        with np.errstate(over="ignore"), pytest.raises(TrainingError):
            deep_forward(np.array([[1e10]]), deep)

    def test_cross_entropy_clamped(self):
        probs = np.array([[0.0, 1.0, 0.0, 0.0]])
        val = cross_entropy(probs, np.array([0]))[0]
        assert val == pytest.approx(-math.log(1e-12))


class TestOptimizerClosedForm:
    def test_adagrad_first_step(self):
        cfg = TrainConfig(optimizer="adagrad", learning_rate=0.1)
        p = [np.array([0.0])]
        state = optimizer_init(p, "adagrad")
        optimizer_step(p, [np.array([2.0])], state, cfg)
        # -0.1 * 2 / (sqrt(4) + 1e-8)
        assert p[0][0] == pytest.approx(-0.1, rel=1e-7)

    def test_rmsprop_first_step(self):
        cfg = TrainConfig(optimizer="rmsprop", learning_rate=0.1,
                          rmsprop_decay=0.9)
        p = [np.array([0.0])]
        state = optimizer_init(p, "rmsprop")
        optimizer_step(p, [np.array([1.0])], state, cfg)
        # -0.1 / (sqrt(0.1) + eps) = -0.31623
        assert p[0][0] == pytest.approx(-0.31623, abs=1e-5)

    def test_adam_first_step(self):
        cfg = TrainConfig(optimizer="adam", learning_rate=0.001)
        p = [np.array([0.0])]
        state = optimizer_init(p, "adam")
        optimizer_step(p, [np.array([1.0])], state, cfg)
        # bias-corrected m_hat = v_hat = 1 at t=1, so the step is ~ -lr
        assert p[0][0] == pytest.approx(-0.001, rel=1e-6)

    def test_adagrad_accumulates(self):
        cfg = TrainConfig(optimizer="adagrad", learning_rate=0.1)
        p = [np.array([0.0])]
        state = optimizer_init(p, "adagrad")
        optimizer_step(p, [np.array([1.0])], state, cfg)
        first = p[0][0]
        optimizer_step(p, [np.array([1.0])], state, cfg)
        second = p[0][0] - first
        assert abs(second) < abs(first)  # step shrinks as G grows

    def test_non_finite_gradient_rejected(self):
        cfg = TrainConfig(optimizer="adagrad")
        p = [np.array([0.0])]
        state = optimizer_init(p, "adagrad")
        with pytest.raises(TrainingError):
            optimizer_step(p, [np.array([float("nan")])], state, cfg)


class TestGradients:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        d, n = 5, 12
        cfg = TrainConfig(hidden_widths=(4, 3), combine_trainable=True)
        model = init_model(d, cfg, rng)
        model.wide.weights[:] = rng.normal(scale=0.3, size=(4, d))
        model.wide.bias[:] = rng.normal(scale=0.1, size=4)
        x = rng.uniform(0, 1, size=(n, d))
        y = rng.integers(0, 4, size=n)
        _, grads = loss_and_grads(x, y, model, combine_trainable=True)

        h = 1e-5
        flat_params = [model.wide.weights, model.wide.bias]
        flat_grads = [grads["wide_weights"], grads["wide_bias"]]
        for (gw, gb), (w, b) in zip(grads["deep_layers"], model.deep.layers):
            flat_params += [w, b]
            flat_grads += [gw, gb]
        flat_params.append(model.combine_weights)
        flat_grads.append(grads["combine"])

        worst = 0.0
        for p, g in zip(flat_params, flat_grads):
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                old = p[ix]
                p[ix] = old + h
                lp, _ = loss_and_grads(x, y, model, combine_trainable=True)
                p[ix] = old - h
                lm, _ = loss_and_grads(x, y, model, combine_trainable=True)
                p[ix] = old
                fd = (lp - lm) / (2 * h)
                denom = max(abs(fd), abs(g[ix]), 1e-8)
                worst = max(worst, abs(fd - g[ix]) / denom)
        assert worst < 1e-5

    def test_zero_deep_weight_ignores_deep_component(self):
        rng = np.random.default_rng(1)
        cfg = TrainConfig(hidden_widths=(6,))
        model = init_model(3, cfg, rng)
        model.combine_weights = np.array([1.0, 0.0])
        x = rng.uniform(0, 1, size=(8, 3))
        y = rng.integers(0, 4, size=8)
        _, grads = loss_and_grads(x, y, model)
        for gw, gb in grads["deep_layers"]:
            assert np.all(gw == 0.0)
            assert np.all(gb == 0.0)


def _toy_problem(n=120, d=4, seed=0):
    """Linearly separable-ish 4-class blobs in the unit cube."""
    rng = np.random.default_rng(seed)
    centers = np.array([[0.2, 0.2, 0.2, 0.2],
                        [0.8, 0.2, 0.8, 0.2],
                        [0.2, 0.8, 0.2, 0.8],
                        [0.8, 0.8, 0.8, 0.8]])
    y = rng.integers(0, 4, size=n)
    x = np.clip(centers[y] + rng.normal(scale=0.08, size=(n, d)), 0, 1)
    return x, y


class TestTrain:
    CFG = dict(epochs=40, batch_size=16, hidden_widths=(16, 8),
               learning_rate=0.01)

    def test_loss_decreases_and_fits(self):
        x, y = _toy_problem()
        log = []
        model = train(x, y, TrainConfig(seed=3, **self.CFG), epoch_log=log)
        assert log[-1][1] < log[0][1]
        acc = float((model.predict(x) == y).mean())
        assert acc > 0.95

    def test_deterministic_per_seed(self):
        x, y = _toy_problem()
        m1 = train(x, y, TrainConfig(seed=7, **self.CFG))
        m2 = train(x, y, TrainConfig(seed=7, **self.CFG))
        np.testing.assert_array_equal(m1.wide.weights, m2.wide.weights)
        for (w1, b1), (w2, b2) in zip(m1.deep.layers, m2.deep.layers):
            np.testing.assert_array_equal(w1, w2)
            np.testing.assert_array_equal(b1, b2)
        m3 = train(x, y, TrainConfig(seed=8, **self.CFG))
        assert not np.array_equal(m1.deep.layers[0][0], m3.deep.layers[0][0])

    def test_single_class_rejected(self):
        x = np.random.default_rng(0).uniform(size=(10, 3))
        with pytest.raises(TrainingError):
            train(x, np.zeros(10, dtype=int), TrainConfig(**self.CFG))

    def test_pinned_combine_weights_survive(self):
        x, y = _toy_problem(n=60)
        m = train(x, y, TrainConfig(seed=0, epochs=2, hidden_widths=(4,)),
                  combine_weights=(1.0, 0.0))
        np.testing.assert_array_equal(m.combine_weights, [1.0, 0.0])

    def test_all_optimizers_run(self):
        x, y = _toy_problem(n=60)
        for opt in ("adagrad", "rmsprop", "adam"):
            m = train(x, y, TrainConfig(optimizer=opt, epochs=5,
                                        hidden_widths=(8,)))
            assert m.metadata["optimizer"] == opt

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            TrainConfig(optimizer="sgd")
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)


class TestSerialization:
    def _model(self):
        x, y = _toy_problem(n=60)
        scaler = FeatureScaler(minimum=np.zeros(4), maximum=np.ones(4))
        return train(x, y, TrainConfig(seed=1, epochs=3, hidden_widths=(6,)),
                     scaler=scaler), x

    def test_round_trip_identical_predictions(self, tmp_path):
        model, x = self._model()
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(model.predict_proba(x),
                                      loaded.predict_proba(x))
        assert loaded.class_order == model.class_order
        np.testing.assert_array_equal(loaded.scaler.minimum,
                                      model.scaler.minimum)
        assert loaded.metadata["optimizer"] == "rmsprop"

    def test_version_mismatch_rejected(self, tmp_path):
        model, _ = self._model()
        doc = model_to_dict(model)
        doc["format_version"] = 99
        with pytest.raises(ModelFormatError, match="version"):
            model_from_dict(doc)

    def test_wrong_kind_rejected(self):
        model, _ = self._model()
        doc = model_to_dict(model)
        doc["kind"] = "forest"
        with pytest.raises(ModelFormatError):
            model_from_dict(doc)

    def test_corrupt_file_rejected(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text("{]")
        with pytest.raises(ModelFormatError):
            load_model(p)
        p.write_text(json.dumps({"format_version": 1, "kind": "wide_deep"}))
        with pytest.raises(ModelFormatError, match="corrupt"):
            load_model(p)
