import numpy as np
import pytest

from sleepsynth.forecasters import (ARCHITECTURES, ForecasterSpec, TrainConfig,
                                    batch_loss_and_grads, forward_batch,
                                    huber_gradient, huber_loss, init_model,
                                    parameter_count, predict,
                                    train_class_forecaster)
from sleepsynth.nn import ParameterVector
from sleepsynth.signals import ClassLabel
from sleepsynth.windowing import ClassStream, WindowConfig, build_class_streams, \
    build_pairs

SMALL = dict(context_len=10, horizon=20, hidden_width=8)


def fd_gradient(spec, params, X, Y, delta=1.0, eps=1e-6):
    """Central finite differences of the centered-forward Huber loss."""
    base = params.flat.copy()
    grad = np.zeros_like(base)
    for i in range(base.size):
        up = base.copy()
        up[i] += eps
        dn = base.copy()
        dn[i] -= eps
        loss_up = huber_loss(forward_batch(spec, ParameterVector(params.layout, up), X),
                             Y, delta)
        loss_dn = huber_loss(forward_batch(spec, ParameterVector(params.layout, dn), X),
                             Y, delta)
        grad[i] = (loss_up - loss_dn) / (2 * eps)
    return grad


def max_rel_error(a, b, floor=1e-6):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)),
                                                   floor)))


def pairs_from_run(run, L, H):
    return build_pairs(ClassStream(label=ClassLabel.NREM, runs=(np.asarray(run, float),)),
                       WindowConfig(L, H))


class TestHuber:
    def test_zero_residual(self):
        x = np.arange(5, dtype=float)
        assert huber_loss(x, x, 1.0) == 0.0

    def test_quadratic_zone(self):
        assert huber_loss(np.array([0.5]), np.array([0.0]), 1.0) == pytest.approx(0.125)

    def test_linear_zone(self):
        assert huber_loss(np.array([2.0]), np.array([0.0]), 1.0) == pytest.approx(1.5)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            huber_loss(np.ones(3), np.ones(4), 1.0)
        with pytest.raises(ValueError):
            huber_gradient(np.ones(3), np.ones(4), 1.0)

    def test_gradient_zero_residual(self):
        x = np.ones(7)
        np.testing.assert_array_equal(huber_gradient(x, x, 1.0), np.zeros(7))

    def test_gradient_clipped(self):
        g = huber_gradient(np.array([2.0]), np.array([0.0]), 1.0)
        assert g[0] == pytest.approx(1.0)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(31)
        pred = rng.normal(size=50) * 2
        target = rng.normal(size=50) * 2
        eps = 1e-6
        fd = np.zeros(50)
        for i in range(50):
            up = pred.copy()
            up[i] += eps
            dn = pred.copy()
            dn[i] -= eps
            fd[i] = (huber_loss(up, target, 1.0) - huber_loss(dn, target, 1.0)) / (2 * eps)
        assert max_rel_error(huber_gradient(pred, target, 1.0), fd, floor=1e-4) < 1e-4


class TestInit:
    def test_same_seed_bit_identical(self):
        spec = ForecasterSpec("MLP", **SMALL)
        a = init_model(spec, 7)
        b = init_model(spec, 7)
        np.testing.assert_array_equal(a.params.flat, b.params.flat)

    def test_linear_parameter_count(self):
        spec = ForecasterSpec("LinearDMS", context_len=100, horizon=500)
        assert parameter_count(spec) == 100 * 500 + 500
        assert init_model(spec, 0).params.size == 50500

    def test_different_seeds_differ(self):
        spec = ForecasterSpec("LinearDMS", context_len=100, horizon=500)
        a = init_model(spec, 1).params.flat
        b = init_model(spec, 2).params.flat
        assert np.mean(a != b) >= 0.99

    def test_biases_zero(self):
        model = init_model(ForecasterSpec("MLP", **SMALL), 3)
        np.testing.assert_array_equal(model.params["b1"], 0.0)
        np.testing.assert_array_equal(model.params["b2"], 0.0)

    def test_unknown_architecture_rejected(self):
        with pytest.raises(ValueError):
            ForecasterSpec("Transformer", context_len=10, horizon=20)


class TestGradients:
    @pytest.mark.parametrize("arch", sorted(ARCHITECTURES))
    def test_architecture_gradient_check(self, arch):
        for seed in (0, 1, 2):
            spec = ForecasterSpec(arch, **SMALL)
            model = init_model(spec, seed)
            params = ParameterVector(model.params.layout, model.params.flat.copy())
            rng = np.random.default_rng(100 + seed)
            X = rng.normal(size=(4, SMALL["context_len"]))
            Y = rng.normal(size=(4, SMALL["horizon"]))
            grads = params.zeros_like()
            batch_loss_and_grads(spec, params, grads, X, Y, 1.0)
            fd = fd_gradient(spec, params, X, Y)
            assert max_rel_error(grads.flat, fd) < 1e-4, arch


class TestTraining:
    def test_loss_drops_on_constant_target(self):
        # zero-mean contexts so per-window centering leaves no residual
        # offset; the all-zero target is then exactly representable
        rng = np.random.default_rng(41)
        spec = ForecasterSpec("LinearDMS", context_len=10, horizon=20)
        from sleepsynth.windowing import WindowPair
        pairs = []
        for _ in range(200):
            c = rng.normal(size=10)
            pairs.append(WindowPair(context=c - c.mean(), target=np.zeros(20)))
        model = train_class_forecaster(pairs, spec, TrainConfig(seed=5),
                                       ClassLabel.NREM)
        assert model.loss_curve[-1] < 0.1 * model.loss_curve[0]

    def test_repeat_last_mapping_is_learned(self):
        # y = repeat(last of x) commutes with centering, so the mapping is
        # exactly representable by the affine model
        rng = np.random.default_rng(43)
        from sleepsynth.windowing import WindowPair
        spec = ForecasterSpec("LinearDMS", context_len=10, horizon=20)
        pairs = []
        for _ in range(300):
            c = rng.normal(size=10)
            pairs.append(WindowPair(context=c, target=np.full(20, c[-1])))
        model = train_class_forecaster(pairs, spec,
                                       TrainConfig(seed=6, max_steps=2000),
                                       ClassLabel.NREM)
        assert model.loss_curve[-1] < 1e-3
        held_out = rng.normal(size=10)
        pred = predict(model, held_out)
        assert np.max(np.abs(pred - held_out[-1])) < 0.05

    def test_bit_identical_retrain(self):
        pairs = pairs_from_run(np.sin(np.arange(200) / 7.0), 10, 20)
        spec = ForecasterSpec("MLP", **SMALL)
        a = train_class_forecaster(pairs, spec, TrainConfig(seed=9, max_steps=50),
                                   ClassLabel.REM)
        b = train_class_forecaster(pairs, spec, TrainConfig(seed=9, max_steps=50),
                                   ClassLabel.REM)
        np.testing.assert_array_equal(a.params.flat, b.params.flat)
        assert a.loss_curve == b.loss_curve

    def test_empty_pairs_rejected_with_class_name(self):
        with pytest.raises(ValueError, match="REM"):
            train_class_forecaster([], ForecasterSpec("LinearDMS", **SMALL),
                                   TrainConfig(), ClassLabel.REM)

    def test_pair_shape_mismatch_rejected(self):
        pairs = pairs_from_run(np.arange(100, dtype=float), 5, 10)
        with pytest.raises(ValueError, match="match spec"):
            train_class_forecaster(pairs, ForecasterSpec("LinearDMS", **SMALL),
                                   TrainConfig(), ClassLabel.NREM)

    def test_loss_curve_length_is_step_budget(self):
        pairs = pairs_from_run(np.arange(100, dtype=float), 10, 20)
        model = train_class_forecaster(pairs, ForecasterSpec("LinearDMS", **SMALL),
                                       TrainConfig(max_steps=37, seed=1),
                                       ClassLabel.WAKE)
        assert len(model.loss_curve) == 37

    def test_toy_benchmark_loss_decreases_every_class(self, toy_small_dataset):
        streams = build_class_streams(toy_small_dataset)
        for label in ClassLabel:
            pairs = build_pairs(streams[label], WindowConfig(25, 500))
            spec = ForecasterSpec("LinearDMS", context_len=25, horizon=500)
            model = train_class_forecaster(pairs, spec, TrainConfig(seed=13), label)
            assert model.loss_curve[-1] <= model.loss_curve[0], label


class TestPredict:
    def test_zero_model_constant_context(self):
        spec = ForecasterSpec("LinearDMS", **SMALL)
        model = init_model(spec, 0)
        zero = ParameterVector(model.params.layout)  # all-zero weights
        from sleepsynth.forecasters import ForecasterModel
        zero_model = ForecasterModel(spec=spec, params=zero.freeze(), label=None,
                                     train_seed=0)
        out = predict(zero_model, np.full(10, 3.25))
        np.testing.assert_array_equal(out, np.full(20, 3.25))

    def test_same_context_same_output(self):
        model = init_model(ForecasterSpec("TCNLite", **SMALL), 3)
        ctx = np.random.default_rng(1).normal(size=10)
        np.testing.assert_array_equal(predict(model, ctx), predict(model, ctx))

    def test_wrong_length_rejected(self):
        model = init_model(ForecasterSpec("MLP", **SMALL), 3)
        with pytest.raises(ValueError):
            predict(model, np.ones(11))

    def test_non_finite_context_rejected(self):
        model = init_model(ForecasterSpec("MLP", **SMALL), 3)
        with pytest.raises(ValueError):
            predict(model, np.array([np.nan] + [0.0] * 9))

    def test_linear_shift_equivariance(self):
        model = init_model(ForecasterSpec("LinearDMS", **SMALL), 11)
        ctx = np.random.default_rng(2).normal(size=10)
        base = predict(model, ctx)
        for a in (-5.0, 0.25, 1000.0):
            shifted = predict(model, ctx + a)
            assert np.max(np.abs(shifted - (base + a))) <= 1e-9 * max(1.0, abs(a))

    def test_all_architecture_forwards_finite(self):
        for arch in ARCHITECTURES:
            model = init_model(ForecasterSpec(arch, **SMALL), 5)
            out = predict(model, np.random.default_rng(3).normal(size=10))
            assert out.shape == (20,)
            assert np.all(np.isfinite(out))
