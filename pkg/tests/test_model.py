"""Tests for the network: parameter layout, forward paths and backprop."""
from dataclasses import replace

import numpy as np
import pytest

from mmtl.errors import ConfigError, ShapeError
from mmtl.model import (
    BneckSpec,
    ModelConfig,
    backward_batch,
    build_model,
    count_params,
    extract_features,
    flops_estimate,
    forward_batch,
    predict,
    se_block,
)
from mmtl.model.losses import batch_loss, batch_loss_grads
from mmtl.model.network import _BlockTrace, _Tape, param_shapes
from mmtl.nn import kernels as K


def tiny_config(**overrides) -> ModelConfig:
    base = dict(
        input_channels=3, input_length=16, stem_channels=4, feature_dim=8, num_classes=3,
        blocks=(BneckSpec(8, 4, 3, 1, True), BneckSpec(8, 6, 3, 2, True)),
        dropout_rate=0.0,
    )
    base.update(overrides)
    return ModelConfig(**base)


def _windows(config, n=5, seed=0, dtype=np.float32):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, config.input_channels, config.input_length)).astype(dtype)


class TestModelConfig:
    def test_default_topology(self):
        cfg = ModelConfig()
        assert len(cfg.blocks) == 6
        assert cfg.stride_product == 8

    def test_bneck_rejects_even_kernel(self):
        with pytest.raises(ConfigError):
            BneckSpec(16, 16, 4)

    def test_bneck_rejects_expand_below_out(self):
        with pytest.raises(ConfigError):
            BneckSpec(8, 16)

    def test_rejects_single_class(self):
        with pytest.raises(ConfigError):
            ModelConfig(num_classes=1)

    def test_rejects_zero_loss_weights(self):
        with pytest.raises(ConfigError):
            ModelConfig(loss_alpha=0, loss_beta=0)

    def test_single_task_needs_task(self):
        with pytest.raises(ConfigError):
            ModelConfig(enable_mtl=False)
        assert not ModelConfig(enable_mtl=False, task="activity").has_resistance_head

    def test_from_dict_rejects_unknown_key(self):
        with pytest.raises(ConfigError, match="model.depth"):
            ModelConfig.from_dict({"depth": 3})

    def test_dict_round_trip(self):
        cfg = tiny_config()
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestBuildModel:
    def test_deterministic(self):
        cfg = tiny_config()
        a, b = build_model(cfg, 7), build_model(cfg, 7)
        assert a.keys() == b.keys()
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])

    def test_seed_changes_weights(self):
        cfg = tiny_config()
        assert not np.array_equal(build_model(cfg, 1)["stem.conv.weight"],
                                  build_model(cfg, 2)["stem.conv.weight"])

    def test_initial_values(self):
        params = build_model(tiny_config(), 0)
        assert np.all(params["stem.bn.gamma"] == 1)
        assert np.all(params["stem.bn.beta"] == 0)
        assert np.all(params["stem.bn.running_var"] == 1)
        assert np.all(params["activity.bias"] == 0)
        bound = np.sqrt(6.0 / 3)
        assert np.all(np.abs(params["stem.conv.weight"]) <= bound)

    def test_tensor_values_independent_of_other_tensors(self):
        with_se = build_model(tiny_config(), 3)
        without_se = build_model(tiny_config(enable_se=False), 3)
        np.testing.assert_array_equal(with_se["blocks.1.project.weight"],
                                      without_se["blocks.1.project.weight"])

    def test_names_follow_config(self):
        assert "blocks.0.se.squeeze.weight" in build_model(tiny_config(), 0)
        assert "blocks.0.se.squeeze.weight" not in build_model(tiny_config(enable_se=False), 0)
        single = build_model(tiny_config(enable_mtl=False, task="activity"), 0)
        assert "resistance.weight" not in single and "activity.weight" in single

    def test_se_shapes(self):
        shapes = param_shapes(tiny_config())
        assert shapes["blocks.0.se.squeeze.weight"] == (2, 8)
        assert shapes["blocks.0.se.excite.weight"] == (8, 2)

    def test_default_param_budget(self):
        params = build_model(ModelConfig(), 0)
        assert count_params(params) <= 200_000

    @pytest.mark.parametrize("overrides", [
        {}, {"enable_se": False}, {"backbone": "plain", "plain_channels": 12},
        {"enable_mtl": False, "task": "resistance"},
    ])
    def test_count_matches_flops_walk(self, overrides):
        cfg = tiny_config(**overrides)
        assert count_params(build_model(cfg, 0)) == flops_estimate(cfg).param_count

    def test_default_count_matches_flops_walk(self):
        cfg = ModelConfig()
        assert count_params(build_model(cfg, 0)) == flops_estimate(cfg).param_count


class TestSEBlock:
    def test_zero_weights_halve_input(self):
        x = np.random.default_rng(0).standard_normal((8, 10))
        out = se_block(x, np.zeros((2, 8)), np.zeros(2), np.zeros((8, 2)), np.zeros(8))
        np.testing.assert_allclose(out, 0.5 * x)

    def test_gate_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(1)
        x = np.abs(rng.standard_normal((4, 6))) + 0.1
        out = se_block(x, rng.standard_normal((1, 4)) * 3, rng.standard_normal(1),
                       rng.standard_normal((4, 1)) * 3, rng.standard_normal(4))
        ratio = out / x
        assert np.all(ratio > 0) and np.all(ratio < 1)

    def test_shape_preserved(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            c = int(rng.integers(1, 16))
            t = int(rng.integers(1, 20))
            r = max(1, c // 4)
            x = rng.standard_normal((c, t))
            out = se_block(x, rng.standard_normal((r, c)), rng.standard_normal(r),
                           rng.standard_normal((c, r)), rng.standard_normal(c))
            assert out.shape == x.shape

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            se_block(np.ones((4, 5)), np.ones((1, 3)), np.ones(1), np.ones((4, 1)), np.ones(4))


class TestExtractFeatures:
    def test_output_length(self):
        cfg = tiny_config()
        params = build_model(cfg, 0)
        for t in (2, 7, 16, 33):
            x = np.random.default_rng(t).standard_normal((3, t)).astype(np.float32)
            assert extract_features(x, params, cfg).shape == (8,)

    def test_eval_deterministic(self):
        cfg = tiny_config()
        params = build_model(cfg, 0)
        x = _windows(cfg, 1)[0]
        np.testing.assert_array_equal(extract_features(x, params, cfg),
                                      extract_features(x, params, cfg))

    def test_empty_blocks_match_hand_composed_pipeline(self):
        cfg = ModelConfig(input_channels=2, input_length=8, stem_channels=4, blocks=(),
                          feature_dim=4, num_classes=2)
        params = build_model(cfg, 5)
        x = np.random.default_rng(0).standard_normal((2, 8)).astype(np.float32)

        def bn(h, prefix):
            state = K.BatchNormState(*(params[f"{prefix}.{f}"] for f in
                                       ("gamma", "beta", "running_mean", "running_var")))
            return K.batch_norm(h, state, "eval")[0]

        h = K.activation(bn(K.conv1d_pointwise(x, params["stem.conv.weight"]), "stem.bn"), "swish")
        h = K.activation(bn(K.conv1d_pointwise(h, params["head.conv.weight"]), "head.bn"), "swish")
        np.testing.assert_allclose(extract_features(x, params, cfg), K.global_avg_pool(h), atol=1e-6)

    def test_channel_mismatch(self):
        cfg = tiny_config()
        with pytest.raises(ShapeError):
            extract_features(np.ones((4, 16), np.float32), build_model(cfg, 0), cfg)

    def test_window_shorter_than_stride(self):
        cfg = tiny_config()
        with pytest.raises(ShapeError):
            extract_features(np.ones((3, 1), np.float32), build_model(cfg, 0), cfg)

    def test_zeroed_residual_branch_is_identity(self):
        plain = tiny_config(blocks=())
        one_block = tiny_config(blocks=(BneckSpec(8, 4, 3, 1, True),))
        params = build_model(one_block, 9)
        params["blocks.0.project.bn.gamma"] = np.zeros(4, np.float32)
        params["blocks.0.project.bn.beta"] = np.zeros(4, np.float32)
        x = _windows(one_block, 1)[0]
        stem_head = {k: v for k, v in params.items() if not k.startswith("blocks.")}
        np.testing.assert_allclose(extract_features(x, params, one_block),
                                   extract_features(x, stem_head, plain), atol=1e-6)


class TestPredict:
    def test_probs_sum_to_one(self):
        cfg = tiny_config()
        params = build_model(cfg, 0)
        for x in _windows(cfg, 10):
            p = predict(x, params, cfg)
            assert p.activity_probs.sum() == pytest.approx(1.0, abs=1e-6)
            assert np.all(p.activity_probs >= 0)

    def test_constant_resistance_head(self):
        cfg = tiny_config()
        params = build_model(cfg, 0)
        params["resistance.weight"] = np.zeros((1, 8), np.float32)
        params["resistance.bias"] = np.array([0.3], np.float32)
        for x in _windows(cfg, 4):
            assert predict(x, params, cfg).resistance == pytest.approx(0.3)

    def test_eval_bit_identical(self):
        cfg = tiny_config(dropout_rate=0.5)
        params = build_model(cfg, 0)
        x = _windows(cfg, 1)[0]
        a, b = predict(x, params, cfg), predict(x, params, cfg)
        np.testing.assert_array_equal(a.activity_probs, b.activity_probs)
        assert a.resistance == b.resistance

    def test_single_task_omits_resistance(self):
        cfg = tiny_config(enable_mtl=False, task="activity")
        p = predict(_windows(cfg, 1)[0], build_model(cfg, 0), cfg)
        assert p.resistance is None and p.activity_probs is not None

    def test_reported_resistance_is_clamped(self):
        cfg = tiny_config()
        params = build_model(cfg, 0)
        params["resistance.weight"] = np.zeros((1, 8), np.float32)
        params["resistance.bias"] = np.array([1.7], np.float32)
        p = predict(_windows(cfg, 1)[0], params, cfg)
        assert p.resistance == pytest.approx(1.7)
        assert p.reported_resistance == 1.0

    def test_argmax_invariant_under_logit_shift(self):
        cfg = tiny_config()
        params = build_model(cfg, 0)
        x = _windows(cfg, 1)[0]
        before = predict(x, params, cfg).activity
        params["activity.bias"] = params["activity.bias"] + np.float32(5.0)
        assert predict(x, params, cfg).activity == before

    def test_train_mode_dropout_needs_rng(self):
        cfg = tiny_config(dropout_rate=0.5)
        x = _windows(cfg, 1)[0]
        p = predict(x, build_model(cfg, 0), cfg, "train", np.random.default_rng(0))
        assert p.activity_probs.sum() == pytest.approx(1.0, abs=1e-6)


class TestAblationSwitches:
    def test_disabled_se_ignores_se_tensors(self):
        se_cfg = tiny_config()
        cfg = replace(se_cfg, enable_se=False)
        params = build_model(se_cfg, 0)
        x = _windows(cfg, 1)[0]
        before = predict(x, params, cfg).activity_probs
        for name in params:
            if ".se." in name:
                params[name] = params[name] * 10 + 1
        np.testing.assert_array_equal(predict(x, params, cfg).activity_probs, before)

    def test_disabled_swish_uses_relu_everywhere(self):
        cfg = tiny_config(enable_swish=False)
        res = forward_batch(_windows(cfg, 2), build_model(cfg, 0), cfg, record=True)
        kinds = set()

        def walk(tape: _Tape):
            for cache, _ in tape.entries:
                if cache.op == "activation":
                    kinds.add(cache.attrs["kind"])

        for seg in res.segments:
            if isinstance(seg, _BlockTrace):
                walk(seg.main)
                walk(seg.project)
                if seg.se is not None:
                    walk(seg.se.gate)
            else:
                walk(seg)
        assert "swish" not in kinds and "relu" in kinds

    def test_plain_backbone_runs(self):
        cfg = tiny_config(backbone="plain", plain_channels=6)
        res = forward_batch(_windows(cfg, 3), build_model(cfg, 0), cfg)
        assert res.features.shape == (3, 8)
        assert res.probs.shape == (3, 3)


class TestBackward:
    def test_needs_recorded_forward(self):
        cfg = tiny_config()
        res = forward_batch(_windows(cfg, 2), build_model(cfg, 0), cfg)
        with pytest.raises(ShapeError):
            backward_batch(res, None, None)

    def test_bn_updates_returned_not_applied(self):
        cfg = tiny_config()
        params = build_model(cfg, 0)
        res = forward_batch(_windows(cfg, 4), params, cfg, "train", np.random.default_rng(0))
        assert "stem.bn" in res.bn_updates
        assert np.all(params["stem.bn.running_mean"] == 0)

    @pytest.mark.parametrize("overrides", [{}, {"backbone": "plain", "plain_channels": 4}])
    def test_end_to_end_gradient_check(self, overrides):
        cfg = tiny_config(**overrides)
        params = {k: v.astype(np.float64) for k, v in build_model(cfg, 11).items()}
        x = _windows(cfg, 5, seed=3, dtype=np.float64)
        labels = np.array([0, 1, 2, 1, 0])
        targets = np.array([0.2, 0.5, 0.9, 0.4, 0.1])

        def loss():
            res = forward_batch(x, params, cfg, "train", np.random.default_rng(0))
            return batch_loss(res.probs, labels, res.resistance, targets, 1.0, 1.0).total

        res = forward_batch(x, params, cfg, "train", np.random.default_rng(0), record=True)
        d_logits, d_res = batch_loss_grads(res.probs, labels, res.resistance, targets, 1.0, 1.0)
        grads = backward_batch(res, d_logits, d_res)
        trainable = [n for n in params if not n.endswith(("running_mean", "running_var"))]
        assert set(grads) == set(trainable)
        eps = 1e-6
        for name in trainable:
            arr = params[name]
            numeric = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + eps
                up = loss()
                arr[idx] = old - eps
                down = loss()
                arr[idx] = old
                numeric[idx] = (up - down) / (2 * eps)
            np.testing.assert_allclose(grads[name], numeric, rtol=1e-2, atol=1e-5, err_msg=name)
