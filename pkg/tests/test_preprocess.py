"""Tests for denoising, normalization, segmentation and resistance synthesis."""
import numpy as np
import pytest

from mmtl.data.datasets import UCI_HAR, WISDM
from mmtl.data.preprocess import (
    apply_normalizer,
    denoise,
    denoise_array,
    fit_normalizer,
    invert_normalizer,
    segment,
    segment_starts,
)
from mmtl.data.resistance import BASE_RESISTANCE, synthesize_resistance
from mmtl.data.types import LabeledWindow, Recording
from mmtl.errors import DataError


def _rec(signal, rate=50.0):
    return Recording(subject_id=1, activity_id=0, channels=np.asarray(signal, dtype=np.float64),
                     sample_rate_hz=rate)


class TestDenoise:
    def test_constant_unchanged(self):
        x = np.full((2, 10), 3.0)
        np.testing.assert_array_equal(denoise_array(x), x)

    def test_spike_removed(self):
        out = denoise(_rec([[0, 0, 9, 0, 0]]))
        np.testing.assert_array_equal(out.channels, [[0, 0, 0, 0, 0]])

    def test_monotone_unchanged(self):
        x = np.arange(10, dtype=np.float64)[None]
        np.testing.assert_array_equal(denoise_array(x), x)

    def test_channels_independent(self):
        x = np.array([[0, 0, 9, 0, 0], [1, 2, 3, 4, 5]], dtype=np.float64)
        np.testing.assert_array_equal(denoise_array(x)[1], x[1])


class TestNormalizer:
    def test_train_set_is_standardized(self):
        rng = np.random.default_rng(0)
        windows = [rng.standard_normal((3, 50)) * [[1], [5], [0.1]] + [[2], [-1], [7]] for _ in range(20)]
        stats = fit_normalizer(windows)
        normed = np.concatenate([apply_normalizer(w, stats) for w in windows], axis=1)
        np.testing.assert_allclose(normed.mean(axis=1), 0, atol=1e-6)
        np.testing.assert_allclose(normed.std(axis=1), 1, atol=1e-4)

    def test_zero_variance_channel(self):
        windows = [np.vstack([np.full(8, 4.0), np.arange(8.0)])]
        stats = fit_normalizer(windows)
        assert stats.degenerate_channels == (0,)
        assert stats.std[0] == 1.0
        np.testing.assert_array_equal(apply_normalizer(windows[0], stats)[0], 0)

    def test_affine_on_unseen_window(self):
        stats = fit_normalizer([np.random.default_rng(1).standard_normal((2, 30))])
        x = np.random.default_rng(2).standard_normal((2, 5))
        expected = (x - stats.mean[:, None]) / stats.std[:, None]
        np.testing.assert_allclose(apply_normalizer(x, stats), expected)
        np.testing.assert_allclose(invert_normalizer(apply_normalizer(x, stats), stats), x)

    def test_empty(self):
        with pytest.raises(DataError):
            fit_normalizer([])

    def test_fit_keys_recorded(self):
        w = LabeledWindow(np.ones((1, 4)), 0, 0.5, 1, "x", key="x:0")
        assert fit_normalizer([w]).fit_keys == {"x:0"}


class TestSegment:
    def test_window_count(self):
        assert len(segment(_rec(np.zeros((3, 1000))), 128, 0.5)) == 14

    def test_too_short(self):
        assert segment(_rec(np.zeros((3, 100))), 128, 0.5) == []

    def test_no_overlap_tiles(self):
        x = np.arange(512, dtype=np.float64)[None]
        windows = segment(_rec(x), 128, 0.0)
        assert len(windows) == 4
        np.testing.assert_array_equal(np.concatenate(windows, axis=1), x)

    def test_windows_are_contiguous_slices(self):
        x = np.arange(300, dtype=np.float64)[None]
        for start, w in zip(segment_starts(300, 64, 0.5), segment(_rec(x), 64, 0.5)):
            assert start + 64 <= 300
            np.testing.assert_array_equal(w[0], x[0, start:start + 64])

    def test_bad_overlap(self):
        with pytest.raises(DataError):
            segment(_rec(np.zeros((1, 10))), 4, 1.0)


class TestResistance:
    def test_still_standing(self):
        window = np.zeros((9, 128))
        assert synthesize_resistance(window, "standing", UCI_HAR) == pytest.approx(0.075)

    def test_always_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for name in BASE_RESISTANCE:
            if name in ("slow", "medium", "fast"):
                continue
            for scale in (0.0, 1.0, 100.0):
                r = synthesize_resistance(rng.standard_normal((9, 32)) * scale, name, UCI_HAR)
                assert 0.0 <= r <= 1.0

    def test_deterministic(self):
        w = np.random.default_rng(1).standard_normal((3, 200))
        assert synthesize_resistance(w, 1, WISDM) == synthesize_resistance(w, 1, WISDM)

    def test_monotone_in_intensity(self):
        w = np.random.default_rng(2).standard_normal((3, 50))
        values = [synthesize_resistance(w * s, "walking", WISDM) for s in (0.5, 1, 2, 4, 8, 16)]
        assert values == sorted(values)

    def test_sma_uses_total_acc_in_si_units(self):
        window = np.zeros((9, 10))
        window[6:9] = 1.0  # 1 g on each total_acc axis -> SMA 3 g
        expected = 0.45 + 0.15 * (min(3 * 9.80665 / 30, 1.0) - 0.5)
        assert synthesize_resistance(window, "walking", UCI_HAR) == pytest.approx(expected)

    def test_unmapped_activity(self):
        with pytest.raises(DataError):
            synthesize_resistance(np.zeros((3, 10)), 17, WISDM)
