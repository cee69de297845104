"""Metric tests against independently coded brute-force references.

The references below recompute every metric from scratch in numpy with
explicit loops (sliding windows for SSIM), deliberately sharing no code with
the library implementations.
"""

import math

import numpy as np
import pytest
import torch

from anchorhdr.imaging import ToneMapParams, tone_map_inverse
from anchorhdr.metrics import (
    SequenceReport,
    brightness_series,
    brightness_stats,
    evaluate_sequence,
    per_frame_psnr,
    psnr_mu,
    psnr_spread,
    ssim_mu,
    temporal_stability,
)

TONE = ToneMapParams(5000.0)
KAPPA = 5000.0


def tau(x):
    return np.log1p(KAPPA * np.asarray(x, dtype=np.float64)) / np.log1p(KAPPA)


def ref_psnr(a, b, data_range=1.0):
    mse = np.mean((np.asarray(a, np.float64) - np.asarray(b, np.float64)) ** 2)
    if mse == 0:
        return 99.0
    return min(10.0 * math.log10(data_range ** 2 / mse), 99.0)


def ref_ssim(a, b):
    """Sliding-window SSIM with explicit loops; a, b are (C, H, W) in [0, 1]."""
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    if a.ndim == 2:
        a, b = a[None], b[None]
    half = 5
    yy, xx = np.mgrid[-half:half + 1, -half:half + 1]
    win = np.exp(-(xx ** 2 + yy ** 2) / (2 * 1.5 ** 2))
    win /= win.sum()
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    values = []
    for ch in range(a.shape[0]):
        for i in range(half, a.shape[1] - half):
            for j in range(half, a.shape[2] - half):
                pa = a[ch, i - half:i + half + 1, j - half:j + half + 1]
                pb = b[ch, i - half:i + half + 1, j - half:j + half + 1]
                mu_a = (win * pa).sum()
                mu_b = (win * pb).sum()
                var_a = (win * pa * pa).sum() - mu_a ** 2
                var_b = (win * pb * pb).sum() - mu_b ** 2
                cov = (win * pa * pb).sum() - mu_a * mu_b
                values.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                              / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    return float(np.mean(values))


def ref_brightness(seq):
    tm = tau(seq)
    luma = 0.299 * tm[:, 0] + 0.587 * tm[:, 1] + 0.114 * tm[:, 2]
    return 255.0 * luma.mean(axis=(1, 2))


@pytest.fixture
def pair(rng):
    target = rng.uniform(0.0, 3.0, (4, 3, 16, 16))
    pred = np.clip(target + rng.normal(0, 0.1, target.shape), 0.0, None)
    return torch.tensor(pred), torch.tensor(target)


class TestPsnr:
    def test_identical_capped(self, rng):
        x = torch.rand(3, 8, 8)
        assert psnr_mu(x, x, TONE) == 99.0

    def test_uniform_difference_exact(self):
        # tone-mapped images differing by 0.1 everywhere: PSNR = -10 log10(0.01) = 20
        base = torch.full((3, 8, 8), 0.4, dtype=torch.float64)
        shifted = tone_map_inverse(base + 0.1, TONE)
        flat = tone_map_inverse(base, TONE)
        assert psnr_mu(shifted, flat, TONE) == pytest.approx(20.0, abs=1e-9)

    def test_matches_reference(self, pair):
        pred, target = pair
        for i in range(pred.shape[0]):
            ours = psnr_mu(pred[i], target[i], TONE)
            ref = ref_psnr(tau(pred[i].numpy()), tau(target[i].numpy()))
            assert abs(ours - ref) < 1e-9

    def test_symmetric(self, pair):
        pred, target = pair
        assert psnr_mu(pred[0], target[0], TONE) == psnr_mu(target[0], pred[0], TONE)


class TestSsim:
    def test_identical_is_one(self, rng):
        x = torch.rand(3, 16, 16)
        assert ssim_mu(x, x, TONE) == pytest.approx(1.0, abs=1e-12)

    def test_contrast_inversion_below_one(self):
        ramp = torch.linspace(0, 1, 16).repeat(16, 1)
        img = ramp[None].repeat(3, 1, 1)
        assert ssim_mu(img, 1.0 - img, TONE) < 1.0

    def test_matches_sliding_window_reference(self, pair):
        pred, target = pair
        ours = ssim_mu(pred[0], target[0], TONE)
        ref = ref_ssim(tau(pred[0].numpy()), tau(target[0].numpy()))
        assert abs(ours - ref) < 1e-6

    def test_monotone_under_noise(self, rng):
        base = torch.tensor(rng.uniform(0.1, 1.0, (3, 24, 24)))
        previous = 1.0
        for sigma in (0.01, 0.03, 0.08, 0.2, 0.5):
            noisy = torch.tensor(
                np.clip(base.numpy() + rng.normal(0, sigma, base.shape), 0, None))
            value = ssim_mu(noisy, base, TONE)
            assert value < previous
            previous = value

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            ssim_mu(torch.rand(3, 8, 8), torch.rand(3, 8, 8), TONE)

    def test_symmetric(self, pair):
        pred, target = pair
        a = ssim_mu(pred[0], target[0], TONE)
        b = ssim_mu(target[0], pred[0], TONE)
        assert a == pytest.approx(b, abs=1e-12)


class TestTemporalStability:
    def test_identical_sequences(self, pair):
        _, target = pair
        t_psnr, t_ssim = temporal_stability(target, target, TONE)
        assert t_psnr == 99.0
        assert t_ssim == pytest.approx(1.0, abs=1e-12)

    def test_static_sequences(self):
        a = torch.rand(1, 3, 16, 16).repeat(4, 1, 1, 1)
        b = torch.rand(1, 3, 16, 16).repeat(4, 1, 1, 1)
        t_psnr, t_ssim = temporal_stability(a, b, TONE)
        assert t_psnr == 99.0
        assert t_ssim == pytest.approx(1.0, abs=1e-9)

    def test_matches_reference(self, pair):
        pred, target = pair
        dp = np.diff(tau(pred.numpy()), axis=0)
        dt = np.diff(tau(target.numpy()), axis=0)
        ref_p = np.mean([ref_psnr(dp[i], dt[i], data_range=2.0) for i in range(3)])
        ref_s = np.mean([ref_ssim((dp[i] + 1) / 2, (dt[i] + 1) / 2) for i in range(3)])
        t_psnr, t_ssim = temporal_stability(pred, target, TONE)
        assert abs(t_psnr - ref_p) < 1e-6
        assert abs(t_ssim - ref_s) < 1e-6

    def test_needs_two_frames(self):
        with pytest.raises(ValueError):
            temporal_stability(torch.rand(1, 3, 16, 16), torch.rand(1, 3, 16, 16), TONE)


class TestBrightnessStats:
    def test_identical_zero_ab(self, pair):
        _, target = pair
        ab, _, _ = brightness_stats(target, target, TONE)
        assert ab == 0.0

    def test_constant_brightness(self):
        pred = torch.full((4, 3, 8, 8), 0.3)
        _, madb, lsd = brightness_stats(pred, None, TONE)
        assert madb == 0.0
        assert lsd == 0.0

    def test_alternating_brightness_oracle(self):
        # brightness pattern 100, 110, 100, 110 -> MADB 10, LSD 5 (hand-computed)
        levels = []
        for value in (100.0, 110.0, 100.0, 110.0):
            levels.append(tone_map_inverse(torch.full((3, 8, 8), value / 255.0,
                                                      dtype=torch.float64), TONE))
        pred = torch.stack(levels)
        series = brightness_series(pred, TONE)
        assert torch.allclose(series, torch.tensor([100.0, 110.0, 100.0, 110.0],
                                                   dtype=torch.float64), atol=1e-6)
        _, madb, lsd = brightness_stats(pred, None, TONE)
        assert madb == pytest.approx(10.0, abs=1e-6)
        assert lsd == pytest.approx(5.0, abs=1e-6)

    def test_matches_reference(self, pair):
        pred, target = pair
        bp, bt = ref_brightness(pred.numpy()), ref_brightness(target.numpy())
        ab, madb, lsd = brightness_stats(pred, target, TONE)
        assert abs(ab - np.mean(np.abs(bp - bt))) < 1e-6
        assert abs(madb - np.mean(np.abs(np.diff(bp)))) < 1e-6
        assert abs(lsd - np.std(bp)) < 1e-6

    def test_no_reference_mode(self, pair):
        pred, _ = pair
        ab, madb, lsd = brightness_stats(pred, None, TONE)
        assert ab is None
        assert madb >= 0 and lsd >= 0


class TestPsnrSpread:
    def test_identical_prediction(self, pair):
        _, target = pair
        assert psnr_spread(target, target, TONE) == 0.0

    def test_two_point_oracle(self):
        # per-frame PSNRs of exactly 30 and 34 dB -> population std 2
        base = torch.full((2, 3, 8, 8), 0.4, dtype=torch.float64)
        deltas = torch.tensor([10 ** (-30 / 20), 10 ** (-34 / 20)], dtype=torch.float64)
        pred_tau = base + deltas.view(2, 1, 1, 1)
        pred = tone_map_inverse(pred_tau, TONE)
        target = tone_map_inverse(base, TONE)
        values = per_frame_psnr(pred, target, TONE)
        assert values[0] == pytest.approx(30.0, abs=1e-6)
        assert values[1] == pytest.approx(34.0, abs=1e-6)
        assert psnr_spread(pred, target, TONE) == pytest.approx(2.0, abs=1e-6)

    def test_uniform_error_zero_spread(self, rng):
        target = torch.tensor(rng.uniform(0.2, 0.8, (1, 3, 8, 8))).repeat(4, 1, 1, 1)
        pred = tone_map_inverse(
            torch.log1p(KAPPA * target) / math.log1p(KAPPA) + 0.05, TONE)
        assert psnr_spread(pred, target, TONE) == pytest.approx(0.0, abs=1e-6)


class TestSequenceReport:
    def test_header_column_order(self):
        assert SequenceReport.header() == (
            "sequence\tframes\tpsnr_t\tssim_t\tt_psnr\tt_ssim\tpsnr_std\tab\tmadb\tlsd\truntime_ms"
        )

    def test_evaluate_sequence_fields(self, pair):
        pred, target = pair
        report = evaluate_sequence(pred, target, name="demo", tone=TONE, runtime_ms=12.5)
        assert report.frames == 4
        assert len(report.per_frame_psnr) == 4
        assert len(report.per_frame_brightness) == 4
        assert report.psnr_t == pytest.approx(np.mean(report.per_frame_psnr))
        row = report.to_row()
        assert row.startswith("demo\t4\t")
        assert len(row.split("\t")) == len(SequenceReport.COLUMNS)

    def test_self_evaluation(self, pair):
        _, target = pair
        report = evaluate_sequence(target, target, tone=TONE)
        assert report.psnr_t == 99.0
        assert report.ssim_t == pytest.approx(1.0, abs=1e-12)
        assert report.psnr_std == 0.0
        assert report.ab == 0.0

    def test_kv_serialization(self, pair):
        pred, target = pair
        text = evaluate_sequence(pred, target, name="kv", tone=TONE).to_kv_text()
        assert "sequence = kv" in text
        assert "psnr_t = " in text
        assert text.endswith("\n")

    def test_single_frame_not_fatal(self, rng):
        x = torch.rand(1, 3, 16, 16)
        report = evaluate_sequence(x, x, tone=TONE)
        assert report.frames == 1
        assert math.isnan(report.t_psnr)
        assert math.isnan(report.madb)
