"""Metric implementations against brute-force two-loop oracles."""

import math

import numpy as np
import pytest

from mcsr.dataset import DatasetManifest, PatchStore, build_dataset
from mcsr.kspace import normalize01
from mcsr.metrics import MetricReport, MetricRow, evaluate_corpus, ifc, psnr, ssim
from mcsr.phantom import make_phantom_pair

C1, C2 = 0.01**2, 0.03**2


def ssim_two_loop(x, y, win=7):
    """Direct per-window evaluation of the similarity ratio."""
    h, w = x.shape
    values = []
    for i in range(h - win + 1):
        for j in range(w - win + 1):
            a = x[i : i + win, j : j + win].ravel()
            b = y[i : i + win, j : j + win].ravel()
            mx, my = a.mean(), b.mean()
            vx = (a**2).mean() - mx**2
            vy = (b**2).mean() - my**2
            cov = (a * b).mean() - mx * my
            values.append(
                ((2 * mx * my + C1) * (2 * cov + C2))
                / ((mx**2 + my**2 + C1) * (vx + vy + C2))
            )
    return float(np.mean(values))


def psnr_two_loop(x, y):
    err = 0.0
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            err += (x[i, j] - y[i, j]) ** 2
    mse = err / x.size
    return math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)


class TestSsim:
    def test_identical_images_give_one(self, rng):
        x = rng.random((16, 16))
        assert ssim(x, x) == 1.0

    def test_inverted_checkerboard_negative(self):
        x = np.indices((7, 7)).sum(axis=0) % 2.0
        y = 1.0 - x
        direct = ssim_two_loop(x, y)
        assert direct < 0.0
        assert abs(ssim(x, y) - direct) < 1e-12

    def test_matches_brute_force_on_random_pairs(self, rng):
        for _ in range(10):
            x = rng.random((16, 16))
            y = rng.random((16, 16))
            assert abs(ssim(x, y) - ssim_two_loop(x, y)) < 1e-12

    def test_symmetry(self, rng):
        x, y = rng.random((12, 12)), rng.random((12, 12))
        assert abs(ssim(x, y) - ssim(y, x)) < 1e-12

    def test_range(self, rng):
        x, y = rng.random((16, 16)), rng.random((16, 16))
        assert -1.0 <= ssim(x, y) <= 1.0

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match="smaller"):
            ssim(np.zeros((5, 5)), np.zeros((5, 5)))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="differ"):
            ssim(np.zeros((8, 8)), np.zeros((8, 9)))


class TestPsnr:
    def test_uniform_difference(self):
        x = np.zeros((10, 10))
        assert abs(psnr(x, x + 0.1) - 20.0) < 1e-12

    def test_identical_gives_infinite_sentinel(self, rng):
        x = rng.random((8, 8))
        value = psnr(x, x)
        assert math.isinf(value) and value > 0

    def test_matches_independent_computation(self, rng):
        x, y = rng.random((9, 9)), rng.random((9, 9))
        assert abs(psnr(x, y) - psnr_two_loop(x, y)) < 1e-10

    def test_strictly_decreasing_in_noise(self, rng):
        x = rng.random((16, 16))
        noise = rng.standard_normal((16, 16))
        values = [psnr(x, x + a * noise) for a in (0.01, 0.02, 0.05, 0.1)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestIfc:
    def test_identical_beats_noisy(self, rng):
        img = make_phantom_pair(0).primary_hr
        noisy = normalize01(img + rng.normal(0, 0.05, img.shape))
        assert ifc(img, img) > ifc(img, noisy) > 0.0

    def test_constant_distorted_is_zero(self):
        img = make_phantom_pair(1).primary_hr
        assert abs(ifc(img, np.full_like(img, 0.5))) < 1e-3

    def test_constant_reference_is_zero(self):
        assert ifc(np.full((32, 32), 0.3), np.random.rand(32, 32)) == 0.0

    def test_noise_monotonicity(self, rng):
        img = make_phantom_pair(2).primary_hr
        noise = rng.standard_normal(img.shape)
        values = [ifc(img, normalize01(img + a * noise)) for a in (0.02, 0.04, 0.08, 0.16)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_deterministic(self, rng):
        img = make_phantom_pair(3).primary_hr
        dist = normalize01(img + rng.normal(0, 0.03, img.shape))
        assert ifc(img, dist) == ifc(img, dist)

    def test_small_image_rejected(self):
        with pytest.raises(ValueError, match="32"):
            ifc(np.zeros((16, 16)), np.zeros((16, 16)))


class TestMetricReport:
    def test_aggregate_matches_independent_statistics(self, rng):
        report = MetricReport()
        values = rng.random(8)
        for i, v in enumerate(values):
            report.add(MetricRow(f"img{i}", "model", 2, v, 30 + v, v * 3))
        agg = report.aggregate(variant="model", factor=2)
        assert abs(agg["ssim"][0] - values.mean()) < 1e-12
        assert abs(agg["ssim"][1] - values.std(ddof=1)) < 1e-12

    def test_csv_round_trip(self, tmp_path, rng):
        report = MetricReport()
        report.add(MetricRow("a", "lr", 2, 0.9, math.inf, 4.0))
        report.add(MetricRow("b", "lr", 2, 0.8, 31.5, 3.5))
        path = tmp_path / "metrics.csv"
        report.write_csv(path)
        text = path.read_text()
        assert "inf" in text
        loaded = MetricReport.read_csv(path)
        assert math.isinf(loaded.rows[0].psnr_db)
        assert abs(loaded.rows[1].ssim - 0.8) < 1e-12


@pytest.fixture(scope="module")
def store(tmp_path_factory):
    manifest = DatasetManifest(train_seeds=[0], test_seeds=[50, 51], factors=[2, 4])
    out = tmp_path_factory.mktemp("evaldata")
    build_dataset(manifest, out)
    return PatchStore(out)


class TestEvaluateCorpus:
    def test_hr_against_itself(self, store):
        report = evaluate_corpus(lambda t, f: t["hr"], store, "test", [2], "oracle")
        for row in report.rows:
            assert row.ssim == 1.0
            assert math.isinf(row.psnr_db)

    def test_row_count_images_times_factors_times_variants(self, store):
        report = MetricReport()
        for variant in ("lr", "hr"):
            fn = None if variant == "lr" else (lambda t, f: t["hr"])
            evaluate_corpus(fn, store, "test", [2, 4], variant, report=report)
        assert len(report.rows) == 2 * 2 * 2

    def test_lr_scores_below_hr_oracle(self, store):
        report = evaluate_corpus(None, store, "test", [2], "lr")
        for row in report.rows:
            assert row.ssim < 1.0
            assert np.isfinite(row.psnr_db)

    def test_empty_split_rejected(self, store):
        with pytest.raises(ValueError, match="no images"):
            evaluate_corpus(None, store, "nope", [2], "lr")
