"""Loss components against analytic and compositional oracles."""

import numpy as np
import pytest

import mcsr.autodiff as ad
from mcsr.autodiff import AdamState, adam_step
from mcsr.losses import (
    LossWeights,
    adversarial_loss_g,
    discriminator_objective,
    generator_objective,
    mse_loss,
    perceptual_loss,
    texture_loss,
    wasserstein_monitor,
)
from mcsr.nets import featurenet_forward, init_featurenet
from conftest import numeric_grad, rel_err


@pytest.fixture(scope="module")
def small_featurenet():
    return init_featurenet(7, channels=(4, 4, 8), taps=(1, 3), pool_after=(2,))


def linear_critic(c_leaf):
    """D(x) = <c, x> per sample, via flatten + matmul."""

    def critic(x):
        n = x.shape[0]
        flat = ad.reshape(x, (n, x.size // n))
        col = ad.reshape(c_leaf, (c_leaf.size, 1))
        return ad.reshape(ad.matmul(flat, col), (n,))

    return critic


def quadratic_critic(x):
    return ad.scale(ad.sum_per_sample(ad.mul(x, x)), 0.5)


class TestAdversarialLoss:
    def test_negative_mean(self):
        assert adversarial_loss_g(np.array([1.0, 3.0])).item() == -2.0

    def test_zero_scores(self):
        assert adversarial_loss_g(np.zeros(5)).item() == 0.0

    def test_gradient_is_minus_one_over_batch(self, rng):
        scores = rng.standard_normal(4)
        g = ad.Graph()
        s = g.leaf(scores)
        (gs,) = ad.backward(adversarial_loss_g(s), [s])
        np.testing.assert_allclose(gs.data, -0.25 * np.ones(4), atol=1e-15)
        num = numeric_grad(lambda: adversarial_loss_g(ad.Tensor(scores)).item(), scores)
        assert rel_err(gs.data, num) < 1e-6

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            adversarial_loss_g(np.zeros(0))


class TestMseLoss:
    def test_identical_zero(self, rng):
        x = rng.random((2, 3, 3))
        assert mse_loss(x, x).item() == 0.0

    def test_uniform_offset(self, rng):
        x = rng.random((2, 4, 4))
        assert abs(mse_loss(x + 0.5, x).item() - 0.25) < 1e-12

    def test_matches_two_loop_oracle(self, rng):
        a = rng.random((2, 4, 4))
        b = rng.random((2, 4, 4))
        total = 0.0
        for n in range(2):
            acc = 0.0
            for i in range(4):
                for j in range(4):
                    acc += (a[n, i, j] - b[n, i, j]) ** 2
            total += acc / 16.0
        total /= 2.0
        assert abs(mse_loss(a, b).item() - total) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ad.ShapeError):
            mse_loss(np.zeros((2, 2)), np.zeros((3, 2)))


class TestPerceptualLoss:
    def test_identical_zero(self, rng, small_featurenet):
        x = rng.random((1, 1, 8, 8))
        assert perceptual_loss(x, x, small_featurenet).item() == 0.0

    def test_sensitive_to_pixel_swap(self, rng, small_featurenet):
        x = rng.random((1, 1, 8, 8))
        y = x.copy()
        y[0, 0, 0, 0], y[0, 0, 5, 5] = y[0, 0, 5, 5], y[0, 0, 0, 0]
        assert abs(y[0, 0, 0, 0] - x[0, 0, 0, 0]) > 1e-3
        assert perceptual_loss(y, x, small_featurenet).item() > 0.0

    def test_matches_composed_pipeline(self, rng, small_featurenet):
        pred = rng.random((2, 1, 8, 8))
        target = rng.random((2, 1, 8, 8))
        taps_p = featurenet_forward(pred, small_featurenet)
        taps_t = featurenet_forward(target, small_featurenet)
        expected = np.mean([mse_loss(tp, tt).item() for tp, tt in zip(taps_p, taps_t)])
        assert abs(perceptual_loss(pred, target, small_featurenet).item() - expected) < 1e-12


class TestTextureLoss:
    def test_identical_zero(self, rng, small_featurenet):
        x = rng.random((1, 1, 8, 8))
        assert texture_loss(x, x, small_featurenet).item() == 0.0

    def test_gram_invariant_to_position_permutation(self, rng):
        from mcsr.losses import _normalized_gram

        f = rng.random((1, 4, 3, 3))
        perm = rng.permutation(9)
        f_perm = f.reshape(1, 4, 9)[:, :, perm].reshape(1, 4, 3, 3)
        ga = _normalized_gram(ad.Tensor(f)).data
        gb = _normalized_gram(ad.Tensor(f_perm)).data
        np.testing.assert_allclose(ga, gb, atol=1e-12)

    def test_matches_gram_mse_composition(self, rng, small_featurenet):
        from mcsr.losses import _normalized_gram

        pred = rng.random((2, 1, 8, 8))
        target = rng.random((2, 1, 8, 8))
        taps_p = featurenet_forward(pred, small_featurenet)
        taps_t = featurenet_forward(target, small_featurenet)
        expected = np.mean(
            [
                mse_loss(_normalized_gram(tp), _normalized_gram(tt)).item()
                for tp, tt in zip(taps_p, taps_t)
            ]
        )
        assert abs(texture_loss(pred, target, small_featurenet).item() - expected) < 1e-12


class TestGeneratorObjective:
    def test_zero_weights_zero_scores(self, rng, small_featurenet):
        pred = rng.random((2, 1, 8, 8))
        target = rng.random((2, 1, 8, 8))
        weights = LossWeights(mse=0.0, perceptual=0.0, texture=0.0)
        total, report = generator_objective(
            np.zeros(2), pred, target, small_featurenet, weights
        )
        assert total.item() == 0.0
        assert report.total_g == 0.0

    def test_report_identity(self, rng, small_featurenet):
        pred = rng.random((2, 1, 8, 8))
        target = rng.random((2, 1, 8, 8))
        scores = rng.standard_normal(2)
        w = LossWeights()
        total, r = generator_objective(scores, pred, target, small_featurenet, w)
        recomposed = r.adv + w.mse * r.mse + w.perceptual * r.per + w.texture * r.txt
        assert abs(r.total_g - recomposed) < 1e-12
        assert abs(total.item() - r.total_g) < 1e-15

    def test_constrained_equals_sum_of_level_terms(self, rng, small_featurenet):
        pred2 = rng.random((2, 1, 8, 8))
        hr = rng.random((2, 1, 8, 8))
        pred1 = rng.random((2, 1, 8, 8))
        lr2 = rng.random((2, 1, 8, 8))
        scores = rng.standard_normal(2)
        w = LossWeights()
        total, r = generator_objective(
            scores, pred2, hr, small_featurenet, w,
            pred_level1=pred1, target_level1=lr2, constrained=True,
        )
        exp_mse = mse_loss(pred2, hr).item() + mse_loss(pred1, lr2).item()
        exp_per = (
            perceptual_loss(pred2, hr, small_featurenet).item()
            + perceptual_loss(pred1, lr2, small_featurenet).item()
        )
        exp_txt = (
            texture_loss(pred2, hr, small_featurenet).item()
            + texture_loss(pred1, lr2, small_featurenet).item()
        )
        assert abs(r.mse - exp_mse) < 1e-12
        assert abs(r.per - exp_per) < 1e-12
        assert abs(r.txt - exp_txt) < 1e-12
        expected_total = r.adv + w.mse * exp_mse + w.perceptual * exp_per + w.texture * exp_txt
        assert abs(total.item() - expected_total) < 1e-12

    def test_unconstrained_ignores_level_terms(self, rng, small_featurenet):
        pred2 = rng.random((2, 1, 8, 8))
        hr = rng.random((2, 1, 8, 8))
        pred1 = rng.random((2, 1, 8, 8))
        lr2 = rng.random((2, 1, 8, 8))
        scores = rng.standard_normal(2)
        w = LossWeights()
        tot_u, _ = generator_objective(
            scores, pred2, hr, small_featurenet, w,
            pred_level1=pred1, target_level1=lr2, constrained=False,
        )
        tot_one, _ = generator_objective(scores, pred2, hr, small_featurenet, w)
        assert abs(tot_u.item() - tot_one.item()) < 1e-15

    def test_constrained_at_least_unconstrained(self, rng, small_featurenet):
        pred2 = rng.random((2, 1, 8, 8))
        hr = rng.random((2, 1, 8, 8))
        pred1 = rng.random((2, 1, 8, 8))
        lr2 = rng.random((2, 1, 8, 8))
        scores = rng.standard_normal(2)
        w = LossWeights()
        tot_c, _ = generator_objective(
            scores, pred2, hr, small_featurenet, w,
            pred_level1=pred1, target_level1=lr2, constrained=True,
        )
        tot_u, _ = generator_objective(
            scores, pred2, hr, small_featurenet, w,
            pred_level1=pred1, target_level1=lr2, constrained=False,
        )
        assert tot_c.item() >= tot_u.item()

    def test_missing_level_target_rejected(self, rng, small_featurenet):
        pred = rng.random((1, 1, 8, 8))
        with pytest.raises(ValueError, match="level-1"):
            generator_objective(
                np.zeros(1), pred, pred, small_featurenet, LossWeights(),
                pred_level1=pred,
            )

    def test_dropping_mse_and_texture_leaves_adv_plus_perceptual(self, rng, small_featurenet):
        pred = rng.random((2, 1, 8, 8))
        target = rng.random((2, 1, 8, 8))
        scores = rng.standard_normal(2)
        w = LossWeights(mse=0.0, perceptual=1.0, texture=0.0)
        total, r = generator_objective(scores, pred, target, small_featurenet, w)
        expected = (
            adversarial_loss_g(scores).item()
            + perceptual_loss(pred, target, small_featurenet).item()
        )
        assert abs(total.item() - expected) < 1e-14

    def test_linear_response_to_each_weight(self, rng, small_featurenet):
        pred = rng.random((2, 1, 8, 8))
        target = rng.random((2, 1, 8, 8))
        scores = rng.standard_normal(2)
        base = LossWeights(mse=0.2, perceptual=0.5, texture=0.3)
        t0, r0 = generator_objective(scores, pred, target, small_featurenet, base)
        for name in ("mse", "perceptual", "texture"):
            doubled = LossWeights(**{
                "mse": base.mse, "perceptual": base.perceptual, "texture": base.texture,
                name: getattr(base, name) * 2.0,
            })
            t1, _ = generator_objective(scores, pred, target, small_featurenet, doubled)
            component = {"mse": r0.mse, "perceptual": r0.per, "texture": r0.txt}[name]
            assert abs((t1.item() - t0.item()) - getattr(base, name) * component) < 1e-12

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            LossWeights(mse=-0.1)


class TestDiscriminatorObjective:
    def test_linear_critic_penalty_independent_of_inputs(self, rng):
        c = rng.standard_normal((1, 4, 4))
        lam = 10.0
        expected_pen = lam * (np.linalg.norm(c) - 1.0) ** 2
        for _ in range(3):
            real = rng.random((3, 1, 4, 4))
            fake = rng.random((3, 1, 4, 4))
            eps = rng.uniform(0, 1, 3)
            g = ad.Graph()
            c_leaf = g.leaf(c)
            total, _ = discriminator_objective(
                real, fake, eps, linear_critic(c_leaf),
                LossWeights(gradient_penalty=lam), g,
            )
            score_part = float(np.mean(fake.reshape(3, -1) @ c.ravel())
                               - np.mean(real.reshape(3, -1) @ c.ravel()))
            assert abs(total.item() - (score_part + expected_pen)) < 1e-10

    def test_identical_batches_leave_only_penalty(self, rng):
        c = rng.standard_normal((1, 4, 4))
        batch = rng.random((4, 1, 4, 4))
        eps = rng.uniform(0, 1, 4)
        g = ad.Graph()
        c_leaf = g.leaf(c)
        total, w_dis = discriminator_objective(
            batch, batch, eps, linear_critic(c_leaf), LossWeights(), g
        )
        assert abs(total.item() - 10.0 * (np.linalg.norm(c) - 1.0) ** 2) < 1e-10
        assert w_dis == 0.0

    def test_quadratic_critic_matches_hand_computation(self, rng):
        real = rng.random((2, 1, 3, 3))
        fake = rng.random((2, 1, 3, 3))
        eps = rng.uniform(0, 1, 2)
        g = ad.Graph()
        total, _ = discriminator_objective(
            real, fake, eps, quadratic_critic, LossWeights(gradient_penalty=10.0), g
        )
        rs = eps.reshape(2, 1, 1, 1)
        interp = rs * real + (1 - rs) * fake
        norms = np.sqrt((interp**2).sum(axis=(1, 2, 3)))
        hand = (
            np.mean(0.5 * (fake**2).sum(axis=(1, 2, 3)))
            - np.mean(0.5 * (real**2).sum(axis=(1, 2, 3)))
            + 10.0 * np.mean((norms - 1.0) ** 2)
        )
        assert abs(total.item() - hand) < 1e-10

    def test_gradient_matches_finite_differences_small_critic(self, rng):
        from mcsr.nets import attach, discriminator_forward, init_discriminator

        dp = init_discriminator(3, channels=(2, 2), dense=(2, 1), input_side=4)
        real = rng.random((2, 1, 4, 4))
        fake = rng.random((2, 1, 4, 4))
        eps = rng.uniform(0, 1, 2)
        names = list(dp.params)

        def run(leaves=None):
            g = ad.Graph()
            p = leaves if leaves is not None else attach(g, dp.params)
            gg = p[names[0]].graph
            total, _ = discriminator_objective(
                real, fake, eps,
                lambda x: discriminator_forward(x, dp, p),
                LossWeights(), gg,
            )
            return total, p

        g = ad.Graph()
        leaves = attach(g, dp.params)
        total, _ = run(leaves)
        grads = ad.backward(total, [leaves[k] for k in names])
        for name, gt in zip(names, grads):
            num = numeric_grad(lambda: run()[0].item(), dp.params[name])
            assert rel_err(gt.data, num) < 1e-5, name

    def test_batch_mismatch_rejected(self, rng):
        g = ad.Graph()
        c_leaf = g.leaf(rng.standard_normal((1, 4, 4)))
        with pytest.raises(ad.ShapeError):
            discriminator_objective(
                rng.random((2, 1, 4, 4)), rng.random((3, 1, 4, 4)),
                rng.uniform(0, 1, 2), linear_critic(c_leaf), LossWeights(), g,
            )


class TestPenaltyDrivesNormToOne:
    def test_linear_critic_norm_converges(self, rng):
        # toy optimization: with real == fake the score terms vanish and the
        # penalty alone should push ||c|| to 1 within 5000 Adam steps
        c = {"c": rng.standard_normal((1, 4, 4)) * 0.2}
        state = AdamState(c, learning_rate=1e-3)
        batch = rng.random((4, 1, 4, 4))
        eps_stream = np.random.default_rng(99)
        for _ in range(5000):
            g = ad.Graph()
            c_leaf = g.leaf(c["c"])
            total, _ = discriminator_objective(
                batch, batch, eps_stream.uniform(0, 1, 4),
                linear_critic(c_leaf), LossWeights(), g,
            )
            (gc,) = ad.backward(total, [c_leaf])
            adam_step(c, {"c": gc.data}, state)
            if abs(np.linalg.norm(c["c"]) - 1.0) < 5e-4:
                break
        assert abs(np.linalg.norm(c["c"]) - 1.0) < 1e-3


class TestWassersteinMonitor:
    def test_equal_means_zero(self):
        assert wasserstein_monitor([1.0, 2.0], [2.0, 1.0]) == 0.0

    def test_separated_means(self):
        assert wasserstein_monitor([1.0, 1.0], [4.0, 4.0]) == 3.0

    def test_symmetric(self, rng):
        a, b = rng.standard_normal(5), rng.standard_normal(5)
        assert wasserstein_monitor(a, b) == wasserstein_monitor(b, a)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            wasserstein_monitor([], [1.0])
