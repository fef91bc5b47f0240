import math

import numpy as np
import pytest

import cpgan.autodiff as ad
from cpgan.losses import (LossBreakdown, brenier_loss,
                          convexity_penalty_empirical,
                          convexity_penalty_quadrature, gan_loss_empirical,
                          js_divergence_quadrature, kl_divergence,
                          lemma31_check, optimal_discriminator,
                          population_gan_loss)
from cpgan.networks import DiscriminatorNet, MlpSpec, PotentialNet


class AnalyticPotential:
    """Stand-in for PotentialNet evaluating an analytic function."""

    def __init__(self, fn, d):
        self.fn = fn
        self.spec = MlpSpec((d, 1, 1))

    def forward(self, x):
        vals = np.asarray(self.fn(np.atleast_2d(x)), dtype=np.float64)
        return ad.Tensor(vals.reshape(-1, 1))


def test_gan_loss_balanced_discriminator():
    half = np.full((10, 1), 0.5)
    val = float(gan_loss_empirical(half, half).data)
    assert abs(val - (-math.log(2.0))) < 1e-12


def test_gan_loss_perfect_discriminator_clamped():
    ones = np.ones((5, 1))
    zeros = np.zeros((5, 1))
    val = float(gan_loss_empirical(ones, zeros).data)
    assert abs(val - math.log(1.0 - 1e-7)) < 1e-9
    assert val < 0.0


def test_gan_loss_hand_arithmetic():
    d_real = np.array([[0.8], [0.6]])
    d_fake = np.array([[0.3], [0.1]])
    expected = 0.5 * ((math.log(0.8) + math.log(0.6)) / 2
                      + (math.log(0.7) + math.log(0.9)) / 2)
    assert abs(float(gan_loss_empirical(d_real, d_fake).data) - expected) < 1e-12


def test_gan_loss_rejects_empty_batch():
    with pytest.raises(ValueError):
        gan_loss_empirical(np.zeros((0, 1)), np.zeros((3, 1)))


def test_gan_loss_always_nonpositive():
    rng = np.random.default_rng(0)
    for _ in range(20):
        dr = rng.uniform(1e-6, 1 - 1e-6, size=(8, 1))
        df = rng.uniform(1e-6, 1 - 1e-6, size=(8, 1))
        assert float(gan_loss_empirical(dr, df).data) <= 0.0


def test_penalty_zero_for_strongly_convex_quadratic():
    phi = AnalyticPotential(lambda x: np.sum(x ** 2, axis=1), d=2)
    val = float(convexity_penalty_empirical(phi, kappa=0.1, m=500, seed=0).data)
    assert val == 0.0


def test_penalty_concave_expectation_matches_d_over_48():
    # for phi = -||x||^2/2 and kappa=0 the expectation is d/48
    for d, expected in ((1, 1.0 / 48.0), (2, 1.0 / 24.0)):
        phi = AnalyticPotential(lambda x: -0.5 * np.sum(x ** 2, axis=1), d=d)
        m = 200_000
        vals = []
        for seed in range(3):
            vals.append(float(convexity_penalty_empirical(phi, 0.0, m, seed).data))
        # sampled relu terms live in [0, d/8]; bound the standard error loosely
        se = (d / 8.0) / math.sqrt(m)
        assert abs(np.mean(vals) - expected) < 3 * se


def test_penalty_deterministic_per_seed():
    phi = AnalyticPotential(lambda x: np.sin(3 * x[:, 0]), d=1)
    a = float(convexity_penalty_empirical(phi, 0.1, m=1, seed=7).data)
    b = float(convexity_penalty_empirical(phi, 0.1, m=1, seed=7).data)
    assert a == b


def test_penalty_validates_arguments():
    phi = AnalyticPotential(lambda x: np.sum(x ** 2, axis=1), d=1)
    with pytest.raises(ValueError):
        convexity_penalty_empirical(phi, 0.1, m=0, seed=0)
    with pytest.raises(ValueError):
        convexity_penalty_empirical(phi, -0.1, m=5, seed=0)


def test_penalty_quadrature_constants():
    concave = lambda x: -0.5 * np.sum(np.atleast_2d(x) ** 2, axis=1)
    v1 = convexity_penalty_quadrature(concave, 0.0, grid=200, d=1)
    assert abs(v1 - 1.0 / 48.0) < 1e-4
    v2 = convexity_penalty_quadrature(concave, 0.0, grid=40, d=2)
    assert abs(v2 - 1.0 / 24.0) < 1e-4


def test_penalty_quadrature_zero_with_margin():
    convex = lambda x: np.sum(np.atleast_2d(x) ** 2, axis=1)
    assert convexity_penalty_quadrature(convex, 1.0, grid=50, d=1) == 0.0


def test_penalty_quadrature_rejects_high_dimension():
    with pytest.raises(ValueError):
        convexity_penalty_quadrature(lambda x: x[:, 0], 0.0, grid=10, d=3)


def test_penalty_mc_agrees_with_quadrature():
    fn = lambda x: np.sin(4.0 * np.atleast_2d(x)[:, 0])
    quad = convexity_penalty_quadrature(fn, 0.1, grid=400, d=1)
    phi = AnalyticPotential(fn, d=1)
    m = 1_000_000
    mc = float(convexity_penalty_empirical(phi, 0.1, m, seed=0).data)
    se = 1.0 / math.sqrt(m)  # relu terms bounded by ~1 here
    assert abs(mc - quad) < 3 * se


def test_brenier_loss_composition():
    phi = PotentialNet(MlpSpec((2, 4, 1)), seed=0)
    disc = DiscriminatorNet(MlpSpec((2, 4, 1), activation="leaky_relu",
                                    output_transform="sigmoid"), seed=1)
    rng = np.random.default_rng(0)
    real = rng.uniform(size=(16, 2))
    src = rng.uniform(size=(16, 2))
    bd = brenier_loss(phi, disc, real, src, kappa=0.1, gamma=0.5,
                      penalty_samples=64, seed=3)
    assert isinstance(bd, LossBreakdown)
    assert bd.penalty_term >= 0.0
    assert abs(bd.total - (bd.gan_term + bd.gamma * bd.penalty_term)) < 1e-12


def test_brenier_loss_gamma_zero_equals_gan_term():
    phi = PotentialNet(MlpSpec((2, 4, 1)), seed=0)
    disc = DiscriminatorNet(MlpSpec((2, 4, 1), activation="leaky_relu",
                                    output_transform="sigmoid"), seed=1)
    rng = np.random.default_rng(1)
    bd = brenier_loss(phi, disc, rng.uniform(size=(8, 2)),
                      rng.uniform(size=(8, 2)), kappa=0.1, gamma=0.0,
                      penalty_samples=16, seed=0)
    assert bd.total == bd.gan_term


def test_brenier_loss_parameter_gradients_match_fd():
    phi = PotentialNet(MlpSpec((2, 4, 1)), seed=0)
    disc = DiscriminatorNet(MlpSpec((2, 4, 1), activation="leaky_relu",
                                    output_transform="sigmoid"), seed=1)
    rng = np.random.default_rng(2)
    real = rng.uniform(size=(8, 2))
    src = rng.uniform(0.1, 0.9, size=(8, 2))
    kwargs = dict(kappa=0.5, gamma=0.7, penalty_samples=32, seed=9)
    bd = brenier_loss(phi, disc, real, src, **kwargs)
    grads = ad.gradients(bd.node, phi.params)
    h = 1e-6
    checked = 0
    for p in phi.params:
        flat = p.data.reshape(-1)
        gflat = grads[p.name].reshape(-1)
        for i in range(min(flat.size, 4)):
            orig = flat[i]
            flat[i] = orig + h
            hi = brenier_loss(phi, disc, real, src, **kwargs).total
            flat[i] = orig - h
            lo = brenier_loss(phi, disc, real, src, **kwargs).total
            flat[i] = orig
            fd = (hi - lo) / (2 * h)
            assert abs(gflat[i] - fd) / max(abs(fd), 1e-3) < 1e-4
            checked += 1
    assert checked >= 12


def test_optimal_discriminator_cases():
    p_star = lambda x: np.where(np.atleast_2d(x)[:, 0] <= 0.5, 2.0, 0.0)
    p = lambda x: np.ones(np.atleast_2d(x).shape[0])
    d_opt = optimal_discriminator(p_star, p)
    np.testing.assert_allclose(d_opt(np.array([[0.25]])), [2.0 / 3.0])
    np.testing.assert_allclose(d_opt(np.array([[0.75]])), [0.0])
    np.testing.assert_allclose(d_opt(np.array([[1.5]])), [0.0])
    same = optimal_discriminator(p, p)
    np.testing.assert_allclose(same(np.array([[0.3], [0.9]])), [0.5, 0.5])


def test_kl_and_js_basics():
    uniform = lambda x: np.ones(np.atleast_2d(x).shape[0])
    assert abs(kl_divergence(uniform, uniform, grid=500, d=1)) < 1e-10
    assert abs(js_divergence_quadrature(uniform, uniform, grid=500, d=1)) < 1e-10
    half = lambda x: np.where(np.atleast_2d(x)[:, 0] >= 0.5, 2.0, 0.0)
    js = js_divergence_quadrature(uniform, half, grid=10_000, d=1)
    # independent Monte Carlo estimator of the same integral
    rng = np.random.default_rng(0)
    x = rng.uniform(size=200_000)
    p = np.ones_like(x)
    q = np.where(x >= 0.5, 2.0, 0.0)
    mix = 0.5 * (p + q)
    mc = 0.5 * (np.mean(np.log(p / mix))
                + np.mean(np.where(q > 0, q * np.log(np.maximum(q, 1e-300) / mix), 0.0)))
    assert abs(js - mc) < 1e-3
    assert js <= math.log(2.0) + 1e-12


def test_js_rejects_negative_density():
    uniform = lambda x: np.ones(np.atleast_2d(x).shape[0])
    bad = lambda x: -uniform(x)
    with pytest.raises(ValueError):
        js_divergence_quadrature(uniform, bad, grid=100, d=1)


def test_lemma31_identity_equal_measures():
    uniform = lambda x: np.ones(np.atleast_2d(x).shape[0])
    identity = lambda z: np.atleast_2d(z)
    lhs, rhs = lemma31_check(identity, uniform, uniform, grid=2000, d=1)
    assert abs(lhs - (-math.log(2.0))) < 1e-6
    assert abs(lhs - rhs) < 1e-6


def test_lemma31_identity_scaling_map():
    # G(z) = z/2 pushes uniform[0,1] to uniform[0,1/2] with density 2
    gen = lambda z: 0.5 * np.atleast_2d(z)
    gen_density = lambda x: np.where(np.atleast_2d(x)[:, 0] <= 0.5, 2.0, 0.0)
    uniform = lambda x: np.ones(np.atleast_2d(x).shape[0])
    lhs, rhs = lemma31_check(gen, gen_density, uniform, grid=20_000, d=1)
    assert abs(lhs - rhs) < 1e-4


def test_suboptimal_discriminators_lose():
    uniform = lambda x: np.ones(np.atleast_2d(x).shape[0])
    gen = lambda z: 0.5 * np.atleast_2d(z)
    gen_density = lambda x: np.where(np.atleast_2d(x)[:, 0] <= 0.5, 2.0, 0.0)
    d_opt = optimal_discriminator(uniform, gen_density)
    best = population_gan_loss(gen, d_opt, uniform, grid=4000, d=1)
    rng = np.random.default_rng(0)
    for _ in range(50):
        c = rng.uniform(0.05, 0.95)
        const = lambda x: np.full(np.atleast_2d(x).shape[0], c)
        val = population_gan_loss(gen, const, uniform, grid=4000, d=1)
        assert val < best + 1e-12
