"""GAN loss, the sampled midpoint convexity penalty, and quadrature oracles.

The quadrature routines are deterministic reference implementations used to
cross-check the Monte Carlo estimators and the analytic identities; they
never participate in training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .networks import forward_discriminator, forward_potential
from .transport import generator_apply

LOG_EPS = 1e-7  # clamp inside the log terms, guards float underflow only


@dataclass
class LossBreakdown:
    gan_term: float
    penalty_term: float
    total: float
    gamma: float
    kappa: float
    node: ad.Tensor | None = None  # graph root for backward()


def gan_loss_empirical(d_real, d_fake):
    """(1/2n) sum log d_real + (1/2n) sum log(1 - d_fake), clamped.

    Accepts Tensors (graph preserved) or arrays; returns a scalar Tensor.
    """
    d_real = d_real if isinstance(d_real, ad.Tensor) else ad.Tensor(d_real)
    d_fake = d_fake if isinstance(d_fake, ad.Tensor) else ad.Tensor(d_fake)
    if d_real.size == 0 or d_fake.size == 0:
        raise ValueError("empty batch")
    real_term = ad.tmean(ad.tlog(ad.clamp(d_real, LOG_EPS, 1.0 - LOG_EPS)))
    one_minus = ad.sub(ad.smul(d_fake, -1.0), ad.constant(np.float64(-1.0)))
    fake_term = ad.tmean(ad.tlog(ad.clamp(one_minus, LOG_EPS, 1.0 - LOG_EPS)))
    return ad.smul(ad.add(real_term, fake_term), 0.5)


def _phi_values(phi, X):
    """Potential values for an (n, d) array, as an (n, 1) Tensor."""
    return forward_potential(phi, X)


def convexity_penalty_empirical(phi, kappa, m, seed, domain=(0.0, 1.0)):
    """Sampled midpoint penalty, differentiable in the potential parameters.

    Draws m i.i.d. pairs (U, U') uniform on the domain box and averages
    relu(phi(mid) - (phi(U) + phi(U'))/2 + kappa/8 * ||U - U'||^2).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    d = phi.spec.layer_widths[0]
    rng = np.random.default_rng(seed)
    lo, hi = domain
    U = rng.uniform(lo, hi, size=(m, d))
    V = rng.uniform(lo, hi, size=(m, d))
    margin = (kappa / 8.0) * np.sum((U - V) ** 2, axis=1, keepdims=True)
    mid = _phi_values(phi, 0.5 * (U + V))
    avg = ad.smul(ad.add(_phi_values(phi, U), _phi_values(phi, V)), 0.5)
    arg = ad.add(ad.sub(mid, avg), ad.constant(margin))
    return ad.tmean(ad.relu(arg))


def convexity_penalty_quadrature(phi_fn, kappa, grid, d, domain=(0.0, 1.0)):
    """Deterministic midpoint-rule value of the convexity penalty integral.

    phi_fn maps an (n, d) array to (n,) potential values; d <= 2 (the
    quadrature is over the 2d-dimensional product of two domain copies).
    """
    if d > 2:
        raise ValueError("quadrature penalty supports d <= 2")
    lo, hi = domain
    pts = lo + (hi - lo) * (np.arange(grid) + 0.5) / grid
    axes = np.meshgrid(*([pts] * (2 * d)), indexing="ij")
    flat = np.stack([a.reshape(-1) for a in axes], axis=1)
    U, V = flat[:, :d], flat[:, d:]
    margin = (kappa / 8.0) * np.sum((U - V) ** 2, axis=1)
    arg = phi_fn(0.5 * (U + V)) - 0.5 * (phi_fn(U) + phi_fn(V)) + margin
    cell = ((hi - lo) / grid) ** (2 * d)
    return float(np.sum(np.maximum(arg, 0.0)) * cell)


def brenier_loss(phi, disc, real_batch, source_batch, kappa, gamma,
                 penalty_samples, seed, domain=(0.0, 1.0)):
    """Combined loss: empirical GAN term plus gamma times the penalty.

    The graph spans both networks; the penalty only touches the potential.
    """
    fake = generator_apply(phi, np.asarray(source_batch, dtype=np.float64))
    d_fake = forward_discriminator(disc, fake)
    d_real = forward_discriminator(disc, np.asarray(real_batch, dtype=np.float64))
    gan = gan_loss_empirical(d_real, d_fake)
    if gamma != 0.0:
        pen = convexity_penalty_empirical(phi, kappa, penalty_samples, seed, domain)
        total = ad.add(gan, ad.smul(pen, gamma))
        pen_val = float(pen.data)
    else:
        pen = convexity_penalty_empirical(phi, kappa, penalty_samples, seed, domain)
        total = gan
        pen_val = float(pen.data)
    return LossBreakdown(
        gan_term=float(gan.data),
        penalty_term=pen_val,
        total=float(total.data),
        gamma=gamma,
        kappa=kappa,
        node=total,
    )


# ---------------------------------------------------------------------------
# analytic oracles


def optimal_discriminator(p_star, p):
    """Pointwise density ratio p*/(p*+p), zero outside the unit box."""

    def d_opt(x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        ps = np.asarray(p_star(x), dtype=np.float64)
        pg = np.asarray(p(x), dtype=np.float64)
        denom = ps + pg
        out = np.where(denom > 0, ps / np.where(denom > 0, denom, 1.0), 0.0)
        inside = np.all((x >= 0.0) & (x <= 1.0), axis=1)
        return np.where(inside, out, 0.0)

    return d_opt


def _midpoint_grid(grid, d, support):
    lo, hi = support
    pts = lo + (hi - lo) * (np.arange(grid) + 0.5) / grid
    if d == 1:
        X = pts[:, None]
    else:
        A, B = np.meshgrid(pts, pts, indexing="ij")
        X = np.stack([A.reshape(-1), B.reshape(-1)], axis=1)
    cell = ((hi - lo) / grid) ** d
    return X, cell


def kl_divergence(p, q, grid, d, support=(0.0, 1.0)):
    """Midpoint-rule KL divergence of densities p from q on the support box."""
    X, cell = _midpoint_grid(grid, d, support)
    pv = np.asarray(p(X), dtype=np.float64)
    qv = np.asarray(q(X), dtype=np.float64)
    if np.any(pv < 0) or np.any(qv < 0):
        raise ValueError("negative density sample")
    mask = pv > 0
    ratio = pv[mask] / np.maximum(qv[mask], 1e-300)
    return float(np.sum(pv[mask] * np.log(ratio)) * cell)


def js_divergence_quadrature(p, q, grid, d, support=(0.0, 1.0)):
    """Midpoint-rule Jensen-Shannon divergence of two densities."""
    mix = lambda x: 0.5 * (np.asarray(p(x)) + np.asarray(q(x)))
    return 0.5 * (kl_divergence(p, mix, grid, d, support)
                  + kl_divergence(q, mix, grid, d, support))


def population_gan_loss(gen_fn, disc_fn, p_star, grid, d=1,
                        support=(0.0, 1.0), source=(0.0, 1.0)):
    """Quadrature of L(G, D) = 1/2 E[log D(Y)] + 1/2 E[log(1 - D(G(Z)))]."""
    Y, cell_y = _midpoint_grid(grid, d, support)
    ps = np.asarray(p_star(Y), dtype=np.float64)
    dv = np.clip(np.asarray(disc_fn(Y), dtype=np.float64), LOG_EPS, 1 - LOG_EPS)
    term_real = np.sum(ps * np.log(dv)) * cell_y

    Z, cell_z = _midpoint_grid(grid, d, source)
    gz = np.atleast_2d(np.asarray(gen_fn(Z), dtype=np.float64))
    dg = np.clip(np.asarray(disc_fn(gz), dtype=np.float64), LOG_EPS, 1 - LOG_EPS)
    term_fake = np.sum(np.log(1.0 - dg)) * cell_z
    return 0.5 * (term_real + term_fake)


def lemma31_check(gen_fn, gen_density, p_star, grid, d=1, support=(0.0, 1.0)):
    """Both sides of the optimal-discriminator identity, by quadrature.

    Returns (lhs, rhs) with lhs = L(G, D_G) and rhs = d_JS - log 2, for an
    analytic generator with known pushforward density.
    """
    d_opt = optimal_discriminator(p_star, gen_density)
    lhs = population_gan_loss(gen_fn, d_opt, p_star, grid, d, support)
    rhs = js_divergence_quadrature(p_star, gen_density, grid, d, support) - math.log(2.0)
    return lhs, rhs
