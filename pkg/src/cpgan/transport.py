"""Optimal-transport mechanics built on the gradient of the potential.

The generator is the input gradient of the scalar potential, written out
with autodiff primitives via the layer-wise chain rule so that the result
stays differentiable with respect to the network parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .networks import ACTIVATION_DERIVS, _t


def generator_apply(net, z):
    """Input gradient of the potential for a batch of points (graph version).

    z: ndarray or Tensor of shape (n, d).  Returns an (n, d) Tensor whose
    graph spans the potential's parameters, so a second loss built on top
    of it backpropagates into them.
    """
    if net.spec.activation not in ACTIVATION_DERIVS:
        raise ValueError("generator requires a differentiable activation "
                         f"(recu or requ), got {net.spec.activation!r}")
    deriv = ACTIVATION_DERIVS[net.spec.activation]
    z = z if isinstance(z, ad.Tensor) else ad.Tensor(z)
    _, preacts = net.forward_with_tape(z)
    n = z.data.shape[0]
    # start from the output layer row, broadcast to the batch
    w_last = net.weights[-1]  # (1, l_{L-1})
    u = ad.matmul(ad.constant(np.ones((n, 1))), w_last)
    for a, w in zip(reversed(preacts), reversed(net.weights[:-1])):
        u = ad.matmul(ad.mul(u, deriv(a)), w)
    return u


class GeneratorHandle:
    """Gradient map of a potential: either a network or an analytic function."""

    def __init__(self, potential=None, grad_fn=None):
        if (potential is None) == (grad_fn is None):
            raise ValueError("give exactly one of potential / grad_fn")
        self.potential = potential
        self._grad_fn = grad_fn

    @classmethod
    def from_net(cls, net):
        return cls(potential=net)

    @classmethod
    def from_function(cls, grad_fn):
        """grad_fn maps an (n, d) array to the (n, d) array of gradients."""
        return cls(grad_fn=grad_fn)

    def apply(self, z):
        """Gradient-map values for an (n, d) batch, as a plain array."""
        z = np.asarray(z, dtype=np.float64)
        squeeze = z.ndim == 1
        if squeeze:
            z = z[None, :]
        if self.potential is not None:
            out = generator_apply(self.potential, z).data
        else:
            out = np.asarray(self._grad_fn(z), dtype=np.float64)
        return out[0] if squeeze else out


def hessian_apply(g, z, h=1e-5):
    """Hessian of the potential at one point, via central differences of the
    analytic gradient, symmetrized."""
    z = np.asarray(z, dtype=np.float64)
    d = z.shape[-1]
    pts = np.repeat(z[None, :], 2 * d, axis=0)
    for j in range(d):
        pts[2 * j, j] += h
        pts[2 * j + 1, j] -= h
    vals = g.apply(pts)
    H = np.empty((d, d))
    for j in range(d):
        H[:, j] = (vals[2 * j] - vals[2 * j + 1]) / (2.0 * h)
    return 0.5 * (H + H.T)


def hessians_batched(g, Z, h=1e-5):
    """Hessians at every row of Z in a single batched evaluation, (n,d,d)."""
    Z = np.asarray(Z, dtype=np.float64)
    n, d = Z.shape
    pts = np.empty((2 * d * n, d))
    for j in range(d):
        pts[(2 * j) * n:(2 * j + 1) * n] = Z
        pts[(2 * j) * n:(2 * j + 1) * n, j] += h
        pts[(2 * j + 1) * n:(2 * j + 2) * n] = Z
        pts[(2 * j + 1) * n:(2 * j + 2) * n, j] -= h
    vals = g.apply(pts)
    H = np.empty((n, d, d))
    for j in range(d):
        hi = vals[(2 * j) * n:(2 * j + 1) * n]
        lo = vals[(2 * j + 1) * n:(2 * j + 2) * n]
        H[:, :, j] = (hi - lo) / (2.0 * h)
    return 0.5 * (H + np.transpose(H, (0, 2, 1)))


def min_eigenvalue(H, tol=1e-6):
    """Smallest eigenvalue of a symmetric matrix."""
    H = np.asarray(H, dtype=np.float64)
    asym = np.max(np.abs(H - H.T))
    if asym > tol:
        raise ValueError(f"matrix not symmetric (residual {asym:.3e})")
    return float(np.linalg.eigvalsh(0.5 * (H + H.T))[0])


@dataclass
class ConvexityReport:
    min_eigenvalue_estimate: float
    worst_point: np.ndarray
    samples_scanned: int
    kappa_certified: float | None = None

    def __post_init__(self):
        if (self.kappa_certified is not None
                and self.kappa_certified > self.min_eigenvalue_estimate):
            raise ValueError("certified kappa exceeds the eigenvalue estimate")


def strong_convexity_scan(g, n_points, seed, domain=(0.0, 1.0), d=None,
                          kappa=None):
    """Minimum Hessian eigenvalue over uniform sample points in the domain.

    domain is an (lo, hi) box; d defaults to the potential's input width.
    If kappa is given and the estimate clears it, it is certified in the
    report.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if d is None:
        if g.potential is None:
            raise ValueError("d is required for analytic gradient maps")
        d = g.potential.spec.layer_widths[0]
    rng = np.random.default_rng(seed)
    lo, hi = domain
    Z = rng.uniform(lo, hi, size=(n_points, d))
    H = hessians_batched(g, Z)
    eigs = np.linalg.eigvalsh(H)[:, 0]
    worst = int(np.argmin(eigs))
    est = float(eigs[worst])
    certified = kappa if (kappa is not None and est >= kappa) else None
    return ConvexityReport(est, Z[worst].copy(), n_points, certified)


@dataclass
class InverseResult:
    point: np.ndarray
    residual: float
    boundary_active: bool
    iterations: int


class InverseMapError(RuntimeError):
    def __init__(self, residual, iterations):
        super().__init__(
            f"inverse map did not converge after {iterations} iterations "
            f"(residual {residual:.3e})")
        self.residual = residual


def inverse_map(g, x, kappa_lower, kappa_upper=None, domain=(0.0, 1.0),
                tol=1e-8, max_iter=100_000):
    """Invert the gradient map by projected gradient descent on the box.

    Minimizes phi(z) - <x, z> over the domain with step 1/(2*kappa_upper).
    Requires kappa_lower > 0 (a strong-convexity certificate).  Returns the
    minimizer; when x lies outside the image the projection stays active
    and the result is flagged.
    """
    if kappa_lower <= 0:
        raise ValueError("inverse map needs kappa_lower > 0")
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    lo, hi = domain
    if kappa_upper is None:
        # crude Lipschitz bound for the gradient from a max-eigenvalue probe
        rng = np.random.default_rng(1)
        Z = rng.uniform(lo, hi, size=(32, d))
        kappa_upper = 1.5 * float(np.linalg.eigvalsh(hessians_batched(g, Z))[:, -1].max())
        kappa_upper = max(kappa_upper, kappa_lower)
    step = 1.0 / (2.0 * kappa_upper)

    z = np.clip(x, lo, hi)
    for it in range(1, max_iter + 1):
        grad = g.apply(z) - x
        residual = float(np.linalg.norm(grad))
        if residual < tol:
            return InverseResult(z, residual, False, it)
        z_new = np.clip(z - step * grad, lo, hi)
        on_boundary = bool(np.any((z_new <= lo) | (z_new >= hi)))
        if on_boundary and float(np.linalg.norm(z_new - z)) < 1e-14:
            return InverseResult(z_new, residual, True, it)
        z = z_new
    raise InverseMapError(residual, max_iter)


def pushforward_density(g, x, kappa_lower, kappa_upper=None, domain=(0.0, 1.0)):
    """Density of the gradient-map pushforward of the uniform source at x.

    1 / |det Hess phi| at the preimage; 0 when x falls outside the image
    (boundary projection active with a non-vanishing residual).
    """
    res = inverse_map(g, x, kappa_lower, kappa_upper, domain)
    if res.boundary_active and res.residual > 1e-6:
        return 0.0
    H = hessian_apply(g, res.point)
    return 1.0 / abs(float(np.linalg.det(H)))
