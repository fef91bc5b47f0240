"""Fully connected networks for the scalar potential and the discriminator.

Batches are (n, d) row matrices.  The scalar potential returns an (n, 1)
column; the discriminator returns sigmoid values in (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

ACTIVATIONS = {
    "recu": ad.recu,
    "requ": ad.requ,
    "relu": ad.relu,
    "leaky_relu": ad.leaky_relu,
}

# derivative of each activation, expressed with primitives so graphs that
# contain it stay differentiable with respect to the parameters
ACTIVATION_DERIVS = {
    "recu": lambda a: ad.smul(ad.requ(a), 3.0),
    "requ": lambda a: ad.smul(ad.relu(a), 2.0),
}


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple
    activation: str = "recu"
    output_transform: str = "none"  # "none" | "sigmoid"

    def __post_init__(self):
        if len(self.layer_widths) < 2:
            raise ValueError("need at least one layer (two widths)")
        if any(w < 1 for w in self.layer_widths):
            raise ValueError(f"all widths must be >= 1, got {self.layer_widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output_transform not in ("none", "sigmoid"):
            raise ValueError(f"unknown output transform {self.output_transform!r}")


def init_params(spec, seed):
    """Glorot-uniform weights, zero biases, reproducible from the seed."""
    rng = np.random.default_rng(seed)
    params = []
    widths = spec.layer_widths
    for k in range(1, len(widths)):
        fan_in, fan_out = widths[k - 1], widths[k]
        a = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-a, a, size=(fan_out, fan_in))
        params.append(ad.Parameter(w, f"layer{k}.weight"))
        params.append(ad.Parameter(np.zeros(fan_out), f"layer{k}.bias"))
    return params


class Mlp:
    """Parameter container plus the layer recursion."""

    def __init__(self, spec, seed=0, params=None):
        self.spec = spec
        self.params = params if params is not None else init_params(spec, seed)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")

    @property
    def weights(self):
        return self.params[0::2]

    @property
    def biases(self):
        return self.params[1::2]

    def forward_with_tape(self, x):
        """Run the layer recursion; also return the hidden preactivations.

        x is an ndarray or Tensor of shape (n, l0).  Returns (out, preacts)
        where preacts are the Tensors a_k = x_{k-1} W_k^T + B_k for the
        hidden layers, needed by the analytic input-gradient expression.
        """
        x = x if isinstance(x, ad.Tensor) else ad.Tensor(x)
        if x.data.ndim != 2 or x.data.shape[1] != self.spec.layer_widths[0]:
            raise ad.ShapeError(
                f"forward: expected (n, {self.spec.layer_widths[0]}) input, "
                f"got {x.data.shape}"
            )
        act = ACTIVATIONS[self.spec.activation]
        preacts = []
        h = x
        n_layers = len(self.weights)
        for k, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            a = ad.add(ad.matmul(h, _t(w)), b)
            if k < n_layers:
                preacts.append(a)
                h = act(a)
            else:
                h = a
        if self.spec.output_transform == "sigmoid":
            h = ad.sigmoid(h)
        return h, preacts

    def forward(self, x):
        out, _ = self.forward_with_tape(x)
        return out

    def state_dict(self):
        return {p.name: p.data.copy() for p in self.params}

    def load_state_dict(self, state):
        for p in self.params:
            blob = state[p.name]
            if blob.shape != p.data.shape:
                raise ValueError(
                    f"{p.name}: shape mismatch {blob.shape} vs {p.data.shape}"
                )
            p.data[...] = blob


def _t(w):
    """Transpose of a weight matrix as a graph node."""
    out = ad.Tensor(w.data.T, (w,))
    out.vjp = lambda g: (g.T,)
    return out


class PotentialNet(Mlp):
    """Scalar-output MLP with ReCU or ReQU activation."""

    def __init__(self, spec, seed=0, params=None):
        if spec.layer_widths[-1] != 1:
            raise ValueError("potential network must have scalar output")
        if spec.output_transform != "none":
            raise ValueError("potential network has no output transform")
        super().__init__(spec, seed, params)


class DiscriminatorNet(Mlp):
    """(0,1)-valued MLP with LeakyReLU hidden layers and sigmoid output."""

    def __init__(self, spec, seed=0, params=None):
        if spec.layer_widths[-1] != 1:
            raise ValueError("discriminator must have scalar output")
        if spec.activation != "leaky_relu" or spec.output_transform != "sigmoid":
            raise ValueError("discriminator uses leaky_relu hidden + sigmoid output")
        super().__init__(spec, seed, params)


def forward_potential(net, x):
    """phi(x) for a batch of points, graph recorded; returns (n, 1) Tensor."""
    return net.forward(x)


def forward_discriminator(net, y):
    """Discriminator values in (0, 1) for a batch of points."""
    return net.forward(y)


# ---------------------------------------------------------------------------
# exact ReCU gadgets, used as correctness oracles


def _recu_s(t):
    return np.maximum(t, 0.0) ** 3


def recu_multiplication_gadget(x, y):
    """x*y expressed through eight ReCU terms (exact up to float rounding)."""
    s = _recu_s
    total = (
        s(x + y + 1) - s(-(x + y + 1)) + s(-(x + y) + 1) - s(x + y - 1)
        - s(x - y + 1) + s(-x + y - 1) - s(-x + y + 1) + s(x - y - 1)
    )
    return total / 24.0


def recu_identity_gadget(x):
    """The identity function expressed through six ReCU terms."""
    c = 1.0 / math.sqrt(6.0)
    s = _recu_s
    return s(x + c) - s(-x - c) + s(x - c) - s(c - x) - 2 * s(x) + 2 * s(-x)
