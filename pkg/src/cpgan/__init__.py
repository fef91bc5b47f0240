"""Convex-potential generative adversarial training at desk scale.

The generator is the input gradient of a scalar potential network whose
strong convexity is promoted by a sampled midpoint penalty.  The package
also carries the analytic and quadrature oracles used to verify the
transport and divergence identities numerically.
"""

from .autodiff import Parameter, Tensor, backward, grad_check, gradients
from .data import GmmSpec, SampleSet, gmm_density, gmm_sample, ring_gmm, uniform_source
from .losses import (LossBreakdown, brenier_loss, convexity_penalty_empirical,
                     convexity_penalty_quadrature, gan_loss_empirical,
                     js_divergence_quadrature, kl_divergence, lemma31_check,
                     optimal_discriminator)
from .networks import (DiscriminatorNet, MlpSpec, PotentialNet,
                       forward_discriminator, forward_potential, init_params,
                       recu_identity_gadget, recu_multiplication_gadget)
from .training import Adam, MetricsRecord, TrainConfig, run_training
from .transport import (ConvexityReport, GeneratorHandle, generator_apply,
                        hessian_apply, inverse_map, min_eigenvalue,
                        pushforward_density, strong_convexity_scan)

__version__ = "0.1.0"
