"""Simulator for signSGD federated learning over a fading multiple-access
channel with sign-alignment precoding and Bayesian over-the-air aggregation."""

from .aggregation import (
    AggregationContext,
    a_term,
    bayaircomp,
    majority_estimate,
    majority_vote,
    mmse_oracle,
    naive_mean,
)
from .analysis import (
    BoundReport,
    convergence_bound,
    empirical_mse,
    grad_error_inner_product,
    mse_bound,
)
from .channel import CellGeometry, ChannelState, mac_receive, path_loss_cost231, sample_block_fading
from .gradient_model import (
    GradientMoments,
    center_gradient,
    estimate_moments,
    one_bit_quantize,
    quantize_moments,
)
from .precoding import PrecoderKind, PrecoderSpec, check_power, sign_align, truncated_inversion

__version__ = "0.1.0"
