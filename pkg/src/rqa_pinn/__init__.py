"""Adaptive PINN training with residual-quantile adjusted sample weights."""

import jax

# Derivative checks and bit-level reproducibility need double precision throughout.
jax.config.update("jax_enable_x64", True)

from rqa_pinn.derivatives import (  # noqa: E402
    DerivativeBundle,
    EvaluationError,
    derivatives_at,
    divergence_form,
    parameter_gradient,
)
from rqa_pinn.network import MlpParams, cubic_relu, forward, init  # noqa: E402
from rqa_pinn.problems import PdeProblem, get_problem  # noqa: E402
from rqa_pinn.trainer import TrainConfig, train  # noqa: E402
from rqa_pinn.weighting import (  # noqa: E402
    WeightVector,
    binary_weights,
    empirical_quantile,
    lp_weights,
    rqa_adjust,
    uniform_weights,
)

__all__ = [
    "DerivativeBundle",
    "EvaluationError",
    "MlpParams",
    "PdeProblem",
    "TrainConfig",
    "WeightVector",
    "binary_weights",
    "cubic_relu",
    "derivatives_at",
    "divergence_form",
    "empirical_quantile",
    "forward",
    "get_problem",
    "init",
    "lp_weights",
    "parameter_gradient",
    "rqa_adjust",
    "train",
    "uniform_weights",
]
