"""Conditional-gradient optimization over particle clouds."""

from . import errors
from .cloud import (
    ParticleCloud,
    TransportPlan,
    geodesic_point,
    load_csv,
    mean_squared_gradient_norm,
    save_csv,
    wasserstein2_exact,
)
from .dual_solvers import (
    DualSolveReport,
    PowerPenalty,
    PushforwardSampler,
    TrustRegionIndicator,
    dual_interval,
    mirror_ascent,
    primal_dual_bisection,
    primal_dual_gap,
    stochastic_bisection,
    trust_region_step,
)
from .frank_wolfe import (
    FWConfig,
    FWTrace,
    estimate_gradient_norm,
    run_frank_wolfe,
    smoothness_probe,
)
from .functionals import (
    EntropicDeconv,
    GaussianKernel,
    InverseMultiquadricKernel,
    MMDSquared,
    PairPotential,
    PotentialInteraction,
    RandomFeatureKernel,
    sinkhorn_dual,
)
from .moreau import (
    ProxResult,
    SmoothObjective,
    agd_prox,
    g_value_and_grad_fullbatch,
    supergradient_hp,
)
from .registry import make_kernel, make_objective, make_pair

__version__ = "0.1.0"

__all__ = [
    "DualSolveReport",
    "EntropicDeconv",
    "FWConfig",
    "FWTrace",
    "GaussianKernel",
    "InverseMultiquadricKernel",
    "MMDSquared",
    "PairPotential",
    "ParticleCloud",
    "PotentialInteraction",
    "PowerPenalty",
    "ProxResult",
    "PushforwardSampler",
    "RandomFeatureKernel",
    "SmoothObjective",
    "TransportPlan",
    "TrustRegionIndicator",
    "agd_prox",
    "dual_interval",
    "errors",
    "estimate_gradient_norm",
    "g_value_and_grad_fullbatch",
    "geodesic_point",
    "load_csv",
    "make_kernel",
    "make_objective",
    "make_pair",
    "mean_squared_gradient_norm",
    "mirror_ascent",
    "primal_dual_bisection",
    "primal_dual_gap",
    "run_frank_wolfe",
    "save_csv",
    "sinkhorn_dual",
    "smoothness_probe",
    "stochastic_bisection",
    "supergradient_hp",
    "trust_region_step",
    "wasserstein2_exact",
]
