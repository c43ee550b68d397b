"""Divergences, optimal transport, and duality checks on finite supports."""

from .distributions import (
    Coupling,
    FiniteDistribution,
    GeneratorFamily,
    RandomSource,
    Witness,
    coupling_marginals,
    expectation,
    independent_coupling,
    load_distribution_csv,
    merge_supports,
    pushforward,
    save_distribution_csv,
    shift_family,
)
from .errors import (
    ConvergenceError,
    DomainError,
    GandualityError,
    InfeasibleError,
    InvariantViolation,
)
from .duality import (
    AllFunctions,
    ComposedLipschitz,
    IdentityCheck,
    LinearSpan,
    LipschitzBall,
    MomentVector,
    check_lipschitz_fgan_identity,
    check_perturbed_fgan_identity,
    class_penalty,
    composed_lipschitz_max,
    discriminator_max,
    fgan_span_max,
    moment_projection,
    otgan_dual,
    penalized_divergence_min,
    polynomial_features,
)
from .evaluators import FDivergence, OTDivergence
from .hybrid import (
    HybridResult,
    HybridSpec,
    check_w1_continuity,
    check_w2_perturbation_bound,
    hybrid_brute,
    hybrid_dual,
    hybrid_primal,
)
from .fdiv import (
    FGenerator,
    GENERATORS,
    brute_force_conjugate,
    conjugate_shift,
    f_divergence,
    fdiv_conjugate,
    get_generator,
    js_divergence,
    reverse_generator,
)
from .neuralgan import (
    MLPParams,
    MixtureDiscriminator,
    SpectralNormState,
    TrainConfig,
    gan_loss,
    gradient_penalty,
    mixture_approx_error,
    mlp_forward,
    spectral_normalize,
    train,
    wrm_inner_solve,
)
from .transport import (
    CostFunction,
    OTResult,
    c_transform,
    cost_indicator,
    cost_norm,
    cost_norm_squared,
    kantorovich_value,
    mcshane_regularize,
    ot_conjugate,
    ot_primal,
    tv_distance,
    wasserstein,
)

__version__ = "0.1.0"
