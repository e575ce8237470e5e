"""Device-independent QKD security bounds from the correlator pair (X, Y).

The library bounds Eve's conditional entropy H(A0|E) as a function of the
two halves X = <A0 (B0+B1)> and Y = <A1 (B0-B1)> of the CHSH score instead
of their sum, computes asymptotic key rates for lossy two-qubit
experiments, and can certify a bound at a fixed operating point by
Lipschitz branch-and-bound.
"""

from .correlators import (
    AngleModel,
    BellDiagonalWeights,
    BellTest,
    BoundResult,
    Correlators,
    NoiseParams,
    TVector,
    angles_to_weights,
    beta_of,
    normalize_signs,
    t_to_weights,
    weights_to_t,
)
from .easy_bound import EasyRegionBound, I_easy, chsh_entropy_bound, optimal_omega_easy
from .entropy import (
    ConditionalState,
    binary_entropy,
    conditional_state,
    eve_cond_entropy,
    eve_cond_entropy_phi0,
    h_q,
    n_q,
    shannon_entropy,
)
from .errors import (
    BracketFailure,
    BudgetExceeded,
    DegenerateInput,
    DiqkdError,
    DomainError,
    InvariantViolation,
    NumericalFailure,
    QuantumSetViolation,
)
from .hard_bound import RoofBound, ansatz_I, c_star_sq, entropy_bound_xy, I_heuristic, roof
from .certify import (
    BBConfig,
    Certificate,
    DualProblem,
    Hypercube,
    beta_max,
    branch_and_bound,
    certify_point,
    entropy_lipschitz_constant,
    goal,
    r1_root,
)
from .keyrate import (
    ExperimentSetup,
    KeyRatePoint,
    cond_entropy_AB,
    critical_efficiency,
    key_rate,
    optimize_rate,
    simulate,
)

__version__ = "0.1.0"
