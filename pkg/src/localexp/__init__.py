"""Local linear explanations, fidelity metrics, the neighborhood disjointedness
factor rho and the generalization bounds built on it."""

from .data import Dataset, SplitSpec, load_csv, pairwise_distance_range, split, standardize
from .errors import DataError, DegenerateWeightsError, NumericalError, SingularSystemError, TrainingError
from .explainers import (ExplanationSystem, LocalLinearModel, explain_at, fit_mnf_explainer,
                         fit_nf_explainer)
from .fidelity import FidelityReport, empirical_mnf, empirical_nf, mnf_at, mse, swap_identity_check
from .models import (FunctionModel, LinearModel, MLPModel, TrainConfig, fit_output_bound,
                     train)
from .neighborhoods import (DiscreteUniformNeighborhood, GaussianNeighborhood, NeighborhoodFamily,
                            PointMassNeighborhood)
from .rho import (RhoEstimate, hoeffding_epsilon, rho_exact_discrete, rho_growth_exponent,
                  rho_monte_carlo, rho_quadrature)
from .bounds import (BoundReport, ComplexityBound, lemma1_complexity_term, rademacher_star_linear,
                     theorem1_rhs, theorem2_rhs, theorem_alt_g_rhs)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "SplitSpec",
    "load_csv",
    "pairwise_distance_range",
    "split",
    "standardize",
    "DataError",
    "DegenerateWeightsError",
    "NumericalError",
    "SingularSystemError",
    "TrainingError",
    "ExplanationSystem",
    "LocalLinearModel",
    "explain_at",
    "fit_mnf_explainer",
    "fit_nf_explainer",
    "FidelityReport",
    "empirical_mnf",
    "empirical_nf",
    "mnf_at",
    "mse",
    "swap_identity_check",
    "FunctionModel",
    "LinearModel",
    "MLPModel",
    "TrainConfig",
    "fit_output_bound",
    "train",
    "DiscreteUniformNeighborhood",
    "GaussianNeighborhood",
    "NeighborhoodFamily",
    "PointMassNeighborhood",
    "RhoEstimate",
    "hoeffding_epsilon",
    "rho_exact_discrete",
    "rho_growth_exponent",
    "rho_monte_carlo",
    "rho_quadrature",
    "BoundReport",
    "ComplexityBound",
    "lemma1_complexity_term",
    "rademacher_star_linear",
    "theorem1_rhs",
    "theorem2_rhs",
    "theorem_alt_g_rhs",
]
