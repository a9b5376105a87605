"""Variance, power and sample size for split-plot factorial longitudinal cluster trials."""
from .correlation import CorrelationStructure, CovarianceCoefficients, coefficients, components
from .design import (CellPlan, TrialDesign, cell_plan, crossover, load_design, named_design,
                     parallel, shares, stepped_wedge, summarize)
from .effects import Estimand, Model, Parametrisation
from .errors import (DegenerateDesignError, InestimableError, InfeasibleError, SplitPlotError,
                     ValidationError)
from .power import (PowerQuery, SolveFor, detectable_delta, power_for, required_cell_size,
                    required_cluster_multiplier)
from .variance import (EffectQuery, VarianceResult, contrast_covariance, effect_variance,
                       v_lcrt)

__version__ = "0.1.0"

__all__ = [
    "CorrelationStructure", "CovarianceCoefficients", "coefficients", "components",
    "CellPlan", "TrialDesign", "cell_plan", "crossover", "load_design", "named_design",
    "parallel", "shares", "stepped_wedge", "summarize",
    "Estimand", "Model", "Parametrisation",
    "DegenerateDesignError", "InestimableError", "InfeasibleError", "SplitPlotError",
    "ValidationError",
    "PowerQuery", "SolveFor", "detectable_delta", "power_for", "required_cell_size",
    "required_cluster_multiplier",
    "EffectQuery", "VarianceResult", "contrast_covariance", "effect_variance", "v_lcrt",
]
