"""Numerical laboratory for benign overfitting of maximum-margin linear classifiers."""
from .classifiers import (
    Classifier,
    hard_margin_oracle,
    logistic_gd,
    ls_interpolator,
    max_margin,
    support_condition,
)
from .errors import (
    DegeneratePerturbationError,
    DivergenceError,
    MarginLabError,
    NotSeparableError,
    NumericalError,
    SingularMatrixError,
    ValidationError,
)
from .events import em_event_parameters, event_report, model_constants, theorem_preconditions, verify_quad_bounds
from .geometry import cap_fraction_mc, clean_noisy_decomposition, orthogonal_nu_formulas, z_perp
from .gram import expansion_vector, gram_quantities, woodbury_inverse
from .harness import SweepConfig, emit_csv, emit_svg, run_sweep
from .model import CoordinateLaw, Dataset, ModelSpec, ScaleLaw, SigmaSpec, make_orthogonal_fixture, sample_dataset
from .risk import kappa, predicted_zeta_sq, risk_bounds, sandwich_check, test_error_exact, test_error_mc, zeta

__version__ = "0.1.0"
