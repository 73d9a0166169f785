"""Nonparametric concordance effects and wild-bootstrap tests for factorial
survival designs with right-censored, possibly tied data."""

from ._kernels import get_backend
from .designs import (
    FactorialLayout,
    centering_matrix,
    interaction_contrast,
    load_contrast_matrix,
    main_effect_contrast,
    one_way_contrast,
)
from .effects import EffectEstimates, pairwise_effects
from .errors import (
    DegenerateDesignError,
    DegenerateFitWarning,
    InvalidReplicateError,
    SurvconcordError,
    TooManyInvalidReplicates,
    ValidationError,
)
from .inference import (
    ContrastSpec,
    Ellipsoid,
    TestResult,
    anova_stat,
    confidence_ellipsoid,
    make_contrast,
    run_contrast_tests,
    v_hat,
    wb_statistic,
    wb_test,
)
from .km import (
    GroupData,
    KmFit,
    fit_groups,
    fit_km,
    gamma_hat,
    gamma_star,
    resolve_tau,
    wb_process,
)
from .stepfun import (
    StepFn,
    TwoParamFn,
    double_stieltjes_pmpm,
    eval_pm,
    stieltjes_pm,
)

__version__ = "0.1.0"
