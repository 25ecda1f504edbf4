"""hyerslab: recovering exact generalized Jordan derivations from approximate ones.

Finite-dimensional unital algebras over C, an exact linear-algebra oracle
for derivation-type maps, the doubling (Hyers) iteration, and sampled
verification of the resulting stability bounds.
"""

__version__ = "0.1.0"

from .algebra import (
    Algebra,
    Bimodule,
    ViolationReport,
    algebra_from_spec,
    bimodule_from_spec,
    direct_sum,
    dual_numbers,
    make_algebra,
    matrix_algebra,
    upper_triangular_algebra,
    validate,
)
from .config import ExperimentConfig, load_config
from .errors import (
    AssociativityViolation,
    DimensionMismatch,
    DivergentSeries,
    HyersLabError,
    InvalidModel,
    IterationOverflow,
    MissingUnit,
    NoConvergence,
    RankUncertain,
    StageError,
)
from .hyers import ControlFunction, HyersResult, extract_delta, hyers_limit, tilde_phi
from .linmap import LinearMap, MapUnderTest, PerturbationModel, TorusSampler, c_linearity_report, make_perturbed
from .oracle import (
    SolutionSpace,
    inner_derivation,
    right_multiplier,
    solve,
    solve_derivations,
    solve_generalized_jordan_pairs,
    solve_jordan_derivations,
)
from .verify import (
    defect_aux,
    defect_stab_main,
    defect_superstab,
    gjd_defect,
    jordan_defect,
    run_experiment,
    run_stability_experiment,
    run_superstability_check,
    verify_bound,
)
