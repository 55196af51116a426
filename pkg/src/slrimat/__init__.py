"""Sparse plus low-rank decomposition by iterative adaptive thresholding."""

from .bench import (
    PhaseGridSpec,
    PhaseTransitionGrid,
    TableExperimentSpec,
    emit_grid_pgm,
    run_phase_transition,
    run_table_experiment,
)
from .errors import (
    ConvergenceFailure,
    InconsistentFrameShape,
    InvalidConfig,
    InvalidSpec,
    MatrixParseError,
    NonFiniteError,
    ShapeMismatch,
    SlrImatError,
    ZeroReference,
)
from .ialm import IalmConfig, ialm
from .imaging import ImageStack, background_subtract, matrix_to_stack, stack_to_matrix
from .linalg import (
    SvdFactors,
    entry_threshold,
    frobenius_norm,
    sv_threshold,
    svd,
    threshold_schedule,
    truncate_rank,
)
from .metrics import RecoveryReport, is_success, numerical_rank, snr_db
from .problems import (
    ProblemSpec,
    SyntheticProblem,
    gen_low_rank,
    gen_sparse_bernoulli,
    gen_sparse_coherent,
    gen_sparse_random_sign,
    make_problem,
)
from .solver import Decomposition, SolverConfig, default_config, slr_imat

__version__ = "0.1.0"
