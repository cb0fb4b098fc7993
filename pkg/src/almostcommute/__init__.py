"""Repairing almost-commuting matrices in the normalized Hilbert-Schmidt norm."""
from .errors import (
    AlmostCommuteError,
    BlockSolverError,
    DimensionMismatch,
    InvalidMatrix,
    NotBlockDiagonal,
    NotCommuting,
    NotHermitian,
    NotNormal,
    NotPositive,
    NotUnitary,
    OpNormTooLarge,
    PreconditionViolated,
    ReprojectionFailed,
    SingularInput,
    TooFewClasses,
)
from .familycorrect import BoundRecursion, block_lift, correct_family, eval_bound
from .genbench import (
    block_witness_pair,
    brute_force_nearest_commuting,
    hermitian_voiculescu,
    perturbed_commuting,
    verify_report,
    voiculescu_pair,
)
from .matcore import (
    BlockShape,
    BlockSpec,
    MatrixClass,
    Partition,
    commutator,
    conformance,
    op_norm,
    trace_norm,
)
from .paircorrect import (
    CorrectionParams,
    CorrectionReport,
    correct_hermitian_pair,
    correct_normal,
    correct_unitary_pair,
    correct_unitary_positive,
    select_cut_set,
)

__version__ = "0.1.0"
