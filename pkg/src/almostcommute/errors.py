"""Exception hierarchy. Every error is a ValueError so callers can catch broadly."""


class AlmostCommuteError(ValueError):
    pass


class DimensionMismatch(AlmostCommuteError):
    pass


class InvalidMatrix(AlmostCommuteError):
    pass


class NotHermitian(AlmostCommuteError):
    pass


class NotNormal(AlmostCommuteError):
    pass


class NotUnitary(AlmostCommuteError):
    pass


class NotPositive(AlmostCommuteError):
    pass


class NotCommuting(AlmostCommuteError):
    pass


class NotBlockDiagonal(AlmostCommuteError):
    pass


class SingularInput(AlmostCommuteError):
    pass


class PreconditionViolated(AlmostCommuteError):
    pass


class OpNormTooLarge(AlmostCommuteError):
    pass


class TooFewClasses(AlmostCommuteError):
    pass


class ReprojectionFailed(AlmostCommuteError):
    pass


class BlockSolverError(AlmostCommuteError):
    """A per-block solver failed; ``block`` is the class index."""

    def __init__(self, block, cause):
        super().__init__(f"block {block}: {cause}")
        self.block = block
        self.cause = cause
