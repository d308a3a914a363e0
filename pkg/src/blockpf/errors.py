"""Exception types shared across the package."""


class BlockPFError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(BlockPFError):
    pass


class NotPositiveSemidefinite(BlockPFError):
    pass


class NoConvergence(BlockPFError):
    pass


class InvalidSpec(BlockPFError):
    pass


class DimensionTooSmall(BlockPFError):
    pass


class ZeroNoiseUnsupported(BlockPFError):
    pass


class SingularInnovationCovariance(BlockPFError):
    pass


class DegenerateWeights(BlockPFError):
    pass


class InvalidK(BlockPFError):
    pass


class InvalidPartition(BlockPFError):
    pass


class TooFewSamples(BlockPFError):
    pass


class ZeroVariance(BlockPFError):
    def __init__(self, index: int):
        super().__init__(f"variance at index {index} is below the floor")
        self.index = index


class IsolatedVertex(BlockPFError):
    def __init__(self, index: int):
        super().__init__(f"vertex {index} has (near-)zero degree")
        self.index = index


class InfeasibleConstraints(BlockPFError):
    pass


class Infeasible(BlockPFError):
    pass


class MalformedSolution(BlockPFError):
    pass


class EmptyInput(BlockPFError):
    pass


class IndexSetMismatch(BlockPFError):
    pass


class TooFewReplicates(BlockPFError):
    pass


class ParseError(BlockPFError):
    pass


class ValidationError(BlockPFError):
    pass
