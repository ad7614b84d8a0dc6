"""Exception types raised across the package.

Every failure mode that callers are expected to handle gets its own class so
that scripts can catch narrowly; all inherit from QsaveError.
"""


class QsaveError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(QsaveError):
    """Malformed or inconsistent configuration input."""


class ProbabilityError(ConfigError):
    """Transition probabilities outside [0, 1] or a row that cannot be normalized."""


class BetaRViolation(ConfigError):
    """Discount/return combination outside the impatience region (beta * R >= 1)."""


class GridError(ConfigError):
    """Degenerate or mis-ordered grid specification."""


class NoConvergence(QsaveError):
    """Iterative solver exhausted its iteration budget before reaching tolerance."""


class PretrainFailure(QsaveError):
    """Supervised pretraining could not reach the target fit within budget."""


class SingularFit(QsaveError):
    """Polynomial regression design matrix is rank deficient."""


class InfeasibleChoice(QsaveError):
    """Savings choice leaves consumption at or below the consumption floor."""


class NoFeasibleChoice(QsaveError):
    """No point of the savings grid leaves positive consumption."""


class FrozenAgent(QsaveError):
    """Learning update attempted on an agent whose parameters are frozen."""


class InsufficientHistory(QsaveError):
    """Experience index requested before enough periods have accumulated."""


class RankDeficient(QsaveError):
    """Regression design matrix is singular beyond numerical tolerance."""


class DegenerateSample(QsaveError):
    """Statistical test input with no variation or too few observations."""


class EmptyGroup(QsaveError):
    """A grouped statistic was requested for a group with no members."""


class MissingArtifact(QsaveError):
    """A report or downstream step references an output file that does not exist."""
