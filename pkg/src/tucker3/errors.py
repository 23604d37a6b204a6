"""Exception and warning types shared across the toolkit."""


class TuckerError(Exception):
    """Base class for toolkit errors."""


class NumericError(TuckerError):
    """A numeric routine failed (non-PD pivot, SVD non-convergence, overflow)."""


class RankDeficiencyWarning(UserWarning):
    """A factor or Procrustes target was numerically rank deficient; the
    missing directions were completed deterministically."""
