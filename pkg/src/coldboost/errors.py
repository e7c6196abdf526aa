"""Exception types shared across the simulator."""


class ColdBoostError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ColdBoostError):
    """Invalid or inconsistent configuration values."""


class EntityLookupError(ColdBoostError):
    """Unknown user or item id."""


class TrainingError(ColdBoostError):
    """Training cannot proceed (e.g. empty sample stream)."""


class FeatureError(ColdBoostError):
    """Feature vector shape or content mismatch."""


class AdmissionError(ColdBoostError):
    """Item already admitted to the boosting book."""


class LedgerOverflowError(ColdBoostError):
    """A boost exposure was recorded past the stage budget (delivery bug)."""


class NumericError(ColdBoostError):
    """Non-finite value where a finite one is required."""
