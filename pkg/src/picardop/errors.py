"""Exception hierarchy shared by every module of the package."""


class PicardOpError(Exception):
    """Base class for all errors raised by picardop."""


class NumericInputError(PicardOpError, ValueError):
    """Input array contains NaN or infinite values."""


class ConfigurationError(PicardOpError, ValueError):
    """Grids, ranks, depths or sensor layouts are mutually inconsistent."""


class UnsupportedConfigurationError(ConfigurationError):
    """Configuration is valid in principle but has no implementation here."""


class DomainError(PicardOpError, ValueError):
    """A value lies outside the set on which an operation is defined."""


class AdmissibilityError(PicardOpError, ValueError):
    """A nonlinearity or parameter set violates the admissible class."""


class CertificationError(PicardOpError, ValueError):
    """A certified bound (Lipschitz constant, sup-error) is inconsistent."""


class SolverStallError(PicardOpError, RuntimeError):
    """Fixed-point iteration did not reach tolerance in its step budget."""


class LawMisconfigurationError(PicardOpError, RuntimeError):
    """Rejection sampling of initial data accepts too rarely."""


class HorizonExceededError(PicardOpError, RuntimeError):
    """An exact rollout state left the admissible initial-data ball."""

    def __init__(self, block: int, sup: float, bound: float):
        self.block = block
        self.sup = sup
        self.bound = bound
        super().__init__(
            f"exact state v_{block} has sup norm {sup:.6g} > R = {bound:.6g}"
        )
