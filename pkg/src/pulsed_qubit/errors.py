"""Exception hierarchy shared by every module of the package."""


class QubitError(Exception):
    """Base class for all package errors."""


class NormalizationError(QubitError, ValueError):
    """A state vector is not normalized within tolerance."""


class NonUnitaryError(QubitError, ValueError):
    """A matrix expected to be unitary is not."""


class NoPointwiseValueError(QubitError, TypeError):
    """A delta kick was asked for a pointwise value or derivative."""


class DegeneratePulseError(QubitError, ValueError):
    """The pulse is identically zero where a finite scale is needed."""


class PreconditionError(QubitError, ValueError):
    """A closed-form propagator was evaluated outside its structural domain."""


class PropagationDivergedError(QubitError, ArithmeticError):
    """The accumulated propagator lost unitarity or became non-finite."""


class RefinementExhaustedError(QubitError, RuntimeError):
    """Step doubling hit the step ceiling before reaching the tolerance."""


class ConfigError(QubitError, ValueError):
    """A run configuration failed validation."""
