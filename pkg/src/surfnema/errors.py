"""Exception types raised across the package."""


class SurfnemaError(Exception):
    """Base class for all package errors."""


class NonPeriodicDomain(SurfnemaError, ValueError):
    pass


class DegenerateMetric(SurfnemaError, ValueError):
    pass


class ShapeMismatch(SurfnemaError, ValueError):
    pass


class UnknownSubspace(SurfnemaError, KeyError):
    pass


class NotAQTensor(SurfnemaError, ValueError):
    pass


class NonUnitDirector(SurfnemaError, ValueError):
    pass


class RateFlavorMismatch(SurfnemaError, ValueError):
    pass


class UnknownConstraint(SurfnemaError, KeyError):
    pass


class BlowUp(SurfnemaError, RuntimeError):
    def __init__(self, step, t, norm, bound):
        self.step, self.t, self.norm, self.bound = step, t, norm, bound
        super().__init__(
            f"field norm {norm:.3e} exceeded bound {bound:.3e} at step {step} (t={t:.6g})"
        )


class CFLWarning(UserWarning):
    pass


class ProjectionNonConvergence(SurfnemaError, RuntimeError):
    pass


class TooFewSamples(SurfnemaError, ValueError):
    pass


class ParseError(SurfnemaError, ValueError):
    def __init__(self, line, msg):
        self.line, self.msg = line, msg
        super().__init__(f"line {line}: {msg}")


class ValidationError(SurfnemaError, ValueError):
    def __init__(self, key, constraint):
        self.key, self.constraint = key, constraint
        super().__init__(f"{key}: {constraint}")
