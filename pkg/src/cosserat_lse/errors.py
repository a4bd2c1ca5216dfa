"""Exception hierarchy for the solver."""


class CosseratError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CosseratError, ValueError):
    pass


class DomainError(CosseratError, ValueError):
    pass


class MalformedAlgebraError(CosseratError, ValueError):
    """A 4x4 matrix does not have the se(3) sparsity pattern."""


class BranchCutError(CosseratError, ValueError):
    """Relative rotation too close to pi for a principal logarithm."""

    def __init__(self, angle, message=None):
        self.angle = float(angle)
        super().__init__(
            message
            or f"rotation angle {self.angle:.12g} rad is within 1e-6 of pi; "
            "the SE(3) logarithm is not unique there"
        )


class ElementTooCoarseError(BranchCutError):
    """Element relative rotation reaches the log branch cut; refine the mesh."""

    def __init__(self, angle, element=None):
        self.element = element
        where = f"element {element}: " if element is not None else ""
        super().__init__(
            angle,
            f"{where}relative nodal rotation {float(angle):.6g} rad is too close "
            "to pi; refine the mesh so each element rotates less",
        )


class RestGeometryTooCoarseError(ElementTooCoarseError):
    pass


class SlopeTooLargeError(CosseratError, ArithmeticError):
    def __init__(self, cond, element=None):
        self.cond = float(cond)
        self.element = element
        where = f"element {element}: " if element is not None else ""
        super().__init__(
            f"{where}strain-slope operator is ill-conditioned (cond={self.cond:.3e})"
        )


class SceneValidationError(CosseratError, ValueError):
    pass


class AssemblyError(CosseratError, ArithmeticError):
    def __init__(self, message, element=None):
        self.element = element
        super().__init__(message)


class SolverError(CosseratError, RuntimeError):
    """Solver failure that still carries the best state and the report."""

    def __init__(self, message, state=None, report=None):
        self.state = state
        self.report = report
        super().__init__(message)


class SingularSystemError(SolverError):
    def __init__(self, message, dof=None, state=None, report=None):
        self.dof = dof
        super().__init__(message, state=state, report=report)


class LineSearchStallError(SolverError):
    pass


class OracleFailureError(CosseratError, RuntimeError):
    pass


class InsufficientDataError(CosseratError, ValueError):
    pass
