"""Exception hierarchy shared by the solvers and the command line."""


class HJError(Exception):
    """Base class for every error raised by this package."""


class InvalidArguments(HJError, ValueError):
    pass


class FeasibilityError(HJError):
    """A restricted control set turned out to be empty."""


class AssumptionViolation(HJError):
    """Raised by :func:`check_assumptions`; carries the full report."""

    def __init__(self, failed, report=None):
        self.failed = list(failed)
        self.report = report
        super().__init__("standing assumptions violated: " + ", ".join(self.failed))


class UndefinedNormal(HJError):
    pass


class NoAdmissibleControl(HJError):
    pass


class NonConvergence(HJError):
    pass


class NonCoerciveHamiltonian(HJError):
    pass


class ExtrapolationUnstable(HJError):
    pass


class EmptyLevelSet(HJError):
    pass


class ResolutionError(HJError):
    pass


class OutOfWindow(HJError):
    def __init__(self, points):
        self.points = list(points)
        super().__init__(f"{len(self.points)} sample point(s) outside the field window: {self.points}")


class ConfigError(HJError):
    pass
