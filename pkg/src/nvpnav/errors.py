"""Exception types raised across the navigation stack."""


class NavError(Exception):
    """Base class for all nvpnav errors."""


class InvalidGeoPoint(NavError, ValueError):
    pass


class SingularCovariance(NavError, ValueError):
    pass


class ParseError(NavError, ValueError):
    pass


class DanglingReference(NavError, ValueError):
    pass


class NoPath(NavError):
    pass


class DegenerateGround(NavError):
    pass


class EmptyPath(NavError):
    """No ring produced a valley sample; the controller has to stop."""


class NoRecovery(NavError):
    pass


class ScenarioError(NavError, ValueError):
    """Scenario validation failure. ``problems`` lists every offending field."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
