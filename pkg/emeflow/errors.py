"""Exception hierarchy shared by the simulation library and the CLI."""


class SimulationError(Exception):
    """Base class for every error raised by emeflow."""

    exit_code = 2


class DomainError(SimulationError, ValueError):
    """Evaluation point outside the region where the paraxial solution holds."""


class StagnationError(SimulationError):
    """Flow velocity requested inside a near-zero energy-density region."""

    def __init__(self, message="stagnation region", trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class IntegrationError(SimulationError):
    """A flow line did not reach the screen within the step budget."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ProfileError(SimulationError, ValueError):
    """Profile or histogram input that cannot be analysed."""


class ScenarioValidationError(SimulationError, ValueError):
    """Invalid scenario configuration.

    Args:
        errors: list of ``(field, message)`` pairs
    """

    exit_code = 1

    def __init__(self, errors):
        self.errors = list(errors)
        detail = "; ".join(f"{field}: {message}" for field, message in self.errors)
        super().__init__(f"invalid scenario: {detail}")
