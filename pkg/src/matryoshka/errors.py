"""Exception taxonomy shared across modules (distinct CLI exit codes)."""


class MatryoshkaError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(MatryoshkaError):
    """Invalid or inconsistent user-supplied specification."""

    exit_code = 2


class InfeasibleLiftError(MatryoshkaError):
    """Square-root angle lift has no real solution for the requested scale."""

    exit_code = 3


class StructureError(MatryoshkaError):
    """Lattice violates a structural assumption (bipartiteness, legs, ...)."""

    exit_code = 4


class EdgeStateNotFoundError(MatryoshkaError):
    """No edge state matches the requested energy/side."""

    exit_code = 5


class IntegratorError(MatryoshkaError):
    """Propagation lost unitarity beyond tolerance; decrease dt."""

    exit_code = 6


class ProtocolError(MatryoshkaError):
    """Protocol preconditions violated at run time."""

    exit_code = 7
