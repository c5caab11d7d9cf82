"""Exception types shared across the library.

The CLI maps these onto exit codes: InputError -> 2, GuardError -> 3,
NumericalError -> 4.
"""


class InputError(ValueError):
    """Malformed or inconsistent user input (files, specs, dimensions)."""


class ZeroProbabilityObservation(ValueError):
    """The observation is impossible under the given belief and action."""


class GuardError(RuntimeError):
    """A configured enumeration or resource cap was exceeded."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (never reported as a silent Infeasible)."""
