"""Exception types shared across the toolkit.

Invalid arguments raise the builtin ValueError; the classes here cover
failures that callers may want to handle distinctly (and that the CLI
maps to dedicated exit codes).
"""


class DataError(Exception):
    """Malformed or inconsistent input data (manifests, CSV files)."""


class InfeasibleError(Exception):
    """A confidence or bracketing requirement cannot be met.

    Raised when a DKW band is too wide for the requested failure
    probability, or when the joint-calibration bisection cannot bracket
    a root.
    """


class CapacityError(Exception):
    """Input exceeds a size limit of an oracle-grade routine."""
