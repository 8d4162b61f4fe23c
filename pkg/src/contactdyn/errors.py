"""Exception types shared across the toolkit."""


class ContactDynError(Exception):
    """Base class for all toolkit errors."""


class CycleError(ContactDynError):
    """Joint graph is not a tree (cycle, self-loop, or unreachable link)."""


class InertiaError(ContactDynError):
    """Inertia tensor violates symmetry, PSD, or triangle-inequality rules."""


class RootError(ContactDynError):
    """Root joint missing, duplicated, or not a free joint."""


class DomainError(ContactDynError):
    """Numeric argument outside its valid domain."""


class DimensionError(ContactDynError):
    """Array shape does not match the expected degrees of freedom."""


class UnknownBodyError(ContactDynError):
    """Referenced link name does not exist in the tree."""


class TooShortError(ContactDynError):
    """Trajectory has too few frames for the requested derivative."""


class EmptySurfaceError(ContactDynError):
    """Surface has no queryable geometry."""


class MissingPoseError(ContactDynError):
    """Dynamic surface queried at a frame without a pose."""


class NormError(ContactDynError):
    """Vector expected to be unit length is not."""


class CoefficientError(ContactDynError):
    """Contact coefficient outside its valid (nonnegative) range."""


class ModeError(ContactDynError):
    """Contact point state does not match the requested friction mode."""


class DegenerateProblem(ContactDynError):
    """No contact can explain the observed object motion."""


class BlowupError(ContactDynError):
    """Simulation state diverged (bad configuration or timestep)."""


class FileFormatError(ContactDynError):
    """Input document failed validation; message carries the JSON path."""
