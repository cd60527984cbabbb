"""Exception hierarchy shared across the toolkit."""


class DcnasError(Exception):
    """Base class for all toolkit errors."""


class PlacementError(DcnasError):
    """Digit placement failed after the rejection-sampling budget."""


class DataError(DcnasError):
    """Dataset construction, loading, or corpus problems."""


class ConfigError(DcnasError):
    """Config file violates the schema. Carries every offending path."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ArchSpecError(DcnasError):
    """Architecture spec is malformed or inconsistent with its search space."""


class FlopsError(DcnasError):
    """Static shapes could not be resolved for FLOPs counting."""


class DeviceError(DcnasError):
    """Device unavailable or out of memory during latency measurement."""


class LutError(DcnasError):
    """Latency table is missing an entry required by the estimator."""


class SearchDivergence(DcnasError):
    """Search loss became non-finite; carries the trace collected so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class TrainingDiverged(DcnasError):
    """Training loss became non-finite; the last checkpoint was kept."""

    def __init__(self, message, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


class ReportError(DcnasError):
    """Reports cannot be combined (e.g. mismatched noise grids)."""


class CheckFailure(DcnasError):
    """A preset's built-in expectation check failed (CLI exit code 4)."""
