"""Shared exception types."""


class ValidationError(ValueError):
    """Invalid user input or configuration (CLI exit code 1)."""


class ResourceLimitError(RuntimeError):
    """Request exceeds a hard size limit, e.g. brute force beyond 24 qubits
    or dense channels beyond the dense-limit qubit count (CLI exit code 2)."""
