class ValidationError(ValueError):
    """Invalid model, configuration or query (CLI exit code 1)."""


class NumericalGuardError(RuntimeError):
    """A numerical range or accuracy guard tripped (CLI exit code 2)."""
