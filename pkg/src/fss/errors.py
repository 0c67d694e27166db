"""Shared error base so the CLI can map computation failures to exit 1."""


class FssError(ValueError):
    """Raised for invalid inputs or failed computations in any fss module."""
