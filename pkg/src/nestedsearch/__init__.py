"""Index policies for nested search problems and two-stage consumer search pricing."""

__version__ = "0.1.0"
