"""Exception hierarchy.

The CLI maps these to exit codes: InputError (and subclasses) -> 2,
NumericalError (and subclasses) -> 3.  Tolerance failures are not
exceptions; verification routines report them and the CLI exits 1.
"""

from __future__ import annotations


class FoliateError(Exception):
    """Base class for all package errors."""


class InputError(FoliateError):
    """Bad user input: malformed expressions, manifests, parameters."""


class ParseError(InputError):
    """Expression syntax/validation error with a character offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class NumericalError(FoliateError):
    """Numerical failure: degenerate metric, chart exit, divergence."""


class DomainError(NumericalError):
    """Function evaluated outside its domain (log of nonpositive, ...)."""

    def __init__(self, message: str, expr_text: str | None = None):
        self.expr_text = expr_text
        if expr_text is not None:
            message = f"{message} in subexpression '{expr_text}'"
        super().__init__(message)
