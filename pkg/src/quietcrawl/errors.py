"""Shared exception types.

Kept in one flat module so the model, selector, trainer and crawler
layers can raise the same vocabulary without importing each other.
"""

from __future__ import annotations


class QuietcrawlError(Exception):
    """Base class for all package errors."""


class InvalidSelector(QuietcrawlError):
    """Selector string does not parse under the supported XPath subset."""


class BlueprintSchemaError(QuietcrawlError):
    """Blueprint JSON violates the schema.

    ``field_path`` names the offending field (dotted path into the
    document) so the operator can fix the file by hand.
    """

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


class NoTechniqueFits(QuietcrawlError):
    """Every inference technique was tried and none satisfied the exemplars."""


class AmbiguousSnippet(QuietcrawlError):
    """A text snippet matched more than one distinct deepest element."""


class RefinementExhausted(QuietcrawlError):
    """Post-wrapper refinement walked up to the document root without agreement."""


class ExemplarArityError(QuietcrawlError):
    """More exemplars supplied than the role's arity allows."""


class SnippetNotFound(QuietcrawlError):
    """A text snippet does not occur anywhere in the page."""


class ConfigError(QuietcrawlError):
    """Bad or incomplete run configuration (CLI exit code 3)."""


class TransportError(QuietcrawlError):
    """Network-level failure talking to the forum (CLI exit code 4)."""


class MalformedPage(QuietcrawlError):
    """A page element lacks what interacting with it requires, e.g. a
    pagination link without href or a form without action."""


class LoginFailed(QuietcrawlError):
    """Credentials rejected or the login flow did not produce a session."""


class StructuralDrift(QuietcrawlError):
    """Trained identifiers no longer match the live page (CLI exit code 5)."""
