"""Exception types shared across the package."""


class EegPassError(Exception):
    """Base class for all package errors."""


class InputError(EegPassError, ValueError):
    """A caller-supplied value violates a precondition."""


class TemplateSyntaxError(InputError):
    """Template notation could not be parsed."""


class SignalGapError(EegPassError):
    """A keystroke arrived before any signal sample was available."""


class EnrolmentMismatchError(EegPassError):
    """Enrolment trials do not spell the same character string."""


class TemplateTooFragmentedError(EegPassError):
    """Inference produced more pels than the template cap allows."""


class PoolTooLargeError(EegPassError):
    """Permutation/wildcard expansion exceeds the pool ceiling."""


class EnrolmentAbortedError(EegPassError):
    """Too many consecutive failed confirmations; enrolment was discarded."""


class StoreError(EegPassError):
    """Persistent store could not be read or written."""


class StoreVersionError(StoreError):
    """Store document written by a newer format version."""


class StoreCorruptError(StoreError):
    """Store document failed its integrity check."""


class ProtocolError(EegPassError):
    """Malformed or unexpected wire record."""


class TransportError(EegPassError):
    """Network failure, distinct from an authentication rejection."""
