class VflError(Exception):
    """Base class for package errors."""


class ProtocolError(VflError):
    """A party or channel saw a message or state the protocol does not allow."""


class EncodingError(VflError, ValueError):
    """A real number does not fit the fixed-point range of the plaintext ring."""


class KeyGenerationError(VflError):
    pass


class DivergenceError(VflError):
    """Training loss became non-finite or blew past the sanity bound."""
