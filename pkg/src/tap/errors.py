"""Exception hierarchy. Every error carries a stable machine-readable ``code``."""

from __future__ import annotations


class TapError(Exception):
    code = "error"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self), **{k: str(v) for k, v in self.details.items()}}


def _make(name: str, code: str, base: type = TapError) -> type:
    return type(name, (base,), {"code": code})


# encoding
DecodeError = _make("DecodeError", "malformed", TapError)
InvalidPoint = _make("InvalidPoint", "invalid-point", DecodeError)
NonCanonicalScalar = _make("NonCanonicalScalar", "non-canonical-scalar", DecodeError)
UnknownKind = _make("UnknownKind", "unknown-kind", DecodeError)

# range proofs
ValueOutOfRange = _make("ValueOutOfRange", "value-out-of-range")
WidthExceeded = _make("WidthExceeded", "width-exceeded")

# prefix tree
DuplicateKey = _make("DuplicateKey", "duplicate-key")
TimeRegression = _make("TimeRegression", "time-regression")
KeyAbsent = _make("KeyAbsent", "key-absent")
UnknownEpoch = _make("UnknownEpoch", "unknown-epoch")

# sum tree
EmptyBucket = _make("EmptyBucket", "empty-bucket")
IndexOutOfBounds = _make("IndexOutOfBounds", "index-out-of-bounds")

# server
SchemaError = _make("SchemaError", "schema-mismatch")
DuplicateUser = _make("DuplicateUser", "duplicate-user-in-epoch")
EpochOutOfOrder = _make("EpochOutOfOrder", "epoch-out-of-order")
GammaExceeded = _make("GammaExceeded", "gamma-exceeded")
EmptyRange = _make("EmptyRange", "empty-range")
InvalidQuantile = _make("InvalidQuantile", "invalid-q")
BucketTooSmall = _make("BucketTooSmall", "bucket-too-small")
BulletinUnavailable = _make("BulletinUnavailable", "bulletin-unavailable")

# bulletin
Equivocation = _make("Equivocation", "equivocation-attempt")
EpochRegression = _make("EpochRegression", "epoch-regression")

# dp
UnboundedSensitivity = _make("UnboundedSensitivity", "unbounded-sensitivity")
NormalizationViolation = _make("NormalizationViolation", "normalization-violation")
BoundTooSmall = _make("BoundTooSmall", "bound-too-small")
NoiseExceedsBound = _make("NoiseExceedsBound", "noise-exceeds-bound")


class VerificationError(TapError):
    """A proof was rejected. ``reason`` says which check failed."""

    code = "verification-failed"

    def __init__(self, reason: str, message: str = "", **details):
        super().__init__(message or reason, **details)
        self.reason = reason

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["reason"] = self.reason
        return d


# service
ServiceUnavailable = _make("ServiceUnavailable", "server-unavailable")


class RemoteError(TapError):
    """An error response relayed from the service; ``code`` is the server's."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(message or code)
        self.code = code
