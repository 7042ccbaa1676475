"""Verifiable aggregate statistics over committed time-series rows."""

from .auditor import AuditReport, Auditor
from .bulletin import GENESIS_EPOCH, Bulletin
from .errors import TapError, VerificationError
from .prefix_tree import RangeSpec
from .schema import Schema, TypeAttribute
from .server import TapServer, initialize
from .verifier import AggregateResult, Verifier, monitor

__version__ = "0.1.0"

__all__ = [
    "AggregateResult", "AuditReport", "Auditor", "Bulletin", "GENESIS_EPOCH", "RangeSpec", "Schema",
    "TapError", "TapServer", "TypeAttribute", "VerificationError", "Verifier", "initialize", "monitor",
]
