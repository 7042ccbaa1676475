"""Canonical wire format for proofs and service messages.

Binary mode: ``version u8 | kind u8 | fields``, every value tagged and
length-prefixed. Text mode: JSON with byte strings in base64. Both encode
the registered dataclasses field by field in declaration order, and decoding
rejects unknown kinds, unknown tags and trailing data.
"""

from __future__ import annotations

import base64
import dataclasses
import json
import struct

from .crypto.group import Point
from .crypto.rangeproof import RangeProof
from .errors import DecodeError, InvalidPoint, UnknownKind
from .prefix_tree import CoverEntry, ExtensionProof, PrefixInclusionProof, RangeCoverProof, RangeSpec
from .proofs import (AggregateProof, AuditProof, BucketAbsenceProof, BucketAudit, LookupProof, MinMaxProof,
                     NonExistenceProof, QuantileProof, QuantileWitness, RootOpening, Witness)
from .sum_tree import CopathEntry, SumInclusionProof, SumLeaf

VERSION = 1


@dataclasses.dataclass(frozen=True)
class EpochRequest:
    epoch: int
    rows: tuple  # of RowSubmission


@dataclasses.dataclass(frozen=True)
class RowSubmission:
    user_id: str
    types: tuple
    value: int


@dataclasses.dataclass(frozen=True)
class DigestResponse:
    epoch: int
    digest: bytes


@dataclasses.dataclass(frozen=True)
class ErrorResponse:
    code: str
    message: str


_KINDS = [
    RangeProof, SumLeaf, CopathEntry, SumInclusionProof, PrefixInclusionProof, CoverEntry, RangeCoverProof,
    ExtensionProof, RangeSpec, LookupProof, NonExistenceProof, BucketAbsenceProof, RootOpening, AggregateProof,
    Witness, MinMaxProof, QuantileWitness, QuantileProof, BucketAudit, AuditProof, EpochRequest, RowSubmission,
    DigestResponse, ErrorResponse,
]
KIND_OF = {cls: i + 1 for i, cls in enumerate(_KINDS)}
CLASS_OF = {i: cls for cls, i in KIND_OF.items()}
NAME_OF = {cls: cls.__name__ for cls in _KINDS}
CLASS_BY_NAME = {cls.__name__: cls for cls in _KINDS}

T_NONE, T_FALSE, T_TRUE, T_INT, T_BYTES, T_STR, T_SEQ, T_POINT, T_OBJ = range(9)


def _fields(cls):
    return [f.name for f in dataclasses.fields(cls) if f.init]


# binary

def _enc(x, out: bytearray) -> None:
    if x is None:
        out.append(T_NONE)
    elif x is True:
        out.append(T_TRUE)
    elif x is False:
        out.append(T_FALSE)
    elif isinstance(x, int):
        n = (x.bit_length() + 8) // 8
        if n > 255:
            raise ValueError("integer too large for wire format")
        out.append(T_INT)
        out.append(n)
        out += int(x).to_bytes(n, "big", signed=True)
    elif isinstance(x, (bytes, bytearray)):
        out.append(T_BYTES)
        out += struct.pack(">I", len(x))
        out += x
    elif isinstance(x, str):
        b = x.encode("utf-8")
        out.append(T_STR)
        out += struct.pack(">I", len(b))
        out += b
    elif isinstance(x, Point):
        out.append(T_POINT)
        out += bytes(x)
    elif isinstance(x, (tuple, list)):
        out.append(T_SEQ)
        out += struct.pack(">I", len(x))
        for item in x:
            _enc(item, out)
    elif type(x) in KIND_OF:
        out.append(T_OBJ)
        out.append(KIND_OF[type(x)])
        for name in _fields(type(x)):
            _enc(getattr(x, name), out)
    else:
        raise TypeError(f"cannot encode {type(x).__name__}")


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise DecodeError("truncated message")
        b = self.data[self.pos:self.pos + n]
        self.pos += n
        return b

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]


def _build(cls, values):
    names = _fields(cls)
    if len(values) != len(names):
        raise DecodeError(f"{cls.__name__} expects {len(names)} fields")
    try:
        return cls(**dict(zip(names, values)))
    except (TypeError, ValueError) as exc:
        raise DecodeError(f"bad {cls.__name__}: {exc}") from None


def _dec(r: _Reader, depth: int = 0):
    if depth > 64:
        raise DecodeError("nesting too deep")
    tag = r.u8()
    if tag == T_NONE:
        return None
    if tag == T_TRUE:
        return True
    if tag == T_FALSE:
        return False
    if tag == T_INT:
        n = r.u8()
        return int.from_bytes(r.take(n), "big", signed=True)
    if tag == T_BYTES:
        return r.take(r.u32())
    if tag == T_STR:
        try:
            return r.take(r.u32()).decode("utf-8")
        except UnicodeDecodeError:
            raise DecodeError("bad utf-8") from None
    if tag == T_POINT:
        try:
            return Point.from_bytes(r.take(32))
        except InvalidPoint as exc:
            raise DecodeError(str(exc)) from None
    if tag == T_SEQ:
        n = r.u32()
        if n > len(r.data):
            raise DecodeError("sequence length exceeds message")
        return tuple(_dec(r, depth + 1) for _ in range(n))
    if tag == T_OBJ:
        kind = r.u8()
        cls = CLASS_OF.get(kind)
        if cls is None:
            raise UnknownKind(f"unknown kind {kind}")
        return _build(cls, [_dec(r, depth + 1) for _ in _fields(cls)])
    raise DecodeError(f"unknown tag {tag}")


def encode(msg, mode: str = "binary"):
    if type(msg) not in KIND_OF:
        raise TypeError(f"{type(msg).__name__} is not a wire message")
    if mode == "text":
        return json.dumps({"version": VERSION, "kind": NAME_OF[type(msg)], "body": _to_json(msg)},
                          separators=(",", ":"), sort_keys=False)
    out = bytearray([VERSION, KIND_OF[type(msg)]])
    for name in _fields(type(msg)):
        _enc(getattr(msg, name), out)
    return bytes(out)


def decode(data, expected: type | None = None):
    if isinstance(data, str) or (isinstance(data, (bytes, bytearray)) and data[:1] == b"{"):
        msg = _decode_text(data)
    else:
        r = _Reader(bytes(data))
        if r.u8() != VERSION:
            raise DecodeError("unsupported version")
        kind = r.u8()
        cls = CLASS_OF.get(kind)
        if cls is None:
            raise UnknownKind(f"unknown kind {kind}")
        msg = _build(cls, [_dec(r) for _ in _fields(cls)])
        if r.pos != len(r.data):
            raise DecodeError("trailing bytes")
    if expected is not None and not isinstance(msg, expected):
        raise DecodeError(f"expected {expected.__name__}, got {type(msg).__name__}")
    return msg


def encoded_size(msg) -> int:
    return len(encode(msg, "binary"))


# text

def _to_json(x):
    if x is None or isinstance(x, (bool, str)):
        return x
    if isinstance(x, int):
        return int(x)
    if isinstance(x, (bytes, bytearray)):
        return {"$b": base64.b64encode(bytes(x)).decode()}
    if isinstance(x, Point):
        return {"$p": base64.b64encode(bytes(x)).decode()}
    if isinstance(x, (tuple, list)):
        return [_to_json(i) for i in x]
    if type(x) in KIND_OF:
        d = {"$t": NAME_OF[type(x)]}
        for name in _fields(type(x)):
            d[name] = _to_json(getattr(x, name))
        return d
    raise TypeError(f"cannot encode {type(x).__name__}")


def _b64(s) -> bytes:
    if not isinstance(s, str):
        raise DecodeError("base64 field must be a string")
    try:
        return base64.b64decode(s, validate=True)
    except ValueError:
        raise DecodeError("bad base64") from None


def _from_json(x, depth: int = 0):
    if depth > 64:
        raise DecodeError("nesting too deep")
    if x is None or isinstance(x, (bool, str, int)):
        return x
    if isinstance(x, list):
        return tuple(_from_json(i, depth + 1) for i in x)
    if isinstance(x, dict):
        if set(x) == {"$b"}:
            return _b64(x["$b"])
        if set(x) == {"$p"}:
            try:
                return Point.from_bytes(_b64(x["$p"]))
            except InvalidPoint as exc:
                raise DecodeError(str(exc)) from None
        cls = CLASS_BY_NAME.get(x.get("$t"))
        if cls is None:
            raise UnknownKind(f"unknown kind {x.get('$t')!r}")
        names = _fields(cls)
        if set(x) != {"$t", *names}:
            raise DecodeError(f"bad fields for {cls.__name__}")
        return _build(cls, [_from_json(x[n], depth + 1) for n in names])
    raise DecodeError(f"unexpected JSON value {type(x).__name__}")


def _decode_text(data):
    try:
        obj = json.loads(data)
    except (ValueError, UnicodeDecodeError):
        raise DecodeError("bad JSON") from None
    if not isinstance(obj, dict) or obj.get("version") != VERSION:
        raise DecodeError("unsupported version")
    cls = CLASS_BY_NAME.get(obj.get("kind"))
    if cls is None:
        raise UnknownKind(f"unknown kind {obj.get('kind')!r}")
    body = obj.get("body")
    if not isinstance(body, dict) or body.get("$t") != cls.__name__:
        raise DecodeError("body does not match kind")
    return _from_json(body)
