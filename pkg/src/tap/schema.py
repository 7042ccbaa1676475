"""Table schema: type attributes, key widths, commitment powers, bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SchemaError
from .prefix_tree import KeyLayout
from .sum_tree import MAX_POWERS, MAX_VALUE


@dataclass(frozen=True)
class TypeAttribute:
    name: str
    codes: dict = field(default_factory=dict)  # label -> integer code
    width: int = 8

    def code(self, label) -> int:
        if isinstance(label, int):
            code = label
        elif label in self.codes:
            code = self.codes[label]
        elif isinstance(label, str) and label.isdigit():
            code = int(label)
        else:
            raise SchemaError(f"unknown {self.name} value {label!r}")
        if not 0 <= code < (1 << self.width):
            raise SchemaError(f"{self.name} code {code} does not fit in {self.width} bits")
        return code

    def label(self, code: int) -> str:
        for k, v in self.codes.items():
            if v == code:
                return k
        return str(code)


@dataclass(frozen=True)
class Schema:
    types: tuple = ()
    time_bits: int = 32
    z: int = 2
    gamma: int | None = None
    min_bucket_size: int = 0  # 0 disables the small-bucket refusal policy

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        if self.time_bits <= 0 or self.time_bits > 64:
            raise SchemaError("time width must be in 1..64 bits")
        if not 1 <= self.z <= MAX_POWERS:
            raise SchemaError(f"z must be in 1..{MAX_POWERS}")
        if self.gamma is not None and not 0 <= self.gamma < MAX_VALUE:
            raise SchemaError("gamma must lie in [0, 2^32)")
        if self.min_bucket_size < 0:
            raise SchemaError("min_bucket_size must be non-negative")
        names = set()
        for attr in self.types:
            if attr.width <= 0:
                raise SchemaError(f"attribute {attr.name} has non-positive width")
            if attr.name in names:
                raise SchemaError(f"duplicate attribute {attr.name}")
            names.add(attr.name)
            for label, code in attr.codes.items():
                if not 0 <= code < (1 << attr.width):
                    raise SchemaError(f"{attr.name} code {label}={code} does not fit in {attr.width} bits")
            if len(set(attr.codes.values())) != len(attr.codes):
                raise SchemaError(f"{attr.name} has duplicate codes")

    @property
    def m(self) -> int:
        return len(self.types)

    @property
    def layout(self) -> KeyLayout:
        return KeyLayout((self.time_bits, *(a.width for a in self.types)))

    @property
    def key_bits(self) -> int:
        return self.time_bits + sum(a.width for a in self.types)

    def codes(self, labels) -> tuple:
        labels = tuple(labels)
        if len(labels) != self.m:
            raise SchemaError(f"expected {self.m} type values, got {len(labels)}")
        return tuple(a.code(x) for a, x in zip(self.types, labels))

    def to_dict(self) -> dict:
        return {
            "time_bits": self.time_bits,
            "z": self.z,
            "gamma": self.gamma,
            "min_bucket_size": self.min_bucket_size,
            "types": [{"name": a.name, "width": a.width, "codes": dict(a.codes)} for a in self.types],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        try:
            types = tuple(TypeAttribute(t["name"], dict(t.get("codes", {})), int(t.get("width", 8)))
                          for t in d.get("types", []))
            return cls(types, int(d.get("time_bits", 32)), int(d.get("z", 2)),
                       None if d.get("gamma") is None else int(d["gamma"]),
                       int(d.get("min_bucket_size", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad schema: {exc}") from None
