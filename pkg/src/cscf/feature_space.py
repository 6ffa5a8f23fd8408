"""Feature schema, instances and CSV ingestion.

An instance is a plain tuple positionally aligned to a :class:`FeatureSpace`;
numeric slots hold floats, categorical slots hold level labels.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO, Union

Value = Union[float, str]
Instance = tuple

NUMERIC = "numeric"
ORDERED = "ordered"
CATEGORICAL = "categorical"
KINDS = (NUMERIC, ORDERED, CATEGORICAL)


class SchemaError(ValueError):
    """Raised for malformed feature schemas or unparseable data."""


@dataclass(frozen=True)
class FeatureDef:
    name: str
    kind: str
    min: float | None = None
    max: float | None = None
    levels: tuple[str, ...] = ()
    _index: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == NUMERIC:
            if self.min is None or self.max is None:
                raise SchemaError(f"feature {self.name!r}: numeric feature needs min and max")
            lo, hi = float(self.min), float(self.max)
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise SchemaError(f"feature {self.name!r}: need finite min < max")
            object.__setattr__(self, "min", lo)
            object.__setattr__(self, "max", hi)
        else:
            levels = tuple(str(lv) for lv in self.levels)
            if not levels:
                raise SchemaError(f"feature {self.name!r}: levels must be non-empty")
            if len(set(levels)) != len(levels):
                raise SchemaError(f"feature {self.name!r}: duplicate level labels")
            object.__setattr__(self, "levels", levels)
            self._index.update({lv: i for i, lv in enumerate(levels)})

    @classmethod
    def numeric(cls, name: str, lo: float, hi: float) -> "FeatureDef":
        return cls(name, NUMERIC, min=lo, max=hi)

    @classmethod
    def ordered(cls, name: str, levels: Sequence[str]) -> "FeatureDef":
        return cls(name, ORDERED, levels=tuple(levels))

    @classmethod
    def categorical(cls, name: str, levels: Sequence[str]) -> "FeatureDef":
        return cls(name, CATEGORICAL, levels=tuple(levels))

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    @property
    def is_ordered(self) -> bool:
        return self.kind == ORDERED

    @property
    def is_categorical(self) -> bool:
        return self.kind != NUMERIC

    @property
    def span(self) -> float:
        return self.max - self.min

    def level_index(self, label: str) -> int:
        """Position of ``label`` in the declared level list (KeyError if unknown)."""
        return self._index[label]

    def has_level(self, label) -> bool:
        return isinstance(label, str) and label in self._index

    def clamp(self, value: float) -> float:
        return min(max(float(value), self.min), self.max)

    def rank(self, value) -> float:
        """Numeric position of a value: the number itself or the level index."""
        if self.is_numeric:
            return float(value)
        return float(self.level_index(value))

    def check(self, value) -> str | None:
        """Return a violation reason for ``value`` or None if it conforms."""
        if self.is_numeric:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return f"expected a number, got {value!r}"
            if not math.isfinite(value):
                return "not finite"
            if value < self.min:
                return "below min"
            if value > self.max:
                return "above max"
            return None
        if not self.has_level(value):
            return f"unknown level {value!r}"
        return None

    def parse(self, text: str) -> Value:
        text = text.strip()
        if self.is_numeric:
            return float(text)
        return text

    def format(self, value) -> str:
        return repr(float(value)) if self.is_numeric else str(value)

    def to_dict(self) -> dict:
        if self.is_numeric:
            return {"name": self.name, "kind": self.kind, "min": self.min, "max": self.max}
        return {"name": self.name, "kind": self.kind, "levels": list(self.levels)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureDef":
        try:
            name, kind = d["name"], d["kind"]
        except KeyError as exc:
            raise SchemaError(f"feature entry missing {exc.args[0]!r}") from None
        if kind == NUMERIC:
            return cls(str(name), kind, min=d.get("min"), max=d.get("max"))
        return cls(str(name), kind, levels=tuple(d.get("levels", ())))


class FeatureSpace:
    """Ordered, immutable collection of feature definitions."""

    def __init__(self, features: Iterable[FeatureDef]):
        self.features: tuple[FeatureDef, ...] = tuple(features)
        if not self.features:
            raise SchemaError("feature space needs at least one feature")
        self._by_name = {}
        for i, f in enumerate(self.features):
            if f.name in self._by_name:
                raise SchemaError(f"duplicate feature name {f.name!r}")
            self._by_name[f.name] = i

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, i: int) -> FeatureDef:
        return self.features[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSpace) and self.features == other.features

    def __hash__(self) -> int:
        return hash(self.features)

    def __repr__(self) -> str:
        return f"FeatureSpace({[f.name for f in self.features]})"

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def resolve(self, ref) -> int:
        """Accept a feature name or an integer index and return the index."""
        if isinstance(ref, int) and not isinstance(ref, bool):
            if not 0 <= ref < len(self.features):
                raise SchemaError(f"feature index {ref} out of range")
            return ref
        return self.index(ref)

    def instance(self, values) -> Instance:
        """Build an instance from a sequence or a name->value mapping."""
        if isinstance(values, dict):
            missing = [n for n in self.names if n not in values]
            if missing:
                raise SchemaError(f"instance missing feature(s) {missing}")
            values = [values[n] for n in self.names]
        if len(values) != len(self.features):
            raise SchemaError(f"instance has {len(values)} values, expected {len(self.features)}")
        return tuple(float(v) if f.is_numeric and isinstance(v, (int, float)) and not isinstance(v, bool)
                     else v for f, v in zip(self.features, values))

    def to_dict(self) -> list[dict]:
        return [f.to_dict() for f in self.features]

    @classmethod
    def from_dict(cls, entries: Sequence[dict]) -> "FeatureSpace":
        return cls(FeatureDef.from_dict(e) for e in entries)


@dataclass
class ValidationReport:
    violations: list[tuple[int | None, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_instance(space: FeatureSpace, inst: Sequence) -> ValidationReport:
    """Check ``inst`` against ``space``; every violation is reported, never raised.

    Violation indices are zero-based; a length mismatch is reported with index None.
    """
    report = ValidationReport()
    if len(inst) != len(space):
        report.violations.append((None, f"length {len(inst)} != {len(space)} features"))
    for h, (feat, value) in enumerate(zip(space.features, inst)):
        reason = feat.check(value)
        if reason is not None:
            report.violations.append((h, reason))
    return report


def load_instances_csv(space: FeatureSpace, text: Union[str, TextIO],
                       extra_columns: Sequence[str] = ()) -> list[Instance]:
    """Parse CSV rows into instances ordered like ``space``.

    Columns beyond the feature names are ignored unless listed in
    ``extra_columns``, in which case they are returned via :func:`read_csv_table`.
    """
    instances, _ = read_csv_table(space, text, extra_columns)
    return instances


def read_csv_table(space: FeatureSpace, text: Union[str, TextIO],
                   extra_columns: Sequence[str] = ()) -> tuple[list[Instance], list[dict]]:
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = [c.strip() for c in next(reader)]
    except StopIteration:
        raise SchemaError("CSV is empty") from None
    cols = {}
    for name in list(space.names) + list(extra_columns):
        if name not in header:
            raise SchemaError(f"CSV missing column {name!r}")
        cols[name] = header.index(name)
    instances, extras = [], []
    for r, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        values = []
        for feat in space:
            cell = row[cols[feat.name]] if cols[feat.name] < len(row) else ""
            try:
                values.append(feat.parse(cell))
            except ValueError:
                raise SchemaError(f"row {r}, column {feat.name!r}: cannot parse {cell!r}") from None
        inst = tuple(values)
        report = validate_instance(space, inst)
        if not report.ok:
            h, reason = report.violations[0]
            raise SchemaError(f"row {r}, column {space[h].name!r}: {reason}")
        instances.append(inst)
        extras.append({c: row[cols[c]].strip() for c in extra_columns})
    return instances, extras


def write_instances_csv(space: FeatureSpace, instances: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(space.names)
    for inst in instances:
        writer.writerow([f.format(v) for f, v in zip(space.features, inst)])
    return buf.getvalue()
