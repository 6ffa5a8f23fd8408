"""Action catalog, feasible value spaces, constraints and sequence rollout."""
from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Iterable, Sequence as Seq

from .feature_space import FeatureDef, FeatureSpace, Instance, SchemaError

INCREASE = "increase"
DECREASE = "decrease"
_DIRECTIONS = {"increase": INCREASE, "increase_only": INCREASE,
               "decrease": DECREASE, "decrease_only": DECREASE}


class CatalogError(ValueError):
    """Raised for inconsistent action definitions."""


# --------------------------------------------------------------------------
# effect rules

SET_TO_VALUE = "set_to_value"
SET_CONSTANT = "set_constant"
ADD_CONSTANT = "add_constant"
ADD_SCALED = "add_scaled"
SET_LEVEL = "set_level"
RULE_KINDS = (SET_TO_VALUE, SET_CONSTANT, ADD_CONSTANT, ADD_SCALED, SET_LEVEL)


@dataclass(frozen=True)
class EffectRule:
    target: int
    kind: str
    value: object = None

    def to_dict(self, space: FeatureSpace) -> dict:
        d = {"target": space[self.target].name, "kind": self.kind}
        if self.kind not in (SET_TO_VALUE,):
            d["value"] = self.value
        return d


def _check_rule(space: FeatureSpace, rule: EffectRule, direct: FeatureDef, where: str) -> None:
    if rule.kind not in RULE_KINDS:
        raise CatalogError(f"{where}: unknown rule kind {rule.kind!r}")
    if not 0 <= rule.target < len(space):
        raise CatalogError(f"{where}: rule targets nonexistent feature index {rule.target}")
    feat = space[rule.target]
    if rule.kind in (ADD_CONSTANT, ADD_SCALED):
        if not feat.is_numeric:
            raise CatalogError(f"{where}: {rule.kind} needs a numeric target, {feat.name!r} is {feat.kind}")
        if rule.kind == ADD_SCALED and direct.kind == "categorical":
            raise CatalogError(f"{where}: add_scaled needs a numeric or ordered direct feature")
        float(rule.value)
    elif rule.kind == SET_LEVEL:
        if not feat.is_categorical or not feat.has_level(rule.value):
            raise CatalogError(f"{where}: set_level {rule.value!r} invalid for {feat.name!r}")
    elif rule.kind == SET_TO_VALUE:
        if feat.kind != direct.kind or feat.levels != direct.levels:
            raise CatalogError(f"{where}: set_to_value on {feat.name!r} is incompatible with the direct feature")
    elif rule.kind == SET_CONSTANT:
        if feat.check(rule.value if not feat.is_numeric else float(rule.value)) is not None:
            raise CatalogError(f"{where}: constant {rule.value!r} invalid for {feat.name!r}")


# --------------------------------------------------------------------------
# feasible value space

RANGE = "range"
MONOTONE = "monotone"
LEVELS = "levels"
MONOTONE_LEVELS = "monotone_levels"
GRID = "grid"


@dataclass(frozen=True)
class ValueDescriptor:
    """Feasible tweaking values for an action's direct feature.

    ``range`` / ``monotone`` are continuous intervals on numeric features;
    ``levels`` is a fixed admissible subset; ``monotone_levels`` admits every
    level strictly above (or below) the current one; ``grid`` is an explicit
    finite list, optionally restricted to strict increase/decrease.
    """

    kind: str
    lo: float | None = None
    hi: float | None = None
    values: tuple = ()
    direction: str | None = None

    @property
    def is_finite(self) -> bool:
        return self.kind in (LEVELS, MONOTONE_LEVELS, GRID)

    def choices(self, feat: FeatureDef) -> tuple:
        """Ordered finite value list used for decoding; empty for intervals."""
        if self.kind == MONOTONE_LEVELS:
            return feat.levels
        if self.kind in (LEVELS, GRID):
            return self.values
        return ()

    def interpolate(self, feat: FeatureDef, key: float):
        """Map a random key in [0, 1] onto the descriptor's value set."""
        if self.is_finite:
            opts = self.choices(feat)
            return opts[min(int(key * len(opts)), len(opts) - 1)]
        return self.lo + key * (self.hi - self.lo)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind in (RANGE, MONOTONE):
            d.update(lo=self.lo, hi=self.hi)
        if self.kind in (LEVELS, GRID):
            d["values"] = list(self.values)
        if self.direction is not None:
            d["direction"] = self.direction
        return d


def numeric_range(lo, hi) -> ValueDescriptor:
    return ValueDescriptor(RANGE, lo=float(lo), hi=float(hi))


def numeric_monotone(direction, lo, hi) -> ValueDescriptor:
    return ValueDescriptor(MONOTONE, lo=float(lo), hi=float(hi), direction=_DIRECTIONS[direction])


def level_subset(labels: Iterable[str]) -> ValueDescriptor:
    return ValueDescriptor(LEVELS, values=tuple(labels))


def monotone_levels(direction) -> ValueDescriptor:
    return ValueDescriptor(MONOTONE_LEVELS, direction=_DIRECTIONS[direction])


def grid(values: Iterable, direction=None) -> ValueDescriptor:
    return ValueDescriptor(GRID, values=tuple(values),
                           direction=None if direction is None else _DIRECTIONS[direction])


def _strict(direction: str | None, current: float, v: float) -> bool:
    if direction == INCREASE:
        return v > current
    if direction == DECREASE:
        return v < current
    return True


def check_value_admissible(descriptor: ValueDescriptor, current, v, feat: FeatureDef | None = None) -> bool:
    """True iff ``v`` lies in the feasible value set relative to ``current``.

    ``feat`` is required for level-based descriptors on ordered features so
    that direction checks can compare level positions.
    """
    kind = descriptor.kind
    if kind in (RANGE, MONOTONE):
        if isinstance(v, (str, bool)) or not descriptor.lo <= v <= descriptor.hi:
            return False
        return _strict(descriptor.direction, current, v)
    if kind == LEVELS:
        return v in descriptor.values
    if kind == GRID:
        if v not in descriptor.values:
            return False
        if descriptor.direction is None:
            return True
        if feat is not None and not feat.is_numeric:
            return feat.is_ordered and _strict(descriptor.direction, feat.rank(current), feat.rank(v))
        return _strict(descriptor.direction, current, v)
    if kind == MONOTONE_LEVELS:
        if feat is None or not feat.is_ordered or not feat.has_level(v):
            return False
        return _strict(descriptor.direction, feat.rank(current), feat.rank(v))
    return False


def _check_descriptor(desc: ValueDescriptor, feat: FeatureDef, where: str) -> None:
    if desc.kind in (RANGE, MONOTONE):
        if not feat.is_numeric:
            raise CatalogError(f"{where}: {desc.kind} values need a numeric direct feature")
        if not (feat.min <= desc.lo <= desc.hi <= feat.max):
            raise CatalogError(f"{where}: value range [{desc.lo}, {desc.hi}] outside feature bounds")
        if desc.kind == MONOTONE and desc.direction is None:
            raise CatalogError(f"{where}: monotone values need a direction")
    elif desc.kind == LEVELS:
        if not desc.values or any(not feat.has_level(v) for v in desc.values):
            raise CatalogError(f"{where}: level subset must be non-empty declared levels")
    elif desc.kind == MONOTONE_LEVELS:
        if not feat.is_ordered or desc.direction is None:
            raise CatalogError(f"{where}: monotone_levels needs an ordered feature and a direction")
    elif desc.kind == GRID:
        if not desc.values:
            raise CatalogError(f"{where}: grid must be non-empty")
        for v in desc.values:
            if feat.check(v) is not None:
                raise CatalogError(f"{where}: grid value {v!r} invalid for {feat.name!r}")
        if desc.direction is not None and feat.kind == "categorical":
            raise CatalogError(f"{where}: directional grid needs an ordered or numeric feature")
    else:
        raise CatalogError(f"{where}: unknown value descriptor {desc.kind!r}")


# --------------------------------------------------------------------------
# constraints

_CMP = {"<": operator.lt, "<=": operator.le, "==": operator.eq, "=": operator.eq,
        "!=": operator.ne, ">=": operator.ge, ">": operator.gt}
_CMP_ALIASES = {"≤": "<=", "≥": ">=", "≠": "!=", "lt": "<", "le": "<=", "eq": "==",
                "ne": "!=", "ge": ">=", "gt": ">"}


@dataclass(frozen=True)
class Operand:
    """``feature`` reads the checked state, ``value`` the tweaking value, ``const`` a literal."""

    kind: str
    ref: object = None

    def to_dict(self, space: FeatureSpace):
        if self.kind == "feature":
            return {"feature": space[self.ref].name}
        if self.kind == "value":
            return {"value": True}
        return {"const": self.ref}


@dataclass(frozen=True)
class Predicate:
    op: str
    args: tuple = ()
    feature: int | None = None  # comparison context: decides how labels compare

    def evaluate(self, space: FeatureSpace, state: Seq, v) -> bool:
        op = self.op
        if op == "and":
            return all(a.evaluate(space, state, v) for a in self.args)
        if op == "or":
            return any(a.evaluate(space, state, v) for a in self.args)
        if op == "not":
            return not self.args[0].evaluate(space, state, v)
        feat = space[self.feature]
        left, right = (self._resolve(o, state, v) for o in self.args)
        if feat.is_ordered:
            left, right = feat.rank(left), feat.rank(right)
        return _CMP[op](left, right)

    @staticmethod
    def _resolve(operand: Operand, state: Seq, v):
        if operand.kind == "feature":
            return state[operand.ref]
        if operand.kind == "value":
            return v
        return operand.ref

    def to_dict(self, space: FeatureSpace) -> dict:
        if self.op in ("and", "or"):
            return {"op": self.op, "args": [a.to_dict(space) for a in self.args]}
        if self.op == "not":
            return {"op": "not", "arg": self.args[0].to_dict(space)}
        return {"op": self.op, "left": self.args[0].to_dict(space), "right": self.args[1].to_dict(space)}


def parse_predicate(tree: dict, space: FeatureSpace, direct: int) -> Predicate:
    """Build a predicate from its JSON-compatible tree.

    Comparison nodes look like ``{"op": ">=", "left": {"feature": "Age"},
    "right": {"const": 18}}``; ``{"value": true}`` stands for the tweaking
    value. Boolean nodes use ``{"op": "and"|"or", "args": [...]}`` and
    ``{"op": "not", "arg": {...}}``.
    """
    if not isinstance(tree, dict) or "op" not in tree:
        raise CatalogError(f"predicate node must be an object with 'op': {tree!r}")
    op = _CMP_ALIASES.get(tree["op"], tree["op"])
    if op in ("and", "or"):
        args = tree.get("args") or []
        if not args:
            raise CatalogError(f"{op!r} needs a non-empty 'args' list")
        return Predicate(op, tuple(parse_predicate(a, space, direct) for a in args))
    if op == "not":
        return Predicate("not", (parse_predicate(tree.get("arg"), space, direct),))
    if op not in _CMP:
        raise CatalogError(f"unknown predicate operator {tree['op']!r}")
    op = "==" if op == "=" else op
    try:
        left, right = _parse_operand(tree["left"], space), _parse_operand(tree["right"], space)
    except KeyError as exc:
        raise CatalogError(f"comparison missing {exc.args[0]!r}") from None
    ctx = None
    for o in (left, right):
        if o.kind == "feature":
            ctx = o.ref
            break
        if o.kind == "value" and ctx is None:
            ctx = direct
    if ctx is None:
        raise CatalogError("comparison must reference a feature or the tweaking value")
    feat = space[ctx]
    for o in (left, right):
        if o.kind == "const":
            if feat.is_numeric and (isinstance(o.ref, (str, bool)) or not isinstance(o.ref, (int, float))):
                raise CatalogError(f"constant {o.ref!r} is not comparable with numeric {feat.name!r}")
            if feat.is_categorical and not feat.has_level(o.ref):
                raise CatalogError(f"constant {o.ref!r} is not a level of {feat.name!r}")
    if feat.kind == "categorical" and op not in ("==", "!="):
        raise CatalogError(f"unordered feature {feat.name!r} only supports == and !=")
    return Predicate(op, (left, right), feature=ctx)


def _parse_operand(node, space: FeatureSpace) -> Operand:
    if isinstance(node, dict):
        if "feature" in node:
            return Operand("feature", space.resolve(node["feature"]))
        if "value" in node:
            return Operand("value")
        if "const" in node:
            return Operand("const", node["const"])
    raise CatalogError(f"bad operand {node!r}")


PRE = "pre"
POST = "post"


@dataclass(frozen=True)
class Constraint:
    phase: str
    predicate: Predicate

    def __post_init__(self):
        if self.phase not in (PRE, POST):
            raise CatalogError(f"constraint phase must be 'pre' or 'post', got {self.phase!r}")


# --------------------------------------------------------------------------
# actions and sequences

@dataclass(frozen=True)
class Action:
    id: str
    direct_feature: int
    value_space: ValueDescriptor
    direct_rule: EffectRule = None
    indirect_rules: tuple[EffectRule, ...] = ()
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        if self.direct_rule is None:
            object.__setattr__(self, "direct_rule", EffectRule(self.direct_feature, SET_TO_VALUE))
        object.__setattr__(self, "indirect_rules", tuple(self.indirect_rules))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.direct_rule.target != self.direct_feature:
            raise CatalogError(f"action {self.id!r}: direct rule must target the direct feature")
        if any(r.target == self.direct_feature for r in self.indirect_rules):
            raise CatalogError(f"action {self.id!r}: indirect rule targets the direct feature")

    @property
    def affected(self) -> frozenset[int]:
        return frozenset((self.direct_feature, *(r.target for r in self.indirect_rules)))


def validate_catalog(space: FeatureSpace, catalog: Seq[Action]) -> None:
    """Reject catalogs with duplicate ids or rules inconsistent with ``space``."""
    if not catalog:
        raise CatalogError("action catalog is empty")
    seen = set()
    for a in catalog:
        where = f"action {a.id!r}"
        if a.id in seen:
            raise CatalogError(f"duplicate action id {a.id!r}")
        seen.add(a.id)
        if not 0 <= a.direct_feature < len(space):
            raise CatalogError(f"{where}: direct feature index {a.direct_feature} out of range")
        direct = space[a.direct_feature]
        _check_descriptor(a.value_space, direct, where)
        for rule in (a.direct_rule, *a.indirect_rules):
            _check_rule(space, rule, direct, where)


@dataclass(frozen=True)
class Sequence:
    """Ordered (action id, tweaking value) pairs; each action at most once."""

    pairs: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        pairs = tuple((str(a), v) for a, v in self.pairs)
        ids = [a for a, _ in pairs]
        if len(set(ids)) != len(ids):
            raise CatalogError(f"sequence uses an action more than once: {ids}")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def action_ids(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.pairs)

    @property
    def values(self) -> tuple:
        return tuple(v for _, v in self.pairs)


def catalog_index(catalog: Seq[Action]) -> dict[str, Action]:
    return {a.id: a for a in catalog}


def _apply_rule(space: FeatureSpace, state: list, rule: EffectRule, v, delta: float) -> None:
    feat = space[rule.target]
    kind = rule.kind
    if kind == SET_TO_VALUE:
        new = v
    elif kind in (SET_CONSTANT, SET_LEVEL):
        new = rule.value
    elif kind == ADD_CONSTANT:
        new = state[rule.target] + float(rule.value)
    elif kind == ADD_SCALED:
        new = state[rule.target] + float(rule.value) * abs(delta)
    else:
        raise CatalogError(f"unknown rule kind {kind!r}")
    if feat.is_numeric:
        new = feat.clamp(new)
    state[rule.target] = new


def apply_action(space: FeatureSpace, state: Seq, action: Action, v) -> Instance:
    """Apply the direct rule with ``v``, then the indirect rules in order.

    Numeric results are clamped to the schema bounds after every rule.
    """
    h = action.direct_feature
    feat = space[h]
    if feat.is_numeric:
        if isinstance(v, (str, bool)) or not isinstance(v, (int, float)):
            raise TypeError(f"action {action.id!r}: numeric feature {feat.name!r} got value {v!r}")
    elif not feat.has_level(v):
        raise TypeError(f"action {action.id!r}: {v!r} is not a level of {feat.name!r}")
    for rule in (action.direct_rule, *action.indirect_rules):
        if not 0 <= rule.target < len(space):
            raise CatalogError(f"action {action.id!r}: rule targets nonexistent feature {rule.target}")
    out = list(state)
    before = feat.rank(state[h])
    _apply_rule(space, out, action.direct_rule, v, 0.0)
    delta = feat.rank(out[h]) - before
    for rule in action.indirect_rules:
        _apply_rule(space, out, rule, v, delta)
    return tuple(out)


@dataclass
class StepCheck:
    action_id: str
    value: object
    value_ok: bool
    pre_ok: tuple[bool, ...]
    post_ok: tuple[bool, ...]

    @property
    def violations(self) -> int:
        return (not self.value_ok) + self.pre_ok.count(False) + self.post_ok.count(False)


@dataclass
class Rollout:
    states: list[Instance]
    steps: list[StepCheck] = field(default_factory=list)

    @property
    def violation_count(self) -> int:
        return sum(s.violations for s in self.steps)

    @property
    def overall_valid(self) -> bool:
        return self.violation_count == 0

    @property
    def final(self) -> Instance:
        return self.states[-1]


def rollout(space: FeatureSpace, x0: Seq, catalog, seq: Sequence) -> Rollout:
    """Replay ``seq`` from ``x0`` recording every failed check.

    The trajectory is always completed so infeasible sequences can still be
    ranked by how many checks they fail.
    """
    index = catalog if isinstance(catalog, dict) else catalog_index(catalog)
    state = tuple(x0)
    result = Rollout(states=[state])
    for aid, v in seq:
        try:
            action = index[aid]
        except KeyError:
            raise CatalogError(f"unknown action id {aid!r}") from None
        h = action.direct_feature
        pre = tuple(c.predicate.evaluate(space, state, v) for c in action.constraints if c.phase == PRE)
        value_ok = check_value_admissible(action.value_space, state[h], v, space[h])
        state = apply_action(space, state, action, v)
        post = tuple(c.predicate.evaluate(space, state, v) for c in action.constraints if c.phase == POST)
        result.states.append(state)
        result.steps.append(StepCheck(aid, v, value_ok, pre, post))
    return result


# --------------------------------------------------------------------------
# (de)serialization

def rule_from_dict(d: dict, space: FeatureSpace, default_target: int | None = None) -> EffectRule:
    target = space.resolve(d["target"]) if "target" in d else default_target
    if target is None:
        raise CatalogError(f"effect rule missing 'target': {d!r}")
    kind = d.get("kind", SET_TO_VALUE)
    value = d.get("value")
    if kind in (ADD_CONSTANT, ADD_SCALED, SET_CONSTANT) and space[target].is_numeric:
        if value is None:
            raise CatalogError(f"rule {kind!r} on {space[target].name!r} needs a 'value'")
        value = float(value)
    return EffectRule(target, kind, value)


def descriptor_from_dict(d: dict) -> ValueDescriptor:
    kind = d.get("kind")
    try:
        if kind in ("range", "numeric_range"):
            return numeric_range(d["lo"], d["hi"])
        if kind in ("monotone", "numeric_monotone"):
            return numeric_monotone(d["direction"], d["lo"], d["hi"])
        if kind in ("levels", "level_subset"):
            return level_subset(d["values"])
        if kind == "monotone_levels":
            return monotone_levels(d["direction"])
        if kind == "grid":
            vals = [float(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v
                    for v in d["values"]]
            return grid(vals, d.get("direction"))
    except KeyError as exc:
        raise CatalogError(f"value descriptor {kind!r} missing {exc.args[0]!r}") from None
    raise CatalogError(f"unknown value descriptor kind {kind!r}")


def action_from_dict(d: dict, space: FeatureSpace) -> Action:
    try:
        aid = str(d["id"])
        h = space.resolve(d["feature"])
        values = descriptor_from_dict(d["values"])
    except KeyError as exc:
        raise CatalogError(f"action entry missing {exc.args[0]!r}") from None
    direct = rule_from_dict(d.get("direct", {}), space, default_target=h)
    indirect = tuple(rule_from_dict(r, space) for r in d.get("indirect", ()))
    constraints = []
    for c in d.get("constraints", ()):
        constraints.append(Constraint(c.get("phase", PRE), parse_predicate(c.get("predicate"), space, h)))
    return Action(aid, h, values, direct, indirect, tuple(constraints))


def action_to_dict(action: Action, space: FeatureSpace) -> dict:
    d = {"id": action.id, "feature": space[action.direct_feature].name,
         "values": action.value_space.to_dict()}
    direct = action.direct_rule.to_dict(space)
    direct.pop("target")
    if direct != {"kind": SET_TO_VALUE}:
        d["direct"] = direct
    if action.indirect_rules:
        d["indirect"] = [r.to_dict(space) for r in action.indirect_rules]
    if action.constraints:
        d["constraints"] = [{"phase": c.phase, "predicate": c.predicate.to_dict(space)}
                            for c in action.constraints]
    return d


def catalog_from_dicts(entries: Seq[dict], space: FeatureSpace) -> list[Action]:
    try:
        catalog = [action_from_dict(e, space) for e in entries]
    except SchemaError as exc:
        raise CatalogError(str(exc)) from None
    validate_catalog(space, catalog)
    return catalog
