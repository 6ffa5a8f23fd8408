"""Problem-definition files: one JSON document describing features, actions,
costs, the black-box model, optimizer settings and the instances to explain."""
from __future__ import annotations

import hashlib
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__
from .actions import Action, action_from_dict, action_to_dict, validate_catalog
from .brkga import BrkgaParams
from .classifier import BlackBox, ModelSpec, load_model, model_to_dict
from .consequence import CostConfig, effort_from_dict, graph_from_dict, graph_to_dict
from .feature_space import FeatureSpace, read_csv_table, validate_instance
from .objectives import Problem

PROBLEM_SCHEMA = "cscf.problem/1"


class ProblemFileError(ValueError):
    """Invalid problem file; ``path`` points at the offending entry."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class ProblemDefinition:
    space: FeatureSpace
    catalog: list[Action]
    cost: CostConfig
    model: ModelSpec
    params: BrkgaParams = field(default_factory=BrkgaParams)
    instances: list[tuple[str, tuple]] = field(default_factory=list)
    grids: dict[str, list] = field(default_factory=dict)
    digest: str = ""

    @property
    def blackbox(self) -> BlackBox:
        bb = self.__dict__.get("_blackbox")
        if bb is None:
            bb = self.__dict__["_blackbox"] = BlackBox(self.space, self.model)
        return bb

    def problem(self, x0, discount: bool | None = None) -> Problem:
        cost = self.cost
        if discount is False:
            cost = cost.without_discount()
        return Problem(self.space, self.catalog, cost, self.blackbox, x0)


@contextmanager
def _section(path: str):
    """Re-raise domain errors as ProblemFileError tagged with ``path``."""
    try:
        yield
    except ProblemFileError:
        raise
    except KeyError as exc:
        raise ProblemFileError(path, f"missing {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(path, str(exc)) from exc
    except OSError as exc:
        raise ProblemFileError(path, f"cannot read {exc.filename}: {exc.strerror}") from exc


def parse_problem(doc: dict, base_dir: Path | str = ".") -> ProblemDefinition:
    """Build a :class:`ProblemDefinition`, resolving every cross-reference."""
    base = Path(base_dir)
    if not isinstance(doc, dict):
        raise ProblemFileError("", "problem file must be a JSON object")
    schema = doc.get("schema", PROBLEM_SCHEMA)
    if schema != PROBLEM_SCHEMA:
        raise ProblemFileError("schema", f"unsupported schema {schema!r}")
    if "features" not in doc:
        raise ProblemFileError("features", "section is required")
    with _section("features"):
        space = FeatureSpace.from_dict(doc["features"])

    catalog = []
    for i, entry in enumerate(doc.get("actions") or []):
        with _section(f"actions[{i}]"):
            catalog.append(action_from_dict(entry, space))
    with _section("actions"):
        validate_catalog(space, catalog)

    graph = None
    if doc.get("consequence_graph"):
        with _section("consequence_graph"):
            graph = graph_from_dict(doc["consequence_graph"], space)

    efforts = {}
    ids = {a.id for a in catalog}
    for aid, ed in (doc.get("efforts") or {}).items():
        if aid not in ids:
            raise ProblemFileError(f"efforts.{aid}", "unknown action id")
        with _section(f"efforts.{aid}"):
            efforts[aid] = effort_from_dict(ed)
    cost = CostConfig(efforts, graph, bool((doc.get("cost") or {}).get("discount_enabled", True)))
    with _section("efforts"):
        cost.check_catalog(catalog)

    clf = doc.get("classifier")
    if not clf:
        raise ProblemFileError("classifier", "section is required")
    with _section("classifier"):
        if "path" in clf:
            model_doc = (base / clf["path"]).read_text()
        else:
            model_doc = clf["model"]
        model = load_model(model_doc, space)
        BlackBox(space, model)

    with _section("brkga"):
        params_doc = dict(doc.get("brkga") or {})
        if "seed" in doc:
            params_doc.setdefault("seed", int(doc["seed"]))
        params = BrkgaParams(**params_doc)

    grids = {}
    for aid, values in (doc.get("grids") or {}).items():
        if aid not in ids:
            raise ProblemFileError(f"grids.{aid}", "unknown action id")
        grids[aid] = list(values)

    instances = _parse_instances(doc.get("instances") or [], space, base)
    digest = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
    return ProblemDefinition(space, catalog, cost, model, params, instances, grids, digest)


def _parse_instances(section: Any, space: FeatureSpace, base: Path) -> list[tuple[str, tuple]]:
    out = []
    if isinstance(section, dict) and "csv" in section:
        id_col = section.get("id_column")
        with _section("instances.csv"):
            text = (base / section["csv"]).read_text()
            rows, extras = read_csv_table(space, text, [id_col] if id_col else [])
        for r, (inst, extra) in enumerate(zip(rows, extras)):
            out.append((extra[id_col] if id_col else str(r), inst))
        return out
    if not isinstance(section, list):
        raise ProblemFileError("instances", "expected a list or {'csv': path}")
    for i, entry in enumerate(section):
        with _section(f"instances[{i}]"):
            if isinstance(entry, dict) and "values" in entry:
                iid, values = str(entry.get("id", i)), entry["values"]
            elif isinstance(entry, dict):
                values = {k: v for k, v in entry.items() if k != "id"}
                iid = str(entry.get("id", i))
            else:
                iid, values = str(i), entry
            inst = space.instance(values)
            report = validate_instance(space, inst)
            if not report.ok:
                h, reason = report.violations[0]
                name = space[h].name if h is not None else "length"
                raise ProblemFileError(f"instances[{i}].{name}", reason)
        out.append((iid, inst))
    ids = [iid for iid, _ in out]
    if len(set(ids)) != len(ids):
        raise ProblemFileError("instances", "duplicate instance ids")
    return out


def load_problem(path: Path | str) -> ProblemDefinition:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ProblemFileError("", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ProblemFileError("", f"invalid JSON: {exc}") from None
    return parse_problem(doc, path.parent)


def problem_to_dict(defn: ProblemDefinition, include_instances: bool = True) -> dict:
    space = defn.space
    doc = {
        "schema": PROBLEM_SCHEMA,
        "features": space.to_dict(),
        "actions": [action_to_dict(a, space) for a in defn.catalog],
        "efforts": {aid: e.to_dict() for aid, e in defn.cost.efforts.items()},
        "cost": {"discount_enabled": defn.cost.discount_enabled},
        "classifier": {"model": model_to_dict(defn.model, space)},
        "brkga": defn.params.to_dict(),
    }
    if defn.cost.graph is not None:
        doc["consequence_graph"] = graph_to_dict(defn.cost.graph, space)
    if defn.grids:
        doc["grids"] = defn.grids
    if include_instances:
        doc["instances"] = [{"id": iid, "values": list(inst)} for iid, inst in defn.instances]
    return doc


def manifest_hash(digest: str, seed: int) -> str:
    blob = f"{digest}:{seed}:{__version__}"
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
