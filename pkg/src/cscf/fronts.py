"""Line-delimited JSON front files.

The first line is a header record (schema, instance id, provenance hashes);
every following line is one solution.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .feature_space import FeatureSpace
from .objectives import EvaluatedSolution

FRONT_SCHEMA = "cscf.front/1"


class FrontFileError(ValueError):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def solution_record(sol: EvaluatedSolution, instance_id: str) -> dict:
    return {
        "instance": instance_id,
        "actions": list(sol.sequence.action_ids),
        "values": list(sol.sequence.values),
        "trajectory": [list(s) for s in sol.states],
        "objectives": list(sol.objectives),
        "cost": sol.objectives[0],
        "cost_undiscounted": sol.cost_undiscounted,
        "gower": sol.objectives[1],
        "frequencies": list(sol.frequencies),
        "step_costs": list(sol.step_costs),
        "step_discounts": list(sol.step_discounts),
        "p_accept": sol.p_accept,
    }


def write_front(path: Path | str, instance_id: str, solutions: Iterable[EvaluatedSolution], *,
                space: FeatureSpace, manifest: str, classifier: str, method: str,
                extra: dict | None = None) -> None:
    """Write atomically: a temp file renamed into place."""
    records = [solution_record(s, instance_id) for s in solutions]
    header = {"schema": FRONT_SCHEMA, "instance": instance_id, "manifest": manifest,
              "classifier": classifier, "method": method, "features": space.names,
              "n_solutions": len(records)}
    if extra:
        header.update(extra)
    lines = [_dumps(header)] + [_dumps(r) for r in records]
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)


@dataclass
class FrontFile:
    header: dict
    records: list[dict] = field(default_factory=list)

    @property
    def instance(self) -> str:
        return self.header["instance"]


def read_front(path: Path | str) -> FrontFile:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FrontFileError(f"{path}: empty front file")
    try:
        header = json.loads(lines[0])
        records = [json.loads(ln) for ln in lines[1:]]
    except json.JSONDecodeError as exc:
        raise FrontFileError(f"{path}: invalid JSON line ({exc})") from None
    if header.get("schema") != FRONT_SCHEMA:
        raise FrontFileError(f"{path}: not a front file (schema {header.get('schema')!r})")
    return FrontFile(header, records)


def collect_fronts(paths: Iterable[Path | str]) -> list[FrontFile]:
    """Read front files; directories contribute every ``*.jsonl`` front inside."""
    out = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for child in sorted(p.glob("front_*.jsonl")):
                out.append(read_front(child))
        else:
            out.append(read_front(p))
    return out
